"""Adaptively robust sketches for resettable streams."""

from .adversary import (DuelOutcome, NonAdaptive, ReinsertionAttack, Replay,
                        SampleAndDeleteAttack, detect_change)
from .bernstein import (BernsteinSketch, ElementMapper, LevelPlan, Log1p, Moment, SoftCap,
                        exact_bernstein_oracle, plan_levels)
from .cardinality import (BernoulliCardSketch, RobustAdaptiveCard, RobustFixedCard, card_params,
                          tree_capacity)
from .harness import ExperimentConfig, Metrics, TraceRecord, run_experiment, read_csv, write_csv
from .rng import NoiseMode, RandomSource, derive_seed
from .stream import (CARDINALITY, SUM, Bernstein, Delete, ExactTracker, Inc, Insert, KeyRange,
                     KeySet, ResetKey, ResetPred, exact_statistic, generate_stream,
                     parse_stream_file, to_cardinality_stream)
from .sums import PrefixMaxSum, ResettableSumSketch, RobustSumFixed, ThresholdSumSketch, sum_params
from .tree import TreeCapacityError, TreeMechanism

__version__ = "0.1.0"
