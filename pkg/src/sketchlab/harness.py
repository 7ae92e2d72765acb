"""Experiment runner: input source x sketch x exact oracle, traces and metrics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields

from .adversary import NonAdaptive, ReinsertionAttack, Replay, SampleAndDeleteAttack, membership_tol
from .bernstein import BernsteinSketch, parse_function, plan_levels
from .cardinality import (BernoulliCardSketch, RobustAdaptiveCard, RobustFixedCard,
                          card_params, tree_capacity)
from .rng import NoiseMode, RandomSource, derive_seed
from .stream import (CARDINALITY, SUM, Bernstein, ExactTracker, format_op, generate_stream,
                     parse_stream_file)
from .sums import PrefixMaxSum, ResettableSumSketch, RobustSumFixed

SKETCHES = ("card-bernoulli", "card-robust-fixed", "card-robust-adaptive",
            "sum-basic", "sum-robust", "sum-prefixmax", "bernstein")
ATTACKS = ("none", "reinsert", "sample-delete")
CSV_HEADER = ["t", "op", "estimate", "truth", "prefix_max", "abs_err", "norm_err"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    sketch: str = "card-bernoulli"
    eps: float = 0.3
    delta: float = 0.05
    T: int = 1000
    p: float = 1.0
    tau: float = 1.0
    scale_max: float | None = None
    f: str = "softcap:10"
    r: int = 64
    dmin: float = 1.0
    dmax: float = 1.0
    k_const: float = 1.0
    alpha_const: float = 1.0
    attack: str = "none"
    gen: str | None = None
    stream: str | None = None
    seed: int = 0
    trials: int = 1
    noise: str = "live"
    out: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.sketch not in SKETCHES:
            raise ConfigError(f"unknown sketch {self.sketch!r}; choose from {', '.join(SKETCHES)}")
        if not (self.attack in ATTACKS or self.attack.startswith("replay:")):
            raise ConfigError(f"unknown attack {self.attack!r}")
        sources = [self.attack != "none", self.gen is not None, self.stream is not None]
        if sum(sources) > 1:
            raise ConfigError("choose at most one of --attack, --gen, --stream")
        if self.T < 1 or self.trials < 0:
            raise ConfigError("T must be positive and trials nonnegative")
        if not (self.eps > 0 and 0 < self.delta < 1):
            raise ConfigError("need eps > 0 and delta in (0, 1)")
        if not 0 < self.p <= 1:
            raise ConfigError("p must lie in (0, 1]")
        if self.noise not in ("live", "zero"):
            raise ConfigError("noise must be live or zero")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.sketch == "bernstein":
            try:
                parse_function(self.f)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        return cls(**data)


@dataclass
class TraceRecord:
    t: int
    op: str
    estimate: float
    truth: float
    prefix_max: float
    abs_err: float
    norm_err: float


def make_record(t: int, op: str, estimate: float, truth: float, prefix_max: float) -> TraceRecord:
    # negative estimates are clamped for error metrics only
    abs_err = abs(max(estimate, 0.0) - truth)
    return TraceRecord(t, op, estimate, truth, prefix_max, abs_err, abs_err / max(prefix_max, 1.0))


@dataclass
class Metrics:
    max_norm_err: float = 0.0
    final_bias: float = 0.0
    max_sample_size: int = 0
    halvings: int = 0
    tree_counters_peak: int = 0


@dataclass
class TrialResult:
    trial: int
    seed: int
    metrics: Metrics
    trace: list = field(default_factory=list)
    error: str | None = None
    sketch: object = None


def statistic_for(cfg: ExperimentConfig):
    if cfg.sketch.startswith("card"):
        return CARDINALITY
    if cfg.sketch.startswith("sum"):
        return SUM
    return Bernstein(parse_function(cfg.f))


def make_sketch(cfg: ExperimentConfig, horizon: int, rng: RandomSource):
    """Build the selected sketch for a stream of at most ``horizon`` ops."""
    T = max(horizon, 2)
    name = cfg.sketch
    if name == "card-bernoulli":
        return BernoulliCardSketch(cfg.p, rng)
    if name == "card-robust-fixed":
        return RobustFixedCard(cfg.p, cfg.eps, T, rng)
    if name == "card-robust-adaptive":
        k, alpha, eps_dp = card_params(cfg.eps, cfg.delta, T, cfg.k_const, cfg.alpha_const)
        return RobustAdaptiveCard(k, alpha, eps_dp, tree_capacity(T), rng, p0=cfg.p)
    if name == "sum-basic":
        return ResettableSumSketch(cfg.tau, rng)
    if name == "sum-robust":
        return RobustSumFixed(cfg.tau, cfg.tau * math.log(T / cfg.delta), cfg.eps, T, rng)
    if name == "sum-prefixmax":
        scale = cfg.scale_max if cfg.scale_max is not None else max(T * cfg.dmax, 2)
        return PrefixMaxSum(cfg.eps, cfg.delta, T, scale, rng)
    if name == "bernstein":
        plan = plan_levels(parse_function(cfg.f), cfg.eps, T, cfg.dmin, cfg.dmax, cfg.r)
        return BernsteinSketch(plan, cfg.delta, cfg.dmin, cfg.dmax, rng)
    raise ConfigError(f"unknown sketch {name!r}")


def sketch_trees(sketch) -> list:
    """Every tree mechanism inside a sketch, in a stable order."""
    if hasattr(sketch, "tree"):
        return [sketch.tree]
    if isinstance(sketch, PrefixMaxSum):
        return [inst.tree for inst in sketch.instances if inst is not None]
    if isinstance(sketch, BernsteinSketch):
        return sketch_trees(sketch.sum_sketch) + [c.tree for c in sketch.card_sketches]
    return []


def make_source(cfg: ExperimentConfig, rng: RandomSource):
    """Return ``(adversary, horizon)``."""
    attack = cfg.attack
    tol = membership_tol(cfg.p) if cfg.sketch in ("card-bernoulli", "card-robust-fixed") else 0.0
    if attack == "reinsert":
        return ReinsertionAttack(cfg.T, tol), 2 * cfg.T
    if attack == "sample-delete":
        return SampleAndDeleteAttack(cfg.T, tol), 2 * cfg.T
    if attack.startswith("replay:"):
        ops = parse_stream_file(attack.split(":", 1)[1])
        return Replay(ops), len(ops)
    if cfg.stream is not None:
        ops = parse_stream_file(cfg.stream)
    elif cfg.gen is not None:
        ops = generate_stream(cfg.gen, rng.child("gen"))
    else:
        raise ConfigError("no input: give --attack, --gen or --stream")
    return NonAdaptive(ops), len(ops)


def run_trial(cfg: ExperimentConfig, trial: int, record_trace: bool = True,
              dump_noise: bool = False) -> TrialResult:
    seed = derive_seed(cfg.seed, trial)
    rng = RandomSource(seed, NoiseMode(cfg.noise))
    result = TrialResult(trial, seed, Metrics())
    try:
        source, horizon = make_source(cfg, rng)
        sketch = make_sketch(cfg, horizon, rng.child("sketch"))
        result.sketch = sketch
        if dump_noise:
            for tree in sketch_trees(sketch):
                tree.ledger = []
        stat = statistic_for(cfg)
        tracker = ExactTracker([stat])
        m = result.metrics
        estimate = None
        while True:
            op = source.next_op(estimate)
            if op is None:
                break
            estimate = sketch.process(op)
            tracker.apply(op)
            truth = tracker.statistic(stat)
            rec = make_record(tracker.t, format_op(op), estimate, truth, tracker.prefix_max[stat])
            m.max_norm_err = max(m.max_norm_err, rec.norm_err)
            m.final_bias = estimate - truth
            m.max_sample_size = max(m.max_sample_size, sketch.sample_size)
            if record_trace:
                result.trace.append(rec)
        diag = sketch.diagnostics()
        m.halvings = diag.get("halvings", 0)
        m.tree_counters_peak = diag.get("tree_counters_peak", 0)
    except (OSError, ValueError, RuntimeError, OverflowError) as exc:
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def run_experiment(cfg: ExperimentConfig, record_trace: bool = True,
                   dump_noise: bool = False) -> list:
    """Run every trial; trial ``i`` uses the seed ``derive_seed(cfg.seed, i)``."""
    cfg.validate()
    return [run_trial(cfg, i, record_trace, dump_noise) for i in range(cfg.trials)]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in trace:
            w.writerow([r.t, r.op, _fmt(r.estimate), _fmt(r.truth), _fmt(r.prefix_max),
                        _fmt(r.abs_err), _fmt(r.norm_err)])


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [TraceRecord(int(t), op, *map(float, rest)) for t, op, *rest in rows]
