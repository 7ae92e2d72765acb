"""Two adaptive attacks against a plain Bernoulli sample, and the same attacks
against the noisy adaptive-rate sketch.

The plain sketch reports |S|/p, so every sampled insert moves the estimate by
exactly 1/p and the adversary learns sample membership. Re-inserting sampled
keys halves the inclusion rate to p**2; deleting them empties the sample.

Run: python3 demos/attack_on_bernoulli.py
"""

import warnings

from sketchlab.adversary import ReinsertionAttack, SampleAndDeleteAttack, membership_tol
from sketchlab.cardinality import BernoulliCardSketch, RobustAdaptiveCard, card_params, tree_capacity
from sketchlab.rng import RandomSource
from sketchlab.stream import CARDINALITY, ExactTracker

T, P = 5000, 0.1


def duel(sketch, adversary):
    tracker, est = ExactTracker([CARDINALITY]), None
    while (op := adversary.next_op(est)) is not None:
        est = sketch.process(op)
        tracker.apply(op)
    return est, tracker.statistic(CARDINALITY)


def main():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        k, alpha, eps_dp = card_params(0.3, 0.05, 2 * T)
    print(f"budget {T} fresh keys; plain sketch p={P}; robust sketch k={k}, alpha={alpha:.0f}")
    print(f"{'sketch':<10}{'attack':<15}{'estimate':>10}{'truth':>8}")
    for attack in (ReinsertionAttack, SampleAndDeleteAttack):
        plain = BernoulliCardSketch(P, RandomSource(1))
        est, truth = duel(plain, attack(T, membership_tol(P)))
        print(f"{'plain':<10}{attack.kind:<15}{est:>10.0f}{truth:>8.0f}")
        robust = RobustAdaptiveCard(k, alpha, eps_dp, tree_capacity(2 * T), RandomSource(1))
        est, truth = duel(robust, attack(T))
        print(f"{'robust':<10}{attack.kind:<15}{est:>10.0f}{truth:>8.0f}")
    # the plain estimate after re-insertion sits near p*T although all T keys
    # are present; after sample-and-delete it is exactly 0


if __name__ == "__main__":
    main()
