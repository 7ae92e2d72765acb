"""Sketch switching across dyadic scales for a resettable sum.

A ramp of unit increments is followed by a reset of every key and a second,
smaller ramp. The reporting index only moves up, so after the reset the
sketch keeps the coarse scale it reached and the error stays within a
fraction of the prefix maximum rather than of the current sum.

Run: python3 demos/sum_switching.py
"""

from sketchlab.rng import NoiseMode, RandomSource
from sketchlab.stream import SUM, ExactTracker, Inc, KeyRange, ResetPred
from sketchlab.sums import PrefixMaxSum


def main():
    ops = [Inc(k, 1.0) for k in range(2048)] + [ResetPred(KeyRange(0, 2047))]
    ops += [Inc(k, 1.0) for k in range(300)]
    for label, mode in [("zero noise", NoiseMode.ZERO), ("live noise", NoiseMode.LIVE)]:
        sk = PrefixMaxSum(0.3, 0.1, len(ops), 2**12, RandomSource(4, mode))
        tracker = ExactTracker([SUM])
        print(label)
        for t, op in enumerate(ops, start=1):
            est = sk.process(op)
            tracker.apply(op)
            if t in (16, 256, 2048, 2049, 2349):
                print(f"  t={t:<5} active scale 2^{sk.active:<3} estimate {est:9.1f}  "
                      f"truth {tracker.statistic(SUM):7.0f}  prefix max {tracker.prefix_max[SUM]:.0f}")


if __name__ == "__main__":
    main()
