"""Estimating sum_x f(v_x) for a few Bernstein functions.

Each function is reduced to one sum sketch plus one cardinality sketch per
level of a geometric grid. The example prints the grid size and compares the
estimate with the exact statistic on a weighted stream.

Run: python3 demos/bernstein_statistics.py
"""

from sketchlab.bernstein import BernsteinSketch, parse_function, plan_levels
from sketchlab.rng import NoiseMode, RandomSource
from sketchlab.stream import Bernstein, ExactTracker, generate_stream


def main():
    ops = generate_stream("weighted:300:1:4", RandomSource(0))
    for spec in ("softcap:10", "moment:0.5", "log1p"):
        f = parse_function(spec)
        plan = plan_levels(f, 0.25, len(ops), 1.0, 4.0, r=64)
        sk = BernsteinSketch(plan, 0.05, 1.0, 4.0, RandomSource(1, NoiseMode.ZERO))
        stat = Bernstein(f)
        tracker = ExactTracker([stat])
        for op in ops:
            est = sk.process(op)
            tracker.apply(op)
        truth = tracker.statistic(stat)
        print(f"{spec:<12} levels={plan.m:<4} estimate={est:10.2f} exact={truth:10.2f} "
              f"rel.err={abs(est - truth) / truth:.3f}")


if __name__ == "__main__":
    main()
