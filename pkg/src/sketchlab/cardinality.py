"""Cardinality-with-deletions sketches.

``BernoulliCardSketch`` is the classic fixed-rate Bernoulli sample with the
``|S|/p`` estimator. ``RobustFixedCard`` releases the same estimate through a
tree mechanism fed with sample-size changes, and ``RobustAdaptiveCard`` also
halves its rate whenever the noisy sample size approaches the budget ``k``.

All three accept Insert/Delete plus the resettable forms: ``Inc`` with a
positive delta is treated as an insert and ``ResetKey``/``ResetPred`` as
deletes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .rng import RandomSource
from .stream import Delete, Inc, Insert, ResetKey, ResetPred
from .tree import TreeMechanism


@dataclass
class CardEstimate:
    value: float
    t: int


def _apply_to_sample(sample: set, op, p: float, rng: RandomSource) -> None:
    if isinstance(op, Insert) or (isinstance(op, Inc) and op.delta > 0):
        sample.discard(op.key)
        if rng.bernoulli(p):
            sample.add(op.key)
    elif isinstance(op, (Delete, ResetKey)):
        sample.discard(op.key)
    elif isinstance(op, ResetPred):
        pred = op.pred
        sample.difference_update([x for x in sample if x in pred])
    elif not isinstance(op, Inc):
        raise TypeError(f"unsupported op {op!r}")


class BernoulliCardSketch:
    """Fixed-rate Bernoulli sample of the active keys."""

    def __init__(self, p: float, rng: RandomSource):
        if not 0 < p <= 1:
            raise ValueError("p must lie in (0, 1]")
        self.p = p
        self.rng = rng
        self.sample: set = set()
        self.t = 0

    @property
    def sample_size(self) -> int:
        return len(self.sample)

    def estimate(self) -> float:
        return len(self.sample) / self.p

    def process(self, op) -> float:
        _apply_to_sample(self.sample, op, self.p, self.rng)
        self.t += 1
        return len(self.sample) / self.p

    def diagnostics(self) -> dict:
        return {"sample_size": len(self.sample)}


class RobustFixedCard:
    """Bernoulli sample whose size is released through a tree mechanism (L=2).

    Sampling draws come from ``rng`` itself and node noise from
    ``rng.child("tree")``, so with zero noise the estimates coincide with a
    ``BernoulliCardSketch`` built on the same seed.
    """

    L = 2.0

    def __init__(self, p: float, eps_dp: float, capacity: int, rng: RandomSource):
        self.inner = BernoulliCardSketch(p, rng)
        self.tree = TreeMechanism(capacity, self.L, eps_dp, rng.child("tree"))
        self.noisy_size = 0.0

    @property
    def p(self) -> float:
        return self.inner.p

    @property
    def sample_size(self) -> int:
        return self.inner.sample_size

    def process(self, op) -> float:
        before = self.inner.sample_size
        self.inner.process(op)
        self.noisy_size = self.tree.update_and_report(self.inner.sample_size - before).value
        return self.noisy_size / self.p

    def diagnostics(self) -> dict:
        return {"sample_size": self.inner.sample_size,
                "tree_counters_peak": self.tree.max_live}


class RobustAdaptiveCard:
    """Adjustable-rate robust cardinality sketch.

    After each op the sample-size change goes to the tree mechanism. While the
    noisy size exceeds ``k - alpha`` the rate is halved, the sample is thinned
    by fair coins, and the resulting size change is reported as another tree
    step. At most ``max_adjust`` halvings run per op; hitting that cap is
    counted in ``stalls``.
    """

    L = 2.0

    def __init__(self, k: float, alpha: float, eps_dp: float, capacity: int,
                 rng: RandomSource, p0: float = 1.0, max_adjust: int = 64,
                 record_noise: bool = False):
        if not 0 < p0 <= 1:
            raise ValueError("p0 must lie in (0, 1]")
        self.k = k
        self.alpha = alpha
        self.p0 = p0
        self.p = p0
        self.rng = rng
        self.tree = TreeMechanism(capacity, self.L, eps_dp, rng.child("tree"),
                                  record_noise=record_noise)
        self.sample: set = set()
        self.s_prev = 0
        self.noisy_size = 0.0
        self.halvings = 0
        self.max_adjust = max_adjust
        self.stalls = 0
        self.max_sample_size = 0
        self.t = 0

    @property
    def sample_size(self) -> int:
        return len(self.sample)

    def _halve(self) -> None:
        self.p /= 2
        self.halvings += 1
        bern = self.rng.bernoulli
        self.sample = {x for x in sorted(self.sample) if bern(0.5)}

    def process(self, op) -> float:
        _apply_to_sample(self.sample, op, self.p, self.rng)
        self.t += 1
        s = len(self.sample)
        if s > self.max_sample_size:
            self.max_sample_size = s
        self.noisy_size = self.tree.update_and_report(s - self.s_prev).value
        self.s_prev = s
        adjustments = 0
        while self.noisy_size > self.k - self.alpha:
            if adjustments == self.max_adjust:
                self.stalls += 1
                break
            self._halve()
            adjustments += 1
            s = len(self.sample)
            self.noisy_size = self.tree.update_and_report(s - self.s_prev).value
            self.s_prev = s
        return self.noisy_size / self.p

    def estimate(self) -> float:
        return self.noisy_size / self.p

    def diagnostics(self) -> dict:
        return {"sample_size": len(self.sample),
                "max_sample_size": self.max_sample_size,
                "halvings": self.halvings,
                "stalls": self.stalls,
                "tree_counters_peak": self.tree.max_live}


def tree_capacity(T: int) -> int:
    """Tree horizon for the adaptive sketch: ``T`` ops plus room for halvings."""
    return T + 2 * math.ceil(math.log2(max(T, 2)))


def card_params(eps: float, delta: float, T: int, k_const: float = 1.0,
                alpha_const: float = 1.0) -> tuple:
    """Budget ``k``, margin ``alpha`` and ``eps_dp`` for ``RobustAdaptiveCard``.

    ``k = k_const * log2(T)**1.5 * ln(T/delta) / eps**2`` and
    ``alpha = alpha_const * log2(T)**1.5 * ln(T/delta) / eps_dp`` with
    ``eps_dp = eps``. If the constants give ``k < 4 * alpha``, ``k`` is raised to
    ``4 * alpha`` and a warning is issued.
    """
    if not (eps > 0 and 0 < delta < 1):
        raise ValueError("need eps > 0 and delta in (0, 1)")
    if T < 2:
        raise ValueError("T must be at least 2")
    eps_dp = eps
    base = math.log2(T) ** 1.5 * math.log(T / delta)
    k = math.ceil(k_const * base / eps**2)
    alpha = alpha_const * base / eps_dp
    if k < 4 * alpha:
        warnings.warn(f"k={k} < 4*alpha={4 * alpha:.1f}; raising k to keep the margin feasible",
                      stacklevel=2)
        k = math.ceil(4 * alpha)
    return k, alpha, eps_dp
