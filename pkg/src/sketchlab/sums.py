"""Resettable sum sketches.

``ResettableSumSketch`` is sample-and-hold with exponential entry: an unsampled
key enters on an increment ``delta`` when a fresh ``Exp(mean tau)`` draw ``r``
falls below ``delta``, starting with counter ``delta - r``; the estimate is
``sum(tau + c)`` over sampled keys. ``ThresholdSumSketch`` is the same sketch
written with one entry threshold per (key, reset epoch).

``RobustSumFixed`` splits each sampled key's contribution ``z = tau + c`` into
a protected part ``min(B, z)`` and a deterministic part ``max(0, z - B)``. Only
the protected part goes through the tree mechanism, scaled by ``1/B`` so that
each (key, epoch) unit moves the tree input by at most 2 in l1.
``PrefixMaxSum`` runs one robust instance per dyadic scale and reports from
the largest activated one.
"""

from __future__ import annotations

import math
from .rng import RandomSource
from .stream import ExactSum, Inc, ResetKey, ResetPred, to_cardinality_stream
from .tree import TreeMechanism


def _flatten(op):
    if isinstance(op, (Inc, ResetKey, ResetPred)):
        return (op,)
    return to_cardinality_stream(op)


class ResettableSumSketch:
    """Sample-and-hold resettable sum sketch with threshold ``tau``."""

    def __init__(self, tau: float, rng: RandomSource):
        if not tau > 0:
            raise ValueError("tau must be positive")
        self.tau = tau
        self.rng = rng
        self.sample: dict[int, float] = {}
        self._total = ExactSum()
        self.t = 0

    @property
    def sample_size(self) -> int:
        return len(self.sample)

    def estimate(self) -> float:
        return self._total.value

    def apply(self, op) -> list:
        """Apply one op and return ``(key, c_before, c_after)`` for every key
        whose sample state changed; ``None`` marks absence from the sample."""
        changes = []
        for sub in _flatten(op):
            if isinstance(sub, Inc):
                if sub.delta <= 0:
                    continue
                key = sub.key
                c = self.sample.get(key)
                if c is not None:
                    self.sample[key] = c + sub.delta
                    changes.append((key, c, c + sub.delta))
                else:
                    r = self.rng.exponential(1.0 / self.tau)
                    if r < sub.delta:
                        self.sample[key] = sub.delta - r
                        changes.append((key, None, sub.delta - r))
            elif isinstance(sub, ResetKey):
                c = self.sample.pop(sub.key, None)
                if c is not None:
                    changes.append((sub.key, c, None))
            else:
                pred = sub.pred
                for key in [x for x in self.sample if x in pred]:
                    changes.append((key, self.sample.pop(key), None))
        tau = self.tau
        for _, before, after in changes:
            if before is not None:
                self._total.add(-(tau + before))
            if after is not None:
                self._total.add(tau + after)
        self.t += 1
        return changes

    def process(self, op) -> float:
        self.apply(op)
        return self._total.value

    def diagnostics(self) -> dict:
        return {"sample_size": len(self.sample)}


class ThresholdSumSketch:
    """Entry-threshold view of the resettable sum sketch.

    Tracks every key's value since its last reset together with one
    ``Exp(mean tau)`` threshold per epoch, drawn when the epoch starts. A key is
    sampled iff its value exceeds its threshold and then contributes
    ``v + tau - R``. This keeps state for all keys; it exists to check the
    sketch, not to replace it.
    """

    def __init__(self, tau: float, rng: RandomSource):
        self.tau = tau
        self.rng = rng
        self.values: dict[int, float] = {}
        self.thresholds: dict[int, float] = {}

    def _reset(self, key):
        self.values.pop(key, None)
        self.thresholds.pop(key, None)

    def process(self, op) -> float:
        for sub in _flatten(op):
            if isinstance(sub, Inc):
                if sub.delta <= 0:
                    continue
                if sub.key not in self.thresholds:
                    self.thresholds[sub.key] = self.rng.exponential(1.0 / self.tau)
                self.values[sub.key] = self.values.get(sub.key, 0.0) + sub.delta
            elif isinstance(sub, ResetKey):
                self._reset(sub.key)
            else:
                for key in [x for x in self.values if x in sub.pred]:
                    self._reset(key)
        return self.estimate()

    def sampled(self) -> dict:
        return {x: v for x, v in self.values.items() if v > self.thresholds[x]}

    def estimate(self) -> float:
        tau = self.tau
        return math.fsum(v + tau - self.thresholds[x] for x, v in self.sampled().items())


class RobustSumFixed:
    """Fixed-threshold robust resettable sum (tree mechanism with L=2).

    Args:
        tau: sampling threshold of the inner sketch.
        B: clip level for the protected part, normally ``tau * ln(T/delta)``.
        eps_dp: privacy parameter of the tree mechanism.
        capacity: tree horizon (one tree step per op).
        rng: sampling draws use ``rng``; tree noise uses ``rng.child("tree")``.
        record_units: keep per-(key, epoch) l1 mass of the tree input.
    """

    L = 2.0

    def __init__(self, tau: float, B: float, eps_dp: float, capacity: int,
                 rng: RandomSource, record_units: bool = False):
        if not B > 0:
            raise ValueError("B must be positive")
        self.inner = ResettableSumSketch(tau, rng)
        self.B = B
        self.tree = TreeMechanism(capacity, self.L, eps_dp, rng.child("tree"))
        self._p_hat = ExactSum()
        self._d_hat = ExactSum()
        self.noisy_u = 0.0
        self.unit_mass: dict | None = {} if record_units else None
        self._epoch: dict = {}

    @property
    def tau(self) -> float:
        return self.inner.tau

    @property
    def p_hat(self) -> float:
        return self._p_hat.value

    @property
    def d_hat(self) -> float:
        return self._d_hat.value

    @property
    def sample_size(self) -> int:
        return self.inner.sample_size

    def _split(self, c):
        if c is None:
            return 0.0, 0.0
        z = self.tau + c
        return min(self.B, z), max(0.0, z - self.B)

    def process(self, op) -> float:
        u = 0.0
        for key, before, after in self.inner.apply(op):
            p0, d0 = self._split(before)
            p1, d1 = self._split(after)
            if p1 != p0:
                self._p_hat.add(p1 - p0)
                u += (p1 - p0) / self.B
            if d1 != d0:
                self._d_hat.add(d1 - d0)
            if self.unit_mass is not None:
                self._record_unit(key, before, abs(p1 - p0) / self.B)
        self.noisy_u = self.tree.update_and_report(u).value
        return self.B * self.noisy_u + self._d_hat.value

    def _record_unit(self, key, before, mass):
        if before is None:
            self._epoch[key] = self._epoch.get(key, 0) + 1
        unit = (key, self._epoch[key])
        self.unit_mass[unit] = self.unit_mass.get(unit, 0.0) + mass

    def estimate(self) -> float:
        return self.B * self.noisy_u + self._d_hat.value

    def diagnostics(self) -> dict:
        return {"sample_size": self.inner.sample_size,
                "tree_counters_peak": self.tree.max_live}


def sum_params(eps: float, delta: float, T: int, scale_max: float,
               tau_const: float = 1.0) -> tuple:
    """Per-scale thresholds, clip levels and ``eps_dp`` for ``PrefixMaxSum``.

    ``tau_k = tau_const * eps**2 * 2**k / (log2(T)**3.5 * ln(1/delta)**2)`` for
    ``k = 1..ceil(log2(scale_max))`` and ``B_k = tau_k * ln(T/delta)``.
    """
    if not (0 < eps and 0 < delta < 1):
        raise ValueError("need eps > 0 and delta in (0, 1)")
    if T < 2:
        raise ValueError("T must be at least 2")
    if scale_max < 1:
        raise ValueError("scale_max must be at least 1")
    levels = max(1, math.ceil(math.log2(scale_max)))
    denom = math.log2(T) ** 3.5 * math.log(1 / delta) ** 2
    taus = [tau_const * eps**2 * 2.0**k / denom for k in range(1, levels + 1)]
    clips = [tau * math.log(T / delta) for tau in taus]
    return taus, clips, eps


class PrefixMaxSum:
    """Sketch switching over dyadic scales.

    Instance ``k`` (1-based) uses ``tau_k``. It is activated the first time its
    estimate reaches ``2**k``; the sketch reports from the largest activated
    instance (0 before any activation) and frees every instance below it.
    """

    def __init__(self, eps: float, delta: float, T: int, scale_max: float,
                 rng: RandomSource, tau_const: float = 1.0):
        taus, clips, eps_dp = sum_params(eps, delta, T, scale_max, tau_const)
        self.taus = taus
        self.instances: list = [
            RobustSumFixed(tau, B, eps_dp, T, rng.child(("scale", k)))
            for k, (tau, B) in enumerate(zip(taus, clips), start=1)
        ]
        self.activated = [False] * len(taus)
        self.active = 0
        self.value = 0.0

    @property
    def sample_size(self) -> int:
        return sum(inst.sample_size for inst in self.instances if inst is not None)

    def process(self, op) -> float:
        for idx, inst in enumerate(self.instances):
            if inst is None:
                continue
            est = inst.process(op)
            k = idx + 1
            if not self.activated[idx] and est >= 2.0**k:
                self.activated[idx] = True
                if k > self.active:
                    self.active = k
        for idx in range(self.active - 1):
            self.instances[idx] = None
        self.value = self.instances[self.active - 1].estimate() if self.active else 0.0
        return self.value

    def estimate(self) -> float:
        return self.value

    def diagnostics(self) -> dict:
        live = [inst for inst in self.instances if inst is not None]
        return {"sample_size": self.sample_size,
                "active_index": self.active,
                "tree_counters_peak": max(inst.tree.max_live for inst in live)}
