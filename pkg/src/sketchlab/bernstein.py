"""Bernstein statistics through one sum stream and ``m`` cardinality streams.

A Bernstein function ``f(w) = int_0^inf a(t) (1 - exp(-w t)) dt`` is split at a
cutoff ``tau``. Below ``tau`` we use ``1 - exp(-w t) ~ w t`` so the head is
``alpha_0 * sum_x w_x``. Above ``tau`` the integral is a weighted sum of
``L^c(t_i) = sum_x (1 - exp(-w_x t_i))`` over geometric levels of the tail
mass ``V(t) = int_t^inf a``. Each ``L^c(t_i)`` is the expected cardinality of
an output stream ``E_i``: every increment ``(x, delta)`` inserts ``H(x, k)``
into ``E_i`` with probability ``1 - exp(-delta t_i)``, independently for
``k = 0..r-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .cardinality import RobustAdaptiveCard, card_params, tree_capacity
from .rng import RandomSource, derive_seed
from .stream import Delete, Inc, Insert, ResetKey, ResetPred, to_cardinality_stream
from .sums import PrefixMaxSum

T_MIN, T_MAX = 1e-18, 1e18
T_LIMIT = 1e300         # heavy tails may need brackets beyond T_MAX
MAX_R = 256
MAX_LEVELS = 100_000


class BernsteinFunction:
    """Base class. Subclasses give ``f``, the tail mass ``V`` and the head weight.

    ``tail_value(t)`` is the Levy mass strictly above ``t``, so it is
    nonincreasing and right-continuous.
    """

    name = "bernstein"

    def evaluate(self, w: float) -> float:
        raise NotImplementedError

    def tail_value(self, t: float) -> float:
        raise NotImplementedError

    def head_weight(self, tau: float) -> float:
        """``int_0^tau a(t) t dt``."""
        raise NotImplementedError

    def density(self, t: float) -> float:
        """Levy density ``a(t)``; only defined for absolutely continuous measures."""
        raise NotImplementedError

    def level_at(self, v: float, lo: float) -> float:
        """``sup {t >= lo : V(t) >= v}`` by log-domain bisection.

        The bracket starts at ``[lo, T_MAX]`` and its top is raised by factors of
        ``1e6`` while ``V`` is still at least ``v`` there. Returns the upper
        bracket, so ``V`` at the result is below ``v`` (or the result is
        ``T_LIMIT``).
        """
        V = self.tail_value
        if V(lo) < v:
            raise ValueError(f"{self.name}: V({lo}) < {v}, V is not monotone")
        hi = max(T_MAX, lo)
        while V(hi) >= v:
            if hi >= T_LIMIT:
                return T_LIMIT
            hi = min(hi * 1e6, T_LIMIT)
        a, b = math.log(lo), math.log(hi)
        while b - a > 1e-12:
            mid = 0.5 * (a + b)
            if V(math.exp(mid)) >= v:
                a = mid
            else:
                b = mid
        return math.exp(b)

    def __repr__(self):
        return self.name


class Moment(BernsteinFunction):
    """``f(w) = w**p`` for ``0 < p < 1``."""

    def __init__(self, p: float):
        if not 0 < p < 1:
            raise ValueError("moment order must lie in (0, 1)")
        self.p = p
        self.name = f"moment:{p:g}"
        self._g = special.gamma(1 - p)

    def evaluate(self, w):
        return float(w) ** self.p if w > 0 else 0.0

    def tail_value(self, t):
        return t ** -self.p / self._g

    def head_weight(self, tau):
        p = self.p
        return p * tau ** (1 - p) / (self._g * (1 - p))

    def density(self, t):
        return self.p / self._g * t ** (-1 - self.p)


class Log1p(BernsteinFunction):
    """``f(w) = ln(1 + w)``."""

    name = "log1p"

    def evaluate(self, w):
        return math.log1p(w)

    def tail_value(self, t):
        return float(special.exp1(t))

    def head_weight(self, tau):
        return -math.expm1(-tau)

    def density(self, t):
        return math.exp(-t) / t


class SoftCap(BernsteinFunction):
    """``f(w) = T_c (1 - exp(-w / T_c))``: a single atom of mass ``T_c`` at ``1/T_c``."""

    def __init__(self, cap: float):
        if not cap > 0:
            raise ValueError("soft cap must be positive")
        self.cap = cap
        self.name = f"softcap:{cap:g}"

    def evaluate(self, w):
        return -self.cap * math.expm1(-w / self.cap)

    def tail_value(self, t):
        return self.cap if t < 1.0 / self.cap else 0.0

    def head_weight(self, tau):
        return 1.0 if tau >= 1.0 / self.cap else 0.0

    def level_at(self, v, lo):
        if v > self.cap or lo >= 1.0 / self.cap:
            raise ValueError(f"{self.name}: no mass at or above {lo} reaches {v}")
        return 1.0 / self.cap


def parse_function(spec: str) -> BernsteinFunction:
    """``moment:0.5``, ``log1p`` or ``softcap:10``."""
    name, _, arg = spec.partition(":")
    if name == "moment":
        return Moment(float(arg))
    if name == "log1p" and not arg:
        return Log1p()
    if name == "softcap":
        return SoftCap(float(arg))
    raise ValueError(f"unknown Bernstein function {spec!r}")


def check_monotone(f: BernsteinFunction, points: int = 721) -> None:
    """Raise ``ValueError`` unless ``V`` is finite and nonincreasing on a log grid."""
    grid = np.logspace(math.log10(T_MIN), math.log10(T_MAX), points)
    vals = np.array([f.tail_value(float(t)) for t in grid])
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise ValueError(f"{f.name}: tail mass must be finite and nonnegative")
    if np.any(np.diff(vals) > 1e-12 * np.maximum(vals[:-1], 1e-300)):
        raise ValueError(f"{f.name}: tail mass V(t) is not nonincreasing")


@dataclass
class LevelPlan:
    f: BernsteinFunction
    eps: float
    T: int
    tau: float
    r: int
    levels: np.ndarray
    weights: np.ndarray
    v_floor: float
    alpha0: float

    @property
    def m(self) -> int:
        return len(self.levels)


def plan_levels(f: BernsteinFunction, eps: float, T: int, delta_min: float,
                delta_max: float, r: int = 64) -> LevelPlan:
    """Cutoff, geometric levels and weights for ``f``.

    ``tau = sqrt(eps) / (T * delta_max)``; level ``i`` targets tail mass
    ``(1+eps)**-i * V(tau)`` and the sequence stops at the first level whose
    tail mass is at most ``(eps/T) * f(delta_min)``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if T < 1:
        raise ValueError("T must be at least 1")
    if not 0 < delta_min <= delta_max:
        raise ValueError("need 0 < delta_min <= delta_max")
    if not 1 <= r <= MAX_R:
        raise ValueError(f"r must lie in [1, {MAX_R}]")
    check_monotone(f)
    tau = math.sqrt(eps) / (T * delta_max)
    v_floor = eps / T * f.evaluate(delta_min)
    V = f.tail_value
    top = V(tau)
    levels, weights = [], []
    prev_t, prev_v = tau, top
    i = 0
    while prev_v > v_floor:
        i += 1
        if i > MAX_LEVELS:
            raise ValueError(f"{f.name}: level sequence does not terminate")
        t_i = f.level_at(top * (1 + eps) ** -i, prev_t)
        v_i = V(t_i)
        if v_i > prev_v or t_i < prev_t:
            raise ValueError(f"{f.name}: tail mass V(t) is not nonincreasing")
        levels.append(t_i)
        weights.append(prev_v - v_i)
        prev_t, prev_v = t_i, v_i
        if t_i >= T_LIMIT:
            break
    return LevelPlan(f=f, eps=eps, T=T, tau=tau, r=r, levels=np.array(levels),
                     weights=np.array(weights), v_floor=v_floor,
                     alpha0=f.head_weight(tau))


def output_key(key: int, k: int) -> int:
    """Injective ``(key, copy)`` encoding ``(key << 8) | k``.

    Output keys are 72-bit, so the emitted ops below skip the 64-bit key check.
    """
    return (key << 8) | k


@dataclass(frozen=True)
class OutputInsert(Insert):
    def __post_init__(self):
        pass


@dataclass(frozen=True)
class OutputDelete(Delete):
    def __post_init__(self):
        pass


class _MappedPred:
    """Predicate on output keys induced by a predicate on input keys."""

    def __init__(self, pred):
        self.pred = pred

    def __contains__(self, z: int) -> bool:
        return (z >> 8) in self.pred


class ElementMapper:
    """Turns input updates into Insert/Delete ops on the ``m`` output streams.

    The exponential draws for an increment are taken from a generator derived
    from ``(seed, key, step)``, so the emissions for one key do not depend on
    what happened to any other key.
    """

    def __init__(self, levels, r: int, rng: RandomSource):
        if not 1 <= r <= MAX_R:
            raise ValueError(f"r must lie in [1, {MAX_R}]")
        self.levels = np.asarray(levels, dtype=float)
        self.r = r
        self.seed = rng.seed
        self.step = 0

    def inc_mask(self, key: int, delta: float, step: int) -> np.ndarray:
        """Boolean ``(r, m)`` array: copy ``k`` enters level ``i``."""
        gen = np.random.Generator(np.random.PCG64(derive_seed(self.seed, (key, step))))
        y = gen.standard_exponential((self.r, len(self.levels))) / delta
        return y < self.levels

    def map_update(self, op, step: int | None = None) -> list:
        """Emitted ops per output stream for one Inc, ResetKey or ResetPred.

        ``step`` defaults to an internal counter of mapped ops.
        """
        self.step += 1
        step = self.step if step is None else step
        m = len(self.levels)
        if isinstance(op, Inc):
            if op.delta == 0:
                return [[] for _ in range(m)]
            mask = self.inc_mask(op.key, op.delta, step)
            return [[OutputInsert(output_key(op.key, int(k))) for k in np.flatnonzero(mask[:, i])]
                    for i in range(m)]
        if isinstance(op, ResetKey):
            deletes = [OutputDelete(output_key(op.key, k)) for k in range(self.r)]
            return [list(deletes) for _ in range(m)]
        if isinstance(op, ResetPred):
            return [[ResetPred(_MappedPred(op.pred))] for _ in range(m)]
        raise TypeError(f"unsupported op {op!r}")


@dataclass
class BernsteinSketch:
    """Composite sketch: one prefix-max sum sketch plus one robust cardinality
    sketch per level.

    Args:
        plan: level plan from ``plan_levels``.
        delta: failure probability shared out over the ``m + 1`` sub-sketches.
        delta_min, delta_max: allowed increment range.
        rng: master source; sub-sketches use children derived from it.
    """

    plan: LevelPlan
    delta: float
    delta_min: float
    delta_max: float
    rng: RandomSource
    sum_sketch: PrefixMaxSum = field(init=False)
    card_sketches: list = field(init=False)
    steps: int = field(init=False, default=0)

    def __post_init__(self):
        plan = self.plan
        share = plan.m + 1
        eps_s, delta_s = plan.eps / share, self.delta / share
        T = max(plan.T, 2)
        self.sum_sketch = PrefixMaxSum(eps_s, delta_s, T, max(T * self.delta_max, 2),
                                       self.rng.child("sum"))
        # an Insert is a reset plus an increment, so one input op can emit 2r ops
        horizon = 2 * T * plan.r
        k, alpha, eps_dp = card_params(eps_s, delta_s, horizon)
        cap = tree_capacity(horizon)
        self.card_sketches = [
            RobustAdaptiveCard(k, alpha, eps_dp, cap, self.rng.child(("level", i)))
            for i in range(plan.m)
        ]
        self.mapper = ElementMapper(plan.levels, plan.r, self.rng.child("map"))
        self.card_values = [0.0] * plan.m

    def _check(self, op):
        if isinstance(op, Inc):
            if not self.delta_min <= op.delta <= self.delta_max:
                raise ValueError(f"increment {op.delta} outside [{self.delta_min}, {self.delta_max}]")

    def process(self, op) -> float:
        subs = [op] if isinstance(op, (Inc, ResetKey, ResetPred)) else to_cardinality_stream(op)
        for sub in subs:
            self._check(sub)
        self.sum_sketch.process(op)
        for sub in subs:
            for i, emitted in enumerate(self.mapper.map_update(sub)):
                card = self.card_sketches[i]
                for e in emitted:
                    self.card_values[i] = card.process(e)
        self.steps += 1
        return self.estimate()

    def raw_estimate(self) -> float:
        plan = self.plan
        tail = math.fsum(a * c for a, c in zip(plan.weights, self.card_values)) / plan.r
        return plan.alpha0 * self.sum_sketch.estimate() + tail

    def estimate(self) -> float:
        if self.steps == 0:
            return 0.0
        value = self.raw_estimate()
        if value < (1 - self.plan.eps) * self.plan.f.evaluate(self.delta_min):
            return 0.0
        return value

    @property
    def sample_size(self) -> int:
        return self.sum_sketch.sample_size + sum(c.sample_size for c in self.card_sketches)

    def diagnostics(self) -> dict:
        return {"sample_size": self.sample_size,
                "levels": self.plan.m,
                "halvings": sum(c.halvings for c in self.card_sketches),
                "tree_counters_peak": max([c.tree.max_live for c in self.card_sketches], default=0)}


def exact_bernstein_oracle(values: dict, f: BernsteinFunction) -> float:
    """``sum_x f(v_x)`` by direct evaluation."""
    return math.fsum(f.evaluate(v) for v in values.values())


def lc_transform(weights, t: float) -> float:
    """Complement Laplace transform ``sum_x (1 - exp(-w_x t))``."""
    w = np.asarray(list(weights), dtype=float)
    return float(-np.expm1(-w * t).sum())
