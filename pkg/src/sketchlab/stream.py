"""Resettable stream model: update operations, exact ground truth, generators.

Keys are unsigned 64-bit integers. Values are nonnegative floats; a key whose
value returns to zero is dropped from the map, so cardinality is the map size.

Text format (one op per line, ``#`` starts a comment)::

    INC <key> <delta>
    RST <key>
    INS <key>
    DEL <key>
    RSTR <lo> <hi>        # reset every key in [lo, hi]
    RSTS <k1> <k2> ...    # reset an explicit key set
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from .rng import RandomSource

MAX_KEY = (1 << 64) - 1


def _check_key(key: int) -> None:
    if not 0 <= key <= MAX_KEY:
        raise ValueError(f"key must be an unsigned 64-bit integer, got {key}")


# -- predicates ---------------------------------------------------------------


@dataclass(frozen=True)
class KeyRange:
    lo: int
    hi: int

    def __post_init__(self):
        _check_key(self.lo)
        _check_key(self.hi)

    def __contains__(self, key: int) -> bool:
        return self.lo <= key <= self.hi


@dataclass(frozen=True)
class KeySet:
    keys: frozenset

    def __init__(self, keys: Iterable[int]):
        keys = frozenset(keys)
        for k in keys:
            _check_key(k)
        object.__setattr__(self, "keys", keys)

    def __contains__(self, key: int) -> bool:
        return key in self.keys


Predicate = Union[KeyRange, KeySet]


# -- operations ---------------------------------------------------------------


@dataclass(frozen=True)
class Inc:
    key: int
    delta: float

    def __post_init__(self):
        _check_key(self.key)
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise ValueError(f"Inc delta must be finite and nonnegative, got {self.delta}")


@dataclass(frozen=True)
class ResetKey:
    key: int

    def __post_init__(self):
        _check_key(self.key)


@dataclass(frozen=True)
class ResetPred:
    pred: Predicate


@dataclass(frozen=True)
class Insert:
    key: int

    def __post_init__(self):
        _check_key(self.key)


@dataclass(frozen=True)
class Delete:
    key: int

    def __post_init__(self):
        _check_key(self.key)


UpdateOp = Union[Inc, ResetKey, ResetPred, Insert, Delete]


def to_cardinality_stream(op: UpdateOp) -> list:
    """Rewrite Insert/Delete as resets and unit increments; pass others through."""
    if isinstance(op, Insert):
        return [ResetKey(op.key), Inc(op.key, 1.0)]
    if isinstance(op, Delete):
        return [ResetKey(op.key)]
    return [op]


# -- statistics ---------------------------------------------------------------


class Statistic:
    """A frequency statistic ``sum_x f(v_x)``; subclasses define ``f``."""

    name = "statistic"

    def f(self, v: float) -> float:
        raise NotImplementedError

    def __repr__(self):
        return self.name


class Cardinality(Statistic):
    name = "cardinality"

    def f(self, v):
        return 1.0 if v > 0 else 0.0

    def __eq__(self, other):
        return isinstance(other, Cardinality)

    def __hash__(self):
        return hash(self.name)


class Sum(Statistic):
    name = "sum"

    def f(self, v):
        return float(v)

    def __eq__(self, other):
        return isinstance(other, Sum)

    def __hash__(self):
        return hash(self.name)


class Bernstein(Statistic):
    def __init__(self, func):
        self.func = func
        self.name = f"bernstein[{func.name}]"

    def f(self, v):
        return self.func.evaluate(v)

    def __eq__(self, other):
        return isinstance(other, Bernstein) and other.name == self.name

    def __hash__(self):
        return hash(self.name)


CARDINALITY = Cardinality()
SUM = Sum()


class ExactSum:
    """Exactly rounded running sum under additions and subtractions.

    Keeps Shewchuk's non-overlapping partials (the algorithm behind
    ``math.fsum``), so the reported total equals ``math.fsum`` of the current
    per-key terms regardless of the order in which they were added or removed.
    """

    __slots__ = ("_partials",)

    def __init__(self):
        self._partials = []

    def add(self, x: float) -> None:
        partials = self._partials
        i = 0
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                partials[i] = lo
                i += 1
            x = hi
        partials[i:] = [x]

    @property
    def value(self) -> float:
        return math.fsum(self._partials)


# -- exact tracker ------------------------------------------------------------


class ExactTracker:
    """Full key->value map with running statistics and their prefix maxima."""

    def __init__(self, stats: Iterable[Statistic] = (CARDINALITY, SUM)):
        self.values: dict[int, float] = {}
        self.t = 0
        self.stats = list(stats)
        self._index = {s: i for i, s in enumerate(self.stats)}
        self._totals = [ExactSum() for _ in self.stats]
        self._current = [0.0] * len(self.stats)
        self._peaks = [0.0] * len(self.stats)
        self.prefix_max = {s: 0.0 for s in self.stats}

    def _set(self, key: int, new: float) -> None:
        old = self.values.get(key, 0.0)
        for s, acc in zip(self.stats, self._totals):
            f_old, f_new = s.f(old), s.f(new)
            if f_old != f_new:
                if f_old:
                    acc.add(-f_old)
                if f_new:
                    acc.add(f_new)
        if new > 0:
            self.values[key] = new
        else:
            self.values.pop(key, None)

    def _inc(self, op: Inc) -> None:
        if op.delta == 0:
            return
        new = self.values.get(op.key, 0.0) + op.delta
        if not math.isfinite(new):
            raise OverflowError(f"increment overflows value of key {op.key}")
        self._set(op.key, new)

    def _reset(self, op) -> None:
        # ResetKey and Delete
        if op.key in self.values:
            self._set(op.key, 0.0)

    def _reset_pred(self, op: ResetPred) -> None:
        for key in [k for k in self.values if k in op.pred]:
            self._set(key, 0.0)

    def _insert(self, op: Insert) -> None:
        # ResetKey then Inc(key, 1)
        if self.values.get(op.key) != 1.0:
            self._set(op.key, 1.0)

    _HANDLERS = {Inc: _inc, ResetKey: _reset, ResetPred: _reset_pred, Insert: _insert,
                 Delete: _reset}

    def _apply_one(self, op: UpdateOp) -> None:
        handler = self._HANDLERS.get(type(op))
        if handler is None:
            base = next((b for b in self._HANDLERS if isinstance(op, b)), None)
            if base is None:
                raise TypeError(f"unsupported op {op!r}")
            handler = self._HANDLERS[base]
        handler(self, op)

    def apply(self, op: UpdateOp) -> "ExactTracker":
        self._apply_one(op)
        self.t += 1
        peaks = self._peaks
        for i, acc in enumerate(self._totals):
            value = acc.value
            self._current[i] = value
            if value > peaks[i]:
                peaks[i] = value
                self.prefix_max[self.stats[i]] = value
        return self

    def statistic(self, s: Statistic) -> float:
        i = self._index.get(s)
        if i is not None:
            return self._current[i]
        return exact_statistic(self.values, s)


def exact_statistic(values: dict, s: Statistic) -> float:
    """``sum_x f(v_x)`` over a key->value map, exactly rounded."""
    return math.fsum(s.f(v) for v in values.values())


def apply(tracker: ExactTracker, op: UpdateOp) -> ExactTracker:
    return tracker.apply(op)


# -- generators ---------------------------------------------------------------


def _fresh_keys(rng: RandomSource, n: int) -> list:
    keys, seen = [], set()
    while len(keys) < n:
        k = rng.getrandbits(64)
        if k not in seen:
            seen.add(k)
            keys.append(k)
    return keys


def distinct_inserts(n: int, rng: RandomSource) -> list:
    return [Insert(k) for k in _fresh_keys(rng, n)]


def insert_delete_cycles(n: int, cycles: int, rng: RandomSource) -> list:
    """Insert ``n`` keys then delete them all, ``cycles`` times over."""
    keys = _fresh_keys(rng, n)
    ops = []
    for _ in range(cycles):
        ops.extend(Insert(k) for k in keys)
        ops.extend(Delete(k) for k in keys)
    return ops


def weighted_incs(n: int, delta_min: float, delta_max: float, rng: RandomSource) -> list:
    """``n`` increments on a pool of ``n`` keys with uniform deltas."""
    if n == 0:
        return []
    if not 0 <= delta_min <= delta_max:
        raise ValueError("need 0 <= delta_min <= delta_max")
    keys = _fresh_keys(rng, n)
    ops = []
    for _ in range(n):
        key = keys[int(rng.uniform() * n)]
        delta = delta_min + (delta_max - delta_min) * rng.uniform()
        ops.append(Inc(key, delta))
    return ops


def oscillating(n: int, rounds: int, rng: RandomSource) -> list:
    """Each round inserts ``n`` fresh keys then deletes half of the active ones."""
    ops, active = [], []
    for _ in range(rounds):
        fresh = _fresh_keys(rng, n)
        ops.extend(Insert(k) for k in fresh)
        active.extend(fresh)
        drop = len(active) // 2
        ops.extend(Delete(k) for k in active[:drop])
        active = active[drop:]
    return ops


GENERATORS = {
    "distinct": (distinct_inserts, (int,)),
    "cycles": (insert_delete_cycles, (int, int)),
    "weighted": (weighted_incs, (int, float, float)),
    "oscillate": (oscillating, (int, int)),
}


def generate_stream(spec: str, rng: RandomSource) -> list:
    """Build a stream from a spec string such as ``distinct:1000`` or
    ``weighted:500:1:4``."""
    name, *args = spec.split(":")
    if name not in GENERATORS:
        raise ValueError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    fn, types = GENERATORS[name]
    if len(args) != len(types):
        raise ValueError(f"generator {name!r} takes {len(types)} arguments")
    return fn(*(t(a) for t, a in zip(types, args)), rng)


# -- text format --------------------------------------------------------------


class StreamParseError(ValueError):
    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno


def format_op(op: UpdateOp) -> str:
    if isinstance(op, Inc):
        return f"INC {op.key} {op.delta!r}"
    if isinstance(op, ResetKey):
        return f"RST {op.key}"
    if isinstance(op, Insert):
        return f"INS {op.key}"
    if isinstance(op, Delete):
        return f"DEL {op.key}"
    if isinstance(op.pred, KeyRange):
        return f"RSTR {op.pred.lo} {op.pred.hi}"
    return "RSTS " + " ".join(str(k) for k in sorted(op.pred.keys))


def parse_op(line: str) -> UpdateOp:
    parts = line.split()
    tag, args = parts[0].upper(), parts[1:]
    if tag == "INC":
        if len(args) != 2:
            raise ValueError("INC takes a key and a delta")
        return Inc(int(args[0]), float(args[1]))
    if tag in ("RST", "INS", "DEL"):
        if len(args) != 1:
            raise ValueError(f"{tag} takes one key")
        return {"RST": ResetKey, "INS": Insert, "DEL": Delete}[tag](int(args[0]))
    if tag == "RSTR":
        if len(args) != 2:
            raise ValueError("RSTR takes lo and hi")
        return ResetPred(KeyRange(int(args[0]), int(args[1])))
    if tag == "RSTS":
        return ResetPred(KeySet(int(a) for a in args))
    raise ValueError(f"unknown op {tag}")


def parse_stream(lines: Iterable[str]) -> Iterator[UpdateOp]:
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            yield parse_op(line)
        except ValueError as exc:
            raise StreamParseError(lineno, line, str(exc)) from None


def parse_stream_file(path) -> list:
    with open(path) as fh:
        return list(parse_stream(fh))


def write_stream_file(ops: Iterable[UpdateOp], path) -> None:
    with open(path, "w") as fh:
        for op in ops:
            fh.write(format_op(op) + "\n")
