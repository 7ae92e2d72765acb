"""Adaptive adversaries that pick the next update from released estimates.

An adversary only ever sees the estimate the sketch returned for its previous
op. ``next_op`` returns ``None`` once the adversary's budget is spent.
"""

from __future__ import annotations

from dataclasses import dataclass

from .stream import Delete, Insert


def detect_change(prev: float, cur: float, tol: float = 0.0) -> bool:
    """True iff the estimate rose by more than ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return cur - prev > tol


def membership_tol(p: float) -> float:
    """Detection threshold for exact ``|S|/p`` estimators: a sampled insert
    raises the estimate by exactly ``1/p``."""
    return 0.5 / p


class Adversary:
    kind = "adversary"

    def next_op(self, last_estimate: float | None):
        raise NotImplementedError


class _FreshKeyAttack(Adversary):
    def __init__(self, rounds: int, tol: float = 0.0, first_key: int = 1):
        self.rounds = rounds
        self.tol = tol
        self.next_key = first_key
        self.issued = 0
        self.pending = None       # key whose fate is read from the next estimate
        self.before = 0.0         # estimate just before ``pending`` was inserted
        self.history = 0.0

    def _fresh(self):
        if self.issued == self.rounds:
            self.pending = None
            return None
        key = self.next_key
        self.next_key += 1
        self.issued += 1
        self.pending = key
        self.before = self.history
        return Insert(key)

    def next_op(self, last_estimate):
        if last_estimate is not None:
            self.history = last_estimate
        key = self.pending
        if key is not None and detect_change(self.before, self.history, self.tol):
            self.pending = None
            return self._follow_up(key)
        return self._fresh()

    def _follow_up(self, key):
        raise NotImplementedError


class ReinsertionAttack(_FreshKeyAttack):
    """Insert fresh keys; re-insert once any key whose insert raised the estimate."""

    kind = "reinsert"

    def _follow_up(self, key):
        return Insert(key)


class SampleAndDeleteAttack(_FreshKeyAttack):
    """Insert fresh keys; delete any key whose insert raised the estimate."""

    kind = "sample-delete"

    def _follow_up(self, key):
        return Delete(key)


class Replay(Adversary):
    """Emits a fixed op sequence and ignores estimates."""

    kind = "replay"

    def __init__(self, ops):
        self.ops = list(ops)
        self._pos = 0

    def next_op(self, last_estimate):
        if self._pos == len(self.ops):
            return None
        op = self.ops[self._pos]
        self._pos += 1
        return op


class NonAdaptive(Replay):
    kind = "none"


@dataclass
class DuelOutcome:
    final_estimate: float
    final_truth: float
    truth_trace_max: float

    @property
    def bias(self) -> float:
        return self.final_estimate - self.final_truth
