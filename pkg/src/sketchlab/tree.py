"""Binary tree mechanism for continual release of noisy prefix sums.

Step ``t`` (1-based) closes the dyadic node of level ``i = lowbit(t)`` covering
``[t - 2**i + 1, t]``. Its exact sum folds in the open lower levels, its
Laplace noise is drawn once, and the prefix ``[1, t]`` is covered by the closed
nodes at the set bits of ``t``. Only those nodes are stored, so at most
``floor(log2 t) + 1`` counters are live at any time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .rng import NoiseMode, RandomSource


class TreeCapacityError(RuntimeError):
    pass


@dataclass
class NoisyPrefix:
    value: float
    t: int


@dataclass(frozen=True)
class NodeRecord:
    level: int
    start: int
    noise: float

    @property
    def end(self) -> int:
        return self.start + (1 << self.level) - 1


def noise_scale(capacity: int, L: float, eps_dp: float) -> float:
    """Laplace scale ``L * log2(capacity) / eps_dp``; a single-step tree uses
    ``L / eps_dp`` instead of the degenerate zero scale."""
    if capacity == 1:
        return L / eps_dp
    return L * math.log2(capacity) / eps_dp


class TreeMechanism:
    """Streaming tree mechanism with a fixed horizon.

    Args:
        capacity: number of updates the mechanism can absorb.
        L: per-unit l1 contribution bound used to calibrate noise.
        eps_dp: privacy parameter.
        rng: source for node noise; its ``NoiseMode`` decides live vs zero noise.
        record_noise: keep a ledger of every closed node (test mode).
    """

    def __init__(self, capacity: int, L: float, eps_dp: float, rng: RandomSource,
                 record_noise: bool = False):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        if not (L > 0 and eps_dp > 0):
            raise ValueError("L and eps_dp must be positive")
        self.capacity = capacity
        self.L = L
        self.eps_dp = eps_dp
        self.lam = noise_scale(capacity, L, eps_dp)
        self.rng = rng
        self.t = 0
        # per level: [exact sum, noise] for the closed node at that level, or None
        self._nodes: list = [None] * (capacity.bit_length() + 1)
        self._live = 0
        self.max_live = 0
        self.ledger: list | None = [] if record_noise else None

    @property
    def mode(self) -> NoiseMode:
        return self.rng.noise

    @property
    def live_counters(self) -> int:
        return self._live

    def max_live_counters(self) -> int:
        return self.max_live

    def update_and_report(self, u: float) -> NoisyPrefix:
        if self.t >= self.capacity:
            raise TreeCapacityError(f"tree capacity {self.capacity} exhausted")
        self.t += 1
        t = self.t
        level = (t & -t).bit_length() - 1
        nodes = self._nodes
        total = u
        for j in range(level):
            if nodes[j] is not None:
                total += nodes[j][0]
                nodes[j] = None
                self._live -= 1
        noise = self.rng.laplace(self.lam)
        nodes[level] = (total, noise)
        self._live += 1
        if self._live > self.max_live:
            self.max_live = self._live
        if self.ledger is not None:
            self.ledger.append(NodeRecord(level, t - (1 << level) + 1, noise))
        return NoisyPrefix(self.report(), t)

    def report(self) -> float:
        value = 0.0
        for node in self._nodes:
            if node is not None:
                value += node[0] + node[1]
        return value

    def covering_nodes(self, t: int | None = None) -> list:
        """Ledger records of the dyadic nodes whose union is ``[1, t]``."""
        if self.ledger is None:
            raise RuntimeError("covering_nodes needs record_noise=True")
        t = self.t if t is None else t
        by_interval = {(n.level, n.start): n for n in self.ledger}
        out, end = [], t
        while end > 0:
            level = (end & -end).bit_length() - 1
            start = end - (1 << level) + 1
            out.append(by_interval[(level, start)])
            end = start - 1
        return out

    def dump_noise_csv(self, path) -> None:
        if self.ledger is None:
            raise RuntimeError("noise ledger not recorded")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_level", "node_start", "noise"])
            for n in self.ledger:
                w.writerow([n.level, n.start, repr(n.noise)])


def unit_node_mass(nodes, contributions: dict) -> float:
    """l1 change of the released node sums if one unit is removed.

    ``contributions`` maps time step to that unit's share of the update there.
    """
    total = 0.0
    for n in nodes:
        s = sum(c for t, c in contributions.items() if n.start <= t <= n.end)
        total += abs(s)
    return total
