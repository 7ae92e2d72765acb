"""Seeded random sources shared by every sketch.

Scalar draws come from ``random.Random`` (Mersenne Twister), which produces the
same sequence for a given seed on every platform. Child sources are derived
from ``(seed, label)`` with BLAKE2b, so per-key, per-level or per-trial streams
can be recreated without threading a single generator through the program.
"""

from __future__ import annotations

import enum
import hashlib
import math
import os
import random

import numpy as np

SEED_ENV_VAR = "SKETCH_SEED"
_U64 = (1 << 64) - 1


class NoiseMode(enum.Enum):
    LIVE = "live"
    ZERO = "zero"


def derive_seed(seed: int, label) -> int:
    """Derive a child seed from a parent seed and a label.

    The derivation is a pure function: BLAKE2b over ``"<seed>/<label>"``
    truncated to 64 bits. Labels may be any object with a stable ``str``.
    """
    digest = hashlib.blake2b(f"{seed}/{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seed_from_env(default: int) -> int:
    value = os.environ.get(SEED_ENV_VAR)
    if value is None or value == "":
        return default
    seed = int(value)
    if not 0 <= seed <= _U64:
        raise ValueError(f"{SEED_ENV_VAR} must be an unsigned 64-bit integer")
    return seed


class RandomSource:
    """Single-owner random source with Bernoulli, exponential and Laplace draws."""

    def __init__(self, seed: int, noise: NoiseMode = NoiseMode.LIVE):
        if not 0 <= seed <= _U64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.noise = noise
        self._rng = random.Random(seed)

    def child(self, label) -> "RandomSource":
        return RandomSource(derive_seed(self.seed, label), self.noise)

    def numpy(self, label="numpy") -> np.random.Generator:
        """A numpy generator for vectorized draws, seeded from ``(seed, label)``."""
        return np.random.Generator(np.random.PCG64(derive_seed(self.seed, label)))

    def uniform(self) -> float:
        return self._rng.random()

    def getrandbits(self, k: int) -> int:
        return self._rng.getrandbits(k)

    def bernoulli(self, p: float) -> bool:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {p}")
        return self._rng.random() < p

    def exponential(self, rate: float) -> float:
        """Exponential draw with the given rate (mean ``1/rate``)."""
        if not rate > 0:
            raise ValueError(f"rate must be positive, got {rate}")
        return self._rng.expovariate(rate)

    def laplace(self, scale: float) -> float:
        """Centered Laplace draw by inverse CDF from one uniform.

        Returns exactly 0.0 in ``NoiseMode.ZERO``; the uniform is still
        consumed so that live and zero runs stay aligned on other draws.
        """
        if not scale > 0:
            raise ValueError(f"scale must be positive, got {scale}")
        u = self._rng.random()
        while u == 0.0:
            u = self._rng.random()
        if self.noise is NoiseMode.ZERO:
            return 0.0
        if u < 0.5:
            return scale * math.log(2.0 * u)
        return -scale * math.log(2.0 * (1.0 - u))
