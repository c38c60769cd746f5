"""Counter-based random streams.

Every Monte Carlo driver takes an :class:`RngStream`.  Two sources of
randomness hang off it:

* :meth:`RngStream.generator` returns a numpy ``Generator`` backed by Philox,
  keyed by ``(seed, stream_id)``.  Philox is itself counter based, so two
  streams with different ids never overlap and need no coordination.
* :func:`counter_uniforms` hashes ``(seed, stream_id, counter)`` directly into a
  double in ``(0, 1)``.  The compiled kernels use the same hash, which lets a
  walker draw its ``k``-th angle without carrying generator state.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _as_u64(x: int) -> int:
    return int(x) & MASK64


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", _as_u64(self.seed))
        object.__setattr__(self, "stream_id", _as_u64(self.stream_id))

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "RngStream":
        """Independent child stream, e.g. one per replica or sweep point."""
        return RngStream(self.seed, mix64(self.stream_id ^ mix64(index + 1)))

    @property
    def key(self) -> int:
        """Single 64-bit key used by the counter hash."""
        return mix64(self.seed ^ mix64(self.stream_id ^ 0x5851F42D4C957F2D))


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z = (_as_u64(x) + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def counter_uniforms(key: int, counters) -> np.ndarray:
    """Map 64-bit counters to uniforms in (0, 1) under ``key``.

    Bit-identical to the compiled ``_counter_uniform`` used by the kernels.
    """
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = c * _GOLDEN + np.uint64(_as_u64(key))
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def default_seed() -> int:
    """Seed from ``LOOPSOUP_SEED`` when set, else a fixed default."""
    raw = os.environ.get("LOOPSOUP_SEED")
    if raw is None or raw.strip() == "":
        return 20240101
    return int(raw, 0)
