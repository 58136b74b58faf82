"""Counter-based random streams.

Every random number used by the package is a pure function of
``(master_seed, stream_id, counter)``.  The mixing function is the
SplitMix64 finalizer; a stream key is derived once per replicate and the
``j``-th draw of that replicate is ``mix64(key + (j + 1) * GOLDEN)``.  The
compiled kernels implement the same arithmetic, so a replicate's draws do
not depend on which worker (or backend) produced them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
STREAM_MUL = 0xD1B54A32D192ED03
STREAM_ADD = 0x8CB92BA72F3D8DD7
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
TWO_M53 = 2.0 ** -53


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int) -> int:
    """Key of stream ``stream`` under ``seed`` (both taken modulo 2**64)."""
    base = mix64((seed + GOLDEN) & MASK64)
    return mix64(base ^ ((stream * STREAM_MUL + STREAM_ADD) & MASK64))


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def stream_keys(seed: int, start: int, stop: int) -> np.ndarray:
    """Vectorised :func:`stream_key` for streams ``start .. stop-1``."""
    base = np.uint64(mix64((seed + GOLDEN) & MASK64))
    idx = np.arange(start, stop, dtype=np.uint64)
    with np.errstate(over="ignore"):
        s = idx * np.uint64(STREAM_MUL) + np.uint64(STREAM_ADD)
    return mix64_array(base ^ s)


def raw_draws(key: int, start: int, count: int) -> np.ndarray:
    """Raw 64-bit outputs ``start .. start+count-1`` of the stream ``key``."""
    ctr = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + ctr * np.uint64(GOLDEN)
    return mix64_array(z)


def to_unit(raw: np.ndarray) -> np.ndarray:
    """Map raw outputs to the open interval (0, 1)."""
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * TWO_M53


@dataclass
class Stream:
    """A sequential view of one counter-based stream.

    The object only tracks a position; two ``Stream`` objects with the same
    key and position yield identical numbers.
    """

    key: int
    position: int = 0

    @classmethod
    def derive(cls, seed: int, stream: int) -> "Stream":
        return cls(stream_key(seed, stream))

    def uniform(self, size: int | None = None):
        n = 1 if size is None else int(size)
        u = to_unit(raw_draws(self.key, self.position, n))
        self.position += n
        return float(u[0]) if size is None else u

    def exponential(self, size: int | None = None):
        u = self.uniform(size)
        return -np.log(u) if size is not None else float(-np.log(u))

    def numpy(self) -> np.random.Generator:
        """A numpy Generator (Philox, itself counter-based) keyed by this stream.

        Used for aggregated sampling (binomial, negative binomial, ...) where
        a hand-written inverse would add nothing.
        """
        key = mix64(self.key ^ ((self.position * GOLDEN) & MASK64))
        self.position += 1
        return np.random.Generator(np.random.Philox(key=key))


def block_generator(seed: int, tag: int, block: int) -> np.random.Generator:
    """Philox generator for a fixed-size work block (worker-count independent)."""
    return Stream(stream_key(seed ^ ((tag * STREAM_MUL) & MASK64), block)).numpy()
