"""Seedable xoshiro256** generator with SplitMix64 seed expansion.

A generator is identified by ``(seed, stream)``. The four 64-bit words of
xoshiro state are the first four SplitMix64 outputs from a starting value
that mixes ``seed`` with a hashed ``stream`` id, so different stream ids give
unrelated sequences for the same seed.

Doubles use the top 53 bits (``(x >> 11) * 2**-53``), giving values in
[0, 1). Normals use the Box-Muller transform on consecutive uniform pairs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM_SALT = 0xD1B54A32D192ED03

_JUMP = (0x180EC6D33CFD0ABA, 0xD5A61266F0C9392C, 0xA9582618E03FC9AA, 0x39ABDC4529B1661C)


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def expand_seed(seed: int, stream: int = 0) -> np.ndarray:
    """Return the 4-word xoshiro256** state for ``(seed, stream)``."""
    _, stream_hash = _splitmix64((stream * _STREAM_SALT) & _MASK64)
    sm = (seed & _MASK64) ^ stream_hash
    words = []
    for _ in range(4):
        sm, out = _splitmix64(sm)
        words.append(out)
    if not any(words):  # all-zero state is a fixed point
        words[0] = 1
    return np.array(words, dtype=np.uint64)


@njit(cache=True)
def _next(s):
    s0 = s[0]
    s1 = s[1]
    s2 = s[2]
    s3 = s[3]
    x = s1 * np.uint64(5)
    result = ((x << np.uint64(7)) | (x >> np.uint64(57))) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
    s[0] = s0
    s[1] = s1
    s[2] = s2
    s[3] = s3
    return result


@njit(cache=True)
def _fill_uint64(s, out):
    for i in range(out.shape[0]):
        out[i] = _next(s)


@njit(cache=True)
def _fill_double(s, out):
    scale = 1.0 / 9007199254740992.0
    for i in range(out.shape[0]):
        out[i] = np.float64(_next(s) >> np.uint64(11)) * scale


@njit(cache=True)
def _shuffle_inplace(s, idx):
    scale = 1.0 / 9007199254740992.0
    for i in range(idx.shape[0] - 1, 0, -1):
        u = np.float64(_next(s) >> np.uint64(11)) * scale
        j = np.int64(u * (i + 1))
        tmp = idx[i]
        idx[i] = idx[j]
        idx[j] = tmp


class Rng:
    """Deterministic random stream. Not thread-safe; own one per run."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._state = expand_seed(self.seed, self.stream)

    @classmethod
    def _from_state(cls, seed: int, stream: int, state: np.ndarray) -> "Rng":
        obj = cls.__new__(cls)
        obj.seed = seed
        obj.stream = stream
        obj._state = state
        return obj

    def copy(self) -> "Rng":
        return Rng._from_state(self.seed, self.stream, self._state.copy())

    def jump(self) -> None:
        """Advance by 2**128 draws (the reference xoshiro256** jump)."""
        s = [int(w) for w in self._state]
        acc = [0, 0, 0, 0]
        for word in _JUMP:
            for b in range(64):
                if (word >> b) & 1:
                    acc = [a ^ w for a, w in zip(acc, s)]
                tmp = np.array(s, dtype=np.uint64)
                _next(tmp)
                s = [int(w) for w in tmp]
        self._state = np.array(acc, dtype=np.uint64)

    def fork(self, k: int) -> "Rng":
        """Independent child stream: a copy jumped ``k + 1`` times.

        The parent is not advanced, so ``fork(k)`` is repeatable.
        """
        child = self.copy()
        for _ in range(k + 1):
            child.jump()
        return child

    def next_uint64(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        _fill_uint64(self._state, out)
        return out

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        _fill_double(self._state, out)
        if low != 0.0 or high != 1.0:
            out = low + (high - low) * out
        return out

    def permutation(self, n: int) -> np.ndarray:
        idx = np.arange(n, dtype=np.int64)
        _shuffle_inplace(self._state, idx)
        return idx


def gaussian(rng: Rng, n: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
    """``n`` i.i.d. normal draws via Box-Muller on uniform pairs."""
    if std < 0:
        raise ValueError(f"std must be >= 0, got {std}")
    n_pairs = (n + 1) // 2
    u = rng.uniform(2 * n_pairs)
    u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
    u2 = u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * n_pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return mean + std * z[:n]
