"""Numeric kernel: order-deterministic reductions, clamping and a portable PRNG.

Vectors and matrices are plain float64 numpy arrays. Reductions that must be
reproducible bit-for-bit (``dot`` and the norms) accumulate strictly left to
right via ``np.cumsum``, which matches a scalar Python loop exactly.
"""

import math

import numpy as np

MASK64 = (1 << 64) - 1


def as_vector(v):
    return np.asarray(v, dtype=np.float64).reshape(-1)


def _check_same_shape(u, v):
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")


def _seq_sum(terms):
    if terms.size == 0:
        return 0.0
    return float(np.cumsum(terms)[-1])


def dot(u, v):
    u, v = as_vector(u), as_vector(v)
    _check_same_shape(u, v)
    return _seq_sum(u * v)


def sign(v):
    """Entrywise sign with sign(0) = 0."""
    v = np.asarray(v, dtype=np.float64)
    return (v > 0).astype(np.float64) - (v < 0).astype(np.float64)


def clamp(v, lo, hi):
    v = np.asarray(v, dtype=np.float64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), v.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), v.shape)
    if np.any(lo > hi):
        raise ValueError("clamp bounds inverted (lo > hi)")
    return np.maximum(lo, np.minimum(v, hi))


def l1_norm(v):
    return _seq_sum(np.abs(as_vector(v)))


def l2_norm_sq(v):
    v = as_vector(v)
    return _seq_sum(v * v)


def linf_dist(u, v):
    u, v = as_vector(u), as_vector(v)
    _check_same_shape(u, v)
    if u.size == 0:
        return 0.0
    return float(np.max(np.abs(u - v)))


def matvec(m, v):
    m = np.asarray(m, dtype=np.float64)
    v = as_vector(v)
    if m.ndim != 2 or m.shape[1] != v.shape[0]:
        raise ValueError(f"shape mismatch: {m.shape} @ {v.shape}")
    return np.array([_seq_sum(row * v) for row in m])


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


def _splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class Prng:
    """xoshiro256** seeded through splitmix64.

    Pure integer arithmetic, so a given seed yields the same stream on every
    platform. Not thread-safe; give each worker its own instance.
    """

    def __init__(self, seed):
        sm = int(seed) & MASK64
        s = []
        for _ in range(4):
            sm, z = _splitmix64(sm)
            s.append(z)
        self._s = s
        self._spare_normal = None

    def next_u64(self):
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self):
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo=0.0, hi=1.0, size=None):
        if size is None:
            return lo + (hi - lo) * self.random()
        out = np.empty(int(np.prod(size)), dtype=np.float64)
        for i in range(out.size):
            out[i] = lo + (hi - lo) * self.random()
        return out.reshape(size)

    def _std_normal(self):
        if self._spare_normal is not None:
            z, self._spare_normal = self._spare_normal, None
            return z
        # Box-Muller; 1 - u keeps the log argument in (0, 1].
        u1 = 1.0 - self.random()
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare_normal = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normal(self, mu=0.0, sigma=1.0, size=None):
        if size is None:
            return mu + sigma * self._std_normal()
        out = np.empty(int(np.prod(size)), dtype=np.float64)
        for i in range(out.size):
            out[i] = mu + sigma * self._std_normal()
        return out.reshape(size)

    def randbelow(self, n):
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("randbelow needs n > 0")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, indices):
        """Fisher-Yates shuffle; returns a new int64 array."""
        out = np.array(indices, dtype=np.int64, copy=True)
        for i in range(out.size - 1, 0, -1):
            j = self.randbelow(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def permutation(self, n):
        return self.shuffle(np.arange(n))

    def unit_vector(self, d):
        v = self.normal(size=d)
        nrm = math.sqrt(l2_norm_sq(v))
        if nrm == 0.0:
            return self.unit_vector(d)
        return v / nrm
