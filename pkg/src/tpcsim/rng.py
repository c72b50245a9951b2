"""Reproducible random numbers: xoshiro256** seeded through splitmix64.

Every sampler here is a pure function of ``(seed, depo_id, draw index)``.
The compiled helpers (leading underscore) are shared with the
rasterization kernels; the :class:`RngState` methods wrap them for use
from plain Python.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .core import TpcSimError

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

# n*min(p, 1-p) above this switches binomial to the normal approximation
NORMAL_APPROX_THRESHOLD = 1e6
# mean below this inverts by walking up from k=0, otherwise from the mode
_WALK_FROM_ZERO_MEAN = 30.0

NOISE_DOMAIN = 0x6E6F697365000000


class PoolExhaustedError(TpcSimError):
    pass


class PoolAllocationError(TpcSimError, MemoryError):
    pass


@nb.njit(cache=True, nogil=True, inline="always")
def _rotl(x, k):
    return (x << U64(k)) | (x >> U64(64 - k))


@nb.njit(cache=True, nogil=True)
def _splitmix_mix(z):
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return z ^ (z >> U64(31))


@nb.njit(cache=True, nogil=True)
def _seed_state(seed, s):
    x = U64(seed)
    for i in range(4):
        x = x + _GOLDEN
        s[i] = _splitmix_mix(x)
    if s[0] == 0 and s[1] == 0 and s[2] == 0 and s[3] == 0:
        s[0] = U64(1)


@nb.njit(cache=True, nogil=True)
def _substream_key(seed, depo_id):
    return U64(seed) ^ _splitmix_mix(U64(depo_id) + _GOLDEN)


@nb.njit(cache=True, nogil=True)
def _next(s):
    result = _rotl(s[1] * U64(5), 7) * U64(9)
    t = s[1] << U64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(cache=True, nogil=True)
def _uniform(s):
    return float(_next(s) >> U64(11)) * _INV53


@nb.njit(cache=True, nogil=True)
def _box_muller0(u1, u2):
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@nb.njit(cache=True, nogil=True)
def _normal(s):
    u1 = 1.0 - _uniform(s)
    u2 = _uniform(s)
    return _box_muller0(u1, u2)


@nb.njit(cache=True, nogil=True)
def _binomial_inverse(n, p, u):
    """Binomial(n, p) from one uniform ``u`` by CDF inversion.

    Small means walk the CDF up from zero.  Larger means search outward
    from the mode in the fixed order m, m+1, m-1, m+2, ... which is still
    an inversion (of a permuted CDF) and stays O(sqrt(npq)) without
    underflowing the tail pmf.
    """
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    flip = p > 0.5
    pp = 1.0 - p if flip else p
    qq = 1.0 - pp
    r = pp / qq
    mean = n * pp
    if mean < _WALK_FROM_ZERO_MEAN:
        pmf = math.exp(n * math.log1p(-pp))
        c = pmf
        k = 0
        while u > c and k < n:
            pmf *= (n - k) / (k + 1) * r
            k += 1
            c += pmf
    else:
        m = int(math.floor((n + 1) * pp))
        if m > n:
            m = n
        logpm = (math.lgamma(n + 1.0) - math.lgamma(m + 1.0) - math.lgamma(n - m + 1.0)
                 + m * math.log(pp) + (n - m) * math.log1p(-pp))
        pm = math.exp(logpm)
        k = m
        u -= pm
        lo = m
        hi = m
        plo = pm
        phi = pm
        while u > 0.0:
            up_open = hi < n and phi > 1e-30
            down_open = lo > 0 and plo > 1e-30
            if not (up_open or down_open):
                k = m
                break
            if up_open:
                phi *= (n - hi) / (hi + 1) * r
                hi += 1
                u -= phi
                if u <= 0.0:
                    k = hi
                    break
            if down_open:
                plo *= lo / (n - lo + 1) / r
                lo -= 1
                u -= plo
                if u <= 0.0:
                    k = lo
                    break
    if flip:
        return n - k
    return k


@nb.njit(cache=True, nogil=True)
def _binomial_normal(n, p, z):
    mu = n * p
    sd = math.sqrt(n * p * (1.0 - p))
    k = int(math.floor(mu + sd * z + 0.5))
    if k < 0:
        return 0
    if k > n:
        return n
    return k


@nb.njit(cache=True, nogil=True)
def _needs_normal(n, p):
    return n * min(p, 1.0 - p) > NORMAL_APPROX_THRESHOLD


@nb.njit(cache=True, nogil=True)
def _binomial_state(n, p, s):
    if _needs_normal(n, p):
        return _binomial_normal(n, p, _normal(s))
    return _binomial_inverse(n, p, _uniform(s))


@nb.njit(cache=True, nogil=True)
def _fill_uniforms(s, out):
    for i in range(out.shape[0]):
        out[i] = _uniform(s)


@nb.njit(cache=True, nogil=True)
def _fill_normals(s, out):
    n = out.shape[0]
    i = 0
    while i < n:
        u1 = 1.0 - _uniform(s)
        u2 = _uniform(s)
        rad = math.sqrt(-2.0 * math.log(u1))
        out[i] = rad * math.cos(2.0 * math.pi * u2)
        if i + 1 < n:
            out[i + 1] = rad * math.sin(2.0 * math.pi * u2)
        i += 2


@nb.njit(cache=True, nogil=True)
def _fill_binomials(s, n, p, out):
    for i in range(out.shape[0]):
        out[i] = _binomial_state(n, p, s)


@nb.njit(cache=True, nogil=True)
def _fill_pool(seed, first_id, slice_len, uniforms, normals, with_normals):
    s = np.empty(4, dtype=np.uint64)
    n_depos = uniforms.shape[0] // slice_len
    for d in range(n_depos):
        _seed_state(_substream_key(seed, U64(first_id) + U64(d)), s)
        lo = d * slice_len
        _fill_uniforms(s, uniforms[lo:lo + slice_len])
        if with_normals:
            _fill_normals(s, normals[lo:lo + slice_len])


def _as_u64(seed: int) -> np.uint64:
    return U64(int(seed) & 0xFFFFFFFFFFFFFFFF)


class RngState:
    """xoshiro256** generator state (four 64-bit words, never all zero)."""

    __slots__ = ("s",)

    def __init__(self, s):
        s = np.array(s, dtype=np.uint64)
        if s.shape != (4,) or not s.any():
            raise ValueError("state must be four 64-bit words, not all zero")
        self.s = s

    @classmethod
    def from_seed(cls, seed: int) -> "RngState":
        s = np.empty(4, dtype=np.uint64)
        _seed_state(_as_u64(seed), s)
        return cls(s)

    def copy(self) -> "RngState":
        return RngState(self.s.copy())

    def __eq__(self, other):
        return isinstance(other, RngState) and bool(np.array_equal(self.s, other.s))

    def __repr__(self):
        return "RngState(" + ", ".join(f"0x{int(w):016x}" for w in self.s) + ")"

    def next_u64(self) -> int:
        return int(_next(self.s))

    def uniform01(self) -> float:
        return _uniform(self.s)

    def normal(self) -> float:
        return _normal(self.s)

    def binomial(self, n: int, p: float) -> int:
        _check_binomial_args(n, p)
        return _binomial_state(int(n), float(p), self.s)

    def uniforms(self, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.float64)
        _fill_uniforms(self.s, out)
        return out

    def normals(self, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.float64)
        _fill_normals(self.s, out)
        return out

    def binomials(self, n: int, p: float, size: int) -> np.ndarray:
        _check_binomial_args(n, p)
        out = np.empty(size, dtype=np.int64)
        _fill_binomials(self.s, int(n), float(p), out)
        return out


def _check_binomial_args(n, p):
    if n < 0:
        raise ValueError(f"binomial n must be >= 0, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"binomial p must lie in [0, 1], got {p}")


def uniform_from_bits(bits: int) -> float:
    """Map a raw 64-bit output to [0, 1) using its top 53 bits."""
    return (int(bits) >> 11) * _INV53


def box_muller(u1: float, u2: float) -> tuple[float, float]:
    """Two independent standard normals from ``u1`` in (0, 1], ``u2`` in [0, 1)."""
    if not 0.0 < u1 <= 1.0:
        raise ValueError(f"u1 must lie in (0, 1], got {u1}; redraw")
    if not 0.0 <= u2 < 1.0:
        raise ValueError(f"u2 must lie in [0, 1), got {u2}")
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)


def binomial_from_uniform(n: int, p: float, u: float) -> int:
    _check_binomial_args(n, p)
    return _binomial_inverse(int(n), float(p), float(u))


def binomial(n: int, p: float, state: RngState) -> int:
    return state.binomial(n, p)


def substream(seed: int, depo_id: int) -> RngState:
    """Independent generator for one depo, derived from ``(seed, depo_id)``."""
    s = np.empty(4, dtype=np.uint64)
    _seed_state(U64(_substream_key(_as_u64(seed), _as_u64(depo_id))), s)
    return RngState(s)


@dataclass
class RandomPool:
    """Pre-generated per-depo random numbers.

    The slice of depo ``d`` holds the first ``slice_len`` uniforms of
    ``substream(seed, d)``; its normals come from the next ``slice_len``
    uniforms of the same stream via Box-Muller.  A pool is therefore a
    materialised substream, and the two rng modes give identical draws.
    """

    seed: int
    slice_len: int
    uniforms: np.ndarray
    normals: np.ndarray | None = None
    first_id: int = 0

    @property
    def n_depos(self) -> int:
        return self.uniforms.shape[0] // self.slice_len

    def _range(self, depo_id: int) -> slice:
        d = depo_id - self.first_id
        if not 0 <= d < self.n_depos:
            raise IndexError(f"depo {depo_id} not in pool [{self.first_id}, {self.first_id + self.n_depos})")
        return slice(d * self.slice_len, (d + 1) * self.slice_len)

    def uniform_slice(self, depo_id: int) -> np.ndarray:
        return self.uniforms[self._range(depo_id)]

    def normal_slice(self, depo_id: int) -> np.ndarray:
        if self.normals is None:
            raise ValueError("pool was built without normals")
        return self.normals[self._range(depo_id)]

    @property
    def nbytes(self) -> int:
        return self.uniforms.nbytes + (0 if self.normals is None else self.normals.nbytes)


def build_pool(seed: int, n_depos: int, slice_len: int = 1024, *, first_id: int = 0,
               with_normals: bool = True, max_bytes: int = 2 << 30) -> RandomPool:
    if n_depos < 0 or slice_len < 1:
        raise ValueError("need n_depos >= 0 and slice_len >= 1")
    n = n_depos * slice_len
    need = n * 8 * (2 if with_normals else 1)
    if need > max_bytes:
        raise PoolAllocationError(
            f"pool of {n_depos} x {slice_len} draws needs {need} bytes, budget is {max_bytes}")
    try:
        uniforms = np.empty(n, dtype=np.float64)
        normals = np.empty(n if with_normals else 0, dtype=np.float64)
    except MemoryError as exc:
        raise PoolAllocationError(f"cannot allocate pool of {need} bytes") from exc
    _fill_pool(_as_u64(seed), _as_u64(first_id), slice_len, uniforms, normals, with_normals)
    return RandomPool(int(seed), slice_len, uniforms, normals if with_normals else None, first_id)
