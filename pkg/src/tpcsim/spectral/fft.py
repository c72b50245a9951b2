"""Arbitrary-length complex DFT.

Mixed-radix Cooley-Tukey over the factors of N, with Bluestein's chirp-z
algorithm when N has a prime factor too large for a direct small DFT.
Transforms are batched: every routine works along one axis of an
N-dimensional array.  Forward uses exp(-2 pi i nk/N); inverse carries 1/N.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

# prime factors above this go through Bluestein instead of a direct DFT
MAX_DIRECT_RADIX = 31
_RADIX_ORDER = (4, 2, 3, 5, 7)

FORWARD = "forward"
INVERSE = "inverse"


def _prime_factors(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        while n % d == 0:
            out.append(d)
            n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


@lru_cache(maxsize=None)
def plan(n: int) -> tuple:
    """``("mixed", radices)`` or ``("bluestein", m)`` for a length-``n`` transform."""
    if n < 1:
        raise ValueError(f"DFT length must be >= 1, got {n}")
    factors = _prime_factors(n)
    if factors and max(factors) > MAX_DIRECT_RADIX:
        m = 1
        while m < 2 * n - 1:
            m *= 2
        return ("bluestein", m)
    radices = []
    twos = factors.count(2)
    radices += [4] * (twos // 2) + [2] * (twos % 2)
    radices += [f for f in factors if f != 2]
    return ("mixed", tuple(radices))


@lru_cache(maxsize=None)
def _twiddle(n: int, r: int) -> np.ndarray:
    m = n // r
    jk = np.outer(np.arange(r), np.arange(m)) % n
    return np.exp(-2j * np.pi * jk / n)


@lru_cache(maxsize=None)
def _dft_matrix(r: int) -> np.ndarray:
    js = np.outer(np.arange(r), np.arange(r)) % r
    return np.exp(-2j * np.pi * js / r)


def _butterfly(y: np.ndarray, r: int) -> np.ndarray:
    """Size-``r`` DFT across axis 1 of ``y`` with shape (B, r, m)."""
    if r == 2:
        out = np.empty_like(y)
        np.add(y[:, 0], y[:, 1], out=out[:, 0])
        np.subtract(y[:, 0], y[:, 1], out=out[:, 1])
        return out
    if r == 4:
        a0 = y[:, 0] + y[:, 2]
        a1 = y[:, 0] - y[:, 2]
        b0 = y[:, 1] + y[:, 3]
        b1 = (y[:, 1] - y[:, 3]) * -1j
        out = np.empty_like(y)
        out[:, 0] = a0 + b0
        out[:, 1] = a1 + b1
        out[:, 2] = a0 - b0
        out[:, 3] = a1 - b1
        return out
    f = _dft_matrix(r)
    if r <= 7:
        out = np.zeros_like(y)
        for s in range(r):
            acc = out[:, s]
            acc += y[:, 0]
            for j in range(1, r):
                acc += f[s, j] * y[:, j]
        return out
    b, _, m = y.shape
    flat = y.transpose(1, 0, 2).reshape(r, b * m)
    return (f @ flat).reshape(r, b, m).transpose(1, 0, 2)


def _mixed(x: np.ndarray, radices: tuple) -> np.ndarray:
    b, n = x.shape
    if n == 1:
        return x.copy()
    r = radices[0]
    m = n // r
    # decimation in time: column j of the (m, r) view is x[j::r]
    sub = x.reshape(b, m, r).transpose(0, 2, 1).reshape(b * r, m)
    y = _mixed(sub, radices[1:]).reshape(b, r, m)
    y *= _twiddle(n, r)
    return _butterfly(y, r).reshape(b, n)


@lru_cache(maxsize=None)
def _chirp(n: int) -> np.ndarray:
    k = np.arange(n, dtype=np.int64)
    return np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)


@lru_cache(maxsize=None)
def _bluestein_filter(n: int, m: int) -> np.ndarray:
    w = np.conj(_chirp(n))
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = w
    b[m - n + 1:] = w[1:][::-1]
    return _rows_forward(b[None, :])[0]


def _bluestein(x: np.ndarray, m: int) -> np.ndarray:
    bsz, n = x.shape
    w = _chirp(n)
    a = np.zeros((bsz, m), dtype=np.complex128)
    a[:, :n] = x * w
    fa = _rows_forward(a)
    fa *= _bluestein_filter(n, m)
    conv = np.conj(_rows_forward(np.conj(fa))) / m
    return conv[:, :n] * w


def _rows_forward(x: np.ndarray) -> np.ndarray:
    kind, arg = plan(x.shape[1])
    if kind == "mixed":
        return _mixed(x, arg)
    return _bluestein(x, arg)


def fft(a, axis: int = -1, inverse: bool = False) -> np.ndarray:
    """Batched DFT of ``a`` along ``axis``."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim == 0:
        raise ValueError("need at least one dimension")
    n = a.shape[axis]
    if n < 1:
        raise ValueError("DFT length must be >= 1")
    moved = np.moveaxis(a, axis, -1)
    lead = moved.shape[:-1]
    rows = np.ascontiguousarray(moved).reshape(-1, n)
    if rows.shape[0] == 0:
        return a.copy()
    if inverse:
        out = np.conj(_rows_forward(np.conj(rows)))
        out /= n
    else:
        out = _rows_forward(rows)
    return np.moveaxis(out.reshape(lead + (n,)), -1, axis)


def _is_inverse(direction: str) -> bool:
    if direction == FORWARD:
        return False
    if direction == INVERSE:
        return True
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def dft_1d(x, direction: str = FORWARD) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1:
        raise ValueError("dft_1d expects a vector")
    return fft(x, inverse=_is_inverse(direction))


def fft_2d(a, direction: str = FORWARD) -> np.ndarray:
    """2D DFT of a (wires, ticks) array: ticks first, then wires."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError("fft_2d expects a 2D array")
    inv = _is_inverse(direction)
    return fft(fft(a, axis=1, inverse=inv), axis=0, inverse=inv)
