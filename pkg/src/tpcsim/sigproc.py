"""Row-wise frequency filtering, inverse transform, block cut and medians.

One row per channel, one column per frequency (or, after the inverse
transform, per tick).  The layout follows the usual filter kernel of a
wire-readout signal processing chain:

    out = idft_rows(data * filter)[pad_rows : pad_rows + out_rows]
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .spectral.fft import fft

RESIDUE_WARN = 1e-6
# axis the inverse transform runs along; rows are channels, columns frequencies
TRANSFORM_AXIS = 1


class ImaginaryResidueWarning(UserWarning):
    pass


@dataclass
class SignalBatch:
    data: np.ndarray
    pad_rows: int = 0
    out_rows: int | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise ValueError(f"batch must be 2D with at least one column, got {self.data.shape}")
        if self.out_rows is None:
            self.out_rows = self.data.shape[0] - self.pad_rows
        if self.pad_rows < 0 or self.out_rows < 0 or self.pad_rows + self.out_rows > self.data.shape[0]:
            raise ValueError(f"pad_rows={self.pad_rows} + out_rows={self.out_rows} exceed "
                             f"{self.data.shape[0]} rows")

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]


def apply_filter(batch: SignalBatch, filt) -> SignalBatch:
    """Multiply every row by ``filt`` column-wise.

    The complex product is spelled out in real arithmetic so each component
    is rounded once, exactly as a scalar ``(a*c - b*d, a*d + b*c)``; the
    vectorised complex multiply may fuse operations and differ in the last bit.
    """
    filt = np.asarray(filt)
    if filt.ndim != 1 or filt.shape[0] != batch.n_cols:
        raise ValueError(f"filter length {filt.shape} does not match {batch.n_cols} columns")
    a, b = batch.data.real, batch.data.imag
    c = np.real(filt).astype(np.float64)[None, :]
    d = np.imag(filt).astype(np.float64)[None, :]
    out = np.empty_like(batch.data)
    out.real = a * c - b * d
    out.imag = a * d + b * c
    return SignalBatch(out, batch.pad_rows, batch.out_rows)


def idft_rows_to_real(batch: SignalBatch | np.ndarray) -> np.ndarray:
    """Inverse DFT of every row, keeping the real part.

    Emits :class:`ImaginaryResidueWarning` if the discarded imaginary part
    exceeds 1e-6 of the real part's peak, i.e. the rows were not Hermitian.
    """
    data = batch.data if isinstance(batch, SignalBatch) else np.asarray(batch, dtype=np.complex128)
    out = fft(data, axis=TRANSFORM_AXIS, inverse=True)
    if out.size:
        peak = np.abs(out.real).max()
        resid = np.abs(out.imag).max()
        if resid > RESIDUE_WARN * peak and resid > 0:
            warnings.warn(f"inverse DFT dropped an imaginary residue of {resid:.3g} "
                          f"against a real peak of {peak:.3g}", ImaginaryResidueWarning, stacklevel=2)
    return np.ascontiguousarray(out.real)


def extract_block(matrix: np.ndarray, start_row: int, n_rows: int) -> np.ndarray:
    matrix = np.asarray(matrix)
    if start_row < 0 or n_rows < 0 or start_row + n_rows > matrix.shape[0]:
        raise IndexError(f"rows [{start_row}, {start_row + n_rows}) outside a {matrix.shape[0]}-row matrix")
    return matrix[start_row:start_row + n_rows, :]


def row_median(signal) -> float:
    """Median by selection; even lengths average the two central values."""
    x = np.asarray(signal, dtype=np.float64).ravel()
    n = x.shape[0]
    if n == 0:
        raise ValueError("median of an empty signal")
    k = n // 2
    if n % 2:
        return float(np.partition(x, k)[k])
    part = np.partition(x, (k - 1, k))
    return float((part[k - 1] + part[k]) / 2.0)


def row_medians(matrix) -> np.ndarray:
    """:func:`row_median` of every row, vectorised."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] == 0:
        raise ValueError("need a 2D matrix with at least one column")
    n = m.shape[1]
    k = n // 2
    if n % 2:
        return np.partition(m, k, axis=1)[:, k].copy()
    part = np.partition(m, (k - 1, k), axis=1)
    return (part[:, k - 1] + part[:, k]) / 2.0


def process(batch: SignalBatch, filt) -> tuple[np.ndarray, np.ndarray]:
    """Filter, inverse transform, cut the output rows and take their medians."""
    real = idft_rows_to_real(apply_filter(batch, filt))
    block = extract_block(real, batch.pad_rows, batch.out_rows)
    return block, row_medians(block)
