"""Frequency-domain convolution of the charge grid with the response."""
from __future__ import annotations

import numpy as np

from ..core import ChargeGrid, MeasurementGrid, TpcSimError
from .fft import fft_2d
from .response import ResponseKernel

IMAG_TOLERANCE = 1e-9


class SupportError(TpcSimError, ValueError):
    pass


def check_support(kernel: ResponseKernel) -> None:
    """The response must fit inside the padding so wrap-around stays there."""
    spec = kernel.spec
    tb, ta, wb, wa = kernel.support
    need_t, need_w = max(tb, ta), max(wb, wa)
    if need_t > spec.pad_ticks or need_w > spec.pad_wires:
        raise SupportError(
            f"response extends {tb}/{ta} ticks and {wb}/{wa} wires around its origin; "
            f"needs pad_ticks >= {need_t} and pad_wires >= {need_w}, "
            f"grid has {spec.pad_ticks} and {spec.pad_wires}")


def convolve(s: ChargeGrid, r: ResponseKernel) -> MeasurementGrid:
    """M = IFT(R * FT(S)), returned as reals."""
    if s.counts.shape != r.values.shape:
        raise ValueError(f"charge grid {s.counts.shape} and kernel {r.values.shape} differ in shape")
    check_support(r)
    spectrum = fft_2d(s.counts.astype(np.float64))
    spectrum *= r.values
    m = fft_2d(spectrum, "inverse")
    scale = np.abs(m.real).max() if m.size else 0.0
    resid = np.abs(m.imag).max() if m.size else 0.0
    if resid > IMAG_TOLERANCE * max(scale, np.finfo(float).tiny):
        raise TpcSimError(f"convolution left an imaginary residue of {resid:.3g} "
                          f"(relative {resid / scale:.3g}); kernel is not Hermitian")
    return MeasurementGrid(s.spec, np.ascontiguousarray(m.real))
