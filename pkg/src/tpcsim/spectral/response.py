"""Parametric detector response R(w_t, w_x).

The time-domain impulse response is the field response (a Gaussian pulse
for collection wires, its bipolar derivative for induction wires)
convolved with a semi-Gaussian shaper, scaled by ``gain`` electrons to
output units.  Across wires the response is a short weight vector, by
default a single-wire delta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import ConfigError, GridSpec
from .fft import fft_2d

PLANE_KINDS = ("collection", "induction")

FIELD_WINDOW_SIGMAS = 6.0
SHAPER_TAIL = 1e-12   # relative amplitude where the shaper tail is cut


@dataclass(frozen=True)
class ResponseParams:
    plane_kind: str = "collection"
    field_sigma_t: float = 1.0      # us
    shaper_peaking: float = 2.0     # us
    shaper_order: int = 2
    gain: float = 14.0              # output units per electron (integral of the response)
    wire_weights: tuple = (1.0,)    # odd length, centred on the hit wire

    def __post_init__(self):
        if self.plane_kind not in PLANE_KINDS:
            raise ConfigError(f"plane_kind must be one of {PLANE_KINDS}, got {self.plane_kind!r}")
        if not (self.field_sigma_t > 0 and self.shaper_peaking > 0):
            raise ConfigError("response widths must be positive")
        if self.shaper_order < 1:
            raise ConfigError("shaper_order must be >= 1")
        if len(self.wire_weights) % 2 != 1:
            raise ConfigError("wire_weights needs odd length so it centres on the hit wire")
        object.__setattr__(self, "wire_weights", tuple(float(w) for w in self.wire_weights))

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["wire_weights"] = list(self.wire_weights)
        return d


def field_response(params: ResponseParams, tick: float) -> tuple[np.ndarray, int]:
    """Sampled field response and the tick offset of its first sample.

    Collection: unit-sum Gaussian.  Induction: the negated Gaussian
    derivative, exactly antisymmetric so the samples cancel, scaled so the
    leading (positive) lobe sums to one.
    """
    sigma = params.field_sigma_t
    half = max(int(math.ceil(FIELD_WINDOW_SIGMAS * sigma / tick)), 1)
    k = np.arange(1, half + 1)
    t = k * tick
    g = np.exp(-0.5 * (t / sigma) ** 2)
    if params.plane_kind == "collection":
        f = np.concatenate([g[::-1], [1.0], g])
        return f / f.sum(), -half
    lobe = t * g
    s = lobe.sum()
    if s == 0.0:
        lobe = np.zeros_like(lobe)
        lobe[0] = 1.0
    else:
        lobe = lobe / s
    return np.concatenate([lobe[::-1], [0.0], -lobe]), -half


def electronics_response(params: ResponseParams, tick: float) -> np.ndarray:
    """Unit-sum semi-Gaussian shaper sampled at t = 0, tick, 2 tick, ...

    The shape is (t/tau)^n exp(-n (t/tau - 1)), peaking at t = tau.  A
    shaper too fast to resolve collapses onto the sample nearest tau.
    """
    tau, n = params.shaper_peaking, params.shaper_order
    # the shape falls monotonically after tau; walk out until the tail is negligible
    k_peak = int(math.ceil(tau / tick))
    k_max = k_peak
    while True:
        x = (k_max * tick) / tau
        if x > 1 and n * (math.log(x) - x + 1) < math.log(SHAPER_TAIL):
            break
        k_max += 1
    x = np.arange(k_max + 1) * tick / tau
    with np.errstate(divide="ignore"):
        e = np.exp(n * (np.log(x) - x + 1.0))
    s = e.sum()
    if not s > 0:
        e = np.zeros(int(round(tau / tick)) + 1)
        e[-1] = 1.0
        return e
    return e / s


def time_response(params: ResponseParams, tick: float) -> tuple[np.ndarray, int]:
    """Full time-domain response (gain applied) and its first tick offset."""
    f, first = field_response(params, tick)
    e = electronics_response(params, tick)
    return params.gain * np.convolve(f, e), first


@dataclass
class ResponseKernel:
    spec: GridSpec
    values: np.ndarray                      # complex, padded grid shape
    params: ResponseParams | None = None
    support: tuple[int, int, int, int] | None = field(default=None)
    # support = (ticks before, ticks after, wires before, wires after) of the
    # impulse response around its origin

    def __post_init__(self):
        if self.values.shape != self.spec.shape:
            raise ValueError(f"kernel shape {self.values.shape} != grid shape {self.spec.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("kernel has non-finite entries")
        if self.support is None:
            self.support = measure_support(np.real(fft_2d(self.values, "inverse")))

    @classmethod
    def identity(cls, spec: GridSpec) -> "ResponseKernel":
        return cls(spec, np.ones(spec.shape, dtype=np.complex128), None, (0, 0, 0, 0))

    @classmethod
    def from_time_domain(cls, spec: GridSpec, impulse: np.ndarray, params=None) -> "ResponseKernel":
        """Kernel from a full-grid impulse response with its origin at index (0, 0)."""
        impulse = np.asarray(impulse)
        return cls(spec, fft_2d(impulse), params, measure_support(impulse, tol=0.0))

    def impulse(self) -> np.ndarray:
        return np.real(fft_2d(self.values, "inverse"))


def _signed_extent(nonzero_idx: np.ndarray, n: int) -> tuple[int, int]:
    if nonzero_idx.size == 0:
        return 0, 0
    signed = np.where(nonzero_idx > n // 2, nonzero_idx - n, nonzero_idx)
    return int(max(0, -signed.min())), int(max(0, signed.max()))


def measure_support(impulse: np.ndarray, tol: float = 1e-12) -> tuple[int, int, int, int]:
    """Extent of an origin-anchored circular impulse response.

    Entries at or below ``tol * max|impulse|`` count as zero.  Offsets past
    half the grid are read as negative.
    """
    mag = np.abs(impulse)
    peak = mag.max() if mag.size else 0.0
    mask = mag > tol * peak if peak > 0 else np.zeros_like(mag, dtype=bool)
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    tb, ta = _signed_extent(cols, impulse.shape[1])
    wb, wa = _signed_extent(rows, impulse.shape[0])
    return tb, ta, wb, wa


def build_response(spec: GridSpec, params: ResponseParams | None = None) -> ResponseKernel:
    params = params or ResponseParams()
    h, first = time_response(params, spec.tick)
    w = np.asarray(params.wire_weights)
    half_w = len(w) // 2
    nrows, ncols = spec.shape
    if len(h) > ncols or len(w) > nrows:
        raise ConfigError(f"response ({len(w)}x{len(h)}) does not fit the grid {spec.shape}")
    impulse = np.zeros(spec.shape)
    cols = (first + np.arange(len(h))) % ncols
    rows = (np.arange(-half_w, half_w + 1)) % nrows
    # rows/cols are distinct after the mod, so fancy-index assignment is safe
    impulse[np.ix_(rows, cols)] = np.outer(w, h)
    tb, ta = max(0, -first), max(0, first + len(h) - 1)
    return ResponseKernel(spec, fft_2d(impulse), params, (tb, ta, half_w, half_w))
