"""Additive electronics noise, one independent random stream per wire."""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .. import rng as _rng
from ..core import ConfigError, MeasurementGrid
from .fft import fft

NOISE_MODES = ("off", "white", "spectrum")


@dataclass(frozen=True)
class NoiseModel:
    mode: str = "off"
    sigma: float = 0.0
    amplitude_spectrum: tuple | None = None

    def __post_init__(self):
        if self.mode not in NOISE_MODES:
            raise ConfigError(f"noise mode must be one of {NOISE_MODES}, got {self.mode!r}")
        if self.sigma < 0:
            raise ConfigError("noise sigma must be >= 0")
        if self.amplitude_spectrum is not None:
            amp = tuple(float(a) for a in self.amplitude_spectrum)
            if any(a < 0 for a in amp):
                raise ConfigError("noise amplitudes must be >= 0")
            object.__setattr__(self, "amplitude_spectrum", amp)
        if self.mode == "spectrum" and self.amplitude_spectrum is None:
            raise ConfigError("spectrum noise needs amplitude_spectrum")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "sigma": self.sigma,
                "amplitude_spectrum": None if self.amplitude_spectrum is None else list(self.amplitude_spectrum)}


def _wire_seed(seed: int) -> np.uint64:
    return _rng._as_u64(int(seed) ^ _rng.NOISE_DOMAIN)


@nb.njit(cache=True, nogil=True)
def _white_rows(seed, out):
    s = np.empty(4, dtype=np.uint64)
    for w in range(out.shape[0]):
        _rng._seed_state(_rng._substream_key(seed, np.uint64(w)), s)
        _rng._fill_normals(s, out[w])


@nb.njit(cache=True, nogil=True)
def _phase_rows(seed, out):
    s = np.empty(4, dtype=np.uint64)
    for w in range(out.shape[0]):
        _rng._seed_state(_rng._substream_key(seed, np.uint64(w)), s)
        _rng._fill_uniforms(s, out[w])


def white_noise(shape, sigma: float, seed: int) -> np.ndarray:
    z = np.empty(shape, dtype=np.float64)
    _white_rows(_wire_seed(seed), z)
    return sigma * z


def spectrum_noise(shape, amplitude, seed: int) -> np.ndarray:
    """Real noise whose per-wire DFT magnitudes equal ``amplitude``.

    Phases are uniform per frequency, then mirrored so the spectrum is
    Hermitian.  Bin 0 (and the Nyquist bin for even lengths) must be real,
    so there the phase only picks the sign.  The magnitudes of the upper
    half follow the mirrored lower half.
    """
    n_rows, n = shape
    amp = np.asarray(amplitude, dtype=np.float64)
    if amp.shape != (n,):
        raise ValueError(f"amplitude spectrum has length {amp.shape[0] if amp.ndim else 0}, grid has {n} ticks")
    u = np.empty(shape, dtype=np.float64)
    _phase_rows(_wire_seed(seed), u)
    spec = amp * np.exp(2j * np.pi * u)
    half = (n - 1) // 2
    if half:
        spec[:, n - half:] = np.conj(spec[:, 1:half + 1][:, ::-1])
    for k in ((0, n // 2) if n % 2 == 0 else (0,)):
        spec[:, k] = amp[k] * np.where(np.cos(2 * np.pi * u[:, k]) < 0, -1.0, 1.0)
    return fft(spec, axis=1, inverse=True).real


def add_noise(m: MeasurementGrid, model: NoiseModel, seed: int) -> MeasurementGrid:
    if model.mode == "off" or (model.mode == "white" and model.sigma == 0.0):
        return MeasurementGrid(m.spec, m.samples.copy())
    if model.mode == "white":
        return MeasurementGrid(m.spec, m.samples + white_noise(m.samples.shape, model.sigma, seed))
    return MeasurementGrid(m.spec, m.samples + spectrum_noise(m.samples.shape, model.amplitude_spectrum, seed))
