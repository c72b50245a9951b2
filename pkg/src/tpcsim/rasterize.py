"""Drift, bin-integrated Gaussian sampling and charge fluctuation.

A depo becomes a small probability patch (the Gaussian cloud integrated
over each wire x tick bin) and then an integer patch by splitting its
charge with a chain of conditional binomials, so every depo conserves its
charge exactly.
"""
from __future__ import annotations

import math
import time
from contextlib import nullcontext
from dataclasses import dataclass
from typing import NamedTuple

import numba as nb
import numpy as np

from . import rng as _rng
from .core import (
    ConfigError,
    Depo,
    DepoArrays,
    GridSpec,
    Patch,
    PatchBatch,
    PatchBounds,
    PatchKind,
    TpcSimError,
    map_depo_to_grid,
)

RNG_MODES = ("inline", "pool", "substream")
_MODE_CODE = {"inline": 0, "substream": 1, "pool": 2}
_SQRT1_2 = 1.0 / math.sqrt(2.0)


class DriftError(TpcSimError, ValueError):
    pass


@dataclass(frozen=True)
class DriftParams:
    response_plane_x: float = 0.0   # mm
    drift_speed: float = 1.6        # mm/us
    D_L: float = 0.0040             # mm^2/us
    D_T: float = 0.0088             # mm^2/us

    def __post_init__(self):
        if not self.drift_speed > 0:
            raise ConfigError("drift_speed must be positive")
        if self.D_L < 0 or self.D_T < 0:
            raise ConfigError("diffusion coefficients must be non-negative")


def drift_depo(depo: Depo, params: DriftParams) -> Depo:
    """Transport a depo to the response plane, widening it by diffusion.

    Electrons drift towards decreasing ``drift_x``; a depo with
    ``drift_x < response_plane_x`` is behind the plane and rejected.
    """
    if depo.drift_x is None:
        return depo
    dx = depo.drift_x - params.response_plane_x
    if dx < 0:
        raise DriftError(
            f"depo {depo.id} at drift_x={depo.drift_x} mm is behind the response plane "
            f"at {params.response_plane_x} mm")
    if dx == 0:
        return depo
    v = params.drift_speed
    dt = dx / v
    sigma_t = math.sqrt(depo.sigma_t ** 2 + 2.0 * params.D_L * dt / v ** 2)
    sigma_x = math.sqrt(depo.sigma_x ** 2 + 2.0 * params.D_T * dt)
    return Depo(depo.t + dt, depo.x, depo.q, sigma_t, sigma_x, depo.id, params.response_plane_x)


def drift_arrays(depos: DepoArrays, params: DriftParams) -> DepoArrays:
    """Vectorised :func:`drift_depo` (same arithmetic, elementwise)."""
    dx = depos.drift_x - params.response_plane_x
    has = ~np.isnan(dx)
    if np.any(dx[has] < 0):
        bad = int(depos.id[has][np.argmax(dx[has] < 0)])
        raise DriftError(f"depo {bad} is behind the response plane at {params.response_plane_x} mm")
    move = has & (dx > 0)
    if not move.any():
        return depos
    out = DepoArrays(*(getattr(depos, f).copy() for f in depos.__dataclass_fields__))
    v = params.drift_speed
    dt = dx[move] / v
    out.t[move] = depos.t[move] + dt
    out.sigma_t[move] = np.sqrt(depos.sigma_t[move] ** 2 + 2.0 * params.D_L * dt / v ** 2)
    out.sigma_x[move] = np.sqrt(depos.sigma_x[move] ** 2 + 2.0 * params.D_T * dt)
    out.drift_x[move] = params.response_plane_x
    return out


# ---------------------------------------------------------------- sampling

@nb.njit(cache=True, nogil=True)
def _gauss_mass(a, b):
    """Standard normal mass on [a, b], accurate in either tail."""
    if a >= 0.0:
        return 0.5 * (math.erfc(a * _SQRT1_2) - math.erfc(b * _SQRT1_2))
    if b <= 0.0:
        return 0.5 * (math.erfc(-b * _SQRT1_2) - math.erfc(-a * _SQRT1_2))
    return 1.0 - 0.5 * math.erfc(-a * _SQRT1_2) - 0.5 * math.erfc(b * _SQRT1_2)


@nb.njit(cache=True, nogil=True)
def _axis_mass(lo, origin, spacing, pad, center, sigma, out):
    """Gaussian mass in bins lo, lo+1, ... of one axis (not normalised)."""
    if sigma == 0.0:
        c = pad + math.floor((center - origin) / spacing)
        for k in range(out.shape[0]):
            out[k] = 1.0 if lo + k == c else 0.0
        return
    for k in range(out.shape[0]):
        e_lo = origin + (lo + k - pad) * spacing
        e_hi = origin + (lo + k + 1 - pad) * spacing
        out[k] = _gauss_mass((e_lo - center) / sigma, (e_hi - center) / sigma)


@nb.njit(cache=True, nogil=True)
def _sample_one(t, x, sigma_t, sigma_x, wlo, tlo, nw, nt, pad_w, pad_t, pitch, tick,
                origin_x, origin_t, renormalize, out):
    px = np.empty(nw)
    pt = np.empty(nt)
    _axis_mass(wlo, origin_x, pitch, pad_w, x, sigma_x, px)
    _axis_mass(tlo, origin_t, tick, pad_t, t, sigma_t, pt)
    if renormalize:
        sx = px.sum()
        st = pt.sum()
        if sx > 0.0:
            px /= sx
        if st > 0.0:
            pt /= st
    captured = px.sum() * pt.sum()
    for i in range(nw):
        for j in range(nt):
            out[i * nt + j] = px[i] * pt[j]
    return captured


@nb.njit(cache=True, nogil=True)
def _sample_batch(t, x, sigma_t, sigma_x, wlo, tlo, nw, nt, start, pad_w, pad_t, pitch, tick,
                  origin_x, origin_t, out):
    for d in range(t.shape[0]):
        _sample_one(t[d], x[d], sigma_t[d], sigma_x[d], wlo[d], tlo[d], nw[d], nt[d],
                    pad_w, pad_t, pitch, tick, origin_x, origin_t, True, out[start[d]:start[d + 1]])


def _spec_args(spec: GridSpec):
    return (spec.pad_wires, spec.pad_ticks, float(spec.pitch), float(spec.tick),
            float(spec.origin_x), float(spec.origin_t))


def patch_bounds(depo: Depo, spec: GridSpec, n_sigma: float = 3.0) -> tuple[PatchBounds | None, bool]:
    """Clipped bounds of a depo's patch and whether clipping changed them."""
    _, _, bounds = map_depo_to_grid(depo, spec, n_sigma)
    clipped = bounds.clip(spec)
    return clipped, clipped != bounds


def bin_integrated_patch(depo: Depo, spec: GridSpec, n_sigma: float = 3.0,
                         renormalize: bool = False) -> tuple[PatchBounds, np.ndarray, float]:
    """Raw per-bin Gaussian mass over the clipped patch.

    Returns ``(bounds, values, captured)`` where ``captured`` is the total
    Gaussian mass inside the patch before any renormalisation.
    """
    bounds, _ = patch_bounds(depo, spec, n_sigma)
    if bounds is None:
        raise ValueError(f"depo {depo.id} lies entirely outside the padded grid")
    out = np.empty(bounds.n_w * bounds.n_t)
    captured = _sample_one(float(depo.t), float(depo.x), float(depo.sigma_t), float(depo.sigma_x),
                           bounds.wire_lo, bounds.tick_lo, bounds.n_w, bounds.n_t,
                           *_spec_args(spec), renormalize, out)
    if not renormalize:
        captured = out.sum()
    return bounds, out.reshape(bounds.n_w, bounds.n_t), float(captured)


def sample_patch(depo: Depo, spec: GridSpec, n_sigma: float = 3.0) -> Patch | None:
    """Probability patch of one depo, or ``None`` if it misses the grid.

    Each axis is integrated and normalised separately, so the patch is an
    outer product summing to one and transposing the inputs transposes the
    output exactly.
    """
    bounds, _ = patch_bounds(depo, spec, n_sigma)
    if bounds is None:
        return None
    _, values, _ = bin_integrated_patch(depo, spec, n_sigma, renormalize=True)
    return Patch(bounds.wire_lo, bounds.tick_lo, values, PatchKind.PROBABILITY)


# ------------------------------------------------------------- fluctuation

@nb.njit(cache=True, nogil=True)
def _fluctuate_into(probs, q, out, from_state, s, uniforms, normals):
    """Split ``q`` over ``probs`` with sequential conditional binomials.

    Draws come from the generator ``s`` when ``from_state`` is set,
    otherwise sequentially from ``uniforms`` (``normals`` for the rare
    normal-approximation draws).  Returns the number of draws, or -1 when
    the supplied arrays run out.
    """
    n = probs.shape[0]
    remaining = q
    prem = 0.0
    for i in range(n):
        prem += probs[i]
    iu = 0
    inn = 0
    for i in range(n - 1):
        p = probs[i]
        if prem <= p or prem <= 0.0:
            ratio = 1.0
        else:
            ratio = p / prem
        if from_state:
            k = _rng._binomial_state(remaining, ratio, s)
        elif _rng._needs_normal(remaining, ratio):
            if inn >= normals.shape[0]:
                return -1
            k = _rng._binomial_normal(remaining, ratio, normals[inn])
            inn += 1
        else:
            if iu >= uniforms.shape[0]:
                return -1
            k = _rng._binomial_inverse(remaining, ratio, uniforms[iu])
            iu += 1
        out[i] = k
        remaining -= k
        prem -= p
    out[n - 1] = remaining
    return max(n - 1, 0)


@nb.njit(cache=True, nogil=True)
def _fluctuate_batch(probs, start, q, ids, mode, seed, s, uniforms, normals, slice_len, first_id, out):
    """Fluctuate a packed batch; returns -1 or the index of a depo whose pool slice ran out."""
    st = np.empty(4, dtype=np.uint64)
    empty = np.empty(0, dtype=np.float64)
    for d in range(start.shape[0] - 1):
        a = start[d]
        b = start[d + 1]
        if mode == 0:
            r = _fluctuate_into(probs[a:b], q[d], out[a:b], True, s, empty, empty)
        elif mode == 1:
            _rng._seed_state(_rng._substream_key(seed, np.uint64(ids[d])), st)
            r = _fluctuate_into(probs[a:b], q[d], out[a:b], True, st, empty, empty)
        else:
            lo = (ids[d] - first_id) * slice_len
            nrm = normals[lo:lo + slice_len] if normals.shape[0] > 0 else empty
            r = _fluctuate_into(probs[a:b], q[d], out[a:b], False, s,
                                uniforms[lo:lo + slice_len], nrm)
        if r < 0:
            return d
    return -1


def fluctuate(patch: Patch, q: int, source) -> Patch:
    """Integer patch holding exactly ``q`` electrons.

    ``source`` is an :class:`~tpcsim.rng.RngState` (advanced in place) or
    a 1D array of pre-generated uniforms, e.g. a pool slice.
    """
    if q < 0:
        raise ValueError(f"negative charge {q}")
    probs = np.ascontiguousarray(patch.values, dtype=np.float64).ravel()
    out = np.empty(probs.shape[0], dtype=np.int64)
    empty = np.empty(0, dtype=np.float64)
    if isinstance(source, _rng.RngState):
        _fluctuate_into(probs, int(q), out, True, source.s, empty, empty)
    else:
        uniforms = np.ascontiguousarray(source, dtype=np.float64)
        if _fluctuate_into(probs, int(q), out, False, np.ones(4, np.uint64), uniforms, empty) < 0:
            raise _rng.PoolExhaustedError(
                f"{uniforms.shape[0]} uniforms cannot fluctuate a {probs.shape[0]}-bin patch")
    return Patch(patch.wire_offset, patch.tick_offset, out.reshape(patch.values.shape), PatchKind.COUNT)


# ------------------------------------------------------------ composition

def _stage(timer, name):
    return timer.stage(name) if timer is not None else nullcontext()


def rasterize_depo(depo: Depo, spec: GridSpec, n_sigma: float, rng_mode: str, rng_source,
                   timer=None) -> Patch | None:
    """Sample then fluctuate one depo.

    ``rng_source`` depends on ``rng_mode``: an ``RngState`` shared across
    depos for ``"inline"``, a :class:`~tpcsim.rng.RandomPool` for
    ``"pool"`` and the integer seed for ``"substream"``.  ``timer``, if
    given, needs a ``stage(name)`` context manager.
    """
    with _stage(timer, "sampling_2d"):
        patch = sample_patch(depo, spec, n_sigma)
    if patch is None:
        return None
    with _stage(timer, "fluctuation"):
        if rng_mode == "inline":
            source = rng_source
        elif rng_mode == "substream":
            source = _rng.substream(rng_source, depo.id)
        elif rng_mode == "pool":
            source = rng_source.uniform_slice(depo.id)
        else:
            raise ConfigError(f"unknown rng mode {rng_mode!r}")
        try:
            return fluctuate(patch, depo.q, source)
        except _rng.PoolExhaustedError as exc:
            raise _rng.PoolExhaustedError(f"depo {depo.id}: {exc}") from None


class PatchPlan(NamedTuple):
    """Where each depo of a batch lands; dropped depos miss the grid entirely."""

    keep: np.ndarray        # bool per input depo
    wire_lo: np.ndarray     # int64 per kept depo
    tick_lo: np.ndarray
    n_w: np.ndarray
    n_t: np.ndarray
    start: np.ndarray       # len(kept) + 1
    n_clipped: int          # kept patches cut by the grid edge
    dropped_charge: int


def plan_patches(depos: DepoArrays, spec: GridSpec, n_sigma: float = 3.0) -> PatchPlan:
    """Vectorised :func:`patch_bounds` for a whole batch."""
    if not n_sigma > 0:
        raise ValueError("n_sigma must be positive")
    cw = spec.pad_wires + np.floor((depos.x - spec.origin_x) / spec.pitch).astype(np.int64)
    ct = spec.pad_ticks + np.floor((depos.t - spec.origin_t) / spec.tick).astype(np.int64)
    hw = np.ceil(n_sigma * depos.sigma_x / spec.pitch).astype(np.int64)
    ht = np.ceil(n_sigma * depos.sigma_t / spec.tick).astype(np.int64)
    nrows, ncols = spec.shape
    w0, w1 = np.maximum(cw - hw, 0), np.minimum(cw + hw, nrows - 1)
    t0, t1 = np.maximum(ct - ht, 0), np.minimum(ct + ht, ncols - 1)
    keep = (w0 <= w1) & (t0 <= t1)
    clipped = keep & ((w0 != cw - hw) | (w1 != cw + hw) | (t0 != ct - ht) | (t1 != ct + ht))
    n_w = (w1 - w0 + 1)[keep]
    n_t = (t1 - t0 + 1)[keep]
    start = np.zeros(n_w.shape[0] + 1, dtype=np.int64)
    np.cumsum(n_w * n_t, out=start[1:])
    return PatchPlan(keep, w0[keep], t0[keep], n_w, n_t, start, int(clipped.sum()),
                     int(depos.q[~keep].sum()))


def sample_planned(depos: DepoArrays, plan: PatchPlan, spec: GridSpec) -> np.ndarray:
    """Flat probability buffer for the kept depos of ``plan``."""
    kept = depos.take(plan.keep)
    probs = np.empty(plan.start[-1], dtype=np.float64)
    _sample_batch(kept.t, kept.x, kept.sigma_t, kept.sigma_x, plan.wire_lo, plan.tick_lo,
                  plan.n_w, plan.n_t, plan.start, *_spec_args(spec), probs)
    return probs


def _rng_args(rng_mode: str, rng_source, ids: np.ndarray):
    """Kernel arguments ``(mode, seed, state, uniforms, normals, slice_len, first_id)``."""
    state = np.ones(4, dtype=np.uint64)
    uniforms = normals = np.empty(0, dtype=np.float64)
    seed = np.uint64(0)
    slice_len, first_id = 1, 0
    if rng_mode == "inline":
        state = rng_source.s
    elif rng_mode == "substream":
        seed = _rng._as_u64(rng_source)
    elif rng_mode == "pool":
        if len(ids) and (ids.min() < rng_source.first_id
                         or ids.max() >= rng_source.first_id + rng_source.n_depos):
            raise IndexError("depo ids fall outside the pool")
        uniforms = rng_source.uniforms
        if rng_source.normals is not None:
            normals = rng_source.normals
        slice_len, first_id = rng_source.slice_len, rng_source.first_id
    else:
        raise ConfigError(f"unknown rng mode {rng_mode!r}")
    return _MODE_CODE[rng_mode], seed, state, uniforms, normals, slice_len, first_id


def _exhausted(depo_id, slice_len, n_bins):
    return _rng.PoolExhaustedError(
        f"depo {int(depo_id)}: pool slice of {slice_len} draws cannot fluctuate a {int(n_bins)}-bin patch")


def fluctuate_planned(probs: np.ndarray, depos: DepoArrays, plan: PatchPlan, rng_mode: str,
                      rng_source) -> np.ndarray:
    """Flat integer counts for the kept depos of ``plan``."""
    kept = depos.take(plan.keep)
    counts = np.empty(probs.shape[0], dtype=np.int64)
    args = _rng_args(rng_mode, rng_source, kept.id)
    bad = _fluctuate_batch(probs, plan.start, kept.q, kept.id, *args, counts)
    if bad >= 0:
        raise _exhausted(kept.id[bad], args[5], plan.start[bad + 1] - plan.start[bad])
    return counts


class SlotRasterizer:
    """Rasterizes single kept depos of a plan into preallocated flat buffers.

    Used for per-depo dispatch: each call touches only its own slice of
    ``probs`` / ``counts``, so calls may run on any thread in any order
    (except in the inline mode, where the shared generator fixes the order).
    """

    def __init__(self, depos: DepoArrays, plan: PatchPlan, spec: GridSpec, rng_mode: str, rng_source):
        self.kept = depos.take(plan.keep)
        self.plan = plan
        self.spec_args = _spec_args(spec)
        self.rng_args = _rng_args(rng_mode, rng_source, self.kept.id)
        self.probs = np.empty(plan.start[-1], dtype=np.float64)
        self.counts = np.empty(plan.start[-1], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.kept)

    def __call__(self, j: int, timer=None) -> None:
        k, p = self.kept, self.plan
        sl = slice(p.start[j], p.start[j + 1])
        with _stage(timer, "sampling_2d"):
            _sample_one(k.t[j], k.x[j], k.sigma_t[j], k.sigma_x[j], p.wire_lo[j], p.tick_lo[j],
                        p.n_w[j], p.n_t[j], *self.spec_args, True, self.probs[sl])
        with _stage(timer, "fluctuation"):
            local = np.array([0, sl.stop - sl.start], dtype=np.int64)
            bad = _fluctuate_batch(self.probs[sl], local, k.q[j:j + 1], k.id[j:j + 1],
                                   *self.rng_args, self.counts[sl])
        if bad >= 0:
            raise _exhausted(k.id[j], self.rng_args[5], local[1])

    def batch(self) -> PatchBatch:
        p = self.plan
        return PatchBatch(p.wire_lo, p.tick_lo, p.n_w, p.n_t, p.start, self.counts, self.kept.id,
                          PatchKind.COUNT)


def rasterize_batch(depos: DepoArrays, spec: GridSpec, n_sigma: float, rng_mode: str, rng_source,
                    timer=None) -> tuple[PatchBatch, PatchPlan]:
    """Batched rasterization: one sampling pass, then one fluctuation pass."""
    plan = plan_patches(depos, spec, n_sigma)
    with _stage(timer, "sampling_2d"):
        probs = sample_planned(depos, plan, spec)
    with _stage(timer, "fluctuation"):
        counts = fluctuate_planned(probs, depos, plan, rng_mode, rng_source)
    batch = PatchBatch(plan.wire_lo, plan.tick_lo, plan.n_w, plan.n_t, plan.start, counts,
                       depos.id[plan.keep], PatchKind.COUNT)
    return batch, plan


class StageTimer:
    """Accumulates wall time per named stage; one instance per thread."""

    def __init__(self):
        self.totals: dict[str, float] = {}

    def stage(self, name):
        return _StageContext(self, name)

    def add(self, name, seconds):
        self.totals[name] = self.totals.get(name, 0.0) + seconds

    def merge(self, other: "StageTimer"):
        for k, v in other.totals.items():
            self.add(k, v)
        return self


class _StageContext:
    __slots__ = ("timer", "name", "t0")

    def __init__(self, timer, name):
        self.timer = timer
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.timer.add(self.name, time.perf_counter() - self.t0)
