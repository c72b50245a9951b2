"""End-to-end simulation: drift, rasterize, scatter, convolve, noise, digitize."""
from __future__ import annotations

import dataclasses
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import rng as _rng
from ..core import ChargeGrid, DepoArrays, MeasurementGrid, PatchBatch
from ..rasterize import SlotRasterizer, StageTimer, drift_arrays, plan_patches, rasterize_batch
from ..scatter import scatter_add_parallel
from ..spectral import ResponseKernel, add_noise, build_response, convolve, digitize
from .config import SimConfig


@dataclass
class TimingReport:
    """Stage wall times in seconds.

    ``sampling_2d_s`` and ``fluctuation_s`` are summed over worker threads,
    so with several workers they can exceed ``rasterization_total_s``.
    ``pool_build_s`` is kept apart from the fluctuation stage.
    """

    rasterization_total_s: float = 0.0
    sampling_2d_s: float = 0.0
    fluctuation_s: float = 0.0
    scatter_add_s: float = 0.0
    ft_s: float = 0.0
    total_s: float = 0.0
    pool_build_s: float = 0.0
    rng_mode: str = ""
    dispatch: str = ""
    workers: int = 1
    clipped_patch_count: int = 0

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    @classmethod
    def numeric_fields(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls) if f.name.endswith("_s"))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SimulationResult:
    adc: np.ndarray
    timing: TimingReport
    charge: ChargeGrid
    measurement: MeasurementGrid
    input_charge: int
    dropped_charge: int   # charge of depos whose patch misses the padded grid


def _as_arrays(depos) -> DepoArrays:
    if isinstance(depos, DepoArrays):
        return depos
    return DepoArrays.from_depos(depos)


class _Timers:
    """One StageTimer per thread, merged on demand."""

    def __init__(self):
        self._local = threading.local()
        self._all: list[StageTimer] = []
        self._lock = threading.Lock()

    def get(self) -> StageTimer:
        t = getattr(self._local, "timer", None)
        if t is None:
            t = self._local.timer = StageTimer()
            with self._lock:
                self._all.append(t)
        return t

    def merged(self) -> StageTimer:
        out = StageTimer()
        for t in self._all:
            out.merge(t)
        return out


def _chunk_rng_source(cfg: SimConfig, chunk: DepoArrays, inline_state, report: TimingReport):
    mode = cfg.rng.mode
    if mode == "inline":
        return inline_state
    if mode == "substream":
        return cfg.rng.seed
    t0 = time.perf_counter()
    if len(chunk):
        lo, hi = int(chunk.id.min()), int(chunk.id.max())
    else:
        lo, hi = 0, -1
    pool = _rng.build_pool(cfg.rng.seed, hi - lo + 1, cfg.rng.slice_len, first_id=lo)
    report.pool_build_s += time.perf_counter() - t0
    return pool


def _rasterize_chunk(cfg, chunk, source, ex, timers):
    """Returns (PatchBatch, n_clipped, dropped_charge) for one chunk."""
    spec = cfg.grid
    if cfg.dispatch == "per_depo":
        plan = plan_patches(chunk, spec, cfg.n_sigma)
        slots = SlotRasterizer(chunk, plan, spec, cfg.rng.mode, source)

        def task(j):
            slots(j, timers.get())

        # one task per depo; list() surfaces the first exception
        list(ex.map(task, range(len(slots))))
        return slots.batch(), plan.n_clipped, plan.dropped_charge

    parts = np.array_split(np.arange(len(chunk)), cfg.workers)

    def part(idx):
        return rasterize_batch(chunk.take(idx), spec, cfg.n_sigma, cfg.rng.mode, source, timers.get())

    if cfg.workers == 1:
        results = [part(parts[0])]
    else:
        results = list(ex.map(part, parts))
    batch = PatchBatch.concatenate([b for b, _ in results])
    return batch, sum(p.n_clipped for _, p in results), sum(p.dropped_charge for _, p in results)


def run_simulation(config: SimConfig, depos, response: ResponseKernel | None = None) -> SimulationResult:
    """Run the full chain and return the ADC grid with its timing report.

    In the pool and substream rng modes the output depends only on the
    config, the seed and the depos, never on ``workers`` or ``dispatch``.
    """
    t_start = time.perf_counter()
    cfg = config
    spec = cfg.grid
    report = TimingReport(rng_mode=cfg.rng.mode, dispatch=cfg.dispatch, workers=cfg.workers)
    arrays = drift_arrays(_as_arrays(depos), cfg.drift)
    if response is None:
        response = build_response(spec, cfg.response)
    elif response.spec != spec:
        raise ValueError("response kernel was built for a different grid")

    grid = ChargeGrid.zeros(spec)
    timers = _Timers()
    inline_state = _rng.RngState.from_seed(cfg.rng.seed) if cfg.rng.mode == "inline" else None
    n_clipped = dropped = 0
    # per-depo dispatch always goes through the executor, even with one worker
    need_ex = cfg.workers > 1 or cfg.dispatch == "per_depo"
    ex = ThreadPoolExecutor(cfg.workers) if need_ex else None
    try:
        for lo in range(0, len(arrays), cfg.batch_size):
            chunk = arrays.take(slice(lo, lo + cfg.batch_size))
            source = _chunk_rng_source(cfg, chunk, inline_state, report)
            t0 = time.perf_counter()
            batch, nc, dc = _rasterize_chunk(cfg, chunk, source, ex, timers)
            report.rasterization_total_s += time.perf_counter() - t0
            n_clipped += nc
            dropped += dc
            del source
            t0 = time.perf_counter()
            scatter_add_parallel(grid, batch, cfg.workers, executor=ex)
            report.scatter_add_s += time.perf_counter() - t0
    finally:
        if ex is not None:
            ex.shutdown()

    stages = timers.merged().totals
    report.sampling_2d_s = stages.get("sampling_2d", 0.0)
    report.fluctuation_s = stages.get("fluctuation", 0.0)
    report.clipped_patch_count = n_clipped

    t0 = time.perf_counter()
    measured = convolve(grid, response)
    report.ft_s = time.perf_counter() - t0
    measured = add_noise(measured, cfg.noise, cfg.rng.seed)
    adc = digitize(measured, cfg.adc.scale, cfg.adc.offset, cfg.adc.bits)
    report.total_s = time.perf_counter() - t_start
    return SimulationResult(adc, report, grid, measured, int(arrays.q.sum()), dropped)
