"""Accumulate integer patches onto the charge grid.

Counts are int64, so accumulation is associative and the parallel
strategies reproduce the serial grid bit for bit regardless of worker
count or scheduling.
"""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from .core import BoundsError, ChargeGrid, GridSpec, Patch, PatchBatch, PatchKind

STRATEGIES = ("bands", "private")


def _check_patch(grid: ChargeGrid, patch: Patch):
    nw, nt = grid.counts.shape
    if (patch.wire_offset < 0 or patch.tick_offset < 0
            or patch.wire_offset + patch.n_w > nw or patch.tick_offset + patch.n_t > nt):
        raise BoundsError(
            f"patch at ({patch.wire_offset}, {patch.tick_offset}) size {patch.n_w}x{patch.n_t} "
            f"exceeds grid {nw}x{nt}")


def scatter_add(grid: ChargeGrid, patch: Patch) -> ChargeGrid:
    """Add one count patch into ``grid`` in place and return the grid."""
    if patch.kind is not PatchKind.COUNT:
        raise TypeError("only count patches can be scattered")
    _check_patch(grid, patch)
    w, t = patch.wire_offset, patch.tick_offset
    grid.counts[w:w + patch.n_w, t:t + patch.n_t] += patch.values
    return grid


@nb.njit(cache=True, nogil=True)
def _scatter_rows(counts, wire_lo, tick_lo, n_w, n_t, start, values, row_lo, row_hi, first, last):
    """Add patches [first, last) restricted to grid rows [row_lo, row_hi)."""
    for i in range(first, last):
        w0 = wire_lo[i]
        nt = n_t[i]
        t0 = tick_lo[i]
        base = start[i]
        a = max(w0, row_lo)
        b = min(w0 + n_w[i], row_hi)
        for w in range(a, b):
            off = base + (w - w0) * nt
            for j in range(nt):
                counts[w, t0 + j] += values[off + j]


@nb.njit(cache=True, nogil=True)
def _batch_in_bounds(nrows, ncols, wire_lo, tick_lo, n_w, n_t):
    for i in range(wire_lo.shape[0]):
        if (wire_lo[i] < 0 or tick_lo[i] < 0
                or wire_lo[i] + n_w[i] > nrows or tick_lo[i] + n_t[i] > ncols):
            return i
    return -1


def _as_batch(patches) -> PatchBatch:
    if isinstance(patches, PatchBatch):
        batch = patches
    else:
        batch = PatchBatch.from_patches(patches)
    if batch.kind is not PatchKind.COUNT:
        raise TypeError("only count patches can be scattered")
    return batch


def _batch_args(batch: PatchBatch):
    return (batch.wire_lo, batch.tick_lo, batch.n_w, batch.n_t, batch.start,
            batch.values.astype(np.int64, copy=False))


def scatter_add_batch(grid: ChargeGrid, patches) -> ChargeGrid:
    """Serial scatter of many patches."""
    batch = _as_batch(patches)
    if len(batch) == 0:
        return grid
    _validate(grid, batch)
    nrows = grid.counts.shape[0]
    _scatter_rows(grid.counts, *_batch_args(batch), 0, nrows, 0, len(batch))
    return grid


def _validate(grid, batch):
    bad = _batch_in_bounds(*grid.counts.shape, batch.wire_lo, batch.tick_lo, batch.n_w, batch.n_t)
    if bad >= 0:
        raise BoundsError(f"patch {bad} (depo {int(batch.depo_id[bad])}) exceeds grid {grid.counts.shape}")


def band_edges(n_rows: int, n_bands: int) -> np.ndarray:
    """Split ``n_rows`` into ``n_bands`` contiguous, near-equal row ranges."""
    return np.linspace(0, n_rows, n_bands + 1).round().astype(np.int64)


def scatter_add_parallel(grid: ChargeGrid, patches, n_workers: int, strategy: str = "bands",
                         executor: ThreadPoolExecutor | None = None) -> ChargeGrid:
    """Scatter with ``n_workers`` threads; the result equals the serial scatter.

    ``"bands"`` gives each worker exclusive ownership of a band of wires;
    a patch that straddles a band edge is split between the owners.
    ``"private"`` gives each worker a private grid for a share of the
    patches and sums the grids at the end.
    """
    if n_workers < 1:
        raise ValueError("n_workers must be >= 1")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
    batch = _as_batch(patches)
    if len(batch) == 0:
        return grid
    _validate(grid, batch)
    if n_workers == 1:
        return scatter_add_batch(grid, batch)
    args = _batch_args(batch)
    counts = grid.counts
    own = executor is None
    ex = executor or ThreadPoolExecutor(n_workers)
    try:
        if strategy == "bands":
            edges = band_edges(counts.shape[0], n_workers)
            futs = [ex.submit(_scatter_rows, counts, *args, edges[k], edges[k + 1], 0, len(batch))
                    for k in range(n_workers)]
            for f in futs:
                f.result()
        else:
            cuts = band_edges(len(batch), n_workers)

            def work(k):
                private = np.zeros_like(counts)
                _scatter_rows(private, *args, 0, counts.shape[0], cuts[k], cuts[k + 1])
                return private

            for private in ex.map(work, range(n_workers)):
                counts += private
    finally:
        if own:
            ex.shutdown()
    return grid


@dataclass
class ScalingRow:
    workers: int
    time_s: float
    speedup: float


def scatter_scaling_report(patches, worker_counts, grid_shape, strategy: str = "bands",
                           repeats: int = 1, verify: bool = True) -> list[ScalingRow]:
    """Time the parallel scatter at each worker count.

    Speedups are relative to the single-worker run (measured even when 1
    is not in ``worker_counts``).  With ``verify`` every grid is compared
    bitwise with the serial grid and a mismatch raises ``AssertionError``.
    """
    batch = _as_batch(patches)
    spec = GridSpec(n_wires=grid_shape[0], n_ticks=grid_shape[1], pad_wires=0, pad_ticks=0)

    def run(workers):
        best = None
        grid = None
        for _ in range(repeats):
            grid = ChargeGrid.zeros(spec)
            t0 = time.perf_counter()
            scatter_add_parallel(grid, batch, workers, strategy)
            dt = time.perf_counter() - t0
            best = dt if best is None else min(best, dt)
        return best, grid

    # warm the compiled kernel so the first row is not charged for it
    scatter_add_batch(ChargeGrid.zeros(spec), batch)
    serial_time, serial_grid = run(1)
    rows = []
    for w in worker_counts:
        dt, grid = (serial_time, serial_grid) if w == 1 else run(w)
        if verify and not np.array_equal(grid.counts, serial_grid.counts):
            raise AssertionError(f"scatter with {w} workers differs from serial")
        rows.append(ScalingRow(int(w), dt, serial_time / dt if dt > 0 else float("inf")))
    return rows


def scaling_csv(rows, fh=None) -> str:
    """Write ``workers,time_s,speedup`` rows; returns the text when ``fh`` is None."""
    buf = fh if fh is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["workers", "time_s", "speedup"])
    for r in rows:
        writer.writerow([r.workers, f"{r.time_s:.9g}", f"{r.speedup:.6g}"])
    return buf.getvalue() if fh is None else ""
