"""Depo CSV files and the WCG1 binary grid format.

Grid file layout (little-endian)::

    magic   4 bytes  b"WCG1"
    dtype   u8       0 = int64, 1 = float64, 2 = complex128 (re, im interleaved)
    pad     3 bytes  zero
    n_rows  u64
    n_cols  u64
    payload n_rows * n_cols values, row-major
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from ..core import ChargeGrid, Depo, GridSpec, MeasurementGrid, TpcSimError

DEPO_COLUMNS = ("id", "t_us", "x_mm", "q", "sigma_t_us", "sigma_x_mm")
DRIFT_COLUMN = "drift_x_mm"

MAGIC = b"WCG1"
_HEADER = struct.Struct("<4sB3xQQ")
_DTYPES = {0: np.dtype("<i8"), 1: np.dtype("<f8"), 2: np.dtype("<c16")}


class DepoFormatError(TpcSimError, ValueError):
    pass


class GridFormatError(TpcSimError, ValueError):
    pass


def load_depos(path) -> list[Depo]:
    """Read a depo CSV; ids must equal the 0-based row index."""
    path = Path(path)
    depos = []
    seen = set()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DepoFormatError(f"{path}: empty file, expected header {','.join(DEPO_COLUMNS)}")
        header = [h.strip() for h in header]
        if tuple(header) == DEPO_COLUMNS:
            with_drift = False
        elif tuple(header) == DEPO_COLUMNS + (DRIFT_COLUMN,):
            with_drift = True
        else:
            raise DepoFormatError(f"{path}:1: bad header {header}, expected {','.join(DEPO_COLUMNS)}"
                                  f"[,{DRIFT_COLUMN}]")
        ncol = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != ncol:
                raise DepoFormatError(f"{path}:{lineno}: expected {ncol} fields, got {len(row)}")
            try:
                did = int(row[0])
                t, x = float(row[1]), float(row[2])
                q = int(row[3])
                st, sx = float(row[4]), float(row[5])
                dx = float(row[6]) if with_drift and row[6].strip() else None
            except ValueError as exc:
                raise DepoFormatError(f"{path}:{lineno}: {exc}") from None
            if did in seen:
                raise DepoFormatError(f"{path}:{lineno}: duplicate depo id {did}")
            if did != len(depos):
                raise DepoFormatError(f"{path}:{lineno}: depo id {did} must equal its row index {len(depos)}")
            if q < 0:
                raise DepoFormatError(f"{path}:{lineno}: negative charge q={q}")
            if st < 0 or sx < 0:
                raise DepoFormatError(f"{path}:{lineno}: negative width")
            if not all(np.isfinite(v) for v in (t, x, st, sx)):
                raise DepoFormatError(f"{path}:{lineno}: non-finite value")
            seen.add(did)
            depos.append(Depo(t, x, q, st, sx, did, dx))
    return depos


def write_depos(depos, path) -> None:
    depos = list(depos)
    with_drift = any(d.drift_x is not None for d in depos)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DEPO_COLUMNS + ((DRIFT_COLUMN,) if with_drift else ()))
        for d in depos:
            row = [d.id, repr(float(d.t)), repr(float(d.x)), int(d.q), repr(float(d.sigma_t)), repr(float(d.sigma_x))]
            if with_drift:
                row.append("" if d.drift_x is None else repr(float(d.drift_x)))
            w.writerow(row)


def gen_depos(n: int, seed: int, spec: GridSpec | None = None, q_range=(1000, 10000),
              sigma_ranges=((1.0, 3.3), (5.0, 16.5)), path=None, drift_range=None) -> list[Depo]:
    """Synthetic depos spread uniformly over the unpadded grid region.

    ``sigma_ranges`` is ``((sigma_t_lo, sigma_t_hi), (sigma_x_lo, sigma_x_hi))``.
    ``drift_range`` optionally places depos along the drift axis so the
    pipeline drifts them.  Writes the CSV when ``path`` is given.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    spec = spec or GridSpec()
    g = np.random.default_rng(seed)
    t = g.uniform(spec.origin_t, spec.origin_t + spec.n_ticks * spec.tick, n)
    x = g.uniform(spec.origin_x, spec.origin_x + spec.n_wires * spec.pitch, n)
    q = g.integers(q_range[0], q_range[1], n, endpoint=True)
    st = g.uniform(*sigma_ranges[0], n)
    sx = g.uniform(*sigma_ranges[1], n)
    dx = g.uniform(*drift_range, n) if drift_range is not None else None
    depos = [Depo(float(t[i]), float(x[i]), int(q[i]), float(st[i]), float(sx[i]), i,
                  None if dx is None else float(dx[i])) for i in range(n)]
    if path is not None:
        write_depos(depos, path)
    return depos


def _grid_array(grid) -> np.ndarray:
    if isinstance(grid, ChargeGrid):
        return grid.counts
    if isinstance(grid, MeasurementGrid):
        return grid.samples
    values = getattr(grid, "values", None)
    if isinstance(values, np.ndarray):
        return values
    return np.asarray(grid)


def write_grid(grid, path) -> None:
    a = _grid_array(grid)
    if a.ndim != 2:
        raise GridFormatError(f"grid must be 2D, got shape {a.shape}")
    if np.iscomplexobj(a):
        code = 2
    elif np.issubdtype(a.dtype, np.floating):
        code = 1
    elif np.issubdtype(a.dtype, np.integer) or a.dtype == np.bool_:
        code = 0
    else:
        raise GridFormatError(f"unsupported dtype {a.dtype}")
    payload = np.ascontiguousarray(a, dtype=_DTYPES[code])
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, code, a.shape[0], a.shape[1]))
        fh.write(payload.tobytes())


def read_grid(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        if raw[:4] != MAGIC[:len(raw[:4])]:
            raise GridFormatError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
        raise GridFormatError(f"{path}: truncated header ({len(raw)} of {_HEADER.size} bytes)")
    magic, code, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise GridFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if code not in _DTYPES:
        raise GridFormatError(f"{path}: unknown dtype code {code}")
    dtype = _DTYPES[code]
    need = rows * cols * dtype.itemsize
    body = raw[_HEADER.size:]
    if len(body) < need:
        raise GridFormatError(f"{path}: truncated payload ({len(body)} of {need} bytes)")
    if len(body) > need:
        raise GridFormatError(f"{path}: {len(body) - need} trailing bytes after payload")
    return np.frombuffer(body, dtype=dtype).reshape(rows, cols).copy()
