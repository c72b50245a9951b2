"""Domain types, grid geometry and the depo to grid coordinate bridge.

Units are fixed throughout the package: time in microseconds, length in
millimetres, charge in electrons.  Grids are laid out row = wire,
column = tick, row-major, with ``pad_wires`` / ``pad_ticks`` guard bins on
both sides of the physical region.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class TpcSimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TpcSimError, ValueError):
    pass


class BoundsError(TpcSimError, IndexError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n_wires: int = 1000
    n_ticks: int = 6000
    pad_wires: int = 100
    pad_ticks: int = 100
    pitch: float = 5.0      # mm / wire
    tick: float = 1.0       # us / tick
    origin_x: float = 0.0   # mm, lower edge of wire 0
    origin_t: float = 0.0   # us, lower edge of tick 0

    def __post_init__(self):
        if self.n_wires < 1 or self.n_ticks < 1:
            raise ConfigError(f"grid needs at least one wire and tick, got {self.n_wires}x{self.n_ticks}")
        if self.pad_wires < 0 or self.pad_ticks < 0:
            raise ConfigError("padding must be non-negative")
        if not (self.pitch > 0 and self.tick > 0):
            raise ConfigError("pitch and tick must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        """Padded (rows, cols) = (wires, ticks) of the allocated grid."""
        return (self.n_wires + 2 * self.pad_wires, self.n_ticks + 2 * self.pad_ticks)

    def wire_index(self, x: float) -> int:
        return self.pad_wires + math.floor((x - self.origin_x) / self.pitch)

    def tick_index(self, t: float) -> int:
        return self.pad_ticks + math.floor((t - self.origin_t) / self.tick)

    def wire_edge(self, index):
        """Lower edge (mm) of padded wire bin ``index``; works on arrays."""
        return self.origin_x + (index - self.pad_wires) * self.pitch

    def tick_edge(self, index):
        return self.origin_t + (index - self.pad_ticks) * self.tick

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class Depo:
    """One energy deposition.

    ``x`` is the transverse (wire-pitch) coordinate.  ``drift_x`` is the
    optional position along the drift axis; ``None`` means the depo already
    sits on the response plane and drifting leaves it unchanged.
    """

    t: float
    x: float
    q: int
    sigma_t: float = 0.0
    sigma_x: float = 0.0
    id: int = 0
    drift_x: float | None = None

    def __post_init__(self):
        if self.q < 0:
            raise ValueError(f"depo {self.id}: negative charge {self.q}")
        if self.sigma_t < 0 or self.sigma_x < 0:
            raise ValueError(f"depo {self.id}: negative width")


class PatchKind(enum.Enum):
    PROBABILITY = "probability"
    COUNT = "count"


@dataclass
class Patch:
    wire_offset: int
    tick_offset: int
    values: np.ndarray
    kind: PatchKind = PatchKind.PROBABILITY

    @property
    def n_w(self) -> int:
        return self.values.shape[0]

    @property
    def n_t(self) -> int:
        return self.values.shape[1]

    def validate(self) -> None:
        if self.values.ndim != 2 or self.n_w < 1 or self.n_t < 1:
            raise ValueError(f"patch must be a non-empty 2D block, got shape {self.values.shape}")
        if self.kind is PatchKind.PROBABILITY:
            if np.any(self.values < 0) or abs(self.values.sum() - 1.0) > 1e-12:
                raise ValueError("probability patch must be non-negative and sum to 1")
        else:
            if not np.issubdtype(self.values.dtype, np.integer) or np.any(self.values < 0):
                raise ValueError("count patch must hold non-negative integers")


@dataclass
class ChargeGrid:
    spec: GridSpec
    counts: np.ndarray

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ChargeGrid":
        return cls(spec, np.zeros(spec.shape, dtype=np.int64))

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class MeasurementGrid:
    spec: GridSpec
    samples: np.ndarray


class PatchBounds(NamedTuple):
    """Inclusive index rectangle in padded-grid coordinates."""

    wire_lo: int
    wire_hi: int
    tick_lo: int
    tick_hi: int

    @property
    def n_w(self) -> int:
        return self.wire_hi - self.wire_lo + 1

    @property
    def n_t(self) -> int:
        return self.tick_hi - self.tick_lo + 1

    def clip(self, spec: GridSpec) -> "PatchBounds | None":
        """Intersect with the padded grid; ``None`` when nothing is left."""
        nw, nt = spec.shape
        b = PatchBounds(max(self.wire_lo, 0), min(self.wire_hi, nw - 1),
                        max(self.tick_lo, 0), min(self.tick_hi, nt - 1))
        if b.wire_lo > b.wire_hi or b.tick_lo > b.tick_hi:
            return None
        return b


def half_extent(sigma: float, spacing: float, n_sigma: float) -> int:
    return math.ceil(n_sigma * sigma / spacing)


def map_depo_to_grid(depo: Depo, spec: GridSpec, n_sigma: float = 3.0) -> tuple[int, int, PatchBounds]:
    """Locate a depo on the padded grid.

    Returns the containing (wire, tick) bin and the inclusive bounds that
    cover ``n_sigma`` widths on each side.  Bounds are not clipped.
    """
    if not n_sigma > 0:
        raise ValueError("n_sigma must be positive")
    cw = spec.wire_index(depo.x)
    ct = spec.tick_index(depo.t)
    hw = half_extent(depo.sigma_x, spec.pitch, n_sigma)
    ht = half_extent(depo.sigma_t, spec.tick, n_sigma)
    return cw, ct, PatchBounds(cw - hw, cw + hw, ct - ht, ct + ht)


@dataclass
class DepoArrays:
    """Column view of a depo set, the form the compiled kernels consume."""

    t: np.ndarray
    x: np.ndarray
    q: np.ndarray
    sigma_t: np.ndarray
    sigma_x: np.ndarray
    id: np.ndarray
    drift_x: np.ndarray  # NaN where the depo is already on the plane

    @classmethod
    def from_depos(cls, depos) -> "DepoArrays":
        depos = list(depos)
        return cls(
            t=np.array([d.t for d in depos], dtype=np.float64),
            x=np.array([d.x for d in depos], dtype=np.float64),
            q=np.array([d.q for d in depos], dtype=np.int64),
            sigma_t=np.array([d.sigma_t for d in depos], dtype=np.float64),
            sigma_x=np.array([d.sigma_x for d in depos], dtype=np.float64),
            id=np.array([d.id for d in depos], dtype=np.int64),
            drift_x=np.array([np.nan if d.drift_x is None else d.drift_x for d in depos], dtype=np.float64),
        )

    def __len__(self) -> int:
        return self.t.shape[0]

    def take(self, index) -> "DepoArrays":
        return DepoArrays(*(getattr(self, f)[index] for f in self.__dataclass_fields__))

    def to_depos(self) -> list[Depo]:
        return [
            Depo(float(self.t[i]), float(self.x[i]), int(self.q[i]), float(self.sigma_t[i]),
                 float(self.sigma_x[i]), int(self.id[i]),
                 None if np.isnan(self.drift_x[i]) else float(self.drift_x[i]))
            for i in range(len(self))
        ]


@dataclass
class PatchBatch:
    """Many patches packed into flat buffers.

    Patch ``i`` occupies ``values[start[i]:start[i + 1]]`` in row-major
    ``(n_w[i], n_t[i])`` order, anchored at ``(wire_lo[i], tick_lo[i])``.
    """

    wire_lo: np.ndarray
    tick_lo: np.ndarray
    n_w: np.ndarray
    n_t: np.ndarray
    start: np.ndarray
    values: np.ndarray
    depo_id: np.ndarray
    kind: PatchKind = PatchKind.COUNT

    def __len__(self) -> int:
        return self.wire_lo.shape[0]

    def patch(self, i: int) -> Patch:
        a, b = self.start[i], self.start[i + 1]
        vals = self.values[a:b].reshape(int(self.n_w[i]), int(self.n_t[i]))
        return Patch(int(self.wire_lo[i]), int(self.tick_lo[i]), vals, self.kind)

    def __iter__(self):
        return (self.patch(i) for i in range(len(self)))

    def total(self):
        return self.values.sum()

    @classmethod
    def from_patches(cls, patches, depo_ids=None) -> "PatchBatch":
        patches = list(patches)
        if not patches:
            return cls.empty()
        n_w = np.array([p.n_w for p in patches], dtype=np.int64)
        n_t = np.array([p.n_t for p in patches], dtype=np.int64)
        start = np.zeros(len(patches) + 1, dtype=np.int64)
        np.cumsum(n_w * n_t, out=start[1:])
        kind = patches[0].kind
        dtype = np.int64 if kind is PatchKind.COUNT else np.float64
        values = np.concatenate([np.asarray(p.values, dtype=dtype).ravel() for p in patches])
        ids = np.arange(len(patches)) if depo_ids is None else np.asarray(depo_ids)
        return cls(np.array([p.wire_offset for p in patches], dtype=np.int64),
                   np.array([p.tick_offset for p in patches], dtype=np.int64),
                   n_w, n_t, start, values, ids.astype(np.int64), kind)

    @classmethod
    def empty(cls) -> "PatchBatch":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, np.zeros(1, dtype=np.int64), z.copy(), z)

    @classmethod
    def concatenate(cls, batches) -> "PatchBatch":
        batches = [b for b in batches if len(b)]
        if not batches:
            return cls.empty()
        offsets = np.cumsum([0] + [b.start[-1] for b in batches[:-1]])
        start = np.concatenate([np.array([0])] + [b.start[1:] + o for b, o in zip(batches, offsets)])
        cat = lambda f: np.concatenate([getattr(b, f) for b in batches])
        return cls(cat("wire_lo"), cat("tick_lo"), cat("n_w"), cat("n_t"), start,
                   cat("values"), cat("depo_id"), batches[0].kind)
