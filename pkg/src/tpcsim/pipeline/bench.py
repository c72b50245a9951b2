"""Repeated timed runs over (rng mode, dispatch, workers) variants."""
from __future__ import annotations

import dataclasses
import statistics
from dataclasses import dataclass

from ..core import ConfigError, GridSpec
from ..rasterize import RNG_MODES
from ..spectral import NoiseModel, build_response
from .config import DISPATCH_MODES, SimConfig
from .simulate import TimingReport, run_simulation


@dataclass(frozen=True)
class Variant:
    rng_mode: str | None = None
    dispatch: str | None = None
    workers: int | None = None

    @classmethod
    def parse(cls, text: str) -> "Variant":
        """``"pool"``, ``"inline:batched"``, ``"4"``, ``"pool:per_depo:8"``; fields in any order."""
        kw = {}
        for tok in filter(None, text.replace("/", ":").split(":")):
            if tok in RNG_MODES:
                key, val = "rng_mode", tok
            elif tok in DISPATCH_MODES:
                key, val = "dispatch", tok
            elif tok.isdigit():
                key, val = "workers", int(tok)
            else:
                raise ConfigError(f"bad variant token {tok!r} in {text!r}")
            if key in kw:
                raise ConfigError(f"variant {text!r} sets {key} twice")
            kw[key] = val
        return cls(**kw)

    def apply(self, cfg: SimConfig) -> SimConfig:
        return cfg.with_overrides(rng_mode=self.rng_mode, dispatch=self.dispatch, workers=self.workers)


def _as_variant(v) -> Variant:
    if isinstance(v, Variant):
        return v
    if isinstance(v, int):
        return Variant(workers=v)
    return Variant.parse(str(v))


def _warm_up(cfg: SimConfig, support) -> None:
    """Compile every kernel on a small grid so no variant pays for it."""
    from .io import gen_depos

    tb, ta, wb, wa = support
    spec = GridSpec(n_wires=16, n_ticks=64, pad_wires=max(wb, wa, 4), pad_ticks=max(tb, ta, 16),
                    pitch=cfg.grid.pitch, tick=cfg.grid.tick)
    depos = gen_depos(4, 0, spec, sigma_ranges=((1.0, 2.0), (1.0, 5.0)))
    for mode in RNG_MODES:
        for dispatch in DISPATCH_MODES:
            small = dataclasses.replace(cfg, grid=spec, noise=NoiseModel("white", 1.0),
                                        workers=1, dispatch=dispatch,
                                        rng=dataclasses.replace(cfg.rng, mode=mode))
            run_simulation(small, depos)


def bench(config: SimConfig, depos, variants, repeats: int = 5, warm_up: bool = True) -> dict:
    """Time each variant ``repeats`` times.

    Returns a JSON-ready document; ``records`` holds one entry per variant
    whose keys are exactly the :class:`TimingReport` fields (stage times
    are means), and ``spread`` holds the matching sample standard
    deviations of the stage times.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    variants = [_as_variant(v) for v in variants]
    configs = [v.apply(config) for v in variants]   # validates before any work
    response = build_response(config.grid, config.response)
    if warm_up:
        _warm_up(config, response.support)
    records, spreads = [], []
    for cfg in configs:
        runs = [run_simulation(cfg, depos, response).timing for _ in range(repeats)]
        rec = runs[0].to_dict()
        spread = {}
        for name in TimingReport.numeric_fields():
            vals = [getattr(r, name) for r in runs]
            rec[name] = statistics.fmean(vals)
            spread[name] = statistics.stdev(vals) if len(vals) > 1 else 0.0
        records.append(rec)
        spreads.append(spread)
    return {
        "n_depos": len(depos),
        "repeats": repeats,
        "grid": config.grid.to_dict(),
        "fields": list(TimingReport.field_names()),
        "records": records,
        "spread": spreads,
    }
