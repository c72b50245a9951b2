"""Command-line entry point: ``tpcsim <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core import DepoArrays, TpcSimError
from .pipeline import SimConfig, bench, gen_depos, load_depos, read_grid, run_simulation, write_grid
from .pipeline.config import DISPATCH_MODES
from .rasterize import RNG_MODES, rasterize_batch
from .scatter import STRATEGIES, scaling_csv, scatter_scaling_report

log = logging.getLogger("tpcsim")


def _config(path) -> SimConfig:
    return SimConfig.load(path) if path else SimConfig()


def cmd_simulate(args) -> int:
    cfg = _config(args.config).with_overrides(seed=args.seed, workers=args.workers,
                                              dispatch=args.dispatch, rng_mode=args.rng)
    depos = load_depos(args.depos)
    result = run_simulation(cfg, depos)
    write_grid(result.adc, args.out)
    if args.charge_out:
        write_grid(result.charge, args.charge_out)
    timing = result.timing.to_dict()
    if args.timing_out:
        Path(args.timing_out).write_text(json.dumps(timing, indent=2) + "\n")
    log.info("simulated %d depos in %.3f s", len(depos), timing["total_s"])
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args.config)
    depos = load_depos(args.depos)
    doc = bench(cfg, depos, args.variants, repeats=args.repeats)
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_sigproc(args) -> int:
    from .sigproc import SignalBatch, process

    data = read_grid(args.inp)
    filt = read_grid(args.filter)
    if filt.ndim == 2 and 1 in filt.shape:
        filt = filt.ravel()
    else:
        raise TpcSimError(f"filter must be a single row or column, got shape {filt.shape}")
    batch = SignalBatch(data, args.pad, args.rows)
    block, medians = process(batch, filt)
    write_grid(block, args.out)
    if args.medians:
        np.savetxt(args.medians, medians, fmt="%.17g")
    return 0


def cmd_gen_depos(args) -> int:
    cfg = _config(args.config)
    gen_depos(args.n, args.seed, cfg.grid, path=args.out)
    return 0


def cmd_gen_response(args) -> int:
    from .spectral import build_response

    cfg = _config(args.config)
    kernel = build_response(cfg.grid, cfg.response)
    write_grid(kernel.impulse() if args.time_domain else kernel.values, args.out)
    return 0


def cmd_scatter_scaling(args) -> int:
    cfg = _config(args.config)
    spec = cfg.grid
    depos = DepoArrays.from_depos(gen_depos(args.n, args.seed, spec))
    batch, _ = rasterize_batch(depos, spec, cfg.n_sigma, "substream", args.seed)
    rows = scatter_scaling_report(batch, args.workers, spec.shape, args.strategy, repeats=args.repeats)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            scaling_csv(rows, fh)
    else:
        sys.stdout.write(scaling_csv(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tpcsim", description="Wire-readout detector signal simulation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the full chain on a depo file")
    s.add_argument("--config")
    s.add_argument("--depos", required=True)
    s.add_argument("--out", required=True, help="ADC grid (binary grid file)")
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--dispatch", choices=DISPATCH_MODES)
    s.add_argument("--rng", choices=RNG_MODES)
    s.add_argument("--charge-out", help="also write the pre-convolution charge grid")
    s.add_argument("--timing-out", help="write the timing report as JSON")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="time rng / dispatch / worker variants")
    b.add_argument("--config")
    b.add_argument("--depos", required=True)
    b.add_argument("--variants", nargs="+", default=["inline:batched:1", "pool:batched:1"],
                   help="e.g. pool:per_depo:4, inline, 8")
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("sigproc", help="filter, inverse transform, block cut, medians")
    g.add_argument("--in", dest="inp", required=True, help="complex batch (binary grid file)")
    g.add_argument("--filter", required=True, help="1 x n_cols grid file")
    g.add_argument("--pad", type=int, default=0)
    g.add_argument("--rows", type=int)
    g.add_argument("--out", required=True)
    g.add_argument("--medians", help="text file, one median per output row")
    g.set_defaults(func=cmd_sigproc)

    d = sub.add_parser("gen-depos", help="write a synthetic depo CSV")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--config", help="grid placement comes from the config")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_gen_depos)

    r = sub.add_parser("gen-response", help="write the frequency-domain response kernel")
    r.add_argument("--config")
    r.add_argument("--out", required=True)
    r.add_argument("--time-domain", action="store_true", help="write the real impulse response instead")
    r.set_defaults(func=cmd_gen_response)

    c = sub.add_parser("scatter-scaling", help="CSV of scatter time against worker count")
    c.add_argument("--config")
    c.add_argument("--n", type=int, default=100_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--workers", type=int, nargs="+", default=[1, 2, 4, 8])
    c.add_argument("--strategy", choices=STRATEGIES, default="bands")
    c.add_argument("--repeats", type=int, default=3)
    c.add_argument("--out")
    c.set_defaults(func=cmd_scatter_scaling)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (TpcSimError, OSError, ValueError) as exc:
        print(f"tpcsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
