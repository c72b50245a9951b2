from .bench import Variant, bench
from .config import DISPATCH_MODES, AdcParams, RngConfig, SimConfig
from .io import (
    DepoFormatError,
    GridFormatError,
    gen_depos,
    load_depos,
    read_grid,
    write_depos,
    write_grid,
)
from .simulate import SimulationResult, TimingReport, run_simulation

__all__ = [
    "AdcParams", "DISPATCH_MODES", "DepoFormatError", "GridFormatError", "RngConfig", "SimConfig",
    "SimulationResult", "TimingReport", "Variant", "bench", "gen_depos", "load_depos", "read_grid",
    "run_simulation", "write_depos", "write_grid",
]
