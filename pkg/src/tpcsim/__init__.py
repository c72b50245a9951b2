"""Wire-readout detector signal simulation on the CPU."""
from .core import (
    BoundsError,
    ChargeGrid,
    ConfigError,
    Depo,
    DepoArrays,
    GridSpec,
    MeasurementGrid,
    Patch,
    PatchBatch,
    PatchBounds,
    PatchKind,
    TpcSimError,
    map_depo_to_grid,
)
from .pipeline import (
    SimConfig,
    TimingReport,
    bench,
    gen_depos,
    load_depos,
    read_grid,
    run_simulation,
    write_grid,
)
from .rasterize import DriftParams, drift_depo, fluctuate, rasterize_depo, sample_patch
from .rng import RandomPool, RngState, box_muller, build_pool, substream
from .scatter import scatter_add, scatter_add_parallel

__version__ = "0.1.0"
