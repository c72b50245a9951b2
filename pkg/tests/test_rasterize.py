import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gaussian_bin_quad
from tpcsim import rng
from tpcsim.core import Depo, DepoArrays, GridSpec, Patch, PatchKind
from tpcsim.rasterize import (
    DriftError,
    DriftParams,
    SlotRasterizer,
    StageTimer,
    bin_integrated_patch,
    drift_arrays,
    drift_depo,
    fluctuate,
    plan_patches,
    rasterize_batch,
    rasterize_depo,
    sample_patch,
)

SPEC = GridSpec(n_wires=100, n_ticks=400, pad_wires=10, pad_ticks=50)


def test_drift_identity_without_drift_position():
    d = Depo(10.0, 20.0, 5, 1.0, 2.0, 3)
    assert drift_depo(d, DriftParams()) == d


def test_drift_diffusion():
    p = DriftParams(response_plane_x=0.0, drift_speed=2.0, D_L=0.01, D_T=0.02)
    d = drift_depo(Depo(10.0, 20.0, 5, 0.0, 0.0, 3, drift_x=100.0), p)
    dt = 50.0
    assert d.t == pytest.approx(60.0)
    assert d.sigma_t == pytest.approx(math.sqrt(2 * 0.01 * dt / 4.0))
    assert d.sigma_x == pytest.approx(math.sqrt(2 * 0.02 * dt))
    assert d.x == 20.0 and d.q == 5 and d.drift_x == 0.0


def test_drift_behind_plane():
    with pytest.raises(DriftError):
        drift_depo(Depo(0, 0, 1, drift_x=-1.0), DriftParams())


def test_drift_arrays_matches_scalar(nprng):
    depos = [Depo(float(nprng.uniform(0, 100)), float(nprng.uniform(0, 100)), 10, float(nprng.uniform(0, 2)),
                  float(nprng.uniform(0, 2)), i, None if i % 3 == 0 else float(nprng.uniform(0, 500)))
             for i in range(30)]
    p = DriftParams()
    vec = drift_arrays(DepoArrays.from_depos(depos), p).to_depos()
    for a, b in zip(vec, [drift_depo(d, p) for d in depos]):
        assert a.t == pytest.approx(b.t, abs=1e-12)
        assert a.sigma_t == pytest.approx(b.sigma_t, abs=1e-12)
        assert a.sigma_x == pytest.approx(b.sigma_x, abs=1e-12)


def test_point_depo_single_bin():
    p = sample_patch(Depo(t=12.3, x=7.7, q=1), SPEC)
    assert p.values.shape == (1, 1) and p.values[0, 0] == 1.0
    assert (p.wire_offset, p.tick_offset) == (11, 62)


def test_symmetric_depo_patch_is_symmetric():
    # centred in a bin, so the patch is symmetric about its middle
    d = Depo(t=100.5, x=52.5, q=1, sigma_t=2.0, sigma_x=5.0)
    p = sample_patch(d, SPEC).values
    assert np.allclose(p, p[::-1, :], atol=1e-15)
    assert np.allclose(p, p[:, ::-1], atol=1e-15)
    assert p.sum() == pytest.approx(1.0, abs=1e-14)


def test_transpose_symmetry():
    spec = GridSpec(n_wires=50, n_ticks=50, pad_wires=5, pad_ticks=5, pitch=1.0, tick=1.0)
    a = sample_patch(Depo(t=10.3, x=20.7, q=1, sigma_t=1.3, sigma_x=2.1), spec)
    b = sample_patch(Depo(t=20.7, x=10.3, q=1, sigma_t=2.1, sigma_x=1.3), spec)
    assert np.array_equal(a.values, b.values.T)


def test_bin_integrated_matches_quadrature(nprng):
    spec = GridSpec(n_wires=40, n_ticks=40, pad_wires=5, pad_ticks=5)
    for _ in range(3):
        d = Depo(t=float(nprng.uniform(10, 30)), x=float(nprng.uniform(50, 150)), q=1,
                 sigma_t=float(nprng.uniform(0.5, 2)), sigma_x=float(nprng.uniform(3, 8)))
        bounds, vals, _ = bin_integrated_patch(d, spec)
        for i in range(0, bounds.n_w, 2):
            for j in range(0, bounds.n_t, 2):
                w, t = bounds.wire_lo + i, bounds.tick_lo + j
                ref = gaussian_bin_quad(spec.wire_edge(w), spec.wire_edge(w + 1), spec.tick_edge(t),
                                        spec.tick_edge(t + 1), d.x, d.t, d.sigma_x, d.sigma_t)
                assert abs(vals[i, j] - ref) <= 1e-9


def test_edge_patch_is_clipped_and_renormalised():
    d = Depo(t=-48.0, x=10.0, q=1, sigma_t=3.0, sigma_x=5.0)
    p = sample_patch(d, SPEC)
    assert p.tick_offset == 0
    assert p.values.sum() == pytest.approx(1.0, abs=1e-13)
    assert sample_patch(Depo(t=-1000.0, x=10.0, q=1), SPEC) is None


def test_fluctuate_conserves_charge():
    probs = Patch(0, 0, np.array([[0.2, 0.3], [0.1, 0.4]]))
    s = rng.RngState.from_seed(1)
    for q in (0, 1, 7, 1000, 123456):
        out = fluctuate(probs, q, s)
        assert out.kind is PatchKind.COUNT and out.values.sum() == q and (out.values >= 0).all()


def test_fluctuate_zero_probability_bins_stay_empty():
    probs = Patch(0, 0, np.array([[0.0, 0.5, 0.0, 0.5, 0.0]]))
    out = fluctuate(probs, 1000, rng.RngState.from_seed(3))
    assert out.values[0, [0, 2, 4]].sum() == 0


def test_fluctuate_from_uniforms_and_exhaustion():
    probs = Patch(0, 0, np.full((1, 4), 0.25))
    a = fluctuate(probs, 50, rng.substream(9, 2))
    b = fluctuate(probs, 50, rng.build_pool(9, 3, 8).uniform_slice(2))
    assert np.array_equal(a.values, b.values)
    with pytest.raises(rng.PoolExhaustedError):
        fluctuate(probs, 50, np.full(2, 0.5))


def test_fluctuate_two_bin_mean():
    s = rng.RngState.from_seed(5)
    probs = Patch(0, 0, np.array([[0.3, 0.7]]))
    k0 = np.array([fluctuate(probs, 1000, s).values[0, 0] for _ in range(5000)])
    se = math.sqrt(1000 * 0.3 * 0.7 / k0.size)
    assert abs(k0.mean() - 300) < 4 * se


@pytest.mark.parametrize("mode", ["inline", "pool", "substream"])
def test_rasterize_depo_modes(mode):
    d = Depo(t=100.0, x=200.0, q=5000, sigma_t=2.0, sigma_x=8.0, id=3)
    src = {"inline": rng.RngState.from_seed(1), "pool": rng.build_pool(1, 4, 1024), "substream": 1}[mode]
    timer = StageTimer()
    p = rasterize_depo(d, SPEC, 3.0, mode, src, timer)
    assert p.values.sum() == 5000
    assert set(timer.totals) == {"sampling_2d", "fluctuation"}


def test_pool_and_substream_agree(nprng):
    depos = _random_depos(nprng, 300)
    pool = rng.build_pool(4, 300, 1024)
    a, _ = rasterize_batch(depos, SPEC, 3.0, "pool", pool)
    b, _ = rasterize_batch(depos, SPEC, 3.0, "substream", 4)
    assert np.array_equal(a.values, b.values)


def test_batch_matches_per_depo(nprng):
    depos = _random_depos(nprng, 200)
    batch, plan = rasterize_batch(depos, SPEC, 3.0, "substream", 8)
    singles = [rasterize_depo(d, SPEC, 3.0, "substream", 8) for d in depos.to_depos()]
    singles = [p for p in singles if p is not None]
    assert len(singles) == len(batch)
    for i, p in enumerate(singles):
        q = batch.patch(i)
        assert (q.wire_offset, q.tick_offset) == (p.wire_offset, p.tick_offset)
        assert np.array_equal(q.values, p.values)


def test_slot_rasterizer_matches_batch(nprng):
    depos = _random_depos(nprng, 100)
    batch, plan = rasterize_batch(depos, SPEC, 3.0, "substream", 2)
    slots = SlotRasterizer(depos, plan, SPEC, "substream", 2)
    for j in reversed(range(len(slots))):
        slots(j)
    assert np.array_equal(slots.batch().values, batch.values)


def test_plan_counts_dropped_and_clipped():
    depos = DepoArrays.from_depos([
        Depo(100.0, 200.0, 10, 1.0, 5.0, 0),
        Depo(-5000.0, 200.0, 20, 1.0, 5.0, 1),     # misses the grid
        Depo(-49.5, 200.0, 30, 2.0, 5.0, 2),      # cut by the lower tick edge
    ])
    plan = plan_patches(depos, SPEC)
    assert plan.keep.tolist() == [True, False, True]
    assert plan.dropped_charge == 20 and plan.n_clipped == 1
    batch, _ = rasterize_batch(depos, SPEC, 3.0, "substream", 0)
    assert batch.total() == 40


def test_pool_exhaustion_in_batch():
    depos = DepoArrays.from_depos([Depo(100.0, 200.0, 10, 3.0, 15.0, 0)])
    with pytest.raises(rng.PoolExhaustedError):
        rasterize_batch(depos, SPEC, 3.0, "pool", rng.build_pool(0, 1, 4))


@settings(max_examples=60, deadline=None)
@given(st.floats(-60, 460), st.floats(-60, 560), st.integers(0, 20000), st.floats(0, 4), st.floats(0, 20),
       st.integers(0, 2**32))
def test_conservation_property(t, x, q, sig_t, sig_x, seed):
    d = Depo(t, x, q, sig_t, sig_x, 0)
    p = rasterize_depo(d, SPEC, 3.0, "substream", seed)
    if p is not None:
        assert p.values.sum() == q and (p.values >= 0).all()


def _random_depos(g, n):
    return DepoArrays.from_depos([
        Depo(float(g.uniform(-20, 420)), float(g.uniform(-20, 520)), int(g.integers(0, 10000)),
             float(g.uniform(0, 3.3)), float(g.uniform(0, 16.5)), i)
        for i in range(n)])
