import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import direct_dft, sort_median
from tpcsim.sigproc import (
    ImaginaryResidueWarning,
    SignalBatch,
    apply_filter,
    extract_block,
    idft_rows_to_real,
    process,
    row_median,
    row_medians,
)
from tpcsim.spectral import fft


def hermitian_batch(g, rows, cols):
    return fft(g.normal(size=(rows, cols)), axis=1)


def test_batch_validation():
    with pytest.raises(ValueError):
        SignalBatch(np.zeros((4, 3)), pad_rows=2, out_rows=3)
    with pytest.raises(ValueError):
        SignalBatch(np.zeros((4, 0)))
    b = SignalBatch(np.zeros((4, 3)), pad_rows=1)
    assert b.out_rows == 3 and b.n_rows == 4 and b.n_cols == 3


def test_apply_filter(nprng):
    data = nprng.normal(size=(5, 7)) + 1j * nprng.normal(size=(5, 7))
    filt = nprng.normal(size=7) + 1j * nprng.normal(size=7)
    b = SignalBatch(data)
    out = apply_filter(b, filt).data
    for r in range(5):
        for c in range(7):
            assert out[r, c] == data[r, c] * filt[c]
    assert np.array_equal(apply_filter(b, np.ones(7)).data, data)
    assert not apply_filter(b, np.zeros(7)).data.any()
    with pytest.raises(ValueError):
        apply_filter(b, np.ones(6))


def test_filter_composition(nprng):
    # dyadic values keep every product exact, so associativity holds bit for bit
    b = SignalBatch(nprng.integers(-64, 64, (3, 8)) / 8 + 1j * nprng.integers(-64, 64, (3, 8)) / 4)
    f1 = nprng.choice([0.0, 0.5, -1.0, 2.0, 0.25], 8)
    f2 = nprng.choice([1.0, -0.5, 4.0, 0.125], 8) + 1j * nprng.choice([0.0, 1.0, -2.0], 8)
    assert np.array_equal(apply_filter(apply_filter(b, f1), f2).data, apply_filter(b, f1 * f2).data)


def test_idft_roundtrip_and_zero(nprng):
    x = nprng.normal(size=(4, 50))
    assert np.abs(idft_rows_to_real(fft(x, axis=1)) - x).max() < 1e-12
    assert not idft_rows_to_real(np.zeros((3, 5), dtype=complex)).any()


def test_idft_matches_direct_rows(nprng):
    b = hermitian_batch(nprng, 6, 97)
    out = idft_rows_to_real(b)
    for r in (0, 3, 5):
        ref = direct_dft(b[r], inverse=True).real
        assert np.abs(out[r] - ref).max() <= 1e-12 * np.abs(ref).max()


def test_idft_linear(nprng):
    a, b = hermitian_batch(nprng, 3, 20), hermitian_batch(nprng, 3, 20)
    lhs = idft_rows_to_real(2 * a + 3 * b)
    assert np.allclose(lhs, 2 * idft_rows_to_real(a) + 3 * idft_rows_to_real(b), atol=1e-12)


def test_idft_warns_on_non_hermitian(nprng):
    with pytest.warns(ImaginaryResidueWarning):
        idft_rows_to_real(nprng.normal(size=(2, 8)) + 1j * nprng.normal(size=(2, 8)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        idft_rows_to_real(hermitian_batch(nprng, 2, 8))


def test_extract_block(nprng):
    m = nprng.normal(size=(10, 4))
    assert np.array_equal(extract_block(m, 0, 10), m)
    marked = np.zeros((10, 4))
    marked[:2] = marked[8:] = -1
    assert (extract_block(marked, 2, 6) == 0).all()
    for _ in range(20):
        s = int(nprng.integers(0, 10))
        n = int(nprng.integers(0, 10 - s + 1))
        blk = extract_block(m, s, n)
        assert blk.shape == (n, 4)
        for i in range(n):
            assert np.array_equal(blk[i], m[s + i])
    with pytest.raises(IndexError):
        extract_block(m, 8, 3)
    with pytest.raises(IndexError):
        extract_block(m, -1, 2)


def test_median_rules(nprng):
    assert row_median([3, 1, 2]) == 2
    assert row_median([1, 2, 3, 4]) == 2.5
    with pytest.raises(ValueError):
        row_median([])
    x = nprng.normal(size=10_000)
    assert row_median(x) == sort_median(x)
    m = nprng.normal(size=(7, 101))
    assert row_medians(m).tolist() == [sort_median(r) for r in m]
    m = nprng.normal(size=(7, 100))
    assert row_medians(m).tolist() == [sort_median(r) for r in m]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.randoms())
def test_median_permutation_invariant(values, r):
    perm = list(values)
    r.shuffle(perm)
    assert row_median(values) == row_median(perm) == sort_median(values)


def test_process_equals_composition(nprng):
    b = SignalBatch(hermitian_batch(nprng, 12, 30), pad_rows=2, out_rows=8)
    filt = np.ones(30)
    block, med = process(b, filt)
    ref = extract_block(idft_rows_to_real(apply_filter(b, filt)), 2, 8)
    assert np.array_equal(block, ref)
    assert np.array_equal(med, row_medians(ref))


def test_idft_full_size_batch_matches_direct_rows(nprng):
    b = hermitian_batch(nprng, 960, 6000)
    out = idft_rows_to_real(b)
    for r in (0, 517, 959):
        ref = direct_dft(b[r], inverse=True).real
        assert np.abs(out[r] - ref).max() <= 1e-9 * np.abs(ref).max()
