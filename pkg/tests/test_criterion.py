import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chirp2d.criterion import (
    DegenerateBasis,
    NonlinearPair,
    basis,
    column_amplitudes,
    column_criterion,
    periodogram_cols,
    periodogram_rows,
    projection_residual,
    reduced_criterion_cols,
    reduced_criterion_rows,
    row_criterion,
)
from chirp2d.optimizer import GridPlan, coarse_grid_search
from oracles import dense

TRUE_COL = (1.5, 0.5)
TRUE_ROW = (2.5, 0.75)


def test_basis_limits():
    Z = basis(3, (1e-300, 1e-300))
    np.testing.assert_allclose(Z[:, 0], 1.0)
    np.testing.assert_allclose(Z[:, 1], 0.0, atol=1e-290)
    Z = basis(4, (math.pi / 2, 1e-300))
    np.testing.assert_allclose(Z, [[0, 1], [-1, 0], [0, -1], [1, 0]], atol=1e-15)


def test_basis_case1_row():
    Z = basis(25, TRUE_COL)
    # mpmath oracle: tests/oracles/scalar_values.py
    np.testing.assert_allclose(Z[1], [0.28366218546322626, -0.95892427466313847], atol=1e-15)
    assert np.all(np.abs(Z) <= 1.0)
    assert Z.shape == (25, 2)


def test_basis_too_short():
    with pytest.raises(ValueError):
        basis(1, TRUE_COL)


def test_projection_residual_cases(case1_25):
    Z = basis(25, TRUE_COL)
    assert projection_residual(np.zeros(25), Z) == 0.0
    y = Z @ np.array([0.7, -1.9])
    assert projection_residual(y, Z) <= 1e-10 * y @ y
    col = case1_25[:, 0]
    assert projection_residual(col, Z) <= 1e-8 * col @ col
    # against the dense projector on a generic vector
    v = np.random.default_rng(1).normal(size=25)
    P = dense.projector(Z)
    r = v - P @ v
    assert projection_residual(v, Z) == pytest.approx(r @ r, rel=1e-10)


def test_degenerate_basis():
    # rate = pi/2, freq = pi/2 makes the sine column vanish: t pi/2 + t^2 pi/2 = pi t(t+1)/2
    Z = basis(10, (math.pi / 2, math.pi / 2))
    with pytest.raises(DegenerateBasis):
        column_amplitudes(np.ones(10), Z)


def test_reduced_criterion_examples(case1_25):
    zero = np.zeros((25, 25))
    assert reduced_criterion_cols(zero, TRUE_COL) == 0.0
    assert reduced_criterion_rows(zero, TRUE_ROW) == 0.0
    assert reduced_criterion_cols(case1_25, TRUE_COL) < 1e-6
    assert reduced_criterion_rows(case1_25, TRUE_ROW) < 1e-6
    off = reduced_criterion_cols(case1_25, (1.6, 0.5))
    assert off > 0 and off > reduced_criterion_cols(case1_25, TRUE_COL)
    assert off == pytest.approx(dense.residual_cols(case1_25, 1.6, 0.5), rel=1e-10)


def test_transpose_duality(rng):
    Y = rng.normal(size=(11, 7))
    p = (0.9, 0.3)
    assert reduced_criterion_rows(Y, p) == pytest.approx(reduced_criterion_cols(Y.T, p), rel=1e-12)
    assert periodogram_rows(Y, p) == pytest.approx(periodogram_cols(Y.T, p), rel=1e-12)


def test_periodogram_examples(case1_25):
    assert periodogram_cols(np.zeros((25, 25)), TRUE_COL) == 0.0
    assert periodogram_rows(np.zeros((9, 9)), TRUE_ROW) == 0.0
    assert periodogram_cols(case1_25, TRUE_COL) > periodogram_cols(case1_25, (1.8, 0.7))


def test_rss_periodogram_relationship(case1_50):
    Y = case1_50
    M, N = Y.shape
    energy = float(np.sum(Y * Y)) / N
    gap = abs(reduced_criterion_cols(Y, TRUE_COL) / N - (energy - periodogram_cols(Y, TRUE_COL)))
    assert gap <= 0.02 * energy


def test_periodogram_rows_coarse_winner(case1_25):
    f = row_criterion(case1_25, "periodogram")
    plan = GridPlan.for_length(25)
    rep = coarse_grid_search(f, plan, "maximize")
    df, dr = plan.cell
    assert abs(rep.pair.freq - TRUE_ROW[0]) <= df and abs(rep.pair.rate - TRUE_ROW[1]) <= dr


def test_column_amplitudes_examples(case1_25):
    Z = basis(25, TRUE_COL)
    assert column_amplitudes(np.zeros(25), Z) == (0.0, 0.0)
    a, b = column_amplitudes(3 * Z[:, 0] - 4 * Z[:, 1], Z)
    assert a == pytest.approx(3, abs=1e-10) and b == pytest.approx(-4, abs=1e-10)
    # mpmath oracle for the rotated amplitudes of column n0 = 1
    a, b = column_amplitudes(case1_25[:, 0], Z)
    assert a == pytest.approx(-2.3128447557514176, abs=1e-10)
    assert b == pytest.approx(-2.7659987591814219, abs=1e-10)


def test_mirror_pair_is_an_alias(rng):
    Y = rng.normal(size=(13, 6))
    p = NonlinearPair(0.8, 0.4)
    q = p.mirror()
    assert q == pytest.approx((math.pi - 0.8, math.pi - 0.4))
    assert reduced_criterion_cols(Y, q) == pytest.approx(reduced_criterion_cols(Y, p), rel=1e-9)
    assert p.canonical() == p and q.canonical() == pytest.approx(p)


def test_table_matches_pointwise(rng):
    Y = rng.normal(size=(12, 9))
    freqs = np.linspace(0.1, 3.0, 7)
    rates = np.linspace(0.05, 1.5, 11)
    for kind, fn in (("rss", reduced_criterion_cols), ("periodogram", periodogram_cols)):
        tab = column_criterion(Y, kind).table(freqs, rates)
        ref = np.array([[fn(Y, (a, b)) for b in rates] for a in freqs])
        np.testing.assert_allclose(tab, ref, rtol=1e-10, atol=1e-10)


def test_table_marks_degenerate_nodes():
    Y = np.ones((10, 3))
    tab = column_criterion(Y).table(np.array([math.pi / 2, 1.0]), np.array([math.pi / 2]))
    assert math.isnan(tab[0, 0]) and np.isfinite(tab[1, 0])


def test_criterion_kind_validated():
    with pytest.raises(ValueError):
        column_criterion(np.zeros((4, 4)), "lse")


def test_true_pair_is_strict_optimum(case1_25):
    pts = [TRUE_COL] + [(1.5 + dx, 0.5 + dy) for dx in (-0.05, 0, 0.05) for dy in (-0.01, 0, 0.01) if dx or dy]
    r = [reduced_criterion_cols(case1_25, p) for p in pts]
    i = [periodogram_cols(case1_25, p) for p in pts]
    assert r[0] < min(r[1:]) and i[0] > max(i[1:])


dims = st.integers(4, 16)
pairs = st.tuples(st.floats(0.05, 3.09), st.floats(0.05, 3.09))


@settings(max_examples=60, deadline=None)
@given(M=dims, N=st.integers(1, 16), pair=pairs, seed=st.integers(0, 2**31))
def test_dense_oracle_property(M, N, pair, seed):
    Y = np.random.default_rng(seed).normal(size=(M, N))
    try:
        got = reduced_criterion_cols(Y, pair)
    except DegenerateBasis:
        return
    ref = dense.residual_cols(Y, *pair)
    assert got >= 0.0
    assert got == pytest.approx(ref, rel=1e-9, abs=1e-12 * float(np.sum(Y * Y)))
    assert periodogram_cols(Y, pair) == pytest.approx(dense.periodogram_cols(Y, *pair), rel=1e-12)
