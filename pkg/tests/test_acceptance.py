"""Acceptance criteria, each at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line (printed at the end of the run)
and then asserts the same condition. Monte-Carlo runs use base seed 1 and
are shared between criteria through module-scoped fixtures.
"""

import math
import os
import time

import numpy as np
import pytest

from chirp2d import montecarlo as mc
from chirp2d.criterion import (
    DegenerateBasis,
    basis,
    column_amplitudes,
    column_criterion,
    periodogram_cols,
    reduced_criterion_cols,
    reduced_criterion_rows,
)
from chirp2d.estimator import EstimatorConfig, asymptotic_covariance, detect_order, order_from_fit, sequential_estimate
from chirp2d.model import make_rng, single_chirp, synthesize, texture_chirps, two_chirps
from chirp2d.optimizer import GridPlan, coarse_grid_search
from conftest import ACCEPTANCE_LINES
from oracles import dense

SEED = 1
WORKERS = os.cpu_count() or 1
CASE1 = single_chirp().components[0]

# printed asymptotic variances (alpha, beta) of the one-component tables and
# the second-component blocks of the two-component tables (rho = 13), and the
# first-component blocks (rho = 41); keyed by (M = N, sigma)
PRINTED_AVAR_RHO13 = {
    (25, 0.1): (7.56e-07, 1.13e-09), (25, 0.5): (1.89e-05, 2.84e-08), (25, 1.0): (7.56e-05, 1.13e-07),
    (50, 0.1): (4.73e-08, 1.77e-11), (50, 0.5): (1.18e-06, 4.43e-10), (50, 1.0): (4.73e-06, 1.77e-09),
    (75, 0.1): (9.34e-09, 1.56e-12), (75, 0.5): (2.33e-07, 3.89e-11), (75, 1.0): (9.34e-07, 1.56e-10),
    (100, 0.1): (2.95e-09, 2.77e-13), (100, 0.5): (7.38e-08, 6.92e-12), (100, 1.0): (2.95e-07, 2.77e-11),
}
PRINTED_AVAR_RHO41 = {
    (25, 0.1): (2.40e-07, 3.60e-10), (25, 0.5): (5.99e-06, 8.99e-09), (25, 1.0): (2.40e-05, 3.60e-08),
    (50, 0.1): (1.50e-08, 5.62e-12), (50, 0.5): (3.75e-07, 1.40e-10), (50, 1.0): (1.50e-06, 5.62e-10),
    (75, 0.1): (2.96e-09, 4.93e-13), (75, 0.5): (7.40e-08, 1.23e-11), (75, 1.0): (2.96e-07, 4.93e-11),
    (100, 0.1): (9.37e-10, 8.78e-14), (100, 0.5): (2.34e-08, 2.20e-12), (100, 1.0): (9.37e-08, 8.78e-12),
}


def record(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


@pytest.fixture(scope="module")
def case1_sigma05():
    """Case I, sigma = 0.5, 200 replications at M = N = 25, 50, 100."""
    plan = mc.McPlan(single_chirp(), [(25, 25), (50, 50), (100, 100)], [0.5], 200, base_seed=SEED)
    return mc.run(plan, workers=WORKERS)


def test_criterion_1_avar_closed_forms():
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    for table, comp in ((PRINTED_AVAR_RHO13, CASE1), (PRINTED_AVAR_RHO41, two_chirps().components[0])):
        for (T, sigma), (va, vb) in table.items():
            cov = asymptotic_covariance(comp, sigma**2, T, T)
            for got, want in ((cov.var_alpha, va), (cov.var_beta, vb), (cov.var_gamma, va), (cov.var_delta, vb)):
                worst = max(worst, abs(got / want - 1))
                count += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.01 and elapsed < 1.0
    record(1, ok, f"{count} printed Avar entries, worst relative error {worst:.2e} (tol 1e-2), {elapsed:.3f} s")
    assert ok


def test_criterion_2_noiseless_recovery():
    t0 = time.perf_counter()
    y = synthesize(single_chirp(), 25, 25)
    est = sequential_estimate(y).components[0].component
    elapsed = time.perf_counter() - t0
    err = np.max(np.abs(np.array(est.as_tuple()) - np.array(CASE1.as_tuple())))
    ok = err < 1e-6 and elapsed < 10.0
    record(2, ok, f"max |estimate - truth| = {err:.2e} (tol 1e-6), {elapsed:.2f} s")
    assert ok


def test_criterion_3_table1_bracket(case1_sigma05):
    a = case1_sigma05.cell((25, 25), 0.5, 1, "alpha")
    b = case1_sigma05.cell((25, 25), 0.5, 1, "beta")
    checks = [
        1e-5 <= a.mse <= 6e-5,
        1.4e-8 <= b.mse <= 9e-8,
        abs(a.average - 1.5) < 3e-3,
        a.failures == 0,
    ]
    ok = all(checks)
    record(
        3,
        ok,
        f"MSE(alpha) {a.mse:.3e} in [1e-5, 6e-5], MSE(beta) {b.mse:.3e} in [1.4e-8, 9e-8], "
        f"|mean alpha - 1.5| {abs(a.average - 1.5):.2e} < 3e-3, failures {a.failures}",
    )
    assert ok


def test_criterion_4_consistency_trend(case1_sigma05):
    cells = [case1_sigma05.cell((T, T), 0.5, 1, "alpha") for T in (25, 50, 100)]
    mse = [c.mse for c in cells]
    ratio = [c.mse / c.avar for c in cells]
    decreasing = all(b < a for a, b in zip(mse, mse[1:]))
    in_band = all(0.3 <= r <= 5 for r in ratio)
    ok = decreasing and in_band
    record(
        4,
        ok,
        "MSE(alpha) at M=N=25,50,100: "
        + ", ".join(f"{m:.3e}" for m in mse)
        + f" (strictly decreasing: {decreasing}); MSE/Avar: "
        + ", ".join(f"{r:.2f}" for r in ratio)
        + " (band [0.3, 5])",
    )
    assert ok


def test_criterion_5_two_component_bracket():
    plan = mc.McPlan(two_chirps(), [(50, 50)], [0.5], 100, base_seed=SEED)
    rep = mc.run(plan, workers=WORKERS)
    second = {p: rep.cell((50, 50), 0.5, 2, p) for p in ("alpha", "beta", "gamma", "delta")}
    truth = two_chirps().components[1]
    mse_ratio = second["alpha"].mse / 1.68e-6
    worst_mean = max(abs(c.average - getattr(truth, p)) for p, c in second.items())
    first_gamma = rep.cell((50, 50), 0.5, 1, "gamma")
    ok = 1 / 5 <= mse_ratio <= 5 and worst_mean < 3e-3
    record(
        5,
        ok,
        f"second component MSE(alpha2) {second['alpha'].mse:.3e} = {mse_ratio:.2f} x 1.68e-6 (factor 5), "
        f"max |mean - truth| {worst_mean:.2e} < 3e-3; first component MSE(gamma1)/Avar "
        f"{first_gamma.mse / first_gamma.avar:.0f} (not penalized)",
    )
    assert ok


def test_criterion_6_amplitude_collapse():
    M = N = 50
    clean = synthesize(single_chirp(), M, N)
    reps = 100
    collapsed = 0
    order_one = 0
    for r in range(reps):
        y = clean + 0.5 * make_rng(SEED, 6, 0, r).standard_normal((M, N))
        fit = sequential_estimate(y, EstimatorConfig(p=3))
        p1, p2, p3 = fit.powers
        collapsed += p2 < 0.01 * p1 and p3 < 0.01 * p1
        order = order_from_fit(fit, 0.01)
        if r < 3:
            # detect_order is this same computation; spot-check the identity
            assert detect_order(y, 3) == order
        order_one += order == 1
    ok = collapsed >= 0.95 * reps and order_one >= 0.95 * reps
    record(6, ok, f"stages 2 and 3 below 1% of stage 1 in {collapsed}/{reps}; detect_order == 1 in {order_one}/{reps} (need >= 95)")
    assert ok


def test_criterion_7_rss_periodogram_relationship():
    gaps = []
    for T in (25, 50, 100):
        Y = synthesize(single_chirp(), T, T)
        energy = float(np.sum(Y * Y)) / T
        gap = abs(reduced_criterion_cols(Y, CASE1.col_pair) / T - (energy - periodogram_cols(Y, CASE1.col_pair)))
        gaps.append(gap / energy)
    nonincreasing = all(b <= a for a, b in zip(gaps, gaps[1:]))
    Y = synthesize(single_chirp(), 50, 50)
    plan = GridPlan.for_length(50)
    cell_r = coarse_grid_search(column_criterion(Y), plan, "minimize").grid_cell
    cell_i = coarse_grid_search(column_criterion(Y, "periodogram"), plan, "maximize").grid_cell
    ok = nonincreasing and cell_r == cell_i
    record(
        7,
        ok,
        "normalized gap at M=25,50,100: "
        + ", ".join(f"{g:.3e}" for g in gaps)
        + f" (nonincreasing: {nonincreasing}); coarse cells at M=N=50: R {cell_r}, I {cell_i}",
    )
    assert ok


def test_criterion_8_oracle_equivalence():
    rng = np.random.default_rng(SEED)
    worst_r = worst_a = 0.0
    tested = 0
    while tested < 50:
        M, N = rng.integers(4, 17), rng.integers(1, 17)
        Y = rng.normal(size=(M, N))
        pair = tuple(rng.uniform(0.01, math.pi - 0.01, size=2))
        try:
            got_c = reduced_criterion_cols(Y, pair)
            got_r = reduced_criterion_rows(Y.T, pair)
            Z = basis(M, pair)
            got_a = np.array(column_amplitudes(Y[:, 0], Z))
        except DegenerateBasis:
            continue
        ref = dense.residual_cols(Y, *pair)
        worst_r = max(worst_r, abs(got_c - ref) / ref, abs(got_r - ref) / ref)
        # explicit normal equations solved by a general-purpose solver
        ref_a = np.linalg.solve(Z.T @ Z, Z.T @ Y[:, 0])
        worst_a = max(worst_a, float(np.max(np.abs(got_a - ref_a))))
        tested += 1
    ok = worst_r <= 1e-9 and worst_a <= 1e-10
    record(8, ok, f"{tested} random grids: worst criterion rel. error {worst_r:.2e} (tol 1e-9), amplitude error {worst_a:.2e} (tol 1e-10)")
    assert ok


def test_criterion_9_texture_demo():
    truth = texture_chirps().components
    y = synthesize(texture_chirps().with_noise(sigma=10.0, seed=SEED), 100, 100)
    fit = sequential_estimate(y, EstimatorConfig(p=5))
    est = [c.component for c in fit.components]
    errs = []
    for k in range(4):
        e = np.array(est[k].as_tuple()[2:]) - np.array(truth[k].as_tuple()[2:])
        errs.append(float(np.max(np.abs(e))))
    four_ok = all(e <= 2e-2 for e in errs)
    resid_ok = abs(fit.sigma2_hat - 100.0) <= 15.0
    p4, p5 = fit.powers[3], fit.powers[4]
    e5 = float(np.max(np.abs(np.array(est[4].as_tuple()[2:]) - np.array(truth[4].as_tuple()[2:]))))
    fifth_ok = p5 < 0.05 * p4 or e5 > 2e-2
    ok = four_ok and resid_ok and fifth_ok
    record(
        9,
        ok,
        "max nonlinear error of components 1-4: "
        + ", ".join(f"{e:.2e}" for e in errs)
        + f" (tol 2e-2); residual variance {fit.sigma2_hat:.2f} (100 +/- 15); "
        f"fifth stage power {p5:.3g} vs fourth {p4:.3g}, fifth error {e5:.2f}",
    )
    assert ok
