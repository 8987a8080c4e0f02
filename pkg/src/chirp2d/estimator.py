"""One-component and sequential multi-component 2-D chirp estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .criterion import DET_EPS, DegenerateBasis, NonlinearPair, column_criterion, row_criterion
from .model import PARAMETERS, ChirpComponent, component_grid, phase_grid
from .optimizer import GridPlan, OptimumReport, RefineSettings, solve_pair

__all__ = [
    "ZeroPower",
    "EstimatorConfig",
    "AsymptoticCovariance",
    "ComponentEstimate",
    "FitResult",
    "estimate_linear",
    "estimate_one",
    "sequential_estimate",
    "detect_order",
    "order_from_fit",
    "asymptotic_covariance",
    "sigma2_hat",
]

METHODS = {"proposed": "rss", "periodogram": "periodogram"}


class ZeroPower(ArithmeticError):
    """Asymptotic covariance requested for a component with A = B = 0."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Settings for the sequential estimator.

    ``method`` selects the column/row criterion: ``"proposed"`` minimizes the
    reduced residual sum of squares, ``"periodogram"`` maximizes the
    periodogram-type function. ``col_plan``/``row_plan`` override the default
    ``T x T**2`` grids. ``amplitude_bound`` is an optional validation bound on
    ``|A|`` and ``|B|``; estimates beyond it are annotated, not rejected.
    """

    p: int = 1
    method: str = "proposed"
    col_plan: GridPlan | None = None
    row_plan: GridPlan | None = None
    refine: RefineSettings = field(default_factory=RefineSettings)
    amplitude_bound: float | None = None
    order_threshold: float = 0.01

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if not 0.0 < self.order_threshold < 1.0:
            raise ValueError("order_threshold must lie in (0, 1)")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {sorted(METHODS)}, got {self.method!r}")
        if self.amplitude_bound is not None and not self.amplitude_bound > 0:
            raise ValueError("amplitude_bound must be positive")


@dataclass(frozen=True)
class AsymptoticCovariance:
    """Finite-(M, N) asymptotic (co)variances of one component's estimates.

    The (alpha, beta) and (gamma, delta) blocks are reported; the cross block
    between them is not. ``var_A`` and ``var_B`` come from the limiting
    information matrix of the six-parameter least-squares problem.
    """

    var_alpha: float
    var_beta: float
    cov_alpha_beta: float
    var_gamma: float
    var_delta: float
    cov_gamma_delta: float
    var_A: float = math.nan
    var_B: float = math.nan

    @property
    def col_block(self) -> np.ndarray:
        return np.array([[self.var_alpha, self.cov_alpha_beta], [self.cov_alpha_beta, self.var_beta]])

    @property
    def row_block(self) -> np.ndarray:
        return np.array([[self.var_gamma, self.cov_gamma_delta], [self.cov_gamma_delta, self.var_delta]])

    def se(self) -> dict[str, float]:
        var = (self.var_A, self.var_B, self.var_alpha, self.var_beta, self.var_gamma, self.var_delta)
        return {k: math.sqrt(v) for k, v in zip(PARAMETERS, var)}


@dataclass(frozen=True)
class ComponentEstimate:
    component: ChirpComponent
    se: dict
    power: float
    covariance: AsymptoticCovariance | None = None
    col_report: OptimumReport | None = None
    row_report: OptimumReport | None = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = self.component.to_dict()
        d["se"] = {k: float(v) for k, v in self.se.items()}
        d["power"] = float(self.power)
        d["notes"] = list(self.notes)
        return d


@dataclass(frozen=True)
class FitResult:
    components: tuple[ComponentEstimate, ...]
    sigma2_hat: float
    residual: np.ndarray = field(repr=False)

    @property
    def powers(self) -> list[float]:
        return [c.power for c in self.components]

    @property
    def trace(self) -> list[tuple[OptimumReport, OptimumReport]]:
        return [(c.col_report, c.row_report) for c in self.components]

    def fitted(self) -> np.ndarray:
        M, N = self.residual.shape
        out = np.zeros((M, N))
        for c in self.components:
            out += component_grid(c.component, M, N)
        return out

    def to_dict(self) -> dict:
        M, N = self.residual.shape
        return {
            "M": M,
            "N": N,
            "p": len(self.components),
            "sigma2_hat": float(self.sigma2_hat),
            "components": [c.to_dict() for c in self.components],
            "stages": [
                {
                    "cols": None if c.col_report is None else c.col_report.to_dict(),
                    "rows": None if c.row_report is None else c.row_report.to_dict(),
                }
                for c in self.components
            ],
        }


def sigma2_hat(residual) -> float:
    """Mean of the squared residual entries."""
    r = np.asarray(residual, dtype=float)
    return float(np.mean(r * r))


def estimate_linear(grid, pairs) -> tuple[float, float]:
    """Least-squares ``(A, B)`` for fixed ``((alpha, beta), (gamma, delta))``.

    Regresses the column-major stacked data on ``W = [cos(phi), sin(phi)]``.
    """
    Y = np.asarray(grid, dtype=float)
    M, N = Y.shape
    (alpha, beta), (gamma, delta) = pairs
    c = ChirpComponent(0.0, 0.0, alpha, beta, gamma, delta)
    ph = phase_grid(c, M, N).ravel(order="F")
    W = np.column_stack((np.cos(ph), np.sin(ph)))
    y = Y.ravel(order="F")
    G = W.T @ W
    det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
    if not det > DET_EPS * (M * N) ** 2:
        raise DegenerateBasis(f"det(W^T W) = {det:.3e}")
    Ginv = np.array([[G[1, 1], -G[0, 1]], [-G[1, 0], G[0, 0]]]) / det
    A, B = Ginv @ (W.T @ y)
    return float(A), float(B)


def _amplitude_information(c: ChirpComponent) -> np.ndarray:
    """Limiting normalized information matrix of ``(A, B, alpha, beta, gamma, delta)``.

    Normalization: ``(MN)^(-1/2)`` for the amplitudes, ``M^(-3/2) N^(-1/2)``,
    ``M^(-5/2) N^(-1/2)`` for (alpha, beta) and the mirror for (gamma, delta).
    """
    A, B, rho = c.A, c.B, c.power
    return np.array(
        [
            [0.5, 0.0, B / 4, B / 6, B / 4, B / 6],
            [0.0, 0.5, -A / 4, -A / 6, -A / 4, -A / 6],
            [B / 4, -A / 4, rho / 6, rho / 8, rho / 8, rho / 12],
            [B / 6, -A / 6, rho / 8, rho / 10, rho / 12, rho / 18],
            [B / 4, -A / 4, rho / 8, rho / 12, rho / 6, rho / 8],
            [B / 6, -A / 6, rho / 12, rho / 18, rho / 8, rho / 10],
        ]
    )


def asymptotic_covariance(c: ChirpComponent, sigma2: float, M: int, N: int) -> AsymptoticCovariance:
    """Closed-form asymptotic covariance at sample size ``(M, N)``.

    With ``rho = A^2 + B^2``::

        var(alpha) = 384 s2 / (rho M^3 N)
        var(beta)  = 360 s2 / (rho M^5 N)
        cov        = -360 s2 / (rho M^4 N)

    and the same with ``M`` and ``N`` swapped for ``(gamma, delta)``.
    """
    rho = c.power
    if not rho > 0:
        raise ZeroPower("component has zero power; its frequencies are not identifiable")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    s = sigma2 / rho
    J_inv = np.linalg.inv(_amplitude_information(c))
    return AsymptoticCovariance(
        var_alpha=384.0 * s / (M**3 * N),
        var_beta=360.0 * s / (M**5 * N),
        cov_alpha_beta=-360.0 * s / (M**4 * N),
        var_gamma=384.0 * s / (N**3 * M),
        var_delta=360.0 * s / (N**5 * M),
        cov_gamma_delta=-360.0 * s / (N**4 * M),
        var_A=sigma2 * J_inv[0, 0] / (M * N),
        var_B=sigma2 * J_inv[1, 1] / (M * N),
    )


def _plans(cfg: EstimatorConfig, M: int, N: int) -> tuple[GridPlan, GridPlan]:
    col = cfg.col_plan if cfg.col_plan is not None else GridPlan.for_length(M)
    row = cfg.row_plan if cfg.row_plan is not None else GridPlan.for_length(N)
    return col, row


def _joint_fit(Y: np.ndarray, col: NonlinearPair, row: NonlinearPair) -> ChirpComponent:
    """Combine separately estimated column and row pairs into one component.

    Mirroring both pairs and negating ``B`` reproduces the same grid, but
    mirroring only one of them gives a different surface. With the column
    pair held in its canonical half, the two remaining candidates are tried
    and the one with the smaller residual wins.
    """
    col = col.canonical()
    row = row.canonical()
    best = None
    for r in (row, row.mirror()):
        A, B = estimate_linear(Y, (col, r))
        comp = ChirpComponent(A, B, *col, *r)
        rss = float(np.sum((Y - component_grid(comp, *Y.shape)) ** 2))
        if best is None or rss < best[0]:
            best = (rss, comp)
    return best[1]


def _fit_stage(Y: np.ndarray, cfg: EstimatorConfig, plans) -> tuple[ChirpComponent, OptimumReport, OptimumReport]:
    kind = METHODS[cfg.method]
    f_col = column_criterion(Y, kind)
    f_row = row_criterion(Y, kind)
    col = solve_pair(f_col, plans[0], cfg.refine, f_col.sense)
    row = solve_pair(f_row, plans[1], cfg.refine, f_row.sense)
    comp = _joint_fit(Y, col.pair, row.pair)
    col = replace(col, pair=NonlinearPair(*comp.col_pair))
    row = replace(row, pair=NonlinearPair(*comp.row_pair))
    return comp, col, row


def _package(comp, col, row, s2, M, N, notes=()) -> ComponentEstimate:
    notes = list(notes)
    if col.flat or row.flat:
        notes.append("flat")
    if not (col.converged or col.flat) or not (row.converged or row.flat):
        notes.append("refinement did not converge")
    try:
        cov = asymptotic_covariance(comp, s2, M, N)
        se = cov.se()
    except ZeroPower:
        cov = None
        se = {k: math.nan for k in PARAMETERS}
        notes.append("zero power")
    return ComponentEstimate(comp, se, comp.power, cov, col, row, tuple(notes))


def sequential_estimate(grid, cfg: EstimatorConfig = EstimatorConfig()) -> FitResult:
    """Extract ``cfg.p`` components one at a time.

    Each stage fits the strongest remaining component on the current residual
    and subtracts it. Standard errors use the variance of the final residual.
    A stage whose power falls below ``order_threshold`` times the first
    stage's power is annotated ``"likely overfit"`` but still returned.
    """
    Y = np.array(grid, dtype=float)
    if Y.ndim != 2:
        raise ValueError("grid must be 2-D")
    M, N = Y.shape
    if M < 8 or N < 8:
        raise ValueError(f"grid must be at least 8x8, got {M}x{N}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("grid contains non-finite entries")
    plans = _plans(cfg, M, N)
    stages = []
    for _ in range(cfg.p):
        comp, col, row = _fit_stage(Y, cfg, plans)
        Y -= component_grid(comp, M, N)
        stages.append((comp, col, row))
    s2 = sigma2_hat(Y)
    first_power = stages[0][0].power
    out = []
    for k, (comp, col, row) in enumerate(stages):
        notes = []
        if k > 0 and comp.power < cfg.order_threshold * first_power:
            notes.append("likely overfit")
        K = cfg.amplitude_bound
        if K is not None and (abs(comp.A) >= K or abs(comp.B) >= K):
            notes.append("amplitude exceeds bound")
        out.append(_package(comp, col, row, s2, M, N, notes))
    return FitResult(tuple(out), s2, Y)


def estimate_one(grid, cfg: EstimatorConfig = EstimatorConfig()) -> ComponentEstimate:
    """Single-component fit: column search, row search, then linear regression."""
    return sequential_estimate(grid, replace(cfg, p=1)).components[0]


def order_from_fit(fit: FitResult, threshold: float = 0.01) -> int:
    """Largest ``k`` with ``power_k >= threshold * power_1``; 0 if stage 1 is flat."""
    first = fit.components[0]
    if "flat" in first.notes or not first.power > 0:
        return 0
    keep = [k + 1 for k, c in enumerate(fit.components) if c.power >= threshold * first.power]
    return max(keep)


def detect_order(grid, max_p: int, cfg: EstimatorConfig = EstimatorConfig()) -> int:
    """Estimate the number of components from the collapse of stage powers."""
    if max_p < 1:
        raise ValueError("max_p must be at least 1")
    fit = sequential_estimate(grid, replace(cfg, p=max_p))
    return order_from_fit(fit, cfg.order_threshold)
