"""Coarse grid search plus Nelder-Mead refinement over ``(0, pi)**2``."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .criterion import NonlinearPair

__all__ = [
    "AllInvalid",
    "GridPlan",
    "RefineSettings",
    "OptimumReport",
    "coarse_grid_search",
    "refine",
    "solve_pair",
]

DOMAIN = (0.0, math.pi)
HALF_DOMAIN = (0.0, 0.5 * math.pi)
RATE_POINTS_CAP = 10_000
FLAT_TOL = 1e-12


class AllInvalid(ArithmeticError):
    """The objective is non-finite at every grid node."""


class GridCapWarning(UserWarning):
    """The default rate resolution was capped."""


@dataclass(frozen=True)
class GridPlan:
    """Node counts and open ranges of the coarse grid.

    Nodes sit at the centres of equal cells, half a cell away from each
    range boundary.
    """

    freq_points: int
    rate_points: int
    freq_range: tuple[float, float] = DOMAIN
    rate_range: tuple[float, float] = DOMAIN

    def __post_init__(self):
        if self.freq_points < 8 or self.rate_points < 8:
            raise ValueError("a grid plan needs at least 8 points per axis")
        for lo, hi in (self.freq_range, self.rate_range):
            if not (DOMAIN[0] <= lo < hi <= DOMAIN[1]):
                raise ValueError(f"range ({lo}, {hi}) is not an interval inside [0, pi]")

    @classmethod
    def for_length(cls, T: int, rate_cap: int = RATE_POINTS_CAP) -> "GridPlan":
        """Default plan for an axis of length ``T``.

        ``T`` frequencies over ``(0, pi)`` and rates at spacing ``pi / T**2``
        over ``(0, pi/2)``. The other half of the rate axis holds only the
        mirror images ``(pi - f, pi - r)`` of these nodes, where every
        criterion takes the same value.
        """
        rate_points = (T * T + 1) // 2
        if rate_points > rate_cap:
            warnings.warn(
                f"rate grid of {rate_points} points capped at {rate_cap}; "
                "weak components may fall between rate nodes",
                GridCapWarning,
                stacklevel=2,
            )
            rate_points = rate_cap
        return cls(max(8, T), max(8, rate_points), DOMAIN, HALF_DOMAIN)

    @staticmethod
    def _nodes(count, rng):
        lo, hi = rng
        return lo + (np.arange(count) + 0.5) * (hi - lo) / count

    @property
    def freqs(self) -> np.ndarray:
        return self._nodes(self.freq_points, self.freq_range)

    @property
    def rates(self) -> np.ndarray:
        return self._nodes(self.rate_points, self.rate_range)

    @property
    def cell(self) -> tuple[float, float]:
        return (
            (self.freq_range[1] - self.freq_range[0]) / self.freq_points,
            (self.rate_range[1] - self.rate_range[0]) / self.rate_points,
        )


@dataclass(frozen=True)
class RefineSettings:
    x_tol: float = 1e-8
    f_tol: float = 1e-10
    max_iters: int = 500

    def __post_init__(self):
        if not (self.x_tol > 0 and self.f_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True)
class OptimumReport:
    """Outcome of a search.

    ``grid_cell`` is ``(i_freq, i_rate)`` of the winning coarse node (or
    ``None`` for a refinement started elsewhere) and ``grid_value`` its
    criterion value. ``flat`` marks an objective that was constant over the
    whole grid, in which case no winner is meaningful.
    """

    pair: NonlinearPair
    value: float
    iterations: int = 0
    converged: bool = False
    grid_cell: tuple[int, int] | None = None
    grid_pair: NonlinearPair | None = None
    grid_value: float | None = None
    flat: bool = False
    evaluations: int = 0
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "pair": [float(self.pair[0]), float(self.pair[1])],
            "value": float(self.value),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "grid_cell": None if self.grid_cell is None else [int(i) for i in self.grid_cell],
            "grid_pair": None if self.grid_pair is None else [float(v) for v in self.grid_pair],
            "grid_value": None if self.grid_value is None else float(self.grid_value),
            "flat": bool(self.flat),
            "evaluations": int(self.evaluations),
            "notes": list(self.notes),
        }


def _check_sense(sense: str) -> float:
    if sense == "minimize":
        return 1.0
    if sense == "maximize":
        return -1.0
    raise ValueError(f"sense must be 'minimize' or 'maximize', got {sense!r}")


def coarse_grid_search(f: Callable, plan: GridPlan, sense: str = "minimize") -> OptimumReport:
    """Evaluate ``f`` at every node of ``plan`` and return the best one.

    ``f`` takes a ``(freq, rate)`` pair. If it also has a ``table(freqs,
    rates)`` method, that vectorized path is used instead of the node loop.
    Ties go to the smaller frequency, then the smaller rate.
    """
    sign = _check_sense(sense)
    freqs, rates = plan.freqs, plan.rates
    if hasattr(f, "table"):
        values = np.asarray(f.table(freqs, rates), dtype=float)
    else:
        values = np.array([[f(NonlinearPair(a, b)) for b in rates] for a in freqs], dtype=float)
    finite = np.isfinite(values)
    if not finite.any():
        raise AllInvalid("objective is non-finite at every grid node")
    signed = np.where(finite, sign * values, np.inf)
    # argmin returns the first occurrence in C order: smallest freq, then rate
    i, j = np.unravel_index(int(np.argmin(signed)), signed.shape)
    vmax, vmin = values[finite].max(), values[finite].min()
    flat = bool(vmax - vmin < FLAT_TOL * max(1.0, abs(vmax)))
    node = NonlinearPair(float(freqs[i]), float(rates[j]))
    return OptimumReport(
        pair=node,
        value=float(values[i, j]),
        converged=False,
        grid_cell=(int(i), int(j)),
        grid_pair=node,
        grid_value=float(values[i, j]),
        flat=flat,
        evaluations=int(values.size),
        notes=("flat",) if flat else (),
    )


def _reflect(x: float, lo: float, hi: float) -> float:
    width = hi - lo
    # fold into [lo, hi] by mirror reflections
    y = (x - lo) % (2.0 * width)
    if y > width:
        y = 2.0 * width - y
    y += lo
    # keep strictly inside the open interval
    eps = 1e-12 * width
    return min(max(y, lo + eps), hi - eps)


def _stationary_start(fun, x0, f0, step, x_tol):
    """Axis probes around ``x0``; True if it is a local minimum to within ``x_tol``.

    Fits a parabola through ``x0 - h, x0, x0 + h`` on each axis and checks that
    the vertex lies within ``x_tol`` of ``x0``.
    """
    evals = 0
    for k in range(2):
        e = np.zeros(2)
        e[k] = step[k]
        fm, fp = fun(x0 - e), fun(x0 + e)
        evals += 2
        curv = fp - 2.0 * f0 + fm
        if not (fm >= f0 and fp >= f0 and curv > 0):
            return False, evals
        if abs(0.5 * step[k] * (fm - fp) / curv) > x_tol:
            return False, evals
    return True, evals


def refine(
    f: Callable,
    start,
    settings: RefineSettings = RefineSettings(),
    sense: str = "minimize",
    step=None,
    bounds: tuple[tuple[float, float], tuple[float, float]] = (DOMAIN, DOMAIN),
) -> OptimumReport:
    """Nelder-Mead descent from ``start``, kept inside the open ``bounds``.

    Proposals that leave the box are mirrored back off its walls. ``step``
    sets the initial simplex edge per coordinate (the coarse cell size is the
    natural choice); the simplex is built in coordinates scaled by it. Stops
    when the simplex diameter (max coordinate spread, unscaled) drops below
    ``x_tol`` or the relative spread of vertex values drops below ``f_tol``.
    """
    sign = _check_sense(sense)
    start = np.asarray(start, dtype=float)
    for k in range(2):
        lo, hi = bounds[k]
        if not lo < start[k] < hi:
            raise ValueError(f"start {tuple(start)} lies outside the open domain")
    if step is None:
        step = (0.05 * (bounds[0][1] - bounds[0][0]), 0.05 * (bounds[1][1] - bounds[1][0]))
    scale = np.asarray(step, dtype=float)
    evaluations = 0

    def to_x(u):
        return np.array([_reflect(u[k] * scale[k], *bounds[k]) for k in range(2)])

    def fun(x):
        nonlocal evaluations
        evaluations += 1
        v = sign * float(f(NonlinearPair(float(x[0]), float(x[1]))))
        return v if math.isfinite(v) else math.inf

    f0 = fun(start)
    at_rest, n = _stationary_start(
        lambda x: fun(to_x(x / scale)), start, f0, scale, settings.x_tol
    )
    if at_rest:
        return OptimumReport(
            pair=NonlinearPair(float(start[0]), float(start[1])),
            value=sign * f0,
            iterations=0,
            converged=True,
            evaluations=evaluations,
            notes=("start is stationary",),
        )

    # simplex in scaled coordinates u = x / scale
    u0 = start / scale
    simplex = [u0, u0 + np.array([1.0, 0.0]), u0 + np.array([0.0, 1.0])]
    points = [start] + [to_x(u) for u in simplex[1:]]
    simplex = [p / scale for p in points]
    values = [f0] + [fun(p) for p in points[1:]]

    converged = False
    iterations = 0
    while iterations < settings.max_iters:
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        pts = np.array([s * scale for s in simplex])
        diameter = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
        spread = values[-1] - values[0]
        if diameter < settings.x_tol or spread <= settings.f_tol * abs(values[0]):
            converged = True
            break
        iterations += 1

        centroid = 0.5 * (simplex[0] + simplex[1])
        worst = simplex[-1]

        def take(u):
            x = to_x(u)
            return x / scale, fun(x)

        ur, fr = take(centroid + (centroid - worst))
        if fr < values[0]:
            ue, fe = take(centroid + 2.0 * (centroid - worst))
            simplex[-1], values[-1] = (ue, fe) if fe < fr else (ur, fr)
        elif fr < values[1]:
            simplex[-1], values[-1] = ur, fr
        else:
            if fr < values[-1]:
                uc, fc = take(centroid + 0.5 * (ur - centroid))
                accept = fc <= fr
            else:
                uc, fc = take(centroid + 0.5 * (worst - centroid))
                accept = fc < values[-1]
            if accept:
                simplex[-1], values[-1] = uc, fc
            else:
                best = simplex[0]
                for k in (1, 2):
                    simplex[k], values[k] = take(best + 0.5 * (simplex[k] - best))

    k = int(np.argmin(values))
    x = to_x(simplex[k])
    return OptimumReport(
        pair=NonlinearPair(float(x[0]), float(x[1])),
        value=sign * values[k],
        iterations=iterations,
        converged=converged,
        evaluations=evaluations,
        notes=() if converged else ("max_iters reached",),
    )


def solve_pair(
    f: Callable,
    plan: GridPlan,
    settings: RefineSettings = RefineSettings(),
    sense: str = "minimize",
    bounds: tuple[tuple[float, float], tuple[float, float]] = (DOMAIN, DOMAIN),
) -> OptimumReport:
    """Coarse grid search, then refinement from the winning node.

    Refinement is confined to ``bounds`` (the full domain by default, not
    the plan's ranges). A flat grid is reported as such without refinement.
    """
    coarse = coarse_grid_search(f, plan, sense)
    if coarse.flat:
        return coarse
    fine = refine(
        f,
        coarse.pair,
        settings,
        sense,
        step=plan.cell,
        bounds=bounds,
    )
    sign = _check_sense(sense)
    if sign * fine.value > sign * coarse.value:
        # the simplex keeps its best vertex, so this only guards against NaN paths
        fine = replace(fine, pair=coarse.pair, value=coarse.value)
    return replace(
        fine,
        grid_cell=coarse.grid_cell,
        grid_pair=coarse.grid_pair,
        grid_value=coarse.grid_value,
        evaluations=coarse.evaluations + fine.evaluations,
    )
