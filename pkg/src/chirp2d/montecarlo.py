"""Replicated simulation runs: average estimate, bias, MSE and asymptotic variance.

Every replication draws its noise from its own stream,
``make_rng(base_seed, size_index, sigma_index, replication)``, so a cell can
be rerun on its own and results do not depend on scheduling. Statistics are
reduced in replication order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimator import EstimatorConfig, ZeroPower, asymptotic_covariance, sequential_estimate
from .model import NONLINEAR, PARAMETERS, ModelSpec, NoiseSpec, add_noise, component_grid, make_rng

__all__ = ["McPlan", "McCell", "McReport", "run", "run_cell", "cell_statistics", "render", "parse_csv", "parse_json"]

CSV_COLUMNS = ("size_m", "size_n", "sigma", "component", "parameter", "average", "bias", "mse", "avar", "failures")
STATS = ("average", "bias", "mse", "avar")


@dataclass(frozen=True)
class McPlan:
    """A grid of simulation cells: every size crossed with every noise level."""

    spec: ModelSpec
    sizes: tuple[tuple[int, int], ...]
    sigmas: tuple[float, ...]
    replications: int
    base_seed: int = 0
    estimator: str = "proposed"

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple((int(m), int(n)) for m, n in self.sizes))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not self.sizes or not self.sigmas:
            raise ValueError("sizes and sigmas must be nonempty")
        if any(s < 0 for s in self.sigmas):
            raise ValueError("sigmas must be nonnegative")
        if not self.spec.components:
            raise ValueError("plan needs at least one true component")
        EstimatorConfig(method=self.estimator)

    @property
    def config(self) -> EstimatorConfig:
        return EstimatorConfig(p=self.spec.p, method=self.estimator)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "sizes": [list(s) for s in self.sizes],
            "sigmas": list(self.sigmas),
            "replications": self.replications,
            "base_seed": self.base_seed,
            "estimator": self.estimator,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "McPlan":
        try:
            return cls(
                spec=ModelSpec.from_dict(d["spec"]),
                sizes=tuple(tuple(s) for s in d["sizes"]),
                sigmas=tuple(d["sigmas"]),
                replications=int(d["replications"]),
                base_seed=int(d.get("base_seed", 0)),
                estimator=d.get("estimator", "proposed"),
            )
        except KeyError as exc:
            raise ValueError(f"plan is missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class McCell:
    """Statistics of one parameter of one component in one (size, sigma) cell."""

    size_m: int
    size_n: int
    sigma: float
    component: int
    parameter: str
    average: float
    bias: float
    mse: float
    avar: float
    failures: int

    def key(self):
        return (self.size_m, self.size_n, self.sigma, self.component, self.parameter)


@dataclass(frozen=True)
class McReport:
    cells: tuple[McCell, ...]
    replications: int = 0
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def cell(self, size, sigma, component, parameter) -> McCell:
        key = (int(size[0]), int(size[1]), float(sigma), int(component), parameter)
        for c in self.cells:
            if c.key() == key:
                return c
        raise KeyError(key)

    def __eq__(self, other):
        if not isinstance(other, McReport):
            return NotImplemented
        return _cells_equal(self.cells, other.cells)


def _cells_equal(a, b) -> bool:
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        for k in CSV_COLUMNS:
            u, v = getattr(x, k), getattr(y, k)
            if isinstance(u, float) and math.isnan(u) and isinstance(v, float) and math.isnan(v):
                continue
            if u != v:
                return False
    return True


def cell_statistics(estimates, truth: float) -> dict[str, float]:
    """Average, bias, MSE and variance of a 1-D array of estimates."""
    x = np.asarray(estimates, dtype=float)
    if x.size == 0:
        return {"average": math.nan, "bias": math.nan, "mse": math.nan, "variance": math.nan}
    avg = math.fsum(x) / x.size
    err = x - truth
    mse = math.fsum(err * err) / x.size
    dev = x - avg
    return {
        "average": avg,
        "bias": avg - truth,
        "mse": mse,
        "variance": math.fsum(dev * dev) / x.size,
    }


def _replicate(args):
    """One replication; returns a ``(p, 6)`` array of estimates or the error text."""
    clean, sigma, base_seed, key, cfg = args
    rng = make_rng(base_seed, *key)
    try:
        y = add_noise(clean, NoiseSpec(sigma=sigma), rng)
        fit = sequential_estimate(y, cfg)
        return np.array([c.component.as_tuple() for c in fit.components])
    except (ArithmeticError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return f"{type(exc).__name__}: {exc}"


def _clean_grid(spec: ModelSpec, M: int, N: int) -> np.ndarray:
    y = np.zeros((M, N))
    for c in spec.components:
        y += component_grid(c, M, N)
    return y


def run_cell(plan: McPlan, size_index: int, sigma_index: int, workers: int = 1) -> list:
    """Estimates of every replication of one cell, in replication order.

    Each entry is a ``(p, 6)`` array or, for a failed replication, a string.
    """
    M, N = plan.sizes[size_index]
    sigma = plan.sigmas[sigma_index]
    clean = _clean_grid(plan.spec, M, N)
    cfg = plan.config
    jobs = [
        (clean, sigma, plan.base_seed, (size_index, sigma_index, r), cfg)
        for r in range(plan.replications)
    ]
    if workers <= 1 or len(jobs) == 1:
        return [_replicate(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map yields in submission order: the reduction stays deterministic
        return list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _summarize(plan: McPlan, size_index: int, sigma_index: int, results: list) -> list[McCell]:
    M, N = plan.sizes[size_index]
    sigma = plan.sigmas[sigma_index]
    ok = [r for r in results if not isinstance(r, str)]
    failures = len(results) - len(ok)
    est = np.stack(ok) if ok else np.empty((0, plan.spec.p, len(PARAMETERS)))
    cells = []
    for k, truth in enumerate(plan.spec.components):
        try:
            cov = asymptotic_covariance(truth, sigma * sigma, M, N)
            avar = dict(zip(PARAMETERS, (cov.var_A, cov.var_B, cov.var_alpha, cov.var_beta, cov.var_gamma, cov.var_delta)))
        except ZeroPower:
            avar = dict.fromkeys(PARAMETERS, math.nan)
        for j, name in enumerate(PARAMETERS):
            st = cell_statistics(est[:, k, j], getattr(truth, name))
            cells.append(
                McCell(M, N, sigma, k + 1, name, st["average"], st["bias"], st["mse"], float(avar[name]), failures)
            )
    return cells


def run(plan: McPlan, workers: int = 1) -> McReport:
    """Run every (size, sigma) cell of ``plan``.

    Failed replications are counted per cell and left out of its statistics.
    The report is a deterministic function of ``plan``; ``workers`` only
    changes the wall time.
    """
    cells = []
    failures = {}
    for i in range(len(plan.sizes)):
        for j in range(len(plan.sigmas)):
            results = run_cell(plan, i, j, workers)
            errors = [r for r in results if isinstance(r, str)]
            if errors:
                failures[(plan.sizes[i], plan.sigmas[j])] = errors
            cells.extend(_summarize(plan, i, j, results))
    return McReport(tuple(cells), plan.replications, {"errors": failures})


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "-"
    return f"{x:.2e}"


def _render_markdown(report: McReport, parameters) -> str:
    blocks = {}
    for c in report.cells:
        blocks.setdefault((c.size_m, c.size_n, c.sigma), {}).setdefault(c.component, {})[c.parameter] = c
    out = []
    for (M, N, sigma), comps in blocks.items():
        out.append(f"### M = {M}, N = {N}, sigma = {sigma:g}")
        out.append("")
        for k, params in comps.items():
            names = [p for p in parameters if p in params]
            failures = next(iter(params.values())).failures
            if len(comps) > 1:
                out.append(f"Component {k}")
                out.append("")
            out.append("| | " + " | ".join(names) + " |")
            out.append("|---|" + "---|" * len(names))
            for label, stat in (("Avg", "average"), ("Bias", "bias"), ("MSE", "mse"), ("Avar", "avar")):
                vals = []
                for p in names:
                    v = getattr(params[p], stat)
                    vals.append("-" if math.isnan(v) else (f"{v:.4f}" if stat == "average" else _fmt(v)))
                out.append(f"| {label} | " + " | ".join(vals) + " |")
            if failures:
                out.append("")
                out.append(f"{failures} of {report.replications} replications failed and are excluded.")
            out.append("")
    return "\n".join(out)


def render(report: McReport, fmt: str = "markdown", parameters=NONLINEAR) -> str:
    """Serialize ``report`` as ``"csv"``, ``"json"`` or ``"markdown"``.

    CSV and JSON carry every parameter with full ``repr`` precision and parse
    back to an equal report. The markdown layout has one block per
    (size, sigma) and component with Avg / Bias / MSE / Avar rows over
    ``parameters`` (the nonlinear ones by default).
    """
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in report.cells:
            w.writerow([repr(getattr(c, k)) if isinstance(getattr(c, k), float) else getattr(c, k) for k in CSV_COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        rows = []
        for c in report.cells:
            row = {k: getattr(c, k) for k in CSV_COLUMNS}
            for k in STATS + ("sigma",):
                if math.isnan(row[k]):
                    row[k] = None
            rows.append(row)
        return json.dumps({"replications": report.replications, "cells": rows}, indent=2) + "\n"
    if fmt == "markdown":
        return _render_markdown(report, parameters)
    raise ValueError(f"unknown format {fmt!r}; expected csv, json or markdown")


def _cell_from_row(row: dict) -> McCell:
    def num(v):
        return math.nan if v is None or v == "nan" else float(v)

    return McCell(
        size_m=int(row["size_m"]),
        size_n=int(row["size_n"]),
        sigma=float(row["sigma"]),
        component=int(row["component"]),
        parameter=str(row["parameter"]),
        average=num(row["average"]),
        bias=num(row["bias"]),
        mse=num(row["mse"]),
        avar=num(row["avar"]),
        failures=int(row["failures"]),
    )


def parse_csv(text: str, replications: int = 0) -> McReport:
    """Inverse of ``render(report, "csv")``."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    return McReport(tuple(_cell_from_row(r) for r in reader), replications)


def parse_json(text: str) -> McReport:
    """Inverse of ``render(report, "json")``."""
    d = json.loads(text)
    return McReport(tuple(_cell_from_row(r) for r in d["cells"]), int(d.get("replications", 0)))
