"""Reduced least-squares criteria and periodogram-type functions.

Fixing ``n = n0`` turns a 2-D chirp into a 1-D chirp in ``m`` whose amplitudes
depend on ``n0`` but whose (frequency, rate) pair does not. Summing the
per-column projection residuals onto the basis ``Z_M(alpha, beta)`` gives a
2-D criterion in ``(alpha, beta)`` alone; the row-wise version does the same
for ``(gamma, delta)``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

__all__ = [
    "DegenerateBasis",
    "NonlinearPair",
    "basis",
    "column_amplitudes",
    "projection_residual",
    "reduced_criterion_cols",
    "reduced_criterion_rows",
    "periodogram_cols",
    "periodogram_rows",
    "AxisCriterion",
    "column_criterion",
    "row_criterion",
]

# det(Z^T Z) must exceed DET_EPS * T**2
DET_EPS = 1e-12
# tolerated negative residual before clamping, relative to y^T y
NEG_RESIDUAL_TOL = 1e-9
# complex entries per chunk in the batched grid evaluation
_CHUNK_ELEMENTS = 1 << 20


class DegenerateBasis(ArithmeticError):
    """The 2x2 normal matrix of a chirp basis is numerically singular."""


class NonlinearPair(NamedTuple):
    """A (frequency, frequency rate) point, normally inside ``(0, pi)**2``."""

    freq: float
    rate: float

    def in_domain(self) -> bool:
        return 0.0 < self.freq < math.pi and 0.0 < self.rate < math.pi

    def mirror(self) -> "NonlinearPair":
        """The aliased pair ``(pi - freq, pi - rate)``.

        ``t*pi + t**2*pi`` is a multiple of ``2*pi`` for every integer ``t``, so
        the mirrored basis equals ``[cos, -sin]`` of the original: both pairs
        span the same columns and every criterion here takes equal values on
        them.
        """
        return NonlinearPair(math.pi - self.freq, math.pi - self.rate)

    def canonical(self) -> "NonlinearPair":
        """Representative of ``{self, self.mirror()}`` with ``rate <= pi/2``."""
        return self.mirror() if self.rate > 0.5 * math.pi else NonlinearPair(*self)


def basis(T: int, pair) -> np.ndarray:
    """``(T, 2)`` matrix with row ``t`` equal to ``(cos(t f + t^2 r), sin(t f + t^2 r))``."""
    if T < 2:
        raise ValueError(f"basis length must be at least 2, got {T}")
    freq, rate = pair
    t = np.arange(1, T + 1, dtype=float)
    ph = freq * t + rate * t * t
    return np.column_stack((np.cos(ph), np.sin(ph)))


def _gram_inverse(Z: np.ndarray) -> np.ndarray:
    g11 = Z[:, 0] @ Z[:, 0]
    g22 = Z[:, 1] @ Z[:, 1]
    g12 = Z[:, 0] @ Z[:, 1]
    det = g11 * g22 - g12 * g12
    T = Z.shape[0]
    if not det > DET_EPS * T * T:
        raise DegenerateBasis(f"det(Z^T Z) = {det:.3e} for a basis of length {T}")
    return np.array([[g22, -g12], [-g12, g11]]) / det


def column_amplitudes(y, Z: np.ndarray) -> tuple[float, float]:
    """Least-squares coefficients ``(Z^T Z)^{-1} Z^T y`` of one data vector."""
    y = np.asarray(y, dtype=float)
    if y.shape != (Z.shape[0],):
        raise ValueError(f"data length {y.shape} does not match basis length {Z.shape[0]}")
    a, b = _gram_inverse(Z) @ (Z.T @ y)
    return float(a), float(b)


def _residuals(Y: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Projection residual of every column of ``Y`` (shape ``(T, K)``)."""
    Ginv = _gram_inverse(Z)
    Bm = Z.T @ Y
    energy = np.einsum("tk,tk->k", Y, Y)
    explained = np.einsum("ik,ij,jk->k", Bm, Ginv, Bm)
    res = energy - explained
    if np.any(res < -NEG_RESIDUAL_TOL * np.maximum(energy, np.finfo(float).tiny)):
        raise FloatingPointError("projection residual is significantly negative")
    return np.maximum(res, 0.0)


def projection_residual(y, Z: np.ndarray) -> float:
    """``y^T (I - P_Z) y`` via the 2x2 normal equations, clamped at zero."""
    y = np.asarray(y, dtype=float)
    if y.shape != (Z.shape[0],):
        raise ValueError(f"data length {y.shape} does not match basis length {Z.shape[0]}")
    return float(_residuals(y[:, None], Z)[0])


def _as_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {grid.shape}")
    return grid


def reduced_criterion_cols(grid, pair) -> float:
    """Sum over columns of the projection residual onto ``basis(M, pair)``."""
    Y = _as_grid(grid)
    Z = basis(Y.shape[0], pair)
    return math.fsum(_residuals(Y, Z))


def reduced_criterion_rows(grid, pair) -> float:
    """Row-wise mirror of :func:`reduced_criterion_cols`."""
    return reduced_criterion_cols(_as_grid(grid).T, pair)


def periodogram_cols(grid, pair) -> float:
    """``(2 / MN) * sum_n ||Z^T Y_n||^2`` with ``Z = basis(M, pair)``; no inverse."""
    Y = _as_grid(grid)
    M, N = Y.shape
    Bm = basis(M, pair).T @ Y
    return 2.0 / (M * N) * math.fsum(np.einsum("ik,ik->k", Bm, Bm))


def periodogram_rows(grid, pair) -> float:
    return periodogram_cols(_as_grid(grid).T, pair)


class AxisCriterion:
    """Criterion over the vectors stored in the columns of ``data``.

    ``kind`` is ``"rss"`` for the reduced residual sum of squares (minimized)
    or ``"periodogram"`` for the periodogram-type function (maximized).
    Instances are callable on a single pair and expose :meth:`table` for the
    coarse grid.
    """

    def __init__(self, data, kind: str = "rss"):
        if kind not in ("rss", "periodogram"):
            raise ValueError(f"unknown criterion kind {kind!r}")
        self.data = np.ascontiguousarray(_as_grid(data))
        self.kind = kind
        self.energy = math.fsum(np.einsum("tk,tk->k", self.data, self.data))

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def sense(self) -> str:
        return "minimize" if self.kind == "rss" else "maximize"

    def __call__(self, pair) -> float:
        if self.kind == "rss":
            return reduced_criterion_cols(self.data, pair)
        return periodogram_cols(self.data, pair)

    def table(self, freqs, rates) -> np.ndarray:
        """Criterion at every node of ``freqs x rates``, shape ``(F, R)``.

        Degenerate-basis nodes are NaN. The sums over the basis length are
        one complex matrix product per chunk of rates:
        ``b = sum_t exp(-i(f t + r t^2)) y_t = Z_c^T y - i Z_s^T y``.
        """
        Y = self.data
        T, K = Y.shape
        freqs = np.asarray(freqs, dtype=float)
        rates = np.asarray(rates, dtype=float)
        t = np.arange(1, T + 1, dtype=float)
        Ef = np.exp(-1j * np.outer(freqs, t))
        Ef2 = Ef * Ef
        F = len(freqs)
        out = np.empty((F, len(rates)))
        step = max(1, _CHUNK_ELEMENTS // max(1, T * K + F * K))
        for s in range(0, len(rates), step):
            r = rates[s : s + step]
            Er = np.exp(-1j * np.outer(r, t * t))
            D = (Er[:, :, None] * Y[None, :, :]).transpose(1, 0, 2).reshape(T, -1)
            b = (Ef @ D).reshape(F, len(r), K)
            br, bi = b.real, b.imag
            s_cc = np.einsum("frk,frk->fr", br, br)
            s_ss = np.einsum("frk,frk->fr", bi, bi)
            if self.kind == "periodogram":
                out[:, s : s + step] = 2.0 / (T * K) * (s_cc + s_ss)
                continue
            s_cs = -np.einsum("frk,frk->fr", br, bi)
            # Gram entries from sum_t exp(-2i phase)
            e2 = Ef2 @ (Er * Er).T
            g_cc = 0.5 * (T + e2.real)
            g_ss = 0.5 * (T - e2.real)
            g_cs = -0.5 * e2.imag
            det = g_cc * g_ss - g_cs * g_cs
            with np.errstate(divide="ignore", invalid="ignore"):
                explained = (g_ss * s_cc - 2.0 * g_cs * s_cs + g_cc * s_ss) / det
            val = np.maximum(self.energy - explained, 0.0)
            val[~(det > DET_EPS * T * T)] = np.nan
            out[:, s : s + step] = val
        return out


def column_criterion(grid, kind: str = "rss") -> AxisCriterion:
    """Criterion in ``(alpha, beta)`` built from the columns of ``grid``."""
    return AxisCriterion(_as_grid(grid), kind)


def row_criterion(grid, kind: str = "rss") -> AxisCriterion:
    """Criterion in ``(gamma, delta)`` built from the rows of ``grid``."""
    return AxisCriterion(_as_grid(grid).T, kind)
