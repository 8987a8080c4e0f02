"""Brute-force reference implementations used only by the tests.

Everything here builds explicit matrices and calls generic LAPACK solvers, so
it shares no code path with the package's closed-form 2x2 algebra.
"""

import numpy as np


def basis(T, freq, rate):
    t = np.arange(1, T + 1, dtype=float)
    ph = freq * t + rate * t**2
    return np.column_stack((np.cos(ph), np.sin(ph)))


def projector(Z):
    """Dense ``Z (Z^T Z)^{-1} Z^T`` via the pseudo-inverse."""
    return Z @ np.linalg.pinv(Z)


def residual_cols(Y, freq, rate):
    """Sum over columns of ``||(I - P) y||^2``."""
    Z = basis(Y.shape[0], freq, rate)
    R = (np.eye(Y.shape[0]) - projector(Z)) @ Y
    return float(np.sum(R * R))


def periodogram_cols(Y, freq, rate):
    M, N = Y.shape
    Z = basis(M, freq, rate)
    return float(2.0 / (M * N) * np.sum((Z.T @ Y) ** 2))


def lstsq_amplitudes(y, Z):
    coef, *_ = np.linalg.lstsq(Z, y, rcond=None)
    return coef


def full_rss(Y, A, B, a, b, g, d):
    """Error sum of squares of the full six-parameter model."""
    M, N = Y.shape
    m = np.arange(1, M + 1)[:, None]
    n = np.arange(1, N + 1)[None, :]
    ph = a * m + b * m**2 + g * n + d * n**2
    E = Y - A * np.cos(ph) - B * np.sin(ph)
    return float(np.sum(E * E))
