"""Chirp parameterization and synthesis of noisy 2-D chirp observations.

A signal grid is a plain ``(M, N)`` float array. Entry ``grid[m - 1, n - 1]``
holds ``y(m, n)``: the math layer uses 1-based indices ``m = 1..M`` and
``n = 1..N`` and the conversion happens only where arrays are indexed.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "ChirpComponent",
    "NoiseSpec",
    "ModelSpec",
    "PowerOrderWarning",
    "phase",
    "phase_grid",
    "component_grid",
    "synthesize",
    "add_noise",
    "make_rng",
    "single_chirp",
    "two_chirps",
    "texture_chirps",
]

NONLINEAR = ("alpha", "beta", "gamma", "delta")
PARAMETERS = ("A", "B") + NONLINEAR


class PowerOrderWarning(UserWarning):
    """Component powers are not strictly decreasing."""


@dataclass(frozen=True)
class ChirpComponent:
    """One chirp component ``A cos(phi) + B sin(phi)``.

    ``phi = alpha*m + beta*m**2 + gamma*n + delta*n**2``. The nonlinear
    parameters are expected in ``(0, pi)``; see :meth:`in_domain`.
    """

    A: float
    B: float
    alpha: float
    beta: float
    gamma: float
    delta: float

    @property
    def power(self) -> float:
        return self.A * self.A + self.B * self.B

    @property
    def col_pair(self) -> tuple[float, float]:
        return (self.alpha, self.beta)

    @property
    def row_pair(self) -> tuple[float, float]:
        return (self.gamma, self.delta)

    def in_domain(self) -> bool:
        return all(0.0 < getattr(self, k) < math.pi for k in NONLINEAR)

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, k) for k in PARAMETERS)

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in PARAMETERS}

    @classmethod
    def from_dict(cls, d: dict) -> "ChirpComponent":
        missing = [k for k in PARAMETERS if k not in d]
        if missing:
            raise ValueError(f"component is missing fields {missing}")
        return cls(**{k: float(d[k]) for k in PARAMETERS})


@dataclass(frozen=True)
class NoiseSpec:
    """i.i.d. additive noise. ``sigma == 0`` means noiseless synthesis."""

    sigma: float = 0.0
    seed: int = 0
    distribution: str = "gaussian"

    def __post_init__(self):
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.distribution != "gaussian":
            raise ValueError(f"unsupported noise distribution {self.distribution!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class ModelSpec:
    """Ordered chirp components plus the noise that contaminates them."""

    components: tuple[ChirpComponent, ...]
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        comps = self.components
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                if comps[i].col_pair == comps[j].col_pair or comps[i].row_pair == comps[j].row_pair:
                    raise ValueError(
                        f"components {i} and {j} share a nonlinear pair; "
                        "they are not separately identifiable"
                    )
        powers = [c.power for c in comps]
        if any(b >= a for a, b in zip(powers, powers[1:])):
            warnings.warn(
                f"component powers {powers} are not strictly decreasing; the "
                "sequential estimator may extract them out of order",
                PowerOrderWarning,
                stacklevel=3,
            )

    @property
    def p(self) -> int:
        return len(self.components)

    def with_noise(self, sigma: float | None = None, seed: int | None = None) -> "ModelSpec":
        noise = NoiseSpec(
            sigma=self.noise.sigma if sigma is None else sigma,
            seed=self.noise.seed if seed is None else seed,
            distribution=self.noise.distribution,
        )
        return ModelSpec(self.components, noise)

    def to_dict(self) -> dict:
        return {
            "components": [c.to_dict() for c in self.components],
            "noise": {"sigma": float(self.noise.sigma), "seed": int(self.noise.seed)},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        if "components" not in d:
            raise ValueError("model spec needs a 'components' array")
        noise = d.get("noise", {})
        return cls(
            tuple(ChirpComponent.from_dict(c) for c in d["components"]),
            NoiseSpec(
                sigma=float(noise.get("sigma", 0.0)),
                seed=int(noise.get("seed", 0)),
                distribution=noise.get("distribution", "gaussian"),
            ),
        )

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


def phase(c, m, n):
    """Phase ``alpha*m + beta*m**2 + gamma*n + delta*n**2`` at 1-based ``(m, n)``.

    Broadcasts over array-valued ``m`` and ``n``.
    """
    return c.alpha * m + c.beta * m * m + c.gamma * n + c.delta * n * n


def _index_axes(M: int, N: int):
    m = np.arange(1, M + 1, dtype=float)[:, None]
    n = np.arange(1, N + 1, dtype=float)[None, :]
    return m, n


def phase_grid(c, M: int, N: int) -> np.ndarray:
    m, n = _index_axes(M, N)
    return phase(c, m, n)


def component_grid(c: ChirpComponent, M: int, N: int) -> np.ndarray:
    """Noiseless ``(M, N)`` grid of a single component."""
    ph = phase_grid(c, M, N)
    return c.A * np.cos(ph) + c.B * np.sin(ph)


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for ``seed`` and an optional stream key.

    Streams are derived with :class:`numpy.random.SeedSequence` using the key
    as ``spawn_key``, so ``make_rng(s, i, j, r)`` gives statistically
    independent streams for distinct keys and is identical across platforms.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def _check_size(M: int, N: int, minimum: int = 4):
    if M <= 0 or N <= 0:
        raise ValueError(f"grid dimensions must be positive, got {M}x{N}")
    if M < minimum or N < minimum:
        raise ValueError(f"grid must be at least {minimum}x{minimum}, got {M}x{N}")


def add_noise(grid: np.ndarray, noise: NoiseSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Return ``grid`` plus i.i.d. N(0, sigma^2) draws.

    The draws come from ``rng`` when given, otherwise from ``make_rng(noise.seed)``.
    """
    grid = np.asarray(grid, dtype=float)
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid contains non-finite entries")
    if noise.sigma == 0:
        return grid.copy()
    if rng is None:
        rng = make_rng(noise.seed)
    return grid + noise.sigma * rng.standard_normal(grid.shape)


def synthesize(
    spec: ModelSpec, M: int, N: int, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Sum of all components on an ``(M, N)`` grid plus noise from ``spec.noise``."""
    _check_size(M, N)
    if not spec.components:
        raise ValueError("model spec has no components")
    y = np.zeros((M, N))
    for c in spec.components:
        y += component_grid(c, M, N)
    return add_noise(y, spec.noise, rng)


def single_chirp() -> ModelSpec:
    """One-component benchmark: A=2, B=3, (1.5, 0.5) in m, (2.5, 0.75) in n."""
    return ModelSpec((ChirpComponent(2.0, 3.0, 1.5, 0.5, 2.5, 0.75),))


def two_chirps() -> ModelSpec:
    """Two-component benchmark with powers 41 and 13."""
    return ModelSpec(
        (
            ChirpComponent(5.0, 4.0, 2.1, 0.1, 1.25, 0.25),
            ChirpComponent(3.0, 2.0, 1.5, 0.5, 1.75, 0.75),
        )
    )


def texture_chirps() -> ModelSpec:
    """Five-component synthetic texture with geometrically fading amplitudes."""
    rows: Sequence[tuple[float, ...]] = (
        (6.0, 6.0, 2.75, 0.05, 2.5, 0.075),
        (2.0, 2.0, 1.75, 0.01, 1.5, 0.025),
        (1.0, 1.0, 1.5, 0.15, 2.0, 0.25),
        (0.5, 0.5, 1.75, 0.75, 2.75, 0.275),
        (0.1, 0.1, 1.95, 0.95, 2.95, 0.295),
    )
    return ModelSpec(tuple(ChirpComponent(*r) for r in rows))

