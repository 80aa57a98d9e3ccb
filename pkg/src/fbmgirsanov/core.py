"""Parameter types, grid/path containers and the transform constants.

Everything downstream works on a uniform grid ``t_i = i*T/n`` and carries
sampled paths as float64 arrays of length ``n + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gamma


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(ValueError):
    """A sampled path violates a documented precondition (e.g. nonzero start)."""


def norros_constants(H: float) -> tuple[float, float, float]:
    """Return ``(c_H, c_1, c_2)`` for Hurst exponent ``H``.

    c_H = sqrt(2H Γ(3/2-H) / (Γ(H+1/2) Γ(2-2H)))
    c_1 = 1 / (2H Γ(3/2-H) Γ(H+1/2))
    c_2 = c_H / (2H (2-2H)^{1/2})
    """
    H = float(H)
    if not 0.0 < H < 1.0:
        raise DomainError(f"Hurst exponent must lie in (0, 1), got {H!r}")
    g_a = gamma(1.5 - H)
    g_b = gamma(H + 0.5)
    c_H = np.sqrt(2.0 * H * g_a / (g_b * gamma(2.0 - 2.0 * H)))
    c_1 = 1.0 / (2.0 * H * g_a * g_b)
    c_2 = c_H / (2.0 * H * np.sqrt(2.0 - 2.0 * H))
    return float(c_H), float(c_1), float(c_2)


@dataclass(frozen=True)
class HurstParam:
    """Validated Hurst exponent with the derived transform constants."""

    H: float

    def __post_init__(self):
        H = float(self.H)
        if not (0.0 < H < 1.0) or not np.isfinite(H):
            raise DomainError(f"Hurst exponent must lie in (0, 1), got {self.H!r}")
        object.__setattr__(self, "H", H)

    @cached_property
    def constants(self) -> tuple[float, float, float]:
        return norros_constants(self.H)

    @property
    def cH(self) -> float:
        return self.constants[0]

    @property
    def c1(self) -> float:
        return self.constants[1]

    @property
    def c2(self) -> float:
        return self.constants[2]

    @property
    def is_brownian(self) -> bool:
        return self.H == 0.5


def as_hurst(H) -> HurstParam:
    return H if isinstance(H, HurstParam) else HurstParam(H)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of ``[0, T]`` into ``n`` steps."""

    n: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"step count must be a positive integer, got {self.n!r}")
        if not (np.isfinite(self.T) and self.T > 0):
            raise DomainError(f"horizon must be positive and finite, got {self.T!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "T", float(self.T))

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.dt


@dataclass(frozen=True)
class SampledPath:
    """A real function sampled at the nodes of a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] != self.grid.n + 1:
            raise ValueError(
                f"expected {self.grid.n + 1} values for grid with n={self.grid.n}, "
                f"got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("sampled path contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def __len__(self) -> int:
        return self.values.shape[0]

    def shifted(self, c: float) -> "SampledPath":
        return SampledPath(self.grid, self.values + c)

    @classmethod
    def from_function(cls, grid: TimeGrid, f) -> "SampledPath":
        return cls(grid, f(grid.nodes))


def fbm_covariance(s, t, H) -> np.ndarray | float:
    """Covariance ``E[W^H_s W^H_t] = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2``.

    Broadcasts over array arguments.
    """
    H = as_hurst(H).H
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("fBm covariance is defined for nonnegative times only")
    h2 = 2.0 * H
    out = 0.5 * (s**h2 + t**h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def covariance_matrix(grid: TimeGrid, H) -> np.ndarray:
    """Covariance of ``(W^H_{t_1}, ..., W^H_{t_n})`` (the t_0 = 0 row is dropped)."""
    t = grid.nodes[1:]
    return fbm_covariance(t[:, None], t[None, :], H)
