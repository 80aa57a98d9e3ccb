"""Girsanov density of a drifted fBm path and the fOU drift estimator.

For ``X_t = x0 + int_0^t b(X_s) ds + W^H_t`` the density of the law of ``X``
with respect to the law of ``x0 + W^H`` is

    phi = exp( int beta' dB^X - 1/2 int beta'^2 dt ),

where ``beta'`` is the drift pipeline applied to ``xi_s = b(X_s)`` and ``B^X``
is the innovation transform of ``X - x0``. Sums are Ito sums with left
endpoints.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import PreconditionError, SampledPath, TimeGrid, as_hurst
from .fbm_sim import RngSeed, _as_seed, fbm_paths_circulant
from .transform import _singular_beta, drift_pipeline, drift_values, forward_values

LOG_CLAMP = 700.0
DEGENERATE_INFORMATION = 1e-14
_BATCH = 500


class GridMismatchError(ValueError):
    pass


class DegenerateError(ArithmeticError):
    """The likelihood is flat (no information about the parameter)."""


class DensityOverflowWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class DriftSpec:
    """State-dependent drift ``b(x) = rho (m - x)``; ``rho = 0`` is the zero drift."""

    rho: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        for name in ("rho", "m"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def is_zero(self) -> bool:
        return self.rho == 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.is_zero:
            return np.zeros_like(x)
        return self.rho * (self.m - x)

    @classmethod
    def parse(cls, text: str) -> "DriftSpec":
        """``"zero"`` or ``"fou:rho,m"``."""
        text = text.strip()
        if text == "zero":
            return cls()
        if text.startswith("fou:"):
            parts = text[4:].split(",")
            if len(parts) == 2:
                try:
                    return cls(float(parts[0]), float(parts[1]))
                except ValueError:
                    pass
        raise ValueError(f"drift must be 'zero' or 'fou:rho,m', got {text!r}")

    def __str__(self) -> str:
        return "zero" if self.is_zero else f"fou:{self.rho!r},{self.m!r}"


@dataclass(frozen=True)
class DensityReport:
    logDensity: float
    itoSum: float
    l2NormSq: float
    singularFlag: bool = False

    @property
    def density(self) -> float:
        return math.exp(min(max(self.logDensity, -LOG_CLAMP), LOG_CLAMP))


@dataclass(frozen=True)
class MleReport:
    rhoHat: float
    score: float
    information: float
    logLikAtHat: float


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with standard error; unpacks as ``(mean, stderr)``."""

    mean: float
    stderr: float
    n_paths: int
    clamped: bool = False

    def __iter__(self):
        return iter((self.mean, self.stderr))


def _check_same_grid(a: SampledPath, b: SampledPath):
    if a.grid != b.grid:
        raise GridMismatchError(f"paths live on different grids: {a.grid} vs {b.grid}")


def ito_terms(beta_p: np.ndarray, B: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """``(sum beta'_i dB_i, sum beta'_i^2 dt)`` over the last axis, left endpoints."""
    left = beta_p[..., :-1]
    return np.sum(left * np.diff(B, axis=-1), axis=-1), np.sum(left * left, axis=-1) * dt


def log_density(betaPrime: SampledPath, B: SampledPath) -> DensityReport:
    """Girsanov exponent ``sum beta' dB - 1/2 sum beta'^2 dt``."""
    _check_same_grid(betaPrime, B)
    if B.values[0] != 0:
        raise PreconditionError("B must start at 0")
    ito, l2 = ito_terms(betaPrime.values, B.values, B.grid.dt)
    ito, l2 = float(ito), float(l2)
    return DensityReport(ito - 0.5 * l2, ito, l2, _singular_beta(betaPrime.values))


def _start_check(X: SampledPath, x0: float):
    if X.values[0] != x0:
        raise PreconditionError(f"path starts at {X.values[0]!r}, expected x0 = {x0!r}")


def density_for_drifted_path(X: SampledPath, b: Callable, H, x0: float) -> DensityReport:
    """Log-likelihood of ``X`` under drift ``b`` relative to driftless fBm from ``x0``.

    ``beta'`` is the gamma-drift of ``b`` along ``X`` and the integrator is the
    innovation transform of ``X - x0``.
    """
    H = as_hurst(H)
    _start_check(X, x0)
    xi = np.broadcast_to(np.asarray(b(X.values), dtype=np.float64), X.values.shape)
    bundle = drift_pipeline(SampledPath(X.grid, xi), H)
    _, _, BX = forward_values(X.values - x0, X.grid, H)
    rep = log_density(bundle.betaPrime, SampledPath(X.grid, BX))
    return DensityReport(rep.logDensity, rep.itoSum, rep.l2NormSq, bool(rep.singularFlag or bundle.singular))


def fou_score(X: SampledPath, m: float, x0: float, H) -> tuple[float, float]:
    """``(sum l dB^X, sum l^2 dt)`` with ``l`` the pipeline image of ``m - X``."""
    H = as_hurst(H)
    _start_check(X, x0)
    ell = drift_values(m - X.values, X.grid, H)["beta_prime"]
    _, _, BX = forward_values(X.values - x0, X.grid, H)
    score, info = ito_terms(ell, BX, X.grid.dt)
    return float(score), float(info)


def fou_mle(X: SampledPath, m: float, x0: float, H) -> MleReport:
    """Closed-form maximiser of ``rho*score - rho^2/2*information``.

    The pipeline is linear, so ``beta'(rho) = rho * l`` and the log-likelihood
    is an exact parabola in ``rho``.
    """
    score, info = fou_score(X, m, x0, H)
    if not info > DEGENERATE_INFORMATION:
        raise DegenerateError(f"information {info:.3g} <= {DEGENERATE_INFORMATION:g}; path is flat at m")
    return MleReport(score / info, score, info, score * score / (2.0 * info))


# --------------------------------------------------------------------------
# Monte Carlo


def batch_log_density(X: np.ndarray, grid: TimeGrid, H, b: Callable, x0: float) -> np.ndarray:
    """Log densities for a batch of drifted-model paths (rows of ``X``)."""
    H = as_hurst(H)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    xi = np.broadcast_to(np.asarray(b(X), dtype=np.float64), X.shape)
    beta_p = drift_values(xi, grid, H)["beta_prime"]
    _, _, BX = forward_values(X - x0, grid, H)
    ito, l2 = ito_terms(beta_p, BX, grid.dt)
    return ito - 0.5 * l2


def _batched_log_density(H, b, x0, grid, n_paths, seed):
    seed = _as_seed(seed)
    out = np.empty(n_paths)
    WT = np.empty(n_paths)
    for start in range(0, n_paths, _BATCH):
        k = min(_BATCH, n_paths - start)
        W = fbm_paths_circulant(grid, H, RngSeed(seed.seed, seed.stream + start), k)
        out[start : start + k] = batch_log_density(x0 + W, grid, H, b, x0)
        WT[start : start + k] = W[:, -1]
    return out, WT


def _estimate(samples: np.ndarray, clamped: bool) -> McEstimate:
    n = samples.shape[0]
    mean = float(np.sum(samples) / n)  # numpy's pairwise sum: fixed order for fixed n
    stderr = float(np.sqrt(np.sum((samples - mean) ** 2) / (n - 1) / n))
    return McEstimate(mean, stderr, n, clamped)


def _phi(logd: np.ndarray) -> tuple[np.ndarray, bool]:
    clamped = bool(np.any(np.abs(logd) > LOG_CLAMP))
    if clamped:
        warnings.warn(f"|log density| exceeded {LOG_CLAMP:g}; values clamped", DensityOverflowWarning, stacklevel=3)
    return np.exp(np.clip(logd, -LOG_CLAMP, LOG_CLAMP)), clamped


def mc_density_normalization(H, b: Callable, x0: float, grid: TimeGrid, nPaths: int, seed) -> McEstimate:
    """Mean and standard error of ``phi`` over driftless paths ``x0 + W^H``.

    Under equivalence of the two laws the true mean is 1. Path ``k`` uses RNG
    stream ``seed.stream + k`` whatever the batch size.
    """
    if nPaths < 100:
        raise ValueError(f"need at least 100 paths, got {nPaths}")
    logd, _ = _batched_log_density(as_hurst(H), b, x0, grid, nPaths, seed)
    phi, clamped = _phi(logd)
    return _estimate(phi, clamped)


def mc_weighted_terminal_mean(H, b: Callable, x0: float, grid: TimeGrid, nPaths: int, seed) -> McEstimate:
    """``E[X_T phi]`` under the driftless law, with ``X = x0 + W^H``.

    By the change of measure this estimates ``E[X_T]`` under the drifted model.
    """
    if nPaths < 2:
        raise ValueError("need at least 2 paths")
    logd, WT = _batched_log_density(as_hurst(H), b, x0, grid, nPaths, seed)
    phi, clamped = _phi(logd)
    return _estimate((x0 + WT) * phi, clamped)
