"""Exact fractional Brownian motion sampling and the fractional OU process.

Two exact samplers are provided: a dense Cholesky factorisation of the fBm
covariance (O(n^3), n <= 4096) and Davies-Harte circulant embedding of the
stationary increment sequence (O(n log n), n a power of two).

Every path is driven by its own counter-based generator derived from
``(seed, stream)``; a batch of ``k`` paths starting at stream ``s`` uses
streams ``s, s+1, ..., s+k-1``, so Monte Carlo results do not depend on how
the batch is split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from .core import SampledPath, TimeGrid, as_hurst, covariance_matrix

logger = logging.getLogger(__name__)

CHOLESKY_MAX_N = 4096
EMBEDDING_TOL = 1e-8


class SamplerError(RuntimeError):
    """Raised when an exact sampler cannot be constructed for the request."""


@dataclass(frozen=True)
class RngSeed:
    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < 2**64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class FouParams:
    rho: float
    m: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        for name in ("rho", "m", "x0"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)


def _as_seed(seed) -> RngSeed:
    if isinstance(seed, RngSeed):
        return seed
    return RngSeed(int(seed))


def _normals(seed: RngSeed, n_paths: int, size: int) -> np.ndarray:
    out = np.empty((n_paths, size))
    for k in range(n_paths):
        out[k] = RngSeed(seed.seed, seed.stream + k).generator().standard_normal(size)
    return out


def increment_autocovariance(k, H, dt: float = 1.0) -> np.ndarray:
    """Autocovariance of fBm increments on a grid of spacing ``dt`` at lag ``k``."""
    H = as_hurst(H).H
    k = np.abs(np.asarray(k, dtype=np.float64))
    h2 = 2.0 * H
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2) * dt**h2


@lru_cache(maxsize=8)
def _cholesky_factor(n: int, T: float, H: float) -> np.ndarray:
    if n > CHOLESKY_MAX_N:
        raise SamplerError(f"Cholesky sampler is limited to n <= {CHOLESKY_MAX_N}, got {n}")
    cov = covariance_matrix(TimeGrid(n, T), H)
    try:
        L = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        # retry with a jitter far below the tolerance; a larger defect is a bug
        jitter = 1e-10 * np.max(np.diag(cov))
        try:
            L = linalg.cholesky(cov + jitter * np.eye(n), lower=True)
        except linalg.LinAlgError as exc:
            raise SamplerError("fBm covariance matrix is not positive definite") from exc
    L.setflags(write=False)
    return L


@lru_cache(maxsize=8)
def _circulant_sqrt_eigs(n: int, T: float, H: float) -> np.ndarray | None:
    gam = increment_autocovariance(np.arange(n + 1), H, T / n)
    row = np.concatenate([gam, gam[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -EMBEDDING_TOL * lam.max():
        return None
    lam = np.clip(lam, 0.0, None)
    out = np.sqrt(lam / (2 * n))
    out.setflags(write=False)
    return out


def fbm_paths_cholesky(grid: TimeGrid, H, seed, n_paths: int = 1) -> np.ndarray:
    """Array of shape ``(n_paths, n + 1)``; row ``k`` uses stream ``seed.stream + k``."""
    H = as_hurst(H)
    seed = _as_seed(seed)
    L = _cholesky_factor(grid.n, grid.T, H.H)
    Z = _normals(seed, n_paths, grid.n)
    out = np.zeros((n_paths, grid.n + 1))
    # row by row: a batched product may round differently with the batch size
    for k in range(n_paths):
        out[k, 1:] = L @ Z[k]
    return out


def fbm_paths_circulant(grid: TimeGrid, H, seed, n_paths: int = 1) -> np.ndarray:
    """Davies-Harte sampler, same layout as :func:`fbm_paths_cholesky`."""
    H = as_hurst(H)
    seed = _as_seed(seed)
    n = grid.n
    if n & (n - 1):
        raise SamplerError(f"circulant sampler needs a power-of-two step count, got {n}")
    sq = _circulant_sqrt_eigs(n, grid.T, H.H)
    if sq is None:
        if n <= CHOLESKY_MAX_N:
            logger.warning("circulant embedding not nonnegative; falling back to Cholesky")
            return fbm_paths_cholesky(grid, H, seed, n_paths)
        raise SamplerError("circulant embedding has negative eigenvalues")
    Z = _normals(seed, n_paths, 4 * n)
    xi = Z[:, : 2 * n] + 1j * Z[:, 2 * n :]
    incr = np.fft.fft(sq * xi, axis=-1).real[:, :n]
    out = np.zeros((n_paths, n + 1))
    np.cumsum(incr, axis=-1, out=out[:, 1:])
    return out


def sample_fbm_cholesky(grid: TimeGrid, H, seed) -> SampledPath:
    return SampledPath(grid, fbm_paths_cholesky(grid, H, seed, 1)[0])


def sample_fbm_circulant(grid: TimeGrid, H, seed) -> SampledPath:
    return SampledPath(grid, fbm_paths_circulant(grid, H, seed, 1)[0])


def euler_fou(noise: np.ndarray, p: FouParams, dt: float) -> np.ndarray:
    """Explicit Euler for ``X_t = x0 + rho*int_0^t (m - X_s) ds + noise_t``.

    ``noise`` holds driving paths (last axis = time, starting at 0). The
    drift integral is accumulated separately so that ``rho = 0`` returns
    ``x0 + noise`` bit for bit.
    """
    noise = np.asarray(noise, dtype=np.float64)
    drift = np.zeros(noise.shape)
    if p.rho != 0.0:
        d = drift[..., 0]
        for i in range(noise.shape[-1] - 1):
            d = d + p.rho * (p.m - (p.x0 + noise[..., i] + d)) * dt
            drift[..., i + 1] = d
    return p.x0 + noise + drift


def fou_paths(grid: TimeGrid, H, p: FouParams, seed, n_paths: int = 1) -> np.ndarray:
    W = fbm_paths_circulant(grid, H, seed, n_paths)
    return euler_fou(W, p, grid.dt)


def sample_fou(grid: TimeGrid, H, p: FouParams, seed) -> SampledPath:
    return SampledPath(grid, fou_paths(grid, H, p, seed, 1)[0])
