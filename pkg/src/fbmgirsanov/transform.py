"""Kernel transforms between fBm and its innovation Brownian motion, and the drift pipeline.

Given an fBm path ``W`` (or a drifted path ``X``) on a uniform grid,
``forward_transform`` produces

    Y_t = int_0^t s^(1/2-H) dW_s,
    M_t = int_0^t w(t, s) dW_s,          w(t, s) = c_1 s^(1/2-H) (t-s)^(1/2-H),
    B_t = (2H/c_H) int_0^t s^(H-1/2) dM_s,

and ``reconstruct_fbm`` maps ``B`` back through the kernel ``zeta``. Every
pathwise integral is a product-integration sum: exact kernel averages on each
cell times the increment of the integrator over that cell. ``B`` also gets a
short banded correction (see :func:`innovation_correction`) so that its
increments are uncorrelated with the recent past, as an innovation must be.

``drift_pipeline`` applies the same kernels to an absolutely continuous drift
``xi`` and returns ``eta``, ``mu``, ``mu'`` and the Brownian drift ``beta'``
that enters the Girsanov exponent.

All ``*_values`` functions take arrays whose last axis is time, so a whole
Monte Carlo batch is transformed with one matrix product.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import betainc, gamma, roots_jacobi, roots_legendre

from .core import DomainError, HurstParam, PreconditionError, SampledPath, TimeGrid, as_hurst
from .fbm_sim import increment_autocovariance
from .fraccalc import SingularMomentTable, singular_moment, table_cache, three_point_derivative


class QuadratureWarning(RuntimeWarning):
    pass


class SingularDriftWarning(RuntimeWarning):
    """beta' is large near t = 0 compared with its typical size."""


@dataclass(frozen=True)
class TransformBundle:
    H: HurstParam
    Y: SampledPath
    M: SampledPath
    B: SampledPath


@dataclass(frozen=True)
class DriftBundle:
    H: HurstParam
    xi: SampledPath
    eta: SampledPath
    mu: SampledPath
    muPrime: SampledPath
    betaPrime: SampledPath
    l2NormSq: float
    singular: bool = False

    @property
    def beta(self) -> SampledPath:
        """``beta_t = sum of beta' dt`` over the cells left of ``t``."""
        b = np.zeros_like(self.betaPrime.values)
        b[1:] = np.cumsum(self.betaPrime.values[:-1]) * self.xi.grid.dt
        return SampledPath(self.xi.grid, b)


# --------------------------------------------------------------------------
# kernels


def kernel_w(t, s, H):
    """``w(t, s) = c_1 s^(1/2-H) (t-s)^(1/2-H)`` for ``0 < s < t``."""
    H = as_hurst(H)
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if np.any(s <= 0) or np.any(s >= t):
        if H.H > 0.5:
            raise DomainError("w(t, s) is singular at s = 0 and s = t for H > 1/2")
        if np.any(s < 0) or np.any(s > t):
            raise DomainError("w(t, s) needs 0 <= s <= t")
    a = 0.5 - H.H
    out = H.c1 * s**a * (t - s) ** a
    return float(out) if out.ndim == 0 else out


def _zeta_tail(x, one_minus_x, d):
    """``G(x) = int_x^1 y^(-1-2d) (1-y)^d dy`` via the incomplete Beta function."""
    p = -2.0 * d
    if d < 0:
        return beta_fn(p, d + 1.0) * betainc(d + 1.0, p, one_minus_x)
    # p < 0: integrate by parts once to reach positive Beta parameters
    return -(x**p) * one_minus_x**d / p + (d / p) * beta_fn(p + 1.0, d) * betainc(
        d, p + 1.0, one_minus_x
    )


def zeta_closed_form(t, s, H):
    """Reconstruction kernel ``zeta(t, s)`` through incomplete Beta functions.

    Uses ``zeta(t, s) = c_H t^d [x^-d (1-x)^d - d x^d G(x)]`` with ``x = s/t`` and
    ``d = H - 1/2``. Vectorised; this is what :func:`reconstruct_fbm` evaluates.
    """
    H = as_hurst(H)
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if np.any(s <= 0) or np.any(s >= t):
        raise DomainError("zeta(t, s) needs 0 < s < t")
    d = H.H - 0.5
    if d == 0.0:
        return np.ones(np.broadcast(t, s).shape) if np.ndim(t) or np.ndim(s) else 1.0
    x = s / t
    omx = (t - s) / t
    out = H.cH * t**d * (x ** (-d) * omx**d - d * x**d * _zeta_tail(x, omx, d))
    return float(out) if np.ndim(out) == 0 else out


def _zeta_inner_gj(t, s, d, nodes):
    # int_s^t u^(d-1) (u-s)^d du with u = s + v (t-s); Gauss-Jacobi weight v^d on (0, 1)
    x, w = roots_jacobi(nodes, 0.0, d)
    v = 0.5 * (x + 1.0)
    w = w * 2.0 ** (-d - 1.0)
    t = np.asarray(t, dtype=np.float64)[..., None]
    s = np.asarray(s, dtype=np.float64)[..., None]
    return (t - s)[..., 0] ** (d + 1.0) * np.sum(w * (s + v * (t - s)) ** (d - 1.0), axis=-1)


def kernel_zeta(t, s, H, nodes: int = 32):
    """``zeta(t, s)`` with the inner integral by ``nodes``-point Gauss-Jacobi.

    zeta(t,s) = c_H [ (t/s)^d (t-s)^d - d s^-d int_s^t u^(d-1) (u-s)^d du ],  d = H - 1/2.

    Warns with :class:`QuadratureWarning` if doubling the node count moves the
    result by more than 1e-8 relative (this happens when ``s << t``, where the
    integrand is nearly singular at the left end).
    """
    H = as_hurst(H)
    if nodes < 8:
        raise ValueError(f"need at least 8 quadrature nodes, got {nodes}")
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if np.any(s <= 0) or np.any(s >= t):
        raise DomainError("zeta(t, s) needs 0 < s < t")
    d = H.H - 0.5
    lead = (t / s) ** d * (t - s) ** d
    if d == 0.0:
        out = H.cH * lead
        return float(out) if out.ndim == 0 else out
    J = _zeta_inner_gj(t, s, d, nodes)
    J2 = _zeta_inner_gj(t, s, d, 2 * nodes)
    out = H.cH * (lead - d * s ** (-d) * J)
    out2 = H.cH * (lead - d * s ** (-d) * J2)
    if np.any(np.abs(out2 - out) > 1e-8 * np.abs(out2)):
        warnings.warn(
            f"zeta quadrature with {nodes} nodes not converged to 1e-8", QuadratureWarning, stacklevel=2
        )
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# weight tables


def _cell_power_average(grid: TimeGrid, p: float) -> np.ndarray:
    """Mean of ``s^p`` over each cell ``[t_i, t_{i+1}]``."""
    i = np.arange(grid.n, dtype=np.float64)
    return grid.dt**p * ((i + 1.0) ** (p + 1.0) - i ** (p + 1.0)) / (p + 1.0)


_ZETA_HEAD_CELLS = 8
_ZETA_HEAD_NODES = 16


def _zeta_head_averages(n: int, H: HurstParam) -> np.ndarray:
    """Weights for the first cells ``[j, j+1]`` of every row (unit grid).

    ``zeta(t, s)`` blows up like ``s^-|d|`` at ``s = 0``, so the midpoint rule
    is replaced near the origin. On cell 0 the increment of ``B`` produced by
    :func:`forward_values` is spread with density ``(1+a) s^a`` (``a = 1/2-H``),
    and the weight is the integral of ``zeta`` against that density
    (Gauss-Jacobi, weight ``s^(a-|d|)``). Cells 1..7 use Gauss-Legendre means.
    """
    d = H.H - 0.5
    a = -d
    c = -abs(d)
    m = min(_ZETA_HEAD_CELLS, n)
    out = np.zeros((n, m))
    if n < 2:
        return out
    e = a + c
    xj, wj = roots_jacobi(_ZETA_HEAD_NODES, 0.0, e)
    v0 = 0.5 * (xj + 1.0)
    w0 = wj * 2.0 ** (-e - 1.0)
    k = np.arange(2, n + 1, dtype=np.float64)[:, None]
    out[1:, 0] = (1.0 + a) * np.sum(w0 * zeta_closed_form(k, v0, H) * v0 ** (-c), axis=-1)
    xl, wl = roots_legendre(_ZETA_HEAD_NODES)
    vl, wl = 0.5 * (xl + 1.0), 0.5 * wl
    for j in range(1, m):
        rows = np.arange(j + 1, n + 1)
        out[rows - 1, j] = np.sum(wl * zeta_closed_form(rows[:, None].astype(float), j + vl, H), axis=-1)
    return out


def _unit_zeta_table(n: int, H: HurstParam) -> np.ndarray:
    d = H.H - 0.5
    Z = np.zeros((n, n))
    for k in range(2, n + 1):
        s = np.arange(k - 1, dtype=np.float64) + 0.5
        Z[k - 1, : k - 1] = zeta_closed_form(float(k), s, H)
    head = _zeta_head_averages(n, H)
    mask = np.tril(np.ones_like(head, dtype=bool), -1)
    Z[:, : head.shape[1]][mask] = head[mask]
    # Last cell: the leading power (t-s)^d is integrated exactly against the
    # profile (s - t_{k-1})^(-d) that a fresh increment gives B inside its own
    # cell; (t/s)^d and the bounded correction term sit at the midpoint.
    k = np.arange(1, n + 1, dtype=np.float64)
    sm = k - 0.5
    x, omx = sm / k, 0.5 / k
    Z[np.arange(n), np.arange(n)] = H.cH * (
        (k / sm) ** d * gamma(2.0 - d) * gamma(1.0 + d) - d * k**d * x**d * _zeta_tail(x, omx, d)
    )
    return Z


def zeta_table(grid: TimeGrid, H) -> np.ndarray:
    """``Z[k-1, i]``: average of ``zeta(t_k, .)`` over cell ``i`` (midpoint rule)."""
    H = as_hurst(H)
    key = ("zeta", grid.n, H.H)

    def build():
        Z = _unit_zeta_table(grid.n, H)
        Z.setflags(write=False)
        return Z

    return grid.dt ** (H.H - 0.5) * table_cache.get(key, build)


# --------------------------------------------------------------------------
# path transforms (array level)


def _check_start(values, what="path"):
    if np.any(np.asarray(values)[..., 0] != 0):
        raise PreconditionError(f"{what} must start at 0")


def forward_values(W: np.ndarray, grid: TimeGrid, H) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(Y, M, B)`` for paths ``W`` (last axis time, length n+1)."""
    H = as_hurst(H)
    W = np.asarray(W, dtype=np.float64)
    _check_start(W)
    if H.is_brownian:
        return W.copy(), W.copy(), W.copy()
    a = 0.5 - H.H
    rate = np.diff(W, axis=-1) / grid.dt
    Y = np.zeros_like(W)
    Y[..., 1:] = np.cumsum(_cell_power_average(grid, a) * grid.dt * rate, axis=-1)
    M = H.c1 * SingularMomentTable(grid, a, a).apply(rate)
    B = np.zeros_like(W)
    B[..., 1:] = (2.0 * H.H / H.cH) * np.cumsum(_b_weights(grid, a) * np.diff(M, axis=-1), axis=-1)
    dW = np.diff(W, axis=-1)
    c = innovation_correction(H) * grid.dt**a
    for m in range(1, min(c.size, grid.n) + 1):
        B[..., m:] += c[m - 1] * dW[..., : grid.n - m + 1]
    return Y, M, B


def _b_weights(grid: TimeGrid, a: float) -> np.ndarray:
    """Per-cell weights turning increments of M into increments of B.

    Mean of ``s^-a`` on each cell, except cell 0, where M grows exactly like
    ``t^(2a+1)`` (only the first increment of the path has acted yet) and the
    integral of ``s^-a dM_s`` is done against that profile.
    """
    w = _cell_power_average(grid, -a)
    w[0] = grid.dt ** (-a) * (2.0 * a + 1.0) / (a + 1.0)
    return w


INNOVATION_BAND = 32
_REFERENCE_ROW = 4096


@lru_cache(maxsize=32)
def _innovation_correction(H: float, band: int) -> np.ndarray:
    Hp = as_hurst(H)
    a = 0.5 - Hp.H
    K = _REFERENCE_ROW
    i = np.arange(K + 1, dtype=np.float64)
    row_k = np.zeros(K + 1)
    row_k[:K] = singular_moment(a, a, i[:K], i[:K] + 1.0, float(K))
    row_k1 = singular_moment(a, a, i, i + 1.0, float(K + 1))
    w = ((K + 1.0) ** (1.0 - a) - K ** (1.0 - a)) / (1.0 - a)
    d = (2.0 * Hp.H / Hp.cH) * w * Hp.c1 * (row_k1 - row_k)  # dB_K against dW_0..dW_K
    j = np.arange(1, band + 1)
    cov = np.array([d @ increment_autocovariance(i - (K - jj), Hp.H) for jj in j])
    A = increment_autocovariance(j[:, None] + 1 - j[None, :], Hp.H) - increment_autocovariance(
        j[:, None] - j[None, :], Hp.H
    )
    c = np.linalg.solve(A, -cov)
    c.setflags(write=False)
    return c


def innovation_correction(H, band: int = INNOVATION_BAND) -> np.ndarray:
    """Coefficients ``c_m`` of the local correction ``B_k += sum_m c_m dt^(1/2-H) dW_{k-m}``.

    Product integration leaves each increment of ``B`` weakly correlated
    (about 1% at H = 0.3) with the few increments of ``W`` just before it;
    the continuous innovation is independent of its past. The ``c_m`` cancel
    those correlations at lags ``1..band`` far from ``t = 0`` (unit grid, row
    4096) under the fBm law. They depend on ``H`` only, the correction is
    ``O(dt^H)`` at every node and does not accumulate along the path. Without
    it an Ito sum against ``B`` picks up a spurious drift that does not vanish
    under refinement.
    """
    H = as_hurst(H)
    if H.is_brownian:
        return np.zeros(band)
    return _innovation_correction(H.H, int(band))


def reconstruct_values(B: np.ndarray, grid: TimeGrid, H) -> np.ndarray:
    H = as_hurst(H)
    B = np.asarray(B, dtype=np.float64)
    _check_start(B)
    if H.is_brownian:
        return B.copy()
    out = np.zeros_like(B)
    out[..., 1:] = np.diff(B, axis=-1) @ zeta_table(grid, H).T
    return out


def m_from_y_values(Y: np.ndarray, grid: TimeGrid, H) -> np.ndarray:
    """``M_t = c_1 int_0^t (t-s)^(1/2-H) dY_s`` by product integration in ``dY``.

    Inside a cell ``dY_s = s^(1/2-H) dW_s`` with ``dW`` spread uniformly (the
    convention of :func:`forward_values`), so each increment of ``Y`` carries
    the profile ``s^(1/2-H)`` and the kernel is integrated exactly against it.
    """
    H = as_hurst(H)
    Y = np.asarray(Y, dtype=np.float64)
    _check_start(Y, "Y")
    if H.is_brownian:
        return Y.copy()
    a = 0.5 - H.H
    density = np.diff(Y, axis=-1) / (_cell_power_average(grid, a) * grid.dt)
    return H.c1 * SingularMomentTable(grid, a, a).apply(density)


def drift_values(xi: np.ndarray, grid: TimeGrid, H) -> dict:
    """Drift pipeline on arrays; see :func:`drift_pipeline`."""
    H = as_hurst(H)
    xi = np.asarray(xi, dtype=np.float64)
    dt = grid.dt
    left = xi[..., :-1]
    if H.is_brownian:
        eta = np.zeros_like(xi)
        eta[..., 1:] = np.cumsum(left, axis=-1) * dt
        mu_p = xi.copy()
        beta_p = xi.copy()
        out = dict(eta=eta, mu=eta.copy(), mu_prime=mu_p, beta_prime=beta_p)
    else:
        a = 0.5 - H.H
        eta = SingularMomentTable(grid, a, 0.0).apply(left)
        mu = H.c1 * SingularMomentTable(grid, a, a).apply(left)
        if H.H < 0.5:
            mu_p = H.c1 * (0.5 - H.H) * SingularMomentTable(grid, a, -H.H - 0.5).apply(left)
        else:
            mu_p = three_point_derivative(mu, dt)
        beta_p = np.empty_like(xi)
        beta_p[..., 1:] = (2.0 * H.H / H.cH) * grid.nodes[1:] ** (-a) * mu_p[..., 1:]
        # t_0: first-cell mean of the leading-order term kappa * xi_0 * t^(1/2-H),
        # which depends on xi_0 only (keeps the Ito sum adapted)
        beta_p[..., 0] = constant_drift_beta_coefficient(H) * xi[..., 0] * dt**a / (a + 1.0)
        out = dict(eta=eta, mu=mu, mu_prime=mu_p, beta_prime=beta_p)
    out["l2"] = np.sum(out["beta_prime"][..., :-1] ** 2, axis=-1) * dt
    return out


def eta_from_mu_values(mu: np.ndarray, grid: TimeGrid, H) -> np.ndarray:
    """Right side of ``eta_t = 2H int_0^t (t-s)^(H-1/2) mu'_s ds``.

    ``mu'`` enters through its exact cell means ``(mu_{i+1} - mu_i)/dt``, so
    the only error is the variation of ``mu'`` inside a cell.
    """
    H = as_hurst(H)
    mu = np.asarray(mu, dtype=np.float64)
    table = SingularMomentTable(grid, 0.0, H.H - 0.5)
    return 2.0 * H.H * table.apply(np.diff(mu, axis=-1) / grid.dt)


def constant_drift_beta_coefficient(H) -> float:
    """``kappa`` with ``beta'_t = kappa * t^(1/2-H)`` for the drift ``xi = 1``."""
    H = as_hurst(H)
    g = 1.5 - H.H
    return (2.0 * H.H / H.cH) * H.c1 * beta_fn(g, g) * (2.0 - 2.0 * H.H)


def _singular_beta(beta_p: np.ndarray) -> bool:
    if beta_p.shape[-1] < 3:
        return False
    med = np.median(np.abs(beta_p), axis=-1)
    return bool(np.any(np.abs(beta_p[..., 1]) > 1e3 * med))


# --------------------------------------------------------------------------
# SampledPath API


def forward_transform(W: SampledPath, H) -> TransformBundle:
    """Compute ``Y``, ``M`` and the innovation Brownian motion ``B`` from ``W``."""
    H = as_hurst(H)
    _check_start(W.values, "W")
    Y, M, B = forward_values(W.values, W.grid, H)
    g = W.grid
    return TransformBundle(H, SampledPath(g, Y), SampledPath(g, M), SampledPath(g, B))


def reconstruct_fbm(B: SampledPath, H) -> SampledPath:
    """Rebuild ``W_t = int_0^t zeta(t, s) dB_s`` from an innovation path."""
    _check_start(B.values, "B")
    return SampledPath(B.grid, reconstruct_values(B.values, B.grid, H))


def decompose_path(X: SampledPath, H) -> TransformBundle:
    """``(Y^X, M^X, B^X)`` for a drifted path started at 0.

    The transforms are linear, so for ``X = W + int xi`` this splits as
    ``B^X = B + beta`` up to discretisation error.
    """
    return forward_transform(X, H)


def drift_pipeline(xi: SampledPath, H) -> DriftBundle:
    """Carry a drift ``xi`` through ``eta``, ``mu``, ``mu'`` to ``beta'``.

    eta_t = int_0^t s^(1/2-H) xi_s ds
    mu_t  = int_0^t w(t, s) xi_s ds
    mu'   : H < 1/2  c_1 (1/2-H) int_0^t (t-s)^(-H-1/2) s^(1/2-H) xi_s ds
            H > 1/2  d/dt mu_t  (three-point differences)
    beta'_t = (2H/c_H) t^(H-1/2) mu'_t

    ``xi`` is frozen at left endpoints; the power weights are integrated
    exactly on each cell, so a constant drift is handled without error in
    ``eta`` and ``mu``. Warns with :class:`SingularDriftWarning` if
    ``|beta'(t_1)|`` exceeds 1000 times the median of ``|beta'|``.
    """
    H = as_hurst(H)
    r = drift_values(xi.values, xi.grid, H)
    singular = _singular_beta(r["beta_prime"])
    if singular:
        warnings.warn("beta' is large near t = 0; drift may not be square integrable",
                      SingularDriftWarning, stacklevel=2)
    g = xi.grid
    return DriftBundle(
        H=H,
        xi=xi,
        eta=SampledPath(g, r["eta"]),
        mu=SampledPath(g, r["mu"]),
        muPrime=SampledPath(g, r["mu_prime"]),
        betaPrime=SampledPath(g, r["beta_prime"]),
        l2NormSq=float(r["l2"]),
        singular=bool(singular or (H.H > 0.5 and xi.values[0] != 0)),
    )


def gamma_drift(path: SampledPath, b, H) -> SampledPath:
    """Brownian-level drift ``gamma(t, .)`` induced by the state drift ``b`` along ``path``.

    This is ``beta'`` from :func:`drift_pipeline` applied to ``xi_s = b(path_s)``.
    """
    xi = np.asarray(b(path.values), dtype=np.float64)
    xi = np.broadcast_to(xi, path.values.shape)
    return drift_pipeline(SampledPath(path.grid, xi), H).betaPrime
