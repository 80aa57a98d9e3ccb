"""Product integration for weakly singular kernels and Riemann-Liouville calculus.

The workhorse is the moment

    int_lo^hi s^a (t - s)^b ds,        a, b > -1,

which is evaluated in closed form through the regularized incomplete Beta
function. On a uniform grid the moments over ``[t_i, t_{i+1}]`` for output
time ``t_k`` scale as ``dt^(a+b+1) * kappa(k, i)`` with ``kappa`` depending
only on integers, so one unit table serves every horizon.
"""

from __future__ import annotations

import warnings
from collections import OrderedDict

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import beta as beta_fn
from scipy.special import betainc, gamma, roots_legendre

from .core import DomainError, PreconditionError, SampledPath, TimeGrid


class SingularOutputWarning(RuntimeWarning):
    """Result grows without bound near t = 0 on the sampled grid."""


_GL_NODES = 10
_CACHE_BUDGET = 1.5e9  # bytes


class _TableCache:
    """LRU cache with a byte budget; dense tables at n = 8192 are 0.5 GB."""

    def __init__(self, budget: float):
        self.budget = budget
        self._items: OrderedDict = OrderedDict()

    def get(self, key, build):
        if key in self._items:
            self._items.move_to_end(key)
            return self._items[key]
        value = build()
        self._items[key] = value
        while len(self._items) > 1 and sum(v.nbytes for v in self._items.values()) > self.budget:
            self._items.popitem(last=False)
        return value

    def clear(self):
        self._items.clear()


table_cache = _TableCache(_CACHE_BUDGET)


def _check_exponents(a, b):
    if np.any(np.asarray(a) <= -1) or np.any(np.asarray(b) <= -1):
        raise DomainError(f"exponents must exceed -1 for integrability, got a={a}, b={b}")


def singular_moment(a: float, b: float, lo, hi, t):
    """Closed form of ``int_lo^hi s^a (t-s)^b ds`` for ``0 <= lo < hi <= t``.

    Broadcasts over ``lo``, ``hi`` and ``t``. Whichever tail of the
    incomplete Beta function is small is differenced, so short intervals next
    to either singular endpoint keep full relative precision.
    """
    _check_exponents(a, b)
    lo, hi, t = np.broadcast_arrays(*(np.asarray(x, dtype=np.float64) for x in (lo, hi, t)))
    if np.any(lo < 0) or np.any(hi <= lo) or np.any(hi > t):
        raise DomainError("need 0 <= lo < hi <= t")
    p, q = a + 1.0, b + 1.0
    z1, z2 = lo / t, hi / t
    w1, w2 = (t - lo) / t, (t - hi) / t
    left = betainc(p, q, np.minimum(z2, 0.5)) - betainc(p, q, np.minimum(z1, 0.5))
    right = betainc(q, p, np.minimum(w1, 0.5)) - betainc(q, p, np.minimum(w2, 0.5))
    out = t ** (a + b + 1.0) * beta_fn(p, q) * (left + right)
    return float(out) if out.ndim == 0 else out


def _unit_table(n: int, a: float, b: float) -> np.ndarray:
    """``K[k-1, i] = int_i^{i+1} u^a (k-u)^b du`` for ``1 <= k <= n``, ``i < k``."""
    K = np.zeros((n, n))
    if a == 0.0:
        d = np.arange(1, n + 1, dtype=np.float64)
        col = (d ** (b + 1.0) - (d - 1.0) ** (b + 1.0)) / (b + 1.0)
        for k in range(1, n + 1):
            K[k - 1, :k] = col[k - 1 :: -1]
        return K
    if b == 0.0:
        i = np.arange(n, dtype=np.float64)
        row = ((i + 1.0) ** (a + 1.0) - i ** (a + 1.0)) / (a + 1.0)
        return np.tril(np.broadcast_to(row, (n, n)))
    # interior cells are smooth (singularities at distance >= 1): Gauss-Legendre
    x, w = roots_legendre(_GL_NODES)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    idx = np.arange(n, dtype=np.float64)
    P = (idx[:, None] + x[None, :]) ** a * w[None, :]
    Q = (np.arange(n + 1, dtype=np.float64)[:, None] - x[None, :]).clip(min=1e-300) ** b
    for k in range(3, n + 1):
        # cells i = 1..k-2 correspond to distances k-i = k-1..2
        K[k - 1, 1 : k - 1] = np.einsum("ij,ij->i", P[1 : k - 1], Q[k - 1 : 1 : -1])
    # first and last cell of every row carry the endpoint singularities
    k = np.arange(1, n + 1, dtype=np.float64)
    K[:, 0] = singular_moment(a, b, 0.0, 1.0, k)
    last = singular_moment(a, b, k - 1.0, k, k)
    K[np.arange(n), np.arange(n)] = last
    return K


def unit_moment_table(n: int, a: float, b: float) -> np.ndarray:
    _check_exponents(a, b)
    key = ("moments", int(n), float(a), float(b))

    def build():
        K = _unit_table(int(n), float(a), float(b))
        K.setflags(write=False)
        return K

    return table_cache.get(key, build)


class SingularMomentTable:
    """Exact subinterval moments of ``s^a (t_k - s)^b`` on a uniform grid.

    ``matrix[k-1, i]`` is the integral over ``[t_i, t_{i+1}]`` for output time
    ``t_k``; applying the table to left-endpoint samples of a function gives
    the product-integration approximation of ``int_0^{t_k} s^a (t_k-s)^b f(s) ds``.
    """

    def __init__(self, grid: TimeGrid, a: float, b: float):
        _check_exponents(a, b)
        self.grid = grid
        self.a = float(a)
        self.b = float(b)
        self.scale = grid.dt ** (self.a + self.b + 1.0)

    @property
    def unit(self) -> np.ndarray:
        return unit_moment_table(self.grid.n, self.a, self.b)

    @property
    def matrix(self) -> np.ndarray:
        return self.scale * self.unit

    def apply(self, f_left: np.ndarray) -> np.ndarray:
        """Weights applied to values on the ``n`` subintervals (last axis).

        Returns node values (last axis of length ``n + 1``, zero at ``t_0``).
        """
        f_left = np.asarray(f_left, dtype=np.float64)
        n = self.grid.n
        if f_left.shape[-1] != n:
            raise ValueError(f"expected {n} subinterval values, got {f_left.shape[-1]}")
        out = np.zeros(f_left.shape[:-1] + (n + 1,))
        if self.a == 0.0:
            d = np.arange(1, n + 1, dtype=np.float64)
            col = (d ** (self.b + 1.0) - (d - 1.0) ** (self.b + 1.0)) / (self.b + 1.0)
            conv = fftconvolve(f_left, np.broadcast_to(col, f_left.shape[:-1] + (n,)), axes=-1)
            out[..., 1:] = self.scale * conv[..., :n]
        elif self.b == 0.0:
            i = np.arange(n, dtype=np.float64)
            cell = ((i + 1.0) ** (self.a + 1.0) - i ** (self.a + 1.0)) / (self.a + 1.0)
            out[..., 1:] = self.scale * np.cumsum(cell * f_left, axis=-1)
        else:
            out[..., 1:] = self.scale * (f_left @ self.unit.T)
        return out


def _check_order(beta, hi_closed: bool):
    ok = (beta > 0) and (beta <= 1 if hi_closed else beta < 1)
    if not ok or not np.isfinite(beta):
        bounds = "(0, 1]" if hi_closed else "(0, 1)"
        raise DomainError(f"order must lie in {bounds}, got {beta!r}")


def rl_integral_values(values: np.ndarray, grid: TimeGrid, beta: float) -> np.ndarray:
    """Array version of :func:`rl_integral`; operates on the last axis."""
    _check_order(beta, True)
    values = np.asarray(values, dtype=np.float64)
    table = SingularMomentTable(grid, 0.0, beta - 1.0)
    return table.apply(values[..., :-1]) / gamma(beta)


def rl_integral(f: SampledPath, beta: float) -> SampledPath:
    """Riemann-Liouville integral ``I^beta f`` by product integration.

    ``f`` is frozen at left endpoints and the kernel ``(t-s)^(beta-1)/Γ(beta)``
    is integrated exactly on each cell, so constants are reproduced exactly.
    """
    return SampledPath(f.grid, rl_integral_values(f.values, f.grid, beta))


def three_point_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    return np.gradient(values, dt, axis=-1, edge_order=2)


def _looks_singular(d: np.ndarray, grid: TimeGrid, beta: float) -> bool:
    """Log-log slope of |d| over the first few nodes steeper than -beta/2."""
    m = min(8, grid.n)
    if m < 3:
        return False
    head = np.abs(d[..., 1 : m + 1])
    if np.any(head == 0):
        return False
    slope = np.polyfit(np.log(grid.nodes[1 : m + 1]), np.log(head).T, 1)[0]
    return bool(np.any(slope < -0.5 * beta))


def rl_derivative_values(values: np.ndarray, grid: TimeGrid, beta: float) -> np.ndarray:
    _check_order(beta, False)
    values = np.asarray(values, dtype=np.float64)
    if np.any(values[..., 0] != 0):
        raise PreconditionError("Riemann-Liouville derivative needs f(t_0) = 0")
    d = three_point_derivative(rl_integral_values(values, grid, 1.0 - beta), grid.dt)
    if _looks_singular(d, grid, beta):
        warnings.warn(
            f"D^{beta:g} f grows like t^(-beta) near 0 on this grid",
            SingularOutputWarning,
            stacklevel=3,
        )
    return d


def rl_derivative(f: SampledPath, beta: float) -> SampledPath:
    """Riemann-Liouville derivative ``d/dt I^(1-beta) f`` with three-point differences."""
    return SampledPath(f.grid, rl_derivative_values(f.values, f.grid, beta))


def holder_rescale(f: SampledPath, alpha: float) -> SampledPath:
    """``g(t) = t^(-alpha) f(t)`` with ``g(0) = 0``.

    If ``f`` is Hölder of exponent ``beta > alpha`` and vanishes at 0, ``g`` is
    Hölder of exponent ``beta - alpha``.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    if f.values[0] != 0:
        raise PreconditionError("holder_rescale needs f(t_0) = 0")
    g = np.zeros_like(f.values)
    g[1:] = f.grid.nodes[1:] ** (-alpha) * f.values[1:]
    return SampledPath(f.grid, g)


def empirical_holder_exponent(f: SampledPath) -> float:
    """Slope of ``log max_i |f(t_{i+k}) - f(t_i)|`` against ``log(k dt)`` over dyadic lags.

    Lags run from 1 to ``n/8``.
    """
    n = f.grid.n
    if n < 64:
        raise ValueError(f"need at least 64 steps, got {n}")
    v = f.values
    if np.ptp(v) == 0:
        raise ValueError("path is constant; Hölder exponent undefined")
    lags = 2 ** np.arange(int(np.log2(n // 8)) + 1)
    osc = np.array([np.max(np.abs(v[k:] - v[:-k])) for k in lags])
    keep = osc > 0
    if keep.sum() < 2:
        raise ValueError("not enough nonzero oscillations for a fit")
    slope = np.polyfit(np.log(lags[keep] * f.grid.dt), np.log(osc[keep]), 1)[0]
    return float(slope)
