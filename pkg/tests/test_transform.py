import math

import numpy as np
import pytest
from scipy import integrate

from fbmgirsanov.core import DomainError, HurstParam, PreconditionError, SampledPath, TimeGrid, fbm_covariance
from fbmgirsanov.fbm_sim import RngSeed, fbm_paths_circulant
from fbmgirsanov.transform import (
    constant_drift_beta_coefficient,
    decompose_path,
    drift_pipeline,
    forward_transform,
    forward_values,
    gamma_drift,
    innovation_correction,
    kernel_w,
    kernel_zeta,
    m_from_y_values,
    reconstruct_fbm,
    reconstruct_values,
    zeta_closed_form,
)


def zeta_by_quad(t, s, H):
    """The defining formula, inner integral by QUADPACK with an algebraic weight."""
    d = H - 0.5
    cH = HurstParam(H).cH
    inner = integrate.quad(lambda u: u ** (d - 1), s, t, weight="alg", wvar=(d, 0.0), epsabs=0, epsrel=1e-12)[0]
    return cH * ((t / s) ** d * (t - s) ** d - d * s ** (-d) * inner)


POINTS = [(1.0, 0.5), (1.0, 0.01), (1.0, 0.99), (3.0, 0.2), (0.2, 0.15)]


@pytest.mark.parametrize("H", [0.2, 0.35, 0.65, 0.8])
@pytest.mark.parametrize("t, s", POINTS)
def test_zeta_closed_form_matches_quadrature(H, t, s):
    assert zeta_closed_form(t, s, H) == pytest.approx(zeta_by_quad(t, s, H), rel=1e-9)


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_zeta_gauss_jacobi_converges(H):
    t = np.array([1.0, 1.0, 2.0])
    s = np.array([0.3, 0.9, 0.05])
    z32 = kernel_zeta(t, s, H, nodes=32)
    z64 = kernel_zeta(t, s, H, nodes=64)
    assert np.allclose(z32, z64, rtol=1e-8)
    assert np.allclose(z64, zeta_closed_form(t, s, H), rtol=1e-8)


@pytest.mark.parametrize("H", [0.3, 0.7])
@pytest.mark.parametrize("s, t", [(0.4, 1.0), (1.0, 1.0), (0.7, 2.0)])
def test_zeta_reproduces_fbm_covariance(H, s, t):
    # int_0^s zeta(t, u) zeta(s, u) du = R(s, t); zeta ~ u^(1/2-H) near 0
    f = lambda u: zeta_closed_form(t, u, H) * zeta_closed_form(s, u, H) if u < s else 0.0
    val = integrate.quad(f, 0.0, s, limit=400, points=[1e-6, 1e-3], epsrel=1e-9)[0]
    assert val == pytest.approx(fbm_covariance(s, t, H), rel=1e-6)


def test_kernels_degenerate_at_brownian_case():
    t = np.linspace(0.1, 1.0, 10)[:, None]
    s = t * np.linspace(0.05, 0.95, 10)[None, :]
    assert np.allclose(kernel_w(t, s, 0.5), 1.0, atol=1e-12)
    assert np.allclose(zeta_closed_form(t, s, 0.5), 1.0)
    assert np.allclose(kernel_zeta(t, s, 0.5), 1.0, atol=1e-12)


def test_kernel_w_domain():
    with pytest.raises(DomainError):
        kernel_w(1.0, 0.0, 0.7)
    with pytest.raises(DomainError):
        kernel_w(1.0, 1.5, 0.3)
    assert kernel_w(1.0, 0.0, 0.3) == 0.0
    with pytest.raises(DomainError):
        zeta_closed_form(1.0, 1.0, 0.3)


def test_brownian_transform_is_identity():
    g = TimeGrid(128)
    W = SampledPath(g, fbm_paths_circulant(g, 0.5, RngSeed(2), 1)[0])
    tb = forward_transform(W, 0.5)
    for P in (tb.Y, tb.M, tb.B):
        assert np.allclose(P.values, W.values, atol=1e-13)
    assert np.allclose(reconstruct_fbm(tb.B, 0.5).values, W.values, atol=1e-13)
    assert not np.any(innovation_correction(0.5))


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_transforms_are_linear(H):
    g = TimeGrid(256)
    W = fbm_paths_circulant(g, H, RngSeed(5), 2)
    one = forward_values(2.0 * W[0] - 3.0 * W[1], g, H)
    sep = [forward_values(w, g, H) for w in W]
    for k in range(3):
        assert np.allclose(one[k], 2.0 * sep[0][k] - 3.0 * sep[1][k], atol=1e-10)
    r = reconstruct_values(W, g, H)
    assert np.allclose(reconstruct_values(W[0] + W[1], g, H), r[0] + r[1], atol=1e-10)


def test_transform_preconditions():
    g = TimeGrid(16)
    with pytest.raises(PreconditionError):
        forward_transform(SampledPath(g, np.ones(17)), 0.3)
    with pytest.raises(PreconditionError):
        reconstruct_fbm(SampledPath(g, np.ones(17)), 0.3)


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_m_from_y_agrees_with_direct_route(H):
    g = TimeGrid(512)
    W = fbm_paths_circulant(g, H, RngSeed(9), 3)
    Y, M, _ = forward_values(W, g, H)
    assert np.max(np.abs(m_from_y_values(Y, g, H) - M)) < 1e-6 * np.max(np.abs(M))


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_round_trip(H):
    g = TimeGrid(1024)
    W = fbm_paths_circulant(g, H, RngSeed(13), 20)
    _, _, B = forward_values(W, g, H)
    err = np.linalg.norm(reconstruct_values(B, g, H) - W) / np.linalg.norm(W)
    assert err < 0.05


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_innovation_increments_uncorrelated(H):
    g = TimeGrid(1024)
    W = fbm_paths_circulant(g, H, RngSeed(17), 200)
    dB = np.diff(forward_values(W, g, H)[2], axis=-1) / math.sqrt(g.dt)
    assert np.mean(dB**2) == pytest.approx(1.0, abs=0.02)
    lag1 = np.mean(dB[:, 1:] * dB[:, :-1])
    # 200 * 1023 products, standard error about 0.0022
    assert abs(lag1) < 0.01


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_martingale_variance_profile(H):
    g = TimeGrid(512)
    W = fbm_paths_circulant(g, H, RngSeed(21), 2000)
    M = forward_values(W, g, H)[1]
    c2 = HurstParam(H).c2
    for k in (128, 512):
        assert np.var(M[:, k]) == pytest.approx(c2**2 * g.nodes[k] ** (2 - 2 * H), rel=0.1)


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_decomposition_splits_drift(H):
    g = TimeGrid(1024)
    W = fbm_paths_circulant(g, H, RngSeed(23), 1)[0]
    xi = np.cos(3.0 * g.nodes)
    drift = np.concatenate([[0.0], np.cumsum(xi[:-1]) * g.dt])
    BX = decompose_path(SampledPath(g, W + drift), H).B.values
    BW = forward_values(W, g, H)[2]
    beta = drift_pipeline(SampledPath(g, xi), H).beta.values
    assert np.max(np.abs(BX - BW - beta)) < 1e-2 * np.max(np.abs(BX))


@pytest.mark.parametrize("H", [0.25, 0.5, 0.75])
def test_constant_drift_closed_forms(H):
    g = TimeGrid(1024)
    bundle = drift_pipeline(SampledPath(g, np.ones(g.n + 1)), H)
    h = HurstParam(H)
    gg = 1.5 - H
    t = g.nodes
    mu_exact = h.c1 * math.gamma(gg) ** 2 / math.gamma(2 * gg) * t ** (2 - 2 * H)
    assert np.allclose(bundle.mu.values, mu_exact, rtol=1e-8, atol=0)
    eta_exact = t ** (1.5 - H) / (1.5 - H)
    assert np.allclose(bundle.eta.values, eta_exact, rtol=1e-10)
    kappa = constant_drift_beta_coefficient(H)
    l2_exact = kappa**2 / (2 - 2 * H)
    assert bundle.l2NormSq == pytest.approx(l2_exact, rel=0.05)
    mid = slice(g.n // 4, None)
    assert np.allclose(bundle.betaPrime.values[mid], kappa * t[mid] ** (0.5 - H), rtol=2e-2)


def test_brownian_drift_passes_through():
    g = TimeGrid(64)
    xi = SampledPath.from_function(g, np.sin)
    b = drift_pipeline(xi, 0.5)
    assert np.allclose(b.betaPrime.values[1:], xi.values[1:], rtol=1e-10)
    assert not b.singular


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_l2_norm_stable_under_refinement(H):
    vals = []
    for n in (512, 1024, 2048):
        g = TimeGrid(n)
        vals.append(drift_pipeline(SampledPath.from_function(g, lambda t: t), H).l2NormSq)
    assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0]) + 1e-12
    assert vals[2] == pytest.approx(vals[1], rel=1e-2)


def test_gamma_drift_matches_pipeline_on_path():
    g = TimeGrid(256)
    X = SampledPath(g, fbm_paths_circulant(g, 0.7, RngSeed(3), 1)[0])
    b = lambda x: 0.5 * (1.0 - x)
    gd = gamma_drift(X, b, 0.7)
    ref = drift_pipeline(SampledPath(g, b(X.values)), 0.7).betaPrime
    assert np.array_equal(gd.values, ref.values)
