import numpy as np
import pytest

from fbmgirsanov.core import TimeGrid, covariance_matrix
from fbmgirsanov.fbm_sim import (
    FouParams,
    RngSeed,
    SamplerError,
    euler_fou,
    fbm_paths_cholesky,
    fbm_paths_circulant,
    fou_paths,
    increment_autocovariance,
    sample_fbm_circulant,
    sample_fou,
)

SAMPLERS = [fbm_paths_cholesky, fbm_paths_circulant]


@pytest.mark.parametrize("sampler", SAMPLERS)
def test_same_seed_same_paths(sampler):
    g = TimeGrid(32)
    a = sampler(g, 0.3, RngSeed(7), 5)
    b = sampler(g, 0.3, RngSeed(7), 5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sampler(g, 0.3, RngSeed(8), 5))
    assert np.all(a[:, 0] == 0.0)


@pytest.mark.parametrize("sampler", SAMPLERS)
def test_row_k_is_stream_k(sampler):
    g = TimeGrid(16)
    batch = sampler(g, 0.7, RngSeed(3, 10), 4)
    single = sampler(g, 0.7, RngSeed(3, 12), 1)[0]
    assert np.array_equal(batch[2], single)


def test_seed_validation():
    with pytest.raises(ValueError):
        RngSeed(-1)
    with pytest.raises(ValueError):
        RngSeed(2**64)
    with pytest.raises(ValueError):
        RngSeed(1.5)


def test_circulant_needs_power_of_two():
    with pytest.raises(SamplerError):
        fbm_paths_circulant(TimeGrid(100), 0.3, 1)


def test_increment_autocovariance():
    k = np.arange(6)
    assert np.allclose(increment_autocovariance(k, 0.5), [1, 0, 0, 0, 0, 0])
    # telescoping: Var(W_n) = sum_{i,j<n} r(i-j) = n^{2H}
    H, n = 0.3, 20
    lags = np.subtract.outer(np.arange(n), np.arange(n))
    assert increment_autocovariance(lags, H).sum() == pytest.approx(n ** (2 * H))
    assert increment_autocovariance(0, H, dt=0.01) == pytest.approx(0.01 ** (2 * H))
    # sign of increment correlation follows H - 1/2
    assert increment_autocovariance(1, 0.3) < 0 < increment_autocovariance(1, 0.7)


@pytest.mark.parametrize("sampler", SAMPLERS)
@pytest.mark.parametrize("H", [0.25, 0.75])
def test_empirical_covariance(sampler, H):
    g = TimeGrid(8, 2.0)
    X = sampler(g, H, RngSeed(11), 20000)[:, 1:]
    C = covariance_matrix(g, H)
    emp = X.T @ X / X.shape[0]
    se = np.sqrt((C**2 + np.outer(np.diag(C), np.diag(C))) / X.shape[0])
    assert np.max(np.abs(emp - C) / se) < 4.5


def test_euler_rho_zero_is_identity_bitwise():
    W = fbm_paths_circulant(TimeGrid(64), 0.4, RngSeed(1), 3)
    X = euler_fou(W, FouParams(0.0, 5.0, 1.25), 1 / 64)
    assert np.array_equal(X, 1.25 + W)


def test_euler_first_order_on_deterministic_part():
    # zero noise: X_t = m + (x0 - m) e^{-rho t}
    p = FouParams(rho=2.0, m=0.5, x0=-1.0)
    errs = []
    for n in (64, 128, 256):
        g = TimeGrid(n)
        X = euler_fou(np.zeros(n + 1), p, g.dt)
        exact = p.m + (p.x0 - p.m) * np.exp(-p.rho * g.nodes)
        errs.append(np.max(np.abs(X - exact)))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.05)


def test_fou_path_helpers():
    g = TimeGrid(32, 2.0)
    p = FouParams(1.0, 0.0, 1.0)
    X = sample_fou(g, 0.7, p, RngSeed(4))
    assert X.values[0] == 1.0
    assert np.array_equal(X.values, fou_paths(g, 0.7, p, RngSeed(4), 1)[0])
    W = sample_fbm_circulant(g, 0.7, RngSeed(4))
    assert np.array_equal(X.values, euler_fou(W.values, p, g.dt))
