#!/usr/bin/env python3
"""Test script for the hybrid-scheme Volterra simulator."""

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from tools.bss import (HybridConfig, TimeGrid, b_star, direct_convolve, extract_brownian, fft_convolve,
                       kernel_weights, simulate_volterra, small_lag_covariance)
from tools.errors import DomainError, GridMismatchError

H = 0.07
ALPHA = H - 0.5


def test_time_grid():
    print("🧪 Testing TimeGrid...")
    grid = TimeGrid(n=365, T=1.0)
    assert grid.n_T == 365
    assert grid.times[-1] == pytest.approx(1.0)
    assert grid.index_of(182 / 365) == 182
    with pytest.raises(GridMismatchError):
        grid.index_of(0.5)

    covering = TimeGrid.covering(0.1)
    assert covering.n_T == 37
    assert covering.times[-1] == pytest.approx(0.1, abs=1e-12)

    with pytest.raises(GridMismatchError):
        TimeGrid(n=100, T=1.0).index_of(0.333)
    with pytest.raises(DomainError):
        TimeGrid(n=1, T=1.0)
    print("✅ TimeGrid works")


def test_b_star_lies_in_cell():
    k = np.arange(1, 50)
    b = b_star(k, ALPHA)
    assert np.all(b >= k - 1) and np.all(b <= k)
    with pytest.raises(DomainError):
        b_star(1, 0.0)
    with pytest.raises(DomainError):
        b_star(0, ALPHA)


def test_small_lag_covariance():
    print("📐 Testing small-lag covariance...")
    n = 100
    cov = small_lag_covariance(3, n, ALPHA)
    m = cov.matrix
    assert m.shape == (4, 4)
    np.testing.assert_allclose(m, m.T)
    assert m[0, 0] == pytest.approx(1.0 / n)
    np.testing.assert_allclose(cov.factor @ cov.factor.T, m, rtol=1e-12, atol=1e-18)

    # off-diagonal entries against direct quadrature in u
    for k, j in ((3, 2), (2, 1), (3, 1)):
        ref, _ = integrate.quad(lambda u: (k / n - u) ** ALPHA * (j / n - u) ** ALPHA, 0.0, 1.0 / n,
                                epsabs=0.0, epsrel=1e-10, limit=500)
        assert m[k, j] == pytest.approx(ref, rel=1e-5)
    print("✅ Covariance matches quadrature")


def test_fft_matches_direct_convolution():
    print("🔁 Testing FFT convolution against the Toeplitz product...")
    rng = np.random.default_rng(1)
    for n in (16, 64, 256):
        weights = rng.standard_normal(n + 1)
        increments = rng.standard_normal((5, n))
        np.testing.assert_allclose(fft_convolve(weights, increments), direct_convolve(weights, increments),
                                   atol=1e-10)
    increments = rng.standard_normal((2, 8))
    np.testing.assert_allclose(fft_convolve(np.array([1.0]), increments), increments, atol=1e-12)
    print("✅ Convolutions agree")


def test_kernel_weights_vanish_on_exact_lags():
    weights = kernel_weights(TimeGrid(n=100, T=1.0), ALPHA, 2)
    assert weights.shape == (101,)
    assert np.all(weights[:3] == 0.0)
    assert np.all(weights[3:] > 0.0)


def test_simulation_methods_agree():
    grid = TimeGrid(n=50, T=1.0)
    cfg = HybridConfig(paths=200, seed=7)
    fft = simulate_volterra(grid, H, cfg)
    direct = simulate_volterra(grid, H, cfg, method="direct")
    assert fft.values.shape == (200, 51)
    assert fft.z_increments.shape == (200, 50)
    assert np.all(fft.values[:, 0] == 0.0)
    np.testing.assert_allclose(fft.values, direct.values, atol=1e-10)


def test_simulation_is_reproducible():
    print("🎲 Testing substream reproducibility...")
    grid = TimeGrid(n=50, T=0.5)
    small = simulate_volterra(grid, H, HybridConfig(paths=100, seed=11, block_size=64))
    large = simulate_volterra(grid, H, HybridConfig(paths=300, seed=11, block_size=64))
    threaded = simulate_volterra(grid, H, HybridConfig(paths=300, seed=11, block_size=64, threads=3))
    np.testing.assert_array_equal(small.values, large.values[:100])
    np.testing.assert_array_equal(large.values, threaded.values)
    other = simulate_volterra(grid, H, HybridConfig(paths=100, seed=12, block_size=64))
    assert not np.allclose(small.values, other.values)
    print("✅ Paths depend only on seed and block")


def test_marginal_variance():
    print("📊 Testing Var V(t) = t^(2H)/(2H)...")
    grid = TimeGrid(n=100, T=1.0)
    paths = 20_000
    ens = simulate_volterra(grid, H, HybridConfig(paths=paths, seed=3))
    for t in (0.25, 0.5, 1.0):
        sample = ens.values[:, grid.index_of(t)]
        exact = t ** (2 * H) / (2 * H)
        se = exact * np.sqrt(2.0 / (paths - 1))
        assert abs(sample.var(ddof=1) - exact) < 4 * se
        assert abs(sample.mean()) < 4 * np.sqrt(exact / paths)
    print("✅ Marginal variances within Monte Carlo error")


def test_extract_brownian():
    grid = TimeGrid(n=100, T=1.0)
    paths = 20_000
    ens = simulate_volterra(grid, H, HybridConfig(paths=paths, seed=5))
    z = extract_brownian(ens, grid, 2, H)
    assert z.shape == ens.values.shape
    assert np.all(z[:, 0] == 0.0)
    dz = np.diff(z, axis=1)
    np.testing.assert_allclose(dz[:, 2:], ens.z_increments[:, 2:], atol=1e-12)

    # the first increment is read off V(t_1) and has variance 1/n
    first = dz[:, 0]
    se = grid.dt * np.sqrt(2.0 / (paths - 1))
    assert abs(first.var(ddof=1) - grid.dt) < 4 * se

    with pytest.raises(GridMismatchError):
        extract_brownian(ens, grid, 3, H)
    with pytest.raises(GridMismatchError):
        extract_brownian(ens, TimeGrid(n=50, T=1.0), 2, H)


def test_invalid_simulation_inputs():
    grid = TimeGrid(n=10, T=0.2)
    with pytest.raises(DomainError):
        simulate_volterra(grid, 0.6, HybridConfig(paths=10))
    with pytest.raises(DomainError):
        simulate_volterra(grid, H, HybridConfig(paths=10, kappa=5))
    with pytest.raises(DomainError):
        HybridConfig(paths=0)


def test_debug_frame():
    grid = TimeGrid(n=20, T=0.5)
    ens = simulate_volterra(grid, H, HybridConfig(paths=3, seed=1))
    df = ens.to_frame(max_paths=2)
    assert list(df.columns) == ['path', 'i', 't', 'V', 'Zinc']
    assert len(df) == 2 * (grid.n_T + 1)


def run_all_tests():
    """Run every hybrid-scheme test."""
    print("🚀 Starting hybrid scheme tests")
    print("=" * 60)
    test_time_grid()
    test_b_star_lies_in_cell()
    test_small_lag_covariance()
    test_fft_matches_direct_convolution()
    test_kernel_weights_vanish_on_exact_lags()
    test_simulation_methods_agree()
    test_simulation_is_reproducible()
    test_marginal_variance()
    test_extract_brownian()
    test_invalid_simulation_inputs()
    test_debug_frame()
    print("\n🎉 All hybrid scheme tests passed!")
    return True


if __name__ == "__main__":
    try:
        run_all_tests()
    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
