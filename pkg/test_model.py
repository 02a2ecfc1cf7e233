#!/usr/bin/env python3
"""Test script for the model state: parameters, curves and the conditional Volterra process."""

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from tools.bss import HybridConfig, TimeGrid, simulate_volterra
from tools.errors import DomainError, OrderError
from tools.model import (ForwardVarianceCurve, ModelParams, conditional_covariance_vT, conditional_gram_matrix,
                         conditional_variance_vT, eta_T, forward_variance, variance_process)

LEVEL = 0.234 ** 2
PARAMS = ModelParams(H=0.07, nu=1.2287, rho=-0.9)


def test_model_params():
    print("🧪 Testing ModelParams...")
    assert PARAMS.h_plus == pytest.approx(0.57)
    assert PARAMS.h_minus == pytest.approx(-0.43)
    assert PARAMS.with_updates(nu=0.5).nu == 0.5
    assert PARAMS.to_dict() == {'H': 0.07, 'nu': 1.2287, 'rho': -0.9, 'kappa': 2}
    ModelParams(H=0.1, nu=0.0)
    for bad in ({'H': 0.5, 'nu': 1.0}, {'H': 0.1, 'nu': -1.0}, {'H': 0.1, 'nu': 1.0, 'rho': 1.0}):
        with pytest.raises(DomainError):
            ModelParams(**bad)
    print("✅ ModelParams validated")


def test_scenario_curves():
    print("📈 Testing forward-variance scenarios...")
    assert ForwardVarianceCurve.scenario(1)(2.0) == pytest.approx(LEVEL)
    assert ForwardVarianceCurve.scenario(2)(1.0) == pytest.approx(4 * LEVEL)
    assert ForwardVarianceCurve.scenario(3)(3.0) == pytest.approx(2 * LEVEL)
    with pytest.raises(DomainError):
        ForwardVarianceCurve.scenario(4)
    with pytest.raises(DomainError):
        ForwardVarianceCurve.flat(LEVEL)(-0.1)
    print("✅ Scenarios evaluate correctly")


def test_integrate_matches_quadrature():
    curves = [
        ForwardVarianceCurve.scenario(1),
        ForwardVarianceCurve.scenario(2),
        ForwardVarianceCurve.scenario(3),
        ForwardVarianceCurve.from_knots([0.25, 0.5, 1.0, 2.0], [0.04, 0.045, 0.05, 0.052]),
    ]
    for curve in curves:
        for a, b in ((0.0, 0.1), (0.3, 1.7), (1.5, 3.0)):
            breaks = [p for p in (0.25, 0.5, 1.0, 2.0) if a < p < b] or None
            ref, _ = integrate.quad(curve, a, b, points=breaks, epsabs=0.0, epsrel=1e-12)
            assert curve.integrate(a, b) == pytest.approx(ref, rel=1e-9)
    with pytest.raises(OrderError):
        curves[0].integrate(1.0, 0.5)


def test_spline_curve():
    curve = ForwardVarianceCurve.from_knots([0.5, 1.0, 2.0], [0.04, 0.05, 0.045])
    assert curve(0.5) == pytest.approx(0.04)
    assert curve(0.1) == pytest.approx(0.04)
    assert curve(5.0) == pytest.approx(0.045)
    assert ForwardVarianceCurve.from_dict(curve.to_dict()) == curve
    flat = ForwardVarianceCurve.flat(0.05)
    assert flat.to_dict() == {'kind': 'flat', 'params': {'level': 0.05}}
    with pytest.raises(DomainError):
        ForwardVarianceCurve.from_knots([0.5, 1.0], [0.04, -0.01])
    with pytest.raises(DomainError):
        ForwardVarianceCurve.from_knots([1.0, 0.5], [0.04, 0.05])
    with pytest.raises(DomainError):
        ForwardVarianceCurve.from_knots([1.0], [0.04])


def test_variance_process_at_zero():
    curve = ForwardVarianceCurve.scenario(2)
    assert variance_process(curve, PARAMS, 0.0, 0.0) == pytest.approx(LEVEL)


def test_conditional_variance():
    print("📐 Testing conditional variance and covariance...")
    assert conditional_variance_vT(0.6, 0.0, 0.07) == 0.0
    assert conditional_variance_vT(0.5, 0.5, 0.07) == pytest.approx(0.5 ** 0.14 / 0.14)
    ref, _ = integrate.quad(lambda u: (0.6 - u) ** (2 * 0.07 - 1), 0.0, 0.5, epsabs=0.0, epsrel=1e-12)
    assert conditional_variance_vT(0.6, 0.5, 0.07) == pytest.approx(ref, rel=1e-8)
    with pytest.raises(OrderError):
        conditional_variance_vT(0.4, 0.5, 0.07)


def test_conditional_covariance_matches_quadrature():
    rng = np.random.default_rng(2017)
    for _ in range(25):
        H = rng.uniform(0.03, 0.45)
        T = rng.uniform(0.1, 2.0)
        t = T + rng.uniform(0.01, 0.2)
        s = t + rng.uniform(0.001, 0.5)
        ref, _ = integrate.quad(lambda u: ((t - u) * (s - u)) ** (H - 0.5), 0.0, T,
                                epsabs=0.0, epsrel=1e-12, limit=200)
        assert conditional_covariance_vT(s, t, T, H) == pytest.approx(ref, rel=1e-8)
        assert conditional_covariance_vT(t, s, T, H) == pytest.approx(conditional_covariance_vT(s, t, T, H), rel=1e-14)
    print("✅ Covariance matches quadrature on 25 random points")


def test_covariance_edge_cases():
    H = 0.07
    assert conditional_covariance_vT(0.7, 0.6, 0.0, H) == 0.0
    assert conditional_covariance_vT(0.6, 0.6, 0.5, H) == pytest.approx(conditional_variance_vT(0.6, 0.5, H))
    grid = np.array([0.5, 0.55, 0.6])
    out = conditional_covariance_vT(grid[:, None], grid[None, :], 0.5, H)
    assert out.shape == (3, 3)
    with pytest.raises(OrderError):
        conditional_covariance_vT(0.4, 0.6, 0.5, H)


def test_gram_matrix_is_psd():
    points = 0.5 + np.arange(8) * (30 / 365) / 30
    gram = conditional_gram_matrix(points, 0.5, 0.07)
    np.testing.assert_allclose(gram, gram.T)
    eigenvalues = np.linalg.eigvalsh(gram)
    assert eigenvalues.min() > -1e-12 * eigenvalues.max()


def test_eta_and_forward_variance():
    print("🎯 Testing xi_T(t) martingale property...")
    curve = ForwardVarianceCurve.scenario(3)
    assert eta_T(0.6, 0.0, PARAMS) == 1.0
    assert forward_variance(curve, PARAMS, 0.0, 0.3, 0.0) == pytest.approx(curve(0.3))
    with pytest.raises(OrderError):
        forward_variance(curve, PARAMS, 0.5, 0.4, 0.0)
    with pytest.raises(OrderError):
        eta_T(0.4, 0.0, PARAMS, T=0.5)

    # exact Gaussian draws of V^T_t give E xi_T(t) = xi0(t)
    rng = np.random.default_rng(99)
    T, t = 0.5, 0.6
    samples = rng.standard_normal(100_000) * np.sqrt(conditional_variance_vT(t, T, PARAMS.H))
    xi = forward_variance(curve, PARAMS, T, t, samples)
    se = xi.std(ddof=1) / np.sqrt(xi.size)
    assert abs(xi.mean() - curve(t)) < 4 * se
    print("✅ Forward variance is a martingale")


def test_variance_process_mean_from_simulation():
    params = ModelParams(H=0.07, nu=0.5)
    curve = ForwardVarianceCurve.flat(0.04)
    grid = TimeGrid(n=100, T=0.5)
    ens = simulate_volterra(grid, params.H, HybridConfig(paths=20_000, seed=8))
    v = variance_process(curve, params, ens.values[:, -1], 0.5)
    se = v.std(ddof=1) / np.sqrt(v.size)
    assert abs(v.mean() - 0.04) < 4 * se + 1e-4


def run_all_tests():
    """Run every model test."""
    print("🚀 Starting model tests")
    print("=" * 60)
    test_model_params()
    test_scenario_curves()
    test_integrate_matches_quadrature()
    test_spline_curve()
    test_variance_process_at_zero()
    test_conditional_variance()
    test_conditional_covariance_matches_quadrature()
    test_covariance_edge_cases()
    test_gram_matrix_is_psd()
    test_eta_and_forward_variance()
    test_variance_process_mean_from_simulation()
    print("\n🎉 All model tests passed!")
    return True


if __name__ == "__main__":
    try:
        run_all_tests()
    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
