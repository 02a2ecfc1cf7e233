#!/usr/bin/env python3
"""Test script for the special functions (2F1, digamma, C_H, K_H)."""

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import special

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from tools.errors import DegenerateParameterError, DomainError
from tools.model import nu_from_eta
from tools.specfun import HypergeoArgs, c_h, dc_h2, digamma, dlog_c_h2, gauss_2f1, hyp_F, k_h

# (a, b, c) of F(u) at H = 0.07 and of the closed-form BFG variance at H = 0.07
PARAMETER_SETS = [(0.43, 0.57, 1.57), (-0.57, 1.57, 2.57), (0.25, 0.75, 1.3)]


def test_series_matches_reference():
    """Power series region |z| <= 0.9."""
    print("🧪 Testing 2F1 power series...")
    z = np.linspace(-0.9, 0.9, 37)
    for a, b, c in PARAMETER_SETS:
        np.testing.assert_allclose(gauss_2f1(a, b, c, z), special.hyp2f1(a, b, c, z), rtol=1e-12)
    print("✅ Series agrees with reference")


def test_transformation_routes():
    """Pfaff, 1/z and 1-z routes."""
    print("🔀 Testing 2F1 transformation routes...")
    z = np.array([-50.0, -5.0, -2.5, -1.5, -1.0, -0.95, 0.95, 0.99])
    for a, b, c in PARAMETER_SETS:
        np.testing.assert_allclose(gauss_2f1(a, b, c, z), special.hyp2f1(a, b, c, z), rtol=1e-10)
    print("✅ All routes agree with reference")


def test_integer_parameter_gap_far_left():
    """1/z route when a-b is an integer, against elementary closed forms."""
    print("📏 Testing 2F1 far left with integer a-b...")
    for z in (-3.0, -1e3, -1e5):
        assert gauss_2f1(1.0, 1.0, 2.0, z) == pytest.approx(np.log1p(-z) / -z, rel=1e-9)
        assert gauss_2f1(1.0, 2.0, 3.0, z) == pytest.approx(2.0 * (-np.log1p(-z) - z) / z ** 2, rel=1e-9)
        x = np.sqrt(-z)
        assert gauss_2f1(0.5, 0.5, 1.5, z) == pytest.approx(np.arcsinh(x) / x, rel=1e-9)
    z = np.array([-1.5, -1e3, -1e5])
    np.testing.assert_allclose(gauss_2f1(1.0, 1.0, 2.0, z), np.log1p(-z) / -z, rtol=1e-9)
    print("✅ Integer a-b handled on the whole negative axis")


def test_unit_argument_and_trivial_cases():
    a, b, c = 0.43, 0.57, 1.57
    expected = special.gamma(c) * special.gamma(c - a - b) / (special.gamma(c - a) * special.gamma(c - b))
    assert gauss_2f1(a, b, c, 1.0) == pytest.approx(expected, rel=1e-12)
    assert gauss_2f1(0.0, 0.3, 1.2, -7.0) == 1.0
    assert gauss_2f1(0.3, 0.7, 1.2, 0.0) == 1.0
    assert isinstance(gauss_2f1(0.3, 0.7, 1.2, -0.5), float)
    assert gauss_2f1(0.3, 0.7, 1.2, np.zeros(4)).shape == (4,)
    with pytest.raises(DomainError):
        gauss_2f1(0.3, 0.7, 1.0, 1.0)


def test_invalid_arguments():
    with pytest.raises(DegenerateParameterError):
        gauss_2f1(0.3, 0.7, 0.0, 0.5)
    with pytest.raises(DegenerateParameterError):
        gauss_2f1(0.3, 0.7, -2.0, 0.5)
    with pytest.raises(DomainError):
        gauss_2f1(0.3, 0.7, 1.2, 1.5)
    with pytest.raises(DomainError):
        digamma(0.0)


def test_hypergeo_args_evaluate():
    args = HypergeoArgs(0.43, 0.57, 1.57, -3.0)
    args.validate()
    assert args.evaluate() == pytest.approx(special.hyp2f1(0.43, 0.57, 1.57, -3.0), rel=1e-10)


def test_hyp_F():
    assert hyp_F(0.0, 0.07) == 1.0
    H = 0.1
    assert hyp_F(-4.0, H) == pytest.approx(special.hyp2f1(0.5 - H, H + 0.5, 1.5 + H, -4.0), rel=1e-10)


def test_c_h_values():
    print("📐 Testing C_H...")
    assert c_h(0.07) == pytest.approx(0.2893, abs=1e-3)
    # eta = 1.9 at H = 0.07 corresponds to nu ~ 1.2287
    assert nu_from_eta(1.9, 0.07) == pytest.approx(1.2287, abs=1e-3)
    # H = 1/2 limit of the kernel constant is 1
    assert c_h(0.4999999) == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(DomainError):
        c_h(0.5)
    print("✅ C_H values correct")


def test_log_derivative_matches_finite_differences():
    print("📈 Testing d log C_H^2 / dH and K_H...")
    h = 1e-6
    for H in (0.03, 0.07, 0.15, 0.3, 0.45):
        fd = (np.log(c_h(H + h) ** 2) - np.log(c_h(H - h) ** 2)) / (2 * h)
        assert dlog_c_h2(H) == pytest.approx(fd, rel=1e-6)
        fd_c2 = (c_h(H + h) ** 2 - c_h(H - h) ** 2) / (2 * h)
        assert dc_h2(H) == pytest.approx(fd_c2, rel=1e-6)
        assert dc_h2(H) == pytest.approx(c_h(H) ** 2 * k_h(H) / (H + 0.5), rel=1e-12)
    print("✅ Derivatives consistent")


def test_digamma_matches_reference():
    x = np.array([0.57, 1.43, 1.86, 3.0])
    np.testing.assert_allclose(digamma(x), special.digamma(x), rtol=1e-14)


def run_all_tests():
    """Run every special-function test."""
    print("🚀 Starting special function tests")
    print("=" * 60)
    test_series_matches_reference()
    test_transformation_routes()
    test_integer_parameter_gap_far_left()
    test_unit_argument_and_trivial_cases()
    test_invalid_arguments()
    test_hypergeo_args_evaluate()
    test_hyp_F()
    test_c_h_values()
    test_log_derivative_matches_finite_differences()
    test_digamma_matches_reference()
    print("\n🎉 All special function tests passed!")
    return True


if __name__ == "__main__":
    try:
        run_all_tests()
    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
