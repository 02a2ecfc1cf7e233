#!/usr/bin/env python3
"""Test script for SPX simulation, call pricing and implied volatility."""

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from engines.spx_engine import SpxEngine, SpxPathConfig, black_call, implied_vol, price_calls, simulate_spx
from engines.vix_engine import MonteCarloEstimate
from tools.bss import TimeGrid
from tools.errors import DomainError, GridMismatchError, OutOfBandPriceError
from tools.model import ForwardVarianceCurve, ModelParams

PARAMS = ModelParams(H=0.07, nu=1.2287, rho=-0.9)
FLAT = ForwardVarianceCurve.flat(0.04)


def test_black_call():
    print("🧪 Testing Black call prices...")
    assert black_call(1.0, 1.0, 1.0, 0.2) == pytest.approx(2 * stats.norm.cdf(0.1) - 1, rel=1e-12)
    assert black_call(1.0, 0.8, 1.0, 0.0) == pytest.approx(0.2)
    prices = black_call(1.0, np.array([0.9, 1.0, 1.1]), 0.5, 0.25)
    assert prices.shape == (3,) and np.all(np.diff(prices) < 0)
    print("✅ Black prices correct")


def test_implied_vol_round_trip():
    cases = [(strike, sigma) for strike in (0.9, 1.0, 1.1) for sigma in (0.1, 0.2, 0.8)]
    cases += [(0.7, 0.8), (1.5, 0.8)]
    for strike, sigma in cases:
        price = black_call(1.0, strike, 0.5, sigma)
        assert implied_vol(price, 1.0, strike, 0.5) == pytest.approx(sigma, abs=1e-6)
    assert implied_vol(0.2, 1.0, 0.8, 1.0) == 0.0
    with pytest.raises(OutOfBandPriceError):
        implied_vol(1.0, 1.0, 0.8, 1.0)
    with pytest.raises(OutOfBandPriceError):
        implied_vol(0.1, 1.0, 0.8, 1.0)
    with pytest.raises(DomainError):
        implied_vol(0.1, 1.0, 0.8, 0.0)


def test_deterministic_volatility_is_black():
    print("📈 Testing nu = 0 against Black prices...")
    params = ModelParams(H=0.07, nu=0.0, rho=-0.9)
    paths = 20_000
    cfg = SpxPathConfig(grid=TimeGrid(n=50, T=1.0), paths=paths, seed=17)
    terminals = simulate_spx(FLAT, params, cfg, [1.0])
    for point in price_calls(terminals, [0.8, 0.9, 1.0, 1.1, 1.2]):
        exact = black_call(1.0, point.strike, 1.0, 0.2)
        assert abs(point.call_price - exact) < 4 * point.std_error
    print("✅ Monte-Carlo matches Black")


def test_martingale_property():
    paths = 20_000
    cfg = SpxPathConfig(grid=TimeGrid(n=360, T=1.0), paths=paths, seed=19)
    terminals = simulate_spx(FLAT, PARAMS, cfg, [0.5, 1.0])
    for samples in terminals.values():
        se = samples.std(ddof=1) / np.sqrt(paths)
        assert abs(samples.mean() - 1.0) < 4 * se


def test_negative_correlation_gives_skew():
    print("📉 Testing skew direction...")
    engine = SpxEngine(FLAT, PARAMS, paths=20_000, seed=23)
    points = engine.smile([0.5], [float(np.exp(-0.1)), float(np.exp(0.1))])
    assert points[0].implied_vol > points[1].implied_vol

    flat_rho = SpxEngine(FLAT, PARAMS.with_updates(rho=0.0), paths=20_000, seed=23)
    symmetric = flat_rho.smile([0.5], [float(np.exp(-0.1)), float(np.exp(0.1))])
    assert (points[0].implied_vol - points[1].implied_vol) > (symmetric[0].implied_vol - symmetric[1].implied_vol)
    print("✅ rho < 0 produces a downward skew")


def test_price_euler_close_to_log_euler():
    grid = TimeGrid(n=360, T=0.5)
    log_cfg = SpxPathConfig(grid=grid, paths=5000, seed=29)
    price_cfg = SpxPathConfig(grid=grid, paths=5000, seed=29, scheme="price_euler")
    log_terms = simulate_spx(FLAT, PARAMS, log_cfg, [0.5])
    price_terms = simulate_spx(FLAT, PARAMS, price_cfg, [0.5])
    log_atm = price_calls(log_terms, [1.0])[0].call_price
    price_atm = price_calls(price_terms, [1.0])[0].call_price
    assert abs(log_atm - price_atm) < 1e-2


def test_price_euler_converges_to_log_euler():
    print("📉 Testing price-Euler against log-Euler as the grid refines...")
    # deterministic variance: log-Euler is exact, so the gap is the price-Euler weak error
    curve = ForwardVarianceCurve.flat(0.64)
    params = PARAMS.with_updates(nu=0.0)
    gaps = []
    for n in (12, 24):
        terminals = {}
        for scheme in ("log_euler", "price_euler"):
            cfg = SpxPathConfig(grid=TimeGrid(n=n, T=1.0), paths=200_000, seed=37, scheme=scheme)
            terminals[scheme] = simulate_spx(curve, params, cfg, [1.0])[1.0]
        gap = MonteCarloEstimate.from_samples(np.maximum(terminals["price_euler"] - 1.0, 0.0)
                                              - np.maximum(terminals["log_euler"] - 1.0, 0.0))
        assert abs(gap.estimate) > 4 * gap.std_error
        gaps.append(gap.estimate)
    ratio = gaps[1] / gaps[0]
    assert 0.3 <= ratio <= 0.75
    print(f"✅ ATM gap ratio when n doubles: {ratio:.3f}")


def test_monte_carlo_calls_convex_in_strike():
    cfg = SpxPathConfig(grid=TimeGrid(n=360, T=0.5), paths=20_000, seed=39)
    samples = simulate_spx(FLAT, PARAMS, cfg, [0.5])[0.5]
    strikes = np.arange(0.8, 1.2001, 0.05)
    payoffs = np.maximum(samples[:, None] - strikes[None, :], 0.0)
    butterflies = payoffs[:, :-2] - 2.0 * payoffs[:, 1:-1] + payoffs[:, 2:]
    for j in range(butterflies.shape[1]):
        spread = MonteCarloEstimate.from_samples(butterflies[:, j])
        assert spread.estimate >= -3 * spread.std_error
    prices = [p.call_price for p in price_calls({0.5: samples}, list(strikes))]
    assert np.all(np.diff(prices, 2) >= -1e-12)


def test_antithetic_paths():
    grid = TimeGrid(n=50, T=0.5)
    cfg = SpxPathConfig(grid=grid, paths=101, seed=31, antithetic=True)
    terminals = simulate_spx(FLAT, PARAMS.with_updates(nu=0.0), cfg, [0.5])
    samples = terminals[0.5]
    assert samples.shape == (101,)
    # with deterministic variance the mirrored log-returns average to the drift
    log_returns = np.log(samples[:50]) + np.log(samples[51:101])
    np.testing.assert_allclose(log_returns, -0.04 * 0.5, atol=1e-12)
    again = simulate_spx(FLAT, PARAMS.with_updates(nu=0.0), cfg, [0.5])
    np.testing.assert_array_equal(samples, again[0.5])


def test_price_calls():
    samples = {1.0: np.array([0.8, 1.0, 1.2, 1.4])}
    points = price_calls(samples, [0.0, 1.0, 1.3])
    assert points[0].call_price == pytest.approx(1.1)
    assert points[1].call_price == pytest.approx(0.15)
    assert points[2].call_price == pytest.approx(0.025)
    assert np.isnan(points[0].implied_vol)
    prices = [p.call_price for p in points]
    assert prices == sorted(prices, reverse=True)
    with pytest.raises(DomainError):
        price_calls({1.0: np.array([])}, [1.0])
    with pytest.raises(DomainError):
        price_calls(samples, [-1.0])


def test_maturity_must_be_on_grid():
    cfg = SpxPathConfig(grid=TimeGrid(n=360, T=1.0), paths=10)
    with pytest.raises(GridMismatchError):
        simulate_spx(FLAT, PARAMS, cfg, [0.3331])
    with pytest.raises(DomainError):
        SpxPathConfig(grid=TimeGrid(n=360, T=1.0), paths=10, scheme="milstein")
    with pytest.raises(DomainError):
        SpxEngine(FLAT, PARAMS, paths=10).smile([], [1.0])


def run_all_tests():
    """Run every SPX test."""
    print("🚀 Starting SPX tests")
    print("=" * 60)
    test_black_call()
    test_implied_vol_round_trip()
    test_deterministic_volatility_is_black()
    test_martingale_property()
    test_negative_correlation_gives_skew()
    test_price_euler_close_to_log_euler()
    test_price_euler_converges_to_log_euler()
    test_monte_carlo_calls_convex_in_strike()
    test_antithetic_paths()
    test_price_calls()
    test_maturity_must_be_on_grid()
    print("\n🎉 All SPX tests passed!")
    return True


if __name__ == "__main__":
    try:
        run_all_tests()
    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
