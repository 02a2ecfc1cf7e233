"""SPX simulation under rough Bergomi, Monte-Carlo call pricing and Black implied volatility."""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence

import numpy as np
from scipy import optimize, stats

from config import Config
from tools.bss import (STREAM_ORTHOGONAL, HybridConfig, TimeGrid, block_rng, map_path_blocks,
                       simulate_volterra)
from tools.errors import DomainError, GridMismatchError, OutOfBandPriceError
from tools.model import ForwardVarianceCurve, ModelParams, variance_process

if TYPE_CHECKING:
    from engines.calibration_engine import PrecomputedPaths

logger = logging.getLogger(__name__)

SCHEMES = ("log_euler", "price_euler")


def black_call(F, K, T, sigma):
    """Undiscounted Black call price; vectorised over every argument."""
    F, K, T, sigma = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (F, K, T, sigma)))
    total = sigma * np.sqrt(T)
    intrinsic = np.maximum(F - K, 0.0)
    with np.errstate(divide='ignore', invalid='ignore'):
        d1 = np.log(F / K) / total + 0.5 * total
        price = F * stats.norm.cdf(d1) - K * stats.norm.cdf(d1 - total)
    out = np.where(total > 0, price, intrinsic)
    return float(out) if out.ndim == 0 else out


def implied_vol(call_price: float, forward: float, strike: float, maturity: float) -> float:
    """
    Black implied volatility by bracketed root finding.

    Args:
        call_price: Undiscounted call price
        forward: Forward price
        strike: Strike
        maturity: Time to maturity in years

    Returns:
        Implied volatility; 0.0 when the price sits on the intrinsic boundary
    """
    if forward <= 0 or strike <= 0 or maturity <= 0:
        raise DomainError("forward, strike and maturity must be positive")
    intrinsic = max(forward - strike, 0.0)
    tol = 1e-12 * forward
    if call_price >= forward or call_price < intrinsic - tol:
        raise OutOfBandPriceError(
            f"call price {call_price} outside the band [{intrinsic}, {forward}) (K={strike}, T={maturity})")
    if call_price <= intrinsic + tol:
        return 0.0

    def objective(sigma: float) -> float:
        return black_call(forward, strike, maturity, sigma) - call_price

    upper = 1.0
    while objective(upper) < 0:
        upper *= 2.0
        if upper > 1e3:
            raise OutOfBandPriceError(f"no implied volatility below {upper} for price {call_price}")
    return float(optimize.brentq(objective, 1e-12, upper, xtol=1e-15, rtol=1e-14, maxiter=500))


@dataclass(frozen=True)
class SpxPathConfig:
    grid: TimeGrid
    paths: int
    scheme: str = "log_euler"
    seed: int = Config.SEED
    antithetic: bool = False
    threads: int = Config.THREADS

    def __post_init__(self):
        if self.paths < 1:
            raise DomainError(f"number of paths must be positive, got {self.paths}")
        if self.scheme not in SCHEMES:
            raise DomainError(f"Unknown SPX scheme: {self.scheme}")


@dataclass(frozen=True)
class SmilePoint:
    maturity: float
    strike: float
    call_price: float
    implied_vol: float
    std_error: float


def draw_orthogonal(grid: TimeGrid, paths: int, seed: int, threads: int = 1,
                    block_size: int = Config.PATH_BLOCK) -> np.ndarray:
    """Independent N(0, 1/n) increments, on their own RNG stream."""
    scale = np.sqrt(grid.dt)

    def draw_block(block: int) -> np.ndarray:
        return scale * block_rng(seed, STREAM_ORTHOGONAL, block).standard_normal((block_size, grid.n_T))

    return map_path_blocks(paths, block_size, threads, draw_block)


def _driving_noise(params: ModelParams, cfg: SpxPathConfig, pre: Optional["PrecomputedPaths"]):
    """Volterra values, their Brownian increments and the orthogonal increments."""
    if pre is not None:
        if pre.H_fixed != params.H:
            raise GridMismatchError(f"paths were precomputed for H={pre.H_fixed}, not H={params.H}")
        if pre.volterra.grid != cfg.grid:
            raise GridMismatchError("precomputed paths live on a different grid")
        return pre.volterra.values, pre.volterra.z_increments, pre.z_perp

    half = -(-cfg.paths // 2) if cfg.antithetic else cfg.paths
    sim = HybridConfig(kappa=params.kappa, seed=cfg.seed, paths=half, threads=cfg.threads)
    ensemble = simulate_volterra(cfg.grid, params.H, sim)
    z_perp = draw_orthogonal(cfg.grid, half, cfg.seed, cfg.threads)
    values, z_bar = ensemble.values, ensemble.z_increments
    if cfg.antithetic:
        values = np.concatenate([values, -values])[:cfg.paths]
        z_bar = np.concatenate([z_bar, -z_bar])[:cfg.paths]
        z_perp = np.concatenate([z_perp, -z_perp])[:cfg.paths]
    return values, z_bar, z_perp


def simulate_spx(xi0: ForwardVarianceCurve, params: ModelParams, cfg: SpxPathConfig,
                 maturities: Sequence[float], pre: Optional["PrecomputedPaths"] = None) -> Dict[float, np.ndarray]:
    """
    Simulate S with S_0 = 1 and return its values at each maturity.

    dW_i = rho Z_i + sqrt(1 - rho^2) Z_perp_i; log_euler steps
    X_{i+1} = X_i - V_i / (2n) + sqrt(V_i) dW_i, price_euler steps S_{i+1} = S_i (1 + sqrt(V_i) dW_i).

    Args:
        xi0: Initial forward-variance curve
        params: Model parameters
        cfg: Grid, paths, scheme and seed
        maturities: Grid times at which to report S
        pre: Precomputed driving noise reused across parameter values

    Returns:
        Mapping maturity -> terminal prices (one per path)
    """
    grid = cfg.grid
    indices = [grid.index_of(T) for T in maturities]
    if any(i == 0 for i in indices):
        raise GridMismatchError("maturities must be strictly positive grid points")

    values, z_bar, z_perp = _driving_noise(params, cfg, pre)
    times = grid.times[:-1]
    variance = variance_process(xi0, params, values[:, :-1], times)
    dW = params.rho * z_bar + np.sqrt(1.0 - params.rho ** 2) * z_perp
    vol_step = np.sqrt(variance) * dW

    if cfg.scheme == "log_euler":
        log_price = np.cumsum(vol_step - 0.5 * variance * grid.dt, axis=1)
        return {T: np.exp(log_price[:, i - 1]) for T, i in zip(maturities, indices)}
    price = np.cumprod(1.0 + vol_step, axis=1)
    return {T: price[:, i - 1] for T, i in zip(maturities, indices)}


def price_calls(terminals: Dict[float, np.ndarray], strikes: Sequence[float], forward: float = 1.0) -> List[SmilePoint]:
    """Monte-Carlo call prices, standard errors and implied vols on a maturity x strike grid."""
    if not terminals or any(np.asarray(s).size == 0 for s in terminals.values()):
        raise DomainError("no terminal prices to price calls on")
    if any(K < 0 for K in strikes):
        raise DomainError("strikes must be non-negative")

    points = []
    for T in sorted(terminals):
        samples = np.asarray(terminals[T])
        for K in strikes:
            payoff = np.maximum(samples - K, 0.0)
            price = float(payoff.mean())
            se = float(payoff.std(ddof=1) / np.sqrt(payoff.size)) if payoff.size > 1 else float('nan')
            try:
                vol = implied_vol(price, forward, K, T) if K > 0 else float('nan')
            except OutOfBandPriceError:
                vol = float('nan')
            points.append(SmilePoint(maturity=T, strike=K, call_price=price, implied_vol=vol, std_error=se))
    return points


class SpxEngine:
    """
    Produces rough Bergomi SPX smiles.
    """

    def __init__(self, xi0: ForwardVarianceCurve, params: ModelParams, paths: int,
                 steps_per_year: int = Config.SPX_STEPS_PER_YEAR, scheme: str = "log_euler",
                 seed: int = Config.SEED, threads: int = Config.THREADS, antithetic: bool = False):
        """Initialize the SPX engine."""
        self.xi0 = xi0
        self.params = params
        self.paths = paths
        self.steps_per_year = steps_per_year
        self.scheme = scheme
        self.seed = seed
        self.threads = threads
        self.antithetic = antithetic
        logger.info(f"SpxEngine initialized (H={params.H}, nu={params.nu}, rho={params.rho}, scheme={scheme})")

    def path_config(self, horizon: float) -> SpxPathConfig:
        grid = TimeGrid(n=self.steps_per_year, T=horizon)
        return SpxPathConfig(grid=grid, paths=self.paths, scheme=self.scheme, seed=self.seed,
                             antithetic=self.antithetic, threads=self.threads)

    def smile(self, maturities: Sequence[float], strikes: Sequence[float]) -> List[SmilePoint]:
        """Call prices and implied vols for every (maturity, strike)."""
        if len(maturities) == 0 or len(strikes) == 0:
            raise DomainError("smile needs at least one maturity and one strike")
        try:
            cfg = self.path_config(max(maturities))
            terminals = simulate_spx(self.xi0, self.params, cfg, maturities)
            points = price_calls(terminals, strikes)
            logger.info(f"Priced {len(points)} SPX calls on {self.paths} paths")
            return points
        except Exception as e:
            logger.error(f"Error producing SPX smile: {e}")
            raise
