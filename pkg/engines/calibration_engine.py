"""Calibration of rough Bergomi parameters.

(nu, H) are fitted to VIX futures through the Gaussian variance-swap
log-normal price, whose log-variance has a closed form and an analytic
gradient. (nu, rho) are then fitted to SPX calls on paths precomputed at the
fixed H, so every objective evaluation reuses the same random numbers.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from config import Config
from engines.spx_engine import SpxPathConfig, draw_orthogonal, simulate_spx
from engines.vix_engine import sigma_bfg_squared
from tools.bss import HybridConfig, TimeGrid, VolterraEnsemble, simulate_volterra
from tools.errors import DomainError, GridMismatchError, InsufficientDataError
from tools.model import ForwardVarianceCurve, ModelParams
from tools.specfun import c_h, k_h

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FuturesQuote:
    maturity: float
    price: float

    def __post_init__(self):
        if self.maturity < 0:
            raise DomainError(f"futures maturity must be non-negative, got {self.maturity}")
        if self.price <= 0:
            raise DomainError(f"futures price must be positive, got {self.price}")


@dataclass(frozen=True)
class CallQuote:
    """SPX call on S_0 = 1, undiscounted."""

    maturity: float
    strike: float
    price: float

    def __post_init__(self):
        if self.maturity <= 0 or self.strike < 0 or self.price < 0:
            raise DomainError(f"invalid call quote: {self}")


@dataclass
class CalibrationResult:
    params: ModelParams
    objective: float
    gradient_norm: float
    iterations: int
    converged: bool
    residuals: List[float] = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {'params': self.params.to_dict(), 'objective': self.objective,
                'gradient_norm': self.gradient_norm, 'iterations': self.iterations,
                'converged': self.converged, 'per_quote_residuals': list(self.residuals),
                'message': self.message}


@dataclass
class PrecomputedPaths:
    """Volterra ensemble at a fixed H plus independent N(0, 1/n) increments Z_perp."""

    volterra: VolterraEnsemble
    z_perp: np.ndarray
    H_fixed: float

    def __post_init__(self):
        if self.z_perp.shape != self.volterra.z_increments.shape:
            raise GridMismatchError("orthogonal increments do not match the Volterra ensemble")
        if self.volterra.H != self.H_fixed:
            raise GridMismatchError("ensemble was simulated at a different H")

    @property
    def grid(self) -> TimeGrid:
        return self.volterra.grid


def precompute_paths(H: float, grid: TimeGrid, paths: int, seed: int = Config.SEED,
                     kappa: int = Config.DEFAULT_KAPPA, threads: int = 1) -> PrecomputedPaths:
    """Draw the common random numbers for SPX calibration at fixed H."""
    logger.info(f"Precomputing {paths} paths at H={H} on n={grid.n}, T={grid.T}")
    ensemble = simulate_volterra(grid, H, HybridConfig(kappa=kappa, seed=seed, paths=paths, threads=threads))
    return PrecomputedPaths(volterra=ensemble, z_perp=draw_orthogonal(grid, paths, seed, threads), H_fixed=H)


def _check_params(nu: float, H: float) -> None:
    if nu <= 0:
        raise DomainError(f"nu must be positive, got {nu}")
    if not 0.0 < H < 0.5:
        raise DomainError(f"Hurst parameter must lie in (0, 1/2), got {H}")


def sigma_bfg_squared_and_gradient(nu: float, H: float, T: float,
                                   window: float = Config.VIX_WINDOW) -> Tuple[float, float, float]:
    """
    sigma~^2 together with its derivatives in nu and H.

    d/dnu = 2 sigma~^2 / nu. With p = H + 1/2,
    d/dH = sigma~^2 (K_H - 2) / p
           + 8 nu^2 C_H^2 / (Delta^2 p^2) int_0^T ((x+D)^p - x^p)((x+D)^p log(x+D) - x^p log x) dx.
    """
    _check_params(nu, H)
    if T == 0:
        return 0.0, 0.0, 0.0
    sigma2 = sigma_bfg_squared(nu, H, T, window)
    p = H + 0.5

    def log_kernel(x: float) -> float:
        upper = (x + window) ** p
        lower = x ** p
        lower_log = lower * np.log(x) if x > 0 else 0.0
        return (upper - lower) * (upper * np.log(x + window) - lower_log)

    integral, _ = integrate.quad(log_kernel, 0.0, T, epsabs=0.0, epsrel=1e-12, limit=200)
    d_nu = 2.0 * sigma2 / nu
    d_H = sigma2 * (k_h(H) - 2.0) / p + 8.0 * nu ** 2 * c_h(H) ** 2 / (window ** 2 * p ** 2) * integral
    return sigma2, d_nu, float(d_H)


def futures_price_bfg(nu: float, H: float, xi0: ForwardVarianceCurve, T: float,
                      window: float = Config.VIX_WINDOW) -> float:
    sigma2 = sigma_bfg_squared(nu, H, T, window)
    return float(np.sqrt(xi0.integrate(T, T + window) / window) * np.exp(-sigma2 / 8.0))


def futures_residuals(nu: float, H: float, xi0: ForwardVarianceCurve, quotes: Sequence[FuturesQuote],
                      with_jacobian: bool = False):
    """Model minus market prices, optionally with the (quotes x [nu, H]) Jacobian."""
    _check_params(nu, H)
    residuals = np.empty(len(quotes))
    jacobian = np.empty((len(quotes), 2))
    for i, quote in enumerate(quotes):
        if with_jacobian:
            sigma2, d_nu, d_H = sigma_bfg_squared_and_gradient(nu, H, quote.maturity)
        else:
            sigma2 = sigma_bfg_squared(nu, H, quote.maturity)
        price = float(np.sqrt(xi0.integrate(quote.maturity, quote.maturity + Config.VIX_WINDOW)
                              / Config.VIX_WINDOW) * np.exp(-sigma2 / 8.0))
        residuals[i] = price - quote.price
        if with_jacobian:
            jacobian[i] = -price / 8.0 * np.array([d_nu, d_H])
    return (residuals, jacobian) if with_jacobian else residuals


def objective_futures(nu: float, H: float, xi0: ForwardVarianceCurve, quotes: Sequence[FuturesQuote]) -> float:
    """Sum of squared differences between model and quoted VIX futures."""
    return float(np.sum(futures_residuals(nu, H, xi0, quotes) ** 2))


def gradient_futures(nu: float, H: float, xi0: ForwardVarianceCurve, quotes: Sequence[FuturesQuote]) -> np.ndarray:
    """(dL/dnu, dL/dH) of objective_futures."""
    residuals, jacobian = futures_residuals(nu, H, xi0, quotes, with_jacobian=True)
    return 2.0 * residuals @ jacobian


def calibrate_futures(quotes: Sequence[FuturesQuote], xi0: ForwardVarianceCurve,
                      init: Tuple[float, float] = (0.5, 0.2),
                      rho: float = 0.0, kappa: int = Config.DEFAULT_KAPPA) -> CalibrationResult:
    """
    Fit (nu, H) to VIX futures quotes.

    Args:
        quotes: Futures quotes; two or more are needed for a determined fit
        xi0: Initial forward-variance curve
        init: Starting point (nu, H)
        rho, kappa: Carried into the returned ModelParams unchanged

    Returns:
        CalibrationResult; non-convergence sets converged=False
    """
    if len(quotes) == 0:
        raise InsufficientDataError("no futures quotes to calibrate to")
    h_lo, h_hi = Config.H_BOUNDS
    lower = np.array([1e-6, h_lo])
    upper = np.array([Config.NU_MAX, h_hi])
    x0 = np.clip(np.asarray(init, dtype=float), lower, upper)
    logger.info(f"Calibrating (nu, H) to {len(quotes)} VIX futures from nu={x0[0]}, H={x0[1]}")

    try:
        solution = optimize.least_squares(
            lambda x: futures_residuals(x[0], x[1], xi0, quotes),
            x0,
            jac=lambda x: futures_residuals(x[0], x[1], xi0, quotes, with_jacobian=True)[1],
            bounds=(lower, upper), method='trf',
            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=Config.MAX_ITERATIONS,
        )
    except Exception as e:
        logger.error(f"Futures calibration failed: {e}")
        raise

    nu, H = map(float, solution.x)
    residuals = futures_residuals(nu, H, xi0, quotes)
    gradient = gradient_futures(nu, H, xi0, quotes)
    converged = bool(solution.success) and len(quotes) >= 2
    message = solution.message if len(quotes) >= 2 else "underdetermined: fewer quotes than parameters"
    result = CalibrationResult(params=ModelParams(H=H, nu=nu, rho=rho, kappa=kappa),
                               objective=float(np.sum(residuals ** 2)),
                               gradient_norm=float(np.linalg.norm(gradient)),
                               iterations=int(solution.nfev), converged=converged,
                               residuals=residuals.tolist(), message=str(message))
    logger.info(f"Futures calibration: H={H:.6f}, nu={nu:.6f}, objective={result.objective:.3e}, "
                f"converged={converged}")
    return result


def spx_model_prices(nu: float, rho: float, pre: PrecomputedPaths, xi0: ForwardVarianceCurve,
                     call_quotes: Sequence[CallQuote], scheme: str = "log_euler") -> np.ndarray:
    """Monte-Carlo call prices on the precomputed paths, one per quote."""
    params = ModelParams(H=pre.H_fixed, nu=nu, rho=rho, kappa=pre.volterra.kappa)
    cfg = SpxPathConfig(grid=pre.grid, paths=pre.volterra.paths, scheme=scheme)
    maturities = sorted({q.maturity for q in call_quotes})
    terminals = simulate_spx(xi0, params, cfg, maturities, pre=pre)
    return np.array([np.maximum(terminals[q.maturity] - q.strike, 0.0).mean() for q in call_quotes])


def objective_spx(nu: float, rho: float, pre: PrecomputedPaths, xi0: ForwardVarianceCurve,
                  call_quotes: Sequence[CallQuote], scheme: str = "log_euler") -> float:
    """Sum of squared call-price errors with common random numbers."""
    if len(call_quotes) == 0:
        raise InsufficientDataError("no call quotes to evaluate")
    prices = spx_model_prices(nu, rho, pre, xi0, call_quotes, scheme)
    return float(np.sum((prices - np.array([q.price for q in call_quotes])) ** 2))


def calibrate_spx(pre: PrecomputedPaths, xi0: ForwardVarianceCurve, call_quotes: Sequence[CallQuote],
                  init: Tuple[float, float] = (1.0, -0.5), scheme: str = "log_euler") -> CalibrationResult:
    """
    Fit (nu, rho) to SPX calls with H fixed by the paths.

    Nelder-Mead on the box (0, NU_MAX] x (-1 + RHO_EPS, 1 - RHO_EPS).
    """
    if len(call_quotes) == 0:
        raise InsufficientDataError("no call quotes to calibrate to")
    bounds = [(1e-6, Config.NU_MAX), (-1.0 + Config.RHO_EPS, 1.0 - Config.RHO_EPS)]
    x0 = np.clip(np.asarray(init, dtype=float), [b[0] for b in bounds], [b[1] for b in bounds])
    logger.info(f"Calibrating (nu, rho) to {len(call_quotes)} SPX calls at H={pre.H_fixed}")

    def objective(x: np.ndarray) -> float:
        return objective_spx(x[0], x[1], pre, xi0, call_quotes, scheme)

    try:
        solution = optimize.minimize(objective, x0, method='Nelder-Mead', bounds=bounds,
                                     options={'xatol': 1e-10, 'fatol': 1e-24,
                                              'maxiter': 4 * Config.MAX_ITERATIONS,
                                              'maxfev': 8 * Config.MAX_ITERATIONS})
    except Exception as e:
        logger.error(f"SPX calibration failed: {e}")
        raise

    nu, rho = map(float, solution.x)
    prices = spx_model_prices(nu, rho, pre, xi0, call_quotes, scheme)
    residuals = prices - np.array([q.price for q in call_quotes])
    result = CalibrationResult(params=ModelParams(H=pre.H_fixed, nu=nu, rho=rho, kappa=pre.volterra.kappa),
                               objective=float(solution.fun), gradient_norm=float('nan'),
                               iterations=int(solution.nit), converged=bool(solution.success),
                               residuals=residuals.tolist(), message=str(solution.message))
    logger.info(f"SPX calibration: nu={nu:.6f}, rho={rho:.6f}, objective={result.objective:.3e}")
    return result


def synthetic_futures_quotes(params: ModelParams, xi0: ForwardVarianceCurve,
                             maturities: Sequence[float]) -> List[FuturesQuote]:
    """Model-generated futures quotes."""
    return [FuturesQuote(T, futures_price_bfg(params.nu, params.H, xi0, T)) for T in maturities]


def synthetic_call_quotes(params: ModelParams, pre: PrecomputedPaths, xi0: ForwardVarianceCurve,
                          maturities: Sequence[float], strikes: Sequence[float],
                          scheme: str = "log_euler") -> List[CallQuote]:
    """Model-generated call quotes on the precomputed paths."""
    skeleton = [CallQuote(T, K, 0.0) for T in maturities for K in strikes]
    prices = spx_model_prices(params.nu, params.rho, pre, xi0, skeleton, scheme)
    return [CallQuote(q.maturity, q.strike, float(p)) for q, p in zip(skeleton, prices)]


def quotes_from_records(records: Sequence[Dict[str, Any]], kind: str) -> List[Any]:
    """Build FuturesQuote or CallQuote objects from table records."""
    try:
        if kind == "futures":
            return [FuturesQuote(float(r['maturity_years']), float(r['price'])) for r in records]
        if kind == "calls":
            return [CallQuote(float(r['maturity_years']), float(r['strike']), float(r['price'])) for r in records]
    except KeyError as e:
        raise DomainError(f"quote record is missing column {e}") from e
    raise ValueError(f"Unknown quote kind: {kind}")


def calibration_summary(result: CalibrationResult, quotes: Optional[Sequence[Any]] = None) -> List[Dict[str, Any]]:
    """Per-quote residual rows for the report."""
    rows = []
    for i, residual in enumerate(result.residuals):
        row = {'index': i, 'residual': residual}
        if quotes is not None:
            quote = quotes[i]
            row['maturity_years'] = quote.maturity
            if isinstance(quote, CallQuote):
                row['strike'] = quote.strike
            row['quote'] = quote.price
            row['model'] = quote.price + residual
        rows.append(row)
    return rows
