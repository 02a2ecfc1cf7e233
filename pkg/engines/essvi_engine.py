"""eSSVI implied-volatility surface.

w(t, k) = (theta_t / 2) {1 + rho phi k + sqrt((phi k + rho)^2 + 1 - rho^2)}
with phi(theta) = eta theta^(-lambda) (1 + theta)^(lambda - 1) and
rho(theta) = (A - C) exp(-B theta) + C. The ATM total variance theta_t is a
natural cubic spline through the knots.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize, stats
from scipy.interpolate import CubicSpline

from config import Config
from engines.spx_engine import implied_vol as black_implied_vol
from tools.errors import (ArbitrageError, DegenerateParameterError, DomainError,
                          InsufficientDataError)
from tools.model import ForwardVarianceCurve

logger = logging.getLogger(__name__)

PARAM_NAMES = ("eta", "lam", "A", "B", "C")
LOWER_BOUNDS = np.array([1e-8, 0.0, -0.999, 0.0, -0.999])
UPPER_BOUNDS = np.array([np.inf, 1.0, 0.999, 1000.0, 0.999])


@dataclass(frozen=True)
class EssviParams:
    """Shape (eta, lam), correlation (A, B, C) and ATM total-variance knots (t, theta_t)."""

    eta: float
    lam: float
    A: float
    B: float
    C: float
    theta_knots: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.eta <= 0:
            raise DomainError(f"eta must be positive, got {self.eta}")
        if not (-1.0 < self.A < 1.0 and -1.0 < self.C < 1.0):
            raise DomainError(f"A and C must lie in (-1, 1), got A={self.A}, C={self.C}")
        if self.B < 0:
            raise DomainError(f"B must be non-negative, got {self.B}")
        knots = tuple((float(t), float(v)) for t, v in self.theta_knots)
        if knots:
            times = np.array([k[0] for k in knots])
            thetas = np.array([k[1] for k in knots])
            if times[0] <= 0 or np.any(np.diff(times) <= 0):
                raise DomainError("theta knots must have positive, strictly increasing maturities")
            if thetas[0] <= 0 or np.any(np.diff(thetas) < 0):
                raise DomainError("theta knots must be positive and nondecreasing")
        object.__setattr__(self, 'theta_knots', knots)

    def vector(self) -> np.ndarray:
        return np.array([self.eta, self.lam, self.A, self.B, self.C])

    def with_vector(self, x: Sequence[float]) -> "EssviParams":
        return replace(self, **dict(zip(PARAM_NAMES, map(float, x))))

    def to_dict(self) -> Dict[str, Any]:
        return {'eta': self.eta, 'lambda': self.lam, 'A': self.A, 'B': self.B, 'C': self.C,
                'theta_knots': [list(k) for k in self.theta_knots]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EssviParams":
        return cls(eta=data['eta'], lam=data['lambda'], A=data['A'], B=data['B'], C=data['C'],
                   theta_knots=tuple(tuple(k) for k in data.get('theta_knots', [])))


@dataclass(frozen=True)
class OptionQuote:
    """A vanilla quote as Black implied vol on the forward."""

    maturity: float
    strike: float
    forward: float
    implied_vol: float
    weight: float = 1.0

    def __post_init__(self):
        if self.maturity <= 0 or self.strike <= 0 or self.forward <= 0:
            raise DomainError(f"quote needs positive maturity, strike and forward: {self}")
        if self.implied_vol <= 0:
            raise DomainError(f"quote implied vol must be positive: {self}")
        if self.weight < 0:
            raise DomainError(f"quote weight must be non-negative: {self}")

    @classmethod
    def from_price(cls, maturity: float, strike: float, forward: float, call_price: float,
                   weight: float = 1.0) -> "OptionQuote":
        """Build a quote from an undiscounted call mid price."""
        return cls(maturity, strike, forward, black_implied_vol(call_price, forward, strike, maturity), weight)

    @property
    def log_moneyness(self) -> float:
        return float(np.log(self.strike / self.forward))

    @property
    def total_variance(self) -> float:
        return self.implied_vol ** 2 * self.maturity


@dataclass(frozen=True)
class VarianceSwapStrike:
    t: float
    total_variance: float


@dataclass(frozen=True)
class ArbitrageCheck:
    passed: bool
    margin: float


@dataclass
class EssviFitReport:
    rmse: float
    rmse_by_maturity: Dict[float, float]
    method: str
    success: bool
    butterfly_margins: List[float] = field(default_factory=list)
    calendar_margins: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['rmse_by_maturity'] = {str(t): v for t, v in self.rmse_by_maturity.items()}
        return data


def theta_interpolate(knots: Sequence[Tuple[float, float]], t):
    """
    ATM total variance theta_t from the knots.

    Natural cubic spline between knots, linear from the origin below the first
    knot, linear with the end slope beyond the last one. A single knot is
    extended linearly through the origin.
    """
    if len(knots) == 0:
        raise DomainError("theta interpolation needs at least one knot")
    times = np.array([k[0] for k in knots], dtype=float)
    thetas = np.array([k[1] for k in knots], dtype=float)
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise DomainError("theta is only defined for t >= 0")

    if len(knots) == 1:
        out = thetas[0] * tt / times[0]
    else:
        spline = CubicSpline(times, thetas, bc_type='natural')
        end_slope = float(spline(times[-1], 1))
        inside = spline(np.clip(tt, times[0], times[-1]))
        out = np.where(tt < times[0], thetas[0] * tt / times[0],
                       np.where(tt > times[-1], thetas[-1] + end_slope * (tt - times[-1]), inside))
    return float(out) if out.ndim == 0 else out


def rho_of_theta(A: float, B: float, C: float, theta):
    """rho(theta) = (A - C) exp(-B theta) + C."""
    return (A - C) * np.exp(-B * np.asarray(theta, dtype=float)) + C


def phi(params: EssviParams, theta):
    """phi(theta) = eta theta^(-lambda) (1 + theta)^(lambda - 1)."""
    theta = np.asarray(theta, dtype=float)
    return params.eta * theta ** (-params.lam) * (1.0 + theta) ** (params.lam - 1.0)


def _theta(params: EssviParams, t):
    theta = theta_interpolate(params.theta_knots, t)
    if np.any(np.asarray(theta) <= 0):
        raise DomainError(f"ATM total variance is not positive at t={t}")
    return theta


def _total_variance_at(params: EssviParams, theta, k):
    rho = rho_of_theta(params.A, params.B, params.C, theta)
    pk = phi(params, theta) * np.asarray(k, dtype=float)
    return 0.5 * theta * (1.0 + rho * pk + np.sqrt((pk + rho) ** 2 + 1.0 - rho ** 2))


def total_variance(params: EssviParams, t, k):
    """Total implied variance w(t, k) at log-moneyness k = log(K/F)."""
    out = _total_variance_at(params, _theta(params, t), k)
    return float(out) if np.ndim(out) == 0 else out


def implied_vol(params: EssviParams, t, k):
    """Black implied volatility sqrt(w(t, k) / t)."""
    return np.sqrt(total_variance(params, t, k) / np.asarray(t, dtype=float))


def butterfly_margin(params: EssviParams, theta) -> float:
    rho = rho_of_theta(params.A, params.B, params.C, theta)
    return 4.0 - theta * phi(params, theta) ** 2 * (1.0 + np.abs(rho))


def butterfly_check(params: EssviParams, t: float) -> ArbitrageCheck:
    """theta phi(theta)^2 (1 + |rho(theta)|) <= 4 at theta = theta_t."""
    margin = float(butterfly_margin(params, _theta(params, t)))
    return ArbitrageCheck(passed=margin >= 0.0, margin=margin)


def gamma_calendar(params: EssviParams, theta):
    """
    gamma = d(theta phi(theta))/dtheta / phi(theta).

    theta phi = eta theta^(1-lam) (1+theta)^(lam-1), so the derivative is
    phi ((1 - lam) - (1 - lam) theta / (1 + theta)) and gamma = (1 - lam) / (1 + theta).
    """
    return (1.0 - params.lam) / (1.0 + np.asarray(theta, dtype=float))


def calendar_margin(params: EssviParams, theta) -> float:
    rho = rho_of_theta(params.A, params.B, params.C, theta)
    drho = -params.B * (params.A - params.C) * np.exp(-params.B * theta)
    gamma = gamma_calendar(params, theta)
    return gamma - np.abs(theta * drho + rho * gamma)


def calendar_check(params: EssviParams, theta: float) -> ArbitrageCheck:
    """|theta rho'(theta) + rho(theta) gamma| <= gamma."""
    if theta <= 0:
        raise DomainError(f"theta must be positive, got {theta}")
    margin = float(calendar_margin(params, theta))
    return ArbitrageCheck(passed=margin >= 0.0, margin=margin)


def varswap_total_variance(params: EssviParams, t: float) -> VarianceSwapStrike:
    """
    Fair variance-swap strike in total variance.

    sigma_0(t)^2 t = (b^2 + 2a(c + theta)) / (2a^2) with chi = (1 - rho^2) theta phi / 4,
    a = 1 + (theta phi / 2)(rho - chi / 2), b = theta phi (chi - rho), c = theta phi chi.
    """
    theta = _theta(params, t)
    rho = rho_of_theta(params.A, params.B, params.C, theta)
    tp = theta * phi(params, theta)
    chi = 0.25 * (1.0 - rho ** 2) * tp
    a = 1.0 + 0.5 * tp * (rho - 0.5 * chi)
    b = tp * (chi - rho)
    c = tp * chi
    if abs(a) < 1e-12:
        raise DegenerateParameterError(f"variance-swap formula degenerates (a={a}) at t={t}")
    return VarianceSwapStrike(t=t, total_variance=float((b ** 2 + 2.0 * a * (c + theta)) / (2.0 * a ** 2)))


def log_contract_variance(params: EssviParams, t: float) -> float:
    """
    -2 E log(S_t / F) by static replication over the smile.

    2 int OTM(k) e^(-k) dk with forward-normalised Black OTM prices.
    """
    def integrand(k: float) -> float:
        # OTM(k) e^(-k), with the e^(-k) factor folded into log-cdfs
        sd = np.sqrt(total_variance(params, t, k))
        d1 = -k / sd + 0.5 * sd
        d2 = d1 - sd
        if k < 0:
            return stats.norm.cdf(-d2) - np.exp(-k + stats.norm.logcdf(-d1))
        return np.exp(-k + stats.norm.logcdf(d1)) - stats.norm.cdf(d2)

    puts, _ = integrate.quad(integrand, -np.inf, 0.0, epsabs=0.0, epsrel=1e-12, limit=500)
    calls, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=500)
    return 2.0 * (puts + calls)


def _implied_variance(params: EssviParams, t: float) -> float:
    return varswap_total_variance(params, t).total_variance / t


def xi0_from_variance(sigma2: Callable[[float], float], t: float, eps: float = Config.XI0_EPS) -> float:
    """
    xi0(t) = d/dt (t sigma_0(t)^2) ~ sigma_0^2(t) + t (sigma_0^2(t+eps) - sigma_0^2(t-eps)) / (2 eps).

    Args:
        sigma2: Variance-swap implied variance sigma_0^2 as a function of maturity
        t: Maturity in years
        eps: Central-difference step

    Returns:
        Forward variance at t
    """
    if t - eps <= 0:
        raise DomainError(f"xi0 extraction needs t - eps > 0 (t={t}, eps={eps})")
    slope = (sigma2(t + eps) - sigma2(t - eps)) / (2.0 * eps)
    value = sigma2(t) + t * slope
    if value <= 0:
        raise ArbitrageError(f"negative forward variance {value} at t={t}: the surface has calendar arbitrage")
    return float(value)


def xi0_extract(params: EssviParams, t: float, eps: float = Config.XI0_EPS) -> float:
    """Forward variance implied by the closed-form variance-swap strikes of the surface."""
    return xi0_from_variance(lambda u: _implied_variance(params, u), t, eps)


def forward_variance_curve(params: EssviParams, maturities: Sequence[float],
                           eps: float = Config.XI0_EPS) -> ForwardVarianceCurve:
    """Spline forward-variance curve through xi0 extracted at each maturity."""
    maturities = sorted(maturities)
    return ForwardVarianceCurve.from_knots(maturities, [xi0_extract(params, t, eps) for t in maturities])


def seed_theta_knots(quotes: Sequence[OptionQuote]) -> Tuple[Tuple[float, float], ...]:
    """ATM total variance per maturity, interpolated linearly in log-moneyness."""
    knots = []
    for t in sorted({q.maturity for q in quotes}):
        slice_ = sorted((q for q in quotes if q.maturity == t), key=lambda q: q.log_moneyness)
        k = np.array([q.log_moneyness for q in slice_])
        w = np.array([q.total_variance for q in slice_])
        knots.append((t, float(np.interp(0.0, k, w))))
    thetas = np.maximum.accumulate([v for _, v in knots])
    return tuple((t, float(v)) for (t, _), v in zip(knots, thetas))


def arbitrage_margins(params: EssviParams) -> Tuple[np.ndarray, np.ndarray]:
    """Butterfly and calendar margins at every knot."""
    thetas = np.array([v for _, v in params.theta_knots])
    return butterfly_margin(params, thetas), calendar_margin(params, thetas)


def fit_essvi(quotes: Sequence[OptionQuote], init: EssviParams,
              fixed: Optional[Dict[str, float]] = None) -> Tuple[EssviParams, EssviFitReport]:
    """
    Weighted least squares in total variance over (eta, lam, A, B, C).

    Bounded least squares first; when a butterfly or calendar margin is
    negative at some knot the fit is redone with SLSQP under those margins.

    Args:
        quotes: Option quotes, at least one per fitted maturity
        init: Starting shape parameters; its knots are replaced by ATM-seeded ones
        fixed: Parameters held at a given value, e.g. {'B': 0.0}

    Returns:
        Fitted parameters and a report with RMSE per maturity
    """
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(PARAM_NAMES)
    if unknown:
        raise DomainError(f"Unknown eSSVI parameters: {sorted(unknown)}")
    free = np.array([name not in fixed for name in PARAM_NAMES])
    if len(quotes) < int(free.sum()):
        raise InsufficientDataError(f"{len(quotes)} quotes cannot determine {int(free.sum())} parameters")

    base = replace(init, theta_knots=seed_theta_knots(quotes), **fixed)
    t = np.array([q.maturity for q in quotes])
    k = np.array([q.log_moneyness for q in quotes])
    w_market = np.array([q.total_variance for q in quotes])
    sqrt_weight = np.sqrt([q.weight for q in quotes])
    theta = theta_interpolate(base.theta_knots, t)
    start = base.vector()
    lower, upper = LOWER_BOUNDS[free], UPPER_BOUNDS[free]

    def params_of(z: np.ndarray) -> EssviParams:
        x = start.copy()
        x[free] = z
        return base.with_vector(x)

    def residuals(z: np.ndarray) -> np.ndarray:
        return sqrt_weight * (_total_variance_at(params_of(z), theta, k) - w_market)

    logger.info(f"Fitting eSSVI to {len(quotes)} quotes over {len(base.theta_knots)} maturities")
    z0 = np.clip(start[free], lower, np.minimum(upper, 1e6))
    solution = optimize.least_squares(residuals, z0, bounds=(lower, upper), method='trf',
                                      xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    fitted, method, success = params_of(solution.x), "least_squares", bool(solution.success)
    butterfly, calendar = arbitrage_margins(fitted)

    if np.any(butterfly < 0) or np.any(calendar < 0):
        logger.warning("Unconstrained eSSVI fit violates arbitrage conditions; refitting with SLSQP")
        constraints = [{'type': 'ineq', 'fun': lambda z: np.concatenate(arbitrage_margins(params_of(z)))}]
        refit = optimize.minimize(lambda z: 0.5 * np.sum(residuals(z) ** 2), solution.x, method='SLSQP',
                                  bounds=list(zip(lower, upper)), constraints=constraints,
                                  options={'ftol': 1e-15, 'maxiter': Config.MAX_ITERATIONS})
        fitted, method, success = params_of(refit.x), "slsqp", bool(refit.success)
        butterfly, calendar = arbitrage_margins(fitted)
        if np.any(butterfly < -1e-10) or np.any(calendar < -1e-10):
            logger.error("eSSVI fit could not satisfy the arbitrage constraints")
            raise ArbitrageError(
                f"no arbitrage-free eSSVI fit (butterfly {butterfly.min():.3g}, calendar {calendar.min():.3g})")

    errors = _total_variance_at(fitted, theta, k) - w_market
    by_maturity = {float(m): float(np.sqrt(np.mean(errors[t == m] ** 2))) for m in np.unique(t)}
    report = EssviFitReport(rmse=float(np.sqrt(np.mean(errors ** 2))), rmse_by_maturity=by_maturity,
                            method=method, success=success,
                            butterfly_margins=butterfly.tolist(), calendar_margins=calendar.tolist())
    logger.info(f"eSSVI fit ({method}) RMSE {report.rmse:.3e}")
    return fitted, report


@dataclass(frozen=True)
class EssviSurface:
    """Fitted eSSVI surface with its derived term structures."""

    params: EssviParams

    @property
    def maturities(self) -> List[float]:
        return [t for t, _ in self.params.theta_knots]

    def total_variance(self, t, k):
        return total_variance(self.params, t, k)

    def implied_vol(self, t, k):
        return implied_vol(self.params, t, k)

    def arbitrage_report(self) -> List[Dict[str, Any]]:
        rows = []
        for t, theta in self.params.theta_knots:
            butterfly = butterfly_check(self.params, t)
            calendar = calendar_check(self.params, theta)
            rows.append({'maturity_years': t, 'theta': theta,
                         'butterfly_ok': butterfly.passed, 'butterfly_margin': butterfly.margin,
                         'calendar_ok': calendar.passed, 'calendar_margin': calendar.margin})
        return rows

    def is_arbitrage_free(self) -> bool:
        return all(r['butterfly_ok'] and r['calendar_ok'] for r in self.arbitrage_report())

    def varswap_table(self, maturities: Optional[Sequence[float]] = None,
                      with_replication: bool = False) -> List[Dict[str, Any]]:
        rows = []
        for t in maturities or self.maturities:
            strike = varswap_total_variance(self.params, t)
            row = {'maturity_years': t, 'total_variance': strike.total_variance,
                   'varswap_vol': float(np.sqrt(strike.total_variance / t)),
                   'xi0': xi0_extract(self.params, t)}
            if with_replication:
                row['log_contract_variance'] = log_contract_variance(self.params, t)
            rows.append(row)
        return rows

    def forward_variance_curve(self, maturities: Optional[Sequence[float]] = None) -> ForwardVarianceCurve:
        return forward_variance_curve(self.params, maturities or self.maturities)

    def to_dict(self) -> Dict[str, Any]:
        return self.params.to_dict()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EssviSurface":
        return cls(EssviParams.from_dict(data))
