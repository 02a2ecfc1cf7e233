"""VIX engine for the rough Bergomi model.

VIX_T^2 = (1/Delta) int_T^{T+Delta} xi_T(t) dt with xi_T given by the
conditional Volterra process. Two Monte-Carlo engines sample V^T on the
window grid (hybrid scheme + forward Euler, truncated Cholesky); the
futures bounds, log-normal moments and closed-form prices are analytic.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate, linalg, stats

from config import Config
from tools.bss import (STREAM_CHOLESKY, HybridConfig, TimeGrid, block_rng, extract_brownian,
                       map_path_blocks, simulate_volterra)
from tools.errors import DomainError, GridMismatchError, NumericalError
from tools.model import (ConditionalVolterra, ForwardVarianceCurve, ModelParams, conditional_covariance_vT,
                         conditional_gram_matrix, conditional_variance_vT, forward_variance)
from tools.specfun import c_h, gauss_2f1

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VixGrid:
    """Equidistant points tau_0 = T < ... < tau_N = T + Delta."""

    T: float
    N: int = Config.DEFAULT_VIX_POINTS
    Delta: float = Config.VIX_WINDOW

    def __post_init__(self):
        if self.T < 0:
            raise DomainError(f"VIX maturity must be non-negative, got T={self.T}")
        if self.N < 2:
            raise DomainError(f"VIX window needs N >= 2 integration points, got {self.N}")
        if self.Delta <= 0:
            raise DomainError("VIX window length must be positive")

    @property
    def tau(self) -> np.ndarray:
        return self.T + self.Delta * np.arange(self.N + 1) / self.N


@dataclass(frozen=True)
class LogNormalMoments:
    """Mean and variance of log(Delta VIX_T^2)."""

    mu: float
    sigma2: float
    variant: str

    def __post_init__(self):
        if self.sigma2 < 0:
            raise NumericalError(f"negative log-variance {self.sigma2} ({self.variant})")


@dataclass(frozen=True)
class VixFuturesBounds:
    lower: float
    upper: float


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Sample mean with its standard error."""

    estimate: float
    std_error: float
    paths: int

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "MonteCarloEstimate":
        samples = np.asarray(samples, dtype=float)
        m = samples.size
        se = float(samples.std(ddof=1) / np.sqrt(m)) if m > 1 else float('nan')
        return cls(float(samples.mean()), se, m)


@dataclass(frozen=True)
class CholeskyDiagnostic:
    n_points: int
    factorizable: bool
    condition_number: float


def vix_from_conditional_path(xi0: ForwardVarianceCurve, params: ModelParams, grid: VixGrid,
                              vT_path: ConditionalVolterra) -> np.ndarray:
    """
    VIX_T = sqrt((1/Delta) trapezoid_tau xi_T(tau)) for every sampled path.

    Args:
        xi0: Initial forward-variance curve
        params: Model parameters
        grid: Window grid; must match the path's time points
        vT_path: Samples of V^T on grid.tau

    Returns:
        VIX values, one per path
    """
    tau = grid.tau
    if abs(vT_path.base_time - grid.T) > 1e-12 or len(vT_path.times) != len(tau) \
            or not np.allclose(vT_path.times, tau, rtol=0.0, atol=1e-12):
        raise GridMismatchError("conditional Volterra path is not sampled on the VIX grid")
    q2 = forward_variance(xi0, params, grid.T, tau, vT_path.values)
    return np.sqrt(integrate.trapezoid(q2, tau, axis=-1) / grid.Delta)


def _zero_path(grid: VixGrid, paths: int) -> ConditionalVolterra:
    return ConditionalVolterra(grid.T, grid.tau, np.zeros((paths, grid.N + 1)))


def simulate_conditional_hsfe(grid: VixGrid, H: float, sim: HybridConfig,
                              base_grid: Optional[TimeGrid] = None) -> ConditionalVolterra:
    """
    V^T on the window by the hybrid scheme on [0, T] and a forward-Euler sum.

    V^T_tau = sum_i (Z_{t_i} - Z_{t_{i-1}}) (tau - t_{i-1})^(H-1/2) for tau > T; V^T_T = V_T.
    """
    if grid.T == 0:
        return _zero_path(grid, sim.paths)
    base_grid = base_grid or TimeGrid.covering(grid.T, min_steps=sim.kappa)
    if abs(base_grid.n_T / base_grid.n - grid.T) > 1e-9:
        raise GridMismatchError(f"simulation grid ends at {base_grid.n_T / base_grid.n}, not at T={grid.T}")

    ensemble = simulate_volterra(base_grid, H, sim)
    increments = np.diff(extract_brownian(ensemble, base_grid, sim.kappa, H), axis=1)
    tau = grid.tau
    left = base_grid.times[:-1]
    weights = (tau[1:, None] - left[None, :]) ** (H - 0.5)

    values = np.empty((sim.paths, grid.N + 1))
    values[:, 0] = ensemble.values[:, -1]
    values[:, 1:] = increments @ weights.T
    return ConditionalVolterra(grid.T, tau, values)


def simulate_vix_hsfe(xi0: ForwardVarianceCurve, params: ModelParams, grid: VixGrid, sim: HybridConfig,
                      base_grid: Optional[TimeGrid] = None) -> np.ndarray:
    """M samples of VIX_T from the hybrid-scheme/forward-Euler engine."""
    logger.info(f"HSFE VIX simulation: T={grid.T}, M={sim.paths}, N={grid.N}")
    path = simulate_conditional_hsfe(grid, params.H, sim, base_grid)
    return vix_from_conditional_path(xi0, params, grid, path)


def simulate_conditional_cholesky(grid: VixGrid, H: float, paths: int, seed: int = Config.SEED,
                                  threads: int = 1, block_size: int = Config.PATH_BLOCK) -> ConditionalVolterra:
    """
    V^T on the window: exact joint draw of the first points, then correlate and rescale.

    The first CHOLESKY_BLOCK points (all of them if the window has fewer) come from
    the Cholesky factor of their Gram matrix; later points follow
    V_j = sqrt(v_j) (rho_j V_{j-1} / sqrt(v_{j-1}) + sqrt(1 - rho_j^2) N(0, 1)).
    """
    if paths < 1:
        raise DomainError("number of paths must be positive")
    if grid.T == 0:
        return _zero_path(grid, paths)

    tau = grid.tau
    n_points = grid.N + 1
    exact = min(Config.CHOLESKY_BLOCK, n_points)
    try:
        factor = linalg.cholesky(conditional_gram_matrix(tau[:exact], grid.T, H), lower=True)
    except linalg.LinAlgError as e:
        logger.error(f"Cholesky factorisation of the {exact}-point block failed: {e}")
        raise NumericalError(f"Gram matrix of the first {exact} window points is not positive definite") from e

    variance = conditional_variance_vT(tau, grid.T, H)
    std = np.sqrt(variance)
    adjacent = conditional_covariance_vT(tau[:-1], tau[1:], grid.T, H)
    rho = np.clip(adjacent / (std[:-1] * std[1:]), -1.0, 1.0)

    def simulate_block(block: int) -> np.ndarray:
        normals = block_rng(seed, STREAM_CHOLESKY, block).standard_normal((block_size, n_points))
        values = np.empty_like(normals)
        values[:, :exact] = normals[:, :exact] @ factor.T
        for j in range(exact, n_points):
            values[:, j] = std[j] * (rho[j - 1] * values[:, j - 1] / std[j - 1]
                                     + np.sqrt(1.0 - rho[j - 1] ** 2) * normals[:, j])
        return values

    return ConditionalVolterra(grid.T, tau, map_path_blocks(paths, block_size, threads, simulate_block))


def simulate_vix_truncated_cholesky(xi0: ForwardVarianceCurve, params: ModelParams, grid: VixGrid, paths: int,
                                    seed: int = Config.SEED, threads: int = 1) -> np.ndarray:
    """M samples of VIX_T from the truncated-Cholesky engine."""
    logger.info(f"Truncated-Cholesky VIX simulation: T={grid.T}, M={paths}, N={grid.N}")
    path = simulate_conditional_cholesky(grid, params.H, paths, seed, threads)
    return vix_from_conditional_path(xi0, params, grid, path)


def _gauss_legendre(a: float, b: float, n: int):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def futures_bounds(xi0: ForwardVarianceCurve, params: ModelParams, T: float,
                   quadrature_N: int = Config.BOUNDS_QUADRATURE_N,
                   window: float = Config.VIX_WINDOW) -> VixFuturesBounds:
    """
    Bounds on the VIX future.

    lower = (1/Delta) int sqrt(xi0(t)) exp(nu^2 C_H^2 / (4H) ((t-T)^(2H) - t^(2H))) dt
    upper = sqrt((1/Delta) int xi0(t) dt)
    """
    if T < 0:
        raise DomainError(f"maturity must be non-negative, got T={T}")
    t, w = _gauss_legendre(T, T + window, quadrature_N)
    H = params.H
    damping = np.exp((params.nu * params.c_h) ** 2 / (4.0 * H) * ((t - T) ** (2.0 * H) - t ** (2.0 * H)))
    lower = float(np.sum(w * np.sqrt(xi0(t)) * damping) / window)
    upper = float(np.sqrt(xi0.integrate(T, T + window) / window))
    if not (np.isfinite(lower) and np.isfinite(upper)):
        raise NumericalError(f"futures bounds quadrature failed at T={T}")
    return VixFuturesBounds(lower=min(lower, upper), upper=upper)


def bounds_gap_expansion(f: float, df: float, window: float = Config.VIX_WINDOW) -> float:
    """
    Leading term of phi^2 - psi^2 for a deterministic curve f.

    phi^2 = (1/Delta) int f, psi = (1/Delta) int sqrt(f); expanding both to second
    order in Delta leaves Delta^2 f'^2 / (48 f).
    """
    if f <= 0:
        raise DomainError("curve value must be positive")
    return window ** 2 * df ** 2 / (48.0 * f)


def second_moment(xi0: ForwardVarianceCurve, params: ModelParams, T: float,
                  points: np.ndarray, weights: np.ndarray) -> float:
    """
    E[(sum_i w_i xi_T(t_i))^2] for points in the window [T, T + Delta].

    With quadrature weights this approximates E((Delta VIX_T^2)^2); with trapezoid
    weights on the VIX grid it is the exact second moment of the simulated variance swap.
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    H = params.H
    scale2 = (params.nu * params.c_h) ** 2
    var = conditional_variance_vT(points, T, H)
    cov = conditional_gram_matrix(points, T, H)
    drift = scale2 / H * ((points - T) ** (2.0 * H) - points ** (2.0 * H))
    theta = 2.0 * scale2 * (var[:, None] + var[None, :] + 2.0 * cov)
    integrand = np.outer(xi0(points), xi0(points)) * np.exp(drift[:, None] + drift[None, :] + theta)
    second = float(weights @ integrand @ weights)
    if not np.isfinite(second):
        raise NumericalError(f"second-moment quadrature failed at T={T}")
    return second


def moments_exact(xi0: ForwardVarianceCurve, params: ModelParams, T: float,
                  nodes: int = Config.MOMENTS_GL_NODES, window: float = Config.VIX_WINDOW) -> LogNormalMoments:
    """
    Exact first two moments of Delta VIX_T^2 matched to a log-normal.

    E(Delta VIX^2) = int xi0 and
    E((Delta VIX^2)^2) = int int xi0(u) xi0(t) exp(nu^2 C_H^2 / H (...)) exp(Theta_{u,t}) du dt
    with Theta = 2 nu^2 C_H^2 (Var V^T_u + Var V^T_t + 2 Cov(V^T_u, V^T_t)), on a
    Gauss-Legendre tensor grid. On the diagonal Theta takes its continuous value
    8 nu^2 C_H^2 Var V^T_u.

    The covariance has a |u - t|^(2H) kink on the diagonal, so convergence in the node
    count is algebraic: 64 nodes give sigma^2 to roughly 1e-6 relative. Raise `nodes`
    (or ROUGHVOL_MOMENTS_NODES) and compare with a doubled count when tighter moments matter.
    """
    if T < 0:
        raise DomainError(f"maturity must be non-negative, got T={T}")
    first = xi0.integrate(T, T + window)
    if T == 0 or params.nu == 0:
        return LogNormalMoments(mu=float(np.log(first)), sigma2=0.0, variant="exact")

    t, w = _gauss_legendre(T, T + window, nodes)
    second = second_moment(xi0, params, T, t, w)

    sigma2 = max(np.log(second) - 2.0 * np.log(first), 0.0)
    return LogNormalMoments(mu=float(np.log(first) - sigma2 / 2.0), sigma2=float(sigma2), variant="exact")


def sigma_bfg_squared(nu: float, H: float, T: float, window: float = Config.VIX_WINDOW,
                      method: str = "closed") -> float:
    """
    Log-variance of Delta VIX_T^2 when the variance swap is taken Gaussian.

    4 nu^2 C_H^2 / (Delta^2 H_+^2) int_0^T ((x + Delta)^(H_+) - x^(H_+))^2 dx,
    in closed form through 2F1(-H_+, 1 + H_+; 2 + H_+; -T/Delta) or by quadrature.
    """
    if T < 0:
        raise DomainError(f"maturity must be non-negative, got T={T}")
    if T == 0:
        return 0.0
    p = H + 0.5
    prefactor = 4.0 * nu ** 2 * c_h(H) ** 2 / (window ** 2 * p ** 2)
    if method == "closed":
        q = 2.0 * p + 1.0
        cross = T ** (p + 1.0) * window ** p / (p + 1.0) * gauss_2f1(-p, 1.0 + p, 2.0 + p, -T / window)
        integral = ((T + window) ** q - window ** q + T ** q) / q - 2.0 * cross
    elif method == "quadrature":
        integral, _ = integrate.quad(lambda x: ((x + window) ** p - x ** p) ** 2, 0.0, T,
                                     epsabs=0.0, epsrel=1e-13, limit=200)
    else:
        raise ValueError(f"Unknown method: {method}")
    return float(prefactor * integral)


def moments_bfg(xi0: ForwardVarianceCurve, params: ModelParams, T: float, window: float = Config.VIX_WINDOW,
                method: str = "closed") -> LogNormalMoments:
    """Log-normal moments with the Gaussian variance-swap approximation."""
    sigma2 = sigma_bfg_squared(params.nu, params.H, T, window, method)
    first = xi0.integrate(T, T + window)
    return LogNormalMoments(mu=float(np.log(first) - sigma2 / 2.0), sigma2=sigma2, variant="bfg")


def future_price_lognormal(xi0: ForwardVarianceCurve, moments: LogNormalMoments, T: float,
                           window: float = Config.VIX_WINDOW) -> float:
    """F = Delta^(-1/2) sqrt(int xi0) exp(-sigma^2 / 8)."""
    return float(np.sqrt(xi0.integrate(T, T + window) / window) * np.exp(-moments.sigma2 / 8.0))


def call_price_lognormal(xi0: ForwardVarianceCurve, moments: LogNormalMoments, T: float, K: float,
                         window: float = Config.VIX_WINDOW) -> float:
    """
    Call on VIX_T struck at K (VIX points) under the log-normal approximation.

    C = F Phi(-K~ + sigma/2) - K Phi(-K~) with
    K~ = (log(K^2 Delta) - log int xi0 + sigma^2/2) / sigma.
    """
    if K <= 0:
        raise DomainError(f"strike must be positive, got K={K}")
    forward = future_price_lognormal(xi0, moments, T, window)
    sigma = np.sqrt(moments.sigma2)
    if sigma == 0.0:
        return max(forward - K, 0.0)
    k_tilde = (np.log(K ** 2 * window) - np.log(xi0.integrate(T, T + window)) + moments.sigma2 / 2.0) / sigma
    return float(forward * stats.norm.cdf(-k_tilde + sigma / 2.0) - K * stats.norm.cdf(-k_tilde))


def put_price_lognormal(xi0: ForwardVarianceCurve, moments: LogNormalMoments, T: float, K: float,
                        window: float = Config.VIX_WINDOW) -> float:
    """Put by parity C - P = F - K."""
    forward = future_price_lognormal(xi0, moments, T, window)
    return call_price_lognormal(xi0, moments, T, K, window) - (forward - K)


def call_price_mc(samples: np.ndarray, K: float) -> MonteCarloEstimate:
    return MonteCarloEstimate.from_samples(np.maximum(np.asarray(samples) - K, 0.0))


def put_price_mc(samples: np.ndarray, K: float) -> MonteCarloEstimate:
    return MonteCarloEstimate.from_samples(np.maximum(K - np.asarray(samples), 0.0))


def adjacent_correlation(t: float, eps: float, T: float, H: float) -> float:
    """corr(V^T_t, V^T_{t+eps}) from the closed-form covariance."""
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if T <= 0:
        raise DomainError("adjacent correlation needs T > 0")
    cov = conditional_covariance_vT(t, t + eps, T, H)
    var = conditional_variance_vT(np.array([t, t + eps]), T, H)
    return float(cov / np.sqrt(var[0] * var[1]))


def cholesky_diagnostic(T: float, H: float, n_points: int, window: float = Config.VIX_WINDOW) -> CholeskyDiagnostic:
    """Whether the Gram matrix of V^T on n equidistant window points factorises in double precision."""
    if n_points < 2:
        raise DomainError("diagnostic needs at least two points")
    gram = conditional_gram_matrix(np.linspace(T, T + window, n_points), T, H)
    try:
        linalg.cholesky(gram, lower=True)
        factorizable = True
    except linalg.LinAlgError:
        factorizable = False
    return CholeskyDiagnostic(n_points, factorizable, float(np.linalg.cond(gram)))


class VixEngine:
    """
    Prices VIX futures and options for one forward-variance curve and parameter set.
    """

    ENGINES = ("cholesky", "hsfe")

    def __init__(self, xi0: ForwardVarianceCurve, params: ModelParams, n_points: int = Config.DEFAULT_VIX_POINTS,
                 seed: int = Config.SEED, threads: int = Config.THREADS,
                 steps_per_year: int = Config.STEPS_PER_YEAR, window: float = Config.VIX_WINDOW,
                 moments_nodes: int = Config.MOMENTS_GL_NODES):
        """Initialize the VIX engine."""
        if moments_nodes < 2:
            raise DomainError(f"moments_nodes must be >= 2, got {moments_nodes}")
        self.xi0 = xi0
        self.params = params
        self.n_points = n_points
        self.seed = seed
        self.threads = threads
        self.steps_per_year = steps_per_year
        self.window = window
        self.moments_nodes = moments_nodes
        logger.info(f"VixEngine initialized (H={params.H}, nu={params.nu}, curve={xi0.kind})")

    def grid(self, T: float) -> VixGrid:
        return VixGrid(T=T, N=self.n_points, Delta=self.window)

    def bounds(self, T: float) -> VixFuturesBounds:
        return futures_bounds(self.xi0, self.params, T, window=self.window)

    def moments(self, T: float, variant: str = "exact") -> LogNormalMoments:
        if variant == "exact":
            return moments_exact(self.xi0, self.params, T, nodes=self.moments_nodes, window=self.window)
        if variant == "bfg":
            return moments_bfg(self.xi0, self.params, T, window=self.window)
        raise ValueError(f"Unknown log-normal variant: {variant}")

    def future_price(self, T: float, variant: str = "exact") -> float:
        return future_price_lognormal(self.xi0, self.moments(T, variant), T, self.window)

    def call_price(self, T: float, K: float, variant: str = "exact") -> float:
        return call_price_lognormal(self.xi0, self.moments(T, variant), T, K, self.window)

    def put_price(self, T: float, K: float, variant: str = "exact") -> float:
        return put_price_lognormal(self.xi0, self.moments(T, variant), T, K, self.window)

    def samples(self, T: float, paths: int, engine: str = "cholesky") -> np.ndarray:
        """Monte-Carlo samples of VIX_T."""
        grid = self.grid(T)
        if engine == "cholesky":
            return simulate_vix_truncated_cholesky(self.xi0, self.params, grid, paths, self.seed, self.threads)
        if engine == "hsfe":
            sim = HybridConfig(kappa=self.params.kappa, seed=self.seed, paths=paths, threads=self.threads)
            base_grid = TimeGrid.covering(T, self.steps_per_year, self.params.kappa) if T > 0 else None
            return simulate_vix_hsfe(self.xi0, self.params, grid, sim, base_grid)
        raise ValueError(f"Unknown VIX engine: {engine}")

    def mc_future(self, T: float, paths: int, engine: str = "cholesky") -> MonteCarloEstimate:
        return MonteCarloEstimate.from_samples(self.samples(T, paths, engine))

    def futures_table(self, maturities: Sequence[float], paths: int,
                      engines: Sequence[str] = ENGINES) -> List[Dict[str, Any]]:
        """
        Bounds, Monte-Carlo and log-normal futures prices per maturity.

        Args:
            maturities: Futures maturities in years
            paths: Monte-Carlo paths per engine
            engines: Engines to run; skipped engines leave NaN columns

        Returns:
            One record per maturity with the columns of the vix-futures report
        """
        if len(maturities) == 0:
            raise DomainError("no maturities requested")
        rows = []
        for T in maturities:
            try:
                bounds = self.bounds(T)
                row = {'T': T, 'lower_bound': bounds.lower, 'upper_bound': bounds.upper}
                for engine, prefix in (("hsfe", "mc_hsfe"), ("cholesky", "mc_cholesky")):
                    if engine in engines:
                        estimate = self.mc_future(T, paths, engine)
                        row[prefix], row[f"{prefix}_se"] = estimate.estimate, estimate.std_error
                    else:
                        row[prefix], row[f"{prefix}_se"] = float('nan'), float('nan')
                row['lognormal_exact'] = self.future_price(T, "exact")
                row['lognormal_bfg'] = self.future_price(T, "bfg")
                rows.append(row)
                logger.info(f"T={T}: bounds [{bounds.lower:.6f}, {bounds.upper:.6f}], "
                            f"log-normal {row['lognormal_exact']:.6f}")
            except Exception as e:
                logger.error(f"Error pricing VIX futures at T={T}: {e}")
                raise
        return rows

    def options_table(self, T: float, strikes: Sequence[float], paths: int,
                      engine: str = "cholesky") -> List[Dict[str, Any]]:
        """Log-normal against Monte-Carlo call and put prices over strikes."""
        if len(strikes) == 0:
            raise DomainError("no strikes requested")
        samples = self.samples(T, paths, engine)
        future = MonteCarloEstimate.from_samples(samples)
        moments = self.moments(T, "exact")
        rows = []
        for K in strikes:
            call = call_price_mc(samples, K)
            put = put_price_mc(samples, K)
            rows.append({
                'T': T,
                'strike': K,
                'future_lognormal': future_price_lognormal(self.xi0, moments, T, self.window),
                'future_mc': future.estimate,
                'call_lognormal': call_price_lognormal(self.xi0, moments, T, K, self.window),
                'call_mc': call.estimate,
                'call_mc_se': call.std_error,
                'put_lognormal': put_price_lognormal(self.xi0, moments, T, K, self.window),
                'put_mc': put.estimate,
                'put_mc_se': put.std_error,
            })
        return rows
