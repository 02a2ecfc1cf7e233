"""Hybrid-scheme simulation of the truncated Brownian semistationary Volterra process.

V(t) = int_0^t (t-u)^(H-1/2) dZ_u is simulated on t_i = i/n with the kernel
treated exactly on the first kappa lags and through the optimal abscissae
b*_k beyond; the large-lag sum is a discrete convolution evaluated by FFT.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy import integrate, linalg, signal

from config import Config
from tools.errors import DomainError, GridMismatchError, NumericalError

logger = logging.getLogger(__name__)

# substream identifiers, one per independent source of noise
STREAM_VOLTERRA = 0
STREAM_ORTHOGONAL = 1
STREAM_CHOLESKY = 2


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant grid t_i = i/n, i = 0..n_T with n_T = floor(nT)."""

    n: float
    T: float

    @classmethod
    def covering(cls, T: float, steps_per_year: int = Config.STEPS_PER_YEAR, min_steps: int = 1) -> "TimeGrid":
        """Grid ending exactly at T with at least steps_per_year resolution."""
        if T <= 0:
            raise DomainError(f"grid horizon must be positive, got T={T}")
        n_T = max(int(np.ceil(steps_per_year * T - 1e-9)), min_steps)
        return cls(n=n_T / T, T=T)

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"grid needs at least 2 steps per year, got n={self.n}")
        if self.T <= 0:
            raise DomainError(f"grid horizon must be positive, got T={self.T}")
        if self.n_T < 1:
            raise DomainError(f"grid n={self.n}, T={self.T} has no step")

    @property
    def n_T(self) -> int:
        return int(np.floor(self.n * self.T + 1e-9))

    @property
    def dt(self) -> float:
        return 1.0 / self.n

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_T + 1) / self.n

    def index_of(self, t: float) -> int:
        """Grid index of time t; t must be a grid point."""
        i = int(round(t * self.n))
        if abs(i / self.n - t) > 1e-9 or not 0 <= i <= self.n_T:
            raise GridMismatchError(f"t={t} is not a point of the grid n={self.n}, T={self.T}")
        return i


@dataclass(frozen=True)
class HybridConfig:
    """Truncation kappa, RNG seed and number of paths M."""

    kappa: int = Config.DEFAULT_KAPPA
    seed: int = Config.SEED
    paths: int = 10_000
    block_size: int = Config.PATH_BLOCK
    threads: int = Config.THREADS

    def __post_init__(self):
        if self.kappa < 1:
            raise DomainError(f"hybrid truncation kappa must be >= 1, got {self.kappa}")
        if self.paths < 1:
            raise DomainError(f"number of paths must be positive, got {self.paths}")
        if self.block_size < 1 or self.threads < 1:
            raise DomainError("block_size and threads must be positive")


@dataclass
class SmallLagCovariance:
    """Covariance of (W_i, W_{i,1}, ..., W_{i,kappa}) and its Cholesky factor."""

    matrix: np.ndarray
    factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not np.allclose(self.matrix, self.matrix.T, rtol=0.0, atol=1e-14):
            raise NumericalError("small-lag covariance is not symmetric")
        try:
            self.factor = linalg.cholesky(self.matrix, lower=True)
        except linalg.LinAlgError as e:
            raise NumericalError(f"small-lag covariance is not positive definite: {e}") from e

    @property
    def kappa(self) -> int:
        return self.matrix.shape[0] - 1


@dataclass
class VolterraEnsemble:
    """M simulated paths of V on a grid plus the Brownian increments W_i driving them."""

    values: np.ndarray
    z_increments: np.ndarray
    grid: TimeGrid
    H: float
    kappa: int

    @property
    def paths(self) -> int:
        return self.values.shape[0]

    def to_frame(self, max_paths: Optional[int] = None) -> pd.DataFrame:
        """Long-format debug dump with columns path, i, t, V, Zinc."""
        m = self.paths if max_paths is None else min(max_paths, self.paths)
        n_points = self.grid.n_T + 1
        zinc = np.concatenate([self.z_increments[:m], np.full((m, 1), np.nan)], axis=1)
        return pd.DataFrame({
            'path': np.repeat(np.arange(m), n_points),
            'i': np.tile(np.arange(n_points), m),
            't': np.tile(self.grid.times, m),
            'V': self.values[:m].ravel(),
            'Zinc': zinc.ravel(),
        })


def _check_alpha(alpha: float) -> None:
    if not -0.5 < alpha < 0.5 or alpha == 0.0:
        raise DomainError(f"kernel exponent alpha must lie in (-1/2, 1/2) without 0, got {alpha}")


def b_star(k, alpha: float):
    """
    Optimal evaluation abscissa b*_k = ((k^(a+1) - (k-1)^(a+1)) / (a+1))^(1/a).

    Args:
        k: Lag index (scalar or array), k >= 1
        alpha: Kernel exponent in (-1/2, 1/2) without 0

    Returns:
        b*_k, which lies in [k-1, k]
    """
    _check_alpha(alpha)
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise DomainError("b* is defined for lags k >= 1")
    out = ((k ** (alpha + 1.0) - (k - 1.0) ** (alpha + 1.0)) / (alpha + 1.0)) ** (1.0 / alpha)
    return float(out) if out.ndim == 0 else out


def _cross_moment(k: int, j: int, n: int, alpha: float) -> float:
    """E(W_{i,k} W_{i,j}) = int_0^{1/n} (k/n-u)^a (j/n-u)^a du, in units u = x/n."""
    lo, hi = min(k, j), max(k, j)
    if lo == 1:
        # (1-x)^a is singular at x=1: integrate it as an algebraic weight
        value, _ = integrate.quad(lambda x: (hi - x) ** alpha, 0.0, 1.0,
                                  weight='alg', wvar=(0.0, alpha), epsabs=0.0, epsrel=1e-12)
    else:
        value, _ = integrate.quad(lambda x: (lo - x) ** alpha * (hi - x) ** alpha, 0.0, 1.0,
                                  epsabs=0.0, epsrel=1e-12, limit=200)
    if not np.isfinite(value):
        raise NumericalError(f"quadrature failed for small-lag cross moment (k={k}, j={j})")
    return value / n ** (2.0 * alpha + 1.0)


def small_lag_covariance(kappa: int, n: int, alpha: float) -> SmallLagCovariance:
    """
    Covariance matrix of (W_i, W_{i,1}, ..., W_{i,kappa}).

    Denominators are read as n^(a+1)(a+1) and n^(2a+1)(2a+1).
    """
    _check_alpha(alpha)
    if kappa < 1 or n < 2:
        raise DomainError(f"small-lag covariance needs kappa >= 1 and n >= 2 (kappa={kappa}, n={n})")

    cov = np.empty((kappa + 1, kappa + 1))
    cov[0, 0] = 1.0 / n
    for k in range(1, kappa + 1):
        cov[0, k] = cov[k, 0] = (k ** (alpha + 1.0) - (k - 1) ** (alpha + 1.0)) / ((alpha + 1.0) * n ** (alpha + 1.0))
        cov[k, k] = (k ** (2.0 * alpha + 1.0) - (k - 1) ** (2.0 * alpha + 1.0)) / ((2.0 * alpha + 1.0) * n ** (2.0 * alpha + 1.0))
        for j in range(1, k):
            cov[k, j] = cov[j, k] = _cross_moment(k, j, n, alpha)
    return SmallLagCovariance(cov)


def fft_convolve(weights: np.ndarray, increments: np.ndarray) -> np.ndarray:
    """
    Causal convolution out[i] = sum_{k<=i} weights[k] * increments[i-k].

    Same result as multiplying increments by the lower-triangular Toeplitz
    matrix built from weights, computed by FFT along the last axis.
    """
    weights = np.asarray(weights, dtype=float)
    increments = np.asarray(increments, dtype=float)
    if weights.size == 0 or increments.size == 0:
        raise DomainError("fft_convolve needs non-empty arrays")
    n = increments.shape[-1]
    kernel = weights[:n].reshape((1,) * (increments.ndim - 1) + (-1,))
    return signal.fftconvolve(increments, kernel, mode='full', axes=-1)[..., :n]


def direct_convolve(weights: np.ndarray, increments: np.ndarray) -> np.ndarray:
    """Reference O(n^2) version of fft_convolve using the explicit Toeplitz matrix."""
    weights = np.asarray(weights, dtype=float)
    increments = np.asarray(increments, dtype=float)
    n = increments.shape[-1]
    column = np.zeros(n)
    column[:min(n, weights.size)] = weights[:n]
    matrix = linalg.toeplitz(column, np.zeros(n))
    return increments @ matrix.T


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    """Generator of one path block; independent of how many blocks are drawn."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, block)))


def map_path_blocks(paths: int, block_size: int, threads: int,
                    block_fn: Callable[[int], np.ndarray]) -> np.ndarray:
    """
    Run block_fn over path blocks and stack the first `paths` rows.

    Blocks are always generated in full, so path m only depends on its own block.
    """
    n_blocks = -(-paths // block_size)
    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(block_fn, range(n_blocks)))
    else:
        blocks = [block_fn(b) for b in range(n_blocks)]
    return np.concatenate(blocks, axis=0)[:paths]


def kernel_weights(grid: TimeGrid, alpha: float, kappa: int) -> np.ndarray:
    """Weights g(b*_k/n) for k = 0..n_T, zero on the exact lags k <= kappa."""
    weights = np.zeros(grid.n_T + 1)
    if grid.n_T > kappa:
        k = np.arange(kappa + 1, grid.n_T + 1)
        weights[kappa + 1:] = (b_star(k, alpha) / grid.n) ** alpha
    return weights


def simulate_volterra(grid: TimeGrid, H: float, cfg: HybridConfig, method: str = "fft") -> VolterraEnsemble:
    """
    Simulate M paths of the Volterra process with the hybrid scheme.

    Args:
        grid: Simulation grid
        H: Hurst parameter in (0, 1/2)
        cfg: Truncation, seed and path count
        method: "fft" (default) or "direct" for the large-lag convolution

    Returns:
        VolterraEnsemble with values[:, 0] == 0 and the W_i increments
    """
    if not 0.0 < H < 0.5:
        raise DomainError(f"Hurst parameter must lie in (0, 1/2), got {H}")
    if cfg.kappa > grid.n_T:
        raise DomainError(f"kappa={cfg.kappa} exceeds the number of grid steps {grid.n_T}")
    if method not in ("fft", "direct"):
        raise ValueError(f"Unknown convolution method: {method}")

    alpha = H - 0.5
    kappa = cfg.kappa
    n_T = grid.n_T
    factor = small_lag_covariance(kappa, grid.n, alpha).factor
    shifted_weights = kernel_weights(grid, alpha, kappa)[1:]
    convolve = fft_convolve if method == "fft" else direct_convolve

    logger.info(f"Simulating {cfg.paths} Volterra paths (H={H}, n={grid.n}, n_T={n_T}, kappa={kappa}, {method})")

    def simulate_block(block: int) -> np.ndarray:
        rng = block_rng(cfg.seed, STREAM_VOLTERRA, block)
        draws = rng.standard_normal((cfg.block_size, n_T, kappa + 1)) @ factor.T
        increments = draws[:, :, 0]
        values = np.zeros((cfg.block_size, n_T + 1))
        values[:, 1:] = convolve(shifted_weights, increments)
        for k in range(1, kappa + 1):
            # exact small-lag part: W_{i-k,k} contributes to V(t_i)
            values[:, k:] += draws[:, :n_T - k + 1, k]
        return np.concatenate([values, increments], axis=1)

    stacked = map_path_blocks(cfg.paths, cfg.block_size, cfg.threads, simulate_block)
    return VolterraEnsemble(values=stacked[:, :n_T + 1], z_increments=stacked[:, n_T + 1:],
                            grid=grid, H=H, kappa=kappa)


def extract_brownian(ensemble: VolterraEnsemble, grid: TimeGrid, kappa: int, H: float) -> np.ndarray:
    """
    Recover the paths of the Brownian motion Z driving the ensemble.

    The first kappa increments are read off V as sqrt(2H) n^(H-1/2) (V(t_i) - V(t_{i-1}));
    later ones are the stored increments.

    Returns:
        Array of shape (M, n_T + 1) with Z[:, 0] == 0
    """
    if kappa < 1:
        raise DomainError(f"kappa must be >= 1, got {kappa}")
    if ensemble.grid != grid or ensemble.values.shape[1] != grid.n_T + 1:
        raise GridMismatchError("ensemble was simulated on a different grid")
    if ensemble.kappa != kappa or ensemble.H != H:
        raise GridMismatchError(f"ensemble has (kappa={ensemble.kappa}, H={ensemble.H}), requested ({kappa}, {H})")

    increments = ensemble.z_increments.copy()
    head = min(kappa, grid.n_T)
    scale = np.sqrt(2.0 * H) * grid.n ** (H - 0.5)
    increments[:, :head] = scale * np.diff(ensemble.values[:, :head + 1], axis=1)

    path = np.zeros_like(ensemble.values)
    np.cumsum(increments, axis=1, out=path[:, 1:])
    return path
