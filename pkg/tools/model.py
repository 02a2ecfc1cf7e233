"""Rough Bergomi model state.

Parameters, initial forward-variance curves, the instantaneous variance
V_t = xi0(t) E(2 nu C_H V_t), and the conditional Volterra process
V^T_t = int_0^T (t-u)^(H-1/2) dZ_u with its closed-form covariance.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from tools.errors import DomainError, OrderError
from tools.specfun import c_h, hyp_F

ArrayLike = Union[float, np.ndarray]

SCENARIO_LEVEL = 0.234 ** 2
_ORDER_TOL = 1e-14


@dataclass(frozen=True)
class ModelParams:
    """
    Rough Bergomi parameters.

    nu = 0 is accepted as the deterministic-volatility limit.
    """

    H: float
    nu: float
    rho: float = 0.0
    kappa: int = 2

    def __post_init__(self):
        if not 0.0 < self.H < 0.5:
            raise DomainError(f"Hurst parameter must lie in (0, 1/2), got {self.H}")
        if self.nu < 0.0:
            raise DomainError(f"vol-of-vol must be non-negative, got {self.nu}")
        if not -1.0 < self.rho < 1.0:
            raise DomainError(f"correlation must lie in (-1, 1), got {self.rho}")
        if self.kappa < 1:
            raise DomainError(f"hybrid truncation kappa must be >= 1, got {self.kappa}")

    @property
    def h_plus(self) -> float:
        return self.H + 0.5

    @property
    def h_minus(self) -> float:
        return self.H - 0.5

    @property
    def c_h(self) -> float:
        return c_h(self.H)

    def with_updates(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {'H': self.H, 'nu': self.nu, 'rho': self.rho, 'kappa': self.kappa}


def nu_from_eta(eta: float, H: float) -> float:
    """
    Convert the fBm-normalised vol-of-vol eta into nu.

    eta * W^H_t carries the same noise as 2 nu C_H V_t when nu = eta sqrt(2H) / (2 C_H);
    eta = 1.9 at H = 0.07 gives nu ~ 1.2287.
    """
    return eta * np.sqrt(2.0 * H) / (2.0 * c_h(H))


@dataclass(frozen=True)
class ForwardVarianceCurve:
    """
    Initial forward-variance curve t -> xi0(t), in variance per year.

    kind is one of flat, scenario2, scenario3 (scaled by `level`) or spline
    (natural cubic spline through `knots`, constant beyond the end knots).
    """

    kind: str
    level: float = SCENARIO_LEVEL
    knots: Tuple[Tuple[float, float], ...] = ()
    _spline: Optional[CubicSpline] = field(default=None, init=False, repr=False, compare=False)

    KINDS = ("flat", "scenario2", "scenario3", "spline")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"Unknown forward-variance curve kind: {self.kind}")
        if self.kind != "spline":
            if self.level <= 0:
                raise DomainError(f"forward-variance level must be positive, got {self.level}")
            return

        if len(self.knots) < 2:
            raise DomainError("spline curve needs at least two knots")
        times, values = np.array(self.knots, dtype=float).T
        if np.any(np.diff(times) <= 0) or times[0] < 0:
            raise DomainError("spline knots must have non-negative, strictly increasing times")
        spline = CubicSpline(times, values, bc_type='natural')
        fine = np.linspace(times[0], times[-1], 20 * len(times) + 1)
        if np.any(values <= 0) or np.any(spline(fine) <= 0):
            raise DomainError("spline forward-variance curve is not strictly positive")
        object.__setattr__(self, 'knots', tuple((float(t), float(v)) for t, v in zip(times, values)))
        object.__setattr__(self, '_spline', spline)

    @classmethod
    def flat(cls, level: float) -> "ForwardVarianceCurve":
        return cls("flat", level=level)

    @classmethod
    def scenario1(cls, level: float = SCENARIO_LEVEL) -> "ForwardVarianceCurve":
        return cls("flat", level=level)

    @classmethod
    def scenario2(cls, level: float = SCENARIO_LEVEL) -> "ForwardVarianceCurve":
        return cls("scenario2", level=level)

    @classmethod
    def scenario3(cls, level: float = SCENARIO_LEVEL) -> "ForwardVarianceCurve":
        return cls("scenario3", level=level)

    @classmethod
    def from_knots(cls, times: Sequence[float], values: Sequence[float]) -> "ForwardVarianceCurve":
        return cls("spline", knots=tuple(zip(times, values)))

    @classmethod
    def scenario(cls, number: int, level: float = SCENARIO_LEVEL) -> "ForwardVarianceCurve":
        factories = {1: cls.scenario1, 2: cls.scenario2, 3: cls.scenario3}
        if number not in factories:
            raise DomainError(f"scenario must be 1, 2 or 3, got {number}")
        return factories[number](level)

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return self.evaluate(t)

    def evaluate(self, t: ArrayLike) -> ArrayLike:
        tt = np.asarray(t, dtype=float)
        if np.any(tt < 0):
            raise DomainError("forward variance is only defined for t >= 0")
        if self.kind == "flat":
            out = np.full_like(tt, self.level)
        elif self.kind == "scenario2":
            out = self.level * (1.0 + tt) ** 2
        elif self.kind == "scenario3":
            out = self.level * np.sqrt(1.0 + tt)
        else:
            t0, t1 = self.knots[0][0], self.knots[-1][0]
            out = self._spline(np.clip(tt, t0, t1))
        return float(out) if out.ndim == 0 else out

    def integrate(self, a: ArrayLike, b: ArrayLike) -> ArrayLike:
        """int_a^b xi0(t) dt, exact for every kind."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.any(a < 0) or np.any(b < a):
            raise OrderError("integration bounds must satisfy 0 <= a <= b")
        if self.kind == "flat":
            out = self.level * (b - a)
        elif self.kind == "scenario2":
            out = self.level * ((1.0 + b) ** 3 - (1.0 + a) ** 3) / 3.0
        elif self.kind == "scenario3":
            out = self.level * 2.0 / 3.0 * ((1.0 + b) ** 1.5 - (1.0 + a) ** 1.5)
        else:
            (t0, v0), (t1, v1) = self.knots[0], self.knots[-1]
            antiderivative = self._spline.antiderivative()
            inner = antiderivative(np.clip(b, t0, t1)) - antiderivative(np.clip(a, t0, t1))
            below = np.minimum(b, t0) - np.minimum(a, t0)
            above = np.maximum(b, t1) - np.maximum(a, t1)
            out = v0 * below + inner + v1 * above
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "spline":
            return {'kind': self.kind, 'knots': [list(k) for k in self.knots]}
        return {'kind': self.kind, 'params': {'level': self.level}}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ForwardVarianceCurve":
        kind = data.get('kind')
        if kind == "spline":
            return cls("spline", knots=tuple(tuple(k) for k in data.get('knots', [])))
        return cls(kind, level=float(data.get('params', {}).get('level', SCENARIO_LEVEL)))


@dataclass(frozen=True)
class ConditionalVolterra:
    """Samples of V^T_t, one row per path, at the times t >= T."""

    base_time: float
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape[-1] != len(self.times):
            raise DomainError("conditional Volterra values do not match the time points")
        if np.any(np.asarray(self.times) < self.base_time - _ORDER_TOL):
            raise OrderError("conditional Volterra times must not precede the base time")


def variance_process(xi0: ForwardVarianceCurve, params: ModelParams, volterra_value: ArrayLike, t: ArrayLike) -> ArrayLike:
    """V_t = xi0(t) exp(2 nu C_H V_t - nu^2 C_H^2 t^(2H) / H)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("variance process is defined for t >= 0")
    scale = params.nu * params.c_h
    return xi0(t) * np.exp(2.0 * scale * np.asarray(volterra_value) - scale ** 2 * t ** (2.0 * params.H) / params.H)


def conditional_variance_vT(t: ArrayLike, T: ArrayLike, H: float) -> ArrayLike:
    """Var(V^T_t) = (t^(2H) - (t-T)^(2H)) / (2H) for t >= T >= 0."""
    t = np.asarray(t, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise DomainError("base time T must be non-negative")
    if np.any(t < T - _ORDER_TOL):
        raise OrderError("conditional variance requires t >= T")
    lag = np.maximum(t - T, 0.0)
    out = (t ** (2.0 * H) - lag ** (2.0 * H)) / (2.0 * H)
    return float(out) if out.ndim == 0 else out


def conditional_covariance_vT(s: ArrayLike, t: ArrayLike, T: ArrayLike, H: float) -> ArrayLike:
    """
    E(V^T_t V^T_s) = int_0^T ((t-u)(s-u))^(H-1/2) du.

    Args:
        s, t: Times >= T (broadcast together)
        T: Conditioning time
        H: Hurst parameter

    Returns:
        Covariance, symmetric in (s, t); the F argument is kept <= 0 by
        evaluating at (min, max).
    """
    s, t, T = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (s, t, T)))
    shape = s.shape
    s, t, T = s.ravel(), t.ravel(), T.ravel()
    if np.any(T < 0):
        raise DomainError("base time T must be non-negative")
    if np.any(s < T - _ORDER_TOL) or np.any(t < T - _ORDER_TOL):
        raise OrderError("conditional covariance requires s >= T and t >= T")

    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    out = np.array(conditional_variance_vT(lo, np.minimum(T, lo), H), dtype=float)

    off = (hi > lo) & (T > 0)
    if np.any(off):
        lo_, hi_, T_ = lo[off], hi[off], T[off]
        gap = hi_ - lo_
        lag = np.maximum(lo_ - T_, 0.0)
        h_plus = H + 0.5
        out[off] = gap ** (H - 0.5) / h_plus * (
            lo_ ** h_plus * hyp_F(-lo_ / gap, H) - lag ** h_plus * hyp_F(-lag / gap, H)
        )
    out[T <= 0] = 0.0
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def conditional_gram_matrix(points: Sequence[float], T: float, H: float) -> np.ndarray:
    """Covariance matrix of (V^T_{p_0}, ..., V^T_{p_m}) on the given points."""
    points = np.asarray(points, dtype=float)
    gram = conditional_covariance_vT(points[:, None], points[None, :], T, H)
    return 0.5 * (gram + gram.T)


def eta_T(t: ArrayLike, volterra_vT: ArrayLike, params: ModelParams, T: Optional[float] = None) -> ArrayLike:
    """eta_T(t) = exp(2 nu C_H V^T_t); pass T to enforce t >= T."""
    if T is not None and np.any(np.asarray(t) < T - _ORDER_TOL):
        raise OrderError("eta_T requires t >= T")
    return np.exp(2.0 * params.nu * params.c_h * np.asarray(volterra_vT, dtype=float))


def forward_variance(xi0: ForwardVarianceCurve, params: ModelParams, T: float, t: ArrayLike,
                     volterra_vT: ArrayLike) -> ArrayLike:
    """xi_T(t) = xi0(t) eta_T(t) exp(nu^2 C_H^2 / H ((t-T)^(2H) - t^(2H)))."""
    t = np.asarray(t, dtype=float)
    if np.any(t < T - _ORDER_TOL):
        raise OrderError("forward variance xi_T(t) requires t >= T")
    H = params.H
    lag = np.maximum(t - T, 0.0)
    drift = (params.nu * params.c_h) ** 2 / H * (lag ** (2.0 * H) - t ** (2.0 * H))
    return xi0(t) * eta_T(t, volterra_vT, params) * np.exp(drift)
