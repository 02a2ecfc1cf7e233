"""Special functions used by the rough Bergomi formulas.

Gauss hypergeometric 2F1 on the real axis (z <= 1), the helper
F(u) = 2F1(-H_-, H_+, 1 + H_+, u), digamma, the kernel constant C_H and
the log-derivative constant K_H.

2F1 is summed as a power series on |z| <= 0.9 and routed through linear
transformations elsewhere:

    -2 <= z < -0.9   Pfaff:  (1-z)^(-a) 2F1(a, c-b; c; z/(z-1))
    z < -2           1/z connection formula; for integer a-b the limit in a is taken
                     from symmetric offsets with one Richardson step
    0.9 < z < 1      1-z connection formula (needs c-a-b non-integer, else series)
    z == 1           Gauss summation (needs c-a-b > 0)
"""

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

from tools.errors import ConvergenceError, DegenerateParameterError, DomainError

ArrayLike = Union[float, np.ndarray]

SERIES_TOL = 1e-15
MAX_TERMS = 10_000
SERIES_RADIUS = 0.9
PFAFF_LIMIT = -2.0
# offset in a for the integer a-b limit of the 1/z formula
INTEGER_GAP_STEP = 2e-4


@dataclass(frozen=True)
class HypergeoArgs:
    """Parameters (a, b, c) and argument z of 2F1(a, b; c; z)."""

    a: float
    b: float
    c: float
    z: ArrayLike

    def validate(self) -> None:
        if self.c <= 0 and float(self.c).is_integer():
            raise DegenerateParameterError(f"2F1 undefined for non-positive integer c={self.c}")
        if np.any(np.asarray(self.z) > 1.0):
            raise DomainError("2F1 is only evaluated on the real axis z <= 1")

    def evaluate(self) -> ArrayLike:
        return gauss_2f1(self.a, self.b, self.c, self.z)


def _is_integer(x: float) -> bool:
    return abs(x - round(x)) < 1e-12


def _series(a: float, b: float, c: float, z: np.ndarray) -> np.ndarray:
    """Truncated power series, vectorised over z."""
    term = np.ones_like(z)
    total = np.ones_like(z)
    small_before = np.zeros(z.shape, dtype=bool)
    for n in range(MAX_TERMS):
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1.0))) * z
        total = total + term
        small = np.abs(term) <= SERIES_TOL * np.abs(total)
        # two consecutive small terms, so a near-zero (a+n) factor cannot stop us early
        if np.all(small & small_before):
            return total
        small_before = small
    raise ConvergenceError(f"2F1 series did not converge in {MAX_TERMS} terms (a={a}, b={b}, c={c})")


def _pfaff(a: float, b: float, c: float, z: np.ndarray) -> np.ndarray:
    w = z / (z - 1.0)
    return (1.0 - z) ** (-a) * _series(a, c - b, c, w)


def _reciprocal(a: float, b: float, c: float, z: np.ndarray) -> np.ndarray:
    """Connection formula mapping z < -1 onto 1/z in (-1, 0)."""
    inv = 1.0 / z
    gc = special.gamma(c)
    first = (gc * special.gamma(b - a) * special.rgamma(b) * special.rgamma(c - a)
             * (-z) ** (-a) * _series(a, a - c + 1.0, a - b + 1.0, inv))
    second = (gc * special.gamma(a - b) * special.rgamma(a) * special.rgamma(c - b)
              * (-z) ** (-b) * _series(b, b - c + 1.0, b - a + 1.0, inv))
    return first + second


def _reciprocal_integer_gap(a: float, b: float, c: float, z: np.ndarray) -> np.ndarray:
    """
    1/z route when a-b is an integer.

    The two connection terms have cancelling poles there; the function is analytic in a,
    so the even part in the offset is extrapolated to zero offset (error O(step^4)).
    """
    def even_part(step: float) -> np.ndarray:
        return 0.5 * (_reciprocal(a + step, b, c, z) + _reciprocal(a - step, b, c, z))

    return (4.0 * even_part(INTEGER_GAP_STEP / 2.0) - even_part(INTEGER_GAP_STEP)) / 3.0


def _one_minus(a: float, b: float, c: float, z: np.ndarray) -> np.ndarray:
    """Connection formula mapping z near 1 onto 1-z."""
    s = c - a - b
    gc = special.gamma(c)
    x = 1.0 - z
    first = gc * special.gamma(s) * special.rgamma(c - a) * special.rgamma(c - b) * _series(a, b, 1.0 - s, x)
    second = (gc * special.gamma(-s) * special.rgamma(a) * special.rgamma(b)
              * x ** s * _series(c - a, c - b, 1.0 + s, x))
    return first + second


def gauss_2f1(a: float, b: float, c: float, z: ArrayLike) -> ArrayLike:
    """
    Evaluate the Gauss hypergeometric function 2F1(a, b; c; z) for real z <= 1.

    Args:
        a, b, c: Real parameters; c must not be a non-positive integer
        z: Scalar or array argument, every entry <= 1

    Returns:
        2F1 values with the shape of z (a float for scalar input)
    """
    HypergeoArgs(a, b, c, z).validate()
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.ones_like(zz)

    if a == 0.0 or b == 0.0:
        return float(out[0]) if scalar else out

    near = np.abs(zz) <= SERIES_RADIUS
    mid = (zz < -SERIES_RADIUS) & (zz >= PFAFF_LIMIT)
    far = zz < PFAFF_LIMIT
    right = (zz > SERIES_RADIUS) & (zz < 1.0)
    unit = zz == 1.0

    if np.any(near):
        out[near] = _series(a, b, c, zz[near])
    if np.any(mid):
        out[mid] = _pfaff(a, b, c, zz[mid])
    if np.any(far):
        if _is_integer(a - b):
            out[far] = _reciprocal_integer_gap(a, b, c, zz[far])
        else:
            out[far] = _reciprocal(a, b, c, zz[far])
    if np.any(right):
        if _is_integer(c - a - b):
            out[right] = _series(a, b, c, zz[right])
        else:
            out[right] = _one_minus(a, b, c, zz[right])
    if np.any(unit):
        if c - a - b <= 0:
            raise DomainError(f"2F1 diverges at z=1 when c-a-b={c - a - b} <= 0")
        out[unit] = special.gamma(c) * special.gamma(c - a - b) * special.rgamma(c - a) * special.rgamma(c - b)

    return float(out[0]) if scalar else out


def _check_hurst(H: float) -> None:
    if not 0.0 < H < 0.5:
        raise DomainError(f"Hurst parameter must lie in (0, 1/2), got {H}")


def hyp_F(u: ArrayLike, H: float) -> ArrayLike:
    """F(u) = 2F1(-H_-, H_+, 1 + H_+, u), the helper of the Volterra covariance."""
    h_plus = H + 0.5
    return gauss_2f1(0.5 - H, h_plus, 1.0 + h_plus, u)


def digamma(x: ArrayLike) -> ArrayLike:
    """Digamma function on the positive half-line."""
    if np.any(np.asarray(x) <= 0):
        raise DomainError("digamma is only evaluated for x > 0")
    return special.digamma(x)


def c_h(H: float) -> float:
    """C_H = sqrt(2H Gamma(2 - H_+) / (Gamma(H_+) Gamma(2 - 2H)))."""
    _check_hurst(H)
    h_plus = H + 0.5
    return float(np.sqrt(2.0 * H * special.gamma(2.0 - h_plus) / (special.gamma(h_plus) * special.gamma(2.0 - 2.0 * H))))


def dlog_c_h2(H: float) -> float:
    """d/dH log(C_H^2) = 1/H - psi(2 - H_+) - psi(H_+) + 2 psi(2 - 2H)."""
    _check_hurst(H)
    h_plus = H + 0.5
    return float(1.0 / H - digamma(2.0 - h_plus) - digamma(h_plus) + 2.0 * digamma(2.0 - 2.0 * H))


def dc_h2(H: float) -> float:
    """d/dH C_H^2."""
    return c_h(H) ** 2 * dlog_c_h2(H)


def k_h(H: float) -> float:
    """
    K_H such that d(C_H^2)/dH = C_H^2 K_H / H_+.

    Equivalently K_H = (H_+/H){1 - H psi(2-H_+) - H psi(H_+) + 2H psi(1-2H_-)}.
    """
    return (H + 0.5) * dlog_c_h2(H)
