"""Scalar special functions behind the separability formulas.

The central object is the normalized similarity-stability function of the
real operator-norm unit ball,

    chi1(eps) = 4/pi^2 * int_0^eps g(s) ds,
    g(s) = (s + 1/s - (s - 1/s)^2 / 2 * log((1+s)/(1-s))) / s,

together with the two reduced weights that the rebit-rebit probabilities
integrate it against.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from .errors import DomainError
from .quadrature import integrate_1d

FOUR_OVER_PI2 = 4.0 / math.pi**2
CHI1_AT_ONE = 2.0 * math.pi**2 / 3.0   # volume of the real unit ball
CHI2_AT_ONE = math.pi**4 / 6.0         # volume of the complex unit ball

_SERIES_CUTOFF = 1e-2
_SERIES_TERMS = 8


def _chi_series(s):
    # g(s) = 8/3 - sum_k 8 s^2k / ((2k-1)(2k+1)(2k+3))
    s2 = s * s
    acc = np.zeros_like(s)
    p = np.ones_like(s)
    for k in range(1, _SERIES_TERMS + 1):
        p = p * s2
        acc = acc + 8.0 * p / ((2 * k - 1) * (2 * k + 1) * (2 * k + 3))
    return 8.0 / 3.0 - acc


def chi_integrand(s):
    """The integrand ``g`` of ``chi1``; finite on ``[0, 1]`` with g(0)=8/3, g(1)=2."""
    s = np.asarray(s, dtype=float)
    small = s < _SERIES_CUTOFF
    at_one = s >= 1.0
    sd = np.where(small | at_one, 0.5, s)
    inv = 1.0 / sd
    direct = (sd + inv - 0.5 * (sd - inv) ** 2 * (2.0 * np.arctanh(sd))) * inv
    out = np.where(small, _chi_series(np.where(small, s, 0.0)), direct)
    out = np.where(at_one, 2.0, out)
    return float(out) if out.ndim == 0 else out


def chi1_tilde(eps: float, tol: float = 1e-13) -> float:
    """Probability that a uniform draw from the real unit ball survives similarity by diag(1, eps)."""
    eps = float(eps)
    if not 0.0 <= eps <= 1.0 or math.isnan(eps):
        raise DomainError(f"chi1_tilde needs eps in [0, 1], got {eps}")
    if eps == 0.0:
        return 0.0
    r = integrate_1d(chi_integrand, 0.0, eps, tol=tol)
    return FOUR_OVER_PI2 * r.value


def chi1_tilde_deriv(t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(~((t_arr > 0.0) & (t_arr < 1.0))):
        raise DomainError("chi1_tilde_deriv needs 0 < t < 1")
    out = FOUR_OVER_PI2 * np.asarray(chi_integrand(t_arr))
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# Piecewise Chebyshev interpolant for hot loops


class ChiInterpolant:
    """Piecewise Chebyshev interpolant of ``chi1`` on ``[0, 1]``.

    Panels are uniform on ``[0, 1/2]`` and graded geometrically towards 1,
    where ``chi1`` carries a ``(1-eps)^3 log(1-eps)`` term.  Nodal values are
    built by panelwise Gauss-Legendre integration of the (smooth) integrand.
    """

    def __init__(self, degree: int = 15, uniform_panels: int = 64, per_octave: int = 4, octaves: int = 44):
        edges = list(np.linspace(0.0, 0.5, uniform_panels + 1))
        for k in range(1, octaves + 1):
            a, b = 1.0 - 2.0**-k, 1.0 - 2.0 ** -(k + 1)
            edges.extend(np.linspace(a, b, per_octave + 1)[1:])
        edges.append(1.0)
        self.edges = np.array(edges)
        self.degree = degree
        n = degree + 1
        # first-kind Chebyshev nodes on [-1, 1]
        k = np.arange(n)
        self._nodes = np.cos(np.pi * (k + 0.5) / n)
        gl_x, gl_w = np.polynomial.legendre.leggauss(40)

        def gl(a, b):
            a = np.asarray(a)
            b = np.asarray(b)
            mid = 0.5 * (a + b)
            half = 0.5 * (b - a)
            pts = mid[..., None] + half[..., None] * gl_x
            return half * np.sum(gl_w * chi_integrand(pts), axis=-1)

        lo, hi = self.edges[:-1], self.edges[1:]
        left = np.concatenate([[0.0], np.cumsum(gl(lo, hi))])[:-1]
        xs = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * self._nodes
        vals = FOUR_OVER_PI2 * (left[:, None] + gl(np.broadcast_to(lo[:, None], xs.shape), xs))
        # values -> Chebyshev coefficients (discrete cosine transform)
        theta = np.pi * (k + 0.5) / n
        basis = np.cos(np.outer(np.arange(n), theta))
        coef = (2.0 / n) * vals @ basis.T
        coef[:, 0] *= 0.5
        self.coef = coef

    def __call__(self, eps):
        eps = np.asarray(eps, dtype=float)
        flat = np.clip(eps.ravel(), 0.0, 1.0)
        idx = np.clip(np.searchsorted(self.edges, flat, side="right") - 1, 0, len(self.edges) - 2)
        lo = self.edges[idx]
        hi = self.edges[idx + 1]
        x = (2.0 * flat - lo - hi) / (hi - lo)
        c = self.coef[idx]
        # Clenshaw recurrence
        b1 = np.zeros_like(x)
        b2 = np.zeros_like(x)
        for j in range(self.degree, 0, -1):
            b1, b2 = 2.0 * x * b1 - b2 + c[:, j], b1
        out = x * b1 - b2 + c[:, 0]
        out = out.reshape(eps.shape)
        return float(out) if out.ndim == 0 else out


@functools.lru_cache(maxsize=1)
def chi1_interpolant() -> ChiInterpolant:
    return ChiInterpolant()


def chi1_fast(eps):
    """Vectorized ``chi1`` through the cached interpolant, clamped to [0, 1]."""
    out = np.clip(chi1_interpolant()(eps), 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------------
# Defect function


def _defect_integrand(t):
    t = np.asarray(t, dtype=float)
    big = t > 2.0
    ts = np.where(big, 1.0, t)
    lit = np.cosh(ts) - np.sinh(ts) ** 2 * np.log((np.exp(ts) + 1.0) / np.expm1(ts))
    # for large t write it through x = exp(-t) to avoid cancelling exponentials
    x = np.exp(-np.where(big, t, 3.0))
    tail = 0.5 * x * np.asarray(chi_integrand(x))
    return np.where(big, tail, lit)


def defect(delta: float, tol: float = 1e-13) -> float:
    """Volume lost from the real unit ball under similarity by diag(1, exp(-delta))."""
    delta = float(delta)
    if delta < 0 or math.isnan(delta):
        raise DomainError("defect needs delta >= 0")
    if delta == 0.0:
        return 0.0
    r = integrate_1d(_defect_integrand, 0.0, delta, tol=tol)
    return 16.0 / 3.0 * r.value


# ----------------------------------------------------------------------------
# Dilogarithm


def _li2_series(z: float) -> float:
    total, term, k = 0.0, z, 1
    while True:
        add = term / (k * k)
        total += add
        if abs(add) < 1e-17 * max(abs(total), 1e-300):
            return total
        k += 1
        term *= z


def dilog(z: float) -> float:
    """Real dilogarithm ``Li2(z)`` for ``z <= 1``."""
    z = float(z)
    if z > 1.0 or math.isnan(z):
        raise DomainError("dilog is real only for z <= 1")
    if z == 1.0:
        return math.pi**2 / 6.0
    if z == 0.0:
        return 0.0
    if abs(z) <= 0.5:
        return _li2_series(z)
    if z > 0.5:
        return math.pi**2 / 6.0 - math.log(z) * math.log1p(-z) - _li2_series(1.0 - z)
    if z >= -1.0:
        # Landen: z/(z-1) lies in [1/3, 1/2]
        return -_li2_series(z / (z - 1.0)) - 0.5 * math.log1p(-z) ** 2
    return -math.pi**2 / 6.0 - 0.5 * math.log(-z) ** 2 - dilog(1.0 / z)


# ----------------------------------------------------------------------------
# Complete elliptic integrals, parameter convention m = k^2


def _agm_ke(m):
    m = np.asarray(m, dtype=float)
    a = np.ones_like(m)
    b = np.sqrt(1.0 - m)
    c2_sum = 0.5 * m
    power = 0.5
    done = np.zeros(m.shape, dtype=bool)
    for _ in range(64):
        # converged entries are frozen: with 2^n weights, rounding-level c
        # would otherwise keep feeding the sum
        c = np.where(done, 0.0, 0.5 * (a - b))
        a, b = np.where(done, a, 0.5 * (a + b)), np.where(done, b, np.sqrt(a * b))
        power *= 2.0
        c2_sum = c2_sum + power * c * c
        done |= np.abs(c) <= 4e-16 * a
        if np.all(done):
            break
    k = np.pi / (2.0 * a)
    return k, k * (1.0 - c2_sum)


def elliptic_K(m):
    """``int_0^1 dt / (sqrt(1-t^2) sqrt(1-m t^2))`` via the arithmetic-geometric mean."""
    arr = np.asarray(m, dtype=float)
    if np.any(arr >= 1.0) or np.any(np.isnan(arr)):
        raise DomainError("elliptic_K needs m < 1")
    k, _ = _agm_ke(arr)
    return float(k) if k.ndim == 0 else k


def elliptic_E(m):
    """``int_0^1 sqrt(1-m t^2) / sqrt(1-t^2) dt`` via the arithmetic-geometric mean."""
    arr = np.asarray(m, dtype=float)
    if np.any(arr > 1.0) or np.any(np.isnan(arr)):
        raise DomainError("elliptic_E needs m <= 1")
    one = arr == 1.0
    _, e = _agm_ke(np.where(one, 0.0, arr))
    e = np.where(one, 1.0, e)
    return float(e) if e.ndim == 0 else e


# ----------------------------------------------------------------------------
# Reduced weights of the rebit-rebit probabilities
#
# Both weights come from integrating a rational kernel over s in (0, inf).
# Expanding that kernel at t = 1 - u gives Taylor coefficients that are sums
# of Beta integrals:
#   int s^(a-1+k) (s+t)^-a (1+ts)^-a ... -> sum_{j+k=n} (a)_j (a)_k/(j! k!) B(.,.)


def _kernel_series(num_power: float, den_power: float, terms: int) -> np.ndarray:
    """Taylor coefficients in u of int_0^inf s^p (s+1-u)^-q (1+(1-u)s)^-q ds."""
    p, q = num_power, den_power

    def poch_over_fact(a, j):
        return math.exp(math.lgamma(a + j) - math.lgamma(a) - math.lgamma(j + 1))

    def beta(x, y):
        return math.exp(math.lgamma(x) + math.lgamma(y) - math.lgamma(x + y))

    coef = np.zeros(terms)
    for n in range(terms):
        coef[n] = sum(
            poch_over_fact(q, j) * poch_over_fact(q, n - j) * beta(p + 1 + (n - j), 2 * q - p - 1 + j)
            for j in range(n + 1)
        )
    return coef


_SQRTX_SERIES = _kernel_series(1.5, 2.5, 40)
_HS_SERIES = _kernel_series(3.0, 4.0, 60)
SQRTX_SEAM = 0.95
HS_SEAM = 0.85


def _poly(coef, u):
    out = np.zeros_like(u)
    for c in coef[::-1]:
        out = out * u + c
    return out


def sqrtx_weight(t):
    """Density in ``t`` of the sqrt(x)-metric rebit-rebit probability, multiplying ``chi1(t)``.

    Closed form in complete elliptic integrals evaluated at ``m = 1 - 1/t^2``;
    near ``t = 1`` the closed form cancels catastrophically and a Taylor
    series of the underlying kernel takes over.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(~((t_arr > 0.0) & (t_arr < 1.0))):
        raise DomainError("sqrtx_weight needs 0 < t < 1")
    near = t_arr > SQRTX_SEAM
    tc = np.where(near, 0.5, t_arr)
    m = 1.0 - 1.0 / tc**2
    t2 = tc * tc
    num = 8.0 * (t2 * t2 + t2) * elliptic_E(m) - (t2 + 3.0) * (3.0 * t2 + 1.0) * elliptic_K(m)
    closed = 8.0 * num / (np.pi * np.sqrt(tc) * (t2 - 1.0) ** 3)
    u = np.where(near, 1.0 - t_arr, 0.0)
    ts = 1.0 - u
    series = 12.0 / np.pi * np.sqrt(ts) * u * (2.0 - u) * _poly(_SQRTX_SERIES, u)
    out = np.where(near, series, closed)
    return float(out) if out.ndim == 0 else out


def sqrtx_weight_closed(t):
    """The elliptic closed form alone (no near-1 branch); for seam checks."""
    t = np.asarray(t, dtype=float)
    m = 1.0 - 1.0 / t**2
    t2 = t * t
    num = 8.0 * (t2 * t2 + t2) * elliptic_E(m) - (t2 + 3.0) * (3.0 * t2 + 1.0) * elliptic_K(m)
    return 8.0 * num / (np.pi * np.sqrt(t) * (t2 - 1.0) ** 3)


def hs_weight_printed(t):
    """``[11(1-t^6) + 27t^2(1-t^2) + 6(1+t^2)(1+8t^2+t^4) log t] / (t^2-1)^7``, unguarded."""
    t = np.asarray(t, dtype=float)
    t2 = t * t
    num = 11.0 * (1.0 - t2**3) + 27.0 * t2 * (1.0 - t2) + 6.0 * (1.0 + t2) * (1.0 + 8.0 * t2 + t2 * t2) * np.log(t)
    return num / (t2 - 1.0) ** 7


def hs_weight_reduced(t):
    """Kernel ``3 int_0^inf s^3 t^4 / ((s+t)^4 (1+st)^4) ds`` of the Hilbert-Schmidt identity.

    Equals ``t^4`` times the rational-logarithmic closed form; that factor
    is what makes ``64/3 * int w chi1'`` come out to 1/4.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(~((t_arr > 0.0) & (t_arr < 1.0))):
        raise DomainError("hs_weight_reduced needs 0 < t < 1")
    near = t_arr > HS_SEAM
    tc = np.where(near, 0.5, t_arr)
    closed = tc**4 * hs_weight_printed(tc)
    u = np.where(near, 1.0 - t_arr, 0.0)
    series = 3.0 * (1.0 - u) ** 4 * _poly(_HS_SERIES, u)
    out = np.where(near, series, closed)
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# Tabulated chi for the complex field


class ChiTable:
    """Piecewise-linear table of ``eps -> chi_d(eps)`` with its sampling covariance.

    ``cov`` is the covariance matrix of the tabulated means (zero for exact
    tables).  Linear interpolation keeps every downstream integral linear in
    the table values, so errors propagate as ``a^T cov a``.
    """

    def __init__(self, eps, values, cov=None, n: int = 0, seed=None, field="complex"):
        self.eps = np.asarray(eps, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.eps.ndim != 1 or self.eps.shape != self.values.shape:
            raise ValueError("eps and values must be matching 1-d arrays")
        if np.any(np.diff(self.eps) <= 0) or self.eps[0] != 0.0 or self.eps[-1] != 1.0:
            raise ValueError("grid must increase strictly from 0 to 1")
        k = len(self.eps)
        self.cov = np.zeros((k, k)) if cov is None else np.asarray(cov, dtype=float)
        self.n = n
        self.seed = seed
        self.field = field

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def __call__(self, eps):
        out = np.interp(eps, self.eps, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def hat_weights(self, density, tol: float = 1e-12) -> np.ndarray:
        """``a_i = int hat_i(t) density(t) dt``; the table functional is ``a @ values``."""
        a = np.zeros(len(self.eps))
        for i in range(len(self.eps)):
            if i > 0:
                lo, hi = self.eps[i - 1], self.eps[i]
                a[i] += integrate_1d(lambda t: density(t) * (t - lo) / (hi - lo), lo, hi, tol=tol).value
            if i < len(self.eps) - 1:
                lo, hi = self.eps[i], self.eps[i + 1]
                a[i] += integrate_1d(lambda t: density(t) * (hi - t) / (hi - lo), lo, hi, tol=tol).value
        return a

    def coarsened(self) -> "ChiTable":
        """Every other node (endpoints kept); used to estimate interpolation error."""
        idx = np.arange(0, len(self.eps), 2)
        if idx[-1] != len(self.eps) - 1:
            idx = np.append(idx, len(self.eps) - 1)
        return ChiTable(self.eps[idx], self.values[idx], self.cov[np.ix_(idx, idx)], self.n, self.seed, self.field)
