"""Deterministic separability probabilities and volume formulas.

Eigenvalue integrals over the operator interval are taken over the ordered
region ``-1 < y < x < 1``.  Where a volume constant needs the full
parametrization, the unordered square (twice the ordered region) is used
together with the angular factor of the matching Bloch-type chart.
"""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NoConvergence, TableTooCoarse
from .matrix import Density2, Field, epsilon_from_eigs
from .quadrature import QuadResult, integrate_1d, integrate_2d
from .special import (
    CHI1_AT_ONE,
    CHI2_AT_ONE,
    ChiTable,
    _defect_integrand,
    chi1_fast,
    chi1_tilde_deriv,
    defect,
    hs_weight_reduced,
    sqrtx_weight,
)

ORDERED = (-1.0, 1.0, -1.0, lambda x: x)

# Angular factors of the sa(2, K) charts (volume form integrated over angles)
ANGULAR_SA_REAL = 2.0 * math.pi / math.sqrt(2.0)
ANGULAR_SA_COMPLEX = 2.0 * math.pi

# Ordered-region normalizers of the Hilbert-Schmidt eigenvalue weights
HS_NORM_REAL = 16.0 / 35.0
HS_NORM_COMPLEX = 256.0 / 1575.0


class _Infinite:
    """Marker for volumes that diverge (the sqrt(x) metric volumes)."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "Infinite"

    def __float__(self):
        return math.inf

    def to_json(self):
        return "Infinity"


INFINITE = _Infinite()


def _rename(r: QuadResult, name: str, value: Optional[float] = None, scale: float = 1.0) -> QuadResult:
    return QuadResult(
        r.value * scale if value is None else value,
        r.abs_error_estimate * abs(scale),
        r.evaluations,
        r.converged,
        name,
    )


# ----------------------------------------------------------------------------
# Pushforward densities of eps(Y) under the Hilbert-Schmidt interval weights

_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def _sym_kernel_integral(kernel: Callable, t) -> np.ndarray:
    """``int_0^inf kernel(s, t) ds`` for kernels symmetric under ``s -> 1/s`` (with ``ds``).

    The range folds to ``2 int_0^1``, split at ``s = t``: linear nodes below,
    logarithmic nodes above.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
    lo = 0.5 * t * (_GL_X + 1.0)
    below = 0.5 * t[:, 0] * np.sum(_GL_W * kernel(lo, t), axis=1)
    logt = np.log(t)
    v = 0.5 * logt * (1.0 - _GL_X)
    s = np.exp(v)
    above = -0.5 * logt[:, 0] * np.sum(_GL_W * kernel(s, t) * s, axis=1)
    return 2.0 * (below + above)


def eps_density_real(t):
    """Density of ``eps`` on (0, 1) when ``(x, y)`` has weight ``(x-y)(1-x^2)(1-y^2)``."""
    t_arr = np.asarray(t, dtype=float)
    out = _sym_kernel_integral(
        lambda s, t: 256.0 * s**4 * t**3 * (1.0 - t * t) / ((s + t) ** 5 * (1.0 + s * t) ** 5), t_arr
    ) / HS_NORM_REAL
    return float(out[0]) if t_arr.ndim == 0 else out


def eps_density_complex(t):
    """Density of ``eps`` on (0, 1) under the weight ``(x-y)^2 (1-x^2)^2 (1-y^2)^2``."""
    t_arr = np.asarray(t, dtype=float)
    out = _sym_kernel_integral(
        lambda s, t: 8192.0 * s**7 * (1.0 - t * t) ** 2 * t**5 / ((1.0 + t * s) ** 8 * (t + s) ** 8), t_arr
    ) / HS_NORM_COMPLEX
    return float(out[0]) if t_arr.ndim == 0 else out


def interval_integral(f: Callable, tol: float = 1e-10, name: str = "") -> QuadResult:
    """``int int_{-1<y<x<1} f(x, y) dy dx`` with ``f`` vectorized in ``y``."""
    return integrate_2d(f, ORDERED, tol=tol, name=name)


# ----------------------------------------------------------------------------
# Real Hilbert-Schmidt probability


def hs_identity(tol: float = 1e-10) -> QuadResult:
    """``64/3 int_0^1 w(t) chi1'(t) dt``, which equals 1/4."""
    r = integrate_1d(lambda t: hs_weight_reduced(t) * chi1_tilde_deriv(t), 0.0, 1.0, tol=tol * 3.0 / 64.0)
    return _rename(r, "hs-identity", scale=64.0 / 3.0)


def psep_real_hs_2d(tol: float = 1e-9) -> QuadResult:
    """The same probability as a direct eigenvalue integral of ``chi1(eps(x, y))``."""

    def f(x, y):
        w = (x - y) * (1.0 - x * x) * (1.0 - y * y)
        return w * chi1_fast(np.clip(epsilon_from_eigs(x, y), 0.0, 1.0))

    r = interval_integral(f, tol=tol * HS_NORM_REAL)
    return _rename(r, "psep-real-hs-2d", scale=1.0 / HS_NORM_REAL)


def psep_real_hs(tol: float = 1e-10, cross_check: bool = True) -> QuadResult:
    """Rebit-rebit Hilbert-Schmidt separability probability, ``1 - 35/16 * identity``.

    With ``cross_check`` the eigenvalue-integral route is evaluated too and a
    disagreement above 1e-7 raises :class:`NoConvergence`.
    """
    ident = hs_identity(tol * 16.0 / 35.0)
    res = QuadResult(
        1.0 - 35.0 / 16.0 * ident.value,
        35.0 / 16.0 * ident.abs_error_estimate,
        ident.evaluations,
        ident.converged,
        "psep-real-hs",
    )
    if cross_check:
        other = psep_real_hs_2d(max(tol, 1e-9))
        if abs(other.value - res.value) > 1e-7:
            raise NoConvergence("1-D and 2-D routes disagree", res)
    return res


# ----------------------------------------------------------------------------
# Real sqrt(x)-metric probability


def psep_sqrtx_real(tol: float = 1e-10) -> QuadResult:
    """``int_0^1 sqrtx_weight(t) chi1(t) dt``."""
    r = integrate_1d(lambda t: sqrtx_weight(t) * chi1_fast(t), 0.0, 1.0, tol=tol)
    return _rename(r, "psep-sqrtx-real")


def _sqrtx_angle_integral(g: Callable, tol: float, name: str) -> QuadResult:
    # x = sin u removes the (1-x^2)^(-1/4) endpoint singularity
    half = math.pi / 2.0

    def f(u, v):
        x, y = np.sin(u), np.sin(v)
        w = (x - y) * np.sqrt(np.cos(u) * np.cos(v))
        return w * g(x, y)

    return integrate_2d(f, (-half, half, -half, lambda u: u), tol=tol, name=name)


def sqrtx_numerator(tol: float = 1e-9) -> QuadResult:
    """Unnormalized eigenvalue integral with weight ``(x-y)((1-x^2)(1-y^2))^(-1/4)`` times chi1."""
    return _sqrtx_angle_integral(
        lambda x, y: chi1_fast(np.clip(epsilon_from_eigs(x, y), 0.0, 1.0)), tol, "sqrtx-numerator"
    )


def sqrtx_denominator(tol: float = 1e-10) -> QuadResult:
    """Same integral without chi1; equals 2 pi / 3."""
    return _sqrtx_angle_integral(lambda x, y: np.ones_like(y), tol, "sqrtx-denominator")


def sqrtx_volume(field: Field = Field.REAL):
    """Volumes under the sqrt(x) metric diverge, so only ratios are reported."""
    return INFINITE


# ----------------------------------------------------------------------------
# Complex Hilbert-Schmidt probability from a chi2 table


@dataclass(frozen=True)
class HybridResult:
    value: float
    abs_error_estimate: float
    mc_std_error: float
    interpolation_error: float
    evaluations: int
    converged: bool
    name: str = "psep-complex-hs"

    @property
    def sigma(self) -> float:
        """Combined one-sigma uncertainty."""
        return math.sqrt(self.mc_std_error**2 + (self.abs_error_estimate + self.interpolation_error) ** 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sigma"] = self.sigma
        return d


@functools.lru_cache(maxsize=32)
def _complex_hat_weights(grid: tuple, tol: float) -> np.ndarray:
    table = ChiTable(np.array(grid), np.zeros(len(grid)))
    return table.hat_weights(eps_density_complex, tol)


def psep_complex_hs(chi2: ChiTable, tol: float = 1e-10, table_tol: Optional[float] = None) -> HybridResult:
    """Complex Hilbert-Schmidt probability as the weighted average of a tabulated chi2.

    The table is interpolated linearly, so the result is ``a @ values`` with
    ``a`` the integrals of the hat functions against the eps density, and the
    Monte Carlo variance is ``a^T cov a``.  The interpolation error is
    estimated from the half-resolution table (Richardson factor 1/3) and must
    not exceed ``table_tol``, which defaults to the larger of ``tol`` and the
    Monte Carlo standard error.
    """
    a = _complex_hat_weights(tuple(chi2.eps), tol)
    value = float(a @ chi2.values)
    var = float(a @ chi2.cov @ a)
    sigma_mc = math.sqrt(max(var, 0.0))
    coarse = chi2.coarsened()
    if len(coarse.eps) < len(chi2.eps):
        ac = _complex_hat_weights(tuple(coarse.eps), tol)
        interp = abs(value - float(ac @ coarse.values)) / 3.0
    else:
        interp = 0.0
    limit = table_tol if table_tol is not None else max(tol, sigma_mc)
    if interp > limit:
        raise TableTooCoarse(f"interpolation error {interp:.3g} exceeds {limit:.3g}")
    quad_err = tol * float(np.sum(np.abs(chi2.values)))
    return HybridResult(value, quad_err, sigma_mc, interp, 0, True)


def psep_complex_hs_2d(chi2: Callable, tol: float = 1e-7) -> QuadResult:
    """Direct eigenvalue integral of a chi2 profile; cross-check for :func:`psep_complex_hs`."""

    def f(x, y):
        w = (x - y) ** 2 * ((1.0 - x * x) * (1.0 - y * y)) ** 2
        return w * chi2(np.clip(epsilon_from_eigs(x, y), 0.0, 1.0))

    r = interval_integral(f, tol=tol * HS_NORM_COMPLEX)
    return _rename(r, "psep-complex-hs-2d", scale=1.0 / HS_NORM_COMPLEX)


def build_chi2_table(
    n: int,
    stream,
    threads: int = 1,
    start_nodes: int = 11,
    max_nodes: int = 161,
    tol: float = 1e-10,
) -> tuple[ChiTable, HybridResult]:
    """Refine a uniform chi2 grid until the probability moves by less than one sigma.

    Every level reuses ``stream``, so successive tables share random numbers
    and their difference measures interpolation error rather than noise.
    """
    from .sampling import chi_table_mc

    k = start_nodes
    prev = None
    while True:
        table = chi_table_mc(Field.COMPLEX, np.linspace(0.0, 1.0, k), n, stream, threads)
        res = psep_complex_hs(table, tol, table_tol=math.inf)
        if prev is not None and abs(res.value - prev.value) < res.mc_std_error:
            return table, psep_complex_hs(table, tol)
        if 2 * k - 1 > max_nodes:
            return table, psep_complex_hs(table, tol, table_tol=math.inf)
        prev = res
        k = 2 * k - 1


# ----------------------------------------------------------------------------
# Volumes


@dataclass(frozen=True)
class VolumeReport:
    name: str
    computed: float
    reference: float
    rel_error: float

    @classmethod
    def of(cls, name: str, computed: float, reference: float) -> "VolumeReport":
        return cls(name, computed, reference, abs(computed - reference) / abs(reference))

    def to_dict(self) -> dict:
        return asdict(self)


def chi_at_one(field: Field, tol: float = 1e-12) -> float:
    """Unit-ball volume from the singular-value chart, angles integrated out.

    Both singular values range over the full square ``(0, 1)^2``, as in the
    chart's published volume form.  In the complex case that chart covers the
    ball twice, so the result is twice the Lebesgue volume.
    """
    field = Field.parse(field)
    if field is Field.REAL:
        # (2 pi)^2 int int |x^2 - y^2| / 2, symmetric in x <-> y
        r = integrate_2d(lambda x, y: x * x - y * y, (0.0, 1.0, 0.0, lambda x: x), tol=tol)
        return 4.0 * math.pi**2 * r.value
    # 4^3 pi^4 (int sin)^2 / 64 = 4 pi^4
    r = integrate_2d(lambda x, y: x * y * (x * x - y * y) ** 2, (0.0, 1.0, 0.0, lambda x: x), tol=tol)
    return 4.0 * math.pi**4 * 2.0 * r.value


def chi_at_one_lebesgue(field: Field) -> float:
    """Lebesgue volume of the unit ball; differs from :func:`chi_at_one` only for complex."""
    field = Field.parse(field)
    return chi_at_one(field) if field is Field.REAL else 0.5 * chi_at_one(field)


def density_moment(field: Field, tol: float = 1e-13) -> float:
    """``int det(D)^(4d - d^2/2)`` over qubit (rebit) states in the Bloch chart."""
    field = Field.parse(field)
    if field is Field.REAL:
        r = integrate_1d(lambda r: (0.25 * (1.0 - r * r)) ** 3.5 * r / 2.0, 0.0, 1.0, tol=tol)
        return 2.0 * math.pi * r.value
    r = integrate_1d(lambda r: (0.25 * (1.0 - r * r)) ** 6 * r * r / (2.0 * math.sqrt(2.0)), 0.0, 1.0, tol=tol)
    return 4.0 * math.pi * r.value


def interval_volume(field: Field, chi: Optional[Callable] = None, tol: float = 1e-12) -> float:
    """``int_{E(2,K)} det(I - Y^2)^d chi(eps(Y))``, with ``chi = 1`` when omitted."""
    field = Field.parse(field)
    d = field.d
    ang = ANGULAR_SA_REAL if field is Field.REAL else ANGULAR_SA_COMPLEX

    def f(x, y):
        w = (x - y) ** d * ((1.0 - x * x) * (1.0 - y * y)) ** d
        if chi is None:
            return w
        return w * chi(np.clip(epsilon_from_eigs(x, y), 0.0, 1.0))

    return ang * 2.0 * interval_integral(f, tol=tol).value


def state_volume(field: Field) -> float:
    """Hilbert-Schmidt volume of two-qubit (two-rebit) states as a product of factors."""
    field = Field.parse(field)
    d = field.d
    return chi_at_one(field) / 2.0 ** (6 * d) * density_moment(field) * interval_volume(field)


def reference_volumes() -> list[VolumeReport]:
    pi = math.pi
    s2 = math.sqrt(2.0)
    return [
        VolumeReport.of("chi1(1)", chi_at_one(Field.REAL), 2.0 * pi**2 / 3.0),
        VolumeReport.of("chi2(1)", chi_at_one(Field.COMPLEX), pi**4 / 6.0),
        VolumeReport.of("moment-real", density_moment(Field.REAL), pi / (2**7 * 3**2)),
        VolumeReport.of("interval-real", interval_volume(Field.REAL), 2**5 * s2 * pi / 35.0),
        VolumeReport.of("moment-complex", density_moment(Field.COMPLEX), pi / (2 * 3**2 * 5 * 7 * 11 * 13 * s2)),
        VolumeReport.of("interval-complex", interval_volume(Field.COMPLEX), 2**10 * pi / (3**2 * 5**2 * 7)),
        VolumeReport.of("vol-D4-real", state_volume(Field.REAL), pi**4 / (s2 * 2**6 * 3**3 * 35)),
        VolumeReport.of(
            "vol-D4-complex", state_volume(Field.COMPLEX), pi**6 / (s2 * 2**14 * 3**4 * 5**3 * 7**2 * 11 * 13)
        ),
    ]


def _as_density(D, field: Field) -> np.ndarray:
    return D.matrix if isinstance(D, Density2) else np.asarray(D)


def conditional_volume(D, field: Field, chi2: Optional[Callable] = None, tol: float = 1e-11) -> float:
    """Volume of separable states whose partial trace is ``D``.

    ``det(D)^(4d - d^2/2) / 2^(6d) * chi_d(1) * int_E det(I-Y^2)^d chi_d(eps(Y))``.
    The complex case needs a ``chi2`` profile (typically a :class:`ChiTable`).
    """
    field = Field.parse(field)
    d = field.d
    det = float(np.real(np.linalg.det(_as_density(D, field))))
    if field is Field.REAL:
        chi = chi1_fast
    elif chi2 is None:
        raise ValueError("complex conditional volume needs a chi2 table")
    else:
        chi = chi2
    inner = interval_volume(field, chi, tol)
    return det ** (4 * d - d * d / 2) / 2.0 ** (6 * d) * chi_at_one(field) * inner


def conditional_whole_volume(D, field: Field, tol: float = 1e-11) -> float:
    """Volume of all states with partial trace ``D`` (same formula, chi = 1)."""
    field = Field.parse(field)
    d = field.d
    det = float(np.real(np.linalg.det(_as_density(D, field))))
    return det ** (4 * d - d * d / 2) / 2.0 ** (6 * d) * chi_at_one(field) * interval_volume(field, None, tol)


# ----------------------------------------------------------------------------
# Boundary of the real unit ball


def surface_volume(tol: float = 1e-12) -> QuadResult:
    """Boundary volume ``8 int_0^inf (8/3) h(2t) dt`` of the real operator-norm ball.

    ``h(t) = cosh t - sinh^2 t log coth(t/2)`` is the closed form of the
    inner double integral over the boundary chart.
    """
    r = integrate_1d(lambda t: _defect_integrand(2.0 * t), 0.0, math.inf, tol=tol * 3.0 / 64.0)
    return _rename(r, "surface-volume", scale=64.0 / 3.0)


def surface_inner_raw(t: float, tol: float = 1e-9) -> float:
    """The inner double integral over ``phi`` and ``rho`` at fixed ``t``, by quadrature.

    Should equal ``(8/3) h(2t)``.  The integrand has a kink at
    ``rho = 1/sin(phi)``, so the ``rho`` range is split there.
    """
    c = math.cosh(2.0 * t)

    def f(rho, phi):
        z = rho + np.abs(rho * np.sin(phi) - 1.0) * c
        return 1.0 / (z + np.sqrt(np.maximum(z * z - 1.0, 0.0))) ** 2

    def over_rho(phis):
        out = np.empty(np.shape(phis))
        for i, phi in enumerate(np.atleast_1d(phis)):
            s = math.sin(phi)
            g = lambda rho, phi=phi: f(rho, phi)
            if s > 1e-14:
                k = 1.0 / s
                out[i] = integrate_1d(g, 0.0, k, tol=tol / 20).value + integrate_1d(g, k, math.inf, tol=tol / 20).value
            else:
                out[i] = integrate_1d(g, 0.0, math.inf, tol=tol / 20).value
        return out

    parts = [(0.0, math.pi / 2), (math.pi / 2, math.pi), (math.pi, 2.0 * math.pi)]
    return math.fsum(integrate_1d(over_rho, a, b, tol=tol / 4).value for a, b in parts)


def eta_tilde_real(eps: float, vol_boundary: Optional[float] = None) -> float:
    """Boundary analogue of chi1: ``1 - 4 / Vol(dB) * defect(-log eps) / 2``."""
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    vol = surface_volume().value if vol_boundary is None else vol_boundary
    return 1.0 - 2.0 / vol * defect(-math.log(eps))
