"""Globally adaptive Gauss-Kronrod integration in one and two dimensions."""

from __future__ import annotations

import heapq
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .errors import NoConvergence

# 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1]
_XK = np.array([
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144845693013,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.zeros(15)
_WG[1::2] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
]


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error_estimate: float
    evaluations: int
    converged: bool
    name: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _map_interval(f, a, b):
    """Return ``(g, lo, hi)`` with a finite interval; semi-infinite ends use ``s = u/(1-u)``."""
    if math.isfinite(a) and math.isfinite(b):
        return f, a, b
    if math.isfinite(a) and b == math.inf:
        def g(u):
            return f(a + u / (1.0 - u)) / (1.0 - u) ** 2
        return g, 0.0, 1.0
    if a == -math.inf and math.isfinite(b):
        def g(u):
            return f(b - u / (1.0 - u)) / (1.0 - u) ** 2
        return g, 0.0, 1.0
    if a == -math.inf and b == math.inf:
        def g(u):
            s = u / (1.0 - u * u)
            return f(s) * (1.0 + u * u) / (1.0 - u * u) ** 2
        return g, -1.0, 1.0
    raise ValueError("bad integration limits")


def _gk15(g, lo, hi):
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    vals = np.asarray(g(mid + half * _XK), dtype=float)
    if vals.shape != _XK.shape:
        vals = np.broadcast_to(vals, _XK.shape)
    kron = half * np.dot(_WK, vals)
    gauss = half * np.dot(_WG, vals)
    resabs = abs(half) * np.dot(_WK, np.abs(vals))
    err = abs(kron - gauss)
    return kron, max(err, 50.0 * np.finfo(float).eps * resabs), resabs


def integrate_1d(
    f: Callable,
    a: float,
    b: float,
    tol: float = 1e-10,
    rtol: float = 0.0,
    max_evals: int = 300_000,
    raise_on_failure: bool = True,
    name: str = "",
) -> QuadResult:
    """Integrate a vectorized ``f`` over ``[a, b]``; infinite limits allowed.

    The interval with the largest Kronrod-minus-Gauss discrepancy is bisected
    until the summed estimate drops below ``max(tol, rtol*|I|)``.
    """
    if a == b:
        return QuadResult(0.0, 0.0, 0, True, name)
    sign = 1.0
    if a > b:
        a, b, sign = b, a, -1.0
    g, lo, hi = _map_interval(f, a, b)
    val, err, _ = _gk15(g, lo, hi)
    heap = [(-err, lo, hi, val, err)]
    total, total_err = val, err
    evals = 15
    while total_err > max(tol, rtol * abs(total)):
        if evals >= max_evals:
            res = QuadResult(sign * total, total_err, evals, False, name)
            if raise_on_failure:
                raise NoConvergence(f"integrate_1d budget of {max_evals} evaluations exhausted", res)
            return res
        _, l, h, v, e = heapq.heappop(heap)
        m = 0.5 * (l + h)
        if not (l < m < h):
            # cannot split further; accept the remaining error as is
            heapq.heappush(heap, (0.0, l, h, v, e))
            break
        v1, e1, _ = _gk15(g, l, m)
        v2, e2, _ = _gk15(g, m, h)
        evals += 30
        total += v1 + v2 - v
        total_err += e1 + e2 - e
        heapq.heappush(heap, (-e1, l, m, v1, e1))
        heapq.heappush(heap, (-e2, m, h, v2, e2))
    # re-sum to shed accumulated rounding from the running updates
    total = math.fsum(item[3] for item in heap)
    total_err = math.fsum(item[4] for item in heap)
    converged = total_err <= max(tol, rtol * abs(total))
    res = QuadResult(sign * total, total_err, evals, converged, name)
    if not converged and raise_on_failure:
        raise NoConvergence("integrate_1d could not reach the requested tolerance", res)
    return res


def integrate_2d(
    f: Callable,
    region: tuple,
    tol: float = 1e-10,
    max_evals: int = 5_000_000,
    raise_on_failure: bool = True,
    name: str = "",
) -> QuadResult:
    """Iterated adaptive integration of ``f(x, y)`` (vectorized in ``y``).

    ``region`` is ``(x_lo, x_hi, y_lo, y_hi)`` where the ``y`` limits may be
    callables of ``x``.  Inner integrals run at ``tol / 10``.
    """
    x_lo, x_hi, y_lo, y_hi = region
    y_lo_f = y_lo if callable(y_lo) else (lambda x, c=y_lo: c)
    y_hi_f = y_hi if callable(y_hi) else (lambda x, c=y_hi: c)
    inner_tol = tol / 10.0
    counter = {"evals": 0, "err": 0.0}

    def outer(xs):
        xs = np.atleast_1d(xs)
        out = np.empty(xs.shape)
        for i, x in enumerate(xs):
            r = integrate_1d(
                lambda y, x=x: f(x, y), y_lo_f(x), y_hi_f(x),
                tol=inner_tol, raise_on_failure=raise_on_failure,
            )
            counter["evals"] += r.evaluations
            counter["err"] = max(counter["err"], r.abs_error_estimate)
            out[i] = r.value
        return out

    r = integrate_1d(outer, x_lo, x_hi, tol=tol - inner_tol, raise_on_failure=raise_on_failure)
    width = (x_hi - x_lo) if math.isfinite(x_hi - x_lo) else 1.0
    err = r.abs_error_estimate + counter["err"] * abs(width)
    evals = counter["evals"]
    converged = r.converged and err <= tol
    res = QuadResult(r.value, err, evals, converged, name)
    if evals > max_evals and raise_on_failure:
        raise NoConvergence("integrate_2d evaluation budget exhausted", res)
    return res


def gauss_legendre(f: Callable, a: float, b: float, n: int = 30) -> float:
    """Fixed-order Gauss-Legendre rule, used where the integrand is known smooth."""
    x, w = np.polynomial.legendre.leggauss(n)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return float(half * np.dot(w, f(mid + half * x)))
