"""Acceptance suite: one PASS/FAIL line per criterion.

Run under pytest (``pytest tests/test_acceptance.py -s`` is not needed, the
lines bypass capture) or directly with ``python3 tests/test_acceptance.py``.
"""

import itertools
import math
import os
import sys
import time

import numpy as np
import pytest

from sepvol import matrix as mx
from sepvol import sampling as sm
from sepvol import separability as sp
from sepvol import special as sf
from sepvol.matrix import Density2, Field
from sepvol.quadrature import integrate_1d

REAL, COMPLEX = Field.REAL, Field.COMPLEX
THREADS = os.cpu_count() or 1
EIGHT_33 = 8 / 33


def _fmt(ok):
    return "PASS" if ok else "FAIL"


def _check(lines, ok, text):
    lines.append(f"    [{_fmt(ok)}] {text}")
    return ok


def _note(lines, text):
    lines.append(f"    [info] {text}")


def _z(est, target):
    return abs(est.mean - target) / est.std_error


def criterion_1(lines):
    t0 = time.perf_counter()
    r = sp.psep_real_hs()
    dt = time.perf_counter() - t0
    ok = _check(lines, abs(r.value - 29 / 64) < 1e-8, f"P_sep(R) = {r.value:.12f}, |err| = {abs(r.value - 29 / 64):.2e}")
    return _check(lines, dt < 60, f"runtime {dt:.2f} s < 60 s") and ok


def criterion_2(lines):
    v = sp.hs_identity().value
    # the printed weight is the reduced one divided by t^4
    printed = 64 / 3 * integrate_1d(lambda t: sf.hs_weight_reduced(t) / t**4 * sf.chi1_tilde_deriv(t), 0, 1, tol=1e-9).value
    _note(lines, f"weight exactly as printed (without t^4) gives {printed:.4f}")
    return _check(lines, abs(v - 0.25) < 1e-8, f"identity = {v:.12f}")


def criterion_3(lines):
    p = sp.psep_sqrtx_real().value
    num = sp.sqrtx_numerator().value
    ok = _check(lines, abs(p - 0.26223) < 5e-5, f"P_sep,sqrtx(R) = {p:.8f}")
    return _check(lines, abs(num - 0.549213) < 5e-5, f"numerator = {num:.8f}") and ok


def criterion_4(lines):
    t0 = time.perf_counter()
    est = sm.separable_fraction_mc(REAL, 1_000_000, sm.SeededStream(2024), threads=THREADS)
    dt = time.perf_counter() - t0
    ok = _check(lines, est.within(29 / 64), f"{est.mean:.6f} +- {est.std_error:.2e} (z = {_z(est, 29 / 64):.2f})")
    return _check(lines, dt < 120, f"runtime {dt:.1f} s < 120 s") and ok


def criterion_5(lines):
    est = sm.separable_fraction_mc(COMPLEX, 1_000_000, sm.SeededStream(2025), threads=THREADS)
    return _check(lines, est.within(EIGHT_33), f"{est.mean:.6f} +- {est.std_error:.2e} (z = {_z(est, EIGHT_33):.2f})")


def criterion_6(lines):
    table, res = sp.build_chi2_table(1_000_000, sm.SeededStream(2026), threads=THREADS)
    z = abs(res.value - EIGHT_33) / res.sigma
    _note(lines, f"{len(table.eps)} nodes, mc {res.mc_std_error:.2e}, interpolation {res.interpolation_error:.2e}")
    return _check(lines, z < 3, f"{res.value:.6f} +- {res.sigma:.2e} (z = {z:.2f})")


def criterion_7(lines):
    radii = [0.0, 0.3, 0.6, 0.9]
    ok = True
    for field, seed in ((REAL, 7), (COMPLEX, 8)):
        scan = sm.milz_strunz_scan(field, radii, 1_000_000, sm.SeededStream(seed), threads=THREADS)
        worst = max(
            abs(a.mean - b.mean) / math.hypot(a.std_error, b.std_error)
            for (_, a), (_, b) in itertools.combinations(scan, 2)
        )
        means = ", ".join(f"{e.mean:.4f}" for _, e in scan)
        ok &= _check(lines, worst < 3, f"{field.value}: [{means}], worst pairwise z = {worst:.2f}")
    ratios = [
        sp.conditional_volume(Density2.real(0.4, r), REAL) / sp.conditional_whole_volume(Density2.real(0.4, r), REAL)
        for r in radii
    ]
    spread = max(ratios) - min(ratios)
    return _check(lines, spread < 1e-8, f"deterministic real ratio spread {spread:.1e}") and ok


def criterion_8(lines):
    ok = True
    for r in sp.reference_volumes():
        if r.name.startswith("chi"):
            continue
        ok &= _check(lines, r.rel_error < 1e-9, f"{r.name}: {r.computed:.10e} vs {r.reference:.10e} (rel {r.rel_error:.1e})")
    vol = sp.state_volume(COMPLEX)
    ref = math.pi**6 / (math.sqrt(2) * 2**14 * 3**4 * 5**3 * 7**2 * 11 * 13)
    _note(lines, f"assembled/printed complex volume = {vol / ref:.9f} (1024/3 = {1024 / 3:.9f})")
    return ok


def criterion_9(lines):
    c1 = sp.chi_at_one(REAL)
    c2 = sp.chi_at_one(COMPLEX)
    ok = _check(lines, abs(c1 - 2 * math.pi**2 / 3) < 1e-10, f"chi1(1) = {c1:.13f}")
    ok &= _check(lines, abs(c2 - math.pi**4 / 6) < 1e-10, f"chi2(1) = {c2:.13f}")
    real = sm.unit_ball_acceptance(REAL, 1_000_000, sm.SeededStream(90), threads=THREADS)
    ok &= _check(lines, real.within(c1 / 16), f"real cube acceptance {real.mean:.5f} vs {c1 / 16:.5f} (z = {_z(real, c1 / 16):.2f})")
    cplx = sm.unit_ball_acceptance(COMPLEX, 1_000_000, sm.SeededStream(91), threads=THREADS)
    ok &= _check(lines, cplx.within(c2 / 256),
                 f"complex cube acceptance {cplx.mean:.5f} vs {c2 / 256:.5f} (z = {_z(cplx, c2 / 256):.1f})")
    leb = sp.chi_at_one_lebesgue(COMPLEX) / 256
    _note(lines, f"against the Lebesgue volume pi^4/12: {leb:.5f} (z = {_z(cplx, leb):.2f})")
    return ok


def criterion_10(lines):
    worst = max(abs(sf.defect(d) + sf.CHI1_AT_ONE * sf.chi1_tilde(math.exp(-d)) - sf.CHI1_AT_ONE)
                for d in (0.1, 0.5, 1.0, 2.0, 5.0))
    ok = _check(lines, worst < 1e-9, f"defect vs chi1 worst error {worst:.1e}")
    vol = sp.surface_volume().value
    eta = max(abs(sp.eta_tilde_real(e, vol) - sf.chi1_tilde(e)) for e in (0.1, 0.3, 0.5, 0.7, 0.9))
    ok &= _check(lines, eta < 1e-6, f"eta1 vs chi1 worst error {eta:.1e}")
    return _check(lines, abs(vol - 4 * math.pi**2 / 3) < 1e-6, f"boundary volume {vol:.12f}") and ok


def _oracle_mismatches(field, n, seed):
    gen = np.random.default_rng(seed)
    rho = sm.ginibre_states(field, gen, n)
    lam = np.linalg.eigvalsh(mx.partial_transpose(rho))[:, 0]
    keep = np.abs(lam) > 1e-10
    return int(np.sum(mx.ppt_matrix(rho)[keep] != (lam[keep] > 0))), int(keep.sum())


def _all_estimators(threads):
    st = sm.SeededStream(123)
    n = 2 * sm.CHUNK + 5
    yield "separable-fraction real", sm.separable_fraction_mc(REAL, n, st, threads=threads)
    yield "separable-fraction complex", sm.separable_fraction_mc(COMPLEX, n, st, threads=threads)
    yield "separable-fraction rejection", sm.separable_fraction_mc(REAL, n, st, method="rejection", threads=threads)
    yield "given-D real sqrtx", sm.psep_mc_given_D(REAL, "sqrtx", n, st, threads)
    yield "given-D complex hs", sm.psep_mc_given_D(COMPLEX, "hs", n, st, threads)
    yield "chi complex", sm.chi_mc(COMPLEX, 0.5, n, st, threads)
    yield "ball acceptance", sm.unit_ball_acceptance(COMPLEX, n, st, threads)
    yield "surface volume", sm.surface_volume_mc(n, st, threads)
    yield "half defect", sm.half_defect_mc(0.7, n, st, threads)
    for r, est in sm.milz_strunz_scan(COMPLEX, [0.5], n, st, threads):
        yield f"milz-strunz r={r}", est
    table = sm.chi_table_mc(COMPLEX, np.linspace(0, 1, 5), n, st, threads)
    yield "chi table", (tuple(table.values), tuple(table.cov.ravel()))


def criterion_11(lines):
    ok = True
    for field in (REAL, COMPLEX):
        bad, kept = _oracle_mismatches(field, 10_000, 11)
        ok &= _check(lines, bad == 0 and kept > 9900, f"{field.value} PPT oracle: {bad} mismatches in {kept} cases")
    base = dict(_all_estimators(1))
    again = dict(_all_estimators(1))
    many = dict(_all_estimators(4))
    ok &= _check(lines, base == again, f"seeded determinism over {len(base)} estimators")
    diff = [k for k in base if base[k] != many[k]]
    ok &= _check(lines, not diff, f"1 vs 4 threads bitwise equal (differing: {diff or 'none'})")
    r5 = sp.conditional_volume(Density2.real(0.0, 0.5), REAL) / sp.conditional_volume(Density2.real(0.0, 0.0), REAL)
    ok &= _check(lines, abs(r5 - 0.75**3.5) < 1e-6, f"real scaling {r5:.9f} vs 0.75^3.5")
    table = sm.chi_table_mc(COMPLEX, np.linspace(0, 1, 21), 100_000, sm.SeededStream(5))
    c0 = sp.conditional_volume(Density2.complex(0.0, 0.0, 0.0), COMPLEX, table)
    c5 = sp.conditional_volume(Density2.complex(0.7, 1.1, 0.5), COMPLEX, table)
    return _check(lines, abs(c5 / c0 - 0.75**6) < 1e-6, f"complex scaling {c5 / c0:.9f} vs 0.75^6") and ok


CRITERIA = {
    1: ("real Hilbert-Schmidt probability by quadrature", criterion_1),
    2: ("inner identity equals 1/4", criterion_2),
    3: ("sqrt(x) probability and numerator", criterion_3),
    4: ("Monte Carlo real separable fraction", criterion_4),
    5: ("Monte Carlo complex separable fraction", criterion_5),
    6: ("hybrid complex probability", criterion_6),
    7: ("independence of the reduced state", criterion_7),
    8: ("volume constants", criterion_8),
    9: ("unit-ball volumes and acceptance rates", criterion_9),
    10: ("defect, boundary function and boundary volume", criterion_10),
    11: ("property suites", criterion_11),
}


def run_criterion(num):
    title, fn = CRITERIA[num]
    lines = []
    t0 = time.perf_counter()
    ok = bool(fn(lines))
    head = f"{_fmt(ok)} criterion {num:2d}: {title} ({time.perf_counter() - t0:.1f} s)"
    return ok, "\n".join([head] + lines)


@pytest.mark.slow
@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_acceptance(num, capsys):
    ok, text = run_criterion(num)
    with capsys.disabled():
        print("\n" + text)
    assert ok, text


if __name__ == "__main__":
    results = []
    for num in sorted(CRITERIA):
        ok, text = run_criterion(num)
        print(text, flush=True)
        results.append(ok)
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
