import math

import numpy as np
import pytest

from sepvol import matrix as mx
from sepvol import sampling as sm
from sepvol import separability as sp
from sepvol.errors import Unsupported
from sepvol.matrix import Field
from sepvol.special import chi1_tilde

REAL, COMPLEX = Field.REAL, Field.COMPLEX


def test_stream_determinism_and_independence():
    a = sm.SeededStream(7).generator(3).random(5)
    b = sm.SeededStream(7).generator(3).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sm.SeededStream(7).generator(4).random(5))
    assert not np.array_equal(a, sm.SeededStream(8).generator(3).random(5))
    assert not np.array_equal(a, sm.SeededStream(7).spawn(0).generator(3).random(5))
    assert sm.SeededStream(7).spawn(1) != sm.SeededStream(7).spawn(2)


@pytest.mark.parametrize(
    "estimator",
    [
        lambda st, th: sm.separable_fraction_mc(REAL, 4 * sm.CHUNK + 17, st, threads=th),
        lambda st, th: sm.chi_mc(COMPLEX, 0.4, 4 * sm.CHUNK, st, threads=th),
        lambda st, th: sm.psep_mc_given_D(REAL, "sqrtx", 4 * sm.CHUNK, st, threads=th),
        lambda st, th: sm.unit_ball_acceptance(REAL, 4 * sm.CHUNK, st, threads=th),
    ],
    ids=["separable-fraction", "chi-complex", "given-d-sqrtx", "acceptance"],
)
def test_thread_invariance(estimator):
    st = sm.SeededStream(11)
    one = estimator(st, 1)
    four = estimator(st, 4)
    assert one == four
    assert estimator(sm.SeededStream(12), 1).mean != one.mean


def test_chi_table_thread_invariance():
    grid = np.linspace(0, 1, 6)
    a = sm.chi_table_mc(COMPLEX, grid, 3 * sm.CHUNK, sm.SeededStream(3), threads=1)
    b = sm.chi_table_mc(COMPLEX, grid, 3 * sm.CHUNK, sm.SeededStream(3), threads=3)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.cov, b.cov)


def test_merge_matches_single_pass():
    rng = np.random.default_rng(0)
    x = rng.random(1000)
    parts = [sm._chunk_stats(x[:300], None), sm._chunk_stats(x[300:], None)]
    est = sm.merge_stats(parts)
    assert est.mean == pytest.approx(x.mean(), rel=1e-14)
    assert est.std_error == pytest.approx(x.std(ddof=1) / math.sqrt(1000), rel=1e-12)


@pytest.mark.parametrize("field", [REAL, COMPLEX])
def test_unit_ball_samples_inside(field):
    x, proposed = sm.unit_ball_batch(field, sm.SeededStream(1).generator(), 2000)
    assert x.shape[0] == 2000 and proposed >= 2000
    assert np.all(mx.op_norm(x) < 1.0)
    assert x.dtype == field.dtype


def test_unit_ball_acceptance_real():
    est = sm.unit_ball_acceptance(REAL, 200_000, sm.SeededStream(2))
    target = sp.chi_at_one(REAL) / 16
    assert est.within(target)


def test_chi_mc_limits_and_oracle():
    st = sm.SeededStream(4)
    assert sm.chi_mc(REAL, 1.0, 5000, st).mean == 1.0
    est = sm.chi_mc(REAL, 0.5, 200_000, st)
    assert est.within(chi1_tilde(0.5))
    with pytest.raises(ValueError):
        sm.chi_mc(REAL, 0.0, 10, st)


@pytest.mark.parametrize("field", [REAL, COMPLEX])
def test_chi_monotone_under_common_numbers(field):
    grid = np.linspace(0, 1, 9)
    t = sm.chi_table_mc(field, grid, 50_000, sm.SeededStream(5))
    assert np.all(np.diff(t.values) >= 0)
    assert t.values[0] == 0.0 and t.values[-1] == 1.0


def test_similarity_matches_explicit_conjugation():
    x, _ = sm.unit_ball_batch(REAL, sm.SeededStream(6).generator(), 500)
    for eps in (0.2, 0.7):
        v = np.diag([1.0, eps])
        direct = mx.op_norm(np.linalg.inv(v) @ x @ v)
        assert np.allclose(sm.similarity_norm(x, eps), direct, rtol=1e-12)
        # transposing X is the same as conjugating by diag(1, 1/eps)
        w = np.diag([1.0, 1.0 / eps])
        flipped = mx.op_norm(np.linalg.inv(w) @ x @ w)
        assert np.allclose(sm.similarity_norm(np.swapaxes(x, -1, -2), eps), flipped, rtol=1e-12)


def test_similarity_contractive_matches_norm():
    x, _ = sm.unit_ball_batch(COMPLEX, sm.SeededStream(9).generator(), 3000)
    eps = np.array([0.1, 0.5, 0.9])
    fast = sm.similarity_contractive(x, eps)
    assert fast.shape == (3000, 3)
    for j, e in enumerate(eps):
        assert np.array_equal(fast[:, j], sm.similarity_norm(x, e) < 1.0)


@pytest.mark.parametrize("field", [REAL, COMPLEX])
def test_ginibre_states_valid(field):
    rho = sm.ginibre_states(field, sm.SeededStream(1).generator(), 5000)
    assert np.allclose(np.trace(rho, axis1=1, axis2=2), 1.0)
    assert np.allclose(rho, mx.adjoint(rho))
    assert np.all(np.linalg.eigvalsh(rho)[:, 0] > -1e-14)
    assert np.allclose(rho.mean(axis=0), np.eye(4) / 4, atol=0.01)


def test_ginibre_agrees_with_rejection_oracle():
    st = sm.SeededStream(21)
    g = sm.separable_fraction_mc(REAL, 100_000, st)
    r = sm.separable_fraction_mc(REAL, 100_000, st.spawn(1), method="rejection")
    assert abs(g.mean - r.mean) < 3 * math.hypot(g.std_error, r.std_error)
    assert 0.1 < r.acceptance_rate < 0.3
    # the oracle also matches the Ginibre distribution of eigenvalue moments
    gen = st.spawn(2).generator()
    a = np.linalg.eigvalsh(sm.ginibre_states(REAL, gen, 40_000))
    b = np.linalg.eigvalsh(sm.box_rejection_states(REAL, gen, 40_000)[0])
    assert np.mean(a**2) == pytest.approx(np.mean(b**2), rel=0.01)


def test_hs_states_unknown_method():
    with pytest.raises(ValueError):
        sm.hs_states(REAL, sm.SeededStream(0).generator(), 1, "nope")


def test_sample_hs_state4_shape():
    s = sm.sample_hs_state4(COMPLEX, sm.SeededStream(3))
    assert s.matrix().shape == (4, 4)


@pytest.mark.parametrize("field,measure", [(REAL, "hs"), (COMPLEX, "hs"), (REAL, "sqrtx")])
def test_interval_eigs_moments(field, measure):
    gen = sm.SeededStream(8).generator()
    x, y, proposed = sm.interval_eigs(field, gen, 200_000, sm.Measure.parse(measure))
    assert np.all(np.abs(x) < 1) and np.all(np.abs(y) < 1)
    assert proposed >= x.size
    assert abs(np.mean(x)) < 0.01 and abs(np.mean(x) - np.mean(y)) < 0.01
    # E[(x - y)^2] against the deterministic density on the ordered region
    d = field.d
    if measure == "sqrtx":
        num = sp._sqrtx_angle_integral(lambda u, v: (u - v) ** 2, 1e-11, "m2").value
        den = sp.sqrtx_denominator().value
    else:
        w = lambda u, v: (u - v) ** d * ((1 - u * u) * (1 - v * v)) ** d
        num = sp.interval_integral(lambda u, v: w(u, v) * (u - v) ** 2, tol=1e-11).value
        den = sp.interval_integral(w, tol=1e-11).value
    est = np.mean((x - y) ** 2)
    se = np.std((x - y) ** 2) / math.sqrt(x.size)
    assert abs(est - num / den) < 4 * se


@pytest.mark.parametrize("field", [REAL, COMPLEX])
def test_interval_matrices_spectrum(field):
    mats, x, y, _ = sm.interval_matrices(field, sm.SeededStream(2).generator(), 1000)
    ev = np.linalg.eigvalsh(mats)
    assert np.allclose(np.sort(np.stack([x, y], 1), axis=1), ev, atol=1e-12)


def test_sample_interval_point():
    p = sm.sample_interval_point(REAL, sm.SeededStream(1))
    assert np.all(np.abs(np.linalg.eigvalsh(p.y)) < 1)
    assert p.eigs[0] >= p.eigs[1]


def test_given_d_complex_sqrtx_is_gated():
    with pytest.raises(Unsupported):
        sm.psep_mc_given_D(COMPLEX, "sqrtx", 100, sm.SeededStream(0))
    est = sm.psep_mc_given_D(COMPLEX, "sqrtx", 1000, sm.SeededStream(0), assume_eta2_equals_chi2=True)
    assert 0 < est.mean < 1


def test_given_d_real_matches_quadrature():
    est = sm.psep_mc_given_D(REAL, "hs", 200_000, sm.SeededStream(13))
    assert est.within(29 / 64)
    est = sm.psep_mc_given_D(REAL, "sqrtx", 200_000, sm.SeededStream(14))
    assert est.within(sp.psep_sqrtx_real().value)


@pytest.mark.parametrize("field", [REAL, COMPLEX])
def test_conditional_states_reduce_to_d(field):
    d = sm.bloch_density(field, 0.6).matrix
    d1, d2, c = sm.conditional_states(field, d, sm.SeededStream(3).generator(), 2000)
    assert np.max(np.abs(d1 + d2 - d)) < 1e-10
    assert np.all(np.linalg.eigvalsh(d1)[:, 0] > 0)
    assert np.all(np.linalg.eigvalsh(d2)[:, 0] > 0)
    rho = np.block([[d1, c], [mx.adjoint(c), d2]])
    assert np.all(np.linalg.eigvalsh(rho)[:, 0] > -1e-12)


def test_milz_strunz_small():
    scan = sm.milz_strunz_scan(REAL, [0.0, 0.8], 100_000, sm.SeededStream(4))
    (_, a), (_, b) = scan
    assert abs(a.mean - b.mean) < 3 * math.hypot(a.std_error, b.std_error)
    with pytest.raises(ValueError):
        sm.milz_strunz_scan(REAL, [1.0], 10, sm.SeededStream(4))


def test_surface_volume_mc():
    est = sm.surface_volume_mc(400_000, sm.SeededStream(5))
    assert est.within(4 * math.pi**2 / 3, 4)


def test_eta_boundary_mc():
    checks = sm.eta_boundary_check([0.3, 0.7, 1.0], 200_000, sm.SeededStream(6))
    for c in checks:
        assert c.eta_deterministic == pytest.approx(c.chi, abs=1e-9)
        assert abs(c.mc.mean - c.chi) <= 4 * c.mc.std_error + 1e-12
    assert checks[-1].mc.mean == 1.0


def test_estimate_serialization():
    d = sm.chi_mc(REAL, 0.5, 1000, sm.SeededStream(1)).to_dict()
    assert set(d) == {"mean", "std_error", "n", "acceptance_rate", "seed"}
