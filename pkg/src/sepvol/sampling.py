"""Seeded samplers and Monte Carlo estimators.

All estimators split ``n`` draws into fixed chunks of ``CHUNK`` samples.
Chunk ``i`` of a :class:`SeededStream` reads from a Philox generator keyed by
``(seed, stream_id)`` with counter block ``i``, so results do not depend on
how many threads execute the chunks.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import matrix as mx
from .errors import Unsupported
from .matrix import Field
from .special import ChiTable, chi1_fast, defect

CHUNK = 1 << 16
BOUNDARY_GUARD = 1e-12
_MASK64 = (1 << 64) - 1


class Measure(enum.Enum):
    HS = "hs"
    SQRTX = "sqrtx"

    @classmethod
    def parse(cls, value) -> "Measure":
        if isinstance(value, Measure):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class SeededStream:
    seed: int
    stream_id: int = 0

    def generator(self, chunk: int = 0) -> np.random.Generator:
        key = ((self.stream_id & _MASK64) << 64) | (self.seed & _MASK64)
        return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, chunk]))

    def spawn(self, index: int) -> "SeededStream":
        """A child stream, independent of the parent and of other children."""
        return SeededStream(self.seed, ((self.stream_id + 1) * 0x9E3779B97F4A7C15 + index) & _MASK64)


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n: int
    acceptance_rate: float = 1.0
    seed: Optional[int] = None
    m2: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("m2")
        return d

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.std_error


@dataclass
class _ChunkStats:
    n: int
    total: float
    m2: float
    accepted: int
    proposed: int


def _chunk_stats(values: np.ndarray, proposed: Optional[int]) -> _ChunkStats:
    values = np.asarray(values, dtype=float)
    n = values.size
    total = float(np.sum(values))
    m2 = float(np.sum((values - total / n) ** 2)) if n else 0.0
    return _ChunkStats(n, total, m2, n, proposed if proposed is not None else n)


def merge_stats(chunks: Sequence[_ChunkStats], seed=None) -> MCEstimate:
    """Pool chunk statistics: exact-sum means and pairwise (Chan) variance updates."""
    n = sum(c.n for c in chunks)
    mean = math.fsum(c.total for c in chunks) / n
    n_acc, mean_acc, m2 = 0, 0.0, 0.0
    for c in chunks:
        if c.n == 0:
            continue
        cm = c.total / c.n
        tot = n_acc + c.n
        delta = cm - mean_acc
        mean_acc += delta * c.n / tot
        m2 += c.m2 + delta * delta * n_acc * c.n / tot
        n_acc = tot
    var = m2 / (n - 1) if n > 1 else 0.0
    accepted = sum(c.accepted for c in chunks)
    proposed = sum(c.proposed for c in chunks)
    return MCEstimate(mean, math.sqrt(var / n), n, accepted / proposed, seed, m2)


def merge_estimates(parts: Sequence[MCEstimate]) -> MCEstimate:
    """Combine independent estimates of the same quantity."""
    chunks = [
        _ChunkStats(p.n, p.mean * p.n, p.m2, p.n, int(round(p.n / p.acceptance_rate)))
        for p in parts
    ]
    return merge_stats(chunks, parts[0].seed if parts else None)


def run_chunks(kernel: Callable, n: int, stream: SeededStream, threads: int = 1) -> MCEstimate:
    """Evaluate ``kernel(gen, size) -> (values, proposed)`` over fixed chunks and pool."""
    if n < 1:
        raise ValueError("n must be positive")
    sizes = [CHUNK] * (n // CHUNK)
    if n % CHUNK:
        sizes.append(n % CHUNK)

    def job(i):
        values, proposed = kernel(stream.generator(i), sizes[i])
        return _chunk_stats(values, proposed)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            stats = list(ex.map(job, range(len(sizes))))
    else:
        stats = [job(i) for i in range(len(sizes))]
    return merge_stats(stats, stream.seed)


# ----------------------------------------------------------------------------
# Unit ball of the operator norm


def unit_ball_batch(field: Field, gen: np.random.Generator, size: int) -> tuple[np.ndarray, int]:
    """``size`` uniform draws from ``{|X| < 1}`` by rejection from the entrywise cube.

    Returns the samples and the number of cube proposals consumed.
    """
    field = Field.parse(field)
    rate = 0.41 if field is Field.REAL else 0.031
    out = []
    have, proposed = 0, 0
    while have < size:
        batch = int((size - have) / rate * 1.05) + 64
        if field is Field.REAL:
            cand = gen.uniform(-1.0, 1.0, size=(batch, 2, 2))
        else:
            raw = gen.uniform(-1.0, 1.0, size=(batch, 2, 2, 2))
            cand = raw[..., 0] + 1j * raw[..., 1]
        ok = mx.op_norm(cand) < 1.0
        idx = np.flatnonzero(ok)
        need = size - have
        if idx.size >= need:
            proposed += int(idx[need - 1]) + 1
            out.append(cand[idx[:need]])
            have = size
        else:
            proposed += batch
            out.append(cand[idx])
            have += idx.size
    return np.concatenate(out), proposed


def sample_unit_ball(field: Field, stream: SeededStream) -> np.ndarray:
    return unit_ball_batch(field, stream.generator(), 1)[0][0]


def similarity_norm(x: np.ndarray, eps) -> np.ndarray:
    """``|V^-1 X V|`` with ``V = diag(1, eps)``."""
    eps = np.asarray(eps, dtype=float)
    y = np.array(x, copy=True)
    y[..., 0, 1] = x[..., 0, 1] * eps
    y[..., 1, 0] = x[..., 1, 0] / eps
    return mx.op_norm(y)


def similarity_contractive(x: np.ndarray, eps) -> np.ndarray:
    """``|V^-1 X V| < 1`` for ``V = diag(1, eps)``, broadcasting ``eps`` against the batch.

    Uses ``|A| < 1  <=>  |A|_HS^2 < 1 + |det A|^2 and |A|_HS^2 < 2``; the
    determinant does not depend on ``eps``.
    """
    eps = np.asarray(eps, dtype=float)
    diag = (np.abs(x[..., 0, 0]) ** 2 + np.abs(x[..., 1, 1]) ** 2)[..., None]
    up = (np.abs(x[..., 0, 1]) ** 2)[..., None]
    low = (np.abs(x[..., 1, 0]) ** 2)[..., None]
    det2 = (np.abs(mx.det2(x)) ** 2)[..., None]
    hs = diag + up * eps**2 + low / eps**2
    out = (hs < 1.0 + det2) & (hs < 2.0)
    return out[..., 0] if eps.ndim == 0 else out


def unit_ball_acceptance(field: Field, n: int, stream: SeededStream, threads: int = 1) -> MCEstimate:
    """Acceptance of the cube rejection step as a Bernoulli mean over proposals."""
    field = Field.parse(field)
    shape = (2, 2) if field is Field.REAL else (2, 2, 2)

    def kernel(gen, size):
        raw = gen.uniform(-1.0, 1.0, size=(size,) + shape)
        cand = raw if field is Field.REAL else raw[..., 0] + 1j * raw[..., 1]
        return (mx.op_norm(cand) < 1.0).astype(float), None

    return run_chunks(kernel, n, stream, threads)


def chi_mc(field: Field, eps: float, n: int, stream: SeededStream, threads: int = 1) -> MCEstimate:
    """Fraction of uniform unit-ball draws that stay in the ball under similarity by diag(1, eps)."""
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")

    def kernel(gen, size):
        x, proposed = unit_ball_batch(field, gen, size)
        return similarity_contractive(x, eps).astype(float), proposed

    return run_chunks(kernel, n, stream, threads)


def chi_table_mc(
    field: Field, grid, n: int, stream: SeededStream, threads: int = 1
) -> ChiTable:
    """Monte Carlo table of ``chi_d`` on ``grid`` with common random numbers across nodes."""
    grid = np.asarray(grid, dtype=float)
    inner = grid[(grid > 0) & (grid < 1)]
    sizes = [CHUNK] * (n // CHUNK) + ([n % CHUNK] if n % CHUNK else [])

    def job(i):
        x, _ = unit_ball_batch(field, stream.generator(i), sizes[i])
        ind = similarity_contractive(x, inner).astype(float)
        return ind.sum(axis=0), ind.T @ ind

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]
    sums = np.sum([p[0] for p in parts], axis=0)
    cross = np.sum([p[1] for p in parts], axis=0)
    mean = sums / n
    cov_inner = (cross / n - np.outer(mean, mean)) * (n / (n - 1)) / n
    k = len(grid)
    values = np.zeros(k)
    cov = np.zeros((k, k))
    mask = (grid > 0) & (grid < 1)
    values[mask] = mean
    values[grid == 1.0] = 1.0
    cov[np.ix_(mask, mask)] = cov_inner
    return ChiTable(grid, values, cov, n, stream.seed, Field.parse(field).value)


# ----------------------------------------------------------------------------
# Hilbert-Schmidt distributed two-qubit states


def ginibre_states(field: Field, gen: np.random.Generator, size: int) -> np.ndarray:
    """Hilbert-Schmidt states ``G G* / Tr``.

    A flat density on real symmetric matrices needs a 4x5 real Ginibre
    matrix (Wishart exponent (K - N - 1)/2 = 0); the complex case uses 4x4.
    """
    field = Field.parse(field)
    if field is Field.REAL:
        g = gen.standard_normal((size, 4, 5))
    else:
        raw = gen.standard_normal((size, 4, 4, 2))
        g = raw[..., 0] + 1j * raw[..., 1]
    rho = g @ mx.adjoint(g)
    tr = np.real(np.trace(rho, axis1=-2, axis2=-1))
    return rho / tr[:, None, None]


def box_rejection_states(field: Field, gen: np.random.Generator, size: int) -> tuple[np.ndarray, int]:
    """Flat measure on trace-one coordinates by rejection, kept as an oracle for the Ginibre sampler.

    Each off-diagonal entry is proposed uniformly in the box
    ``|Re|, |Im| <= sqrt(rho_ii rho_jj)`` (necessary for positivity).  The
    box volumes are ``prod_i rho_ii^(3d/2)``, so proposing the diagonal from
    ``Dirichlet(1 + 3d/2)`` makes the joint proposal flat; accepting positive
    definite proposals then leaves the flat measure on the state body.
    """
    field = Field.parse(field)
    d = field.d
    iu = np.triu_indices(4, 1)
    out, have, proposed = [], 0, 0
    while have < size:
        batch = min(max(8 * (size - have), 1024), 1 << 17)
        diag = gen.dirichlet(np.full(4, 1.0 + 1.5 * d), size=batch)
        half = np.sqrt(diag[:, iu[0]] * diag[:, iu[1]])
        off = half * gen.uniform(-1.0, 1.0, size=(batch, 6))
        if field is Field.COMPLEX:
            off = off + 1j * half * gen.uniform(-1.0, 1.0, size=(batch, 6))
        rho = np.zeros((batch, 4, 4), dtype=field.dtype)
        rho[:, np.arange(4), np.arange(4)] = diag
        rho[:, iu[0], iu[1]] = off
        rho[:, iu[1], iu[0]] = np.conj(off)
        ok = np.linalg.eigvalsh(rho)[:, 0] > 0
        idx = np.flatnonzero(ok)
        need = size - have
        if idx.size >= need:
            proposed += int(idx[need - 1]) + 1
            out.append(rho[idx[:need]])
            have = size
        else:
            proposed += batch
            out.append(rho[idx])
            have += idx.size
    return np.concatenate(out), proposed


def hs_states(field: Field, gen: np.random.Generator, size: int, method: str = "ginibre") -> tuple[np.ndarray, int]:
    if method == "ginibre":
        return ginibre_states(field, gen, size), size
    if method == "rejection":
        return box_rejection_states(field, gen, size)
    raise ValueError(f"unknown sampler {method!r}")


def sample_hs_state4(field: Field, stream: SeededStream, method: str = "ginibre") -> mx.BlockState4:
    rho, _ = hs_states(field, stream.generator(), 1, method)
    return mx.BlockState4.from_matrix(rho[0], Field.parse(field))


def separable_fraction_mc(
    field: Field, n: int, stream: SeededStream, method: str = "ginibre", threads: int = 1
) -> MCEstimate:
    """Fraction of Hilbert-Schmidt random states that pass the PPT test."""

    def kernel(gen, size):
        rho, proposed = hs_states(field, gen, size, method)
        return mx.ppt_matrix(rho).astype(float), proposed

    return run_chunks(kernel, n, stream, threads)


# ----------------------------------------------------------------------------
# Operator interval


def _interval_exponent(field: Field, measure: Measure) -> float:
    d = field.d
    return float(d) if measure is Measure.HS else (d - 2) / 4.0


def interval_eigs(
    field: Field, gen: np.random.Generator, size: int, measure: Measure = Measure.HS
) -> tuple[np.ndarray, np.ndarray, int]:
    """Eigenvalue pairs with density ``|x-y|^d (1-x^2)^a (1-y^2)^a`` on ``(-1, 1)^2``.

    Proposals are independent ``2 Beta(a+1, a+1) - 1`` variables accepted
    with probability ``(|x-y|/2)^d``; ``a = d`` for Hilbert-Schmidt and
    ``(d-2)/4`` for the sqrt(x) metric.
    """
    field = Field.parse(field)
    measure = Measure.parse(measure)
    a = _interval_exponent(field, measure)
    d = field.d
    xs, ys = [], []
    have, proposed = 0, 0
    while have < size:
        batch = int((size - have) * 3.5) + 64
        x = 2.0 * gen.beta(a + 1.0, a + 1.0, size=batch) - 1.0
        y = 2.0 * gen.beta(a + 1.0, a + 1.0, size=batch) - 1.0
        u = gen.random(batch)
        ok = u < (0.5 * np.abs(x - y)) ** d
        ok &= np.maximum(np.abs(x), np.abs(y)) < 1.0 - BOUNDARY_GUARD
        idx = np.flatnonzero(ok)
        need = size - have
        if idx.size >= need:
            proposed += int(idx[need - 1]) + 1
            idx = idx[:need]
        else:
            proposed += batch
        xs.append(x[idx])
        ys.append(y[idx])
        have += idx.size
    return np.concatenate(xs), np.concatenate(ys), proposed


def interval_matrices(
    field: Field, gen: np.random.Generator, size: int, measure: Measure = Measure.HS
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Full operator-interval points: eigenvalues plus uniformly distributed eigenbasis."""
    field = Field.parse(field)
    x, y, proposed = interval_eigs(field, gen, size, measure)
    theta = gen.uniform(0.0, 2.0 * np.pi, size=size)
    if field is Field.REAL:
        mats = mx.sa_matrix(x, y, theta)
    else:
        phi = np.arccos(gen.uniform(-1.0, 1.0, size=size))
        mats = mx.sa_matrix(x, y, theta, phi)
    return mats, x, y, proposed


def sample_interval_point(
    field: Field, stream: SeededStream, measure: Measure = Measure.HS
) -> mx.OperatorIntervalPoint:
    mats, _, _, _ = interval_matrices(field, stream.generator(), 1, measure)
    return mx.OperatorIntervalPoint.from_matrix(mats[0])


def psep_mc_given_D(
    field: Field,
    measure: Measure,
    n: int,
    stream: SeededStream,
    threads: int = 1,
    assume_eta2_equals_chi2: bool = False,
) -> MCEstimate:
    """Conditional separability probability from the operator-interval representation.

    Real field: averages ``chi1(eps(Y))`` over the interval measure.  Complex
    field: ``chi2`` has no closed form, so each ``Y`` is paired with one
    unit-ball draw and the estimator averages the survival indicator, which
    is unbiased for the same integral.
    """
    field = Field.parse(field)
    measure = Measure.parse(measure)
    if field is Field.COMPLEX and measure is Measure.SQRTX and not assume_eta2_equals_chi2:
        raise Unsupported("complex sqrt(x) probability relies on the unproven eta2 = chi2 identity")

    def kernel(gen, size):
        x, y, proposed = interval_eigs(field, gen, size, measure)
        eps = mx.epsilon_from_eigs(x, y)
        if field is Field.REAL:
            return chi1_fast(eps), proposed
        ball, _ = unit_ball_batch(field, gen, size)
        return similarity_contractive(ball, eps[:, None])[:, 0].astype(float), proposed

    return run_chunks(kernel, n, stream, threads)


# ----------------------------------------------------------------------------
# States with a prescribed reduced state


def bloch_density(field: Field, r: float) -> mx.Density2:
    field = Field.parse(field)
    return mx.Density2.real(0.0, r) if field is Field.REAL else mx.Density2.complex(0.0, 0.0, r)


def conditional_states(
    field: Field, d: np.ndarray, gen: np.random.Generator, size: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Blocks ``(d1, d2, c)`` of Hilbert-Schmidt random states with ``d1 + d2 = d``.

    ``Y`` follows the interval measure, ``A = d^1/2 Y d^1/2``,
    ``d1, d2 = (d +- A)/2`` and ``c = d1^1/2 X d2^1/2`` with ``X`` uniform in
    the unit ball.
    """
    field = Field.parse(field)
    y, _, _, _ = interval_matrices(field, gen, size, Measure.HS)
    dh = mx.herm_sqrt(np.asarray(d))
    a = dh @ y @ dh
    d1 = 0.5 * (d + a)
    d2 = 0.5 * (d - a)
    d1 = 0.5 * (d1 + mx.adjoint(d1))
    d2 = 0.5 * (d2 + mx.adjoint(d2))
    x, _ = unit_ball_batch(field, gen, size)
    c = mx.herm_sqrt(d1) @ x @ mx.herm_sqrt(d2)
    return d1, d2, c


def milz_strunz_scan(
    field: Field, radii: Sequence[float], n: int, stream: SeededStream, threads: int = 1
) -> list[tuple[float, MCEstimate]]:
    """Separable fraction of states whose reduced state has Bloch radius ``r``."""
    field = Field.parse(field)
    out = []
    for i, r in enumerate(radii):
        if not 0.0 <= r < 1.0:
            raise ValueError("radii must lie in [0, 1)")
        d = bloch_density(field, r).matrix

        def kernel(gen, size, d=d):
            d1, d2, c = conditional_states(field, d, gen, size)
            return mx.ppt_blocks(d1, d2, c).astype(float), None

        out.append((float(r), run_chunks(kernel, n, stream.spawn(i), threads)))
    return out


# ----------------------------------------------------------------------------
# Boundary (sqrt(x)) function of the real unit ball


def _exp_m2_acosh(z):
    # huge z underflows to 0, which is the right limit
    with np.errstate(over="ignore"):
        return 1.0 / (z + np.sqrt(np.maximum(z * z - 1.0, 0.0))) ** 2


def half_defect_mc(delta: float, n: int, stream: SeededStream, threads: int = 1) -> MCEstimate:
    """Importance-sampled ``int_0^delta int_0^2pi int_0^inf exp(-2 acosh(rho + |rho sin phi - 1| cosh t))``."""

    def kernel(gen, size):
        t = gen.uniform(0.0, delta, size)
        phi = gen.uniform(0.0, 2.0 * np.pi, size)
        u = gen.random(size)
        rho = u / (1.0 - u)
        z = rho + np.abs(rho * np.sin(phi) - 1.0) * np.cosh(t)
        return delta * 2.0 * np.pi * (1.0 + rho) ** 2 * _exp_m2_acosh(z), None

    return run_chunks(kernel, n, stream, threads)


def surface_volume_mc(n: int, stream: SeededStream, threads: int = 1, scale: float = 0.5) -> MCEstimate:
    """Monte Carlo of the boundary volume ``4 int exp(-2 acosh(rho + |rho sin phi - 1| cosh 2t))``.

    ``t`` is drawn from a Cauchy law: the integrand decays only slowly in
    ``t`` near ``rho sin phi = 1`` and lighter tails give infinite variance.
    """

    def kernel(gen, size):
        t = scale * gen.standard_cauchy(size)
        q = 1.0 / (np.pi * scale * (1.0 + (t / scale) ** 2))
        phi = gen.uniform(0.0, 2.0 * np.pi, size)
        u = gen.random(size)
        rho = u / (1.0 - u)
        z = rho + np.abs(rho * np.sin(phi) - 1.0) * np.cosh(np.minimum(2.0 * np.abs(t), 700.0))
        return 4.0 * 2.0 * np.pi * (1.0 + rho) ** 2 * _exp_m2_acosh(z) / q, None

    return run_chunks(kernel, n, stream, threads)


@dataclass(frozen=True)
class EtaCheck:
    eps: float
    eta_deterministic: float
    chi: float
    mc: MCEstimate

    def to_dict(self) -> dict:
        return {"eps": self.eps, "eta_deterministic": self.eta_deterministic, "chi": self.chi, "mc": self.mc.to_dict()}


def eta_boundary_check(
    eps_grid: Sequence[float], n: int, stream: SeededStream, threads: int = 1
) -> list[EtaCheck]:
    """Boundary function of the real unit ball, deterministically and by Monte Carlo.

    Deterministic: ``1 - 4 / Vol(dB) * defect(-log eps) / 2`` with the
    quadrature surface volume.  Monte Carlo: both the half-defect and the
    surface volume are sampled from the boundary chart, and the ratio's error
    follows from the delta method.
    """
    from .separability import surface_volume
    from .special import chi1_tilde

    vol = surface_volume().value
    vol_mc = surface_volume_mc(n, stream.spawn(10_000), threads)
    out = []
    for i, eps in enumerate(eps_grid):
        if not 0.0 < eps <= 1.0:
            raise ValueError("eps must lie in (0, 1]")
        delta = -math.log(eps)
        det = 1.0 - 4.0 / vol * 0.5 * defect(delta)
        if delta == 0.0:
            mc = MCEstimate(1.0, 0.0, n, 1.0, stream.seed)
        else:
            h = half_defect_mc(delta, n, stream.spawn(i), threads)
            mean = 1.0 - 4.0 * h.mean / vol_mc.mean
            se = math.hypot(4.0 / vol_mc.mean * h.std_error, 4.0 * h.mean / vol_mc.mean**2 * vol_mc.std_error)
            mc = MCEstimate(mean, se, n, 1.0, stream.seed)
        out.append(EtaCheck(float(eps), det, chi1_tilde(eps), mc))
    return out
