"""Small-matrix algebra over the reals and complex numbers.

Every function here accepts stacked inputs of shape ``(..., 2, 2)`` (or
``(..., 4, 4)`` for the 4x4 routines) so that Monte Carlo code can classify
millions of states without Python-level loops.  Scalars of the complex field
are numpy ``complex128``; the :class:`Field` tag decides which dtype a
constructor produces.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NoConvergence, NotPositive, SingularBlock, SingularInput

EPS = np.finfo(float).eps

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])
I2 = np.eye(2)


class Field(enum.Enum):
    REAL = "real"
    COMPLEX = "complex"

    @property
    def d(self) -> int:
        """Dimension of the scalar field over the reals."""
        return 1 if self is Field.REAL else 2

    @property
    def dtype(self):
        return np.float64 if self is Field.REAL else np.complex128

    @classmethod
    def parse(cls, value) -> "Field":
        if isinstance(value, Field):
            return value
        return cls(str(value).lower())


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def det2(a: np.ndarray) -> np.ndarray:
    return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]


def trace2(a: np.ndarray) -> np.ndarray:
    return a[..., 0, 0] + a[..., 1, 1]


def hs_norm2(a: np.ndarray) -> np.ndarray:
    """Squared Hilbert-Schmidt norm over the last two axes."""
    return np.sum(np.abs(a) ** 2, axis=(-2, -1))


def inv2(a: np.ndarray) -> np.ndarray:
    adj = np.empty_like(a)
    adj[..., 0, 0] = a[..., 1, 1]
    adj[..., 1, 1] = a[..., 0, 0]
    adj[..., 0, 1] = -a[..., 0, 1]
    adj[..., 1, 0] = -a[..., 1, 0]
    return adj / det2(a)[..., None, None]


def singular_values(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Singular values ``(s1, s2)`` with ``s1 >= s2 >= 0`` of 2x2 matrices.

    Uses ``s = sqrt|det A| * exp(+-acosh(|A|_HS^2 / (2|det A|)) / 2)``; for
    singular inputs the pair is ``(|A|_HS, 0)``, the spectrum of sqrt(A*A).
    """
    a = np.asarray(a)
    h = hs_norm2(a)
    adet = np.abs(det2(a))
    singular = adet <= EPS * EPS * h
    safe_det = np.where(singular, 1.0, adet)
    q = np.maximum(h / (2.0 * safe_det), 1.0)
    half = 0.5 * np.arccosh(q)
    root = np.sqrt(safe_det)
    s1 = np.where(singular, np.sqrt(h), root * np.exp(half))
    s2 = np.where(singular, 0.0, root * np.exp(-half))
    if s1.ndim == 0:
        return float(s1), float(s2)
    return s1, s2


def op_norm(a: np.ndarray):
    return singular_values(a)[0]


def sv_ratio(a: np.ndarray):
    """Ratio of the smaller to the larger singular value of invertible 2x2 matrices."""
    a = np.asarray(a)
    h = hs_norm2(a)
    adet = np.abs(det2(a))
    if np.any(adet <= EPS * EPS * h) or np.any(h == 0):
        raise SingularInput("sv_ratio needs an invertible matrix")
    q = h / (2.0 * adet)
    out = np.where(q >= 1.0 + 1e-12, np.exp(-np.arccosh(np.maximum(q, 1.0))), 1.0)
    return float(out) if out.ndim == 0 else out


def epsilon_from_eigs(x, y):
    """Singular value ratio of sqrt((I-Y)/(I+Y)) from the eigenvalues of Y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hi = np.maximum(x, y)
    lo = np.minimum(x, y)
    eps = np.sqrt((1.0 - hi) * (1.0 + lo) / ((1.0 + hi) * (1.0 - lo)))
    eps = np.minimum(eps, 1.0 / eps)
    return float(eps) if eps.ndim == 0 else eps


def herm_eigvals(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues ``(larger, smaller)`` of self-adjoint 2x2 matrices."""
    a = np.real(h[..., 0, 0])
    d = np.real(h[..., 1, 1])
    b = np.abs(h[..., 0, 1])
    mid = 0.5 * (a + d)
    rad = np.hypot(0.5 * (a - d), b)
    return mid + rad, mid - rad


def is_positive2(h: np.ndarray) -> np.ndarray:
    """Strict positive definiteness of self-adjoint 2x2 matrices."""
    return herm_eigvals(h)[1] > 0


def herm_sqrt(h: np.ndarray) -> np.ndarray:
    """Positive square root of positive definite 2x2 matrices.

    With ``s = sqrt(det h)`` the root is ``(h + s I) / sqrt(tr h + 2 s)``,
    which is the spectral square root written without eigenvectors.
    """
    h = np.asarray(h)
    if np.any(herm_eigvals(h)[1] <= 0):
        raise NotPositive("herm_sqrt needs a positive definite matrix")
    s = np.sqrt(np.real(det2(h)))
    t = np.sqrt(np.real(trace2(h)) + 2.0 * s)
    out = h + s[..., None, None] * I2
    return out / t[..., None, None]


def herm_inv_sqrt(h: np.ndarray) -> np.ndarray:
    return inv2(herm_sqrt(h))


# ----------------------------------------------------------------------------
# Jacobi eigenvalue iteration


def _jacobi_real_sym(m: np.ndarray, max_sweeps: int, rtol: float) -> np.ndarray:
    a = np.array(m, dtype=float, copy=True)
    n = a.shape[-1]
    scale = np.sqrt(np.sum(a * a, axis=(-2, -1)))
    scale = np.where(scale == 0, 1.0, scale)
    iu = np.triu_indices(n, 1)
    for sweep in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(a[..., iu[0], iu[1]] ** 2, axis=-1))
        if np.all(off <= rtol * scale):
            return np.sort(np.diagonal(a, axis1=-2, axis2=-1), axis=-1)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[..., p, q]
                app = a[..., p, p]
                aqq = a[..., q, q]
                active = np.abs(apq) > 1e-20 * scale
                theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
                t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
                t = np.where(theta == 0, 1.0, t)
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows p, q then columns p, q
                ap = a[..., p, :].copy()
                aq = a[..., q, :].copy()
                a[..., p, :] = c[..., None] * ap - s[..., None] * aq
                a[..., q, :] = s[..., None] * ap + c[..., None] * aq
                ap = a[..., :, p].copy()
                aq = a[..., :, q].copy()
                a[..., :, p] = c[..., None] * ap - s[..., None] * aq
                a[..., :, q] = s[..., None] * ap + c[..., None] * aq
    off = np.sqrt(2.0 * np.sum(a[..., iu[0], iu[1]] ** 2, axis=-1))
    if np.all(off <= rtol * scale):
        return np.sort(np.diagonal(a, axis1=-2, axis2=-1), axis=-1)
    raise NoConvergence(
        f"Jacobi iteration did not converge within {max_sweeps} sweeps",
        partial=np.sort(np.diagonal(a, axis1=-2, axis2=-1), axis=-1),
    )


def eig4_sym(m: np.ndarray, max_sweeps: int = 30, rtol: float = 1e-14) -> np.ndarray:
    """Ascending eigenvalues of self-adjoint 4x4 matrices by cyclic Jacobi.

    Complex Hermitian input is handled through its real 8x8 embedding
    ``[[Re, -Im], [Im, Re]]``, whose spectrum is that of ``m`` doubled.
    """
    m = np.asarray(m)
    if np.iscomplexobj(m):
        re, im = m.real, m.imag
        top = np.concatenate([re, -im], axis=-1)
        bottom = np.concatenate([im, re], axis=-1)
        big = np.concatenate([top, bottom], axis=-2)
        ev = _jacobi_real_sym(big, max_sweeps, rtol)
        return ev[..., ::2]
    return _jacobi_real_sym(m, max_sweeps, rtol)


# ----------------------------------------------------------------------------
# Block states


def schur_positive(d1: np.ndarray, d2: np.ndarray, c: np.ndarray):
    """Positive definiteness of ``[[d1, c], [c*, d2]]`` via the Schur complement of ``d2``."""
    d1 = np.asarray(d1)
    d2 = np.asarray(d2)
    c = np.asarray(c)
    det = np.abs(det2(d2))
    if np.any(det <= EPS * hs_norm2(d2)):
        raise SingularBlock("lower-right block is singular")
    schur = d1 - c @ inv2(d2) @ adjoint(c)
    schur = 0.5 * (schur + adjoint(schur))
    out = is_positive2(d2) & is_positive2(schur)
    return bool(out) if np.ndim(out) == 0 else out


def partial_transpose(rho: np.ndarray) -> np.ndarray:
    """Partial transpose on the second tensor factor of 4x4 matrices."""
    rho = np.asarray(rho)
    shape = rho.shape
    r = rho.reshape(shape[:-2] + (2, 2, 2, 2))
    return np.swapaxes(r, -3, -1).reshape(shape)


def _complex_entry(v):
    if isinstance(v, (list, tuple)):
        re, im = v
        return complex(re, im)
    return v


def _encode(m: np.ndarray, field: Field):
    if field is Field.REAL:
        return [[float(np.real(v)) for v in row] for row in m]
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


@dataclass(frozen=True)
class BlockState4:
    """Two-qubit state ``[[d1, c], [c*, d2]]``; ``d1 + d2`` is its reduced state."""

    d1: np.ndarray
    d2: np.ndarray
    c: np.ndarray
    field: Field = Field.REAL

    @classmethod
    def from_matrix(cls, rho: np.ndarray, field: Optional[Field] = None) -> "BlockState4":
        rho = np.asarray(rho)
        if field is None:
            field = Field.COMPLEX if np.iscomplexobj(rho) and np.any(rho.imag != 0) else Field.REAL
        rho = rho.astype(field.dtype) if field is Field.COMPLEX else np.real(rho).astype(float)
        return cls(rho[:2, :2].copy(), rho[2:, 2:].copy(), rho[:2, 2:].copy(), field)

    def matrix(self) -> np.ndarray:
        return np.block([[self.d1, self.c], [adjoint(self.c), self.d2]])

    def reduced(self) -> np.ndarray:
        return self.d1 + self.d2

    def swapped_c(self) -> "BlockState4":
        """The state ``rho(d1, d2, c*)``: partial transpose composed with conjugation."""
        return BlockState4(self.d1, self.d2, adjoint(self.c), self.field)

    def check(self, tol: float = 1e-12) -> None:
        tr = float(np.real(trace2(self.d1) + trace2(self.d2)))
        if abs(tr - 1.0) > tol:
            raise ValueError(f"trace {tr} differs from 1")
        for name, blk in (("d1", self.d1), ("d2", self.d2)):
            if np.max(np.abs(blk - adjoint(blk))) > tol:
                raise ValueError(f"{name} is not self-adjoint")

    def to_dict(self) -> dict:
        return {
            "field": self.field.value,
            "d1": _encode(self.d1, self.field),
            "d2": _encode(self.d2, self.field),
            "c": _encode(self.c, self.field),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "BlockState4":
        field = Field.parse(obj["field"])

        def dec(rows):
            arr = np.array([[_complex_entry(v) for v in row] for row in rows], dtype=field.dtype)
            if arr.shape != (2, 2):
                raise ValueError("blocks must be 2x2")
            return arr

        return cls(dec(obj["d1"]), dec(obj["d2"]), dec(obj["c"]), field)

    @classmethod
    def from_json(cls, text: str) -> "BlockState4":
        return cls.from_dict(json.loads(text))


def ppt_blocks(d1: np.ndarray, d2: np.ndarray, c: np.ndarray):
    """Batched PPT test on block components; equals separability for two qubits."""
    c = np.asarray(c)
    return schur_positive(d1, d2, c) & schur_positive(d1, d2, adjoint(c))


def is_ppt(state) -> bool:
    """Peres-Horodecki test for a :class:`BlockState4` or a 4x4 matrix."""
    if not isinstance(state, BlockState4):
        state = BlockState4.from_matrix(np.asarray(state))
    return bool(ppt_blocks(state.d1, state.d2, state.c))


def ppt_matrix(rho: np.ndarray):
    """Batched PPT test on stacked 4x4 density matrices."""
    rho = np.asarray(rho)
    return ppt_blocks(rho[..., :2, :2], rho[..., 2:, 2:], rho[..., :2, 2:])


# ----------------------------------------------------------------------------
# Parametrizations


def sa_matrix(x, y, theta, phi=None) -> np.ndarray:
    """Self-adjoint 2x2 matrix with eigenvalues ``x, y`` and Bloch-type angles.

    Real case (``phi is None``): ``(x+y)/2 I + (x-y)/2 (cos t s1 + sin t s3)``.
    Complex case: the axis is ``(cos t sin p, sin t sin p, cos p)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    mean = (0.5 * (x + y))[..., None, None]
    half = (0.5 * (x - y))[..., None, None]
    if phi is None:
        axis = np.cos(theta)[..., None, None] * SIGMA1 + np.sin(theta)[..., None, None] * SIGMA3
        return mean * I2 + half * axis
    phi = np.asarray(phi, dtype=float)
    axis = (
        (np.cos(theta) * np.sin(phi))[..., None, None] * SIGMA1
        + (np.sin(theta) * np.sin(phi))[..., None, None] * SIGMA2
        + np.cos(phi)[..., None, None] * SIGMA3
    )
    return mean * I2 + half * axis


@dataclass(frozen=True)
class Density2:
    """Faithful qubit (or rebit) state in Bloch coordinates."""

    matrix: np.ndarray
    theta: float
    r: float
    phi: Optional[float] = None

    @classmethod
    def real(cls, theta: float, r: float) -> "Density2":
        if not 0.0 <= r < 1.0:
            raise ValueError("Bloch radius must lie in [0, 1)")
        return cls(sa_matrix(0.5 * (1 + r), 0.5 * (1 - r), theta), theta, r)

    @classmethod
    def complex(cls, theta: float, phi: float, r: float) -> "Density2":
        if not 0.0 <= r < 1.0:
            raise ValueError("Bloch radius must lie in [0, 1)")
        return cls(sa_matrix(0.5 * (1 + r), 0.5 * (1 - r), theta, phi), theta, r, phi)

    @property
    def field(self) -> Field:
        return Field.REAL if self.phi is None else Field.COMPLEX

    @property
    def det(self) -> float:
        return float(np.real(det2(self.matrix)))


@dataclass(frozen=True)
class OperatorIntervalPoint:
    """Self-adjoint ``y`` with ``-I < y < I``; ``eigs`` is (larger, smaller)."""

    y: np.ndarray
    eigs: tuple[float, float]

    @classmethod
    def from_matrix(cls, y: np.ndarray) -> "OperatorIntervalPoint":
        hi, lo = herm_eigvals(np.asarray(y))
        if not (-1.0 < lo and hi < 1.0):
            raise ValueError("eigenvalues must lie strictly inside (-1, 1)")
        return cls(np.asarray(y), (float(hi), float(lo)))

    @classmethod
    def from_eigs(cls, x: float, y: float, theta: float = 0.0, phi=None) -> "OperatorIntervalPoint":
        return cls.from_matrix(sa_matrix(x, y, theta, phi))


def epsilon_of(point) -> float:
    """``sv_ratio(sqrt((I - Y)/(I + Y)))`` for a point of the operator interval."""
    if isinstance(point, OperatorIntervalPoint):
        x, y = point.eigs
    else:
        x, y = herm_eigvals(np.asarray(point))
    return epsilon_from_eigs(x, y)
