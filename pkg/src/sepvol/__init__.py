"""Separability probabilities of two-qubit and two-rebit states.

Deterministic quadrature and seeded Monte Carlo for the Hilbert-Schmidt and
sqrt(x)-metric measures.
"""

from .errors import (
    DomainError,
    NoConvergence,
    NotPositive,
    SepvolError,
    SingularBlock,
    SingularInput,
    TableTooCoarse,
    Unsupported,
)
from .matrix import BlockState4, Density2, Field, OperatorIntervalPoint, epsilon_of, is_ppt
from .quadrature import QuadResult, integrate_1d, integrate_2d
from .sampling import MCEstimate, Measure, SeededStream
from .separability import psep_complex_hs, psep_real_hs, psep_sqrtx_real, reference_volumes
from .special import ChiTable, chi1_tilde, defect

__version__ = "0.1.0"
