# enable type annotation syntax on Python versions earlier than 3.9
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt

from hidden_lgi.errors import DimensionMismatch, NotHermitian, NotPSD, NotSquare

# dense complex matrix; every operator in the package (states, Kraus operators, observables)
ComplexMatrix = npt.NDArray[np.complex128]

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-9


@dataclass(frozen=True)
class HermitianSpectrum:
    """Real eigenvalues of a Hermitian matrix, sorted non-increasing."""

    eigenvalues: npt.NDArray[np.float64]

    def __post_init__(self):
        values = np.asarray(self.eigenvalues, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise DimensionMismatch("a spectrum needs at least one eigenvalue")
        if np.any(np.diff(values) > 0):
            raise ValueError("eigenvalues must be sorted non-increasing")
        values.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)

    def __len__(self) -> int:
        return self.eigenvalues.size

    @property
    def minimum(self) -> float:
        return float(self.eigenvalues[-1])


def as_matrix(data) -> ComplexMatrix:
    """Coerce array-like data to a read-only complex matrix with at least one row and column."""
    matrix = np.array(data, dtype=np.complex128)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise DimensionMismatch(f"expected a non-empty 2-D matrix, got shape {matrix.shape}")
    matrix.setflags(write=False)
    return matrix


def identity(d: int) -> ComplexMatrix:
    return as_matrix(np.eye(d))


def ket_bra(i: int, j: int, d: int) -> ComplexMatrix:
    """|i><j| in dimension d."""
    matrix = np.zeros((d, d), dtype=np.complex128)
    matrix[i, j] = 1.0
    return as_matrix(matrix)


def _require_square(a: ComplexMatrix) -> int:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {a.shape}")
    return a.shape[0]


def matmul(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return as_matrix(a @ b)


def adjoint(a: ComplexMatrix) -> ComplexMatrix:
    return as_matrix(np.conj(a).T)


def kron(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    return as_matrix(np.kron(a, b))


def trace(a: ComplexMatrix) -> complex:
    _require_square(a)
    return complex(np.trace(a))


def partial_trace(a: ComplexMatrix, subsystem: int, dims: Sequence[int]) -> ComplexMatrix:
    """Trace out `subsystem` (0 is the left Kronecker factor) of a bipartite operator.

    Returns the reduced matrix on the remaining factor.
    """
    d1, d2 = dims
    if a.shape != (d1 * d2, d1 * d2):
        raise DimensionMismatch(f"shape {a.shape} does not match dims {tuple(dims)}")
    blocks = np.asarray(a).reshape(d1, d2, d1, d2)
    if subsystem == 0:
        return as_matrix(np.einsum("ijik->jk", blocks))
    if subsystem == 1:
        return as_matrix(np.einsum("ijkj->ik", blocks))
    raise DimensionMismatch(f"subsystem must be 0 or 1, got {subsystem}")


def hermiticity_deviation(a: ComplexMatrix) -> float:
    _require_square(a)
    return float(np.max(np.abs(a - np.conj(a).T)))


def is_hermitian(a: ComplexMatrix, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_deviation(a) <= tol


def hermitian_eigenvalues(a: ComplexMatrix) -> HermitianSpectrum:
    deviation = hermiticity_deviation(a)
    if deviation > HERMITIAN_TOL:
        raise NotHermitian(f"matrix deviates from its adjoint by {deviation:.3e}")
    hermitian_part = (a + np.conj(a).T) / 2
    return HermitianSpectrum(np.linalg.eigvalsh(hermitian_part)[::-1].copy())


def is_psd(a: ComplexMatrix, tol: float = PSD_TOL) -> bool:
    if not is_hermitian(a):
        return False
    return hermitian_eigenvalues(a).minimum >= -tol


def psd_sqrt(a: ComplexMatrix) -> ComplexMatrix:
    """Unique positive semidefinite square root.

    Eigenvalues in [-PSD_TOL, 0) are rounding noise and are clamped to zero.
    """
    deviation = hermiticity_deviation(a)
    if deviation > HERMITIAN_TOL:
        raise NotHermitian(f"matrix deviates from its adjoint by {deviation:.3e}")
    eigenvalues, eigenvectors = np.linalg.eigh((a + np.conj(a).T) / 2)
    if eigenvalues.min() < -PSD_TOL:
        raise NotPSD(f"smallest eigenvalue {eigenvalues.min():.3e} is negative")
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return as_matrix((eigenvectors * roots) @ np.conj(eigenvectors).T)


def frobenius_distance(a: ComplexMatrix, b: ComplexMatrix) -> float:
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot compare {a.shape} with {b.shape}")
    return float(np.linalg.norm(a - b))
