import numpy as np
import pytest

from hidden_lgi import cmatrix
from hidden_lgi.errors import DimensionMismatch, NotHermitian, NotPSD, NotSquare

from .conftest import PROPERTY_INSTANCES


def test_as_matrix_is_read_only():
    m = cmatrix.as_matrix([[1, 2], [3, 4]])
    assert(m.dtype == np.complex128)
    with pytest.raises(ValueError):
        m[0, 0] = 5


def test_as_matrix_rejects_vectors():
    with pytest.raises(DimensionMismatch):
        cmatrix.as_matrix([1, 2, 3])


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        cmatrix.matmul(cmatrix.identity(2), cmatrix.identity(3))


def test_trace_needs_square():
    with pytest.raises(NotSquare):
        cmatrix.trace(cmatrix.as_matrix(np.ones((2, 3))))


def test_ket_bra():
    m = cmatrix.ket_bra(0, 1, 2)
    assert(m[0, 1] == 1)
    assert(np.count_nonzero(m) == 1)


def test_adjoint_examples(rng, random_matrix):
    sigma_y = cmatrix.as_matrix([[0, -1j], [1j, 0]])
    assert(np.allclose(cmatrix.adjoint(sigma_y), sigma_y))
    assert(np.allclose(cmatrix.adjoint(1j * cmatrix.identity(2)), -1j * np.eye(2)))
    a = random_matrix(rng, 2, 3)
    assert(np.array_equal(cmatrix.adjoint(cmatrix.adjoint(a)), a))


def test_kron_examples(random_matrix, rng):
    sigma_z = np.diag([1, -1])
    assert(np.allclose(cmatrix.kron(sigma_z, sigma_z), np.diag([1, -1, -1, 1])))
    assert(np.allclose(cmatrix.kron(cmatrix.identity(2), cmatrix.identity(2)), np.eye(4)))
    a = random_matrix(rng, 2, 3)
    assert(np.allclose(cmatrix.kron(a, cmatrix.identity(1)), a))


def test_kron_mixed_product(rng, random_matrix):
    for _ in range(PROPERTY_INSTANCES):
        a, b, c, d = (random_matrix(rng) for _ in range(4))
        left = cmatrix.kron(a, b) @ cmatrix.kron(c, d)
        right = cmatrix.kron(a @ c, b @ d)
        assert(np.allclose(left, right, atol=1e-10))


def test_kron_trace_factorizes(rng, random_matrix):
    for _ in range(PROPERTY_INSTANCES):
        a, b = random_matrix(rng), random_matrix(rng, 3, 3)
        assert(abs(cmatrix.trace(cmatrix.kron(a, b)) - cmatrix.trace(a) * cmatrix.trace(b)) < 1e-9)


def test_partial_trace_of_product(rng, random_matrix):
    for _ in range(PROPERTY_INSTANCES):
        a, b = random_matrix(rng, 2, 2), random_matrix(rng, 3, 3)
        ab = cmatrix.kron(a, b)
        assert(np.allclose(cmatrix.partial_trace(ab, 0, (2, 3)), cmatrix.trace(a) * b, atol=1e-10))
        assert(np.allclose(cmatrix.partial_trace(ab, 1, (2, 3)), cmatrix.trace(b) * a, atol=1e-10))


def test_partial_trace_rejects_bad_dims():
    with pytest.raises(DimensionMismatch):
        cmatrix.partial_trace(cmatrix.identity(4), 0, (2, 3))
    with pytest.raises(DimensionMismatch):
        cmatrix.partial_trace(cmatrix.identity(4), 2, (2, 2))


def test_hermitian_eigenvalues_sorted():
    spectrum = cmatrix.hermitian_eigenvalues(np.diag([0.2, 3.0, -1.0]))
    assert(np.allclose(spectrum.eigenvalues, [3.0, 0.2, -1.0]))
    assert(len(spectrum) == 3)
    assert(spectrum.minimum == pytest.approx(-1.0))


def test_hermitian_eigenvalues_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        cmatrix.hermitian_eigenvalues(cmatrix.as_matrix([[0, 1], [0, 0]]))


def test_eigenvalues_sum_to_trace(rng, random_matrix):
    for _ in range(PROPERTY_INSTANCES):
        g = random_matrix(rng, 4, 4)
        a = g + np.conj(g).T
        assert(abs(np.sum(cmatrix.hermitian_eigenvalues(a).eigenvalues) - cmatrix.trace(a).real) < 1e-9)


def test_is_psd():
    assert(cmatrix.is_psd(np.diag([1.0, 0.0])))
    assert(not cmatrix.is_psd(np.diag([1.0, -0.1])))
    assert(not cmatrix.is_psd(cmatrix.as_matrix([[1, 1], [0, 1]])))


def test_psd_sqrt_reconstructs(rng, random_matrix):
    for _ in range(PROPERTY_INSTANCES):
        g = random_matrix(rng, 3, 3)
        a = g @ np.conj(g).T
        root = cmatrix.psd_sqrt(a)
        assert(cmatrix.is_psd(root))
        assert(cmatrix.frobenius_distance(root @ root, a) < cmatrix.RECONSTRUCTION_TOL * max(1.0, np.linalg.norm(a)))


def test_psd_sqrt_clamps_rounding_noise():
    root = cmatrix.psd_sqrt(np.diag([4.0, -1e-12]))
    assert(np.allclose(root, np.diag([2.0, 0.0])))


def test_psd_sqrt_rejects_negative():
    with pytest.raises(NotPSD):
        cmatrix.psd_sqrt(np.diag([1.0, -1e-6]))
