import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hebgha.core import (
    EmptyDatasetError,
    NumericFailure,
    ShapeError,
    UndefinedMetricError,
)
from hebgha.rules import WeightMatrix
from hebgha.spectral import (
    AutocorrelationMatrix,
    autocorrelation,
    component_variances,
    jacobi_eigendecompose,
    orthonormality_defect,
    reconstruction_error,
    row_alignment,
)


@pytest.mark.parametrize(
    "samples,expected",
    [
        ([[1, 0]], [[1, 0], [0, 0]]),
        ([[1, 0], [0, 1]], [[0.5, 0], [0, 0.5]]),
        ([[1, 1], [1, -1]], [[1, 0], [0, 1]]),
    ],
)
def test_autocorrelation_examples(samples, expected):
    assert autocorrelation(samples).q.tolist() == expected


def test_autocorrelation_symmetric_and_empty():
    X = np.random.default_rng(0).normal(size=(40, 6))
    q = autocorrelation(X).q
    assert np.array_equal(q, q.T)
    np.testing.assert_allclose(q, X.T @ X / 40, atol=1e-13)
    with pytest.raises(EmptyDatasetError):
        autocorrelation(np.zeros((0, 3)))


def test_jacobi_diagonal():
    b = jacobi_eigendecompose(np.diag([5.0, 2.0, 1.0]))
    assert b.eigenvalues.tolist() == [5, 2, 1]
    assert np.array_equal(b.eigenvectors, np.eye(3))
    # unsorted diagonal comes back sorted
    b = jacobi_eigendecompose(np.diag([1.0, 5.0, 2.0]))
    assert b.eigenvalues.tolist() == [5, 2, 1]
    assert np.array_equal(b.eigenvectors, np.eye(3)[[1, 2, 0]])


def test_jacobi_two_by_two():
    b = jacobi_eigendecompose(AutocorrelationMatrix(np.array([[2.0, 1.0], [1.0, 2.0]])))
    np.testing.assert_allclose(b.eigenvalues, [3, 1], atol=1e-14)
    s = 1 / np.sqrt(2)
    v0, v1 = b.eigenvectors
    np.testing.assert_allclose(v0, [s, s], atol=1e-14)
    # sign rule: largest-magnitude entry positive, first index on ties
    np.testing.assert_allclose(v1, [s, -s], atol=1e-14)


def test_jacobi_reconstructs_matrix():
    a = np.random.default_rng(3).normal(size=(7, 7))
    q = a + a.T
    b = jacobi_eigendecompose(q)
    v = b.eigenvectors
    np.testing.assert_allclose(v.T @ np.diag(b.eigenvalues) @ v, q, atol=1e-10)
    np.testing.assert_allclose(v @ v.T, np.eye(7), atol=1e-12)


def test_jacobi_rejects_non_symmetric_and_non_square():
    with pytest.raises(ShapeError):
        jacobi_eigendecompose([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ShapeError):
        jacobi_eigendecompose(np.zeros((2, 3)))


def test_jacobi_zero_matrix():
    b = jacobi_eigendecompose(np.zeros((3, 3)))
    assert b.eigenvalues.tolist() == [0, 0, 0] and b.sweeps == 0


def test_numeric_failure_is_arithmetic_error():
    assert issubclass(NumericFailure, ArithmeticError)


@settings(max_examples=500, deadline=None)
@given(n=st.integers(1, 16), seed=st.integers(0, 2**32 - 1), scale=st.sampled_from([1e-3, 1.0, 1e3]))
def test_jacobi_eigenpairs(n, seed, scale):
    a = np.random.default_rng(seed).normal(size=(n, n)) * scale
    q = a + a.T
    b = jacobi_eigendecompose(q)
    assert np.all(np.diff(b.eigenvalues) <= 0)
    tol = 1e-9 * max(1.0, np.linalg.norm(q))
    for lam, v in zip(b.eigenvalues, b.eigenvectors):
        assert np.linalg.norm(q @ v - lam * v) <= tol
        assert v[np.argmax(np.abs(v))] > 0
    np.testing.assert_allclose(b.eigenvalues, np.linalg.eigvalsh(q)[::-1], atol=tol)


def test_row_alignment_examples():
    b = jacobi_eigendecompose(np.diag([4.0, 3.0, 2.0, 1.0]))
    top = b.top(2)
    np.testing.assert_allclose(row_alignment(top, b), [1, 1])
    neg = WeightMatrix(-top.c)
    np.testing.assert_allclose(row_alignment(neg, b), [1, 1])
    ortho = WeightMatrix(np.array([[0.0, 1.0, 0.0, 0.0]]))
    assert row_alignment(ortho, b).tolist() == [0.0]


def test_row_alignment_degenerate_row():
    b = jacobi_eigendecompose(np.diag([3.0, 2.0, 1.0]))
    al = row_alignment(WeightMatrix(np.array([[1.0, 0, 0], [0, 0, 0]])), b)
    assert al.tolist() == [1.0, 0.0]
    assert al.degenerate.tolist() == [False, True]


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6), flip=st.lists(st.booleans(), min_size=3, max_size=3))
def test_row_alignment_sign_invariant(seed, flip):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(5, 5))
    b = jacobi_eigendecompose(a + a.T)
    c = WeightMatrix(rng.normal(size=(3, 5)))
    signs = np.where(flip, -1.0, 1.0)[:, None]
    base = row_alignment(c, b)
    np.testing.assert_allclose(row_alignment(WeightMatrix(c.c * signs), b), base, atol=1e-15)
    flipped = type(b)(b.eigenvalues, b.eigenvectors * np.r_[signs[:, 0], 1, 1][:, None])
    np.testing.assert_allclose(row_alignment(c, flipped), base, atol=1e-15)


def test_reconstruction_error_examples():
    X = np.random.default_rng(1).normal(size=(50, 4))
    q, _ = np.linalg.qr(np.random.default_rng(2).normal(size=(4, 4)))
    assert reconstruction_error(WeightMatrix(q, oracle_mode=True), X) == pytest.approx(0.0, abs=1e-10)
    assert reconstruction_error(WeightMatrix(np.zeros((2, 4))), X) == 100.0
    with pytest.raises(UndefinedMetricError):
        reconstruction_error(WeightMatrix(np.zeros((2, 4))), np.zeros((3, 4)))


def test_reconstruction_error_oracle_matches_tail_energy(planted_data):
    X = planted_data.x
    b = jacobi_eigendecompose(autocorrelation(X))
    w = b.top(3).c
    resid = X - X @ w.T @ w
    # residual energy equals the discarded eigenvalue mass
    energy = np.mean(np.sum(resid * resid, axis=1))
    assert energy == pytest.approx(b.eigenvalues[3:].sum(), rel=1e-9)
    per_sample = np.sum(resid * resid, axis=1) / np.sum(X * X, axis=1)
    assert reconstruction_error(b.top(3), X) == pytest.approx(100 * per_sample.mean(), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6), m=st.integers(1, 4))
def test_pca_optimality(seed, m):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 5)) * np.array([3.0, 2.0, 1.5, 1.0, 0.5])
    b = jacobi_eigendecompose(autocorrelation(X))
    q, _ = np.linalg.qr(rng.normal(size=(5, m)))
    other = WeightMatrix(q.T)
    # the eigen-projection minimises mean squared residual; the normalised
    # error weights samples by 1/||x||^2, so compare the unnormalised MSE
    def mse(w):
        r = X - X @ w.T @ w
        return np.mean(np.sum(r * r, axis=1))

    assert mse(other.c) >= mse(b.top(m).c) - 1e-9


def test_component_variances(planted_data):
    X = planted_data.x
    b = jacobi_eigendecompose(autocorrelation(X))
    np.testing.assert_allclose(component_variances(b.top(3), X), b.eigenvalues[:3], rtol=1e-9)
    assert component_variances(WeightMatrix(np.zeros((2, 8))), X).tolist() == [0, 0]
    small = X[:100]
    np.testing.assert_allclose(
        component_variances(b.top(3), np.vstack([small, small])),
        component_variances(b.top(3), small),
        rtol=1e-12,
    )


def test_orthonormality_defect():
    assert orthonormality_defect(WeightMatrix(np.eye(3)[:2])) == 0.0
    assert orthonormality_defect(WeightMatrix(2 * np.eye(3)[:1])) == 3.0
