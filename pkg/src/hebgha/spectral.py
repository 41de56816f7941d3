"""Spectral ground truth for GHA: sample autocorrelation, a cyclic Jacobi
eigensolver, and the alignment / ordering / reconstruction measurements used
to check a trained weight matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EmptyDatasetError, NumericFailure, ShapeError, UndefinedMetricError
from .rules import WeightMatrix

__all__ = [
    "Alignment",
    "AutocorrelationMatrix",
    "EigenBasis",
    "autocorrelation",
    "component_variances",
    "jacobi_eigendecompose",
    "orthonormality_defect",
    "reconstruction_error",
    "row_alignment",
]

MAX_SWEEPS = 100


@dataclass(frozen=True)
class AutocorrelationMatrix:
    q: np.ndarray

    @property
    def n(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class EigenBasis:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # row i is unit eigenvector i
    sweeps: int = 0

    def top(self, m: int) -> WeightMatrix:
        return WeightMatrix(self.eigenvectors[:m], oracle_mode=True)


class Alignment(np.ndarray):
    """Per-row |cos| values; ``degenerate`` flags rows that were all zero."""

    degenerate: np.ndarray

    def __array_finalize__(self, obj):
        self.degenerate = getattr(obj, "degenerate", None)


def _as_samples(inputs) -> np.ndarray:
    X = np.asarray(inputs, dtype=np.float64)
    if X.size == 0:
        raise EmptyDatasetError("no samples")
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D sample array, got shape {X.shape}")
    return X


def autocorrelation(inputs) -> AutocorrelationMatrix:
    """``(1/T) sum_t x(t) x(t)^T``, lower triangle computed then mirrored."""
    X = _as_samples(inputs)
    T, n = X.shape
    q = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            q[i, j] = math.fsum((X[:, i] * X[:, j]).tolist()) / T
            q[j, i] = q[i, j]
    return AutocorrelationMatrix(q)


def _sign_fix(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))  # first index on ties
    return -v if v[k] < 0 else v


def jacobi_eigendecompose(q) -> EigenBasis:
    """Cyclic Jacobi rotations on a symmetric matrix.

    Sweeps over the strict upper triangle in row order, annihilating each
    pivot with the rotation of Rutishauser's stable formulation, until the
    off-diagonal Frobenius mass drops below ``1e-12 * ||q||_F``.
    """
    if isinstance(q, AutocorrelationMatrix):
        q = q.q
    a = np.array(q, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise ShapeError("matrix is not symmetric")
    v = np.eye(n)
    scale = np.linalg.norm(a)
    tol = 1e-12 * scale

    offdiag = ~np.eye(n, dtype=bool)

    def off(m):
        return math.sqrt(float(np.sum(m[offdiag] ** 2)))

    sweeps = 0
    while off(a) >= tol and scale > 0:
        if sweeps == MAX_SWEEPS:
            raise NumericFailure(f"Jacobi did not converge in {MAX_SWEEPS} sweeps")
        sweeps += 1
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if apr == 0.0:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # theta**2 would overflow
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                ar = a[:, r].copy()
                a[:, p] = c * ap - s * ar
                a[:, r] = s * ap + c * ar
                ap = a[p, :].copy()
                ar = a[r, :].copy()
                a[p, :] = c * ap - s * ar
                a[r, :] = s * ap + c * ar
                a[p, r] = a[r, p] = 0.0
                vp = v[:, p].copy()
                vr = v[:, r].copy()
                v[:, p] = c * vp - s * vr
                v[:, r] = s * vp + c * vr
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    vecs = np.array([_sign_fix(v[:, k]) for k in order]).reshape(n, n)
    return EigenBasis(w[order], vecs, sweeps)


def row_alignment(cw: WeightMatrix, basis: EigenBasis) -> Alignment:
    c = cw.c
    vecs = basis.eigenvectors
    if c.shape[1] != vecs.shape[1]:
        raise ShapeError(f"weights have N={c.shape[1]}, basis has N={vecs.shape[1]}")
    if c.shape[0] > vecs.shape[0]:
        raise ShapeError("more weight rows than eigenvectors")
    out = np.zeros(c.shape[0])
    degenerate = np.zeros(c.shape[0], dtype=bool)
    for i, row in enumerate(c):
        nc = np.linalg.norm(row)
        if nc == 0.0:
            degenerate[i] = True
            continue
        out[i] = min(abs(float(row @ vecs[i])) / (nc * np.linalg.norm(vecs[i])), 1.0)
    res = out.view(Alignment)
    res.degenerate = degenerate
    return res


def reconstruction_error(cw: WeightMatrix, inputs) -> float:
    """Mean normalized reconstruction error ``||x - C^T C x||^2 / ||x||^2`` in percent.

    This is the package's "error rate". Zero-norm samples are skipped.
    """
    return _linear_code_error(cw.c, inputs)


def _linear_code_error(w: np.ndarray, inputs) -> float:
    X = _as_samples(inputs)
    if X.shape[1] != w.shape[1]:
        raise ShapeError(f"inputs have {X.shape[1]} features, code expects {w.shape[1]}")
    norms = np.einsum("ij,ij->i", X, X)
    keep = norms > 0
    if not keep.any():
        raise UndefinedMetricError("every sample has zero norm")
    X = X[keep]
    resid = X - (X @ w.T) @ w
    return 100.0 * float(np.mean(np.einsum("ij,ij->i", resid, resid) / norms[keep]))


def component_variances(cw: WeightMatrix, inputs) -> np.ndarray:
    """Mean squared projection on each row (mean not removed)."""
    X = _as_samples(inputs)
    if X.shape[1] != cw.n_inputs:
        raise ShapeError(f"inputs have {X.shape[1]} features, weights expect {cw.n_inputs}")
    Y = X @ cw.c.T
    return np.mean(Y * Y, axis=0)


def orthonormality_defect(cw: WeightMatrix) -> float:
    """``||C C^T - I||_F``."""
    c = cw.c
    return float(np.linalg.norm(c @ c.T - np.eye(c.shape[0])))
