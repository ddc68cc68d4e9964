"""Principal component baseline backed by a cyclic Jacobi eigensolver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ContractError, DimensionError


def jacobi_eigh(S: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius mass drops below ``tol``.
    Returns ``(values, vectors)`` sorted by decreasing value, vectors as columns.
    """
    A = np.array(S, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"jacobi_eigh needs a square matrix, got {A.shape}")
    V = np.eye(n)
    upper = np.triu_indices(n, 1)
    for sweep in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(A[upper] ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                g = 100.0 * abs(apq)
                # after a few sweeps an entry below roundoff of both diagonals is zeroed outright
                if sweep > 3 and abs(A[p, p]) + g == abs(A[p, p]) and abs(A[q, q]) + g == abs(A[q, q]):
                    A[p, q] = A[q, p] = 0.0
                    continue
                diff = A[q, q] - A[p, p]
                if abs(diff) + g == abs(diff):
                    t = apq / diff  # theta huge: t ~ 1 / (2 theta)
                else:
                    theta = diff / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- R^T A R on rows/cols p, q
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    return values[order], V[:, order]


@dataclass(frozen=True)
class PCAModel:
    mean: np.ndarray
    components: np.ndarray  # [n, k], orthonormal columns
    eigenvalues: np.ndarray  # all n, non-increasing

    @property
    def k(self) -> int:
        return self.components.shape[1]


def pca_fit(X, k: int) -> PCAModel:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ContractError("pca_fit needs a matrix with at least 2 rows")
    n = X.shape[1]
    if not 1 <= k <= n:
        raise ContractError(f"component count {k} must lie in [1, {n}]")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    values, vectors = jacobi_eigh(cov)
    comps = vectors[:, :k].copy()
    for j in range(k):
        if comps[np.argmax(np.abs(comps[:, j])), j] < 0:
            comps[:, j] *= -1
    return PCAModel(mean, comps, values)


def pca_project(model: PCAModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.mean.shape[0]:
        raise DimensionError(f"input width {X.shape[-1]} vs model width {model.mean.shape[0]}")
    return (X - model.mean) @ model.components


def pca_reconstruct(model: PCAModel, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape[-1] != model.k:
        raise DimensionError(f"code width {Z.shape[-1]} vs model k={model.k}")
    return Z @ model.components.T + model.mean
