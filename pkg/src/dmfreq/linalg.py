"""Dense linear-algebra kernels used by the DMD pipeline.

LAPACK (through numpy) does the factorizations; this module pins the
contracts the rest of the package relies on: truncation, ordering,
unit-norm eigenvectors and a rank-guarded pseudoinverse.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_RCOND = 1e-12


class ConvergenceError(ArithmeticError):
    """An iterative factorization failed to converge."""


@dataclass(frozen=True)
class ThinSvd:
    """Top-k singular triplets ``a ~ u @ diag(sigma) @ v.conj().T``."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def k(self) -> int:
        return self.sigma.shape[0]

    def truncate(self, k: int) -> "ThinSvd":
        if not 0 <= k <= self.k:
            raise ValueError(f"k={k} outside [0, {self.k}]")
        return ThinSvd(self.u[:, :k], self.sigma[:k], self.v[:, :k])

    def rank(self, rcond: float = DEFAULT_RCOND) -> int:
        """Number of singular values above ``rcond * sigma_max``."""
        if self.k == 0 or self.sigma[0] == 0.0:
            return 0
        return int(np.count_nonzero(self.sigma > rcond * self.sigma[0]))

    def matrix(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.conj().T


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray

    def residuals(self, a: np.ndarray) -> np.ndarray:
        """Per-pair ``||a w - lambda w||_2``."""
        return np.linalg.norm(a @ self.vectors - self.vectors * self.values, axis=0)


def _check_matrix(a, name: str = "a") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    if not np.iscomplexobj(a):
        a = a.astype(np.float64, copy=False)
    return a


def thin_svd(a, k: int | None = None) -> ThinSvd:
    """Thin SVD of ``a`` keeping the ``k`` largest singular triplets.

    ``k=None`` keeps all ``min(rows, cols)`` of them. Real input yields
    real factors.
    """
    a = _check_matrix(a)
    kmax = min(a.shape)
    if k is None:
        k = kmax
    if not 1 <= k <= kmax:
        raise ValueError(f"k={k} outside [1, {kmax}] for shape {a.shape}")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    return ThinSvd(u[:, :k], s[:k], vh[:k].conj().T)


def eig_dense(a) -> EigenPairs:
    """All eigenpairs of a square matrix; eigenvectors have unit 2-norm."""
    a = _check_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"eig_dense needs a square matrix, got {a.shape}")
    if a.shape[0] == 0:
        return EigenPairs(np.zeros(0, complex), np.zeros((0, 0), complex))
    try:
        values, vectors = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigendecomposition did not converge: {exc}") from exc
    values = values.astype(complex, copy=False)
    vectors = vectors.astype(complex, copy=False)
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    return EigenPairs(values, vectors)


def pinv_from_svd(s: ThinSvd, rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """Moore-Penrose pseudoinverse ``V diag(1/sigma) U*`` from a thin SVD.

    Singular values at or below ``rcond * sigma_max`` are treated as zero.
    """
    if not 0.0 <= rcond < 1.0:
        raise ValueError(f"rcond must lie in [0, 1), got {rcond}")
    r = s.rank(rcond)
    inv = np.zeros_like(s.sigma)
    inv[:r] = 1.0 / s.sigma[:r]
    return (s.v * inv) @ s.u.conj().T
