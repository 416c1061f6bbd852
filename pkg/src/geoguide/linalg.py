"""Dense matrix kernel: SVD with a fixed sign convention, orthonormal
complements, and uncentered-PCA subspace extraction.

All functions are pure; returned arrays are read-only so results can be
shared across threads. The decomposition itself is delegated to LAPACK via
``numpy.linalg``, wrapped to make column signs deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    FullSpaceError,
    NonConvergenceError,
    ZeroMatrixError,
)
from .validation import check_matrix, readonly

# Relative cutoff below which a singular value counts as numerically zero.
RANK_RTOL = 1e-10


class SvdResult(NamedTuple):
    """Thin SVD ``a = u @ diag(s) @ vt`` with deterministic column signs."""

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


@dataclass(frozen=True)
class SubspaceBasis:
    """A k-dimensional subspace of R^D held as a D x k column-orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        b = check_matrix(self.basis, "basis")
        d, k = b.shape
        if k > d:
            raise ValueError(f"basis has more columns ({k}) than rows ({d})")
        gram_defect = np.linalg.norm(b.T @ b - np.eye(k))
        if gram_defect > 1e-10:
            raise ValueError(
                f"basis columns are not orthonormal (defect {gram_defect:.2e})"
            )
        object.__setattr__(self, "basis", readonly(b))

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def sub_dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        """Orthogonal projector B @ B.T onto the subspace."""
        return self.basis @ self.basis.T

    def truncate(self, k: int) -> "SubspaceBasis":
        """Keep the first ``k`` (dominant) basis directions."""
        if not 1 <= k <= self.sub_dim:
            raise ValueError(f"cannot truncate {self.sub_dim}-dim basis to {k}")
        if k == self.sub_dim:
            return self
        return SubspaceBasis(self.basis[:, :k])


def svd(a) -> SvdResult:
    """Thin SVD with singular values descending and deterministic signs.

    The sign of each left singular vector is fixed so its largest-magnitude
    entry is positive (ties resolved by lowest index); the matching row of
    ``vt`` is flipped along with it, keeping the product unchanged.
    """
    m = check_matrix(a, "a")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError("svd requires at least one row and one column")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NonConvergenceError(f"SVD kernel did not converge: {exc}") from exc
    flip = np.sign(u[np.argmax(np.abs(u), axis=0), np.arange(u.shape[1])])
    flip[flip == 0] = 1.0
    u = u * flip
    vt = vt * flip[:, None]
    return SvdResult(readonly(u), readonly(s), readonly(vt))


def orthonormal_complement(b: SubspaceBasis) -> SubspaceBasis:
    """Basis of the orthogonal complement, so [b | result] is D x D orthogonal."""
    d, k = b.ambient_dim, b.sub_dim
    if k >= d:
        raise FullSpaceError(
            f"subspace of dimension {k} fills R^{d}; no complement exists"
        )
    # Left singular vectors beyond the first k span the complement exactly.
    u_full, _, _ = np.linalg.svd(b.basis, full_matrices=True)
    comp = u_full[:, k:]
    # Deterministic signs, matching the svd() convention.
    flip = np.sign(comp[np.argmax(np.abs(comp), axis=0), np.arange(comp.shape[1])])
    flip[flip == 0] = 1.0
    return SubspaceBasis(comp * flip)


def extract_subspace(features, target_dim: int) -> SubspaceBasis:
    """Top singular directions of an uncentered N x D feature batch.

    Returns the dominant ``min(target_dim, numeric rank)`` right singular
    directions; the result can therefore be thinner than requested when the
    batch is rank deficient. No mean-centering is applied: all downstream
    quantities are directional statistics through the origin.
    """
    f = check_matrix(features, "features")
    n, d = f.shape
    if n < 1:
        raise ZeroMatrixError("feature batch has no rows")
    if not 1 <= target_dim <= d:
        raise ValueError(f"target_dim must be in [1, {d}], got {target_dim}")
    res = svd(f)
    if res.s[0] <= 0.0 or not np.isfinite(res.s[0]):
        raise ZeroMatrixError("feature batch is numerically zero")
    rank = int(np.sum(res.s > RANK_RTOL * res.s[0]))
    keep = min(target_dim, rank)
    return SubspaceBasis(res.vt[:keep].T)


def projector_distance(a: SubspaceBasis, b: SubspaceBasis) -> float:
    """Frobenius distance between the orthogonal projectors of two subspaces."""
    return float(np.linalg.norm(a.projector() - b.projector()))
