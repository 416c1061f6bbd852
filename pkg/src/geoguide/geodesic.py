"""Grassmann geodesics between subspaces and the induced guidance metric.

Given two k-dimensional subspaces of R^D with bases P and P', the shortest
path on the Grassmann manifold is parameterized in closed form by the
principal angles between them. The path at position nu in [0, 1] is

    Pi(nu) = P @ U1 @ diag(cos(theta * nu)) - R @ U2 @ diag(sin(theta * nu))

where R is an orthonormal complement of P and U1, U2, theta come from a
generalized SVD of the pair (P.T @ P', R.T @ P') sharing one right factor V.
Integrating Pi(nu) @ Pi(nu).T over nu in [0, 1] has an analytic
antiderivative per angle, yielding a D x D positive semi-definite metric
used to score feature pairs by a subspace-aware cosine.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DegenerateProjectionError,
    DimensionMismatchError,
    FullSpaceError,
    OutOfRangeError,
)
from .linalg import SubspaceBasis, extract_subspace, orthonormal_complement, svd
from .validation import check_vector, readonly

# Below this norm a value counts as annihilated by the metric.
ANNIHILATION_EPS = 1e-12

# Angles below this switch the metric coefficients to their series forms.
_SMALL_ANGLE = 1e-3


def principal_angles(p: SubspaceBasis, q: SubspaceBasis) -> np.ndarray:
    """Principal angles between two subspaces, ascending, in [0, pi/2].

    The cosines are the singular values of the cross-Gram matrix
    ``p.basis.T @ q.basis``, clamped into [-1, 1] to absorb round-off.
    """
    if p.ambient_dim != q.ambient_dim:
        raise DimensionMismatchError(
            f"ambient dims differ: {p.ambient_dim} vs {q.ambient_dim}"
        )
    gram = p.basis.T @ q.basis
    cosines = np.linalg.svd(gram, compute_uv=False)
    return np.arccos(np.clip(cosines, -1.0, 1.0))


class GeodesicFlow:
    """Factorization of the geodesic between two equal-dimension subspaces.

    Attributes
    ----------
    p_t, p_next : SubspaceBasis
        The endpoint subspaces (``p_next`` retained for diagnostics).
    complement_r : SubspaceBasis
        Orthonormal complement of ``p_t``.
    u1 : (k, k) ndarray, u2 : (D-k, k) ndarray, v : (k, k) ndarray
        Shared-V factors: ``p_t.T @ p_next = u1 @ diag(cos theta) @ v.T`` and
        ``complement_r.T @ p_next = -u2 @ diag(sin theta) @ v.T``.
    angles : (k,) ndarray
        Principal angles, ascending.
    """

    def __init__(self, p_t, p_next, complement_r, u1, u2, v, angles):
        self.p_t = p_t
        self.p_next = p_next
        self.complement_r = complement_r
        self.u1 = readonly(u1)
        self.u2 = readonly(u2)
        self.v = readonly(v)
        self.angles = readonly(angles)
        # Cached D x k factors used by every path/metric evaluation.
        self._left = readonly(p_t.basis @ self.u1)
        self._right = readonly(complement_r.basis @ self.u2)

    @property
    def ambient_dim(self) -> int:
        return self.p_t.ambient_dim

    @property
    def sub_dim(self) -> int:
        return self.p_t.sub_dim

    def construction_residuals(self) -> tuple[float, float]:
        """Frobenius residuals of the two shared-V factorizations."""
        gamma = np.cos(self.angles)
        sigma = np.sin(self.angles)
        r1 = self.p_t.basis.T @ self.p_next.basis - (self.u1 * gamma) @ self.v.T
        r2 = self.complement_r.basis.T @ self.p_next.basis + (self.u2 * sigma) @ self.v.T
        return float(np.linalg.norm(r1)), float(np.linalg.norm(r2))


def _orthonormalize_columns(raw: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Normalize ``raw`` columns in the given order, re-orthogonalizing each
    against the already-fixed ones; near-zero columns are completed from the
    standard basis while room remains (deterministic)."""
    rows, cols = raw.shape
    out = np.zeros_like(raw)
    fixed: list[int] = []
    deferred: list[int] = []
    for i in order:
        col = raw[:, i].copy()
        for _ in range(2):  # twice-is-enough re-orthogonalization
            for j in fixed:
                col -= out[:, j] * (out[:, j] @ col)
        nrm = np.linalg.norm(col)
        if nrm > ANNIHILATION_EPS:
            out[:, i] = col / nrm
            fixed.append(i)
        else:
            deferred.append(i)
    for i in sorted(deferred):
        if len(fixed) >= rows:
            break  # no orthonormal room left; the column stays zero
        for j in range(rows):
            col = np.zeros(rows)
            col[j] = 1.0
            for _ in range(2):
                for fj in fixed:
                    col -= out[:, fj] * (out[:, fj] @ col)
            nrm = np.linalg.norm(col)
            if nrm > 0.5:
                out[:, i] = col / nrm
                fixed.append(i)
                break
    return out


def geodesic_flow(p_t: SubspaceBasis, p_next: SubspaceBasis) -> GeodesicFlow:
    """Construct the geodesic between two k-dimensional subspaces of R^D.

    Both factorizations are recovered from one SVD of the cross-Gram matrix
    so they share the same right factor V. For angles with vanishing sine the
    matching columns of ``u2`` never influence the path; they are filled by a
    deterministic orthonormal completion so ``u2`` stays column-orthonormal
    whenever D - k >= k.
    """
    if p_t.ambient_dim != p_next.ambient_dim:
        raise DimensionMismatchError(
            f"ambient dims differ: {p_t.ambient_dim} vs {p_next.ambient_dim}"
        )
    if p_t.sub_dim != p_next.sub_dim:
        raise DimensionMismatchError(
            f"subspace dims differ: {p_t.sub_dim} vs {p_next.sub_dim}; "
            "truncate to a common rank first (see match_dims)"
        )
    d, k = p_t.ambient_dim, p_t.sub_dim
    if k >= d:
        raise FullSpaceError(f"flow undefined for k = D = {d}: no complement")

    u1, cosines, vt = svd(p_t.basis.T @ p_next.basis)
    v = vt.T

    complement_r = orthonormal_complement(p_t)
    # Want R.T @ p_next = -u2 @ diag(sin) @ v.T, so u2 * sin = -(R.T @ p_next) @ v.
    scaled = -(complement_r.basis.T @ p_next.basis) @ v
    # arccos of a cosine is ill-conditioned near zero angles (round-off in the
    # Gram inflates into ~1e-8 phantom angles); recover each angle from its
    # sine (the column norm above) and cosine jointly instead.
    sines = np.linalg.norm(scaled, axis=0)
    angles = np.arctan2(sines, np.clip(cosines, 0.0, None))

    order = np.argsort(angles, kind="stable")
    angles = angles[order]
    u1 = u1[:, order]
    v = v[:, order]
    scaled = scaled[:, order]
    u2 = _orthonormalize_columns(scaled, np.argsort(-angles, kind="stable"))
    return GeodesicFlow(p_t, p_next, complement_r, u1, u2, v, angles)


def evaluate_flow(flow: GeodesicFlow, nu: float) -> SubspaceBasis:
    """Basis of the intermediate subspace Pi(nu) for nu in [0, 1]."""
    if not 0.0 <= nu <= 1.0:
        raise OutOfRangeError(f"nu must lie in [0, 1], got {nu}")
    gamma = np.cos(flow.angles * nu)
    sigma = np.sin(flow.angles * nu)
    return SubspaceBasis(flow._left * gamma - flow._right * sigma)


class GuidanceMetric:
    """D x D positive semi-definite metric from integrating the geodesic.

    Scores pairs of ambient vectors by the cosine of their images under the
    metric; the smallest eigenvalue is computed lazily as a diagnostic.
    """

    def __init__(self, q: np.ndarray, source_dim: int, target_dim: int):
        q = np.asarray(q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DimensionMismatchError(f"metric must be square, got {q.shape}")
        self.q = readonly((q + q.T) / 2.0)
        self.source_dim = int(source_dim)
        self.target_dim = int(target_dim)
        self._eigen_floor: float | None = None

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    @property
    def eigen_floor(self) -> float:
        if self._eigen_floor is None:
            self._eigen_floor = float(np.linalg.eigvalsh(self.q)[0])
        return self._eigen_floor


def _metric_coefficients(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-angle antiderivatives of cos^2, -cos*sin, sin^2 over nu in [0, 1].

    c1 = 1/2 + sin(2t)/(4t), c2 = -sin(t)^2 / (2t), c3 = 1/2 - sin(2t)/(4t),
    with series below _SMALL_ANGLE where the direct forms lose precision
    (the t -> 0 limits are 1, 0, 0).
    """
    t = np.asarray(theta, dtype=np.float64)
    small = t < _SMALL_ANGLE
    safe = np.where(small, 1.0, t)
    ratio = np.sin(2.0 * safe) / (4.0 * safe)
    t2 = t * t
    c1 = np.where(small, 1.0 - t2 / 3.0 + t2 * t2 / 15.0, 0.5 + ratio)
    c3 = np.where(small, t2 / 3.0 - t2 * t2 / 15.0, 0.5 - ratio)
    c2 = np.where(
        small,
        -(t / 2.0 - t * t2 / 6.0),
        -(np.sin(safe) ** 2) / (2.0 * safe),
    )
    return c1, c2, c3


def q_matrix(flow: GeodesicFlow) -> GuidanceMetric:
    """Closed-form integral of Pi(nu) @ Pi(nu).T over nu in [0, 1]."""
    c1, c2, c3 = _metric_coefficients(flow.angles)
    a, b = flow._left, flow._right
    q = (a * c1) @ a.T + (a * c2) @ b.T + (b * c2) @ a.T + (b * c3) @ b.T
    return GuidanceMetric(q, flow.sub_dim, flow.p_next.sub_dim)


def geodesic_cosine(metric: GuidanceMetric, z_a, z_b) -> float:
    """Cosine of two ambient vectors under the guidance metric.

    Computes ``z_a.T Q z_b / sqrt(z_a.T Q z_a) / sqrt(z_b.T Q z_b)``; no
    explicit matrix square root is formed. Raises when either vector is
    numerically annihilated by the metric (it lies outside both subspaces).
    """
    za = check_vector(z_a, metric.dim, "z_a")
    zb = check_vector(z_b, metric.dim, "z_b")
    qa = metric.q @ za
    qb = metric.q @ zb
    quad_a = float(za @ qa)
    quad_b = float(zb @ qb)
    if quad_a <= ANNIHILATION_EPS:
        raise DegenerateProjectionError(
            f"z_a is annihilated by the metric (z.T Q z = {quad_a:.3e})"
        )
    if quad_b <= ANNIHILATION_EPS:
        raise DegenerateProjectionError(
            f"z_b is annihilated by the metric (z.T Q z = {quad_b:.3e})"
        )
    return float((za @ qb) / np.sqrt(quad_a * quad_b))


def geodesic_loss(metric: GuidanceMetric, z_a, z_b) -> float:
    """1 minus the metric cosine; zero when the vectors agree under Q."""
    return 1.0 - geodesic_cosine(metric, z_a, z_b)


def match_dims(a: SubspaceBasis, b: SubspaceBasis) -> tuple[SubspaceBasis, SubspaceBasis]:
    """Truncate the thicker of two bases to the thinner one's dimension.

    Bases from rank-deficient extraction keep their dominant directions
    first, so truncation keeps the best-supported ones.
    """
    k = min(a.sub_dim, b.sub_dim)
    return a.truncate(k), b.truncate(k)


def metric_between(p_t: SubspaceBasis, p_next: SubspaceBasis) -> GuidanceMetric:
    """Guidance metric between two subspaces, reconciling unequal ranks.

    When both subspaces fill the ambient space the Grassmannian is a single
    point and the metric is exactly the identity; the flow construction
    itself rejects that case, so it is special-cased here.
    """
    p_t, p_next = match_dims(p_t, p_next)
    if p_t.sub_dim == p_t.ambient_dim:
        d = p_t.ambient_dim
        return GuidanceMetric(np.eye(d), d, d)
    return q_matrix(geodesic_flow(p_t, p_next))


def metric_between_batches(
    feats_a, feats_b, target_dim: int
) -> tuple[GuidanceMetric, int]:
    """Extract subspaces from two feature batches and build their metric.

    Returns the metric and the effective common subspace dimension after
    rank capping (which may be below ``target_dim``).
    """
    p_a = extract_subspace(feats_a, target_dim)
    p_b = extract_subspace(feats_b, target_dim)
    p_a, p_b = match_dims(p_a, p_b)
    return metric_between(p_a, p_b), p_a.sub_dim
