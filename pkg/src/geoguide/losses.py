"""Guidance losses with closed-form gradients.

The family: directional cosine loss between an image-feature direction and a
text-feature direction; squared spherical (arc) distance; the two
metric-weighted losses scoring directions or consecutive features inside an
intermediate subspace; and their weighted total.

Gradients are derived by hand (chain rule through L2 normalization and the
bilinear metric form) rather than via an autodiff framework; the
finite-difference harness in :func:`check_gradient` is the correctness
authority. Guidance metrics are treated as constants: no gradient flows
through the subspace construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjectionError, ZeroVectorError
from .geodesic import ANNIHILATION_EPS, GuidanceMetric
from .validation import check_vector, readonly

_NORM_EPS = 1e-12


def _normalize(raw: np.ndarray, what: str) -> tuple[np.ndarray, float]:
    nrm = float(np.linalg.norm(raw))
    if nrm < _NORM_EPS:
        raise ZeroVectorError(f"{what} has near-zero norm ({nrm:.3e})")
    return raw / nrm, nrm


@dataclass(frozen=True)
class DirectionPair:
    """Unit image-feature direction and unit text-feature direction."""

    delta_image: np.ndarray
    delta_text: np.ndarray

    def __post_init__(self):
        di = check_vector(self.delta_image, name="delta_image")
        dt = check_vector(self.delta_text, di.shape[0], name="delta_text")
        for name, v in (("delta_image", di), ("delta_text", dt)):
            if abs(np.linalg.norm(v) - 1.0) > 1e-10:
                raise ValueError(f"{name} must be unit length")
        object.__setattr__(self, "delta_image", readonly(di))
        object.__setattr__(self, "delta_text", readonly(dt))

    @classmethod
    def from_raw(cls, raw_image_delta, raw_text_delta) -> "DirectionPair":
        di, _ = _normalize(check_vector(raw_image_delta, name="image delta"), "image delta")
        dt, _ = _normalize(check_vector(raw_text_delta, name="text delta"), "text delta")
        return cls(di, dt)


def directional_loss(pair: DirectionPair) -> tuple[float, np.ndarray]:
    """1 - cos between the two directions; gradient w.r.t. ``delta_image``.

    The gradient treats the stored unit vector as free and projects through
    the normalization Jacobian, i.e. it is tangent to the unit sphere.
    """
    a, b = pair.delta_image, pair.delta_text
    cos = float(a @ b)
    return 1.0 - cos, cos * a - b


def spherical_sq_loss(pair: DirectionPair, mode: str = "canonical") -> tuple[float, np.ndarray]:
    """Squared arc distance between the directions, with gradient.

    ``canonical`` returns arccos(cos)^2 (non-negative, zero when aligned).
    ``flipped`` returns 1 - arccos(cos)^2, a sign-flipped variant kept as an
    opt-in for comparison experiments; it is unbounded below and decreases
    toward anti-alignment.

    The gradient factor 2*theta/sin(theta) has a removable singularity at
    alignment (limit 2) and a genuine one at antipodal directions, where the
    sine is clamped to keep the value finite.
    """
    if mode not in ("canonical", "flipped"):
        raise ValueError(f"unknown mode {mode!r}")
    a, b = pair.delta_image, pair.delta_text
    cos = float(np.clip(a @ b, -1.0, 1.0))
    theta = float(np.arccos(cos))
    sin = float(np.sin(theta))
    factor = 2.0 if theta < 1e-8 else 2.0 * theta / max(sin, _NORM_EPS)
    tangent = b - cos * a
    if mode == "canonical":
        return theta * theta, -factor * tangent
    return 1.0 - theta * theta, factor * tangent


def _metric_cosine_grad(
    metric: GuidanceMetric, u: np.ndarray, v: np.ndarray
) -> tuple[float, np.ndarray]:
    """Metric cosine of unit vectors (u, v) and its free gradient w.r.t. u."""
    qu = metric.q @ u
    qv = metric.q @ v
    pu = float(u @ qu)
    pv = float(v @ qv)
    if pu <= ANNIHILATION_EPS:
        raise DegenerateProjectionError(
            f"first argument is annihilated by the metric (u.T Q u = {pu:.3e})"
        )
    if pv <= ANNIHILATION_EPS:
        raise DegenerateProjectionError(
            f"second argument is annihilated by the metric (v.T Q v = {pv:.3e})"
        )
    r = float(np.sqrt(pu * pv))
    cross = float(u @ qv)
    cos = cross / r
    grad_u = qv / r - (cross / (pu * r)) * qu
    return cos, grad_u


def imc_loss(
    metric: GuidanceMetric, z_image_i, z_image_src, z_text_trg, z_text_src
) -> tuple[float, np.ndarray]:
    """Consistency loss between the image and text directions under the metric.

    Forms the normalized differences, scores them by the metric cosine, and
    returns the gradient with respect to the current image feature
    ``z_image_i`` (chained through the difference and its normalization).
    """
    d = metric.dim
    zi = check_vector(z_image_i, d, "z_image_i")
    zs = check_vector(z_image_src, d, "z_image_src")
    tt = check_vector(z_text_trg, d, "z_text_trg")
    ts = check_vector(z_text_src, d, "z_text_src")
    u, image_norm = _normalize(zi - zs, "image direction")
    v, _ = _normalize(tt - ts, "text direction")
    cos, grad_u = _metric_cosine_grad(metric, u, v)
    grad = -(grad_u - u * (u @ grad_u)) / image_norm
    return 1.0 - cos, grad


def imr_loss(metric: GuidanceMetric, z_prev, z_curr) -> tuple[float, np.ndarray]:
    """Regularization loss between consecutive image features under the metric.

    Each feature is normalized individually; gradient is with respect to the
    raw current feature ``z_curr``.
    """
    d = metric.dim
    zp = check_vector(z_prev, d, "z_prev")
    zc = check_vector(z_curr, d, "z_curr")
    p_hat, _ = _normalize(zp, "previous feature")
    c_hat, curr_norm = _normalize(zc, "current feature")
    cos, grad_c = _metric_cosine_grad(metric, c_hat, p_hat)
    grad = -(grad_c - c_hat * (c_hat @ grad_c)) / curr_norm
    return 1.0 - cos, grad


@dataclass(frozen=True)
class LossReport:
    """Weighted decomposition of one optimization step's loss."""

    total: float
    inter_term: float
    intra_term: float
    perceptual_term: float
    lambda1: float
    lambda2: float


def total_loss(
    inter: tuple[float, np.ndarray],
    intra: tuple[float, np.ndarray],
    perceptual: tuple[float, np.ndarray],
    lambda1: float = 1.0,
    lambda2: float = 0.3,
) -> tuple[LossReport, np.ndarray]:
    """Combine the three (value, gradient) pairs with the stated weights."""
    inter_v, inter_g = inter
    intra_v, intra_g = intra
    perc_v, perc_g = perceptual
    total = inter_v + lambda1 * intra_v + lambda2 * perc_v
    grad = np.asarray(inter_g, dtype=np.float64) + lambda1 * np.asarray(intra_g) + lambda2 * np.asarray(perc_g)
    report = LossReport(
        total=float(total),
        inter_term=float(inter_v),
        intra_term=float(intra_v),
        perceptual_term=float(perc_v),
        lambda1=float(lambda1),
        lambda2=float(lambda2),
    )
    return report, grad


@dataclass(frozen=True)
class GradientCheckRecord:
    """Analytic vs central-difference gradient at one point."""

    analytic: np.ndarray
    numeric: np.ndarray
    relative_error: float


def check_gradient(loss_fn, point, step: float = 1e-6) -> GradientCheckRecord:
    """Central finite differences of ``loss_fn`` (returning (value, grad)).

    The perturbation is applied per coordinate of the flattened point; the
    record's relative error is ||analytic - numeric|| over the larger norm.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(point, dtype=np.float64)
    _, analytic = loss_fn(x)
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.zeros_like(x)
    flat_num = numeric.reshape(-1)
    flat_x = x.reshape(-1)
    for i in range(flat_x.size):
        e = np.zeros_like(flat_x)
        e[i] = step
        up, _ = loss_fn((flat_x + e).reshape(x.shape))
        down, _ = loss_fn((flat_x - e).reshape(x.shape))
        flat_num[i] = (up - down) / (2.0 * step)
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    rel = float(np.linalg.norm(analytic - numeric) / denom)
    return GradientCheckRecord(readonly(analytic), readonly(numeric), rel)
