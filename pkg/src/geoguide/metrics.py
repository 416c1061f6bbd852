"""Evaluation metrics: morphing score, PSNR, sliding-window SSIM (with an
analytic pixel gradient), subspace metric distance, and modality-gap reports.

Images are (H, W, C) float arrays in [0, 1] with peak value fixed at 1.0;
features are unit-ish vectors in the shared embedding space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBatchError, ShapeMismatchError, WindowTooSmallError
from .geodesic import GuidanceMetric, geodesic_cosine
from .validation import check_image, check_matrix, check_same_shape, check_vector

PSNR_CAP = 99.0

_SSIM_WINDOW = 8
_SSIM_C1 = (0.01 * 1.0) ** 2
_SSIM_C2 = (0.03 * 1.0) ** 2


def morphing_score(z_src, z_trg) -> float:
    """100 * (1 - cos) between two unit feature vectors; range [0, 200]."""
    a = check_vector(z_src, name="z_src")
    b = check_vector(z_trg, dim=a.shape[0], name="z_trg")
    return float(100.0 * (1.0 - a @ b))


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at 99.0 for identical images."""
    x = check_image(a, "a")
    y = check_image(b, "b")
    check_same_shape(x, y, "images")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, float(10.0 * np.log10(peak * peak / mse)))


def _window_stats(img: np.ndarray):
    """Per-window mean / variance / windowed views for one channel stack.

    ``img`` is (H, W, C); returns sliding (H-7, W-7, C, 8, 8) views plus
    per-window means, using population statistics.
    """
    win = np.lib.stride_tricks.sliding_window_view(img, (_SSIM_WINDOW, _SSIM_WINDOW), axis=(0, 1))
    mu = win.mean(axis=(-2, -1))
    return win, mu


def _ssim_window_terms(a: np.ndarray, b: np.ndarray):
    wa, mu_a = _window_stats(a)
    wb, mu_b = _window_stats(b)
    var_a = (wa**2).mean(axis=(-2, -1)) - mu_a**2
    var_b = (wb**2).mean(axis=(-2, -1)) - mu_b**2
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    n1 = 2.0 * mu_a * mu_b + _SSIM_C1
    n2 = 2.0 * cov + _SSIM_C2
    d1 = mu_a**2 + mu_b**2 + _SSIM_C1
    d2 = var_a + var_b + _SSIM_C2
    return mu_a, mu_b, n1, n2, d1, d2


def ssim(a, b) -> float:
    """Mean local SSIM over 8x8 sliding windows and channels; range [-1, 1]."""
    x = check_image(a, "a")
    y = check_image(b, "b")
    check_same_shape(x, y, "images")
    if min(x.shape[0], x.shape[1]) < _SSIM_WINDOW:
        raise WindowTooSmallError(
            f"images must be at least {_SSIM_WINDOW} pixels per side, got {x.shape[:2]}"
        )
    _, _, n1, n2, d1, d2 = _ssim_window_terms(x, y)
    return float(np.mean(n1 * n2 / (d1 * d2)))


def ssim_with_gradient(a, b) -> tuple[float, np.ndarray]:
    """SSIM value plus its analytic gradient with respect to image ``a``.

    Window statistics are population moments, so every partial derivative is
    a per-window constant plus terms linear in the pixel values of ``a`` and
    ``b``; the gradient of the window mean is accumulated by box-summing the
    per-window coefficient maps back onto the pixel grid.
    """
    x = check_image(a, "a")
    y = check_image(b, "b")
    check_same_shape(x, y, "images")
    h, w, c = x.shape
    if min(h, w) < _SSIM_WINDOW:
        raise WindowTooSmallError(
            f"images must be at least {_SSIM_WINDOW} pixels per side, got {x.shape[:2]}"
        )
    mu_a, mu_b, n1, n2, d1, d2 = _ssim_window_terms(x, y)
    s_map = n1 * n2 / (d1 * d2)
    value = float(np.mean(s_map))

    n_px = float(_SSIM_WINDOW * _SSIM_WINDOW)
    n_windows = float(s_map.size)
    # dS/da_p = alpha + beta * b_p + gamma * a_p per window, with
    # per-window coefficient maps (derived from the quotient rule).
    inv = 1.0 / (d1 * d2)
    alpha = (2.0 * mu_b * n2 - 2.0 * n1 * mu_b) * inv / n_px
    alpha -= s_map * (2.0 * mu_a / d1) / n_px
    alpha += s_map * (2.0 * mu_a / d2) / n_px
    beta = (2.0 * n1 * inv) / n_px
    gamma = (-2.0 * s_map / d2) / n_px

    sum_alpha = np.zeros((h, w, c))
    sum_beta = np.zeros((h, w, c))
    sum_gamma = np.zeros((h, w, c))
    hh, ww = mu_a.shape[0], mu_a.shape[1]
    for u in range(_SSIM_WINDOW):
        for v in range(_SSIM_WINDOW):
            sum_alpha[u : u + hh, v : v + ww, :] += alpha
            sum_beta[u : u + hh, v : v + ww, :] += beta
            sum_gamma[u : u + hh, v : v + ww, :] += gamma
    grad = (sum_alpha + sum_beta * y + sum_gamma * x) / n_windows
    return value, grad


def perceptual_proxy(img, reference) -> tuple[float, np.ndarray]:
    """Pixel-space photorealism regularizer: (1 - SSIM) / 2 with gradient.

    A zero-weight stand-in for learned perceptual distances: no pretrained
    network, value in [0, 1], gradient analytic.
    """
    value, grad = ssim_with_gradient(img, reference)
    return (1.0 - value) / 2.0, -grad / 2.0


def d_metric(metric: GuidanceMetric, z_a, z_b) -> float:
    """Subspace metric distance: the guidance cosine mapped affinely to [0, 1]."""
    c = geodesic_cosine(metric, z_a, z_b)
    return float(np.clip((1.0 + c) / 2.0, 0.0, 1.0))


def trail_stability(features, subspace_dim: int = 16) -> float:
    """Intra-modality stability of a feature trajectory.

    Builds the intra metric from the trail's own feature batch (identical
    endpoint subspaces, so the metric is the projector onto the trail span)
    and averages the metric distance over consecutive pairs. Values near 1
    mean the features barely move between recorded steps.
    """
    from .geodesic import metric_between_batches

    feats = check_matrix(features, "features")
    if feats.shape[0] < 2:
        raise EmptyBatchError("need at least two recorded features")
    metric, _ = metric_between_batches(feats, feats, min(subspace_dim, feats.shape[1]))
    values = [d_metric(metric, a, b) for a, b in zip(feats, feats[1:])]
    return float(np.mean(values))


@dataclass(frozen=True)
class GapReport:
    """Offset between the image-feature and text-feature clusters."""

    gap_vector: np.ndarray
    modulation_coeff: float = 0.0

    @property
    def gap_norm(self) -> float:
        return float(np.linalg.norm(self.gap_vector))


def modality_gap(image_feats, text_feats, modulation_coeff: float = 0.0) -> GapReport:
    """Mean image feature minus mean text feature, plus a modulation knob."""
    img = check_matrix(image_feats, "image_feats")
    txt = check_matrix(text_feats, "text_feats")
    if img.shape[0] == 0 or txt.shape[0] == 0:
        raise EmptyBatchError("feature batches must be non-empty")
    if img.shape[1] != txt.shape[1]:
        raise ShapeMismatchError(
            f"feature dims differ: {img.shape[1]} vs {txt.shape[1]}"
        )
    gap = img.mean(axis=0) - txt.mean(axis=0)
    return GapReport(gap_vector=gap, modulation_coeff=float(modulation_coeff))


def modulated_alignment(report: GapReport, z_img, z_text, coeff: float | None = None) -> float:
    """Cosine of (z_img - c * gap) with z_text; c = 0 gives the raw cosine."""
    c = report.modulation_coeff if coeff is None else float(coeff)
    zi = check_vector(z_img, report.gap_vector.shape[0], "z_img")
    zt = check_vector(z_text, report.gap_vector.shape[0], "z_text")
    shifted = zi - c * report.gap_vector
    denom = np.linalg.norm(shifted) * np.linalg.norm(zt)
    if denom <= 1e-300:
        raise EmptyBatchError("cannot score zero-length features")
    return float(shifted @ zt / denom)


@dataclass
class ScoreTable:
    """Aggregated metric rows serialized as ``label,mean,std,n`` CSV."""

    kind: str
    rows: list[tuple[str, float, float, int]] = field(default_factory=list)

    def add(self, label: str, values) -> None:
        vals = np.asarray(values, dtype=np.float64).reshape(-1)
        if vals.size == 0:
            raise EmptyBatchError(f"no values for score row {label!r}")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite values for score row {label!r}")
        self.rows.append((label, float(vals.mean()), float(vals.std()), int(vals.size)))

    def write(self, path, comments: dict | None = None) -> None:
        with open(path, "w", encoding="ascii") as fh:
            for key, value in (comments or {}).items():
                fh.write(f"# {key}={value}\n")
            fh.write(f"# kind={self.kind}\n")
            fh.write("label,mean,std,n\n")
            for label, mean, std, n in self.rows:
                fh.write(f"{label},{mean!r},{std!r},{n}\n")

    @classmethod
    def read(cls, path) -> "ScoreTable":
        kind = "unknown"
        rows: list[tuple[str, float, float, int]] = []
        with open(path, "r", encoding="ascii") as fh:
            for line in fh:
                text = line.strip()
                if text.startswith("# kind="):
                    kind = text.split("=", 1)[1]
                    continue
                if not text or text.startswith("#") or text == "label,mean,std,n":
                    continue
                label, mean, std, n = text.split(",")
                rows.append((label, float(mean), float(std), int(n)))
        return cls(kind=kind, rows=rows)
