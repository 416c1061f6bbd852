"""Generator-free morphing loop: optimize pixels toward a prompt direction.

One step: re-sample augmentations from the per-epoch stream of the master
seed, encode the augmented ensemble, form per-member image directions
against the source feature, score them with the selected loss, backpropagate
through encoder and augmentation adjoints, take a scheduled gradient step,
and clamp pixels to [0, 1].

Guidance metrics are rebuilt from the current batches every step and treated
as constants of that step: no gradient flows through the subspace
construction. Everything is deterministic given (seed, config, inputs).
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .augment import apply_augmentation, augmentation_adjoint, sample_augmentations
from .encoders import ToyEncoder, make_encoder, prompt_vector
from .errors import (
    DegenerateDirectionError,
    GeoguideError,
    OutOfRangeError,
)
from .formats import write_emb1, write_image, write_kv
from .geodesic import GuidanceMetric, metric_between_batches
from .losses import (
    DirectionPair,
    LossReport,
    directional_loss,
    imc_loss,
    imr_loss,
    spherical_sq_loss,
)
from .metrics import perceptual_proxy
from .parallel import map_ordered
from .validation import check_image

LOSS_MODES = ("directional", "spherical", "geodesic_total")
SCHEDULES = ("constant", "cosine")
OPTIMIZERS = ("gd", "adam")

_DELTA_EPS = 1e-12


@dataclass(frozen=True)
class InversionConfig:
    """Hyperparameters of one morphing run.

    Defaults: 800 epochs, learning rate 2e-4 on a cosine schedule, 16
    ensemble members, subspace dimension 256 (capped by the ambient feature
    dimension and by batch rank)."""

    epochs: int = 800
    learning_rate: float = 2e-4
    ensembles: int = 16
    subspace_dim: int = 256
    loss_mode: str = "geodesic_total"
    lambda1: float = 1.0
    lambda2: float = 0.3
    seed: int = 0
    schedule: str = "cosine"
    sample_every: int = 50
    # Adam by default: at lr 2e-4 plain gradient descent moves pixels by well
    # under a percent over a full run and stalls; the per-coordinate
    # normalized steps are what make that rate workable. Plain "gd" stays
    # available for exact hand-audited update arithmetic.
    optimizer: str = "adam"
    # Treat the ensemble as one summed feature (direction of the member-sum
    # against the count-scaled source) instead of averaging per-member
    # directions.
    summed_ensemble: bool = False
    feature_dim: int = 32
    text_dim: int = 64
    # Direction norms can start arbitrarily close to zero (augmented features
    # of the unmoved image sit next to the source feature), making the
    # normalization Jacobian blow up; clipping the update norm keeps single
    # steps bounded without touching the loss or its audited gradient.
    max_grad_norm: float = 5.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.ensembles < 1:
            raise ValueError("ensembles must be >= 1")
        # learning_rate == 0 is allowed: it gives the documented no-op run.
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.subspace_dim < 1:
            raise ValueError("subspace_dim must be >= 1")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")
        if self.max_grad_norm < 0:
            raise ValueError("max_grad_norm must be >= 0 (0 disables clipping)")

    def as_kv(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "ensembles": self.ensembles,
            "subspace_dim": self.subspace_dim,
            "loss_mode": self.loss_mode,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "seed": self.seed,
            "schedule": self.schedule,
            "sample_every": self.sample_every,
            "optimizer": self.optimizer,
            "summed_ensemble": self.summed_ensemble,
            "feature_dim": self.feature_dim,
            "text_dim": self.text_dim,
            "max_grad_norm": self.max_grad_norm,
        }

    def config_hash(self) -> str:
        text = ",".join(f"{k}={v}" for k, v in sorted(self.as_kv().items()))
        return hashlib.sha256(text.encode("ascii")).hexdigest()[:12]


@dataclass
class MorphState:
    """State of a run after ``iterate`` steps."""

    image: np.ndarray
    iterate: int
    loss_history: list[LossReport] = field(default_factory=list)
    feature_trail: list[np.ndarray] = field(default_factory=list)
    # Encoded augmented-member features at this iterate; feeds the next
    # step's intra-modality metric. None before the first step.
    member_features: np.ndarray | None = None
    adam_m: np.ndarray | None = None
    adam_v: np.ndarray | None = None

    def snapshot(self) -> "MorphState":
        return MorphState(
            image=self.image.copy(),
            iterate=self.iterate,
            loss_history=list(self.loss_history),
            feature_trail=[z.copy() for z in self.feature_trail],
            member_features=None if self.member_features is None else self.member_features.copy(),
        )


@dataclass(frozen=True)
class MorphTrajectory:
    """Sampled states of one run plus its provenance."""

    states: list[MorphState]
    config: InversionConfig
    provenance: dict

    def __post_init__(self):
        iterates = [s.iterate for s in self.states]
        if any(b <= a for a, b in zip(iterates, iterates[1:])):
            raise ValueError("trajectory iterates must be strictly increasing")

    @property
    def final_state(self) -> MorphState:
        return self.states[-1]


class RunSetup(NamedTuple):
    """Frozen per-run data: encoders, source image, and text features."""

    image_encoder: ToyEncoder
    text_encoder: ToyEncoder
    source_image: np.ndarray
    source_flat: np.ndarray
    source_feature: np.ndarray
    text_feature_src: np.ndarray
    text_feature_trg: np.ndarray
    target_direction: np.ndarray


def derive_seed(master: int, *tags) -> int:
    """Stable child seed from the master seed and context tags."""
    text = ":".join([str(int(master))] + [str(t) for t in tags])
    return int.from_bytes(hashlib.sha256(text.encode("ascii")).digest()[:8], "little")


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    """Half-cosine decay: base at step 0, half at midpoint, zero at the end."""
    if not 0 <= step <= total_steps:
        raise OutOfRangeError(f"step must be in [0, {total_steps}], got {step}")
    return base_lr * (1.0 + math.cos(math.pi * step / total_steps)) / 2.0


def scheduled_lr(cfg: InversionConfig, step: int) -> float:
    if cfg.schedule == "constant":
        return cfg.learning_rate
    return cosine_lr(cfg.learning_rate, step, cfg.epochs)


def text_direction(enc_text: ToyEncoder, prompt_src: str, prompt_trg: str) -> np.ndarray:
    """Unit direction between the encoded target and source prompts."""
    z_src = enc_text.encode(prompt_vector(prompt_src, enc_text.input_dim))
    z_trg = enc_text.encode(prompt_vector(prompt_trg, enc_text.input_dim))
    diff = z_trg - z_src
    nrm = float(np.linalg.norm(diff))
    if nrm < _DELTA_EPS:
        raise DegenerateDirectionError(
            f"prompts {prompt_src!r} and {prompt_trg!r} encode to the same feature"
        )
    return diff / nrm


def make_setup(cfg: InversionConfig, source_image, prompts: tuple[str, str]) -> RunSetup:
    """Build the frozen encoders and source/text features for one run."""
    src = check_image(source_image, "source_image")
    h, w, c = src.shape
    enc_img = make_encoder("image", h * w * c, cfg.feature_dim, derive_seed(cfg.seed, "image-encoder"))
    enc_txt = make_encoder("text", cfg.text_dim, cfg.feature_dim, derive_seed(cfg.seed, "text-encoder"))
    src_flat = src.reshape(-1)
    prompt_src, prompt_trg = prompts
    return RunSetup(
        image_encoder=enc_img,
        text_encoder=enc_txt,
        source_image=src,
        source_flat=src_flat,
        source_feature=enc_img.encode(src_flat),
        text_feature_src=enc_txt.encode(prompt_vector(prompt_src, cfg.text_dim)),
        text_feature_trg=enc_txt.encode(prompt_vector(prompt_trg, cfg.text_dim)),
        target_direction=text_direction(enc_txt, prompt_src, prompt_trg),
    )


def _directional_objective(cfg, setup, features, vjp_batch, ops, image_shape):
    """Mean per-member direction loss and its pixel gradient."""
    n = features.shape[0]
    loss_fn = directional_loss if cfg.loss_mode == "directional" else spherical_sq_loss
    cotangents = np.zeros_like(features)
    if cfg.summed_ensemble:
        raw = features.sum(axis=0) - n * setup.source_feature
        nrm = float(np.linalg.norm(raw))
        if nrm < _DELTA_EPS:
            raise DegenerateDirectionError("ensemble direction collapsed to zero")
        unit = raw / nrm
        pair = DirectionPair(unit, setup.target_direction)
        value, grad_unit = loss_fn(pair)
        grad_raw = (grad_unit - unit * (unit @ grad_unit)) / nrm
        cotangents[:] = grad_raw  # d(raw)/d(z_j) = I for every member
        total = value
    else:
        values = []
        for j in range(n):
            raw = features[j] - setup.source_feature
            nrm = float(np.linalg.norm(raw))
            if nrm < _DELTA_EPS:
                continue  # identity-like augmentation at the start; skip member
            unit = raw / nrm
            value, grad_unit = loss_fn(DirectionPair(unit, setup.target_direction))
            values.append(value)
            cotangents[j] = (grad_unit - unit * (unit @ grad_unit)) / nrm
        if not values:
            raise DegenerateDirectionError("all ensemble directions collapsed to zero")
        cotangents /= len(values)
        total = float(np.mean(values))
    pixel_grad = _pixels_from_cotangents(cotangents, vjp_batch, ops, image_shape)
    return total, pixel_grad


def _pixels_from_cotangents(cotangents, vjp_batch, ops, image_shape):
    member_grads = vjp_batch(cotangents)
    grad = np.zeros(image_shape)
    for j, op in enumerate(ops):
        grad += augmentation_adjoint(op, member_grads[j].reshape(image_shape))
    return grad


def _geodesic_metrics(cfg, setup, features, prev_features):
    """Inter and intra metrics, frozen for the current step.

    The requested subspace dimension is clamped to the ambient feature
    dimension; batch rank caps it further inside the extraction.
    """
    n = features.shape[0]
    dirs = features - setup.source_feature[None, :]
    norms = np.linalg.norm(dirs, axis=1)
    valid = norms > _DELTA_EPS
    if not np.any(valid):
        raise DegenerateDirectionError("all ensemble directions collapsed to zero")
    target_dim = min(cfg.subspace_dim, features.shape[1])
    text_batch = np.tile(setup.target_direction, (n, 1))
    q_inter, eff_inter = metric_between_batches(dirs[valid], text_batch, target_dim)
    base = features if prev_features is None else prev_features
    q_intra, eff_intra = metric_between_batches(base, features, target_dim)
    return q_inter, q_intra, valid, eff_inter, eff_intra


def frozen_geodesic_objective(
    image: np.ndarray,
    cfg: InversionConfig,
    setup: RunSetup,
    ops,
    q_inter: GuidanceMetric,
    q_intra: GuidanceMetric,
    prev_mean: np.ndarray,
    _precomputed=None,
):
    """Weighted total of consistency, regularization, and perceptual terms,
    with both guidance metrics held fixed.

    This is the differentiable map the finite-difference audit probes: the
    metrics, augmentation ops, and previous-step mean feature are inputs, so
    perturbing the pixels exercises exactly the path the analytic gradient
    covers (augment -> encode -> losses -> adjoints).
    """
    if _precomputed is None:
        members = map_ordered(lambda op: apply_augmentation(op, image).reshape(-1), ops)
        features, vjp_batch = setup.image_encoder.encode_batch_with_vjp(np.stack(members))
    else:
        features, vjp_batch = _precomputed
    n = features.shape[0]
    dirs = features - setup.source_feature[None, :]
    valid = np.linalg.norm(dirs, axis=1) > _DELTA_EPS

    cotangents = np.zeros_like(features)
    inter_values = []
    for j in range(n):
        if not valid[j]:
            continue
        value, grad = imc_loss(
            q_inter, features[j], setup.source_feature,
            setup.text_feature_trg, setup.text_feature_src,
        )
        inter_values.append(value)
        cotangents[j] = grad
    if not inter_values:
        raise DegenerateDirectionError("all ensemble directions collapsed to zero")
    cotangents /= len(inter_values)
    inter_value = float(np.mean(inter_values))

    mean_feature = features.mean(axis=0)
    intra_value, grad_mean = imr_loss(q_intra, prev_mean, mean_feature)
    cotangents += cfg.lambda1 * grad_mean[None, :] / n

    perc_value, perc_grad = perceptual_proxy(image, setup.source_image)

    pixel_grad = _pixels_from_cotangents(cotangents, vjp_batch, ops, image.shape)
    pixel_grad += cfg.lambda2 * perc_grad
    report = LossReport(
        total=inter_value + cfg.lambda1 * intra_value + cfg.lambda2 * perc_value,
        inter_term=inter_value,
        intra_term=intra_value,
        perceptual_term=perc_value,
        lambda1=cfg.lambda1,
        lambda2=cfg.lambda2,
    )
    return report, pixel_grad


def step_objective(state: MorphState, cfg: InversionConfig, setup: RunSetup):
    """Loss report and pixel gradient at the state's pixels.

    Guidance metrics are rebuilt from the state's own feature batches and
    then treated as constants of the step. Returns
    (report, pixel_grad, member_features).
    """
    image = state.image
    ops = sample_augmentations(
        derive_seed(cfg.seed, "augment", state.iterate), cfg.ensembles, image.shape
    )
    members = map_ordered(lambda op: apply_augmentation(op, image).reshape(-1), ops)
    features, vjp_batch = setup.image_encoder.encode_batch_with_vjp(np.stack(members))

    if cfg.loss_mode in ("directional", "spherical"):
        value, pixel_grad = _directional_objective(
            cfg, setup, features, vjp_batch, ops, image.shape
        )
        report = LossReport(
            total=value, inter_term=value, intra_term=0.0, perceptual_term=0.0,
            lambda1=cfg.lambda1, lambda2=cfg.lambda2,
        )
        return report, pixel_grad, features

    q_inter, q_intra, _, _, _ = _geodesic_metrics(
        cfg, setup, features, state.member_features
    )
    prev_mean = (
        state.member_features.mean(axis=0)
        if state.member_features is not None
        else features.mean(axis=0)
    )
    report, pixel_grad = frozen_geodesic_objective(
        image, cfg, setup, ops, q_inter, q_intra, prev_mean,
        _precomputed=(features, vjp_batch),
    )
    return report, pixel_grad, features


def inversion_step(state: MorphState, cfg: InversionConfig, setup: RunSetup) -> MorphState:
    """One optimization step; returns the successor state, pixels clamped."""
    try:
        report, pixel_grad, features = step_objective(state, cfg, setup)
    except GeoguideError as exc:
        raise type(exc)(f"iterate {state.iterate}: {exc}") from exc

    lr = scheduled_lr(cfg, state.iterate)
    if cfg.max_grad_norm > 0:
        grad_norm = float(np.linalg.norm(pixel_grad))
        if grad_norm > cfg.max_grad_norm:
            pixel_grad = pixel_grad * (cfg.max_grad_norm / grad_norm)
    adam_m, adam_v = state.adam_m, state.adam_v
    if cfg.optimizer == "adam":
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        adam_m = np.zeros_like(pixel_grad) if adam_m is None else adam_m
        adam_v = np.zeros_like(pixel_grad) if adam_v is None else adam_v
        adam_m = beta1 * adam_m + (1.0 - beta1) * pixel_grad
        adam_v = beta2 * adam_v + (1.0 - beta2) * pixel_grad**2
        t = state.iterate + 1
        m_hat = adam_m / (1.0 - beta1**t)
        v_hat = adam_v / (1.0 - beta2**t)
        update = m_hat / (np.sqrt(v_hat) + eps)
    else:
        update = pixel_grad
    new_image = np.clip(state.image - lr * update, 0.0, 1.0)

    return MorphState(
        image=new_image,
        iterate=state.iterate + 1,
        loss_history=state.loss_history + [report],
        feature_trail=state.feature_trail,
        member_features=features,
        adam_m=adam_m,
        adam_v=adam_v,
    )


def run_inversion(
    cfg: InversionConfig, source_image, prompts: tuple[str, str]
) -> MorphTrajectory:
    """Run the full loop, recording a snapshot every ``sample_every`` steps.

    The trail of encoded morph features grows at each recorded step; all
    snapshots share the run's config and provenance (seed plus config hash).
    """
    setup = make_setup(cfg, source_image, prompts)
    state = MorphState(image=setup.source_image.copy(), iterate=0)

    def record(st: MorphState) -> MorphState:
        st.feature_trail.append(setup.image_encoder.encode(st.image.reshape(-1)))
        return st.snapshot()

    snapshots = [record(state)]
    for _ in range(cfg.epochs):
        state = inversion_step(state, cfg, setup)
        if state.iterate % cfg.sample_every == 0 or state.iterate == cfg.epochs:
            snapshots.append(record(state))

    provenance = {
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "requested_subspace_dim": cfg.subspace_dim,
    }
    if cfg.loss_mode == "geodesic_total" and state.member_features is not None:
        # Report the rank-capped dimensions actually used on the last step.
        _, _, _, eff_inter, eff_intra = _geodesic_metrics(
            cfg, setup, state.member_features, state.member_features
        )
        provenance["effective_subspace_dim_inter"] = eff_inter
        provenance["effective_subspace_dim_intra"] = eff_intra
    return MorphTrajectory(states=snapshots, config=cfg, provenance=provenance)


def save_trajectory(out_dir, traj: MorphTrajectory) -> None:
    """Persist a run: config.kv, per-epoch trajectory.csv, frames, features."""
    os.makedirs(out_dir, exist_ok=True)
    cfg = traj.config
    kv = {str(k): v for k, v in cfg.as_kv().items()}
    kv.update({str(k): v for k, v in traj.provenance.items()})
    write_kv(os.path.join(out_dir, "config.kv"), kv)

    final = traj.final_state
    with open(os.path.join(out_dir, "trajectory.csv"), "w", encoding="ascii") as fh:
        fh.write("iterate,total,inter,intra,perceptual,lr\n")
        for i, report in enumerate(final.loss_history):
            lr = scheduled_lr(cfg, i)
            fh.write(
                f"{i},{report.total!r},{report.inter_term!r},"
                f"{report.intra_term!r},{report.perceptual_term!r},{lr!r}\n"
            )

    for st in traj.states:
        write_image(os.path.join(out_dir, f"frame_{st.iterate:06d}.ppm"), st.image)
    trail = np.stack(final.feature_trail) if final.feature_trail else np.zeros((0, cfg.feature_dim))
    write_emb1(os.path.join(out_dir, "features.emb"), trail)
