"""Geodesic-guided embedding morphing toolkit.

Core pieces: a dense subspace kernel (SVD, complements, uncentered PCA),
analytic geodesics between subspaces with their integrated guidance metric,
a family of direction/subspace losses with hand-derived gradients, frozen
toy encoders with exactly-linear augmentations, a generator-free morphing
loop, evaluation metrics, and bit-exact interchange formats. Estimator
wrappers expose the main algorithms through the sklearn fit/transform
convention.
"""

from .augment import (
    AugmentationOp,
    CropPadOp,
    FlipOp,
    RollOp,
    apply_augmentation,
    augmentation_adjoint,
    sample_augmentations,
)
from .encoders import (
    TanhToyEncoder,
    ToyEncoder,
    gaussian,
    make_encoder,
    prompt_vector,
    synthetic_image,
)
from .estimators import GeodesicFlowKernel, SubspaceExtractor, TextGuidedMorph
from .formats import (
    read_csv,
    read_emb1,
    read_image,
    read_kv,
    write_csv,
    write_emb1,
    write_image,
    write_kv,
)
from .geodesic import (
    GeodesicFlow,
    GuidanceMetric,
    evaluate_flow,
    geodesic_cosine,
    geodesic_flow,
    geodesic_loss,
    match_dims,
    metric_between,
    metric_between_batches,
    principal_angles,
    q_matrix,
)
from .inversion import (
    InversionConfig,
    MorphState,
    MorphTrajectory,
    cosine_lr,
    inversion_step,
    make_setup,
    run_inversion,
    save_trajectory,
    text_direction,
)
from .linalg import (
    SubspaceBasis,
    SvdResult,
    extract_subspace,
    orthonormal_complement,
    projector_distance,
    svd,
)
from .losses import (
    DirectionPair,
    GradientCheckRecord,
    LossReport,
    check_gradient,
    directional_loss,
    imc_loss,
    imr_loss,
    spherical_sq_loss,
    total_loss,
)
from .metrics import (
    GapReport,
    ScoreTable,
    d_metric,
    modality_gap,
    modulated_alignment,
    morphing_score,
    perceptual_proxy,
    psnr,
    ssim,
    ssim_with_gradient,
    trail_stability,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
