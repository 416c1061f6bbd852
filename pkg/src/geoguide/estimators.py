"""Estimator-style wrappers so the core algorithms compose with sklearn
pipelines: uncentered-PCA subspace extraction, the geodesic flow kernel
between two feature batches, and the text-guided morphing loop.

The wrappers follow sklearn conventions (constructor stores hyperparameters
verbatim, ``fit`` returns ``self``, learned state gets a trailing
underscore); the numerical work lives in the functional modules.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .geodesic import (
    evaluate_flow,
    geodesic_cosine,
    geodesic_flow,
    match_dims,
    metric_between,
)
from .linalg import SubspaceBasis, extract_subspace, svd
from .inversion import InversionConfig, run_inversion
from .validation import check_image, check_matrix


class SubspaceExtractor(BaseEstimator, TransformerMixin):
    """Uncentered PCA: fit the dominant singular directions of a batch.

    Parameters
    ----------
    n_components : int or None
        Requested subspace dimension; None keeps everything up to the
        numeric rank. The fitted dimension can be smaller than requested
        when the batch is rank deficient.
    """

    def __init__(self, n_components=None):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        target = self.n_components if self.n_components is not None else X.shape[1]
        target = min(int(target), X.shape[1])
        self.basis_ = extract_subspace(X, target)
        self.effective_dim_ = self.basis_.sub_dim
        self.singular_values_ = svd(X).s[: self.effective_dim_].copy()
        return self

    def _check_fitted(self):
        if not hasattr(self, "basis_"):
            raise NotFittedError("SubspaceExtractor is not fitted yet")

    def transform(self, X):
        """Coordinates of the rows of X in the fitted basis."""
        self._check_fitted()
        return check_matrix(X, "X") @ self.basis_.basis

    def inverse_transform(self, T):
        self._check_fitted()
        return check_matrix(T, "T") @ self.basis_.basis.T


class GeodesicFlowKernel(BaseEstimator):
    """Geodesic metric between the subspaces of two feature batches.

    ``fit(X, Y)`` extracts a subspace from each batch (ranks reconciled by
    truncation), builds the flow, and integrates it into the guidance
    metric. Scoring methods then evaluate the metric cosine.
    """

    def __init__(self, n_components=None):
        self.n_components = n_components

    def fit(self, X, Y):
        X = check_matrix(X, "X")
        Y = check_matrix(Y, "Y")
        target = self.n_components if self.n_components is not None else X.shape[1]
        target = min(int(target), X.shape[1])
        p_x = extract_subspace(X, target)
        p_y = extract_subspace(Y, target)
        p_x, p_y = match_dims(p_x, p_y)
        self.effective_dim_ = p_x.sub_dim
        self.source_basis_, self.target_basis_ = p_x, p_y
        if p_x.sub_dim == p_x.ambient_dim:
            self.flow_ = None
            self.angles_ = np.zeros(p_x.sub_dim)
        else:
            self.flow_ = geodesic_flow(p_x, p_y)
            self.angles_ = self.flow_.angles.copy()
        self.metric_ = metric_between(p_x, p_y)
        return self

    def _check_fitted(self):
        if not hasattr(self, "metric_"):
            raise NotFittedError("GeodesicFlowKernel is not fitted yet")

    def path_basis(self, nu: float) -> SubspaceBasis:
        """Basis of the intermediate subspace at position nu in [0, 1]."""
        self._check_fitted()
        if self.flow_ is None:
            return SubspaceBasis(np.eye(self.source_basis_.ambient_dim))
        return evaluate_flow(self.flow_, nu)

    def similarity(self, z_a, z_b) -> float:
        self._check_fitted()
        return geodesic_cosine(self.metric_, z_a, z_b)

    def loss(self, z_a, z_b) -> float:
        return 1.0 - self.similarity(z_a, z_b)

    def score_pairs(self, A, B) -> np.ndarray:
        """Metric cosine for each row pair of two equal-shape batches."""
        self._check_fitted()
        A = check_matrix(A, "A")
        B = check_matrix(B, "B")
        if A.shape != B.shape:
            raise ValueError(f"paired batches must match in shape: {A.shape} vs {B.shape}")
        return np.array([self.similarity(a, b) for a, b in zip(A, B)])


class TextGuidedMorph(BaseEstimator):
    """Morph an image toward a target prompt by encoder-space optimization.

    ``fit(X)`` treats X as the source image and runs the inversion loop;
    the morphed image, trajectory, and final loss land in attributes.
    """

    def __init__(
        self,
        src_prompt: str = "a photo",
        trg_prompt: str = "a painting",
        epochs: int = 800,
        learning_rate: float = 2e-4,
        ensembles: int = 16,
        subspace_dim: int = 256,
        loss_mode: str = "geodesic_total",
        lambda1: float = 1.0,
        lambda2: float = 0.3,
        seed: int = 0,
        schedule: str = "cosine",
        sample_every: int = 50,
        optimizer: str = "adam",
        feature_dim: int = 32,
        text_dim: int = 64,
        max_grad_norm: float = 5.0,
    ):
        self.src_prompt = src_prompt
        self.trg_prompt = trg_prompt
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.ensembles = ensembles
        self.subspace_dim = subspace_dim
        self.loss_mode = loss_mode
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.seed = seed
        self.schedule = schedule
        self.sample_every = sample_every
        self.optimizer = optimizer
        self.feature_dim = feature_dim
        self.text_dim = text_dim
        self.max_grad_norm = max_grad_norm

    def _config(self) -> InversionConfig:
        return InversionConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            ensembles=self.ensembles,
            subspace_dim=self.subspace_dim,
            loss_mode=self.loss_mode,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            seed=self.seed,
            schedule=self.schedule,
            sample_every=self.sample_every,
            optimizer=self.optimizer,
            feature_dim=self.feature_dim,
            text_dim=self.text_dim,
            max_grad_norm=self.max_grad_norm,
        )

    def fit(self, X, y=None):
        image = check_image(X, "X")
        self.trajectory_ = run_inversion(
            self._config(), image, (self.src_prompt, self.trg_prompt)
        )
        final = self.trajectory_.final_state
        self.image_ = final.image
        self.loss_history_ = list(final.loss_history)
        self.final_loss_ = final.loss_history[-1].total
        return self
