"""Deterministic frozen encoders standing in for learned image/text encoders.

An encoder is a fixed random linear map followed by L2 normalization: cheap,
exactly differentiable, and bit-reproducible from its seed. Gaussian weights
are drawn by an explicit Box-Muller transform over PCG64 uniforms so the
sampling recipe is pinned down rather than delegated to a library default.
Text prompts become fixed one-hot-plus-noise vectors keyed by a stable hash
of the prompt string; no language processing is involved.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from .errors import ZeroActivationError
from .validation import check_vector, readonly

_ACTIVATION_EPS = 1e-12


def gaussian(shape, seed) -> np.ndarray:
    """Standard normal samples via Box-Muller over seeded PCG64 uniforms."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    n = int(np.prod(shape)) if shape else 1
    pairs = (n + 1) // 2
    rng = np.random.Generator(np.random.PCG64(seed))
    u1 = np.maximum(rng.random(pairs), np.finfo(np.float64).tiny)
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([radius * np.cos(2.0 * np.pi * u2), radius * np.sin(2.0 * np.pi * u2)])
    return z[:n].reshape(shape)


def _seed_ints(*parts) -> list[int]:
    """Stable integer entropy derived from ints and/or strings."""
    out = []
    for part in parts:
        if isinstance(part, str):
            digest = hashlib.sha256(part.encode("utf-8")).digest()
            out.append(int.from_bytes(digest[:8], "little"))
        else:
            out.append(int(part) & 0xFFFFFFFFFFFFFFFF)
    return out


class ToyEncoder:
    """Frozen linear encoder: z = W x / ||W x||, with an exact backward map."""

    def __init__(self, kind: str, weight: np.ndarray, seed: int = 0):
        if kind not in ("image", "text"):
            raise ValueError(f"kind must be 'image' or 'text', got {kind!r}")
        self.kind = kind
        self.weight = readonly(np.asarray(weight, dtype=np.float64))
        self.seed = int(seed)

    @property
    def input_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.weight.shape[0]

    def _activation(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        wx = self.weight @ x
        nrm = float(np.linalg.norm(wx))
        if nrm < _ACTIVATION_EPS:
            raise ZeroActivationError(
                f"{self.kind} encoder activation has near-zero norm ({nrm:.3e})"
            )
        return wx, nrm

    def encode(self, x) -> np.ndarray:
        """Unit-norm feature of a flattened input vector."""
        x = check_vector(x, self.input_dim, "input")
        wx, nrm = self._activation(x)
        return wx / nrm

    def encode_with_vjp(self, x):
        """Feature plus a function mapping output cotangents to input gradients.

        The backward map sends g to W.T @ ((g - z (z.T g)) / ||W x||), i.e.
        through the normalization Jacobian and the transposed weights.
        """
        x = check_vector(x, self.input_dim, "input")
        wx, nrm = self._activation(x)
        z = wx / nrm

        def vjp(cotangent):
            g = np.asarray(cotangent, dtype=np.float64)
            return self.weight.T @ ((g - z * (z @ g)) / nrm)

        return z, vjp

    def encode_batch(self, batch: np.ndarray) -> np.ndarray:
        """Row-wise encode of an (N, input_dim) batch."""
        wx = batch @ self.weight.T
        norms = np.linalg.norm(wx, axis=1)
        if np.any(norms < _ACTIVATION_EPS):
            raise ZeroActivationError("a batch row produced a near-zero activation")
        return wx / norms[:, None]

    def encode_batch_with_vjp(self, batch: np.ndarray):
        """Batched encode plus a cotangent map for the whole batch at once."""
        wx = batch @ self.weight.T
        norms = np.linalg.norm(wx, axis=1)
        if np.any(norms < _ACTIVATION_EPS):
            raise ZeroActivationError("a batch row produced a near-zero activation")
        z = wx / norms[:, None]

        def vjp(cotangents: np.ndarray) -> np.ndarray:
            g = np.asarray(cotangents, dtype=np.float64)
            tangent = (g - z * np.sum(z * g, axis=1, keepdims=True)) / norms[:, None]
            return tangent @ self.weight

        return z, vjp


class TanhToyEncoder(ToyEncoder):
    """One-hidden-layer variant (tanh) for stress-testing gradient paths."""

    def __init__(self, kind: str, w1: np.ndarray, w2: np.ndarray, seed: int = 0):
        super().__init__(kind, w2, seed)
        self.w1 = readonly(np.asarray(w1, dtype=np.float64))

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    def _forward(self, x: np.ndarray):
        h = np.tanh(self.w1 @ x)
        y = self.weight @ h
        nrm = float(np.linalg.norm(y))
        if nrm < _ACTIVATION_EPS:
            raise ZeroActivationError("tanh encoder activation has near-zero norm")
        return h, y, nrm

    def encode(self, x) -> np.ndarray:
        x = check_vector(x, self.input_dim, "input")
        _, y, nrm = self._forward(x)
        return y / nrm

    def encode_with_vjp(self, x):
        x = check_vector(x, self.input_dim, "input")
        h, y, nrm = self._forward(x)
        z = y / nrm

        def vjp(cotangent):
            g = np.asarray(cotangent, dtype=np.float64)
            gy = (g - z * (z @ g)) / nrm
            gh = self.weight.T @ gy
            return self.w1.T @ (gh * (1.0 - h * h))

        return z, vjp

    def encode_batch(self, batch: np.ndarray) -> np.ndarray:
        return np.stack([self.encode(row) for row in batch])

    def encode_batch_with_vjp(self, batch: np.ndarray):
        pairs = [self.encode_with_vjp(row) for row in batch]
        z = np.stack([p[0] for p in pairs])

        def vjp(cotangents: np.ndarray) -> np.ndarray:
            return np.stack([p[1](g) for p, g in zip(pairs, cotangents)])

        return z, vjp


def make_encoder(
    kind: str, input_dim: int, output_dim: int, seed: int, hidden_dim: int | None = None
) -> ToyEncoder:
    """Build a frozen encoder; identical seeds give bit-identical weights.

    Rows are scaled by 1/sqrt(input_dim) so pre-normalization activations are
    O(1) for O(1) inputs. Passing ``hidden_dim`` selects the tanh variant.
    """
    if input_dim < 1 or output_dim < 1:
        raise ValueError("encoder dimensions must be positive")
    scale = 1.0 / math.sqrt(input_dim)
    if hidden_dim is None:
        weight = gaussian((output_dim, input_dim), _seed_ints(seed, kind, "weight")) * scale
        return ToyEncoder(kind, weight, seed)
    w1 = gaussian((hidden_dim, input_dim), _seed_ints(seed, kind, "w1")) * scale
    w2 = gaussian((output_dim, hidden_dim), _seed_ints(seed, kind, "w2")) / math.sqrt(hidden_dim)
    return TanhToyEncoder(kind, w1, w2, seed)


def prompt_vector(prompt: str, dim: int, noise_scale: float = 0.1) -> np.ndarray:
    """Fixed pseudo-embedding for a prompt string: one-hot plus seeded noise.

    The hot index and the noise stream are both keyed by a stable hash of the
    prompt, so the same string always maps to the same vector.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    digest = hashlib.sha256(prompt.encode("utf-8")).digest()
    hot = int.from_bytes(digest[:4], "little") % dim
    vec = noise_scale * gaussian(dim, _seed_ints(prompt, "prompt-noise"))
    vec[hot] += 1.0
    return vec


def synthetic_image(height: int, width: int, channels: int, seed: int) -> np.ndarray:
    """Smooth deterministic test image with pixels safely inside (0, 1)."""
    yy, xx = np.meshgrid(
        np.linspace(0.0, 1.0, height), np.linspace(0.0, 1.0, width), indexing="ij"
    )
    phases = gaussian((channels, 4), _seed_ints(seed, "synthetic-image"))
    img = np.stack(
        [
            0.5
            + 0.25 * np.sin(2.0 * np.pi * ((k + 1) * yy + phases[k, 0]))
            + 0.15 * np.cos(2.0 * np.pi * ((k + 2) * xx + phases[k, 1]))
            for k in range(channels)
        ],
        axis=-1,
    )
    img += 0.05 * gaussian((height, width, channels), _seed_ints(seed, "synthetic-noise"))
    return np.clip(img, 0.05, 0.95)
