"""Exactly-linear image augmentations with exact adjoints.

Each op is a linear map on pixels (a permutation with optional zero-fill),
so backpropagation through it is just the transposed map. Three kinds:
circular roll, crop-with-zero-fill (pixels outside a box are zeroed, the box
stays in place, making the op self-adjoint), and horizontal flip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoxOutOfBoundsError


@dataclass(frozen=True)
class RollOp:
    """Circular shift by (dy, dx); the adjoint is the inverse roll."""

    dy: int
    dx: int

    kind = "roll"

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.roll(x, (self.dy, self.dx), axis=(0, 1))

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return np.roll(y, (-self.dy, -self.dx), axis=(0, 1))


@dataclass(frozen=True)
class CropPadOp:
    """Zero everything outside a box; in-place crop + zero pad, self-adjoint."""

    top: int
    left: int
    height: int
    width: int

    kind = "crop_pad"

    def _check(self, x: np.ndarray) -> None:
        h, w = x.shape[0], x.shape[1]
        if (
            self.top < 0
            or self.left < 0
            or self.height < 1
            or self.width < 1
            or self.top + self.height > h
            or self.left + self.width > w
        ):
            raise BoxOutOfBoundsError(
                f"box (top={self.top}, left={self.left}, h={self.height}, "
                f"w={self.width}) does not fit a {h}x{w} image"
            )

    def apply(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        out = np.zeros_like(x)
        sl = (slice(self.top, self.top + self.height), slice(self.left, self.left + self.width))
        out[sl] = x[sl]
        return out

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return self.apply(y)


@dataclass(frozen=True)
class FlipOp:
    """Horizontal mirror; an involution, so the adjoint is the flip itself."""

    kind = "horizontal_flip"

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x[:, ::-1, ...].copy()

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return self.apply(y)


AugmentationOp = RollOp | CropPadOp | FlipOp


def sample_augmentations(seed, count: int = 16, image_shape=(16, 16, 3)) -> list[AugmentationOp]:
    """Deterministic list of ``count`` ops for images of the given shape.

    Per member: flip with probability 1/2, otherwise a roll (circular shift
    of at most a quarter of each side) or a crop-with-zero-fill keeping at
    least 75% of the area, equally likely.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    h, w = int(image_shape[0]), int(image_shape[1])
    rng = np.random.default_rng(seed)
    max_dy = max(h // 4, 0)
    max_dx = max(w // 4, 0)
    ops: list[AugmentationOp] = []
    for _ in range(count):
        pick = rng.random()
        if pick < 0.5:
            ops.append(FlipOp())
        elif pick < 0.75:
            dy = int(rng.integers(-max_dy, max_dy + 1))
            dx = int(rng.integers(-max_dx, max_dx + 1))
            ops.append(RollOp(dy, dx))
        else:
            frac = math.sqrt(rng.uniform(0.75, 1.0))
            bh = min(h, max(1, math.ceil(h * frac)))
            bw = min(w, max(1, math.ceil(w * frac)))
            top = int(rng.integers(0, h - bh + 1))
            left = int(rng.integers(0, w - bw + 1))
            ops.append(CropPadOp(top, left, bh, bw))
    return ops


def apply_augmentation(op: AugmentationOp, x: np.ndarray) -> np.ndarray:
    return op.apply(np.asarray(x, dtype=np.float64))


def augmentation_adjoint(op: AugmentationOp, y: np.ndarray) -> np.ndarray:
    return op.adjoint(np.asarray(y, dtype=np.float64))
