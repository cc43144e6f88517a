"""L2 clipping and the sensitivity bound of the release query.

Each bounded feature is vectorized and rescaled to norm at most C:
``x_bar = x * min(1, C / ||x||_2)``.  Two clipped vectors differ by at most
``2C`` in L2, which is the sensitivity the Gaussian mechanism is calibrated
against.  The zero vector is clipped to itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .spectrogram import BoundedFeature


@dataclass
class ClippedFeature:
    values: np.ndarray           # flat [d], d = T_f * F
    clip_c: float
    original_norm: float
    grid_shape: tuple[int, int]  # (T_f, F) for unvec

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise InvalidArgument("clipped feature must be a flat vector")
        if self.values.size != self.grid_shape[0] * self.grid_shape[1]:
            raise InvalidArgument("grid_shape inconsistent with vector length")
        if float(np.linalg.norm(self.values)) > self.clip_c + 1e-9:
            raise InvalidArgument("clipped norm exceeds clip threshold")

    def unvec(self) -> np.ndarray:
        return self.values.reshape(self.grid_shape)


def clip_l2(x: BoundedFeature, clip_c: float) -> ClippedFeature:
    """Scale x down to L2 norm at most clip_c, preserving direction."""
    if clip_c <= 0:
        raise InvalidArgument("clip threshold must be positive")
    flat = x.values.reshape(-1)
    if not np.all(np.isfinite(flat)):
        raise InvalidArgument("feature contains non-finite entries")
    norm = float(np.linalg.norm(flat))
    scale = 1.0 if norm == 0.0 else min(1.0, clip_c / norm)
    return ClippedFeature(
        values=flat * scale,
        clip_c=clip_c,
        original_norm=norm,
        grid_shape=x.values.shape,
    )


def fit_clip_threshold(train: list[BoundedFeature], percentile: float = 0.95) -> float:
    """Nearest-rank percentile of the training feature norms."""
    if not train:
        raise InvalidArgument("need at least one training feature")
    if not 0.0 < percentile <= 1.0:
        raise InvalidArgument("percentile must be in (0, 1]")
    norms = sorted(float(np.linalg.norm(f.values)) for f in train)
    rank = math.ceil(percentile * len(norms))
    return norms[rank - 1]


def l2_sensitivity(clip_c: float) -> float:
    """Sensitivity of the clipped release under sample-level adjacency."""
    if clip_c <= 0:
        raise InvalidArgument("clip threshold must be positive")
    return 2.0 * clip_c
