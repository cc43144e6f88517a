"""Per-window time-frequency importance maps.

All modes yield a probability map over the [T_f x F] grid: nonnegative,
summing to one.  Gradient mode normalizes the elementwise magnitude of the
task-loss input gradient with an eps0-guarded denominator, then renormalizes
so downstream allocation identities are exact; an all-zero map (zero
gradient, zero energy) falls back to the uniform map.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .sensitivity import ClippedFeature
from .spectrogram import BoundedFeature
from .surrogate import SurrogateModel, loss_and_input_gradient
from . import rngstream as rng


class ImportanceMode(str, enum.Enum):
    GRADIENT = "gradient"
    ENERGY = "energy"
    BAND_PRIOR = "band_prior"
    UNIFORM = "uniform"
    RANDOM = "random"


@dataclass
class ImportanceMap:
    weights: np.ndarray   # [T_f x F], nonnegative, sums to 1
    mode: ImportanceMode

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise InvalidArgument("importance map must be 2-D")
        if np.any(self.weights < 0):
            raise InvalidArgument("importance weights must be nonnegative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise InvalidArgument("importance weights must sum to 1")


def uniform_map(shape: tuple[int, int]) -> ImportanceMap:
    t_f, f = shape
    w = np.full((t_f, f), 1.0 / (t_f * f))
    return ImportanceMap(weights=w, mode=ImportanceMode.UNIFORM)


def _normalize(raw: np.ndarray, eps0: float, mode: ImportanceMode) -> ImportanceMap:
    guarded = raw / (raw.sum() + eps0)
    total = guarded.sum()
    if total == 0.0:
        return uniform_map(raw.shape)
    return ImportanceMap(weights=guarded / total, mode=mode)


def gradient_importance(
    model: SurrogateModel, x: ClippedFeature, y: int, eps0: float = 1e-6
) -> ImportanceMap:
    """|grad| of the task loss w.r.t. the input, normalized to a map."""
    _, grad = loss_and_input_gradient(model, x.values, y)
    return _normalize(np.abs(grad).reshape(x.grid_shape), eps0, ImportanceMode.GRADIENT)


def energy_importance(x: BoundedFeature, eps0: float = 1e-6) -> ImportanceMap:
    """Task-agnostic prior: importance proportional to feature magnitude."""
    return _normalize(np.asarray(x.values, dtype=np.float64), eps0, ImportanceMode.ENERGY)


def band_prior_importance(
    shape: tuple[int, int], band: tuple[int, int], in_band_mass: float
) -> ImportanceMap:
    """Fixed prior concentrating ``in_band_mass`` on a frequency index range.

    ``band`` is half-open: columns ``band[0] <= f < band[1]``.  If the band
    covers every column the map degrades to uniform.
    """
    t_f, f = shape
    lo, hi = band
    if not (0 <= lo < hi <= f):
        raise InvalidArgument("band must be a non-empty range inside [0, F)")
    if not 0.0 < in_band_mass < 1.0:
        raise InvalidArgument("in_band_mass must be in (0, 1)")
    n_in = (hi - lo) * t_f
    n_out = t_f * f - n_in
    if n_out == 0:
        return uniform_map(shape)
    w = np.full((t_f, f), (1.0 - in_band_mass) / n_out)
    w[:, lo:hi] = in_band_mass / n_in
    return ImportanceMap(weights=w, mode=ImportanceMode.BAND_PRIOR)


def random_importance(shape: tuple[int, int], seed: int) -> ImportanceMap:
    """I.i.d. nonnegative draws normalized to sum 1, deterministic per seed."""
    t_f, f = shape
    draws = rng.uniforms(rng.DOM_RANDOM_MAP, seed, 0, t_f * f)
    return ImportanceMap(
        weights=(draws / draws.sum()).reshape(t_f, f), mode=ImportanceMode.RANDOM
    )
