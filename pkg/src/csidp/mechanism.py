"""Blockwise Gaussian release mechanism.

Noise scales come from the per-block budgets via ``sigma_b = kappa * 2C /
eps_b``; the multiplier ``kappa`` is supplied by accountant calibration so
the composed release meets its global (eps, delta) target.  Within one
release, all entries draw from a single counter stream keyed by
``(DOM_RELEASE_NOISE, seed)`` in row-major grid order, then each entry is
scaled by its block's sigma -- equivalent to independent per-block Gaussian
noise but reproducible from one documented key.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .accountant import GaussianEvent
from .allocation import BlockPartition, BudgetVector, allocate, block_mass, uniform_budget
from .errors import InvalidArgument
from .importance import ImportanceMap
from .sensitivity import ClippedFeature, l2_sensitivity
from . import rngstream as rng


class MechanismMode(str, enum.Enum):
    NODP = "nodp"
    UNIFORM = "uniform"
    HEURISTIC = "heuristic"
    RANDOM = "random"
    ADAPTIVE = "adaptive"


@dataclass
class NoisyFeature:
    values: np.ndarray               # [T_f x F]
    sigma_per_block: np.ndarray      # [B], zeros iff mode == NODP
    partition_label: str
    mode: MechanismMode
    rng_seed_id: int

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.sigma_per_block = np.asarray(self.sigma_per_block, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgument("released values must be finite")
        if self.mode != MechanismMode.NODP and np.any(self.sigma_per_block <= 0):
            raise InvalidArgument("sigma must be positive outside NODP mode")


@dataclass(frozen=True)
class ReleaseParams:
    partition: BlockPartition
    eps_min: float
    eps_max: float
    gamma: float
    scale: float = 1.0        # kappa in sigma = kappa * 2C / eps_b
    seed: int = 0


def noise_scale(eps_b, clip_c: float, kappa: float):
    """sigma = kappa * 2C / eps_b (elementwise on arrays)."""
    eps_arr = np.asarray(eps_b, dtype=np.float64)
    if np.any(eps_arr <= 0) or clip_c <= 0 or kappa <= 0:
        raise InvalidArgument("eps_b, clip_c and kappa must be positive")
    out = kappa * l2_sensitivity(clip_c) / eps_arr
    return float(out) if np.isscalar(eps_b) else out


def add_block_noise(
    x: ClippedFeature, partition: BlockPartition, sigma: np.ndarray, seed: int
) -> NoisyFeature:
    """Add independent N(0, sigma_b^2) noise to every entry of block b."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (partition.num_blocks,):
        raise InvalidArgument(
            f"sigma has shape {sigma.shape}, partition has {partition.num_blocks} blocks"
        )
    if np.any(sigma <= 0):
        raise InvalidArgument("sigma entries must be positive")
    grid = x.unvec()
    if grid.shape != (partition.t_f, partition.f):
        raise InvalidArgument("feature grid does not match partition")
    sigma_map = sigma[partition.block_index_map()]
    z = rng.normals(rng.DOM_RELEASE_NOISE, seed, 0, grid.size).reshape(grid.shape)
    return NoisyFeature(
        values=grid + sigma_map * z,
        sigma_per_block=sigma,
        partition_label=partition.label(),
        mode=MechanismMode.ADAPTIVE,  # caller overwrites; placeholder keeps invariants
        rng_seed_id=seed,
    )


def budgets_for_mode(
    mode: MechanismMode,
    importance_map: ImportanceMap | None,
    params: ReleaseParams,
) -> BudgetVector:
    if mode == MechanismMode.UNIFORM:
        return uniform_budget(params.partition.num_blocks, params.eps_min, params.eps_max)
    if mode in (MechanismMode.ADAPTIVE, MechanismMode.HEURISTIC, MechanismMode.RANDOM):
        if importance_map is None:
            raise InvalidArgument(f"mode {mode.value} requires an importance map")
        mass = block_mass(importance_map, params.partition)
        return allocate(mass, params.eps_min, params.eps_max, params.gamma)
    raise InvalidArgument(f"no budgets for mode {mode.value}")


def release(
    x: ClippedFeature,
    importance_map: ImportanceMap | None,
    mode: MechanismMode,
    params: ReleaseParams,
) -> tuple[NoisyFeature, list[GaussianEvent]]:
    """Run the blockwise mechanism and emit one accountant event per block."""
    if mode == MechanismMode.NODP:
        noisy = NoisyFeature(
            values=x.unvec(),
            sigma_per_block=np.zeros(params.partition.num_blocks),
            partition_label=params.partition.label(),
            mode=mode,
            rng_seed_id=params.seed,
        )
        return noisy, []

    budgets = budgets_for_mode(mode, importance_map, params)
    sigma = noise_scale(budgets.eps_per_block, x.clip_c, params.scale)
    noisy = add_block_noise(x, params.partition, sigma, params.seed)
    noisy.mode = mode
    delta2 = l2_sensitivity(x.clip_c)
    events = [GaussianEvent(sigma=float(s), delta2=delta2) for s in sigma]
    return noisy, events
