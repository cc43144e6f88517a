"""Block partition of the time-frequency grid and budget allocation.

The grid is tiled by non-overlapping rectangles (edge blocks may be
smaller).  Block importance masses map to per-block budgets through the
bounded monotone rule

    eps_b = eps_min + (eps_max - eps_min) * m_b^gamma / sum_b' m_b'^gamma

whose sum is identically ``eps_min * B + (eps_max - eps_min)``.  The
budgets are relative: a later calibration step rescales the induced noise
so the composed (eps, delta) guarantee hits the requested global target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, InvalidArgument
from .importance import ImportanceMap


@dataclass(frozen=True)
class BlockPartition:
    t_f: int
    f: int
    block_h: int
    block_w: int
    # (row_start, row_stop, col_start, col_stop) per block, row-major.
    blocks: tuple[tuple[int, int, int, int], ...] = field(default=())

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def entry_counts(self) -> np.ndarray:
        return np.array([(r1 - r0) * (c1 - c0) for r0, r1, c0, c1 in self.blocks])

    def block_index_map(self) -> np.ndarray:
        """[T_f x F] matrix giving each entry its block index."""
        out = np.empty((self.t_f, self.f), dtype=np.int64)
        for b, (r0, r1, c0, c1) in enumerate(self.blocks):
            out[r0:r1, c0:c1] = b
        return out

    def label(self) -> str:
        return f"{self.block_h}x{self.block_w}@{self.t_f}x{self.f}"


@dataclass
class BudgetVector:
    eps_per_block: np.ndarray
    eps_min: float
    eps_max: float
    gamma: float

    def __post_init__(self) -> None:
        self.eps_per_block = np.asarray(self.eps_per_block, dtype=np.float64)
        eps = self.eps_per_block
        if eps.ndim != 1 or eps.size == 0:
            raise InvalidArgument("budget vector must be a non-empty 1-D array")
        if np.any(eps < self.eps_min - 1e-12) or np.any(eps > self.eps_max + 1e-12):
            raise InvalidArgument("per-block budgets must lie in [eps_min, eps_max]")
        expected = self.eps_min * eps.size + (self.eps_max - self.eps_min)
        if abs(float(eps.sum()) - expected) > 1e-9:
            raise InvalidArgument("budget sum identity violated")

    @property
    def num_blocks(self) -> int:
        return self.eps_per_block.size


def make_partition(t_f: int, f: int, block_h: int = 4, block_w: int = 8) -> BlockPartition:
    """Tile a [T_f x F] grid; remainder blocks truncate at the edges."""
    if t_f < 1 or f < 1:
        raise InvalidArgument("grid dimensions must be positive")
    if not 1 <= block_h <= t_f:
        raise InvalidArgument(f"block_h must be in [1, {t_f}]")
    if not 1 <= block_w <= f:
        raise InvalidArgument(f"block_w must be in [1, {f}]")
    blocks = []
    for r0 in range(0, t_f, block_h):
        for c0 in range(0, f, block_w):
            blocks.append((r0, min(r0 + block_h, t_f), c0, min(c0 + block_w, f)))
    return BlockPartition(t_f=t_f, f=f, block_h=block_h, block_w=block_w,
                          blocks=tuple(blocks))


def block_mass(w: ImportanceMap, p: BlockPartition) -> np.ndarray:
    """Importance mass per block; sums to 1 like the map itself."""
    if w.weights.shape != (p.t_f, p.f):
        raise InvalidArgument(
            f"map shape {w.weights.shape} does not match partition grid {(p.t_f, p.f)}"
        )
    return np.array([w.weights[r0:r1, c0:c1].sum() for r0, r1, c0, c1 in p.blocks])


def allocate(mass: np.ndarray, eps_min: float, eps_max: float, gamma: float) -> BudgetVector:
    """Map block masses to bounded per-block budgets (monotone in mass)."""
    mass = np.asarray(mass, dtype=np.float64)
    if mass.ndim != 1 or mass.size == 0:
        raise InvalidArgument("mass must be a non-empty 1-D array")
    if np.any(mass < 0):
        raise InvalidArgument("mass entries must be nonnegative")
    if not 0 < eps_min <= eps_max:
        raise InvalidArgument("need 0 < eps_min <= eps_max")
    if gamma < 1.0:
        raise InvalidArgument("gamma must be >= 1")
    powered = mass ** gamma
    total = powered.sum()
    if total == 0.0:
        raise DegenerateInput("all-zero mass vector (uniform fallback missing upstream)")
    eps = eps_min + (eps_max - eps_min) * powered / total
    return BudgetVector(eps_per_block=eps, eps_min=eps_min, eps_max=eps_max, gamma=gamma)


def uniform_budget(num_blocks: int, eps_min: float, eps_max: float) -> BudgetVector:
    """Budgets under a uniform mass: every block gets eps_min + span / B."""
    if num_blocks < 1:
        raise InvalidArgument("num_blocks must be positive")
    mass = np.full(num_blocks, 1.0 / num_blocks)
    return allocate(mass, eps_min, eps_max, gamma=1.0)
