"""Rényi-DP accountant for composed Gaussian releases.

A Gaussian event with noise scale ``sigma`` and L2 sensitivity ``delta2``
has RDP ``eps(alpha) = alpha * delta2^2 / (2 sigma^2)`` at every order
``alpha > 1``.  Composition adds these curves pointwise on a fixed alpha
grid, and the (eps, delta) guarantee is recovered as

    eps(delta) = min_alpha { eps_tot(alpha) + log(1/delta) / (alpha - 1) }

with ties broken toward the smaller alpha.  The grid is dense near 1
(where the conversion term is steep) and extends to 64 so the optimum for
every practical configuration lies inside it.

The ledger is an append-only text log (one line per event: sigma, delta2,
timestamp) preceded by a snapshot of the alpha grid and delta; replaying it
reproduces the reported eps exactly, which is the audit contract.
"""

from __future__ import annotations

import datetime as _dt
import enum
import logging
from dataclasses import dataclass, replace

import numpy as np

from .allocation import BudgetVector
from .errors import AuditError, CalibrationError, InvalidArgument

logger = logging.getLogger(__name__)

LEDGER_MAGIC = "# csidp-ledger v1"


@dataclass(frozen=True)
class GaussianEvent:
    sigma: float
    delta2: float

    def __post_init__(self) -> None:
        if self.sigma <= 0 or self.delta2 <= 0:
            raise InvalidArgument("sigma and delta2 must be positive")


@dataclass
class RdpCurve:
    alpha_grid: np.ndarray
    eps_rdp: np.ndarray

    def __post_init__(self) -> None:
        self.alpha_grid = np.asarray(self.alpha_grid, dtype=np.float64)
        self.eps_rdp = np.asarray(self.eps_rdp, dtype=np.float64)
        if self.alpha_grid.ndim != 1 or self.alpha_grid.size == 0:
            raise InvalidArgument("alpha grid must be a non-empty 1-D array")
        if np.any(self.alpha_grid <= 1.0):
            raise InvalidArgument("alpha grid entries must be > 1")
        if np.any(np.diff(self.alpha_grid) <= 0):
            raise InvalidArgument("alpha grid must be strictly ascending")
        if self.eps_rdp.shape != self.alpha_grid.shape or np.any(self.eps_rdp < 0):
            raise InvalidArgument("eps_rdp must align with the grid and be >= 0")


@dataclass
class AccountantState:
    curve: RdpCurve
    delta: float
    budget_cap_eps: float = np.inf
    events_count: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgument("delta must be in (0, 1)")
        if self.budget_cap_eps <= 0:
            raise InvalidArgument("budget cap must be positive (use inf for unbounded)")


class CapDecision(str, enum.Enum):
    RELEASE = "release"
    STOP = "stop"
    SHRINK_BUDGET = "shrink_budget"
    DOWNSAMPLE = "downsample"


def default_alpha_grid() -> np.ndarray:
    """{1.05, 1.10, ..., 2.00} followed by {2.25, 2.50, ..., 64.00}."""
    near_one = 1.0 + 0.05 * np.arange(1, 21)
    tail = 2.25 + 0.25 * np.arange(0, 248)
    return np.concatenate([near_one, tail])


def fresh_state(delta: float, budget_cap_eps: float = np.inf,
                alpha_grid: np.ndarray | None = None) -> AccountantState:
    grid = default_alpha_grid() if alpha_grid is None else np.asarray(alpha_grid, float)
    return AccountantState(
        curve=RdpCurve(alpha_grid=grid, eps_rdp=np.zeros_like(grid)),
        delta=delta,
        budget_cap_eps=budget_cap_eps,
    )


def rdp_gaussian(alpha: float, sigma: float, delta2: float) -> float:
    """Gaussian mechanism RDP at order alpha: alpha * delta2^2 / (2 sigma^2)."""
    if alpha <= 1.0:
        raise InvalidArgument("alpha must be > 1")
    if sigma <= 0 or delta2 <= 0:
        raise InvalidArgument("sigma and delta2 must be positive")
    return alpha * delta2 * delta2 / (2.0 * sigma * sigma)


def _unit_rate(events: list[GaussianEvent]) -> float:
    """sum_k delta2_k^2 / (2 sigma_k^2): the RDP curve is alpha times this."""
    return float(sum(e.delta2 * e.delta2 / (2.0 * e.sigma * e.sigma) for e in events))


def compose(state: AccountantState, events: list[GaussianEvent]) -> AccountantState:
    """Add the events' RDP to the state's curve (returns a new state)."""
    rate = _unit_rate(events)
    curve = RdpCurve(
        alpha_grid=state.curve.alpha_grid,
        eps_rdp=state.curve.eps_rdp + rate * state.curve.alpha_grid,
    )
    return replace(state, curve=curve, events_count=state.events_count + len(events))


def _convert(eps_rdp: np.ndarray, alpha_grid: np.ndarray, delta: float) -> float:
    objective = eps_rdp + np.log(1.0 / delta) / (alpha_grid - 1.0)
    return float(objective[int(np.argmin(objective))])


def to_dp(state: AccountantState) -> float:
    """(eps, delta) conversion by minimizing over the alpha grid."""
    if state.events_count == 0:
        logger.warning("converting an empty accountant; eps reflects the grid tail only")
    return _convert(state.curve.eps_rdp, state.curve.alpha_grid, state.delta)


def eps_floor(delta: float, alpha_grid: np.ndarray | None = None) -> float:
    """Smallest representable eps(delta) on the grid (zero-RDP limit)."""
    grid = default_alpha_grid() if alpha_grid is None else np.asarray(alpha_grid, float)
    return float(np.log(1.0 / delta) / (grid[-1] - 1.0))


def calibrate_noise(
    target_eps: float,
    delta: float,
    budgets: BudgetVector,
    clip_c: float,
    releases_per_run: int = 1,
    alpha_grid: np.ndarray | None = None,
    max_iter: int = 60,
) -> float:
    """Find s > 0 so that sigma_b = s * 2C / eps_b hits the global target.

    The composed release is ``releases_per_run`` repetitions of the B
    per-block Gaussian events.  eps(delta) is strictly decreasing in s, so
    plain bisection (in log s) converges; the result matches the target
    within 1 percent or a CalibrationError is raised with diagnostics.
    """
    if target_eps <= 0:
        raise InvalidArgument("target_eps must be positive")
    if clip_c <= 0:
        raise InvalidArgument("clip threshold must be positive")
    if releases_per_run < 1:
        raise InvalidArgument("releases_per_run must be >= 1")
    grid = default_alpha_grid() if alpha_grid is None else np.asarray(alpha_grid, float)

    eps_b = budgets.eps_per_block
    # sigma_b = s * 2C / eps_b  =>  per-event unit rate eps_b^2 / (2 s^2 (2C)^2) * (2C)^2
    base_rate = float(releases_per_run * np.sum(eps_b * eps_b))  # times 1 / (2 s^2)
    conv = np.log(1.0 / delta) / (grid - 1.0)

    def eps_at(s: float) -> float:
        rdp = (base_rate / (2.0 * s * s)) * grid
        return float(np.min(rdp + conv))

    floor = eps_floor(delta, grid)
    if target_eps <= floor:
        raise CalibrationError(
            f"target eps {target_eps} is below the grid floor {floor:.6g} "
            f"(delta={delta}, alpha_max={grid[-1]}); extend the grid or raise the target"
        )

    lo, hi = 1e-9, 1e9
    for _ in range(40):
        if eps_at(hi) <= target_eps:
            break
        hi *= 10.0
    else:
        raise CalibrationError("could not bracket the target from above")
    if eps_at(lo) < target_eps:
        raise CalibrationError("target already exceeded at negligible noise scale")

    log_lo, log_hi = np.log(lo), np.log(hi)
    for _ in range(max_iter):
        mid = 0.5 * (log_lo + log_hi)
        if eps_at(float(np.exp(mid))) > target_eps:
            log_lo = mid
        else:
            log_hi = mid
    s = float(np.exp(log_hi))  # conservative side: eps(s) <= target
    achieved = eps_at(s)
    if abs(achieved - target_eps) > 0.01 * target_eps:
        raise CalibrationError(
            f"bisection stalled: achieved eps {achieved:.6g} vs target {target_eps} "
            f"(s={s:.6g}, B={budgets.num_blocks}, K_w={releases_per_run})"
        )
    return s


def enforce_cap(
    state: AccountantState,
    pending: list[GaussianEvent],
    policy: CapDecision = CapDecision.STOP,
) -> CapDecision:
    """Release iff applying the pending events keeps eps(delta) within cap."""
    if policy == CapDecision.RELEASE:
        raise InvalidArgument("fallback policy cannot be RELEASE")
    if not np.isfinite(state.budget_cap_eps):
        return CapDecision.RELEASE
    hypothetical = compose(state, pending)
    if to_dp(hypothetical) <= state.budget_cap_eps:
        return CapDecision.RELEASE
    return policy


# --- ledger -----------------------------------------------------------------

def _format_grid(grid: np.ndarray) -> str:
    return ",".join(repr(float(a)) for a in grid)


def write_ledger_header(path: str, alpha_grid: np.ndarray, delta: float) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(LEDGER_MAGIC + "\n")
        fh.write(f"# alpha_grid={_format_grid(alpha_grid)}\n")
        fh.write(f"# delta={delta!r}\n")
        fh.write("sigma,delta2,timestamp\n")


def append_events(path: str, events: list[GaussianEvent],
                  timestamp: str | None = None) -> None:
    stamp = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat()
    with open(path, "a", encoding="utf-8") as fh:
        for e in events:
            fh.write(f"{e.sigma!r},{e.delta2!r},{stamp}\n")


def read_ledger(path: str) -> tuple[np.ndarray, float, list[GaussianEvent]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != LEDGER_MAGIC:
        raise AuditError(f"{path}: not a ledger file")
    grid: np.ndarray | None = None
    delta: float | None = None
    events: list[GaussianEvent] = []
    body_started = False
    for line in lines[1:]:
        if line.startswith("# alpha_grid="):
            grid = np.array([float(v) for v in line.split("=", 1)[1].split(",")])
        elif line.startswith("# delta="):
            delta = float(line.split("=", 1)[1])
        elif line == "sigma,delta2,timestamp":
            body_started = True
        elif line.startswith("#") or not line.strip():
            continue
        else:
            if not body_started:
                raise AuditError(f"{path}: event line before header")
            parts = line.split(",")
            if len(parts) != 3:
                raise AuditError(f"{path}: malformed event line {line!r}")
            try:
                events.append(GaussianEvent(sigma=float(parts[0]), delta2=float(parts[1])))
            except (ValueError, InvalidArgument) as exc:
                raise AuditError(f"{path}: bad event {line!r}: {exc}") from exc
    if grid is None or delta is None:
        raise AuditError(f"{path}: missing alpha grid or delta header")
    return grid, delta, events


def replay_ledger(path: str) -> tuple[AccountantState, float]:
    """Rebuild the accountant from a ledger and return (state, eps)."""
    grid, delta, events = read_ledger(path)
    state = compose(fresh_state(delta, alpha_grid=grid), events)
    return state, to_dp(state)


# --- streaming --------------------------------------------------------------

def simulate_stream(
    events_per_release: list[GaussianEvent],
    num_releases: int,
    delta: float,
    budget_cap_eps: float,
    policy: CapDecision = CapDecision.STOP,
    ledger_path: str | None = None,
    alpha_grid: np.ndarray | None = None,
) -> tuple[AccountantState, list[CapDecision], list[float]]:
    """Repeatedly offer the same release to a capped accountant.

    Returns the final state, the per-step decisions, and the reported
    eps(delta) trajectory (unchanged on refused steps).
    """
    state = fresh_state(delta, budget_cap_eps, alpha_grid)
    if ledger_path is not None:
        write_ledger_header(ledger_path, state.curve.alpha_grid, delta)
    decisions: list[CapDecision] = []
    reported: list[float] = []
    # Empty-ledger baseline (grid tail); matches replaying an empty ledger.
    current = _convert(state.curve.eps_rdp, state.curve.alpha_grid, state.delta)
    for _ in range(num_releases):
        decision = enforce_cap(state, events_per_release, policy)
        decisions.append(decision)
        if decision == CapDecision.RELEASE:
            state = compose(state, events_per_release)
            if ledger_path is not None:
                append_events(ledger_path, events_per_release)
            current = to_dp(state)
        reported.append(current)
    return state, decisions, reported
