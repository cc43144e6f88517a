"""Experiment configuration: TOML with a strict schema.

Unknown sections or keys are errors; every value is type- and range-checked
on load.  ``default_config()`` is the desk-scale configuration the CLI and
the acceptance suite run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import tomli

from .errors import ConfigError
from .mechanism import MechanismMode
from .signal_gen import GenConfig
from .spectrogram import StftConfig
from .errors import InvalidArgument


@dataclass(frozen=True)
class DatasetSizes:
    train: int = 4000
    val: int = 400
    test: int = 1200
    nonmember: int = 1200

    def __post_init__(self) -> None:
        if min(self.train, self.test, self.nonmember) < 1 or self.val < 0:
            raise ConfigError("dataset sizes must be positive (val may be 0)")


@dataclass(frozen=True)
class PartitionConfig:
    block_h: int = 4
    block_w: int = 8


@dataclass(frozen=True)
class AllocationConfig:
    eps_min: float = 1.0
    eps_max: float = 8.0
    gamma: float = 2.0
    scope: str = "per_sample"   # or "cohort"

    def __post_init__(self) -> None:
        if not 0 < self.eps_min <= self.eps_max:
            raise ConfigError("need 0 < eps_min <= eps_max")
        if self.gamma < 1.0:
            raise ConfigError("gamma must be >= 1")
        if self.scope not in ("per_sample", "cohort"):
            raise ConfigError("allocation scope must be per_sample or cohort")


@dataclass(frozen=True)
class DpConfig:
    eps_targets: tuple[float, ...] = (0.5, 1.0, 4.0)
    delta: float = 1e-5
    modes: tuple[str, ...] = ("nodp", "uniform", "heuristic", "random", "adaptive")
    releases_per_window: int = 1
    budget_cap: float = float("inf")

    def __post_init__(self) -> None:
        if not self.eps_targets or any(e <= 0 for e in self.eps_targets):
            raise ConfigError("eps_targets must be positive")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must be in (0, 1)")
        known = {m.value for m in MechanismMode}
        for m in self.modes:
            if m not in known:
                raise ConfigError(f"unknown mechanism mode {m!r}")
        if self.releases_per_window < 1:
            raise ConfigError("releases_per_window must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr: float = 0.5
    batch_size: int = 128

    def __post_init__(self) -> None:
        if self.epochs < 0 or self.lr <= 0 or self.batch_size < 1:
            raise ConfigError("bad training hyperparameters")


@dataclass(frozen=True)
class UtilityConfig:
    """Downstream evaluation: noise-aware template readout over sessions.

    A session is a fixed-length run of released windows sharing one
    (activity, subject, room) combination; the reported accuracy/macro-F1
    are session-level, with per-window variants reported alongside.
    """

    session_len: int = 20

    def __post_init__(self) -> None:
        if self.session_len < 1:
            raise ConfigError("session_len must be >= 1")


@dataclass(frozen=True)
class AttackConfig:
    enabled: bool = True
    modes: tuple[str, ...] = ("nodp", "adaptive")
    shadow_count: int = 4
    epochs: int = 40
    lr: float = 0.5
    attributes: tuple[str, ...] = ("subject", "room")

    def __post_init__(self) -> None:
        if self.shadow_count < 2:
            raise ConfigError("shadow_count must be >= 2")
        for a in self.attributes:
            if a not in ("subject", "room"):
                raise ConfigError(f"unknown attack attribute {a!r}")


@dataclass(frozen=True)
class RespirationConfig:
    enabled: bool = False
    rate_bins: int = 10

    def __post_init__(self) -> None:
        if self.rate_bins < 2:
            raise ConfigError("rate_bins must be >= 2")


@dataclass(frozen=True)
class RunConfig:
    seeds: tuple[int, ...] = (0, 1)
    output_dir: str = "results"
    clip_percentile: float = 0.95

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not 0 < self.clip_percentile <= 1:
            raise ConfigError("clip_percentile must be in (0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GenConfig = field(default_factory=GenConfig)
    stft: StftConfig = field(default_factory=StftConfig)
    dataset: DatasetSizes = field(default_factory=DatasetSizes)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    allocation: AllocationConfig = field(default_factory=AllocationConfig)
    dp: DpConfig = field(default_factory=DpConfig)
    surrogate: TrainConfig = field(default_factory=TrainConfig)
    consumer: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=40))
    attacks: AttackConfig = field(default_factory=AttackConfig)
    respiration: RespirationConfig = field(default_factory=RespirationConfig)
    run: RunConfig = field(default_factory=RunConfig)


_SECTION_TYPES = {
    "generator": GenConfig,
    "stft": StftConfig,
    "dataset": DatasetSizes,
    "partition": PartitionConfig,
    "allocation": AllocationConfig,
    "dp": DpConfig,
    "surrogate": TrainConfig,
    "consumer": TrainConfig,
    "attacks": AttackConfig,
    "respiration": RespirationConfig,
    "run": RunConfig,
}

_LIST_FIELDS = {"eps_targets", "modes", "seeds", "attributes", "respiration_band_hz"}


def default_config() -> ExperimentConfig:
    return ExperimentConfig(
        generator=GenConfig(packet_loss_rate=0.05),
    )


def _build_section(name: str, cls, raw: dict):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        if key in _LIST_FIELDS:
            if not isinstance(value, list):
                raise ConfigError(f"[{name}] {key} must be a list")
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, InvalidArgument, ConfigError) as exc:
        raise ConfigError(f"[{name}] {exc}") from exc


def load_config(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(raw) - set(_SECTION_TYPES)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        if name in raw:
            if not isinstance(raw[name], dict):
                raise ConfigError(f"[{name}] must be a table")
            sections[name] = _build_section(name, cls, raw[name])
    return ExperimentConfig(**sections)
