"""End-to-end experiment runner.

One run: generate a labeled synthetic dataset, fit normalization/clipping
and the producer surrogate on the training split, release the train and
non-member windows under each mechanism mode and global epsilon target,
then measure downstream utility (consumer trains on the released training
features, deploys on its own clean test data) and empirical leakage
(attribute inference and shadow-model membership inference on the released
features).  Everything is keyed by explicit seeds; two runs of the same
config produce byte-identical result tables.

Per-sample adaptive allocation makes each window's budget vector depend on
that window's content.  Calibration keeps the composed per-record guarantee
constant anyway: with sigma_b = s * 2C / eps_b the composed RDP depends on
the budgets only through sum_b eps_b^2 / s^2, so scaling each window's s by
sqrt(sum eps_b^2 / sum eps_ref^2) pins every window to the reference
window's eps(delta).  The manifest labels per-sample runs "heuristic"
(data-dependent allocation) and cohort runs "formal".
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import accountant as acct
from . import io as fio
from . import rngstream as rng
from .allocation import BlockPartition, BudgetVector, block_mass, make_partition, uniform_budget
from .attacks import AttackReport, attribute_inference, shadow_mia
from .config import ExperimentConfig
from .errors import AuditError, InvalidArgument
from .importance import (
    ImportanceMap,
    ImportanceMode,
    energy_importance,
    gradient_importance,
    random_importance,
    uniform_map,
)
from .mechanism import MechanismMode, ReleaseParams, budgets_for_mode, release
from .sensitivity import ClippedFeature, clip_l2, fit_clip_threshold, l2_sensitivity
from .signal_gen import GenConfig, drop_packets, generate_window, window_variant
from .spectrogram import (
    BoundedFeature,
    NormStats,
    Spectrogram,
    fit_norm_stats,
    normalize_bounded,
    resample_uniform,
    stft_magnitude,
)
from .surrogate import SurrogateModel, evaluate, predict_proba, train

GUARANTEE_LABELS = {
    MechanismMode.NODP: "none",
    MechanismMode.UNIFORM: "formal",
    MechanismMode.RANDOM: "formal",
    MechanismMode.HEURISTIC: "heuristic",
    MechanismMode.ADAPTIVE: "heuristic",
}

_SPLIT_ORDER = ("train", "val", "test", "nonmember")


@dataclass
class PreparedData:
    """Everything fitted on one seed's dataset before any release."""

    activities: np.ndarray
    subjects: np.ndarray
    rooms: np.ndarray
    resp_rates: np.ndarray            # nan where absent
    member: np.ndarray                # bool
    splits: dict[str, np.ndarray]
    bounded: np.ndarray               # [n x T_f x F]
    clean: np.ndarray                 # [n x d] clipped, flat
    clipped: list[ClippedFeature]
    norm_stats: NormStats
    clip_c: float
    surrogate: SurrogateModel
    partition: BlockPartition
    grid_shape: tuple[int, int]
    freq_resolution: float
    dataset_seed: int


@dataclass
class ReleaseResult:
    mode: MechanismMode
    eps_target: float                 # inf for NODP
    released: np.ndarray              # [n_rel x d] aligned with indices
    indices: np.ndarray               # dataset indices that were released
    sigma_rows: list[np.ndarray]      # per released window
    scale_ref: float
    reported_eps: float | None
    ledger_events: list[acct.GaussianEvent]


def _split_sizes(cfg: ExperimentConfig) -> dict[str, int]:
    d = cfg.dataset
    return {"train": d.train, "val": d.val, "test": d.test, "nonmember": d.nonmember}


def window_labels(cfg: GenConfig, index: int) -> tuple[int, int, int]:
    """Balanced deterministic label assignment for dataset window ``index``."""
    activity = index % cfg.num_activities
    subject = (index // cfg.num_activities) % cfg.num_subjects
    room = (index // (cfg.num_activities * cfg.num_subjects)) % cfg.num_rooms
    return activity, subject, room


def split_of_index(cfg: ExperimentConfig, index: int) -> str:
    start = 0
    sizes = _split_sizes(cfg)
    for split in _SPLIT_ORDER:
        if index < start + sizes[split]:
            return split
        start += sizes[split]
    raise InvalidArgument(f"window index {index} beyond dataset size")


def iter_dataset_windows(cfg: ExperimentConfig, run_seed: int):
    """Yield (index, split, window) for every dataset window of one run.

    Labels cycle through (activity, subject, room) combinations so every
    split is close to balanced.  Window i uses the derived seed chain
    (generator.seed, run_seed, i); the packet-loss stressor plus uniform
    resampling is applied here when configured.
    """
    gen = cfg.generator
    dataset_seed = rng.derive_seed(gen.seed, run_seed)
    total = sum(_split_sizes(cfg).values())
    for i in range(total):
        activity, subject, room = window_labels(gen, i)
        wcfg = replace(gen, seed=rng.derive_seed(dataset_seed, i))
        w = generate_window(wcfg, activity, subject, room)
        if gen.packet_loss_rate > 0:
            w = drop_packets(w, gen.packet_loss_rate, rng.derive_seed(dataset_seed, 10_000_000 + i))
            w = resample_uniform(w, gen.window_len)
        split = split_of_index(cfg, i)
        w.member_flag = split == "train"
        yield i, split, w


def build_dataset(cfg: ExperimentConfig, run_seed: int) -> tuple[list[Spectrogram], dict]:
    """Generate windows and return their spectrograms plus label metadata."""
    gen = cfg.generator
    dataset_seed = rng.derive_seed(gen.seed, run_seed)
    sizes = _split_sizes(cfg)
    total = sum(sizes.values())

    specs: list[Spectrogram] = []
    meta = {
        "activities": np.empty(total, dtype=np.int64),
        "subjects": np.empty(total, dtype=np.int64),
        "rooms": np.empty(total, dtype=np.int64),
        "resp_rates": np.full(total, np.nan),
        "member": np.zeros(total, dtype=bool),
        "splits": {},
        "dataset_seed": dataset_seed,
        "freq_resolution": gen.sample_rate / cfg.stft.fft_size,
    }
    start = 0
    for split in _SPLIT_ORDER:
        idx = np.arange(start, start + sizes[split])
        meta["splits"][split] = idx
        start += sizes[split]

    for i, _split, w in iter_dataset_windows(cfg, run_seed):
        specs.append(stft_magnitude(w, cfg.stft, gen.sample_rate))
        meta["activities"][i] = w.activity_label
        meta["subjects"][i] = w.subject_id
        meta["rooms"][i] = w.room_id
        if w.resp_rate_hz is not None:
            meta["resp_rates"][i] = w.resp_rate_hz
    meta["member"][meta["splits"]["train"]] = True
    return specs, meta


def prepare(cfg: ExperimentConfig, run_seed: int) -> PreparedData:
    """Fit stats, clipping and the producer surrogate on the training split."""
    specs, meta = build_dataset(cfg, run_seed)
    train_idx = meta["splits"]["train"]

    norm_stats = fit_norm_stats([specs[i] for i in train_idx], eps0=cfg.stft.eps0)
    bounded = [normalize_bounded(s, norm_stats) for s in specs]
    clip_c = fit_clip_threshold([bounded[i] for i in train_idx], cfg.run.clip_percentile)
    clipped = [clip_l2(b, clip_c) for b in bounded]

    grid_shape = bounded[0].shape
    clean = np.stack([c.values for c in clipped])
    bounded_arr = np.stack([b.values for b in bounded])

    model = SurrogateModel.zeros(cfg.generator.num_activities, clean.shape[1])
    model = train(
        model,
        clean[train_idx],
        meta["activities"][train_idx],
        epochs=cfg.surrogate.epochs,
        lr=cfg.surrogate.lr,
        seed=rng.derive_seed(meta["dataset_seed"], 1),
        batch_size=cfg.surrogate.batch_size,
    )

    partition = make_partition(
        grid_shape[0], grid_shape[1], cfg.partition.block_h, cfg.partition.block_w
    )
    return PreparedData(
        activities=meta["activities"],
        subjects=meta["subjects"],
        rooms=meta["rooms"],
        resp_rates=meta["resp_rates"],
        member=meta["member"],
        splits=meta["splits"],
        bounded=bounded_arr,
        clean=clean,
        clipped=clipped,
        norm_stats=norm_stats,
        clip_c=clip_c,
        surrogate=model,
        partition=partition,
        grid_shape=grid_shape,
        freq_resolution=meta["freq_resolution"],
        dataset_seed=meta["dataset_seed"],
    )


def _importance_for(
    prep: PreparedData,
    mode: MechanismMode,
    idx: int,
    map_seed: int,
    cohort_map: ImportanceMap | None,
) -> ImportanceMap | None:
    if cohort_map is not None:
        return cohort_map
    if mode == MechanismMode.ADAPTIVE:
        return gradient_importance(
            prep.surrogate, prep.clipped[idx], int(prep.activities[idx])
        )
    if mode == MechanismMode.HEURISTIC:
        return energy_importance(
            BoundedFeature(values=prep.bounded[idx], norm_stats_id=prep.norm_stats.stats_id)
        )
    if mode == MechanismMode.RANDOM:
        return random_importance(prep.grid_shape, map_seed)
    return None


def cohort_importance(prep: PreparedData, mode: MechanismMode, seed: int) -> ImportanceMap:
    """One importance map for all releases, fitted on the training split."""
    train_idx = prep.splits["train"]
    if mode == MechanismMode.RANDOM:
        return random_importance(prep.grid_shape, seed)
    if mode == MechanismMode.HEURISTIC:
        mean = prep.bounded[train_idx].mean(axis=0)
        total = mean.sum()
        if total == 0:
            return uniform_map(prep.grid_shape)
        return ImportanceMap(weights=mean / total, mode=ImportanceMode.ENERGY)
    if mode == MechanismMode.ADAPTIVE:
        acc = np.zeros(prep.grid_shape)
        for i in train_idx:
            acc += gradient_importance(
                prep.surrogate, prep.clipped[i], int(prep.activities[i])
            ).weights
        return ImportanceMap(weights=acc / acc.sum(), mode=ImportanceMode.GRADIENT)
    raise InvalidArgument(f"no cohort importance for mode {mode.value}")


def run_release(
    cfg: ExperimentConfig,
    prep: PreparedData,
    mode: MechanismMode,
    eps_target: float,
    plan_index: int,
) -> ReleaseResult:
    """Release the train + nonmember windows under one (mode, eps) setting."""
    indices = np.concatenate([prep.splits["train"], prep.splits["nonmember"]])
    noise_base = rng.derive_seed(prep.dataset_seed, 20_000_000 + plan_index)

    if mode == MechanismMode.NODP:
        released = prep.clean[indices].copy()
        sigma_rows = [np.zeros(prep.partition.num_blocks)] * len(indices)
        return ReleaseResult(
            mode=mode,
            eps_target=math.inf,
            released=released,
            indices=indices,
            sigma_rows=sigma_rows,
            scale_ref=0.0,
            reported_eps=None,
            ledger_events=[],
        )

    alloc = cfg.allocation
    k_w = cfg.dp.releases_per_window
    cohort_map: ImportanceMap | None = None
    if mode == MechanismMode.UNIFORM:
        budgets_ref = uniform_budget(prep.partition.num_blocks, alloc.eps_min, alloc.eps_max)
    else:
        if alloc.scope == "cohort":
            cohort_map = cohort_importance(prep, mode, rng.derive_seed(noise_base, 1))
        ref_map = _importance_for(
            prep, mode, int(indices[0]), rng.derive_seed(noise_base, 5_000_000), cohort_map
        )
        params0 = ReleaseParams(
            partition=prep.partition,
            eps_min=alloc.eps_min,
            eps_max=alloc.eps_max,
            gamma=alloc.gamma,
        )
        budgets_ref = budgets_for_mode(mode, ref_map, params0)

    scale_ref = acct.calibrate_noise(
        eps_target, cfg.dp.delta, budgets_ref, prep.clip_c, releases_per_run=k_w
    )
    ref_sq = float(np.sum(budgets_ref.eps_per_block ** 2))

    delta2 = l2_sensitivity(prep.clip_c)
    released = np.empty((len(indices), prep.clean.shape[1]))
    sigma_rows: list[np.ndarray] = []
    ledger_events: list[acct.GaussianEvent] = []
    for j, idx in enumerate(map(int, indices)):
        if mode == MechanismMode.UNIFORM:
            budgets = budgets_ref
        else:
            imap = _importance_for(
                prep, mode, idx, rng.derive_seed(noise_base, 5_000_000 + j), cohort_map
            )
            params = ReleaseParams(
                partition=prep.partition,
                eps_min=alloc.eps_min,
                eps_max=alloc.eps_max,
                gamma=alloc.gamma,
            )
            budgets = budgets_for_mode(mode, imap, params)
        # Same composed eps(delta) for every window: scale s with the
        # budget's root-sum-square (see module docstring).
        s_w = scale_ref * math.sqrt(float(np.sum(budgets.eps_per_block ** 2)) / ref_sq)
        params = ReleaseParams(
            partition=prep.partition,
            eps_min=alloc.eps_min,
            eps_max=alloc.eps_max,
            gamma=alloc.gamma,
            scale=s_w,
            seed=rng.derive_seed(noise_base, j),
        )
        noisy, events = release(prep.clipped[idx], None if mode == MechanismMode.UNIFORM else imap, mode, params)
        released[j] = noisy.values.reshape(-1)
        sigma_rows.append(noisy.sigma_per_block)
        if j == 0:
            ledger_events = list(events) * k_w

    state = acct.compose(acct.fresh_state(cfg.dp.delta, cfg.dp.budget_cap), ledger_events)
    reported_eps = acct.to_dp(state)
    return ReleaseResult(
        mode=mode,
        eps_target=eps_target,
        released=released,
        indices=indices,
        sigma_rows=sigma_rows,
        scale_ref=scale_ref,
        reported_eps=reported_eps,
        ledger_events=ledger_events,
    )


def _standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return mu, sd


def consumer_utility(
    cfg: ExperimentConfig,
    prep: PreparedData,
    result: ReleaseResult,
    run_seed: int,
) -> dict[str, float]:
    """Train the consumer on released training features, deploy on clean test."""
    train_pos = np.arange(len(prep.splits["train"]))  # released rows are train-first
    x_train = result.released[train_pos]
    y_train = prep.activities[prep.splits["train"]]
    test_idx = prep.splits["test"]
    x_test = prep.clean[test_idx]
    y_test = prep.activities[test_idx]

    mu, sd = _standardize(x_train)
    model = SurrogateModel.zeros(cfg.generator.num_activities, x_train.shape[1])
    model = train(
        model,
        (x_train - mu) / sd,
        y_train,
        epochs=cfg.consumer.epochs,
        lr=cfg.consumer.lr,
        seed=rng.derive_seed(prep.dataset_seed, 40_000_000 + run_seed),
        batch_size=cfg.consumer.batch_size,
    )
    metrics = evaluate(model, (x_test - mu) / sd, y_test)

    if cfg.respiration.enabled and cfg.generator.respiration_activity >= 0:
        metrics.update(_respiration_metrics(cfg, prep, result, mu, sd))
    return metrics


def _respiration_metrics(
    cfg: ExperimentConfig,
    prep: PreparedData,
    result: ReleaseResult,
    mu: np.ndarray,
    sd: np.ndarray,
) -> dict[str, float]:
    gen = cfg.generator
    lo, hi = gen.respiration_band_hz
    n_bins = cfg.respiration.rate_bins
    edges = np.linspace(lo, hi, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])

    train_pos = np.arange(len(prep.splits["train"]))
    train_idx = prep.splits["train"]
    resp_train = train_pos[prep.activities[train_idx] == gen.respiration_activity]
    test_idx = prep.splits["test"]
    resp_test = test_idx[prep.activities[test_idx] == gen.respiration_activity]
    out: dict[str, float] = {}
    if resp_train.size and resp_test.size:
        rates_tr = prep.resp_rates[train_idx[resp_train]]
        bins_tr = np.clip(np.digitize(rates_tr, edges) - 1, 0, n_bins - 1)
        model = SurrogateModel.zeros(n_bins, result.released.shape[1])
        model = train(
            model,
            (result.released[resp_train] - mu) / sd,
            bins_tr,
            epochs=cfg.consumer.epochs,
            lr=cfg.consumer.lr,
            seed=rng.derive_seed(prep.dataset_seed, 50_000_000),
            batch_size=cfg.consumer.batch_size,
        )
        p = predict_proba(model, (prep.clean[resp_test] - mu) / sd)
        decoded = p @ centers
        out["rate_mae"] = float(np.mean(np.abs(decoded - prep.resp_rates[resp_test])))

    # Waveform fidelity: correlation of the released vs clean band-energy
    # profile over time, averaged over released respiration windows.
    df = prep.freq_resolution
    c_lo, c_hi = int(np.ceil(lo / df)), int(np.floor(hi / df)) + 1
    c_hi = min(max(c_hi, c_lo + 1), prep.grid_shape[1])
    t_f, f = prep.grid_shape
    corrs = []
    for pos in resp_train:
        rel = result.released[pos].reshape(t_f, f)[:, c_lo:c_hi].mean(axis=1)
        ref = prep.clean[result.indices[pos]].reshape(t_f, f)[:, c_lo:c_hi].mean(axis=1)
        if rel.std() < 1e-12 or ref.std() < 1e-12:
            corrs.append(0.0)
        else:
            corrs.append(float(np.corrcoef(rel, ref)[0, 1]))
    if corrs:
        out["waveform_corr"] = float(np.mean(corrs))
    return out


def leakage_metrics(
    cfg: ExperimentConfig,
    prep: PreparedData,
    result: ReleaseResult,
    run_seed: int,
) -> dict[str, float]:
    out: dict[str, float] = {}
    atk = cfg.attacks
    train_pos = np.arange(len(prep.splits["train"]))
    train_idx = prep.splits["train"]
    attack_seed = rng.derive_seed(prep.dataset_seed, 60_000_000 + run_seed)

    if "subject" in atk.attributes:
        rep = attribute_inference(
            result.released[train_pos],
            prep.subjects[train_idx],
            cfg.generator.num_subjects,
            seed=attack_seed,
            epochs=atk.epochs,
            lr=atk.lr,
        )
        out["subject_top1"] = rep.top1
        out["subject_macro_f1"] = rep.macro_f1
    if "room" in atk.attributes:
        rep = attribute_inference(
            result.released[train_pos],
            prep.rooms[train_idx],
            cfg.generator.num_rooms,
            seed=rng.derive_seed(attack_seed, 1),
            epochs=atk.epochs,
            lr=atk.lr,
        )
        out["room_top1"] = rep.top1
        out["room_macro_f1"] = rep.macro_f1

    mia = shadow_mia(
        released=result.released,
        clean=prep.clean[result.indices],
        task_labels=prep.activities[result.indices],
        member_flags=prep.member[result.indices],
        num_task_classes=cfg.generator.num_activities,
        shadow_count=atk.shadow_count,
        seed=rng.derive_seed(attack_seed, 2),
        epochs=atk.epochs,
        lr=atk.lr,
    )
    out["mia_auc"] = mia.auc
    out["mia_best_acc"] = mia.best_threshold_accuracy
    out["mia_advantage"] = mia.advantage
    return out


def _plan(cfg: ExperimentConfig) -> list[tuple[MechanismMode, float]]:
    plan: list[tuple[MechanismMode, float]] = []
    for m in cfg.dp.modes:
        mode = MechanismMode(m)
        if mode == MechanismMode.NODP:
            plan.append((mode, math.inf))
        else:
            plan.extend((mode, e) for e in cfg.dp.eps_targets)
    return plan


def _eps_tag(eps: float) -> str:
    return "inf" if math.isinf(eps) else f"{eps:g}"


def write_release_artifacts(
    cfg: ExperimentConfig,
    prep: PreparedData,
    result: ReleaseResult,
    run_dir: str,
    run_seed: int,
) -> None:
    fio.ensure_dir(run_dir)
    ledger_path = os.path.join(run_dir, "ledger.txt")
    grid = acct.default_alpha_grid()
    acct.write_ledger_header(ledger_path, grid, cfg.dp.delta)
    if result.ledger_events:
        acct.append_events(ledger_path, result.ledger_events)

    manifest = {
        "mode": result.mode.value,
        "eps_target": None if math.isinf(result.eps_target) else result.eps_target,
        "reported_eps": result.reported_eps,
        "delta": cfg.dp.delta,
        "guarantee_label": (
            "formal"
            if result.mode in (MechanismMode.ADAPTIVE, MechanismMode.HEURISTIC)
            and cfg.allocation.scope == "cohort"
            else GUARANTEE_LABELS[result.mode]
        ),
        "norm_stats_id": prep.norm_stats.stats_id,
        "clip_c": prep.clip_c,
        "partition": {
            "block_h": cfg.partition.block_h,
            "block_w": cfg.partition.block_w,
            "num_blocks": prep.partition.num_blocks,
            "grid": list(prep.grid_shape),
        },
        "allocation": {
            "eps_min": cfg.allocation.eps_min,
            "eps_max": cfg.allocation.eps_max,
            "gamma": cfg.allocation.gamma,
            "scope": cfg.allocation.scope,
        },
        "calibration_scale": result.scale_ref,
        "releases_per_window": cfg.dp.releases_per_window,
        "rng_stream_id": rng.STREAM_ID,
        "run_seed": run_seed,
        "alpha_grid": [float(a) for a in grid],
    }
    with open(os.path.join(run_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")

    fio.write_release_bundle(
        os.path.join(run_dir, "features.csv"),
        {
            "T_f": prep.grid_shape[0],
            "F": prep.grid_shape[1],
            "norm_stats_id": prep.norm_stats.stats_id,
            "mode": result.mode.value,
            "eps": _eps_tag(result.eps_target),
            "seed": run_seed,
        },
        [int(i) for i in result.indices],
        [result.released[j] for j in range(result.released.shape[0])],
    )
    sig_path = os.path.join(run_dir, "sigmas.csv")
    with open(sig_path, "w", encoding="utf-8") as fh:
        fh.write("window_id," + ",".join(f"sigma_{b}" for b in range(prep.partition.num_blocks)) + "\n")
        for j, idx in enumerate(result.indices):
            fh.write(f"{int(idx)}," + ",".join(repr(float(s)) for s in result.sigma_rows[j]) + "\n")


def run_experiment(cfg: ExperimentConfig, output_dir: str | None = None) -> str:
    """Run the full sweep; returns the path of the curves CSV."""
    out_root = fio.ensure_dir(output_dir or cfg.run.output_dir)
    rows: list[tuple[str, float, int, str, float]] = []
    plan = _plan(cfg)

    for run_seed in cfg.run.seeds:
        prep = prepare(cfg, run_seed)
        for plan_index, (mode, eps) in enumerate(plan):
            result = run_release(cfg, prep, mode, eps, plan_index)
            run_dir = os.path.join(
                out_root, f"seed{run_seed}", f"{mode.value}_eps{_eps_tag(eps)}"
            )
            write_release_artifacts(cfg, prep, result, run_dir, run_seed)

            metrics = consumer_utility(cfg, prep, result, run_seed)
            if result.reported_eps is not None:
                metrics["reported_eps"] = result.reported_eps
            if cfg.attacks.enabled and mode.value in cfg.attacks.modes:
                metrics.update(leakage_metrics(cfg, prep, result, run_seed))
            for name in sorted(metrics):
                rows.append((mode.value, result.eps_target, run_seed, name, metrics[name]))

    curves_path = os.path.join(out_root, "curves.csv")
    fio.write_curves(curves_path, rows)
    return curves_path


def audit(ledger_path: str, manifest_path: str) -> float:
    """Recompute eps(delta) from the ledger and check it against the manifest."""
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    grid, delta, events = acct.read_ledger(ledger_path)
    if abs(delta - manifest["delta"]) > 0:
        raise AuditError(
            f"ledger delta {delta} does not match manifest delta {manifest['delta']}"
        )
    manifest_grid = np.asarray(manifest["alpha_grid"], dtype=np.float64)
    if manifest_grid.shape != grid.shape or not np.array_equal(manifest_grid, grid):
        raise AuditError("ledger alpha grid does not match manifest")
    state = acct.compose(acct.fresh_state(delta, alpha_grid=grid), events)
    eps = acct.to_dp(state) if events else acct.eps_floor(delta, grid)
    reported = manifest.get("reported_eps")
    if reported is None:
        if events:
            raise AuditError("manifest reports no eps but the ledger has events")
        return eps
    if abs(eps - reported) > 1e-9:
        raise AuditError(
            f"replayed eps {eps!r} differs from manifest reported_eps {reported!r}"
        )
    return eps
