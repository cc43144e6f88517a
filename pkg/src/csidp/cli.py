"""Command-line interface.

Subcommands::

    generate   write dataset windows + manifest to a directory
    fit        fit norm stats, clip threshold and the surrogate from windows
    release    release windows under one (mode, eps) using fitted artifacts
    evaluate   consumer utility of a release (train on released, test clean)
    attack     attribute + membership attacks against a release
    curves     run the full experiment sweep and emit curves.csv
    audit      replay a ledger and check it against its manifest

Exit codes: 0 ok, 2 config validation, 3 calibration failure,
4 output/data errors, 5 audit failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import accountant as acct
from . import io as fio
from . import rngstream as rng
from .attacks import attribute_inference, shadow_mia
from .config import ExperimentConfig, default_config, load_config
from .errors import AuditError, CalibrationError, ConfigError, InvalidArgument
from .experiment import (
    PreparedData,
    audit,
    consumer_utility,
    iter_dataset_windows,
    leakage_metrics,
    run_experiment,
    run_release,
    write_release_artifacts,
)
from .mechanism import MechanismMode
from .sensitivity import clip_l2
from .spectrogram import normalize_bounded, stft_magnitude
from .surrogate import SurrogateModel, train
from .allocation import make_partition


def _load_cfg(path: str | None) -> ExperimentConfig:
    return default_config() if path is None else load_config(path)


def cmd_generate(args) -> int:
    cfg = _load_cfg(args.config)
    out = fio.ensure_dir(args.out)
    win_dir = fio.ensure_dir(os.path.join(out, "windows"))
    rows = []
    for i, split, w in iter_dataset_windows(cfg, args.seed):
        if args.limit is not None and i >= args.limit:
            break
        fname = f"windows/w{i:06d}.csv"
        fio.write_window(os.path.join(out, fname), w, cfg.generator.sample_rate)
        rows.append({
            "window_id": i, "file": fname, "activity": w.activity_label,
            "subject": w.subject_id, "room": w.room_id, "split": split,
            "member": w.member_flag, "resp_rate": w.resp_rate_hz,
        })
    fio.write_window_manifest(os.path.join(out, "manifest.csv"), rows)
    print(f"wrote {len(rows)} windows to {out}")
    return 0


def _load_prepared(cfg: ExperimentConfig, data_dir: str, fit_dir: str,
                   seed: int) -> PreparedData:
    """Rebuild a PreparedData from staged files (windows + fit artifacts)."""
    manifest = fio.read_window_manifest(os.path.join(data_dir, "manifest.csv"))
    norm_stats = fio.read_norm_stats(os.path.join(fit_dir, "norm_stats.csv"))
    with open(os.path.join(fit_dir, "clip.json"), "r", encoding="utf-8") as fh:
        clip_c = json.load(fh)["clip_c"]
    model = fio.read_model(os.path.join(fit_dir, "surrogate.csv"))

    n = len(manifest)
    activities = np.array([r["activity"] for r in manifest])
    subjects = np.array([r["subject"] for r in manifest])
    rooms = np.array([r["room"] for r in manifest])
    resp = np.array([np.nan if r["resp_rate"] is None else r["resp_rate"] for r in manifest])
    member = np.array([r["member"] for r in manifest])
    splits: dict[str, np.ndarray] = {}
    for name in ("train", "val", "test", "nonmember"):
        splits[name] = np.array(
            [i for i, r in enumerate(manifest) if r["split"] == name], dtype=np.int64
        )

    bounded_list, clipped = [], []
    for r in manifest:
        w, sample_rate = fio.read_window(os.path.join(data_dir, r["file"]))
        spec = stft_magnitude(w, cfg.stft, sample_rate)
        b = normalize_bounded(spec, norm_stats)
        bounded_list.append(b.values)
        clipped.append(clip_l2(b, clip_c))
    bounded = np.stack(bounded_list)
    clean = np.stack([c.values for c in clipped])
    grid_shape = bounded_list[0].shape
    partition = make_partition(grid_shape[0], grid_shape[1],
                               cfg.partition.block_h, cfg.partition.block_w)
    return PreparedData(
        activities=activities, subjects=subjects, rooms=rooms, resp_rates=resp,
        member=member, splits=splits, bounded=bounded, clean=clean,
        clipped=clipped, norm_stats=norm_stats, clip_c=clip_c, surrogate=model,
        partition=partition, grid_shape=grid_shape,
        freq_resolution=cfg.generator.sample_rate / cfg.stft.fft_size,
        dataset_seed=rng.derive_seed(cfg.generator.seed, seed),
    )


def cmd_fit(args) -> int:
    cfg = _load_cfg(args.config)
    manifest = fio.read_window_manifest(os.path.join(args.data, "manifest.csv"))
    train_rows = [r for r in manifest if r["split"] == "train"]
    if not train_rows:
        raise InvalidArgument("no training windows in the manifest")
    specs, feats, labels = [], [], []
    from .spectrogram import fit_norm_stats
    from .sensitivity import fit_clip_threshold
    for r in train_rows:
        w, sample_rate = fio.read_window(os.path.join(args.data, r["file"]))
        specs.append(stft_magnitude(w, cfg.stft, sample_rate))
        labels.append(r["activity"])
    stats = fit_norm_stats(specs, eps0=cfg.stft.eps0)
    bounded = [normalize_bounded(s, stats) for s in specs]
    clip_c = fit_clip_threshold(bounded, cfg.run.clip_percentile)
    feats = np.stack([clip_l2(b, clip_c).values for b in bounded])

    model = SurrogateModel.zeros(cfg.generator.num_activities, feats.shape[1])
    model = train(model, feats, np.array(labels),
                  epochs=cfg.surrogate.epochs, lr=cfg.surrogate.lr,
                  seed=rng.derive_seed(cfg.generator.seed, 1),
                  batch_size=cfg.surrogate.batch_size)

    out = fio.ensure_dir(args.out)
    fio.write_norm_stats(os.path.join(out, "norm_stats.csv"), stats)
    with open(os.path.join(out, "clip.json"), "w", encoding="utf-8") as fh:
        json.dump({"clip_c": clip_c, "percentile": cfg.run.clip_percentile}, fh)
        fh.write("\n")
    fio.write_model(os.path.join(out, "surrogate.csv"), model)
    print(f"fit artifacts in {out} (clip_c={clip_c:.4f}, stats_id={stats.stats_id})")
    return 0


def cmd_release(args) -> int:
    cfg = _load_cfg(args.config)
    mode = MechanismMode(args.mode)
    eps = math.inf if mode == MechanismMode.NODP else float(args.eps)
    if mode != MechanismMode.NODP and eps <= 0:
        raise InvalidArgument("--eps must be positive")
    prep = _load_prepared(cfg, args.data, args.fit, args.seed)
    result = run_release(cfg, prep, mode, eps, plan_index=0)
    out = fio.ensure_dir(args.out)
    write_release_artifacts(cfg, prep, result, out, args.seed)
    feat_dir = fio.ensure_dir(os.path.join(out, "features"))
    t_f, n_f = prep.grid_shape
    from .mechanism import NoisyFeature
    for j, idx in enumerate(result.indices):
        nf = NoisyFeature(
            values=result.released[j].reshape(t_f, n_f),
            sigma_per_block=result.sigma_rows[j],
            partition_label=prep.partition.label(),
            mode=mode,
            rng_seed_id=int(idx),
        )
        fio.write_noisy_feature(
            os.path.join(feat_dir, f"f{int(idx):06d}.csv"), nf, prep.norm_stats.stats_id
        )
    print(f"released {len(result.indices)} windows to {out} "
          f"(reported_eps={result.reported_eps})")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args.config)
    prep = _load_prepared(cfg, args.data, args.fit, args.seed)
    meta, ids, released = fio.read_release_bundle(os.path.join(args.release, "features.csv"))
    mode = MechanismMode(meta["mode"])
    eps = math.inf if meta["eps"] == "inf" else float(meta["eps"])
    from .experiment import ReleaseResult
    result = ReleaseResult(
        mode=mode, eps_target=eps, released=released,
        indices=np.array(ids, dtype=np.int64),
        sigma_rows=[], scale_ref=0.0, reported_eps=None, ledger_events=[],
    )
    metrics = consumer_utility(cfg, prep, result, args.seed)
    out_path = os.path.join(args.release, "utility.csv")
    fio.write_curves(out_path, [(mode.value, eps, args.seed, k, metrics[k])
                                for k in sorted(metrics)])
    for k in sorted(metrics):
        print(f"{k}: {metrics[k]:.4f}")
    return 0


def cmd_attack(args) -> int:
    cfg = _load_cfg(args.config)
    prep = _load_prepared(cfg, args.data, args.fit, args.seed)
    meta, ids, released = fio.read_release_bundle(os.path.join(args.release, "features.csv"))
    mode = MechanismMode(meta["mode"])
    eps = math.inf if meta["eps"] == "inf" else float(meta["eps"])
    from .experiment import ReleaseResult
    result = ReleaseResult(
        mode=mode, eps_target=eps, released=released,
        indices=np.array(ids, dtype=np.int64),
        sigma_rows=[], scale_ref=0.0, reported_eps=None, ledger_events=[],
    )
    metrics = leakage_metrics(cfg, prep, result, args.seed)
    out_path = os.path.join(args.release, "attacks.csv")
    fio.write_curves(out_path, [(mode.value, eps, args.seed, k, metrics[k])
                                for k in sorted(metrics)])
    for k in sorted(metrics):
        print(f"{k}: {metrics[k]:.4f}")
    return 0


def cmd_curves(args) -> int:
    cfg = _load_cfg(args.config)
    path = run_experiment(cfg, args.out)
    print(f"curves written to {path}")
    return 0


def cmd_audit(args) -> int:
    eps = audit(args.ledger, args.manifest)
    print(f"audit ok: eps(delta) = {eps!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csidp",
        description="Differentially private CSI spectrogram feature release",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate dataset windows")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit normalization, clipping and surrogate")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("release", help="release features under one mode/eps")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--mode", required=True,
                   choices=[m.value for m in MechanismMode])
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_release)

    p = sub.add_parser("evaluate", help="consumer utility of a release")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--release", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("attack", help="leakage attacks against a release")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--release", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("curves", help="run the full sweep and emit curves.csv")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("audit", help="replay a ledger against its manifest")
    p.add_argument("--ledger", required=True)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv: list[str] | None = None) -> int:
    # CSIDP_OUTPUT_DIR overrides output locations, per the documented contract.
    parser = build_parser()
    args = parser.parse_args(argv)
    env_out = os.environ.get("CSIDP_OUTPUT_DIR")
    if env_out and getattr(args, "out", None) is None and args.command == "curves":
        args.out = env_out
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CalibrationError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return 3
    except (OSError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except AuditError as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
