"""File formats for windows, features, stats, models and result tables.

All floats are written with ``repr`` so values round-trip exactly; outputs
are byte-stable across runs with the same configuration and seeds.

Formats
-------
window file      one header line ``T=..,N_c=..,sample_rate=..,activity=..,
                 subject=..,room=..,member=..,resp_rate=..`` followed by T
                 CSV rows ``t,re0,im0,re1,im1,...`` (interleaved real/imag
                 per subcarrier).
window manifest  CSV: window_id,file,activity,subject,room,split,member,resp_rate
norm stats       one header line ``F=..,eps0=..,stats_id=..`` then two CSV
                 rows (per-frequency min, then max, of log(1+S)).
feature file     one header line ``T_f=..,F=..,norm_stats_id=..`` for bounded
                 features, extended with ``mode=..,partition=..,seed_id=..,
                 sigma=..|..`` for released features; then T_f CSV rows.
model file       one CSV row of biases, then one weight row per class.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import InvalidArgument
from .mechanism import MechanismMode, NoisyFeature
from .signal_gen import CsiWindow
from .spectrogram import BoundedFeature, NormStats
from .surrogate import SurrogateModel


def _fmt(value: float) -> str:
    return repr(float(value))


def _row(values) -> str:
    return ",".join(_fmt(v) for v in values)


# --- windows -----------------------------------------------------------------

def write_window(path: str, w: CsiWindow, sample_rate: float) -> None:
    t_len, n_c = w.samples.shape
    resp = "" if w.resp_rate_hz is None else _fmt(w.resp_rate_hz)
    header = (
        f"T={t_len},N_c={n_c},sample_rate={_fmt(sample_rate)},"
        f"activity={w.activity_label},subject={w.subject_id},room={w.room_id},"
        f"member={int(w.member_flag)},resp_rate={resp}"
    )
    lines = [header]
    for i in range(t_len):
        cells = [_fmt(w.timestamps[i])]
        for c in range(n_c):
            cells.append(_fmt(w.samples[i, c].real))
            cells.append(_fmt(w.samples[i, c].imag))
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_window(path: str) -> tuple[CsiWindow, float]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise InvalidArgument(f"{path}: empty window file")
    meta = dict(item.split("=", 1) for item in lines[0].split(","))
    t_len, n_c = int(meta["T"]), int(meta["N_c"])
    ts = np.empty(t_len)
    samples = np.empty((t_len, n_c), dtype=np.complex128)
    for i, line in enumerate(lines[1:1 + t_len]):
        cells = [float(v) for v in line.split(",")]
        ts[i] = cells[0]
        re = np.array(cells[1::2])
        im = np.array(cells[2::2])
        samples[i] = re + 1j * im
    w = CsiWindow(
        samples=samples,
        timestamps=ts,
        activity_label=int(meta["activity"]),
        subject_id=int(meta["subject"]),
        room_id=int(meta["room"]),
        member_flag=bool(int(meta["member"])),
        resp_rate_hz=float(meta["resp_rate"]) if meta["resp_rate"] else None,
    )
    return w, float(meta["sample_rate"])


def write_window_manifest(path: str, rows: list[dict]) -> None:
    lines = ["window_id,file,activity,subject,room,split,member,resp_rate"]
    for r in rows:
        resp = "" if r.get("resp_rate") is None else _fmt(r["resp_rate"])
        lines.append(
            f"{r['window_id']},{r['file']},{r['activity']},{r['subject']},"
            f"{r['room']},{r['split']},{int(r['member'])},{resp}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_window_manifest(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    out = []
    for line in lines[1:]:
        if not line.strip():
            continue
        wid, file, act, sub, room, split, member, resp = line.split(",")
        out.append({
            "window_id": int(wid), "file": file, "activity": int(act),
            "subject": int(sub), "room": int(room), "split": split,
            "member": bool(int(member)),
            "resp_rate": float(resp) if resp else None,
        })
    return out


# --- norm stats --------------------------------------------------------------

def write_norm_stats(path: str, stats: NormStats) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"F={stats.num_bins},eps0={_fmt(stats.eps0)},stats_id={stats.stats_id}\n")
        fh.write(_row(stats.log_min) + "\n")
        fh.write(_row(stats.log_max) + "\n")


def read_norm_stats(path: str) -> NormStats:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    meta = dict(item.split("=", 1) for item in lines[0].split(","))
    return NormStats(
        log_min=np.array([float(v) for v in lines[1].split(",")]),
        log_max=np.array([float(v) for v in lines[2].split(",")]),
        eps0=float(meta["eps0"]),
        stats_id=meta["stats_id"],
    )


# --- features ----------------------------------------------------------------

def write_bounded_feature(path: str, f: BoundedFeature) -> None:
    t_f, n_f = f.values.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"T_f={t_f},F={n_f},norm_stats_id={f.norm_stats_id}\n")
        for i in range(t_f):
            fh.write(_row(f.values[i]) + "\n")


def write_noisy_feature(path: str, f: NoisyFeature, norm_stats_id: str) -> None:
    t_f, n_f = f.values.shape
    sigma = "|".join(_fmt(s) for s in f.sigma_per_block)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"T_f={t_f},F={n_f},norm_stats_id={norm_stats_id},"
            f"mode={f.mode.value},partition={f.partition_label},"
            f"seed_id={f.rng_seed_id},sigma={sigma}\n"
        )
        for i in range(t_f):
            fh.write(_row(f.values[i]) + "\n")


def read_feature_matrix(path: str) -> tuple[dict, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    meta = dict(item.split("=", 1) for item in lines[0].split(","))
    rows = [np.array([float(v) for v in line.split(",")]) for line in lines[1:] if line]
    return meta, np.vstack(rows)


# --- model -------------------------------------------------------------------

def write_model(path: str, model: SurrogateModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_row(model.bias) + "\n")
        for k in range(model.class_count):
            fh.write(_row(model.weights[k]) + "\n")


def read_model(path: str) -> SurrogateModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line]
    bias = np.array([float(v) for v in lines[0].split(",")])
    weights = np.vstack([np.array([float(v) for v in line.split(",")]) for line in lines[1:]])
    return SurrogateModel(weights=weights, bias=bias)


# --- release bundles (one file for many windows) ------------------------------

def write_release_bundle(
    path: str,
    header_meta: dict,
    window_ids: list[int],
    matrices: list[np.ndarray],
) -> None:
    """All released features of one (mode, eps, seed) run, one row per window."""
    meta = ",".join(f"{k}={v}" for k, v in header_meta.items())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(meta + "\n")
        for wid, mat in zip(window_ids, matrices):
            fh.write(f"{wid}," + _row(np.asarray(mat).reshape(-1)) + "\n")


def read_release_bundle(path: str) -> tuple[dict, list[int], np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    meta = dict(item.split("=", 1) for item in lines[0].split(","))
    ids, rows = [], []
    for line in lines[1:]:
        if not line:
            continue
        cells = line.split(",")
        ids.append(int(cells[0]))
        rows.append(np.array([float(v) for v in cells[1:]]))
    return meta, ids, np.vstack(rows)


# --- result tables -----------------------------------------------------------

def write_curves(path: str, rows: list[tuple[str, float, int, str, float]]) -> None:
    """mode,eps,seed,metric,value rows (deterministic order is the caller's job)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("mode,eps,seed,metric,value\n")
        for mode, eps, seed, metric, value in rows:
            fh.write(f"{mode},{_fmt(eps)},{seed},{metric},{_fmt(value)}\n")


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
