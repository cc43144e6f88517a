"""Empirical leakage harness: membership and attribute inference.

The membership attack follows the shadow-model recipe: the attacker
partitions its corpus of released features into M folds, trains one shadow
task classifier per fold, labels each row member/non-member *of that
shadow*, and fits a binary attack classifier on per-row attack features.
The fitted attack is then applied to the real release, where a
"target-mimic" task model is trained on the flagged member rows.  Attack
features combine the shadow/mimic confidence vector with the distance from
the candidate's recomputable clean feature to the nearest released row, so
the attack degrades gracefully as release noise grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidArgument
from .surrogate import SurrogateModel, predict_proba, train
from . import rngstream as rng


@dataclass
class AttackReport:
    auc: float | None = None
    best_threshold_accuracy: float | None = None
    advantage: float | None = None
    top1: float | None = None
    macro_f1: float | None = None
    per_class_top1: dict[int, float] | None = None


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-based AUC (Mann-Whitney); ties contribute one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InvalidArgument("roc_auc needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def threshold_metrics(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """(best attainable accuracy, max TPR - FPR) over all score thresholds."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InvalidArgument("threshold metrics need both classes present")
    order = np.argsort(-scores, kind="stable")
    sorted_labels = labels[order]
    # Cut after k highest scores (k = 0 .. n): predictions are "member".
    tp = np.concatenate([[0], np.cumsum(sorted_labels)])
    fp = np.concatenate([[0], np.cumsum(~sorted_labels)])
    acc = (tp + (n_neg - fp)) / labels.size
    adv = tp / n_pos - fp / n_neg
    return float(acc.max()), float(adv.max())


def _standardize_fit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return mu, sd


def _train_softmax(x: np.ndarray, y: np.ndarray, num_classes: int, seed: int,
                   epochs: int, lr: float, batch_size: int = 128) -> SurrogateModel:
    model = SurrogateModel.zeros(num_classes, x.shape[1])
    return train(model, x, y, epochs=epochs, lr=lr, seed=seed, batch_size=batch_size)


def attribute_inference(
    features: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    seed: int,
    train_frac: float = 0.7,
    epochs: int = 60,
    lr: float = 0.5,
) -> AttackReport:
    """Attacker trains a classifier on released features to predict a label.

    Deterministic seeded split; reports held-out top-1, macro-F1 and
    per-class top-1.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[0] != labels.shape[0] or labels.size == 0:
        raise InvalidArgument("features and labels must be non-empty and aligned")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise InvalidArgument("labels out of range")

    n = labels.size
    order = np.argsort(rng.uniforms(rng.DOM_SPLIT, seed, 0, n), kind="stable")
    n_train = max(1, int(round(train_frac * n)))
    tr, ev = order[:n_train], order[n_train:]
    if ev.size == 0:
        raise InvalidArgument("evaluation split is empty; lower train_frac")

    mu, sd = _standardize_fit(features[tr])
    x_tr = (features[tr] - mu) / sd
    x_ev = (features[ev] - mu) / sd
    model = _train_softmax(x_tr, labels[tr], num_classes, seed, epochs, lr)

    pred = predict_proba(model, x_ev).argmax(axis=1)
    y_ev = labels[ev]
    top1 = float(np.mean(pred == y_ev))
    f1s, per_class = [], {}
    for c in range(num_classes):
        tp = int(np.sum((pred == c) & (y_ev == c)))
        fp = int(np.sum((pred == c) & (y_ev != c)))
        fn = int(np.sum((pred != c) & (y_ev == c)))
        denom = 2 * tp + fp + fn
        f1s.append(0.0 if denom == 0 else 2.0 * tp / denom)
        support = int(np.sum(y_ev == c))
        per_class[c] = float(tp / support) if support else 0.0
    return AttackReport(top1=top1, macro_f1=float(np.mean(f1s)), per_class_top1=per_class)


def _min_distance(queries: np.ndarray, refs: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Per-query minimum Euclidean distance to the reference rows."""
    ref_sq = np.sum(refs * refs, axis=1)
    out = np.empty(queries.shape[0])
    for start in range(0, queries.shape[0], chunk):
        q = queries[start:start + chunk]
        d2 = np.sum(q * q, axis=1)[:, None] - 2.0 * (q @ refs.T) + ref_sq[None, :]
        out[start:start + chunk] = np.sqrt(np.maximum(d2.min(axis=1), 0.0))
    return out


def _attack_features(
    model: SurrogateModel,
    mu: np.ndarray,
    sd: np.ndarray,
    released: np.ndarray,
    clean: np.ndarray,
    task_labels: np.ndarray,
    ref_release: np.ndarray,
) -> np.ndarray:
    """Per-row attack inputs: sorted confidences, true-class prob, entropy,
    margin, and log nearest-release distance of the clean feature."""
    p = predict_proba(model, (released - mu) / sd)
    idx = np.arange(p.shape[0])
    sorted_p = np.sort(p, axis=1)[:, ::-1]
    p_true = p[idx, task_labels]
    entropy = -np.sum(p * np.log(p + 1e-12), axis=1)
    margin = sorted_p[:, 0] - (sorted_p[:, 1] if p.shape[1] > 1 else 0.0)
    dmin = np.log1p(_min_distance(clean, ref_release))
    return np.column_stack([sorted_p, p_true, entropy, margin, dmin])


def shadow_mia(
    released: np.ndarray,
    clean: np.ndarray,
    task_labels: np.ndarray,
    member_flags: np.ndarray,
    num_task_classes: int,
    shadow_count: int = 4,
    seed: int = 0,
    epochs: int = 40,
    lr: float = 0.5,
    eval_balance: bool = True,
) -> AttackReport:
    """Shadow-model membership inference on released features."""
    released = np.asarray(released, dtype=np.float64)
    clean = np.asarray(clean, dtype=np.float64)
    task_labels = np.asarray(task_labels, dtype=np.int64)
    member_flags = np.asarray(member_flags).astype(bool)
    n = released.shape[0]
    if shadow_count < 2:
        raise InvalidArgument("need at least 2 shadow models")
    if not (clean.shape == released.shape and task_labels.size == n == member_flags.size):
        raise InvalidArgument("released/clean/labels/flags must be aligned")
    if member_flags.all() or not member_flags.any():
        raise InvalidArgument("both membership classes must be present")

    # Shadow stage: fold membership is the attacker's ground truth.
    order = np.argsort(rng.uniforms(rng.DOM_SPLIT, seed, 1, n), kind="stable")
    folds = np.array_split(order, shadow_count)
    shadow_x, shadow_y = [], []
    for m, fold in enumerate(folds):
        mu, sd = _standardize_fit(released[fold])
        model = _train_softmax((released[fold] - mu) / sd, task_labels[fold],
                               num_task_classes, rng.derive_seed(seed, 100 + m),
                               epochs, lr)
        feats = _attack_features(model, mu, sd, released, clean, task_labels,
                                 released[fold])
        in_fold = np.zeros(n, dtype=bool)
        in_fold[fold] = True
        shadow_x.append(feats)
        shadow_y.append(in_fold.astype(np.int64))
    ax = np.concatenate(shadow_x)
    ay = np.concatenate(shadow_y)
    amu, asd = _standardize_fit(ax)
    attack_model = _train_softmax((ax - amu) / asd, ay, 2,
                                  rng.derive_seed(seed, 200), epochs, lr)

    # Target stage: mimic the producer by training on the flagged members.
    members = np.where(member_flags)[0]
    non_members = np.where(~member_flags)[0]
    mu, sd = _standardize_fit(released[members])
    mimic = _train_softmax((released[members] - mu) / sd, task_labels[members],
                           num_task_classes, rng.derive_seed(seed, 300), epochs, lr)

    if eval_balance and members.size != non_members.size:
        k = min(members.size, non_members.size)
        pick = np.argsort(rng.uniforms(rng.DOM_SPLIT, seed, 2, members.size),
                          kind="stable")[:k]
        members = members[pick]
        pick = np.argsort(rng.uniforms(rng.DOM_SPLIT, seed, 3, non_members.size),
                          kind="stable")[:k]
        non_members = non_members[pick]
    targets = np.concatenate([members, non_members])

    feats = _attack_features(mimic, mu, sd, released[targets], clean[targets],
                             task_labels[targets], released[np.where(member_flags)[0]])
    scores = predict_proba(attack_model, (feats - amu) / asd)[:, 1]
    truth = member_flags[targets]
    best_acc, advantage = threshold_metrics(scores, truth)
    return AttackReport(
        auc=roc_auc(scores, truth),
        best_threshold_accuracy=best_acc,
        advantage=advantage,
    )
