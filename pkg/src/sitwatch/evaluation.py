"""Ground-truth labeling, sitting-class metrics, cross-validation, time totals."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .features import Window
from .model import NONSIT, SIT, Model, TrainConfig, predict, train

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelInterval:
    """A half-open annotated interval [start_t, end_t) in nanoseconds."""

    start_t: int
    end_t: int
    label: str

    def __post_init__(self):
        if self.start_t >= self.end_t:
            raise InvalidArgumentError(
                f"LabelInterval: start {self.start_t} >= end {self.end_t}"
            )
        if self.label not in (SIT, NONSIT):
            raise InvalidArgumentError(f"LabelInterval: unknown label {self.label!r}")


def check_non_overlapping(intervals: list[LabelInterval]) -> None:
    ordered = sorted(intervals, key=lambda iv: iv.start_t)
    for a, b in zip(ordered, ordered[1:]):
        if b.start_t < a.end_t:
            raise InvalidArgumentError(
                f"overlapping intervals [{a.start_t},{a.end_t}) and [{b.start_t},{b.end_t})"
            )


def majority_label(w: Window, intervals: list[LabelInterval]) -> str:
    """Window label: sit iff sit-annotated time strictly exceeds half the window.

    Time not covered by any interval counts as non-sitting, so a window with
    no overlapping annotations is ``nonsit``.
    """
    sit_overlap = 0
    for iv in intervals:
        if iv.label != SIT:
            continue
        lo = max(w.start_t, iv.start_t)
        hi = min(w.end_t, iv.end_t)
        if hi > lo:
            sit_overlap += hi - lo
    # integer nanoseconds make the "more than half" comparison exact
    return SIT if 2 * sit_overlap > (w.end_t - w.start_t) else NONSIT


def majority_labels_for_spans(start_ns, end_ns, intervals: list[LabelInterval]) -> np.ndarray:
    """Vector form of :func:`majority_label` over parallel start/end arrays."""
    start_ns = np.asarray(start_ns, dtype=np.int64)
    end_ns = np.asarray(end_ns, dtype=np.int64)
    overlap = np.zeros(len(start_ns), dtype=np.int64)
    for iv in intervals:
        if iv.label != SIT:
            continue
        lo = np.maximum(start_ns, iv.start_t)
        hi = np.minimum(end_ns, iv.end_t)
        overlap += np.maximum(hi - lo, 0)
    return np.where(2 * overlap > (end_ns - start_ns), SIT, NONSIT).astype(str)


@dataclass
class Metrics:
    """Sitting-class confusion counts and derived scores.

    ``degenerate`` lists the metric names whose denominator was zero; those
    scores are reported as 0.0 by convention.
    """

    tp: int
    fp: int
    fn: int
    tn: int
    recall: float
    precision: float
    f1: float
    accuracy: float
    degenerate: tuple[str, ...] = ()


def compute_metrics(pred, truth) -> Metrics:
    """Confusion-matrix metrics with sitting as the positive class."""
    p = np.asarray(pred)
    t = np.asarray(truth)
    if len(p) != len(t) or len(p) == 0:
        raise InvalidArgumentError(
            f"compute_metrics: got {len(p)} predictions vs {len(t)} truths"
        )
    ps = p == SIT if p.dtype != bool else p
    ts = t == SIT if t.dtype != bool else t
    tp = int(np.sum(ps & ts))
    fp = int(np.sum(ps & ~ts))
    fn = int(np.sum(~ps & ts))
    tn = int(np.sum(~ps & ~ts))
    degenerate = []

    def ratio(num, den, name):
        if den == 0:
            degenerate.append(name)
            return 0.0
        return num / den

    recall = ratio(tp, tp + fn, "recall")
    precision = ratio(tp, tp + fp, "precision")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    accuracy = (tp + tn) / len(p)
    return Metrics(
        tp=tp, fp=fp, fn=fn, tn=tn,
        recall=recall, precision=precision, f1=f1, accuracy=accuracy,
        degenerate=tuple(degenerate),
    )


METRIC_FIELDS = ("recall", "precision", "f1", "accuracy")


@dataclass
class CvResult:
    """Per-fold metrics plus mean/std summaries over the evaluated folds."""

    folds: list[Metrics]
    mean: dict[str, float]
    std: dict[str, float]
    skipped: list[tuple[int, str]] = field(default_factory=list)


def _summary(folds: list[Metrics]) -> tuple[dict, dict]:
    mean, std = {}, {}
    for name in METRIC_FIELDS:
        vals = np.array([getattr(m, name) for m in folds])
        mean[name] = float(vals.mean()) if len(vals) else 0.0
        std[name] = float(vals.std()) if len(vals) else 0.0
    return mean, std


def kfold_partition(n: int, k: int, seed: int, groups=None) -> list[np.ndarray]:
    """Seeded shuffle into k near-equal folds (sizes differ by at most one).

    With ``groups``, whole groups are dealt round-robin in shuffled order so
    that no group spans folds (subject-level splitting).
    """
    if k < 2:
        raise InvalidArgumentError(f"kfold_partition: k {k} < 2")
    rng = np.random.default_rng(seed)
    if groups is None:
        perm = rng.permutation(n)
        return [f for f in np.array_split(perm, k)]
    groups = np.asarray(groups)
    if len(groups) != n:
        raise InvalidArgumentError("kfold_partition: groups length mismatch")
    uniq = np.unique(groups)
    order = rng.permutation(len(uniq))
    folds: list[list[int]] = [[] for _ in range(k)]
    for i, gi in enumerate(order):
        folds[i % k].extend(np.nonzero(groups == uniq[gi])[0])
    return [np.array(sorted(f), dtype=int) for f in folds]


def kfold_cv(
    features,
    labels,
    k: int = 5,
    seed: int = 0,
    cfg: TrainConfig = TrainConfig(),
    threshold: float = 0.5,
    groups=None,
) -> CvResult:
    """k-fold cross-validation of the boosted classifier.

    Each fold trains on the other k-1 folds with a fold-specific sub-seed and
    evaluates sitting-class metrics on the held-out fold.  Folds whose
    training split contains a single class are reported as skipped, never
    silently dropped.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if len(X) != len(y):
        raise InvalidArgumentError("kfold_cv: features/labels length mismatch")
    parts = kfold_partition(len(X), k, seed, groups=groups)
    fold_metrics: list[Metrics] = []
    skipped: list[tuple[int, str]] = []
    for i, test_idx in enumerate(parts):
        if len(test_idx) == 0:
            skipped.append((i, "empty fold"))
            continue
        train_idx = np.concatenate([p for j, p in enumerate(parts) if j != i])
        y_train = y[train_idx]
        if len(set(y_train)) < 2:
            skipped.append((i, "training split has a single class"))
            log.warning("fold %d skipped: single-class training split", i)
            continue
        fold_cfg = TrainConfig(
            n_trees=cfg.n_trees,
            max_depth=cfg.max_depth,
            learning_rate=cfg.learning_rate,
            min_samples_leaf=cfg.min_samples_leaf,
            subsample_frac=cfg.subsample_frac,
            seed=cfg.seed + i,
            pos_weight=cfg.pos_weight,
        )
        m = train(X[train_idx], y_train, fold_cfg)
        pred = predict(m, X[test_idx], threshold=threshold)
        fold_metrics.append(compute_metrics(pred, y[test_idx]))
    mean, std = _summary(fold_metrics)
    return CvResult(folds=fold_metrics, mean=mean, std=std, skipped=skipped)


def holdout_eval(
    features,
    labels,
    test_frac: float = 0.2,
    seed: int = 0,
    cfg: TrainConfig = TrainConfig(),
    threshold: float = 0.5,
) -> tuple[Metrics, Model]:
    """Single seeded train/test split evaluation."""
    if not 0.0 < test_frac < 1.0:
        raise InvalidArgumentError(f"holdout_eval: test_frac {test_frac} not in (0, 1)")
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(X))
    n_test = max(1, int(round(test_frac * len(X))))
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    m = train(X[train_idx], y[train_idx], cfg)
    pred = predict(m, X[test_idx], threshold=threshold)
    return compute_metrics(pred, y[test_idx]), m


def sitting_time(pred, window_seconds: float) -> float:
    """Total predicted sitting seconds: sit-window count times window length."""
    p = np.asarray(pred)
    n_sit = int(np.sum(p == SIT)) if p.dtype != bool else int(np.sum(p))
    return n_sit * window_seconds
