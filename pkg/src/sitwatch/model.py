"""Binary sit / non-sit classifier: gradient-boosted regression trees.

Plain second-order (Newton) boosting with logistic loss on a dense numeric
feature matrix.  Nothing exotic: exact greedy splits over sorted values,
deterministic tie-breaking (lowest feature index, then lowest threshold),
row subsampling from a seeded generator, and a versioned text serialization
that round-trips byte-for-byte.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateTrainingError,
    InvalidArgumentError,
    LayoutMismatchError,
)
from .features import LAYOUT_VERSION

SIT, NONSIT = "sit", "nonsit"

_MODEL_MAGIC = "sitwatch-model"
_MODEL_FORMAT = "1"


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    subsample_frac: float = 0.8
    seed: int = 0
    pos_weight: float = 1.0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidArgumentError(f"TrainConfig: n_trees {self.n_trees} < 1")
        if self.max_depth < 1:
            raise InvalidArgumentError(f"TrainConfig: max_depth {self.max_depth} < 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise InvalidArgumentError(f"TrainConfig: learning_rate {self.learning_rate} not in (0, 1]")
        if self.min_samples_leaf < 1:
            raise InvalidArgumentError(f"TrainConfig: min_samples_leaf {self.min_samples_leaf} < 1")
        if not 0.0 < self.subsample_frac <= 1.0:
            raise InvalidArgumentError(f"TrainConfig: subsample_frac {self.subsample_frac} not in (0, 1]")
        if self.pos_weight <= 0.0:
            raise InvalidArgumentError(f"TrainConfig: pos_weight {self.pos_weight} <= 0")


@dataclass
class Tree:
    """One regression tree in flat-array form.

    ``feature[i] >= 0`` marks an internal node with rule ``x[feature] <
    threshold`` routing to ``left`` else ``right``; ``feature[i] == -1``
    marks a leaf whose response is ``value[i]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        # max_depth is small; route all rows one level at a time
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            goes_left = X[rows, feat[rows]] < self.threshold[node[rows]]
            node[rows] = np.where(goes_left, self.left[node[rows]], self.right[node[rows]])
        return self.value[node]


@dataclass
class Model:
    """Boosted ensemble plus the feature-layout contract it was trained under."""

    trees: list[Tree]
    base_score: float
    config: TrainConfig
    layout_version: str = LAYOUT_VERSION
    groups: tuple[str, ...] = ("raw", "rotvec")
    n_features: int = 0
    feature_names: tuple[str, ...] = ()
    train_losses: list[float] = field(default_factory=list, compare=False)

    def margin(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = np.full(len(X), self.base_score)
        for t in self.trees:
            s += self.config.learning_rate * t.predict(X)
        return s


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _labels_to_binary(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.dtype == bool:
        return arr.astype(np.float64)
    y = np.empty(len(arr), dtype=np.float64)
    for i, v in enumerate(arr):
        if v == SIT:
            y[i] = 1.0
        elif v == NONSIT:
            y[i] = 0.0
        else:
            raise InvalidArgumentError(f"unknown label {v!r} at index {i} (expected sit/nonsit)")
    return y


def _best_split(X, g, h, rows, min_leaf):
    """Best (gain, feature, threshold) over all features for one node.

    Gain is the reduction in the second-order approximation of the logistic
    loss.  Exact gain ties resolve to the lowest feature index, then the
    lowest threshold, so the scan order can never change the tree.
    """
    n = len(rows)
    Xn = X[rows]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    gs = g[rows][order]
    hs = h[rows][order]
    GL = np.cumsum(gs, axis=0)
    HL = np.cumsum(hs, axis=0)
    G, H = GL[-1], HL[-1]

    # candidate split after sorted position i: left = rows 0..i
    GLc, HLc = GL[:-1], HL[:-1]
    GRc, HRc = G - GLc, H - HLc
    counts = np.arange(1, n)[:, None]
    ok = (xs[1:] > xs[:-1]) & (counts >= min_leaf) & ((n - counts) >= min_leaf)
    eps = 1e-16
    gain = 0.5 * (
        GLc * GLc / (HLc + eps) + GRc * GRc / (HRc + eps) - (G * G) / (H + eps)
    )
    gain = np.where(ok, gain, -np.inf)
    best = gain.max()
    if not np.isfinite(best) or best <= 0.0:
        return None
    pos, feats = np.nonzero(gain == best)
    # lexicographic (feature, threshold) tie-break
    thr = xs[pos + 1, feats]
    k = np.lexsort((thr, feats))[0]
    return float(best), int(feats[k]), float(thr[k])


def _grow_tree(X, g, h, rows, cfg: TrainConfig) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def leaf(rows_):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-float(g[rows_].sum()) / (float(h[rows_].sum()) + 1e-16))
        return len(feature) - 1

    def build(rows_, depth):
        if depth >= cfg.max_depth or len(rows_) < 2 * cfg.min_samples_leaf:
            return leaf(rows_)
        found = _best_split(X, g, h, rows_, cfg.min_samples_leaf)
        if found is None:
            return leaf(rows_)
        _, f, t = found
        idx = len(feature)
        feature.append(f)
        threshold.append(t)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        mask = X[rows_, f] < t
        left[idx] = build(rows_[mask], depth + 1)
        right[idx] = build(rows_[~mask], depth + 1)
        return idx

    build(rows, 0)
    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value),
    )


def train(
    features,
    labels,
    cfg: TrainConfig = TrainConfig(),
    layout_version: str = LAYOUT_VERSION,
    groups: tuple[str, ...] = ("raw", "rotvec"),
    feature_names: tuple[str, ...] = (),
) -> Model:
    """Fit a boosted ensemble on a (n, F) feature matrix.

    ``base_score`` is the log-odds of the sit prevalence; each round fits one
    depth-limited tree to the Newton gradients of the logistic loss on a
    seeded row subsample.  Training is deterministic given (inputs, cfg), and
    the training loss is asserted non-increasing round over round.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError(f"train: expected 2-D feature matrix, got shape {X.shape}")
    y = _labels_to_binary(labels)
    if len(X) != len(y):
        raise InvalidArgumentError(f"train: {len(X)} feature rows vs {len(y)} labels")
    if len(X) < 2:
        raise InvalidArgumentError("train: need at least two rows")
    if not np.all(np.isfinite(X)):
        bad = int(np.nonzero(~np.isfinite(X).all(axis=1))[0][0])
        raise InvalidArgumentError(f"train: non-finite feature value in window row {bad}")
    pos = float(y.sum())
    if pos == 0.0 or pos == len(y):
        raise DegenerateTrainingError("train: labels contain a single class")

    w = np.where(y == 1.0, cfg.pos_weight, 1.0)
    p0 = pos / len(y)
    base = math.log(p0 / (1.0 - p0))
    F = np.full(len(y), base)

    rng = np.random.default_rng(cfg.seed)
    n_sub = max(1, int(round(cfg.subsample_frac * len(y))))
    trees: list[Tree] = []
    losses: list[float] = []

    def loss_of(Fv):
        # mean weighted logistic loss, computed with the stable softplus form
        return float(np.mean(w * (np.logaddexp(0.0, Fv) - y * Fv)))

    losses.append(loss_of(F))
    for _ in range(cfg.n_trees):
        p = _sigmoid(F)
        g = w * (p - y)
        h = w * p * (1.0 - p)
        if n_sub < len(y):
            rows = np.sort(rng.choice(len(y), size=n_sub, replace=False))
        else:
            rows = np.arange(len(y))
        tree = _grow_tree(X, g, h, rows, cfg)
        # A tree fit on a subsample can nudge the full-train loss up once the
        # fit has plateaued; halve its contribution until the round is
        # non-increasing (zeroing it in the worst case) so the monotone-loss
        # invariant holds exactly.
        step = tree.predict(X)
        scale = 1.0
        cur = loss_of(F + cfg.learning_rate * step)
        for _ in range(8):
            if cur <= losses[-1]:
                break
            scale *= 0.5
            cur = loss_of(F + cfg.learning_rate * scale * step)
        else:
            scale = 0.0
            cur = losses[-1]
        if scale != 1.0:
            tree.value *= scale
        trees.append(tree)
        F = F + cfg.learning_rate * scale * step
        assert cur <= losses[-1], f"training loss increased: {losses[-1]} -> {cur}"
        losses.append(cur)

    return Model(
        trees=trees,
        base_score=base,
        config=cfg,
        layout_version=layout_version,
        groups=tuple(groups),
        n_features=X.shape[1],
        feature_names=tuple(feature_names),
        train_losses=losses,
    )


def _check_layout(m: Model, X: np.ndarray) -> None:
    if X.shape[-1] != m.n_features:
        raise LayoutMismatchError(
            f"feature vector has {X.shape[-1]} values, model expects {m.n_features}"
        )


def check_layout_compatible(m: Model, layout_version: str, groups, names=()) -> None:
    """Refuse feature sources whose layout differs from the model's."""
    if layout_version != m.layout_version:
        raise LayoutMismatchError(
            f"feature layout version {layout_version!r} != model layout {m.layout_version!r}"
        )
    if tuple(groups) != m.groups:
        raise LayoutMismatchError(f"channel groups {tuple(groups)} != model groups {m.groups}")
    if names and m.feature_names and tuple(names) != m.feature_names:
        raise LayoutMismatchError("feature names differ from the model's training layout")


def predict_proba(m: Model, f) -> float | np.ndarray:
    """Sitting probability: sigmoid of base score plus weighted leaf sums."""
    X = np.asarray(f, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    _check_layout(m, X)
    p = _sigmoid(m.margin(X))
    return float(p[0]) if single else p


def predict(m: Model, f, threshold: float = 0.5):
    """Label decision: sit iff predict_proba >= threshold."""
    p = predict_proba(m, f)
    if np.isscalar(p):
        return SIT if p >= threshold else NONSIT
    return np.where(p >= threshold, SIT, NONSIT)


# ---------------------------------------------------------------------------
# Serialization: versioned plain text, byte-identical round trips.
# ---------------------------------------------------------------------------


def dump_model(m: Model) -> str:
    out = io.StringIO()
    c = m.config
    out.write(f"{_MODEL_MAGIC} {_MODEL_FORMAT}\n")
    out.write(f"layout_version {m.layout_version}\n")
    out.write(f"groups {','.join(m.groups)}\n")
    out.write(f"n_features {m.n_features}\n")
    if m.feature_names:
        out.write(f"feature_names {','.join(m.feature_names)}\n")
    out.write(f"base_score {float(m.base_score)!r}\n")
    out.write(
        "config "
        f"n_trees={c.n_trees} max_depth={c.max_depth} learning_rate={c.learning_rate!r} "
        f"min_samples_leaf={c.min_samples_leaf} subsample_frac={c.subsample_frac!r} "
        f"seed={c.seed} pos_weight={c.pos_weight!r}\n"
    )
    out.write(f"trees {len(m.trees)}\n")
    for ti, t in enumerate(m.trees):
        out.write(f"tree {ti} {len(t.feature)}\n")
        for i in range(len(t.feature)):
            if t.feature[i] < 0:
                out.write(f"leaf {float(t.value[i])!r}\n")
            else:
                out.write(
                    f"split {int(t.feature[i])} {float(t.threshold[i])!r} "
                    f"{int(t.left[i])} {int(t.right[i])}\n"
                )
    out.write("end\n")
    return out.getvalue()


def save_model(path, m: Model) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dump_model(m))


def _expect(line: str, prefix: str) -> str:
    if not line.startswith(prefix + " "):
        raise InvalidArgumentError(f"model file: expected {prefix!r}, got {line!r}")
    return line[len(prefix) + 1 :]


def parse_model(text: str) -> Model:
    lines = text.splitlines()
    it = iter(lines)
    head = next(it, "")
    if head != f"{_MODEL_MAGIC} {_MODEL_FORMAT}":
        raise InvalidArgumentError(f"model file: bad header {head!r}")
    layout_version = _expect(next(it, ""), "layout_version")
    groups = tuple(g for g in _expect(next(it, ""), "groups").split(",") if g)
    n_features = int(_expect(next(it, ""), "n_features"))
    line = next(it, "")
    names: tuple[str, ...] = ()
    if line.startswith("feature_names "):
        names = tuple(_expect(line, "feature_names").split(","))
        line = next(it, "")
    base = float(_expect(line, "base_score"))
    kv = dict(part.split("=", 1) for part in _expect(next(it, ""), "config").split())
    cfg = TrainConfig(
        n_trees=int(kv["n_trees"]),
        max_depth=int(kv["max_depth"]),
        learning_rate=float(kv["learning_rate"]),
        min_samples_leaf=int(kv["min_samples_leaf"]),
        subsample_frac=float(kv["subsample_frac"]),
        seed=int(kv["seed"]),
        pos_weight=float(kv["pos_weight"]),
    )
    n_trees = int(_expect(next(it, ""), "trees"))
    trees = []
    for ti in range(n_trees):
        hdr = _expect(next(it, ""), "tree").split()
        if int(hdr[0]) != ti:
            raise InvalidArgumentError(f"model file: tree index mismatch at {hdr}")
        n_nodes = int(hdr[1])
        feat = np.full(n_nodes, -1, dtype=np.int64)
        thr = np.zeros(n_nodes)
        left = np.full(n_nodes, -1, dtype=np.int64)
        right = np.full(n_nodes, -1, dtype=np.int64)
        val = np.zeros(n_nodes)
        for i in range(n_nodes):
            parts = next(it, "").split()
            if parts and parts[0] == "leaf":
                val[i] = float(parts[1])
            elif parts and parts[0] == "split":
                feat[i] = int(parts[1])
                thr[i] = float(parts[2])
                left[i] = int(parts[3])
                right[i] = int(parts[4])
            else:
                raise InvalidArgumentError(f"model file: bad node line {parts!r}")
        if np.any(feat >= n_features):
            raise InvalidArgumentError("model file: split feature index out of range")
        trees.append(Tree(feature=feat, threshold=thr, left=left, right=right, value=val))
    if next(it, "") != "end":
        raise InvalidArgumentError("model file: missing end marker")
    return Model(
        trees=trees,
        base_score=base,
        config=cfg,
        layout_version=layout_version,
        groups=groups,
        n_features=n_features,
        feature_names=names,
    )


def load_model(path) -> Model:
    with open(path, "r", encoding="ascii") as fh:
        return parse_model(fh.read())
