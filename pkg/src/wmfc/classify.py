"""Feature tables, a deterministic random forest, cross-validation, and two-way ANOVA."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .network import NodeMetrics
from .signal_io import GroupLabel, StageTag

CLASS_ORDER = list(GroupLabel)  # AD < MCI < HC, the vote tie-breaking order


@dataclass
class FeatureTable:
    x: np.ndarray  # n x d
    labels: list[GroupLabel]
    stages: list[StageTag]
    feature_names: list[str]
    metric: str = ""

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        n, d = self.x.shape
        if len(self.labels) != n or len(self.stages) != n or len(self.feature_names) != d:
            raise ValueError("label/stage/name counts do not match the matrix shape")
        if self.x.size and not np.all(np.isfinite(self.x)):
            raise ValueError("feature table contains non-finite values")

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: int | None = None  # default ceil(sqrt(d))
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("need at least one tree")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")


@dataclass
class _Tree:
    """Flat array form: feature < 0 marks a leaf whose class is in `value`."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            feats = self.feature[node[idx]]
            go_left = x[idx, feats] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
            active = self.feature[node] >= 0
        return self.value[node]


@dataclass
class TrainedForest:
    trees: list[_Tree]
    classes: list[GroupLabel]
    config: ForestConfig
    n_features: int


@dataclass
class CvReport:
    fold_accuracies: list[float]
    mean_accuracy: float
    confusion: np.ndarray  # 3 x 3 counts, rows = true class
    seed: int


@dataclass
class AnovaReport:
    f_group: float
    f_stage: float
    f_interaction: float
    p_group: float
    p_stage: float
    p_interaction: float
    df_group: int
    df_stage: int
    df_interaction: int
    df_error: int


# ---------------------------------------------------------------------------
# Feature assembly and CSV round-trip


def assemble_features(
    windows: list[tuple[NodeMetrics, StageTag, GroupLabel]], metric: str
) -> FeatureTable:
    """One row per window: the chosen node-metric vector, tagged with its labels."""
    if not windows:
        return FeatureTable(
            x=np.empty((0, 0)), labels=[], stages=[], feature_names=[], metric=metric
        )
    rows, labels, stages = [], [], []
    p = len(windows[0][0].by_name(metric))
    for metrics, stage, group in windows:
        vec = metrics.by_name(metric)
        if len(vec) != p:
            raise ValueError(f"inconsistent node count: {len(vec)} != {p}")
        rows.append(vec)
        stages.append(stage)
        labels.append(group)
    names = [f"f_{i:03d}" for i in range(p)]
    return FeatureTable(x=np.array(rows), labels=labels, stages=stages, feature_names=names, metric=metric)


def render_feature_csv(table: FeatureTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["label", "stage"] + table.feature_names)
    for i in range(table.n_rows):
        writer.writerow(
            [table.labels[i].value, table.stages[i].value]
            + [f"{v:.17g}" for v in table.x[i]]
        )
    return out.getvalue()


def parse_feature_csv(text: str, metric: str = "") -> FeatureTable:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("feature CSV is empty") from None
    if header[:2] != ["label", "stage"]:
        raise ValueError("feature CSV must start with label,stage columns")
    names = header[2:]
    rows, labels, stages = [], [], []
    for row in reader:
        if not row:
            continue
        labels.append(GroupLabel.parse(row[0]))
        stages.append(StageTag.parse(row[1]))
        rows.append([float(v) for v in row[2:]])
    x = np.array(rows) if rows else np.empty((0, len(names)))
    return FeatureTable(x=x, labels=labels, stages=stages, feature_names=names, metric=metric)


# ---------------------------------------------------------------------------
# Random forest


def _gini_best_split(x, y, feature_ids, n_classes):
    """Best (gini, feature, threshold) over candidate features; None if no split."""
    n = len(y)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    best = None
    for f in sorted(feature_ids):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        cum = np.cumsum(onehot[order], axis=0)
        total = cum[-1]
        sizes = np.flatnonzero(xs[1:] != xs[:-1]) + 1  # left-side sample counts
        if len(sizes) == 0:
            continue
        left = cum[sizes - 1]
        right = total - left
        nl = sizes.astype(float)
        nr = n - nl
        gini_l = 1.0 - np.sum((left / nl[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((right / nr[:, None]) ** 2, axis=1)
        weighted = (nl * gini_l + nr * gini_r) / n
        k = int(np.argmin(weighted))
        thr = 0.5 * (xs[sizes[k] - 1] + xs[sizes[k]])
        cand = (float(weighted[k]), f, float(thr))
        if best is None or cand < best:
            best = cand
    return best


def _grow_tree(x, y, cfg: ForestConfig, mtry: int, n_classes: int, rng) -> _Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def leaf(counts) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(int(np.argmax(counts)))
        return node

    def grow(idx: np.ndarray, depth: int) -> int:
        counts = np.bincount(y[idx], minlength=n_classes)
        if (
            np.max(counts) == len(idx)
            or len(idx) < cfg.min_samples_split
            or (cfg.max_depth is not None and depth >= cfg.max_depth)
        ):
            return leaf(counts)
        d = x.shape[1]
        feats = rng.choice(d, size=min(mtry, d), replace=False)
        best = _gini_best_split(x[idx], y[idx], feats, n_classes)
        if best is None:
            return leaf(counts)
        _, f, thr = best
        mask = x[idx, f] <= thr
        node = len(feature)
        feature.append(f)
        threshold.append(thr)
        left.append(-1)
        right.append(-1)
        value.append(-1)
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return _Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.int64),
    )


def _encode_labels(labels: list[GroupLabel]) -> np.ndarray:
    index = {cls: i for i, cls in enumerate(CLASS_ORDER)}
    return np.array([index[lbl] for lbl in labels], dtype=np.int64)


def train_forest(table: FeatureTable, cfg: ForestConfig) -> TrainedForest:
    """Bagged Gini decision trees with per-tree seeded random streams.

    Tree t draws its bootstrap sample and split-candidate features from a
    generator seeded with (master seed XOR t), so training is deterministic
    and independent of any execution schedule.
    """
    if table.n_rows < 2:
        raise ValueError("need at least 2 rows to train")
    y = _encode_labels(table.labels)
    if len(np.unique(y)) < 2:
        raise ValueError("single-class table: use a trivial constant predictor instead")
    d = table.x.shape[1]
    mtry = cfg.features_per_split or math.ceil(math.sqrt(d))
    trees = []
    for t in range(cfg.n_trees):
        rng = np.random.default_rng(cfg.seed ^ t)
        if cfg.bootstrap:
            idx = rng.integers(0, table.n_rows, size=table.n_rows)
        else:
            idx = np.arange(table.n_rows)
        trees.append(_grow_tree(table.x[idx], y[idx], cfg, mtry, len(CLASS_ORDER), rng))
    return TrainedForest(trees=trees, classes=CLASS_ORDER, config=cfg, n_features=d)


def predict_batch(forest: TrainedForest, x: np.ndarray) -> list[GroupLabel]:
    """Majority vote across trees; ties go to the earliest class in CLASS_ORDER."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != forest.n_features:
        raise ValueError(f"row length {x.shape[1]} != trained feature count {forest.n_features}")
    votes = np.zeros((len(x), len(forest.classes)), dtype=np.int64)
    for tree in forest.trees:
        pred = tree.predict(x)
        votes[np.arange(len(x)), pred] += 1
    return [forest.classes[i] for i in np.argmax(votes, axis=1)]


def predict(forest: TrainedForest, row: np.ndarray) -> GroupLabel:
    return predict_batch(forest, np.asarray(row, dtype=float)[None, :])[0]


def cross_validate(table: FeatureTable, cfg: ForestConfig, k: int = 10) -> CvReport:
    """Stratified k-fold CV: per class, rows are shuffled and dealt round-robin."""
    y = _encode_labels(table.labels)
    rng = np.random.default_rng(cfg.seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in range(len(CLASS_ORDER)):
        rows = np.flatnonzero(y == cls)
        if 0 < len(rows) < k:
            raise ValueError(f"class {CLASS_ORDER[cls].value} has {len(rows)} rows, fewer than {k}")
        rows = rows[rng.permutation(len(rows))]
        for i, r in enumerate(rows):
            folds[i % k].append(int(r))

    accuracies = []
    confusion = np.zeros((len(CLASS_ORDER), len(CLASS_ORDER)), dtype=np.int64)
    for fold_id, test_rows in enumerate(folds):
        test = np.array(sorted(test_rows), dtype=np.int64)
        train = np.setdiff1d(np.arange(table.n_rows), test)
        fold_cfg = ForestConfig(
            n_trees=cfg.n_trees,
            max_depth=cfg.max_depth,
            min_samples_split=cfg.min_samples_split,
            features_per_split=cfg.features_per_split,
            seed=cfg.seed ^ (0x9E3779B9 * (fold_id + 1)),
            bootstrap=cfg.bootstrap,
        )
        sub = FeatureTable(
            x=table.x[train],
            labels=[table.labels[i] for i in train],
            stages=[table.stages[i] for i in train],
            feature_names=table.feature_names,
            metric=table.metric,
        )
        forest = train_forest(sub, fold_cfg)
        preds = _encode_labels(predict_batch(forest, table.x[test]))
        truth = y[test]
        accuracies.append(float(np.mean(preds == truth)))
        for t, p in zip(truth, preds):
            confusion[t, p] += 1
    return CvReport(
        fold_accuracies=accuracies,
        mean_accuracy=float(np.mean(accuracies)),
        confusion=confusion,
        seed=cfg.seed,
    )


# ---------------------------------------------------------------------------
# Two-way ANOVA


def anova_two_way(
    values: np.ndarray, groups: list[GroupLabel], stages: list[StageTag]
) -> AnovaReport:
    """Fixed-effects two-way ANOVA with interaction (sequential sums of squares)."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or len(v) != len(groups) or len(v) != len(stages):
        raise ValueError("values, groups, and stages must be equal-length vectors")
    g_levels = [g for g in GroupLabel if g in set(groups)]
    s_levels = [s for s in StageTag if s in set(stages)]
    if len(g_levels) < 2 or len(s_levels) < 2:
        raise ValueError("need at least two group levels and two stage levels")
    for g in g_levels:
        for s in s_levels:
            if not any(gg == g and ss == s for gg, ss in zip(groups, stages)):
                raise ValueError(f"empty cell: ({g.value}, {s.value})")

    n = len(v)
    gi = np.array([g_levels.index(g) for g in groups])
    si = np.array([s_levels.index(s) for s in stages])
    ng, ns = len(g_levels), len(s_levels)

    def dummies(codes, levels):
        # treatment coding, first level as reference
        return np.eye(levels)[codes][:, 1:]

    intercept = np.ones((n, 1))
    dg = dummies(gi, ng)
    ds = dummies(si, ns)
    inter = (dg[:, :, None] * ds[:, None, :]).reshape(n, -1)

    def rss(design):
        coef = np.linalg.lstsq(design, v, rcond=None)[0]
        return float(np.sum((v - design @ coef) ** 2))

    r0 = rss(intercept)
    r1 = rss(np.hstack([intercept, dg]))
    r2 = rss(np.hstack([intercept, dg, ds]))
    r3 = rss(np.hstack([intercept, dg, ds, inter]))

    df_g, df_s, df_i = ng - 1, ns - 1, (ng - 1) * (ns - 1)
    df_e = n - ng * ns
    if df_e < 1:
        raise ValueError("no residual degrees of freedom; need replicate observations per cell")
    mse = r3 / df_e
    ss = [max(0.0, r0 - r1), max(0.0, r1 - r2), max(0.0, r2 - r3)]
    f_vals = [s / df / mse if mse > 0 else np.inf for s, df in zip(ss, (df_g, df_s, df_i))]
    p_vals = [float(stats.f.sf(fv, df, df_e)) for fv, df in zip(f_vals, (df_g, df_s, df_i))]
    return AnovaReport(
        f_group=f_vals[0],
        f_stage=f_vals[1],
        f_interaction=f_vals[2],
        p_group=p_vals[0],
        p_stage=p_vals[1],
        p_interaction=p_vals[2],
        df_group=df_g,
        df_stage=df_s,
        df_interaction=df_i,
        df_error=df_e,
    )
