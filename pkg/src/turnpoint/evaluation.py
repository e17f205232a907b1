"""Classifier evaluation: confusion metrics, ROC/AUC, splits, k-fold CV.

The positive class is always the rare turn label. Because of that
imbalance, plain accuracy is reported alongside recall and G-mean, and
AUC is computed twice (threshold sweep with trapezoids, and the
rank/pair statistic) with a hard internal agreement check.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .potential import LabeledDataset
from .sampling import ResamplePlan, rebalance

# fit_fn(features, labels, seed) -> fitted model exposing
# .scores(features) -> [0,1] floats and .predict(features) -> {0,1}.
FitFn = Callable[[np.ndarray, np.ndarray, int], object]

_PAIR_TOL = 1e-9


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class Metrics:
    """Percentage metrics; None marks an undefined denominator."""

    accuracy: float | None
    recall: float | None
    g_mean: float | None

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "recall": self.recall, "g_mean": self.g_mean}


def confusion(labels: Sequence[int], predictions: Sequence[int]) -> ConfusionMatrix:
    """Count outcomes with the turn (1) class as positive."""
    y = np.asarray(labels)
    p = np.asarray(predictions)
    if y.shape != p.shape:
        raise ValueError("labels and predictions differ in length")
    if not np.all(np.isin(y, (0, 1))) or not np.all(np.isin(p, (0, 1))):
        raise ValueError("labels and predictions must be 0/1")
    return ConfusionMatrix(
        tp=int(np.sum((y == 1) & (p == 1))),
        fp=int(np.sum((y == 0) & (p == 1))),
        fn=int(np.sum((y == 1) & (p == 0))),
        tn=int(np.sum((y == 0) & (p == 0))),
    )


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy, recall and G-mean as percentages.

    G-mean is the geometric mean of the two per-class accuracies, the
    metric of choice when one class is rare: a classifier that answers
    "majority" everywhere scores high accuracy but a G-mean of zero.
    """
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / cm.total * 100.0
    pos_total = cm.tp + cm.fn
    neg_total = cm.tn + cm.fp
    recall = cm.tp / pos_total * 100.0 if pos_total > 0 else None
    if pos_total > 0 and neg_total > 0:
        g_mean = float(np.sqrt((cm.tp / pos_total) * (cm.tn / neg_total)) * 100.0)
    else:
        g_mean = None
    return Metrics(accuracy=accuracy, recall=recall, g_mean=g_mean)


def _rank_auc(y: np.ndarray, s: np.ndarray) -> float:
    """AUC as the tie-aware pair statistic P(s+ > s-) + 0.5 P(s+ = s-).

    Computed through average ranks, which is the same quantity without
    the quadratic pair loop.
    """
    n = len(s)
    order = np.argsort(s, kind="stable")
    ranks = np.empty(n, dtype=float)
    i = 0
    while i < n:
        j = i
        while j < n and s[order[j]] == s[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0  # average 1-based rank
        i = j
    n_pos = int((y == 1).sum())
    n_neg = n - n_pos
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_auc(labels: Sequence[int], scores: Sequence[float]) -> tuple[list[tuple[float, float]], float]:
    """ROC points (FPR, TPR) and the area under them.

    The curve sweeps thresholds over the distinct scores in descending
    order (predict positive at score >= threshold), starting from (0, 0).
    The trapezoidal area must match the rank statistic to 1e-9; a
    mismatch means a computation bug, not bad data.
    """
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape:
        raise ValueError("labels and scores differ in length")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs at least one positive and one negative label")

    order = np.argsort(-s, kind="stable")
    y_sorted = y[order]
    s_sorted = s[order]
    points: list[tuple[float, float]] = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = len(s_sorted)
    while i < n:
        j = i
        while j < n and s_sorted[j] == s_sorted[i]:
            tp += int(y_sorted[j] == 1)
            fp += int(y_sorted[j] == 0)
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j

    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    check = _rank_auc(y, s)
    if abs(area - check) > _PAIR_TOL:
        raise RuntimeError(
            f"AUC routes disagree: trapezoid {area!r} vs rank statistic {check!r}"
        )
    return points, float(area)


def chronological_split(
    dataset: LabeledDataset, train_fraction: float = 0.8
) -> tuple[LabeledDataset, LabeledDataset]:
    """First ``train_fraction`` of rows (in stored order) train, rest test."""
    n = dataset.n_rows
    if n < 5:
        raise ValueError("need at least 5 rows to split")
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    k = int(n * train_fraction + 1e-12)
    return dataset.subset(np.arange(k)), dataset.subset(np.arange(k, n))


def stratified_fold_assignment(labels: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Deterministic stratified fold ids: shuffle each class, deal round-robin."""
    y = np.asarray(labels)
    n = len(y)
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > n:
        raise ValueError(f"k={k} exceeds {n} rows")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    folds = np.empty(n, dtype=int)
    for cls in (1, 0):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for pos, row in enumerate(idx):
            folds[row] = pos % k
    return folds


@dataclass
class FoldResult:
    fold: int
    confusion_matrix: ConfusionMatrix
    metric_values: Metrics
    auc: float | None

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "confusion": self.confusion_matrix.to_dict(),
            "metrics": self.metric_values.to_dict(),
            "auc": self.auc,
        }


@dataclass
class EvalReport:
    """Metrics plus the pooled ROC; per-fold detail when from CV.

    ``auc`` is always the trapezoidal area of ``roc`` (pooled across
    folds for CV); ``mean_fold_auc`` is the average of per-fold AUCs,
    skipping folds where AUC is undefined.
    """

    accuracy: float | None
    recall: float | None
    g_mean: float | None
    roc: list[tuple[float, float]]
    auc: float
    folds: list[FoldResult] | None = None
    mean_fold_auc: float | None = None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "recall": self.recall,
            "g_mean": self.g_mean,
            "auc": self.auc,
            "mean_fold_auc": self.mean_fold_auc,
            "roc": [[float(x), float(y)] for x, y in self.roc],
            "folds": None if self.folds is None else [f.to_dict() for f in self.folds],
        }


def evaluate_predictions(
    labels: np.ndarray, scores: np.ndarray, threshold: float = 0.5
) -> EvalReport:
    """Single-split report: threshold the scores, compute all metrics."""
    preds = (np.asarray(scores) > threshold).astype(int)
    cm = confusion(labels, preds)
    m = metrics(cm)
    points, area = roc_auc(labels, scores)
    return EvalReport(
        accuracy=m.accuracy, recall=m.recall, g_mean=m.g_mean, roc=points, auc=area
    )


def _mean_defined(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def cross_validate(
    dataset: LabeledDataset,
    fit_fn: FitFn,
    k: int = 5,
    seed: int = 0,
    plan: ResamplePlan | None = None,
    paper_protocol: bool = False,
    threads: int | None = None,
) -> EvalReport:
    """Stratified k-fold CV with leak-free per-fold resampling.

    When a resample plan is given it is applied to each TRAINING fold
    only, so no synthetic neighbor of a validation row ever leaks into
    training. ``paper_protocol`` instead resamples the whole dataset
    once up front and then cross-validates the enlarged set; that is the
    ordering some published studies use, kept for comparison, and it
    reports optimistic numbers.

    Per-fold metrics with undefined denominators are skipped in the
    means; the report's ROC/AUC pool the out-of-fold scores.
    """
    if paper_protocol and plan is not None:
        dataset, _ = rebalance(dataset, plan)
        plan = None
    folds = stratified_fold_assignment(dataset.labels, k, seed)

    def run_fold(f: int) -> tuple[FoldResult, np.ndarray, np.ndarray]:
        val_idx = np.flatnonzero(folds == f)
        train_idx = np.flatnonzero(folds != f)
        train = dataset.subset(train_idx)
        if train.n_positive == 0:
            raise ValueError(
                f"training fold {f} has no positive samples; stratification failed"
                " (too few positives for this k)"
            )
        fold_seed = int(np.random.SeedSequence((seed, 1, f)).generate_state(1)[0])
        if plan is not None:
            fold_plan = replace(plan, seed=int(np.random.SeedSequence((plan.seed, f)).generate_state(1)[0]))
            train, _ = rebalance(train, fold_plan)
        model = fit_fn(train.features, train.labels, fold_seed)
        val = dataset.subset(val_idx)
        scores = np.asarray(model.scores(val.features), dtype=float)
        preds = np.asarray(model.predict(val.features), dtype=int)
        cm = confusion(val.labels, preds)
        m = metrics(cm)
        if val.n_positive > 0 and val.n_negative > 0:
            _, fold_auc = roc_auc(val.labels, scores)
        else:
            fold_auc = None
        return FoldResult(f, cm, m, fold_auc), val.labels, scores

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_fold, range(k)))
    else:
        results = [run_fold(f) for f in range(k)]

    fold_results = [r[0] for r in results]
    pooled_labels = np.concatenate([r[1] for r in results])
    pooled_scores = np.concatenate([r[2] for r in results])
    points, area = roc_auc(pooled_labels, pooled_scores)
    return EvalReport(
        accuracy=_mean_defined([f.metric_values.accuracy for f in fold_results]),
        recall=_mean_defined([f.metric_values.recall for f in fold_results]),
        g_mean=_mean_defined([f.metric_values.g_mean for f in fold_results]),
        roc=points,
        auc=area,
        folds=fold_results,
        mean_fold_auc=_mean_defined([f.auc for f in fold_results]),
    )
