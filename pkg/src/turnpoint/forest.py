"""From-scratch tree ensembles for turn prediction.

Single CART trees grown best-first under a global split budget, bagged
into a random forest with out-of-bag bookkeeping, a boosting ensemble
that undersamples the majority class each round, and a two-round grid
search over (tree count, split budget).

Everything is deterministic: each tree, boosting round, and grid cell
draws from its own substream keyed by stable values, so thread count
and scheduling never change a result.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

from .evaluation import roc_auc, stratified_fold_assignment
from .potential import LabeledDataset
from .sampling import ResamplePlan, random_undersample, rebalance

MODEL_FORMAT_VERSION = 1

_ALPHA_EPS = 1e-12


def _derived_seed(*key) -> int:
    return int(np.random.SeedSequence(tuple(int(k) for k in key)).generate_state(1)[0])


def _gini(n_pos: int, n_neg: int) -> float:
    n = n_pos + n_neg
    if n == 0:
        return 0.0
    p = n_pos / n
    q = n_neg / n
    return 1.0 - p * p - q * q


@dataclass
class DecisionTree:
    """Binary CART stored as flat parallel arrays.

    ``feature[i] == -1`` marks node i as a leaf; rows with value <=
    threshold go left. Leaf score is its positive-class fraction; a leaf
    votes positive when positives are at least half its rows.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_pos: np.ndarray
    n_neg: np.ndarray
    gain: np.ndarray
    n_features: int
    seed: int | None = None

    @property
    def split_count(self) -> int:
        return int((self.feature >= 0).sum())

    def leaf_ids(self, rows: np.ndarray) -> np.ndarray:
        idx = np.zeros(rows.shape[0], dtype=int)
        while True:
            f = self.feature[idx]
            active = np.flatnonzero(f >= 0)
            if active.size == 0:
                return idx
            cur = idx[active]
            go_left = rows[active, self.feature[cur]] <= self.threshold[cur]
            idx[active] = np.where(go_left, self.left[cur], self.right[cur])

    def scores(self, rows: np.ndarray) -> np.ndarray:
        rows = _check_rows(rows, self.n_features)
        leaf = self.leaf_ids(rows)
        total = self.n_pos[leaf] + self.n_neg[leaf]
        return self.n_pos[leaf] / total

    def votes(self, rows: np.ndarray) -> np.ndarray:
        rows = _check_rows(rows, self.n_features)
        leaf = self.leaf_ids(rows)
        return (self.n_pos[leaf] >= self.n_neg[leaf]).astype(int)

    def predict(self, rows: np.ndarray) -> np.ndarray:
        return self.votes(rows)

    def to_doc(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "n_pos": self.n_pos.tolist(),
            "n_neg": self.n_neg.tolist(),
            "gain": self.gain.tolist(),
            "n_features": self.n_features,
            "seed": self.seed,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "DecisionTree":
        return cls(
            feature=np.asarray(doc["feature"], dtype=int),
            threshold=np.asarray(doc["threshold"], dtype=float),
            left=np.asarray(doc["left"], dtype=int),
            right=np.asarray(doc["right"], dtype=int),
            n_pos=np.asarray(doc["n_pos"], dtype=int),
            n_neg=np.asarray(doc["n_neg"], dtype=int),
            gain=np.asarray(doc["gain"], dtype=float),
            n_features=int(doc["n_features"]),
            seed=doc.get("seed"),
        )


def _check_rows(rows: np.ndarray, n_features: int) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != n_features:
        raise ValueError(f"expected rows with {n_features} features, got {rows.shape}")
    return rows


def _best_split(
    x: np.ndarray, y: np.ndarray, feats: np.ndarray, n_total: int
) -> tuple[float, int, float] | None:
    """Best (weighted gain, feature, threshold) over candidate features.

    Candidates are midpoints between consecutive distinct sorted values.
    Features are scanned in ascending index order and, within a feature,
    np.argmax keeps the first (lowest-threshold) maximum, so exact gain
    ties resolve to the lowest feature index, then lowest threshold.
    """
    n = len(y)
    pos_total = int(y.sum())
    parent = _gini(pos_total, n - pos_total)
    best: tuple[float, int, float] | None = None
    for f in np.sort(feats):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        ys = y[order]
        cut = np.flatnonzero(xs[1:] != xs[:-1]) + 1  # left-side sizes
        if cut.size == 0:
            continue
        pos_prefix = np.cumsum(ys)
        n_l = cut.astype(float)
        n_r = float(n) - n_l
        pos_l = pos_prefix[cut - 1].astype(float)
        pos_r = float(pos_total) - pos_l
        p_l = pos_l / n_l
        q_l = (n_l - pos_l) / n_l
        p_r = pos_r / n_r
        q_r = (n_r - pos_r) / n_r
        g_l = 1.0 - p_l * p_l - q_l * q_l
        g_r = 1.0 - p_r * p_r - q_r * q_r
        child = (n_l * g_l + n_r * g_r) / n
        gain = (n / n_total) * (parent - child)
        k = int(np.argmax(gain))
        if gain[k] > 0 and (best is None or gain[k] > best[0]):
            i = int(cut[k])
            best = (float(gain[k]), int(f), (xs[i - 1] + xs[i]) / 2.0)
    return best


def fit_tree(
    rows: np.ndarray,
    labels: np.ndarray,
    max_splits: int,
    features_per_split: int | None = None,
    seed=0,
) -> DecisionTree:
    """Grow a CART classifier best-first under a total split budget.

    A priority queue holds the best available split of every open leaf,
    ranked by size-weighted Gini gain, and the highest-gain split in the
    whole tree is applied next until the budget runs out or no split
    improves purity. Each open leaf draws its own feature subset of size
    ``features_per_split`` (all features when that covers the width).
    Queue ties resolve by leaf creation order.
    """
    x = np.asarray(rows, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a non-empty 2-d feature array")
    if x.shape[0] != len(y):
        raise ValueError("rows and labels differ in length")
    if max_splits < 0:
        raise ValueError("max_splits must be non-negative")
    n, d = x.shape
    fps = features_per_split if features_per_split is not None else math.ceil(math.sqrt(d))
    fps = min(fps, d)
    if fps < 1:
        raise ValueError("features_per_split must be positive")
    rng = np.random.default_rng(seed)

    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    n_pos = [int(y.sum())]
    n_neg = [int(n - y.sum())]
    gain = [0.0]
    node_rows: dict[int, np.ndarray] = {0: np.arange(n)}

    def open_leaf(node_id: int) -> None:
        idx = node_rows[node_id]
        if n_pos[node_id] == 0 or n_neg[node_id] == 0 or len(idx) < 2:
            return
        feats = np.arange(d) if fps >= d else rng.choice(d, size=fps, replace=False)
        found = _best_split(x[idx], y[idx], feats, n)
        if found is not None:
            g, f, thr = found
            heapq.heappush(heap, (-g, node_id, f, thr))

    heap: list[tuple[float, int, int, float]] = []
    open_leaf(0)
    splits = 0
    while splits < max_splits and heap:
        neg_g, node_id, f, thr = heapq.heappop(heap)
        idx = node_rows.pop(node_id)
        mask = x[idx, f] <= thr
        for child_rows in (idx[mask], idx[~mask]):
            child_id = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            n_pos.append(int(y[child_rows].sum()))
            n_neg.append(int(len(child_rows) - y[child_rows].sum()))
            gain.append(0.0)
            node_rows[child_id] = child_rows
        feature[node_id] = f
        threshold[node_id] = thr
        left[node_id] = len(feature) - 2
        right[node_id] = len(feature) - 1
        gain[node_id] = -neg_g
        splits += 1
        open_leaf(left[node_id])
        open_leaf(right[node_id])

    return DecisionTree(
        feature=np.asarray(feature, dtype=int),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=int),
        right=np.asarray(right, dtype=int),
        n_pos=np.asarray(n_pos, dtype=int),
        n_neg=np.asarray(n_neg, dtype=int),
        gain=np.asarray(gain, dtype=float),
        n_features=d,
        seed=seed if isinstance(seed, int) else None,
    )


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    oob_masks: np.ndarray | None
    n_trees: int
    max_splits: int
    features_per_split: int
    master_seed: int
    n_features: int
    feature_importance: np.ndarray | None = None

    def scores(self, rows: np.ndarray) -> np.ndarray:
        """Fraction of trees voting positive, in [0, 1]."""
        rows = _check_rows(rows, self.n_features)
        if not self.trees:
            raise ValueError("empty ensemble")
        votes = np.zeros(rows.shape[0], dtype=float)
        for tree in self.trees:
            votes += tree.votes(rows)
        return votes / len(self.trees)

    def predict(self, rows: np.ndarray) -> np.ndarray:
        return (self.scores(rows) > 0.5).astype(int)

    def to_doc(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "forest",
            "n_trees": self.n_trees,
            "max_splits": self.max_splits,
            "features_per_split": self.features_per_split,
            "master_seed": self.master_seed,
            "n_features": self.n_features,
            "feature_importance": None
            if self.feature_importance is None
            else [float(v) for v in self.feature_importance],
            "trees": [t.to_doc() for t in self.trees],
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "ForestModel":
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
        if doc.get("kind") != "forest":
            raise ValueError(f"not a forest document: kind={doc.get('kind')!r}")
        imp = doc.get("feature_importance")
        return cls(
            trees=[DecisionTree.from_doc(t) for t in doc["trees"]],
            oob_masks=None,  # recomputable from seeds; not serialized
            n_trees=int(doc["n_trees"]),
            max_splits=int(doc["max_splits"]),
            features_per_split=int(doc["features_per_split"]),
            master_seed=int(doc["master_seed"]),
            n_features=int(doc["n_features"]),
            feature_importance=None if imp is None else np.asarray(imp, dtype=float),
        )

    def digest(self) -> str:
        return document_digest(self.to_doc())


def document_digest(doc: dict) -> str:
    """Stable content hash of a JSON-representable document."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _fit_one_tree(
    x: np.ndarray,
    y: np.ndarray,
    max_splits: int,
    fps: int,
    master_seed: int,
    t: int,
) -> tuple[DecisionTree, np.ndarray]:
    tree_seed = _derived_seed(master_seed, t)
    rng = np.random.default_rng(tree_seed)
    n = x.shape[0]
    boot = rng.integers(0, n, size=n)
    oob = np.ones(n, dtype=bool)
    oob[boot] = False
    tree = fit_tree(x[boot], y[boot], max_splits, fps, seed=rng)
    tree.seed = tree_seed
    return tree, oob


def fit_forest(
    rows: np.ndarray,
    labels: np.ndarray,
    n_trees: int,
    max_splits: int,
    seed: int = 0,
    features_per_split: int | None = None,
    threads: int | None = None,
) -> ForestModel:
    """Bag ``n_trees`` bootstrap CARTs (size-n samples, with replacement).

    Each tree runs on a substream keyed by (seed, tree index), so the
    model is identical whatever ``threads`` is. Out-of-bag masks are kept
    for permutation importance.
    """
    x = np.asarray(rows, dtype=float)
    y = np.asarray(labels, dtype=int)
    if n_trees <= 0:
        raise ValueError("n_trees must be positive")
    d = x.shape[1]
    fps = features_per_split if features_per_split is not None else math.ceil(math.sqrt(d))

    def job(t: int):
        return _fit_one_tree(x, y, max_splits, fps, seed, t)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fitted = list(pool.map(job, range(n_trees)))
    else:
        fitted = [job(t) for t in range(n_trees)]
    return ForestModel(
        trees=[f[0] for f in fitted],
        oob_masks=np.stack([f[1] for f in fitted]),
        n_trees=n_trees,
        max_splits=max_splits,
        features_per_split=fps,
        master_seed=seed,
        n_features=d,
    )


PermutationHook = Callable[[np.random.Generator, int], np.ndarray]


def _shuffled(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.permutation(n)


def oob_importance(
    model: ForestModel,
    rows: np.ndarray,
    labels: np.ndarray,
    seed: int = 0,
    permutation: PermutationHook | None = None,
    threads: int | None = None,
) -> np.ndarray:
    """Permutation importance on out-of-bag rows.

    For each tree and feature: the tree's accuracy on its own OOB rows
    minus its accuracy after shuffling that feature's OOB values
    (positive means the feature carried signal). Scores average over
    trees; trees with no OOB rows are skipped. The ``permutation`` hook
    exists so tests can pass the identity and pin the zero baseline.

    The result is also stored on the model (``feature_importance``).
    """
    if model.oob_masks is None:
        raise ValueError("model carries no out-of-bag masks (deserialized?)")
    x = _check_rows(rows, model.n_features)
    y = np.asarray(labels, dtype=int)
    permutation = permutation or _shuffled
    usable = [t for t in range(len(model.trees)) if model.oob_masks[t].any()]
    if not usable:
        raise ValueError("every tree has an empty out-of-bag set")

    def job(t: int) -> np.ndarray:
        tree = model.trees[t]
        mask = model.oob_masks[t]
        x_oob = x[mask]
        y_oob = y[mask]
        base = float((tree.votes(x_oob) == y_oob).mean())
        deltas = np.empty(model.n_features, dtype=float)
        for j in range(model.n_features):
            rng = np.random.default_rng(np.random.SeedSequence((seed, t, j)))
            perm = permutation(rng, len(y_oob))
            x_perm = x_oob.copy()
            x_perm[:, j] = x_oob[perm, j]
            deltas[j] = base - float((tree.votes(x_perm) == y_oob).mean())
        return deltas

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_tree = list(pool.map(job, usable))
    else:
        per_tree = [job(t) for t in usable]
    importance = np.mean(per_tree, axis=0)
    model.feature_importance = importance
    return importance


# ---------------------------------------------------------------------------
# Boosting with per-round majority undersampling
# ---------------------------------------------------------------------------


@dataclass
class BoostEnsemble:
    learners: list[DecisionTree]
    alphas: list[float]
    epsilons: list[float]
    rounds_requested: int
    master_seed: int
    n_features: int

    @property
    def rounds_completed(self) -> int:
        return len(self.learners)

    def margin(self, rows: np.ndarray) -> np.ndarray:
        rows = _check_rows(rows, self.n_features)
        if not self.learners:
            raise ValueError("empty ensemble")
        total = np.zeros(rows.shape[0], dtype=float)
        for tree, alpha in zip(self.learners, self.alphas):
            h = tree.votes(rows) * 2 - 1
            total += alpha * h
        return total

    def scores(self, rows: np.ndarray) -> np.ndarray:
        """Alpha-weighted vote margin mapped onto [0, 1]."""
        m = self.margin(rows)
        alpha_sum = float(sum(self.alphas))
        if alpha_sum <= 0:
            return np.full(len(m), 0.5)
        return (m / alpha_sum + 1.0) / 2.0

    def predict(self, rows: np.ndarray) -> np.ndarray:
        """Sign of the weighted vote; an exact zero margin counts negative."""
        return (self.margin(rows) > 0).astype(int)

    def to_doc(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "rusboost",
            "rounds_requested": self.rounds_requested,
            "master_seed": self.master_seed,
            "n_features": self.n_features,
            "alphas": [float(a) for a in self.alphas],
            "epsilons": [float(e) for e in self.epsilons],
            "trees": [t.to_doc() for t in self.learners],
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "BoostEnsemble":
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
        if doc.get("kind") != "rusboost":
            raise ValueError(f"not a rusboost document: kind={doc.get('kind')!r}")
        return cls(
            learners=[DecisionTree.from_doc(t) for t in doc["trees"]],
            alphas=[float(a) for a in doc["alphas"]],
            epsilons=[float(e) for e in doc["epsilons"]],
            rounds_requested=int(doc["rounds_requested"]),
            master_seed=int(doc["master_seed"]),
            n_features=int(doc["n_features"]),
        )

    def digest(self) -> str:
        return document_digest(self.to_doc())


def fit_rusboost(
    rows: np.ndarray,
    labels: np.ndarray,
    rounds: int,
    base_max_splits: int = 4,
    seed: int = 0,
    weight_trace: list | None = None,
) -> BoostEnsemble:
    """Boosting where each round trains on a rebalanced subsample.

    Instance weights start uniform (1/m). Every round the majority class
    is undersampled to minority parity, drawing by the current weights;
    a shallow tree is fit on that temporary set; its weighted error is
    measured on the FULL set. An error above 0.5 discards the learner
    and stops. Otherwise alpha = 0.5*ln((1-eps)/eps) (eps floored at
    1e-12 so a perfect learner gets a large finite alpha), weights are
    scaled by exp(-alpha*y*h) and renormalized.

    ``weight_trace``, if a list, receives each round's post-update
    weight vector (for audit).
    """
    x = np.asarray(rows, dtype=float)
    y = np.asarray(labels, dtype=int)
    if rounds <= 0:
        raise ValueError("rounds must be positive")
    m = x.shape[0]
    if m == 0:
        raise ValueError("empty training set")
    ypm = y * 2 - 1
    min_idx = np.flatnonzero(y == 1)
    maj_idx = np.flatnonzero(y == 0)
    if len(min_idx) == 0 or len(maj_idx) == 0:
        raise ValueError("need both classes to boost")

    w = np.full(m, 1.0 / m)
    learners: list[DecisionTree] = []
    alphas: list[float] = []
    epsilons: list[float] = []
    for t in range(rounds):
        target = min(len(min_idx), len(maj_idx))
        sel = random_undersample(
            x[maj_idx], target, weights=w[maj_idx], seed=_derived_seed(seed, t, 1)
        )
        d_idx = np.sort(np.concatenate([min_idx, maj_idx[sel]]))
        tree = fit_tree(
            x[d_idx],
            y[d_idx],
            max_splits=base_max_splits,
            features_per_split=x.shape[1],
            seed=_derived_seed(seed, t, 0),
        )
        h = tree.votes(x) * 2 - 1
        eps = float(w[h != ypm].sum())
        if eps > 0.5:
            break
        eps_eff = max(eps, _ALPHA_EPS)
        alpha = 0.5 * math.log((1.0 - eps_eff) / eps_eff)
        w = w * np.exp(-alpha * ypm * h)
        w = w / w.sum()
        if weight_trace is not None:
            weight_trace.append(w.copy())
        learners.append(tree)
        alphas.append(alpha)
        epsilons.append(eps)
    return BoostEnsemble(
        learners=learners,
        alphas=alphas,
        epsilons=epsilons,
        rounds_requested=rounds,
        master_seed=seed,
        n_features=x.shape[1],
    )


# ---------------------------------------------------------------------------
# Model specs and grid search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Declarative model choice, fit-able with any seed (used per CV fold)."""

    kind: str = "forest"
    n_trees: int = 100
    max_splits: int = 50
    features_per_split: int | None = None
    rounds: int = 50
    base_max_splits: int = 4

    def __post_init__(self) -> None:
        if self.kind not in ("forest", "rusboost"):
            raise ValueError(f"unknown model kind {self.kind!r}")

    def fit(self, rows: np.ndarray, labels: np.ndarray, seed: int):
        if self.kind == "forest":
            return fit_forest(
                rows,
                labels,
                n_trees=self.n_trees,
                max_splits=self.max_splits,
                seed=seed,
                features_per_split=self.features_per_split,
            )
        return fit_rusboost(
            rows, labels, rounds=self.rounds, base_max_splits=self.base_max_splits, seed=seed
        )

    def fitter(self):
        return lambda rows, labels, seed: self.fit(rows, labels, seed)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_trees": self.n_trees,
            "max_splits": self.max_splits,
            "features_per_split": self.features_per_split,
            "rounds": self.rounds,
            "base_max_splits": self.base_max_splits,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ModelSpec":
        return cls(
            kind=doc.get("kind", "forest"),
            n_trees=int(doc.get("n_trees", 100)),
            max_splits=int(doc.get("max_splits", 50)),
            features_per_split=doc.get("features_per_split"),
            rounds=int(doc.get("rounds", 50)),
            base_max_splits=int(doc.get("base_max_splits", 4)),
        )


@dataclass(frozen=True)
class GridSpec:
    """Ranges for the two-round lattice search."""

    trees_range: tuple[int, int]
    splits_range: tuple[int, int]
    folds: int = 5
    points: int = 5

    def __post_init__(self) -> None:
        for lo, hi in (self.trees_range, self.splits_range):
            if lo < 1 or hi < lo:
                raise ValueError("ranges must satisfy 1 <= lo <= hi")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.points < 1:
            raise ValueError("points must be positive")

    def to_dict(self) -> dict:
        return {
            "trees_range": list(self.trees_range),
            "splits_range": list(self.splits_range),
            "folds": self.folds,
            "points": self.points,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "GridSpec":
        return cls(
            trees_range=tuple(int(v) for v in doc["trees_range"]),
            splits_range=tuple(int(v) for v in doc["splits_range"]),
            folds=int(doc.get("folds", 5)),
            points=int(doc.get("points", 5)),
        )


@dataclass
class GridResult:
    n_trees: int
    max_splits: int
    auc: float
    trace: list[dict]

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_splits": self.max_splits,
            "auc": self.auc,
            "trace": self.trace,
        }


def _lattice(lo: int, hi: int, points: int) -> list[int]:
    return sorted({int(round(v)) for v in np.linspace(lo, hi, points)})


def _bracket(values: list[int], best: int) -> tuple[int, int]:
    """The neighbors of ``best`` inside its lattice (clamped at the edges)."""
    i = values.index(best)
    return values[max(i - 1, 0)], values[min(i + 1, len(values) - 1)]


def grid_search(
    dataset: LabeledDataset,
    spec: GridSpec,
    seed: int = 0,
    plan: ResamplePlan | None = None,
    paper_protocol: bool = False,
    threads: int | None = None,
) -> GridResult:
    """Coarse-to-fine forest hyperparameter search by mean CV AUC.

    Round 1 scores a points x points lattice over the given ranges with
    stratified k-fold CV; round 2 re-lattices the bracket around the
    winner. Cells are cached by value, every cell derives its RNG from
    (seed, n_trees, max_splits), and ties prefer fewer trees, then fewer
    splits. When a resample plan is supplied it is applied per training
    fold (or once globally under ``paper_protocol``).
    """
    if paper_protocol and plan is not None:
        dataset, _ = rebalance(dataset, plan)
        plan = None
    folds = stratified_fold_assignment(dataset.labels, spec.folds, seed)
    fold_sets = []
    for f in range(spec.folds):
        val_idx = np.flatnonzero(folds == f)
        train_idx = np.flatnonzero(folds != f)
        train = dataset.subset(train_idx)
        if train.n_positive == 0:
            raise ValueError(f"training fold {f} has no positive samples")
        if plan is not None:
            fold_plan_seed = _derived_seed(plan.seed, f)
            train, _ = rebalance(train, replace(plan, seed=fold_plan_seed))
        fold_sets.append((train, dataset.subset(val_idx)))

    cache: dict[tuple[int, int], float] = {}

    def evaluate(cell: tuple[int, int]) -> float:
        n_trees, max_splits = cell
        cell_seed = _derived_seed(seed, n_trees, max_splits)
        aucs = []
        for f, (train, val) in enumerate(fold_sets):
            model = fit_forest(
                train.features,
                train.labels,
                n_trees=n_trees,
                max_splits=max_splits,
                seed=_derived_seed(cell_seed, f),
            )
            if val.n_positive > 0 and val.n_negative > 0:
                _, auc = roc_auc(val.labels, model.scores(val.features))
                aucs.append(auc)
        if not aucs:
            return float("-inf")
        return float(np.mean(aucs))

    trace: list[dict] = []

    def run_round(round_no: int, tree_vals: list[int], split_vals: list[int]) -> None:
        cells = [(t, s) for t in tree_vals for s in split_vals]
        fresh = [c for c in cells if c not in cache]
        if threads and threads > 1 and len(fresh) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for cell, auc in zip(fresh, pool.map(evaluate, fresh)):
                    cache[cell] = auc
        else:
            for cell in fresh:
                cache[cell] = evaluate(cell)
        for cell in cells:
            trace.append(
                {
                    "round": round_no,
                    "n_trees": cell[0],
                    "max_splits": cell[1],
                    "mean_auc": cache[cell],
                    "cached": cell not in fresh,
                }
            )

    tree_vals = _lattice(*spec.trees_range, spec.points)
    split_vals = _lattice(*spec.splits_range, spec.points)
    run_round(1, tree_vals, split_vals)
    best = min(cache, key=lambda c: (-cache[c], c[0], c[1]))
    t_lo, t_hi = _bracket(tree_vals, best[0])
    s_lo, s_hi = _bracket(split_vals, best[1])
    run_round(2, _lattice(t_lo, t_hi, spec.points), _lattice(s_lo, s_hi, spec.points))
    best = min(cache, key=lambda c: (-cache[c], c[0], c[1]))
    return GridResult(
        n_trees=best[0], max_splits=best[1], auc=cache[best], trace=trace
    )


def predict(model, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scores in [0, 1] and hard labels at the 0.5 threshold."""
    scores = model.scores(rows)
    return scores, (scores > 0.5).astype(int)


def model_to_doc(model) -> dict:
    return model.to_doc()


def model_from_doc(doc: Mapping):
    kind = doc.get("kind")
    if kind == "forest":
        return ForestModel.from_doc(doc)
    if kind == "rusboost":
        return BoostEnsemble.from_doc(doc)
    raise ValueError(f"unknown model kind {kind!r}")
