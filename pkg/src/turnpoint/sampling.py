"""Class rebalancing for rare turn labels.

Turning points are rare (roughly one positive per ten negatives), so
models need either synthetic minority samples (SMOTE, or KM-SMOTE which
interpolates between k-means cluster centers and members) or majority
undersampling (the per-round step of the boosting ensemble).

All generators are deterministic: randomness flows from one seed through
fixed substreams (per minority sample, per cluster), so results do not
depend on processing order or thread count.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

from .potential import LabeledDataset, imbalance_ratio_pct

RESAMPLE_METHODS = ("smote", "km_smote", "rus")

# Uniform draw in [0, 1); tests may substitute a constant to pin the
# interpolation endpoints.
RandHook = Callable[[np.random.Generator], float]


def _default_rand(rng: np.random.Generator) -> float:
    return float(rng.random())


@dataclass(frozen=True)
class ResamplePlan:
    """Serializable description of one rebalancing pass."""

    method: str
    target: int | None = None
    k_neighbors: int = 5
    k_clusters: int = 3
    oversampling_percentage: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in RESAMPLE_METHODS:
            raise ValueError(f"method must be one of {RESAMPLE_METHODS}, got {self.method!r}")
        if self.target is not None and self.target < 0:
            raise ValueError("target must be non-negative")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be positive")
        if self.k_clusters < 1:
            raise ValueError("k_clusters must be positive")
        if self.oversampling_percentage is not None and self.oversampling_percentage <= 0:
            raise ValueError("oversampling_percentage must be positive")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "target": self.target,
            "k_neighbors": self.k_neighbors,
            "k_clusters": self.k_clusters,
            "oversampling_percentage": self.oversampling_percentage,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ResamplePlan":
        return cls(
            method=doc["method"],
            target=doc.get("target"),
            k_neighbors=int(doc.get("k_neighbors", 5)),
            k_clusters=int(doc.get("k_clusters", 3)),
            oversampling_percentage=doc.get("oversampling_percentage"),
            seed=int(doc.get("seed", 0)),
        )


# ---------------------------------------------------------------------------
# K-means
# ---------------------------------------------------------------------------


@dataclass
class ClusterModel:
    k: int
    centers: np.ndarray
    assignment: np.ndarray
    inertia: float
    inertia_trace: list[float]
    n_iterations: int


def _sq_dist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return (diff * diff).sum(axis=2)


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=float)
    centers[0] = points[int(rng.integers(n))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))  # every point already sits on a center
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = points[idx]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def kmeans(
    points: np.ndarray,
    k: int,
    seed,
    max_iter: int = 300,
    tol: float = 1e-9,
) -> ClusterModel:
    """Lloyd's algorithm with seeded careful initialization.

    Stops when no center moves more than ``tol`` or after ``max_iter``
    rounds. A cluster that loses all members is re-seeded to the point
    currently farthest from its assigned center. The recorded inertia
    trace never increases.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] < 1:
        raise ValueError("points must be a 2-d array")
    n = pts.shape[0]
    if k <= 0:
        raise ValueError("k must be positive")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} available points")

    rng = np.random.default_rng(seed)
    centers = _plusplus_init(pts, k, rng)
    trace: list[float] = []
    assign = np.zeros(n, dtype=int)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = _sq_dist(pts, centers)
        assign = d2.argmin(axis=1)
        empties = [c for c in range(k) if not np.any(assign == c)]
        if empties:
            for c in empties:
                far = int(d2[np.arange(n), assign].argmax())
                centers[c] = pts[far]
                d2 = _sq_dist(pts, centers)
                assign = d2.argmin(axis=1)
        trace.append(float(d2[np.arange(n), assign].sum()))
        new_centers = centers.copy()
        for c in range(k):
            members = pts[assign == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            break
    d2 = _sq_dist(pts, centers)
    assign = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), assign].sum())
    trace.append(inertia)
    return ClusterModel(
        k=k,
        centers=centers,
        assignment=assign,
        inertia=inertia,
        inertia_trace=trace,
        n_iterations=iterations,
    )


# ---------------------------------------------------------------------------
# Synthetic oversampling
# ---------------------------------------------------------------------------


@dataclass
class SyntheticBatch:
    """Generated samples plus the two parents of each (for audit).

    Every sample lies on the closed segment between its parents; the
    parents are stored as coordinates because KM-SMOTE interpolates from
    cluster centers, which are not input rows.
    """

    samples: np.ndarray
    parent_a: np.ndarray
    parent_b: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.samples.tobytes())
        h.update(self.parent_a.tobytes())
        h.update(self.parent_b.tobytes())
        return h.hexdigest()


def _sample_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, index)))


def _smote_one(
    minority: np.ndarray,
    i: int,
    count: int,
    neighbor_ids: np.ndarray,
    seed: int,
    rand: RandHook,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = _sample_stream(seed, i)
    k = len(neighbor_ids)
    if count <= k:
        picks = rng.choice(k, size=count, replace=False)
    else:
        picks = rng.choice(k, size=count, replace=True)
    x = minority[i]
    out = np.empty((count, minority.shape[1]), dtype=float)
    pb = np.empty_like(out)
    for j, p in enumerate(picks):
        theta = minority[neighbor_ids[p]]
        u = rand(rng)
        out[j] = x + u * (theta - x)
        pb[j] = theta
    pa = np.broadcast_to(x, out.shape).copy()
    return out, pa, pb


def _run_counts(
    minority: np.ndarray,
    counts: np.ndarray,
    k_neighbors: int,
    seed: int,
    threads: int | None,
    rand: RandHook,
) -> SyntheticBatch:
    m, d = minority.shape
    if m <= k_neighbors:
        raise ValueError(
            f"need more than k_neighbors={k_neighbors} minority samples, have {m}"
        )
    # k nearest neighbors per sample, self excluded, stable tie order.
    d2 = _sq_dist(minority, minority)
    np.fill_diagonal(d2, np.inf)
    neighbor_ids = np.argsort(d2, axis=1, kind="stable")[:, :k_neighbors]

    def job(i: int):
        return _smote_one(minority, i, int(counts[i]), neighbor_ids[i], seed, rand)

    active = [i for i in range(m) if counts[i] > 0]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, active))
    else:
        parts = [job(i) for i in active]
    if not parts:
        empty = np.empty((0, d), dtype=float)
        return SyntheticBatch(empty, empty.copy(), empty.copy())
    return SyntheticBatch(
        samples=np.concatenate([p[0] for p in parts], axis=0),
        parent_a=np.concatenate([p[1] for p in parts], axis=0),
        parent_b=np.concatenate([p[2] for p in parts], axis=0),
    )


def smote(
    minority: np.ndarray,
    n_per_sample: int,
    k_neighbors: int,
    seed: int,
    threads: int | None = None,
    rand: RandHook | None = None,
) -> SyntheticBatch:
    """Neighbor interpolation: each sample spawns ``n_per_sample`` synthetics.

    For sample x, a draw theta from its k nearest minority neighbors
    (without replacement while the count allows, with replacement beyond)
    gives x_new = x + u * (theta - x) with u uniform in [0, 1).
    """
    minority = np.asarray(minority, dtype=float)
    if n_per_sample < 0:
        raise ValueError("n_per_sample must be non-negative")
    counts = np.full(minority.shape[0], n_per_sample, dtype=int)
    return _run_counts(minority, counts, k_neighbors, seed, threads, rand or _default_rand)


def _proportional_counts(sizes: np.ndarray, total: int) -> np.ndarray:
    """Split ``total`` across groups proportionally to ``sizes``.

    Floor quotas first, then hand out the remainder by largest
    fractional part (ties to the lower index), so the split is
    deterministic and exact.
    """
    sizes = np.asarray(sizes, dtype=float)
    if total == 0:
        return np.zeros(len(sizes), dtype=int)
    quota = total * sizes / sizes.sum()
    counts = np.floor(quota).astype(int)
    rem = total - counts.sum()
    if rem > 0:
        frac = quota - counts
        order = sorted(range(len(sizes)), key=lambda c: (-frac[c], c))
        for c in order[:rem]:
            counts[c] += 1
    return counts


def km_smote(
    minority: np.ndarray,
    plan: ResamplePlan,
    threads: int | None = None,
    rand: RandHook | None = None,
) -> SyntheticBatch:
    """Cluster-center interpolation.

    The minority class is clustered (k-means, ``plan.k_clusters``); the
    requested synthetic count (``plan.target`` minus the current minority
    count) is split across clusters proportionally to their sizes; each
    synthetic interpolates from the cluster center toward a uniformly
    chosen member: x_new = c + u * (x - c). Per-cluster substreams keep
    the output independent of cluster processing order.
    """
    minority = np.asarray(minority, dtype=float)
    rand = rand or _default_rand
    m = minority.shape[0]
    if plan.target is None:
        raise ValueError("plan.target must be set (desired total minority count)")
    n_synth = plan.target - m
    if n_synth < 0:
        raise ValueError(f"target {plan.target} below current minority count {m}")
    if m < plan.k_clusters:
        raise ValueError(f"minority count {m} below k_clusters {plan.k_clusters}")

    model = kmeans(minority, plan.k_clusters, np.random.SeedSequence((plan.seed, 0)))
    sizes = np.array([(model.assignment == c).sum() for c in range(plan.k_clusters)])
    counts = _proportional_counts(sizes, n_synth)

    def job(c: int):
        rng = _sample_stream(plan.seed, c + 1)
        members = minority[model.assignment == c]
        center = model.centers[c]
        out = np.empty((counts[c], minority.shape[1]), dtype=float)
        pb = np.empty_like(out)
        for j in range(counts[c]):
            x = members[int(rng.integers(len(members)))]
            u = rand(rng)
            out[j] = center + u * (x - center)
            pb[j] = x
        pa = np.broadcast_to(center, out.shape).copy()
        return out, pa, pb

    active = [c for c in range(plan.k_clusters) if counts[c] > 0]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, active))
    else:
        parts = [job(c) for c in active]
    if not parts:
        empty = np.empty((0, minority.shape[1]), dtype=float)
        return SyntheticBatch(empty, empty.copy(), empty.copy())
    return SyntheticBatch(
        samples=np.concatenate([p[0] for p in parts], axis=0),
        parent_a=np.concatenate([p[1] for p in parts], axis=0),
        parent_b=np.concatenate([p[2] for p in parts], axis=0),
    )


# ---------------------------------------------------------------------------
# Undersampling and the rebalance entry point
# ---------------------------------------------------------------------------


def random_undersample(
    samples: np.ndarray,
    target: int,
    weights: np.ndarray | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Indices of a without-replacement subsample, ascending.

    Selection probability follows ``weights`` (uniform when absent).
    ``target`` equal to the sample count returns every index in order.
    """
    n = np.asarray(samples).shape[0]
    if target > n:
        raise ValueError(f"target {target} exceeds available {n}")
    if target < 0:
        raise ValueError("target must be non-negative")
    if target == n:
        return np.arange(n)
    if weights is None:
        p = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=float)
        if len(w) != n or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be non-negative, finite, one per sample")
        if w.sum() <= 0:
            raise ValueError("weights sum to zero")
        p = w / w.sum()
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n, size=target, replace=False, p=p)
    return np.sort(chosen)


@dataclass(frozen=True)
class RebalanceReport:
    """Before/after class counts in the usual summary layout."""

    method: str
    before_total: int
    before_minority: int
    before_majority: int
    before_imbalance_pct: float
    after_total: int
    after_minority: int
    after_majority: int
    after_imbalance_pct: float
    synthetic_count: int = 0
    removed_count: int = 0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "before": {
                "total": self.before_total,
                "minority": self.before_minority,
                "majority": self.before_majority,
                "imbalance_pct": self.before_imbalance_pct,
            },
            "after": {
                "total": self.after_total,
                "minority": self.after_minority,
                "majority": self.after_majority,
                "imbalance_pct": self.after_imbalance_pct,
            },
            "synthetic_count": self.synthetic_count,
            "removed_count": self.removed_count,
        }


def _resolve_target(plan: ResamplePlan, n_minority: int, n_majority: int) -> int:
    """Total minority count the oversampling should reach."""
    if plan.oversampling_percentage is not None:
        return n_minority + math.floor(plan.oversampling_percentage / 100.0 * n_majority)
    if plan.target is not None:
        return plan.target
    return n_majority  # plain parity


def rebalance(dataset: LabeledDataset, plan: ResamplePlan) -> tuple[LabeledDataset, RebalanceReport]:
    """Bring the two classes of a labeled dataset to (near) parity.

    Oversampling methods append synthetics labeled 1; undersampling
    removes majority rows. Original rows are never modified, and the
    result's class counts must land within 2 of each other (a
    percentage-driven target that misses that band is an error).
    """
    y = dataset.labels
    n_pos, n_neg = dataset.n_positive, dataset.n_negative
    if n_pos == 0:
        raise ValueError("no minority (label-1) samples to rebalance around")

    def report(after: LabeledDataset, synth: int, removed: int) -> RebalanceReport:
        return RebalanceReport(
            method=plan.method,
            before_total=dataset.n_rows,
            before_minority=n_pos,
            before_majority=n_neg,
            before_imbalance_pct=imbalance_ratio_pct(n_pos, n_neg),
            after_total=after.n_rows,
            after_minority=after.n_positive,
            after_majority=after.n_negative,
            after_imbalance_pct=imbalance_ratio_pct(after.n_positive, after.n_negative),
            synthetic_count=synth,
            removed_count=removed,
        )

    if abs(n_pos - n_neg) <= 2:
        return dataset, report(dataset, 0, 0)

    minority_rows = dataset.features[y == 1]
    if plan.method == "rus":
        target = plan.target if plan.target is not None else n_pos
        if abs(target - n_pos) > 2:
            raise ValueError(
                f"undersampling target {target} would leave classes unbalanced"
                f" (minority {n_pos})"
            )
        maj_idx = np.flatnonzero(y == 0)
        keep_local = random_undersample(dataset.features[maj_idx], target, None, plan.seed)
        keep = np.sort(np.concatenate([np.flatnonzero(y == 1), maj_idx[keep_local]]))
        after = dataset.subset(keep)
        return after, report(after, 0, dataset.n_rows - after.n_rows)

    target = _resolve_target(plan, n_pos, n_neg)
    if abs(target - n_neg) > 2:
        raise ValueError(
            f"oversampling target {target} would leave classes unbalanced"
            f" (majority {n_neg})"
        )
    n_synth = target - n_pos
    if plan.method == "km_smote":
        batch = km_smote(minority_rows, replace(plan, target=target))
    else:
        counts = _proportional_counts(np.ones(n_pos), n_synth)
        batch = _run_counts(
            minority_rows, counts, plan.k_neighbors, plan.seed, None, _default_rand
        )
    addition = LabeledDataset(
        features=batch.samples,
        labels=np.ones(batch.n_samples, dtype=np.int8),
        point_index=np.zeros(batch.n_samples, dtype=int),
        match_ids=("synthetic",) * batch.n_samples,
        feature_names=dataset.feature_names,
    )
    after = LabeledDataset.concat([dataset, addition])
    return after, report(after, batch.n_samples, 0)
