"""Clustering, synthetic oversampling and the rebalance entry point."""

from __future__ import annotations

import numpy as np
import pytest

from turnpoint.potential import LabeledDataset
from turnpoint.sampling import (
    ResamplePlan,
    _proportional_counts,
    kmeans,
    km_smote,
    random_undersample,
    rebalance,
    smote,
)


def segment_residual(x, a, b):
    """Distance of x from the closed segment [a, b]."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(x - a))
    u = float((x - a) @ ab) / denom
    u = min(max(u, 0.0), 1.0)
    return float(np.linalg.norm(x - (a + u * ab)))


def make_dataset(rng, n_pos, n_neg, d=14):
    features = np.concatenate(
        [rng.normal(1.0, 0.5, size=(n_pos, d)), rng.normal(-1.0, 0.5, size=(n_neg, d))]
    )
    labels = np.concatenate([np.ones(n_pos, dtype=np.int8), np.zeros(n_neg, dtype=np.int8)])
    order = rng.permutation(n_pos + n_neg)
    return LabeledDataset(
        features=features[order],
        labels=labels[order],
        point_index=np.arange(1, n_pos + n_neg + 1),
        match_ids=("m",) * (n_pos + n_neg),
        feature_names=tuple(f"f{i}" for i in range(d)),
    )


class TestKmeans:
    def test_recovers_separated_blobs(self):
        rng = np.random.default_rng(41)
        blobs = [
            rng.normal(center, 0.3, size=(40, 2))
            for center in ((0.0, 0.0), (10.0, 0.0), (0.0, 10.0))
        ]
        points = np.concatenate(blobs)
        model = kmeans(points, 3, seed=1)
        # Each blob must land in exactly one cluster.
        groups = [set(model.assignment[i * 40 : (i + 1) * 40]) for i in range(3)]
        assert all(len(g) == 1 for g in groups)
        assert {g.pop() for g in groups} == {0, 1, 2}

    def test_inertia_trace_never_increases(self):
        rng = np.random.default_rng(42)
        for trial in range(10):
            points = rng.uniform(0, 1, size=(60, 3))
            model = kmeans(points, int(rng.integers(2, 8)), seed=trial)
            trace = model.inertia_trace
            assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
            assert model.inertia == trace[-1]

    def test_heavy_duplication_still_fills_clusters(self):
        # Ten copies of three distinct points, k=3: duplicates collapse
        # distances to zero and force the empty-cluster rescue path.
        base = np.array([[0.0, 0.0], [5.0, 5.0], [9.0, 0.0]])
        points = np.repeat(base, 10, axis=0)
        model = kmeans(points, 3, seed=0)
        assert sorted(set(model.assignment)) == [0, 1, 2]
        assert model.inertia < 1e-18

    def test_determinism(self):
        rng = np.random.default_rng(43)
        points = rng.uniform(0, 1, size=(50, 4))
        a = kmeans(points, 4, seed=9)
        b = kmeans(points, 4, seed=9)
        np.testing.assert_array_equal(a.centers, b.centers)
        np.testing.assert_array_equal(a.assignment, b.assignment)

    def test_k_exceeding_points_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            kmeans(np.zeros((3, 2)), 4, seed=0)


class TestSmote:
    def test_synthetics_sit_between_their_parents(self):
        rng = np.random.default_rng(44)
        minority = rng.normal(size=(30, 5))
        batch = smote(minority, n_per_sample=4, k_neighbors=6, seed=3)
        assert batch.n_samples == 120
        for i in range(batch.n_samples):
            r = segment_residual(batch.samples[i], batch.parent_a[i], batch.parent_b[i])
            assert r <= 1e-12

    def test_first_parent_is_the_seed_sample(self):
        rng = np.random.default_rng(45)
        minority = rng.normal(size=(10, 3))
        batch = smote(minority, n_per_sample=2, k_neighbors=3, seed=0)
        rows = {tuple(row) for row in minority}
        for i in range(batch.n_samples):
            assert tuple(batch.parent_a[i]) in rows
            assert tuple(batch.parent_b[i]) in rows

    def test_too_few_samples_for_neighbors_rejected(self):
        with pytest.raises(ValueError, match="k_neighbors"):
            smote(np.zeros((4, 2)), n_per_sample=1, k_neighbors=5, seed=0)

    def test_zero_count_yields_empty_batch(self):
        batch = smote(np.eye(6), n_per_sample=0, k_neighbors=2, seed=0)
        assert batch.n_samples == 0

    def test_thread_count_does_not_change_output(self):
        rng = np.random.default_rng(46)
        minority = rng.normal(size=(40, 6))
        digests = {
            smote(minority, 5, 5, seed=11, threads=t).digest()
            for t in (None, 1, 2, 4)
        }
        assert len(digests) == 1

    def test_same_seed_same_output(self):
        rng = np.random.default_rng(47)
        minority = rng.normal(size=(25, 4))
        assert (
            smote(minority, 3, 4, seed=5).digest()
            == smote(minority, 3, 4, seed=5).digest()
        )
        assert (
            smote(minority, 3, 4, seed=5).digest()
            != smote(minority, 3, 4, seed=6).digest()
        )


class TestKmSmote:
    def plan(self, target, seed=13):
        return ResamplePlan(
            method="km_smote", target=target, k_clusters=3, k_neighbors=5, seed=seed
        )

    def test_synthetics_sit_between_center_and_member(self):
        rng = np.random.default_rng(48)
        minority = rng.normal(size=(40, 5))
        batch = km_smote(minority, self.plan(target=140))
        assert batch.n_samples == 100
        for i in range(batch.n_samples):
            r = segment_residual(batch.samples[i], batch.parent_a[i], batch.parent_b[i])
            assert r <= 1e-12

    def test_first_parent_is_a_cluster_center(self):
        rng = np.random.default_rng(49)
        minority = rng.normal(size=(30, 4))
        plan = self.plan(target=90)
        batch = km_smote(minority, plan)
        model = kmeans(minority, plan.k_clusters, np.random.SeedSequence((plan.seed, 0)))
        centers = {tuple(c) for c in model.centers}
        for i in range(batch.n_samples):
            assert tuple(batch.parent_a[i]) in centers

    def test_target_below_count_rejected(self):
        with pytest.raises(ValueError, match="below"):
            km_smote(np.zeros((10, 2)), self.plan(target=5))

    def test_fewer_points_than_clusters_rejected(self):
        with pytest.raises(ValueError, match="k_clusters"):
            km_smote(np.zeros((2, 2)), self.plan(target=10))

    def test_thread_count_does_not_change_output(self):
        rng = np.random.default_rng(50)
        minority = rng.normal(size=(35, 6))
        digests = {
            km_smote(minority, self.plan(target=150), threads=t).digest()
            for t in (None, 1, 2, 4)
        }
        assert len(digests) == 1


class TestProportionalCounts:
    def test_exact_split(self):
        np.testing.assert_array_equal(
            _proportional_counts(np.array([3, 2, 1]), 10), [5, 3, 2]
        )

    def test_remainder_tie_goes_to_the_earlier_group(self):
        np.testing.assert_array_equal(_proportional_counts(np.array([1, 1]), 3), [2, 1])

    def test_total_preserved(self):
        rng = np.random.default_rng(51)
        for _ in range(50):
            sizes = rng.integers(1, 30, size=int(rng.integers(2, 8)))
            total = int(rng.integers(0, 100))
            counts = _proportional_counts(sizes, total)
            assert counts.sum() == total
            assert np.all(counts >= 0)


class TestUndersample:
    def test_indices_ascending_without_replacement(self):
        rng = np.random.default_rng(52)
        samples = rng.normal(size=(50, 3))
        idx = random_undersample(samples, 20, seed=1)
        assert len(idx) == 20
        assert len(set(idx.tolist())) == 20
        assert np.all(np.diff(idx) > 0)

    def test_full_target_returns_identity(self):
        idx = random_undersample(np.zeros((7, 2)), 7, seed=0)
        np.testing.assert_array_equal(idx, np.arange(7))

    def test_zero_weight_rows_never_chosen(self):
        samples = np.zeros((10, 2))
        weights = np.array([1.0] * 5 + [0.0] * 5)
        for seed in range(10):
            idx = random_undersample(samples, 5, weights, seed=seed)
            assert np.all(idx < 5)

    def test_target_above_count_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            random_undersample(np.zeros((3, 2)), 4)


class TestRebalance:
    def test_smote_reaches_percentage_target(self):
        rng = np.random.default_rng(53)
        ds = make_dataset(rng, 50, 500)
        plan = ResamplePlan(method="smote", oversampling_percentage=90.0, seed=2)
        after, report = rebalance(ds, plan)
        # 50 + floor(0.9 * 500) = 500 minority, parity with the majority.
        assert after.n_positive == 500
        assert after.n_negative == 500
        assert report.synthetic_count == 450
        assert report.after_imbalance_pct == 100.0

    def test_km_smote_parity_counts(self):
        rng = np.random.default_rng(54)
        ds = make_dataset(rng, 40, 360)
        plan = ResamplePlan(method="km_smote", k_clusters=3, seed=4)
        after, report = rebalance(ds, plan)
        assert after.n_positive == 360
        assert after.n_negative == 360
        assert report.method == "km_smote"

    def test_synthetic_rows_are_bookkept(self):
        rng = np.random.default_rng(55)
        ds = make_dataset(rng, 30, 90)
        after, _ = rebalance(ds, ResamplePlan(method="smote", seed=1))
        fresh = [i for i, m in enumerate(after.match_ids) if m == "synthetic"]
        assert len(fresh) == 60
        assert all(after.labels[i] == 1 for i in fresh)
        assert all(after.point_index[i] == 0 for i in fresh)

    def test_originals_never_altered(self):
        rng = np.random.default_rng(56)
        ds = make_dataset(rng, 25, 100)
        before = ds.features.copy()
        for method in ("smote", "km_smote"):
            after, _ = rebalance(ds, ResamplePlan(method=method, seed=3))
            np.testing.assert_array_equal(ds.features, before)
            np.testing.assert_array_equal(after.features[: ds.n_rows], before)

    def test_near_parity_is_a_no_op(self):
        rng = np.random.default_rng(57)
        ds = make_dataset(rng, 50, 52)
        after, report = rebalance(ds, ResamplePlan(method="smote", seed=0))
        assert after is ds
        assert report.synthetic_count == 0
        assert report.removed_count == 0

    def test_percentage_missing_parity_band_rejected(self):
        rng = np.random.default_rng(58)
        ds = make_dataset(rng, 50, 500)
        plan = ResamplePlan(method="smote", oversampling_percentage=50.0, seed=0)
        with pytest.raises(ValueError, match="unbalanced"):
            rebalance(ds, plan)

    def test_rus_keeps_all_minority_rows(self):
        rng = np.random.default_rng(59)
        ds = make_dataset(rng, 20, 200)
        after, report = rebalance(ds, ResamplePlan(method="rus", seed=6))
        assert after.n_positive == 20
        assert after.n_negative == 20
        assert report.removed_count == 180
        kept_pos = after.features[after.labels == 1]
        orig_pos = ds.features[ds.labels == 1]
        np.testing.assert_array_equal(
            np.sort(kept_pos, axis=0), np.sort(orig_pos, axis=0)
        )

    def test_no_minority_rejected(self):
        rng = np.random.default_rng(60)
        ds = make_dataset(rng, 0, 30)
        with pytest.raises(ValueError, match="minority"):
            rebalance(ds, ResamplePlan(method="smote"))

    def test_determinism_across_runs(self):
        rng = np.random.default_rng(61)
        ds = make_dataset(rng, 40, 200)
        plan = ResamplePlan(method="km_smote", seed=8)
        a, _ = rebalance(ds, plan)
        b, _ = rebalance(ds, plan)
        np.testing.assert_array_equal(a.features, b.features)

    def test_plan_validation(self):
        with pytest.raises(ValueError, match="method"):
            ResamplePlan(method="nonsense")
        with pytest.raises(ValueError, match="k_neighbors"):
            ResamplePlan(method="smote", k_neighbors=0)
        with pytest.raises(ValueError, match="oversampling"):
            ResamplePlan(method="smote", oversampling_percentage=-5.0)

    def test_plan_dict_round_trip(self):
        plan = ResamplePlan(
            method="km_smote",
            k_clusters=4,
            k_neighbors=7,
            oversampling_percentage=90.0,
            seed=12,
        )
        assert ResamplePlan.from_dict(plan.to_dict()) == plan
