"""Acceptance checklist for the published-result anchors.

Each test prints one "[acceptance] criterion N: ..." line so a verbose
run reads as a checklist. Criterion 8 compares against the full
MCM-2024-C tournament dataset, which cannot be redistributed with this
package; it reports SKIPPED unless TURNPOINT_MCM_DATA points at a local
copy. Criteria 1 to 7 and 9 are self-contained.
"""

from __future__ import annotations

import hashlib
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from fastapi.testclient import TestClient

from turnpoint.evaluation import ConfusionMatrix, metrics, roc_auc
from turnpoint.forest import fit_forest, fit_rusboost, fit_tree, oob_importance
from turnpoint.pipeline import (
    SkippedError,
    load_config,
    reproduce_paper,
    resolve_reference_dataset,
    run_pipeline,
)
from turnpoint.potential import imbalance_ratio_pct
from turnpoint.sampling import ResamplePlan, km_smote, rebalance, smote
from turnpoint.service import create_app
from turnpoint.service.registry import toy_config_path
from turnpoint.weights import combine_weights_additive, reference_weight_vector

from test_evaluation import pair_count_auc
from test_forest import plain_gini
from test_sampling import make_dataset, segment_residual
from test_service import record_to_event


def near_optimal_splits(x, y, tol=1e-12):
    """All (feature, threshold) pairs within ``tol`` of the best Gini gain.

    Gains computed two ways can land on either side of an exact tie by
    one ulp, so the oracle accepts every split whose gain is maximal to
    within float noise; a unique winner still forces an exact match.
    """
    n, d = x.shape
    parent = plain_gini(y)
    gains = []
    for f in range(d):
        values = np.unique(x[:, f])
        for lo, hi in zip(values, values[1:]):
            thr = (lo + hi) / 2.0
            mask = x[:, f] <= thr
            n_l = int(mask.sum())
            child = (n_l * plain_gini(y[mask]) + (n - n_l) * plain_gini(y[~mask])) / n
            gains.append((parent - child, f, thr))
    best = max((g for g, _, _ in gains), default=0.0)
    if best <= 0:
        return None
    return best, {(f, thr) for g, f, thr in gains if g >= best - tol}


@contextmanager
def criterion(n: int, budget_seconds: float | None = None):
    start = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"[acceptance] criterion {n}: FAIL")
        raise
    elapsed = time.perf_counter() - start
    if budget_seconds is not None and elapsed > budget_seconds:
        print(f"[acceptance] criterion {n}: FAIL (took {elapsed:.1f}s, budget {budget_seconds}s)")
        raise AssertionError(f"criterion {n} exceeded its {budget_seconds}s runtime budget")
    print(f"[acceptance] criterion {n}: PASS")


class TestAcceptance:
    def test_criterion_1_weight_combination(self):
        with criterion(1, budget_seconds=1.0):
            entropy = reference_weight_vector("entropy")
            for stage in ("early", "late"):
                judgment = reference_weight_vector(f"judgment_{stage}")
                combined = reference_weight_vector(f"combined_{stage}")
                blend = combine_weights_additive(judgment, entropy)
                assert float(np.max(np.abs(blend.values - combined.values))) <= 1e-3
            # First-indicator anchor: (0.0496 + 0.0113) / 2 = 0.0305.
            first = combine_weights_additive(
                reference_weight_vector("judgment_early"), entropy
            )
            assert abs(float(first.values[0]) - 0.0305) <= 1e-3

    def test_criterion_2_rebalance_arithmetic(self):
        with criterion(2, budget_seconds=10.0):
            assert imbalance_ratio_pct(532, 5295) == 10.04
            rng = np.random.default_rng(20240)
            ds = make_dataset(rng, 532, 5295)
            plan = ResamplePlan(
                method="km_smote",
                k_clusters=3,
                k_neighbors=5,
                oversampling_percentage=90,
                seed=0,
            )
            after, report = rebalance(ds, plan)
            minority = int(np.sum(after.labels == 1))
            assert abs(minority - 5297) <= 2
            assert abs(len(after.labels) - 10592) <= 2
            assert report.to_dict()["after"]["minority"] == minority

    def test_criterion_3_metric_equations(self):
        cases = [
            (5, 0, 0, 5), (0, 5, 5, 0), (0, 0, 0, 10), (10, 0, 0, 0),
            (7, 3, 3, 7), (1, 1, 1, 1), (2, 0, 3, 5), (0, 2, 3, 5),
            (9, 1, 0, 0), (3, 2, 1, 4), (50, 10, 5, 100), (1, 0, 0, 99),
            (0, 1, 0, 0), (6, 2, 2, 6), (4, 4, 4, 4), (8, 0, 2, 10),
            (2, 5, 0, 3), (1, 2, 3, 4), (12, 3, 4, 11), (532, 100, 68, 5195),
        ]
        with criterion(3, budget_seconds=5.0):
            for tp, fp, fn, tn in cases:
                m = metrics(ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn))
                total = tp + fp + fn + tn
                pos, neg = tp + fn, tn + fp
                assert m.accuracy == (tp + tn) / total * 100.0
                assert m.recall == (tp / pos * 100.0 if pos else None)
                expected_g = (
                    math.sqrt((tp / pos) * (tn / neg)) * 100.0 if pos and neg else None
                )
                if expected_g is None:
                    assert m.g_mean is None
                else:
                    assert abs(m.g_mean - expected_g) < 1e-12
            rng = np.random.default_rng(31)
            for _ in range(100):
                n = int(rng.integers(2, 51))
                y = rng.integers(0, 2, size=n)
                y[0], y[1] = 0, 1
                s = np.round(rng.random(n), 2)  # rounding forces score ties
                _, auc = roc_auc(y, s)
                assert abs(auc - pair_count_auc(y, s)) <= 1e-9

    def test_criterion_4_first_split_oracle(self):
        rng = np.random.default_rng(44)
        with criterion(4, budget_seconds=30.0):
            for _ in range(100):
                n = int(rng.integers(4, 31))
                d = int(rng.integers(1, 4))
                x = rng.normal(size=(n, d))
                y = rng.integers(0, 2, size=n)
                expected = near_optimal_splits(x, y)
                tree = fit_tree(x, y, max_splits=1, features_per_split=d)
                if expected is None:
                    assert tree.split_count == 0
                else:
                    best_gain, winners = expected
                    assert (int(tree.feature[0]), float(tree.threshold[0])) in winners
                    assert abs(float(tree.gain[0]) - best_gain) <= 1e-12

    def test_criterion_5_resampling_geometry(self):
        rng = np.random.default_rng(55)
        minority = rng.normal(size=(200, 14))
        with criterion(5, budget_seconds=30.0):
            plan = ResamplePlan(
                method="km_smote", target=5200, k_clusters=3, k_neighbors=5, seed=9
            )
            batches = [
                smote(minority, n_per_sample=25, k_neighbors=5, seed=9),
                km_smote(minority, plan),
            ]
            assert sum(len(b.samples) for b in batches) == 10000
            for batch in batches:
                for x, a, b in zip(batch.samples, batch.parent_a, batch.parent_b):
                    assert segment_residual(x, a, b) <= 1e-12
            digests = {
                hashlib.sha256(
                    smote(minority, 25, 5, seed=9, threads=t).samples.tobytes()
                ).hexdigest()
                for t in (None, 1, 2, 8)
            }
            assert len(digests) == 1
            digests = {
                hashlib.sha256(km_smote(minority, plan, threads=t).samples.tobytes()).hexdigest()
                for t in (None, 1, 2, 8)
            }
            assert len(digests) == 1

    def test_criterion_6_boosting_contract(self):
        with criterion(6):
            # Even odds: 32 indistinguishable rows, half of each class, give
            # every round a weighted error of exactly one half and alpha 0.
            x = np.zeros((32, 2))
            y = np.array([1] * 16 + [0] * 16)
            trace: list = []
            even = fit_rusboost(x, y, rounds=4, seed=1, weight_trace=trace)
            assert even.rounds_completed == 4
            assert even.epsilons == [0.5] * 4
            assert even.alphas == [0.0] * 4
            for w in trace:
                assert abs(float(np.sum(w)) - 1.0) <= 1e-12
            # Adversarial set: indistinguishable rows at 3/97 make the first
            # learner's full-set error 0.97 > 0.5, so it is discarded and
            # training halts with an empty ensemble.
            x_bad = np.zeros((100, 2))
            y_bad = np.array([1] * 3 + [0] * 97)
            halted = fit_rusboost(x_bad, y_bad, rounds=5, seed=2)
            assert halted.rounds_completed == 0
            with pytest.raises(ValueError, match="empty ensemble"):
                halted.scores(x_bad)

    def test_criterion_7_live_batch_equivalence(self, tmp_path, toy_records):
        with criterion(7):
            result = run_pipeline(load_config(toy_config_path()), tmp_path, upto="label")
            batch_q = result.artifact("quantify")["per_match"]["toy-0001"]
            batch_labels = result.artifact("label")["per_match"]["toy-0001"]["labels"]
            with TestClient(create_app()) as client:
                resp = client.post(
                    "/sessions",
                    json={"player_a": "A", "player_b": "B", "length_hint": 10},
                )
                sid = resp.json()["session"]["session_id"]
                for record in toy_records:
                    posted = client.post(
                        f"/sessions/{sid}/points", json=record_to_event(record)
                    )
                    assert posted.status_code == 200
                series = client.get(f"/sessions/{sid}/state").json()["series"]
            np.testing.assert_allclose(series["p_a"], batch_q["p_a"], rtol=0, atol=1e-12)
            np.testing.assert_allclose(series["p_b"], batch_q["p_b"], rtol=0, atol=1e-12)
            assert series["labels"] == batch_labels

    def test_criterion_8_reference_dataset_metrics(self, tmp_path):
        start = time.perf_counter()
        try:
            resolve_reference_dataset(None)
        except SkippedError as exc:
            print(f"[acceptance] criterion 8: SKIPPED ({exc})")
            pytest.skip(str(exc))
        with criterion(8, budget_seconds=1800.0):
            doc = reproduce_paper(None, tmp_path, seed=0)
            rows = {r["quantity"]: r for r in doc["rows"]}
            assert abs(rows["train_recall"]["delta"]) <= 8.0
            assert abs(rows["test_recall"]["delta"]) <= 8.0
            assert doc["auc"]["train_cv"] >= 0.85
            assert doc["auc"]["test"] >= 0.70
            assert time.perf_counter() - start < 1800.0

    def test_criterion_9_importance_sanity(self):
        with criterion(9):
            rng = np.random.default_rng(990)
            n, d = 400, 14
            x = rng.normal(size=(n, d))
            y = rng.integers(0, 2, size=n)
            leaky = np.column_stack([x, y.astype(float)])
            model = fit_forest(leaky, y, n_trees=200, max_splits=8, seed=3)
            importance = oob_importance(model, leaky, y, seed=4)
            assert int(np.argmax(importance)) == 14
            assert importance[14] > 0.1
            noise_model = fit_forest(x, y, n_trees=200, max_splits=8, seed=5)
            noise = oob_importance(noise_model, x, y, seed=6)
            assert float(np.max(np.abs(noise))) < 0.02
