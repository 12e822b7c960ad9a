"""Confusion-matrix metrics, rho family, R2, impact measures."""

import numpy as np
import pandas as pd
import pytest

from tourmine.evaluation import (
    ConfusionMatrix,
    classification_metrics,
    direction_of_impact,
    evaluate_model,
    impact_report,
    magnitude_of_impact,
    regression_r2,
    rho_metrics,
)
from tourmine.mtdt import MultiTaskDecisionTree


def binary_cm():
    # observed pos: TP=40, FN=10; observed neg: FP=20, TN=30
    return ConfusionMatrix(("pos", "neg"), np.array([[40, 10], [20, 30]]))


class TestClassificationMetrics:
    def test_identity_matrix_all_ones(self):
        cm = ConfusionMatrix(("a", "b", "c"), np.eye(3) * 7)
        report = classification_metrics(cm)
        assert report.macro_f1 == 1.0
        assert report.micro_f1 == 1.0
        assert report.one_vs_all_accuracy == 1.0
        assert report.kappa == 1.0
        for stats in report.per_class.values():
            assert stats.f1 == 1.0
            assert stats.balanced_accuracy == 1.0

    def test_binary_fixture(self):
        report = classification_metrics(binary_cm())
        pos = report.per_class["pos"]
        assert pos.sensitivity == pytest.approx(0.8, abs=1e-12)
        assert pos.specificity == pytest.approx(0.6, abs=1e-12)
        assert pos.precision == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert pos.balanced_accuracy == pytest.approx(0.7, abs=1e-12)
        assert pos.f1 == pytest.approx(8.0 / 11.0, abs=1e-12)

    def test_wrg_uniform_four_classes(self):
        cm = ConfusionMatrix(tuple("abcd"), np.full((4, 4), 5.0))
        assert classification_metrics(cm).wrg == pytest.approx(0.25, abs=1e-12)

    def test_wrg_with_explicit_priors(self):
        report = classification_metrics(binary_cm(), class_priors=[0.5, 0.5])
        assert report.wrg == pytest.approx(0.5)

    def test_micro_f1_equals_accuracy(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            k = int(rng.integers(2, 5))
            counts = rng.integers(0, 30, size=(k, k))
            if counts.sum() == 0:
                continue
            cm = ConfusionMatrix(tuple(f"c{i}" for i in range(k)), counts.astype(float))
            report = classification_metrics(cm)
            accuracy = np.trace(counts) / counts.sum()
            assert report.micro_f1 == pytest.approx(accuracy, abs=1e-12)

    def test_kappa_zero_for_marginal_random(self):
        # predictions distributed exactly like marginal chance agreement
        observed = np.array([[16, 24], [24, 36]], dtype=float)  # rows 0.4/0.6, cols 0.4/0.6
        cm = ConfusionMatrix(("a", "b"), observed)
        assert classification_metrics(cm).kappa == pytest.approx(0.0, abs=1e-12)

    def test_absent_class_marked_undefined(self):
        cm = ConfusionMatrix(("a", "b", "ghost"), np.array([[5, 1, 0], [2, 4, 0], [0, 0, 0]]))
        report = classification_metrics(cm)
        assert report.per_class["ghost"].f1 is None
        defined = [report.per_class[c].f1 for c in ("a", "b")]
        assert report.macro_f1 == pytest.approx(np.mean(defined))


class TestRho:
    def fit_tree(self, X, y, **kwargs):
        return MultiTaskDecisionTree(**kwargs).fit(X, y)

    def test_pure_leaves_give_exactly_one(self):
        X = pd.DataFrame({"A": ["a"] * 3 + ["b"] * 3 + ["c"] * 3})
        y = np.column_stack(
            [np.repeat(["x", "y", "z"], 3).astype(object), np.ones(9, dtype=object)]
        )
        tree = self.fit_tree(X, y)
        metrics = rho_metrics(tree, X, y[:, 0])
        assert metrics.rho == 1.0
        assert metrics.rho_incr == 1.0

    def test_root_only_tree_gives_zero_increment(self):
        X = pd.DataFrame({"A": ["a"] * 8})
        labels = np.array(["x"] * 5 + ["y"] * 3, dtype=object)
        y = np.column_stack([labels, np.ones(8, dtype=object)])
        tree = self.fit_tree(X, y)
        assert tree.tree_.is_leaf
        metrics = rho_metrics(tree, X, labels)
        assert metrics.rho == metrics.rho0
        assert metrics.rho_incr == 0.0

    def test_uniform_four_class_root(self):
        X = pd.DataFrame({"A": ["a"] * 8})
        labels = np.array(["c1", "c2", "c3", "c4"] * 2, dtype=object)
        y = np.column_stack([labels, np.ones(8, dtype=object)])
        metrics = rho_metrics(self.fit_tree(X, y), X, labels)
        assert metrics.rho0 == pytest.approx(0.25, abs=1e-12)

    def test_matches_row_level_brute_force(self):
        rng = np.random.default_rng(8)
        X = pd.DataFrame(
            {
                "A": rng.choice(["a", "b", "c"], size=150),
                "B": rng.choice(["u", "v"], size=150),
            }
        )
        labels = rng.choice(["x", "y", "z"], size=150).astype(object)
        y = np.column_stack([labels, rng.integers(1, 9, size=150).astype(object)])
        tree = self.fit_tree(X, y, max_depth=2)
        metrics = rho_metrics(tree, X, labels)
        leaves = tree.decision_leaves(X)
        class_of = {c: i for i, c in enumerate(tree.classes_)}
        brute = np.mean(
            [leaf.class_distribution[class_of[label]] for leaf, label in zip(leaves, labels)]
        )
        assert metrics.rho == pytest.approx(brute, abs=1e-12)

    def test_constant_class_data_has_undefined_increment(self):
        X = pd.DataFrame({"A": ["a", "b"] * 3})
        labels = np.array(["only"] * 6, dtype=object)
        y = np.column_stack([labels, np.arange(6).astype(object)])
        metrics = rho_metrics(self.fit_tree(X, y), X, labels)
        assert metrics.rho0 == 1.0
        assert metrics.rho_incr is None


class TestR2:
    def test_perfect(self):
        assert regression_r2([1, 2, 3], [1, 2, 3]) == 1.0

    def test_mean_only(self):
        obs = np.array([1.0, 2.0, 3.0])
        assert regression_r2([2.0, 2.0, 2.0], obs) == pytest.approx(0.0)

    def test_fixture(self):
        assert regression_r2([1, 2, 4], [1, 2, 3]) == pytest.approx(0.5, abs=1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError):
            regression_r2([1, 1], [2, 2])


class TestImpact:
    def test_identical_tables_give_zero(self):
        pred = ["x"] * 10 + ["y"] * 10
        cov = (["l1"] * 5 + ["l2"] * 5) * 2
        mi, per_class, _ = magnitude_of_impact(pred, cov)
        assert mi == pytest.approx(0.0, abs=1e-12)
        assert all(v == pytest.approx(0.0, abs=1e-12) for v in per_class.values())

    def test_fully_determining_two_by_two(self):
        pred = ["x"] * 10 + ["y"] * 10
        cov = ["l1"] * 10 + ["l2"] * 10
        mi, per_class, _ = magnitude_of_impact(pred, cov)
        assert mi == pytest.approx(20.0, abs=1e-12)
        assert per_class["x"] == pytest.approx(10.0, abs=1e-12)

    def test_direction_fixtures(self):
        assert direction_of_impact([1, 2, 5, 9]) == 1.0
        assert direction_of_impact([9, 5, 2, 1]) == -1.0
        assert direction_of_impact([10, 5, 8]) == pytest.approx(-0.25, abs=1e-12)
        assert direction_of_impact([4, 4, 4]) is None
        with pytest.raises(ValueError):
            direction_of_impact([4])

    def test_direction_reversal_negates(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            row = rng.integers(0, 20, size=int(rng.integers(2, 8)))
            d = direction_of_impact(row)
            if d is None:
                continue
            assert direction_of_impact(row[::-1]) == pytest.approx(-d, abs=1e-12)

    def test_report_shares_sum_to_one_and_scale_invariance(self):
        rng = np.random.default_rng(4)
        n = 400
        X = pd.DataFrame(
            {
                "drives": rng.choice(["l1", "l2"], size=n),
                "noise": rng.choice(["m1", "m2", "m3"], size=n),
            }
        )
        labels = np.where(X["drives"] == "l1", "x", "y").astype(object)
        y = np.column_stack([labels, np.ones(n, dtype=object)])
        tree = MultiTaskDecisionTree(max_depth=2).fit(X, y)
        report = impact_report(tree, X, ordered=("drives",))
        shares = [c.mi_share for c in report.covariates.values()]
        assert sum(shares) == pytest.approx(1.0, abs=1e-9)
        # replicating every row scales raw chi-square but not the shares
        X3 = pd.concat([X] * 3, ignore_index=True)
        report3 = impact_report(tree, X3, ordered=("drives",))
        for name in report.covariates:
            assert report3.covariates[name].mi_share == pytest.approx(
                report.covariates[name].mi_share, abs=1e-9
            )
            assert report3.covariates[name].mi_raw == pytest.approx(
                3.0 * report.covariates[name].mi_raw, rel=1e-9
            )

    def test_determining_covariate_has_largest_share(self):
        rng = np.random.default_rng(5)
        n = 600
        X = pd.DataFrame(
            {
                "drives": rng.choice(["l1", "l2", "l3"], size=n),
                "noise1": rng.choice(["a", "b"], size=n),
                "noise2": rng.choice(["c", "d", "e"], size=n),
            }
        )
        labels = X["drives"].map({"l1": "x", "l2": "y", "l3": "z"}).to_numpy(dtype=object)
        y = np.column_stack([labels, np.ones(n, dtype=object)])
        tree = MultiTaskDecisionTree(max_depth=1).fit(X, y)
        report = impact_report(tree, X)
        best = max(report.covariates, key=lambda c: report.covariates[c].mi_share)
        assert best == "drives"

    def test_unordered_covariates_have_no_direction(self):
        rng = np.random.default_rng(6)
        X = pd.DataFrame({"A": rng.choice(["a", "b"], size=50)})
        labels = rng.choice(["x", "y"], size=50).astype(object)
        y = np.column_stack([labels, np.ones(50, dtype=object)])
        tree = MultiTaskDecisionTree().fit(X, y)
        report = impact_report(tree, X, ordered=())
        assert report.covariates["A"].di_per_class is None


class TestEvaluateModel:
    def test_full_report_on_learnable_data(self):
        rng = np.random.default_rng(9)
        X = pd.DataFrame({"A": rng.choice(["a", "b", "c"], size=90)})
        labels = X["A"].map({"a": "x", "b": "y", "c": "z"}).to_numpy(dtype=object)
        numeric = X["A"].map({"a": 2, "b": 5, "c": 9}).to_numpy()
        y = np.column_stack([labels, numeric.astype(object)])
        tree = MultiTaskDecisionTree().fit(X, y)
        report = evaluate_model(tree, X, labels, numeric)
        assert report.rho == 1.0
        assert report.r2 == 1.0
        assert report.kappa == 1.0
        payload = report.to_json_dict()
        for key in ("Macro-F1", "Micro-F1", "One-vs-all", "kappa", "WRG", "rho", "rho_root", "rho_incr", "R2"):
            assert key in payload
