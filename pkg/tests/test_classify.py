import numpy as np
import pytest

import lotkit as lk
from lotkit.classify import (
    ClassifierSpec,
    classification_metrics,
    cross_validate,
    default_roster,
    fit_predict,
    get_best_classifier,
    stratified_folds,
    visit_order,
)
from lotkit.errors import InvalidDataset, InvalidParameter, InvalidTrainingSet, StratificationWarning


def two_blobs(rng, n_per=20, distance=10.0, noise=0.1, d=3):
    X = np.vstack(
        [noise * rng.normal(size=(n_per, d)), noise * rng.normal(size=(n_per, d)) + distance]
    )
    y = np.array(["lo"] * n_per + ["hi"] * n_per)
    return X, y


def xor_blobs(rng, n_per=25, noise=0.3):
    centers = [(0, 0), (4, 4), (0, 4), (4, 0)]
    labels = ["even", "even", "odd", "odd"]
    X, y = [], []
    for (cx, cy), lab in zip(centers, labels):
        X.append(rng.normal(size=(n_per, 2)) * noise + (cx, cy))
        y.extend([lab] * n_per)
    return np.vstack(X), np.array(y)


class TestFitPredict:
    @pytest.mark.parametrize("kind", ["knn", "linear_svm", "rbf_svm"])
    def test_separated_blobs_are_perfect(self, rng, kind):
        X, y = two_blobs(rng)
        X_test, y_test = two_blobs(rng)
        spec = ClassifierSpec(kind, seed=1)
        pred = fit_predict(spec, X, y, X_test)
        assert np.mean(pred == y_test) == 1.0

    def test_knn_memorizes_training_point(self, rng):
        X, y = two_blobs(rng)
        pred = fit_predict(ClassifierSpec("knn", k=1), X, y, X[[3, 25]])
        assert list(pred) == [y[3], y[25]]

    def test_knn_tie_breaks_to_smallest_label(self):
        X = np.array([[0.0], [2.0]])
        y = np.array(["z", "a"])
        # equidistant with k=2: one vote each, the smaller label wins
        pred = fit_predict(ClassifierSpec("knn", k=2), X, y, np.array([[1.0]]))
        assert pred[0] == "a"

    def test_xor_separates_rbf_from_linear(self, rng):
        X, y = xor_blobs(rng)
        X_test, y_test = xor_blobs(rng)
        rbf_acc = np.mean(fit_predict(ClassifierSpec("rbf_svm", seed=0), X, y, X_test) == y_test)
        lin_acc = np.mean(
            fit_predict(ClassifierSpec("linear_svm", seed=0), X, y, X_test) == y_test
        )
        assert rbf_acc >= 0.95
        assert lin_acc <= 0.6

    def test_svm_single_class_rejected(self, rng):
        X = rng.normal(size=(5, 2))
        y = np.array(["a"] * 5)
        with pytest.raises(InvalidTrainingSet):
            fit_predict(ClassifierSpec("linear_svm"), X, y, X)

    def test_feature_width_mismatch(self, rng):
        X, y = two_blobs(rng)
        with pytest.raises(InvalidTrainingSet):
            fit_predict(ClassifierSpec("knn"), X, y, X[:, :2])

    def test_spec_validation(self):
        with pytest.raises(InvalidParameter):
            ClassifierSpec("forest")
        with pytest.raises(InvalidParameter):
            ClassifierSpec("knn", k=0)
        with pytest.raises(InvalidParameter):
            ClassifierSpec("rbf_svm", gamma=-1.0)
        with pytest.raises(InvalidParameter):
            ClassifierSpec("linear_svm", c=0.0)

    def test_svm_determinism(self, rng):
        X, y = xor_blobs(rng)
        spec = ClassifierSpec("rbf_svm", seed=42)
        p1 = fit_predict(spec, X, y, X)
        p2 = fit_predict(spec, X, y, X)
        assert np.array_equal(p1, p2)


class TestPermutationInvariance:
    def test_knn_invariant_under_row_permutation(self, rng):
        X, y = xor_blobs(rng)
        X_test, _ = xor_blobs(rng)
        perm = rng.permutation(len(y))
        base = fit_predict(ClassifierSpec("knn"), X, y, X_test)
        moved = fit_predict(ClassifierSpec("knn"), X[perm], y[perm], X_test)
        assert np.array_equal(base, moved)

    @pytest.mark.parametrize("kind", ["linear_svm", "rbf_svm"])
    def test_svm_invariant_when_order_follows_samples(self, rng, kind):
        # the trainers depend only on the visited sample sequence: permuting
        # the rows while mapping the visit order through the permutation
        # reproduces the predictions exactly
        X, y = xor_blobs(rng, n_per=10)
        X_test, _ = xor_blobs(rng, n_per=5)
        spec = ClassifierSpec(kind, epochs=20, seed=9)
        order = visit_order(spec.seed, len(y), spec.epochs)
        base = fit_predict(spec, X, y, X_test, order=order)
        perm = rng.permutation(len(y))
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(len(perm))
        moved = fit_predict(spec, X[perm], y[perm], X_test, order=inverse[order])
        assert np.array_equal(base, moved)


class TestCrossValidation:
    def test_perfectly_separable_folds(self, rng):
        X, y = two_blobs(rng, n_per=15)
        accs = cross_validate(ClassifierSpec("knn"), X, y, folds=5, seed=0)
        assert accs.shape == (5,)
        assert (accs == 1.0).all()

    def test_shuffled_labels_hit_chance_level(self, rng):
        X = rng.normal(size=(120, 4))
        y = np.array(["a", "b"] * 60)
        accs = cross_validate(ClassifierSpec("knn"), X, y, folds=5, seed=1)
        assert abs(accs.mean() - 0.5) <= 0.15

    def test_fold_sizes_on_108(self, rng):
        labels = np.repeat([f"c{i}" for i in range(4)], 27)
        folds = stratified_folds(labels, 5, seed=0)
        sizes = sorted(len(f) for f in folds)
        assert sizes == [21, 21, 22, 22, 22]
        all_idx = np.sort(np.concatenate(folds))
        assert np.array_equal(all_idx, np.arange(108))

    def test_fold_class_proportions_within_one(self, rng):
        labels = np.array(["a"] * 20 + ["b"] * 30 + ["c"] * 25)
        folds = stratified_folds(labels, 5, seed=3)
        for fold in folds:
            for cls, total in (("a", 20), ("b", 30), ("c", 25)):
                count = int(np.sum(labels[fold] == cls))
                assert abs(count - total / 5) <= 1

    def test_small_class_degrades_with_notice(self, rng):
        labels = np.array(["a"] * 10 + ["b"] * 3)
        with pytest.warns(StratificationWarning):
            folds = stratified_folds(labels, 5, seed=0)
        assert sum(len(f) for f in folds) == 13

    def test_validation(self, rng):
        with pytest.raises(InvalidParameter):
            stratified_folds(np.array(["a", "b"]), 1)
        with pytest.raises(InvalidDataset):
            stratified_folds(np.array(["a", "b"]), 3)

    def test_determinism(self, rng):
        labels = np.repeat(["x", "y", "z"], 10)
        f1 = stratified_folds(labels, 5, seed=4)
        f2 = stratified_folds(labels, 5, seed=4)
        assert all(np.array_equal(a, b) for a, b in zip(f1, f2))


class TestBestClassifier:
    def test_separable_four_classes(self, rng):
        X, y = [], []
        for c in range(4):
            X.append(rng.normal(size=(15, 3)) + 8.0 * np.eye(3)[c % 3] * (1 + c))
            y.extend([f"g{c}"] * 15)
        X, y = np.vstack(X), np.array(y)
        X_test = X + 0.01 * rng.normal(size=X.shape)
        report = get_best_classifier(X, y, X_test, y, seed=0)
        assert report.selected_model().test_accuracy >= 0.9

    def test_tie_selects_roster_order(self, rng):
        X, y = two_blobs(rng, n_per=15)
        report = get_best_classifier(X, y, X, y, seed=0)
        # every model is perfect here; the tie resolves to the roster head
        assert report.models[0].name == "knn"
        assert report.selected == "knn"

    def test_single_class_rejected(self, rng):
        X = rng.normal(size=(10, 2))
        y = np.array(["a"] * 10)
        with pytest.raises(InvalidTrainingSet):
            get_best_classifier(X, y, X, y)

    def test_report_invariants(self, rng):
        X, y = xor_blobs(rng, n_per=10)
        X_test, y_test = xor_blobs(rng, n_per=6)
        report = get_best_classifier(X, y, X_test, y_test, seed=2)
        cv_means = [m.cv_mean for m in report.models]
        assert report.selected_model().cv_mean == max(cv_means)
        for model in report.models:
            assert model.cv_mean == pytest.approx(model.fold_accuracies.mean(), abs=1e-12)
            recomputed = float(np.mean(model.predictions == y_test))
            assert model.test_accuracy == pytest.approx(recomputed, abs=1e-12)
            f1s = [cm.f1 for cm in model.per_class.values()]
            assert model.macro_f1 == pytest.approx(np.mean(f1s), abs=1e-12)
            assert 0.0 <= model.test_accuracy <= 1.0
            assert (model.fold_accuracies >= 0).all() and (model.fold_accuracies <= 1).all()

    def test_determinism(self, rng):
        X, y = xor_blobs(rng, n_per=8)
        r1 = get_best_classifier(X, y, X, y, seed=5)
        r2 = get_best_classifier(X, y, X, y, seed=5)
        assert r1.to_dict() == r2.to_dict()

    def test_report_serialization(self, rng):
        X, y = two_blobs(rng, n_per=10)
        report = get_best_classifier(X, y, X, y, seed=0)
        doc = report.to_dict()
        assert doc["selected"] == "knn"
        assert {m["name"] for m in doc["models"]} == {"knn", "linear_svm", "rbf_svm"}
        text = report.to_text()
        assert "Val. Accuracy" in text and "Avg. F1-score" in text and "KNN" in text


class TestMetrics:
    def test_confusion_recomputation(self):
        y_true = np.array(["a", "a", "b", "b", "c"])
        y_pred = np.array(["a", "b", "b", "b", "a"])
        per_class, mp, mr, mf = classification_metrics(y_true, y_pred, np.array(["a", "b", "c"]))
        assert per_class["a"].precision == pytest.approx(0.5)
        assert per_class["a"].recall == pytest.approx(0.5)
        assert per_class["b"].precision == pytest.approx(2 / 3)
        assert per_class["b"].recall == pytest.approx(1.0)
        assert per_class["c"].f1 == 0.0
        assert per_class["c"].support == 1
        assert mf == pytest.approx(np.mean([per_class[c].f1 for c in "abc"]))

    def test_roster_composition(self):
        roster = default_roster(seed=3)
        assert [s.kind for s in roster] == ["knn", "linear_svm", "rbf_svm"]
        assert roster[0].k == 3
