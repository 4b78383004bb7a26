"""In-repo classifiers over embedding rows: KNN, linear SVM, RBF SVM.

Both SVMs are one-vs-rest hinge-loss models trained by seeded stochastic
subgradient descent (step 1/(lambda*t), lambda = 1/(C*N)); the RBF variant
keeps per-sample dual counts against a Gaussian kernel.  Training visits
samples in per-epoch shuffled orders derived from the seed, so results are
deterministic and depend only on the visited sample sequence.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    InvalidDataset,
    InvalidParameter,
    InvalidTrainingSet,
    StratificationWarning,
)

ROSTER_KINDS = ("knn", "linear_svm", "rbf_svm")

_DISPLAY = {"knn": "KNN", "linear_svm": "Linear SVM", "rbf_svm": "RBF SVM"}


@dataclass(frozen=True)
class ClassifierSpec:
    """One classifier in the roster.

    kind : "knn" (k nearest neighbors), "linear_svm", or "rbf_svm".
    gamma : RBF kernel width; None means 1 / (D * var(train features)).
    """

    kind: str
    k: int = 3
    c: float = 1.0
    gamma: float | None = None
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ROSTER_KINDS:
            raise InvalidParameter(f"kind must be one of {ROSTER_KINDS}, got {self.kind!r}")
        if self.k < 1:
            raise InvalidParameter(f"k must be >= 1, got {self.k}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise InvalidParameter(f"C must be positive, got {self.c!r}")
        if self.gamma is not None and not (math.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidParameter(f"gamma must be positive, got {self.gamma!r}")
        if self.epochs < 1:
            raise InvalidParameter(f"epochs must be >= 1, got {self.epochs}")

    @property
    def display_name(self) -> str:
        return _DISPLAY[self.kind]


def default_roster(seed: int = 0) -> tuple[ClassifierSpec, ...]:
    """The fixed evaluation roster: KNN(k=3), linear SVM, RBF SVM."""
    return (
        ClassifierSpec("knn", k=3),
        ClassifierSpec("linear_svm", seed=seed),
        ClassifierSpec("rbf_svm", seed=seed),
    )


def _encode(train_labels):
    classes = np.unique(train_labels)
    index = {lab: i for i, lab in enumerate(classes)}
    y = np.array([index[lab] for lab in train_labels], dtype=int)
    return classes, y


def _knn_predict(spec, X_train, y_idx, n_classes, X_test):
    dists = cdist(X_test, X_train, "euclidean")
    k = min(spec.k, X_train.shape[0])
    # stable sort: distance ties resolve toward lower training indices
    neighbors = np.argsort(dists, axis=1, kind="stable")[:, :k]
    votes = np.zeros((X_test.shape[0], n_classes), dtype=int)
    rows = np.repeat(np.arange(X_test.shape[0]), k)
    np.add.at(votes, (rows, y_idx[neighbors].ravel()), 1)
    # argmax takes the first maximum, i.e. the smallest class identifier
    return votes.argmax(axis=1)


def visit_order(seed: int, n: int, epochs: int) -> np.ndarray:
    """Seeded sample order: one full shuffled pass over 0..n-1 per epoch."""
    rng = np.random.default_rng(seed)
    return np.concatenate([rng.permutation(n) for _ in range(epochs)])


def _fit_linear_ovr(X, y_idx, n_classes, spec, order):
    n, d = X.shape
    lam = 1.0 / (spec.c * n)
    Xa = np.hstack([X, np.ones((n, 1))])  # bias as an augmented feature
    W = np.zeros((n_classes, d + 1))
    radius = 1.0 / math.sqrt(lam)
    for cls in range(n_classes):
        w = np.zeros(d + 1)
        sign = np.where(y_idx == cls, 1.0, -1.0)
        for t, i in enumerate(order, start=1):
            eta = 1.0 / (lam * t)
            w *= 1.0 - eta * lam
            if sign[i] * (w @ Xa[i]) < 1.0:
                w += eta * sign[i] * Xa[i]
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
        W[cls] = w
    return W


def _linear_scores(W, X):
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    return Xa @ W.T


def _default_gamma(X):
    var = float(X.var())
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0 / X.shape[1]


def _fit_rbf_ovr(K, y_idx, n_classes, spec, order):
    n = K.shape[0]
    lam = 1.0 / (spec.c * n)
    T = order.shape[0]
    alphas = np.zeros((n_classes, n))
    for cls in range(n_classes):
        sign = np.where(y_idx == cls, 1.0, -1.0)
        alpha = np.zeros(n)
        for t, i in enumerate(order, start=1):
            margin = sign[i] * (alpha * sign) @ K[:, i] / (lam * t)
            if margin < 1.0:
                alpha[i] += 1.0
        alphas[cls] = alpha * sign / (lam * T)
    return alphas


def fit_predict(spec: ClassifierSpec, train_rows, train_labels, test_rows,
                order: np.ndarray | None = None):
    """Train one classifier on the full training set and label the test rows.

    order optionally fixes the SVM sample-visit sequence (epochs*N indices);
    by default it derives from spec.seed.  KNN breaks vote ties toward the
    smallest class identifier.
    """
    X_train = np.asarray(train_rows, dtype=float)
    X_test = np.asarray(test_rows, dtype=float)
    labels = np.asarray(train_labels)
    if X_train.ndim != 2 or labels.shape != (X_train.shape[0],):
        raise InvalidTrainingSet("training rows and labels must align")
    if X_test.ndim != 2 or X_test.shape[1] != X_train.shape[1]:
        raise InvalidTrainingSet(
            f"test feature width {X_test.shape[1]} != train width {X_train.shape[1]}"
        )
    classes, y_idx = _encode(labels)
    if spec.kind != "knn" and classes.shape[0] < 2:
        raise InvalidTrainingSet("SVM training needs at least 2 classes")
    if spec.kind == "knn":
        pred_idx = _knn_predict(spec, X_train, y_idx, classes.shape[0], X_test)
        return classes[pred_idx]
    if order is None:
        order = visit_order(spec.seed, X_train.shape[0], spec.epochs)
    if spec.kind == "linear_svm":
        W = _fit_linear_ovr(X_train, y_idx, classes.shape[0], spec, order)
        scores = _linear_scores(W, X_test)
    else:
        gamma = spec.gamma if spec.gamma is not None else _default_gamma(X_train)
        K = np.exp(-gamma * cdist(X_train, X_train, "sqeuclidean"))
        alphas = _fit_rbf_ovr(K, y_idx, classes.shape[0], spec, order)
        K_test = np.exp(-gamma * cdist(X_test, X_train, "sqeuclidean"))
        scores = K_test @ alphas.T
    return classes[scores.argmax(axis=1)]


def stratified_folds(labels, folds: int, seed: int = 0) -> list[np.ndarray]:
    """Deterministic stratified fold assignment.

    Per class, a seeded shuffle is split as evenly as possible; the one-extra
    remainders rotate across folds so total fold sizes stay within 1 of each
    other.  Classes smaller than the fold count degrade the whole split to a
    plain shuffled partition, with a notice.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if folds < 2:
        raise InvalidParameter(f"folds must be >= 2, got {folds}")
    if n < folds:
        raise InvalidDataset(f"cannot split {n} rows into {folds} folds")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(labels, return_counts=True)
    if counts.min() < folds:
        warnings.warn(
            f"smallest class has {counts.min()} < {folds} members; "
            "falling back to non-stratified folds",
            StratificationWarning,
            stacklevel=2,
        )
        perm = rng.permutation(n)
        return [np.sort(part) for part in np.array_split(perm, folds)]
    members_per_fold = [[] for _ in range(folds)]
    offset = 0
    for cls in classes:
        members = rng.permutation(np.flatnonzero(labels == cls))
        q, r = divmod(members.shape[0], folds)
        sizes = np.full(folds, q)
        sizes[(offset + np.arange(r)) % folds] += 1
        offset = (offset + r) % folds
        splits = np.split(members, np.cumsum(sizes)[:-1])
        for f in range(folds):
            members_per_fold[f].append(splits[f])
    return [np.sort(np.concatenate(parts)) for parts in members_per_fold]


def cross_validate(spec: ClassifierSpec, rows, labels, folds: int = 5, seed: int = 0,
                   fold_indices=None) -> np.ndarray:
    """Held-out accuracy per stratified fold."""
    X = np.asarray(rows, dtype=float)
    y = np.asarray(labels)
    if fold_indices is None:
        fold_indices = stratified_folds(y, folds, seed)
    accuracies = np.empty(len(fold_indices))
    for f, test_idx in enumerate(fold_indices):
        mask = np.ones(X.shape[0], dtype=bool)
        mask[test_idx] = False
        pred = fit_predict(spec, X[mask], y[mask], X[test_idx])
        accuracies[f] = float(np.mean(pred == y[test_idx]))
    return accuracies


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ModelReport:
    name: str
    fold_accuracies: np.ndarray
    cv_mean: float
    test_accuracy: float
    per_class: dict
    macro_precision: float
    macro_recall: float
    macro_f1: float
    predictions: np.ndarray


@dataclass(frozen=True)
class EvaluationReport:
    """Cross-validated roster results plus test metrics and the selection."""

    models: tuple
    selected: str

    def selected_model(self) -> ModelReport:
        for model in self.models:
            if model.name == self.selected:
                return model
        raise KeyError(self.selected)

    def to_dict(self) -> dict:
        return {
            "selected": self.selected,
            "models": [
                {
                    "name": m.name,
                    "fold_accuracies": [float(a) for a in m.fold_accuracies],
                    "cv_mean_accuracy": m.cv_mean,
                    "test_accuracy": m.test_accuracy,
                    "macro": {
                        "precision": m.macro_precision,
                        "recall": m.macro_recall,
                        "f1": m.macro_f1,
                    },
                    "per_class": {
                        str(lab): {
                            "precision": cm.precision,
                            "recall": cm.recall,
                            "f1": cm.f1,
                            "support": cm.support,
                        }
                        for lab, cm in m.per_class.items()
                    },
                }
                for m in self.models
            ],
        }

    def to_text(self) -> str:
        lines = ["Model        Val. Accuracy", "-" * 27]
        for m in self.models:
            mark = "  <- selected" if m.name == self.selected else ""
            lines.append(f"{_DISPLAY[m.name]:<12} {m.cv_mean:.3f}{mark}")
        lines.append("")
        lines.append("Model        Test Acc.  Avg. Precision  Avg. Recall  Avg. F1-score")
        lines.append("-" * 66)
        for m in self.models:
            lines.append(
                f"{_DISPLAY[m.name]:<12} {m.test_accuracy:<10.3f} "
                f"{m.macro_precision:<15.3f} {m.macro_recall:<12.3f} {m.macro_f1:.3f}"
            )
        lines.append("")
        for m in self.models:
            lines.append(f"[{_DISPLAY[m.name]}] per-class precision/recall/F1/support")
            for lab, cm in m.per_class.items():
                lines.append(
                    f"  {str(lab):<16} {cm.precision:.3f}  {cm.recall:.3f}  "
                    f"{cm.f1:.3f}  {cm.support}"
                )
        return "\n".join(lines) + "\n"


def classification_metrics(y_true, y_pred, classes):
    """Per-class precision/recall/F1 (zero when undefined) and macro averages."""
    per_class = {}
    precisions, recalls, f1s = [], [], []
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    for lab in classes:
        tp = int(np.sum((y_pred == lab) & (y_true == lab)))
        fp = int(np.sum((y_pred == lab) & (y_true != lab)))
        fn = int(np.sum((y_pred != lab) & (y_true == lab)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[lab] = ClassMetrics(precision, recall, f1, tp + fn)
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
    return per_class, float(np.mean(precisions)), float(np.mean(recalls)), float(np.mean(f1s))


def get_best_classifier(train_rows, train_labels, test_rows, test_labels,
                        folds: int = 5, seed: int = 0) -> EvaluationReport:
    """Evaluate the fixed roster and select by mean cross-validated accuracy.

    All models share one stratified fold split.  Ties in mean CV accuracy
    resolve in roster order (KNN, linear SVM, RBF SVM).
    """
    X_train = np.asarray(train_rows, dtype=float)
    y_train = np.asarray(train_labels)
    X_test = np.asarray(test_rows, dtype=float)
    y_test = np.asarray(test_labels)
    classes = np.unique(y_train)
    if classes.shape[0] < 2:
        raise InvalidTrainingSet(f"need at least 2 classes in training data, got {classes.shape[0]}")
    fold_indices = stratified_folds(y_train, folds, seed)
    reports = []
    for spec in default_roster(seed):
        accs = cross_validate(spec, X_train, y_train, folds, seed, fold_indices=fold_indices)
        predictions = fit_predict(spec, X_train, y_train, X_test)
        per_class, mp, mr, mf = classification_metrics(y_test, predictions, classes)
        reports.append(
            ModelReport(
                name=spec.kind,
                fold_accuracies=accs,
                cv_mean=float(np.mean(accs)),
                test_accuracy=float(np.mean(predictions == y_test)),
                per_class=per_class,
                macro_precision=mp,
                macro_recall=mr,
                macro_f1=mf,
                predictions=predictions,
            )
        )
    best = max(range(len(reports)), key=lambda i: reports[i].cv_mean)
    # max() keeps the earliest index on ties, i.e. roster order
    return EvaluationReport(models=tuple(reports), selected=reports[best].name)
