"""Class re-balancing, PCA, and LDA on flattened embedding rows.

Feature width here is m*d (easily thousands), so PCA factorizes the centered
data matrix directly instead of forming the D x D covariance; the covariance
eigenstructure is recovered from the singular values.  LDA does need its
D x D scatter matrices, which stays affordable at the row counts this
library targets.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    ClampedComponentsWarning,
    InvalidDataset,
    RankDeficientWarning,
    SingularWithinWarning,
)
from .measures import _frozen


@dataclass(frozen=True)
class BalancedSet:
    """Oversampled rows with labels and, per row, the original row it copies."""

    rows: np.ndarray
    labels: np.ndarray
    provenance: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        labels = np.asarray(self.labels)
        prov = np.asarray(self.provenance, dtype=int)
        if not (rows.shape[0] == labels.shape[0] == prov.shape[0]):
            raise InvalidDataset("rows, labels, and provenance must align")
        labels = labels.copy()
        labels.flags.writeable = False
        object.__setattr__(self, "rows", _frozen(rows))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "provenance", _frozen(prov, dtype=int))

    def __len__(self) -> int:
        return self.rows.shape[0]


def balance(rows, labels, seed: int = 0) -> BalancedSet:
    """Random oversampling: duplicate minority rows until all classes match.

    Original rows come first in their original order; duplicates are appended
    per class (classes in sorted order), drawn uniformly with replacement.
    Already-balanced input passes through order-stable.
    """
    rows = np.asarray(rows, dtype=float)
    labels = np.asarray(labels)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise InvalidDataset("need a nonempty 2-D row matrix")
    if labels.shape != (rows.shape[0],):
        raise InvalidDataset(f"labels must have shape ({rows.shape[0]},), got {labels.shape}")
    classes, counts = np.unique(labels, return_counts=True)
    n_max = counts.max()
    rng = np.random.default_rng(seed)
    provenance = [np.arange(rows.shape[0])]
    for cls, count in zip(classes, counts):
        deficit = int(n_max - count)
        if deficit > 0:
            members = np.flatnonzero(labels == cls)
            provenance.append(rng.choice(members, size=deficit, replace=True))
    prov = np.concatenate(provenance)
    return BalancedSet(rows=rows[prov], labels=labels[prov], provenance=prov)


@dataclass(frozen=True)
class PcaModel:
    """Principal axes of centered data via singular value decomposition.

    components holds the principal axes as rows (right singular vectors),
    each oriented so its largest-magnitude entry is positive;
    U diag(S) components reproduces the centered data.  Component variances
    are singular_values**2 / (N - 1), the covariance eigenvalues.
    """

    mean: np.ndarray
    components: np.ndarray
    singular_values: np.ndarray
    left_vectors: np.ndarray
    rank: int

    def component_variances(self, n_rows: int | None = None) -> np.ndarray:
        n = self.left_vectors.shape[0] if n_rows is None else n_rows
        return self.singular_values**2 / max(n - 1, 1)

    def project(self, rows, k: int) -> np.ndarray:
        """Coordinates of `rows` on the top-k principal axes."""
        k = min(k, self.components.shape[0])
        return (np.asarray(rows, dtype=float) - self.mean) @ self.components[:k].T

    def reconstruct(self, coords) -> np.ndarray:
        """Back-projection from component coordinates to feature space."""
        coords = np.asarray(coords, dtype=float)
        return coords @ self.components[: coords.shape[1]] + self.mean


def pca_reduction(rows, labels, seed: int = 0) -> tuple[PcaModel, BalancedSet]:
    """Balance, center, and factorize rows; returns the model and balanced set."""
    bal = balance(rows, labels, seed)
    X = bal.rows
    if X.shape[0] < 2:
        raise InvalidDataset(f"need at least 2 rows after balancing, got {X.shape[0]}")
    mean = X.mean(axis=0)
    U, S, Vt = np.linalg.svd(X - mean, full_matrices=False)
    # orient each axis so its largest-magnitude entry is positive
    flip = np.sign(Vt[np.arange(Vt.shape[0]), np.abs(Vt).argmax(axis=1)])
    flip[flip == 0] = 1.0
    Vt = Vt * flip[:, None]
    U = U * flip[None, :]
    scale = S[0] if S.size and S[0] > 0 else 1.0
    rank = int((S > max(X.shape) * np.finfo(float).eps * scale).sum())
    if rank == 0:
        warnings.warn(
            "data matrix has rank 0 (all rows equal); no principal axes are defined",
            RankDeficientWarning,
            stacklevel=2,
        )
    model = PcaModel(
        mean=_frozen(mean),
        components=_frozen(Vt),
        singular_values=_frozen(S),
        left_vectors=_frozen(U),
        rank=rank,
    )
    return model, bal


@dataclass(frozen=True)
class LdaModel:
    """Discriminant directions maximizing between- over within-class scatter.

    projection columns solve the generalized eigenproblem S_B w = lambda S_W w
    (S_W shrunk by `regularization` * I when singular), ordered by decreasing
    eigenvalue.  Scatter matrices are retained unregularized.
    """

    projection: np.ndarray
    class_labels: np.ndarray
    class_means: np.ndarray
    scatter_between: np.ndarray
    scatter_within: np.ndarray
    eigenvalues: np.ndarray
    regularization: float

    def project(self, rows) -> np.ndarray:
        return np.asarray(rows, dtype=float) @ self.projection


def scatter_matrices(rows, labels):
    """Within-class and between-class scatter (S_W, S_B) plus class info."""
    X = np.asarray(rows, dtype=float)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    mu = X.mean(axis=0)
    D = X.shape[1]
    S_W = np.zeros((D, D))
    S_B = np.zeros((D, D))
    means = np.empty((classes.shape[0], D))
    for i, cls in enumerate(classes):
        Xc = X[labels == cls]
        means[i] = Xc.mean(axis=0)
        diff = Xc - means[i]
        S_W += diff.T @ diff
        gap = (means[i] - mu)[:, None]
        S_B += Xc.shape[0] * (gap @ gap.T)
    return S_W, S_B, classes, means


def lda_reduction(rows, labels, n_components: int = 3, seed: int = 0):
    """Balance rows, then project onto the top discriminant directions.

    Returns (model, projected rows, balanced labels).  n_components is capped
    at C - 1 (the rank of the between-class scatter).  A singular within-class
    scatter -- unavoidable whenever D exceeds the row count -- is shrunk by
    gamma = 1e-8 * trace(S_W) / D with a SingularWithin notice.
    """
    bal = balance(rows, labels, seed)
    S_W, S_B, classes, means = scatter_matrices(bal.rows, bal.labels)
    C = classes.shape[0]
    if C < 2:
        raise InvalidDataset(f"LDA needs at least 2 classes, got {C}")
    if n_components < 1:
        raise InvalidDataset(f"n_components must be >= 1, got {n_components}")
    if n_components > C - 1:
        warnings.warn(
            f"n_components={n_components} exceeds C-1={C - 1}; clamping",
            ClampedComponentsWarning,
            stacklevel=2,
        )
        n_components = C - 1
    D = S_W.shape[0]
    gamma = 0.0
    S_W_solve = S_W
    try:
        np.linalg.cholesky(S_W)
    except np.linalg.LinAlgError:
        trace = float(np.trace(S_W))
        gamma = 1e-8 * trace / D if trace > 0 else 1e-8
        S_W_solve = S_W + gamma * np.eye(D)
        warnings.warn(
            f"within-class scatter is singular; shrinking with gamma={gamma:.3e}",
            SingularWithinWarning,
            stacklevel=2,
        )
    eigvals, eigvecs = scipy.linalg.eigh(S_B, S_W_solve)
    order = np.argsort(eigvals)[::-1][:n_components]
    W = eigvecs[:, order]
    flip = np.sign(W[np.abs(W).argmax(axis=0), np.arange(W.shape[1])])
    flip[flip == 0] = 1.0
    W = W * flip[None, :]
    model = LdaModel(
        projection=_frozen(W),
        class_labels=classes,
        class_means=_frozen(means),
        scatter_between=_frozen(S_B),
        scatter_within=_frozen(S_W),
        eigenvalues=_frozen(eigvals[order]),
        regularization=gamma,
    )
    return model, model.project(bal.rows), bal.labels


def fisher_ratio(direction, rows, labels, regularization: float = 0.0) -> float:
    """Between- over within-class scatter of data projected on one direction."""
    w = np.asarray(direction, dtype=float).ravel()
    S_W, S_B, _, _ = scatter_matrices(rows, labels)
    denom = float(w @ S_W @ w) + regularization * float(w @ w)
    return float(w @ S_B @ w) / denom
