"""Barycenters in embedding space, the true free-support oracle, and delta.

An embedding-space barycenter is just a convex combination of flattened
embedding rows, pushed forward through the reference.  The true Wasserstein
barycenter is approximated by free-support fixed-point iteration (alternate
exact OT maps from the current support with their weighted average).  The
relative error delta compares the two, normalized by the embedded family's
diameter.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import transport
from .embedding import LabeledEmbeddingSet, embedding_from_row, pushforward
from .errors import (
    DegenerateFamily,
    DimensionError,
    InvalidParameter,
    InvalidWeights,
    NonConvergenceWarning,
    UnknownClass,
)
from .measures import DiscreteMeasure, _frozen, uniform_measure

#: Convex-combination grid over a trio of embeddings (21 weightings spanning
#: vertices, edges, and interior of the 2-simplex); the default for
#: fixed-weight barycenter generation.
FIXED_TRIO_WEIGHTS = np.array(
    [
        [1, 0, 0], [0, 1, 0], [0, 0, 1],
        [0.9, 0.1, 0], [0.9, 0, 0.1], [0.1, 0.9, 0],
        [0, 0.9, 0.1], [0.1, 0, 0.9], [0, 0.1, 0.9],
        [0.6, 0.2, 0.2], [0.6, 0.3, 0.1], [0.6, 0, 0.4],
        [0.2, 0.6, 0.2], [0.3, 0.6, 0.1], [0, 0.6, 0.4],
        [0.2, 0.2, 0.6], [0.3, 0.1, 0.6], [0, 0.4, 0.6],
        [0.2, 0.4, 0.4], [0.4, 0.2, 0.4], [0.4, 0.4, 0.2],
    ],
    dtype=float,
)
FIXED_TRIO_WEIGHTS.flags.writeable = False


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative weights summing to 1 (within 1e-9, then renormalized)."""

    values: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.values, dtype=float).ravel()
        if w.size == 0 or not np.isfinite(w).all():
            raise InvalidWeights("weights must be a nonempty finite vector")
        if (w < 0).any():
            raise InvalidWeights("weights must be nonnegative")
        total = w.sum()
        if abs(total - 1.0) > 1e-9:
            raise InvalidWeights(f"weights sum to {total!r}, expected 1 within 1e-9")
        object.__setattr__(self, "values", _frozen(w / total))

    def __len__(self) -> int:
        return self.values.shape[0]


def as_weights(w, length: int | None = None) -> WeightVector:
    wv = w if isinstance(w, WeightVector) else WeightVector(np.asarray(w, dtype=float))
    if length is not None and len(wv) != length:
        raise InvalidWeights(f"weight vector has length {len(wv)}, expected {length}")
    return wv


def random_simplex_weights(n: int, rng) -> WeightVector:
    """Each component U[0, 1), then normalized to sum 1."""
    w = rng.random(n)
    total = w.sum()
    if total == 0:  # vanishing probability; resample once rather than divide by 0
        w = rng.random(n) + 1e-12
        total = w.sum()
    return WeightVector(w / total)


@dataclass(frozen=True)
class BarycenterResult:
    """One synthesized barycenter: embedding row, pushforward cloud, recipe."""

    embedding: np.ndarray
    cloud: DiscreteMeasure
    weights: WeightVector
    source_indices: np.ndarray
    label: str

    def __post_init__(self):
        object.__setattr__(self, "embedding", _frozen(self.embedding))
        object.__setattr__(self, "source_indices", _frozen(self.source_indices, dtype=int))


def _combine(embs: LabeledEmbeddingSet, indices: np.ndarray, wv: WeightVector, label) -> BarycenterResult:
    row = wv.values @ embs.rows[indices]
    cloud = pushforward(
        embedding_from_row(row, embs.reference, embs.normalized), embs.reference.masses
    )
    return BarycenterResult(
        embedding=row, cloud=cloud, weights=wv, source_indices=indices, label=str(label)
    )


def generate_barycenters_within_class(embs: LabeledEmbeddingSet, weights=None,
                                      uniform: bool = True, n: int = 1, seed: int = 0):
    """Barycenters combining embeddings of one class at a time.

    uniform=True gives one barycenter per class with weights 1/N_c.  A list of
    weight vectors applies each vector to every class (lengths must match the
    class sizes); otherwise n random simplex-sampled vectors are drawn per
    class.  Returns (results, labels, weights used).
    """
    classes = embs.classes()
    results = []
    rng = np.random.default_rng(seed)
    for cls in classes:
        indices = np.flatnonzero(embs.labels == cls)
        n_c = indices.shape[0]
        if uniform:
            class_weights = [WeightVector(np.full(n_c, 1.0 / n_c))]
        elif weights is not None:
            class_weights = [as_weights(w, n_c) for w in weights]
        else:
            if n < 1:
                raise InvalidParameter(f"need n >= 1 random weight vectors, got {n}")
            class_weights = [random_simplex_weights(n_c, rng) for _ in range(n)]
        for wv in class_weights:
            results.append(_combine(embs, indices, wv, cls))
    labels = np.array([r.label for r in results])
    return results, labels, [r.weights for r in results]


def generate_barycenters_between_classes(embs: LabeledEmbeddingSet, class_pairs,
                                         weights=None, seed: int = 0):
    """Blend one seeded representative of each class in every given pair.

    weights, when given, is one length-2 vector per pair; otherwise random.
    Returns (results, representative index pairs, weights used).
    """
    rng = np.random.default_rng(seed)
    if weights is not None and len(weights) != len(class_pairs):
        raise InvalidWeights(
            f"got {len(weights)} weight vectors for {len(class_pairs)} class pairs"
        )
    known = set(embs.classes().tolist())
    results, representatives = [], []
    for p, (c1, c2) in enumerate(class_pairs):
        for c in (c1, c2):
            if c not in known:
                raise UnknownClass(f"label {c!r} not present in the embedding set")
        i1 = int(rng.choice(np.flatnonzero(embs.labels == c1)))
        i2 = int(rng.choice(np.flatnonzero(embs.labels == c2)))
        wv = as_weights(weights[p], 2) if weights is not None else random_simplex_weights(2, rng)
        results.append(_combine(embs, np.array([i1, i2]), wv, f"{c1}|{c2}"))
        representatives.append((i1, i2))
    return results, representatives, [r.weights for r in results]


def generate_barycenters_general(rows, weight_matrix) -> np.ndarray:
    """Row k of the output is weight_matrix[k] @ rows (each row a WeightVector)."""
    rows = np.asarray(rows, dtype=float)
    W = np.asarray(weight_matrix, dtype=float)
    if W.ndim != 2 or W.shape[1] != rows.shape[0]:
        raise InvalidWeights(
            f"weight matrix shape {W.shape} does not match {rows.shape[0]} rows"
        )
    validated = np.vstack([as_weights(w, rows.shape[0]).values for w in W])
    return validated @ rows


# ---------------------------------------------------------------------------
# True barycenter oracle and relative error
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrueBarycenterResult:
    """Free-support iterate with uniform masses, plus convergence diagnostics.

    functional_values[j] is sum_i w_i * W2^2(iterate_j, cloud_i) evaluated at
    the support the j-th round started from; the fixed-point update makes the
    sequence non-increasing.
    """

    measure: DiscreteMeasure
    converged: bool
    n_iterations: int
    functional_values: np.ndarray


def _maps_to_clouds(support: np.ndarray, clouds, exponent: int = 2):
    """Exact OT maps (barycentric projections) from a uniform support."""
    src = uniform_measure(support)
    maps, objectives = [], []
    for cloud in clouds:
        M = transport.cost_matrix(src, cloud, exponent)
        plan = transport.solve_exact(src.masses, cloud.masses, M)
        emb = transport.barycentric_projection(plan, cloud.points)
        maps.append(emb.map)
        objectives.append(plan.objective)
    return maps, np.asarray(objectives)


def true_barycenter(clouds, weights, support_size: int, max_iters: int = 50,
                    tol: float | None = None, seed: int = 0) -> TrueBarycenterResult:
    """Free-support fixed-point approximation of the Wasserstein barycenter.

    Starting from a seeded Gaussian support (pooled-moment fit to the clouds),
    each round computes exact OT maps from the current support to every cloud
    and replaces the support with their weighted combination, stopping once
    the largest point displacement drops to tol (default 1e-6 times the
    pooled bounding-box diagonal) or max_iters rounds elapse.
    """
    clouds = list(clouds)
    if not clouds:
        raise InvalidParameter("need at least one cloud")
    wv = as_weights(weights, len(clouds))
    d = clouds[0].dim
    for k, c in enumerate(clouds):
        if c.dim != d:
            raise DimensionError(f"cloud {k} has dimension {c.dim}, expected {d}")
    if support_size < 1:
        raise InvalidParameter(f"support_size must be >= 1, got {support_size}")
    if max_iters < 1:
        raise InvalidParameter(f"max_iters must be >= 1, got {max_iters}")
    pooled = np.vstack([c.points for c in clouds])
    if tol is None:
        span = float(np.linalg.norm(pooled.max(axis=0) - pooled.min(axis=0)))
        tol = 1e-6 * (span if span > 0 else 1.0)
    rng = np.random.default_rng(seed)
    scale = pooled.std(axis=0)
    support = pooled.mean(axis=0) + np.where(scale > 0, scale, 1.0) * rng.standard_normal(
        (support_size, d)
    )
    functional = []
    converged = False
    for _ in range(max_iters):
        maps, objectives = _maps_to_clouds(support, clouds)
        functional.append(float(wv.values @ objectives))
        new_support = np.einsum("k,kmd->md", wv.values, np.stack(maps))
        displacement = float(np.linalg.norm(new_support - support, axis=1).max())
        support = new_support
        if displacement <= tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"free-support iteration did not settle within {max_iters} rounds "
            f"(last displacement above {tol:.3e})",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return TrueBarycenterResult(
        measure=uniform_measure(support),
        converged=converged,
        n_iterations=len(functional),
        functional_values=np.asarray(functional),
    )


def embedded_diameter(rows, reference: DiscreteMeasure, normalized: bool = False) -> float:
    """Largest pairwise W2 distance between the pushforwards of the rows."""
    rows = np.asarray(rows, dtype=float)
    clouds = [
        pushforward(embedding_from_row(row, reference, normalized), reference.masses)
        for row in rows
    ]
    best = 0.0
    for i in range(len(clouds)):
        for j in range(i + 1, len(clouds)):
            best = max(best, transport.w2_distance(clouds[i], clouds[j]))
    return best


def relative_error(rows, reference: DiscreteMeasure, weights, clouds,
                   normalized: bool = False, support_size: int | None = None,
                   seed: int = 0, true_measure: DiscreteMeasure | None = None,
                   diameter: float | None = None, degenerate_tol: float = 1e-9) -> float:
    """delta: W2(embedding-space barycenter, true barycenter) over family diameter.

    rows are the flattened embeddings of `clouds` against `reference`; both
    the numerator and the pairwise-diameter denominator use the exact solver.
    true_measure and diameter can be supplied to reuse earlier computations.
    A vanishing denominator means all embedded clouds coincide: delta is 0 if
    the numerator also vanishes, otherwise the family is degenerate.
    """
    rows = np.asarray(rows, dtype=float)
    clouds = list(clouds)
    if rows.shape[0] != len(clouds):
        raise DimensionError(f"{rows.shape[0]} embedding rows for {len(clouds)} clouds")
    wv = as_weights(weights, len(clouds))
    lot_row = wv.values @ rows
    lot_cloud = pushforward(
        embedding_from_row(lot_row, reference, normalized), reference.masses
    )
    if true_measure is None:
        true_measure = true_barycenter(
            clouds, wv, support_size if support_size is not None else reference.n, seed=seed
        ).measure
    numerator = transport.w2_distance(lot_cloud, true_measure)
    if diameter is None:
        diameter = embedded_diameter(rows, reference, normalized)
    if diameter <= degenerate_tol:
        if numerator <= degenerate_tol:
            return 0.0
        raise DegenerateFamily(
            f"embedded clouds coincide (diameter {diameter:.3e}) but the barycenter "
            f"gap is {numerator:.3e}"
        )
    return numerator / diameter


def iteration_delta_stats(trace, data, n_weights: int = 10, seed: int = 0,
                          support_size: int | None = None) -> list[dict]:
    """Per-class delta statistics across refinement iterations.

    For every class, n_weights random weight vectors are drawn (seeded) over
    its clouds; the true barycenter per weight vector is computed once and
    compared with each iteration's embedding-space barycenter.  Returns rows
    of {class, iteration, mean, std, n}, with std the sample standard
    deviation (0 when n_weights == 1).
    """
    if n_weights < 1:
        raise InvalidParameter(f"need n_weights >= 1, got {n_weights}")
    classes = np.unique(data.labels)
    rows_out = []
    rng = np.random.default_rng(seed)
    for cls in classes:
        idx = np.flatnonzero(data.labels == cls)
        clouds = [data.clouds[i] for i in idx]
        weight_vectors = [random_simplex_weights(idx.shape[0], rng) for _ in range(n_weights)]
        m = support_size if support_size is not None else trace[0].reference.n
        true_measures = [
            true_barycenter(clouds, wv, m, seed=seed).measure for wv in weight_vectors
        ]
        for j in range(len(trace)):
            record = trace[j]
            class_rows = record.embeddings.rows[idx]
            diameter = embedded_diameter(
                class_rows, record.reference, record.embeddings.normalized
            )
            deltas = [
                relative_error(
                    class_rows,
                    record.reference,
                    wv,
                    clouds,
                    normalized=record.embeddings.normalized,
                    true_measure=tm,
                    diameter=diameter,
                )
                for wv, tm in zip(weight_vectors, true_measures)
            ]
            deltas = np.asarray(deltas)
            rows_out.append(
                {
                    "class": str(cls),
                    "iteration": j,
                    "mean": float(deltas.mean()),
                    "std": float(deltas.std(ddof=1)) if deltas.size > 1 else 0.0,
                    "n": int(deltas.size),
                }
            )
    return rows_out
