"""Linearized-OT embeddings against a reference cloud, plus reference refinement.

A cloud is embedded as the barycentric-projection map evaluated at the m
reference points: an (m, d) matrix.  Collections of clouds embedded against
one reference flatten (row-major over reference point then coordinate) into an
N x (m*d) matrix on which plain linear machinery operates.  Embeddings carry a
content hash of their reference so different embedding spaces cannot be mixed
silently.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import transport
from .errors import DataError, DimensionError, InvalidParameter, LotError, ReferenceMismatch
from .measures import DiscreteMeasure, LabeledCloudSet, _frozen


@dataclass(frozen=True)
class LotEmbedding:
    """Map representation of one cloud relative to a reference.

    map : (m, d) values of the transport map at the reference points, divided
        by sqrt(m) when normalized is True.
    reference_id : content hash of the reference measure (empty for raw
        projections produced outside the embedding workflow).
    objective : transport cost <G, M> of the plan behind the map, when known.
    """

    map: np.ndarray
    normalized: bool
    reference_id: str
    objective: float | None = None

    def __post_init__(self):
        T = np.asarray(self.map, dtype=float)
        if T.ndim != 2 or T.size == 0:
            raise DimensionError(f"embedding map must be 2-D and nonempty, got shape {T.shape}")
        if not np.isfinite(T).all():
            raise DimensionError("embedding map contains non-finite entries")
        object.__setattr__(self, "map", _frozen(T))

    @property
    def m(self) -> int:
        return self.map.shape[0]

    @property
    def dim(self) -> int:
        return self.map.shape[1]

    def raw_map(self) -> np.ndarray:
        """Map values with the sqrt(m) normalization undone."""
        return self.map * math.sqrt(self.m) if self.normalized else self.map

    def flatten(self) -> np.ndarray:
        """Row-major (reference point, then coordinate) flattening."""
        return self.map.reshape(-1)


@dataclass(frozen=True)
class LabeledEmbeddingSet:
    """Stacked flattened embeddings of a cloud collection, one label per row."""

    rows: np.ndarray
    labels: np.ndarray
    reference: DiscreteMeasure
    normalized: bool = False
    objectives: np.ndarray | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        labels = np.asarray(self.labels)
        if rows.ndim != 2:
            raise DimensionError(f"rows must be 2-D, got shape {rows.shape}")
        if labels.ndim != 1 or labels.shape[0] != rows.shape[0]:
            raise DimensionError(
                f"labels must be 1-D with length {rows.shape[0]}, got shape {labels.shape}"
            )
        m, d = self.reference.n, self.reference.dim
        if rows.shape[1] != m * d:
            raise DimensionError(
                f"rows have width {rows.shape[1]}, expected m*d = {m}*{d} = {m * d}"
            )
        labels = labels.copy()
        labels.flags.writeable = False
        object.__setattr__(self, "rows", _frozen(rows))
        object.__setattr__(self, "labels", labels)
        if self.objectives is not None:
            obj = np.asarray(self.objectives, dtype=float)
            if obj.shape != (rows.shape[0],):
                raise DimensionError("objectives must align with rows")
            object.__setattr__(self, "objectives", _frozen(obj))

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def m(self) -> int:
        return self.reference.n

    @property
    def dim(self) -> int:
        return self.reference.dim

    @property
    def reference_id(self) -> str:
        return self.reference.content_hash()

    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def class_rows(self, label) -> np.ndarray:
        return self.rows[self.labels == label]

    def embedding(self, index: int) -> LotEmbedding:
        """Un-flatten row `index` back into a LotEmbedding."""
        obj = None if self.objectives is None else float(self.objectives[index])
        return LotEmbedding(
            map=self.rows[index].reshape(self.m, self.dim),
            normalized=self.normalized,
            reference_id=self.reference_id,
            objective=obj,
        )


def embedding_from_row(row, reference: DiscreteMeasure, normalized: bool = False) -> LotEmbedding:
    """Interpret a flattened (m*d,) row as an embedding against `reference`."""
    row = np.asarray(row, dtype=float).reshape(reference.n, reference.dim)
    return LotEmbedding(map=row, normalized=normalized, reference_id=reference.content_hash())


def embed_cloud(reference: DiscreteMeasure, target: DiscreteMeasure, method="exact",
                normalize: bool = False, exponent: int = 2, eps: float = 1e-12) -> LotEmbedding:
    """Embed one cloud: solve OT from reference to target, project plan to map.

    With normalize=True every entry of the map is divided by sqrt(m).
    """
    if reference.dim != target.dim:
        raise DimensionError(
            f"reference dimension {reference.dim} != target dimension {target.dim}"
        )
    M = transport.cost_matrix(reference, target, exponent)
    plan = transport.solve(reference.masses, target.masses, M, method)
    emb = transport.barycentric_projection(
        plan, target.points, eps=eps, reference_id=reference.content_hash()
    )
    if normalize:
        emb = LotEmbedding(
            map=emb.map / math.sqrt(reference.n),
            normalized=True,
            reference_id=emb.reference_id,
            objective=emb.objective,
        )
    return emb


def embed_point_clouds(reference: DiscreteMeasure, targets: LabeledCloudSet, method="exact",
                       normalize: bool = False, exponent: int = 2,
                       eps: float = 1e-12) -> LabeledEmbeddingSet:
    """Embed every cloud in `targets` and stack the flattened maps row-wise."""
    rows = np.empty((len(targets), reference.n * reference.dim))
    objectives = np.empty(len(targets))
    for k, cloud in enumerate(targets.clouds):
        try:
            emb = embed_cloud(reference, cloud, method, normalize, exponent, eps)
        except LotError as exc:
            raise type(exc)(f"target cloud {k}: {exc}") from exc
        rows[k] = emb.flatten()
        objectives[k] = emb.objective
    return LabeledEmbeddingSet(
        rows=rows,
        labels=targets.labels,
        reference=reference,
        normalized=normalize,
        objectives=objectives,
    )


def lot_distance(e1: LotEmbedding, e2: LotEmbedding, reference_masses) -> float:
    """Mass-weighted L2 distance between two maps over the same reference."""
    if e1.reference_id != e2.reference_id:
        raise ReferenceMismatch(
            f"embeddings bound to different references "
            f"({e1.reference_id[:12]}... vs {e2.reference_id[:12]}...)"
        )
    if e1.map.shape != e2.map.shape:
        raise DimensionError(f"embedding shapes differ: {e1.map.shape} vs {e2.map.shape}")
    w = np.asarray(reference_masses, dtype=float).ravel()
    if w.shape[0] != e1.m:
        raise DimensionError(f"reference masses have length {w.shape[0]}, expected {e1.m}")
    diff = e1.raw_map() - e2.raw_map()
    return math.sqrt(float(w @ np.einsum("ij,ij->i", diff, diff)))


def pushforward(e: LotEmbedding, reference_masses) -> DiscreteMeasure:
    """Image of the reference under the map: points T(x_i), masses alpha_i."""
    return DiscreteMeasure(e.raw_map(), reference_masses)


# ---------------------------------------------------------------------------
# Iterative reference refinement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IterationRecord:
    """State captured for one refinement iteration."""

    reference: DiscreteMeasure
    embeddings: LabeledEmbeddingSet
    transport_objectives: np.ndarray
    class_barycenter_labels: np.ndarray
    class_barycenter_rows: np.ndarray
    class_barycenter_clouds: tuple


@dataclass(frozen=True)
class IterationTrace:
    """Aligned per-iteration records (iteration 0 is the initial embedding)."""

    records: tuple

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, j: int) -> IterationRecord:
        return self.records[j]


def _pooled_gaussian(data: LabeledCloudSet, m: int, d: int, seed: int) -> DiscreteMeasure:
    from .measures import gaussian_reference

    pooled = np.vstack([c.points for c in data.clouds])
    center = pooled.mean(axis=0)
    scale = pooled.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return gaussian_reference(m, d, center=center, scale=scale, seed=seed)


def _record(reference, embs: LabeledEmbeddingSet) -> IterationRecord:
    classes = embs.classes()
    bary_rows = np.vstack([embs.class_rows(c).mean(axis=0) for c in classes])
    clouds = tuple(
        pushforward(embedding_from_row(row, reference, embs.normalized), reference.masses)
        for row in bary_rows
    )
    return IterationRecord(
        reference=reference,
        embeddings=embs,
        transport_objectives=embs.objectives,
        class_barycenter_labels=classes,
        class_barycenter_rows=bary_rows,
        class_barycenter_clouds=clouds,
    )


def compute_barycenter_embeddings(n_iterations: int, data: LabeledCloudSet, method="exact",
                                  m_reference: int = 100, d: int | None = None,
                                  seed: int = 0, exponent: int = 2) -> IterationTrace:
    """Iteratively refine the reference toward the dataset's barycenter.

    Iteration 0 embeds against a Gaussian reference whose per-axis mean and
    standard deviation come from all cloud points pooled.  Each subsequent
    iteration replaces the reference with the pushforward of the uniform
    (1/K) average of the previous iteration's maps and re-embeds.  The trace
    holds n_iterations + 1 records, so n_iterations=0 still returns the
    initial embedding.  Per-class uniform-weight barycenters are recorded at
    every iteration; the reference update itself always averages all clouds.
    """
    if n_iterations < 0:
        raise InvalidParameter(f"n_iterations must be >= 0, got {n_iterations}")
    if m_reference < 1:
        raise InvalidParameter(f"m_reference must be >= 1, got {m_reference}")
    data_dim = data.dim
    if d is None:
        d = data_dim
    elif d != data_dim:
        raise DimensionError(f"requested dimension {d} but clouds have dimension {data_dim}")
    reference = _pooled_gaussian(data, m_reference, d, seed)
    records = []
    for _ in range(n_iterations + 1):
        embs = embed_point_clouds(reference, data, method=method, exponent=exponent)
        records.append(_record(reference, embs))
        mean_map = embs.rows.mean(axis=0).reshape(m_reference, d)
        reference = DiscreteMeasure(mean_map, reference.masses)
    return IterationTrace(tuple(records))


# ---------------------------------------------------------------------------
# Embedding-set CSV
#
# First line is a comment header `# m=..,d=..,normalized=..,reference_hash=..`;
# each following line holds the m*d flattened values plus a trailing label.
# The reference cloud itself travels as a separate point-cloud CSV.
# ---------------------------------------------------------------------------


def write_embedding_csv(embs: LabeledEmbeddingSet, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write(
            f"# m={embs.m},d={embs.dim},normalized={int(embs.normalized)},"
            f"reference_hash={embs.reference_id}\n"
        )
        writer = csv.writer(fh, lineterminator="\n")
        for row, label in zip(embs.rows, embs.labels):
            writer.writerow([repr(float(v)) for v in row] + [str(label)])


def read_embedding_rows(path):
    """Rows, labels, and header metadata of an embedding CSV (no reference).

    Returns (rows, labels, meta) with meta holding m, d, normalized, and
    reference_hash from the header comment line.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"embedding file not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as fh:
        header = fh.readline().strip()
        if not header.startswith("# "):
            raise DataError(f"{path}: missing '# m=..,d=..' header line")
        fields = {}
        for part in header[2:].split(","):
            key, _, value = part.partition("=")
            fields[key.strip()] = value.strip()
        try:
            meta = {
                "m": int(fields["m"]),
                "d": int(fields["d"]),
                "normalized": bool(int(fields["normalized"])),
                "reference_hash": fields["reference_hash"],
            }
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: malformed header ({exc})") from None
        width = meta["m"] * meta["d"]
        rows, labels = [], []
        for lineno, rec in enumerate(csv.reader(fh), start=2):
            if not rec:
                continue
            if len(rec) != width + 1:
                raise DataError(f"{path}:{lineno}: expected {width} values plus a label")
            try:
                rows.append([float(v) for v in rec[:-1]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            labels.append(rec[-1])
    if not rows:
        raise DataError(f"{path}: no embedding rows")
    return np.asarray(rows, dtype=float), np.array(labels), meta


def read_embedding_csv(path, reference: DiscreteMeasure) -> LabeledEmbeddingSet:
    """Load an embedding CSV and bind it to its reference measure."""
    rows, labels, meta = read_embedding_rows(path)
    if (meta["m"], meta["d"]) != (reference.n, reference.dim):
        raise ReferenceMismatch(
            f"{path}: header says m={meta['m']}, d={meta['d']} but reference is "
            f"{reference.n} x {reference.dim}"
        )
    if meta["reference_hash"] != reference.content_hash():
        raise ReferenceMismatch(f"{path}: reference hash does not match the given reference")
    return LabeledEmbeddingSet(
        rows=rows, labels=labels, reference=reference, normalized=meta["normalized"]
    )
