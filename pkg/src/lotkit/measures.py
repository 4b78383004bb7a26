"""Weighted point clouds: domain types, synthetic generators, CSV and manifest I/O."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, InvalidMeasure, InvalidParameter

#: Tolerance on the total mass of a measure.  Totals within MASS_TOL of 1 are
#: renormalized exactly; anything further off is rejected (CSV round-trips may
#: lose digits, genuinely unnormalized input should not pass silently).
MASS_TOL = 1e-9


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class DiscreteMeasure:
    """A weighted point cloud, sum_i masses[i] * delta(points[i]).

    Parameters
    ----------
    points : (n, d) array of finite coordinates; a 1-D array is treated as
        n points on the real line.
    masses : (n,) array of strictly positive weights summing to 1 (within
        MASS_TOL, after which they are renormalized exactly).

    Instances are immutable after construction and safe to share across
    threads.
    """

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidMeasure(
                f"points must be a nonempty (n, d) array, got shape {np.shape(self.points)}"
            )
        if not np.isfinite(pts).all():
            raise InvalidMeasure("points contain non-finite coordinates")
        w = np.asarray(self.masses, dtype=float)
        if w.shape != (pts.shape[0],):
            raise InvalidMeasure(
                f"masses must have shape ({pts.shape[0]},), got {w.shape}"
            )
        if not np.isfinite(w).all() or (w <= 0).any():
            raise InvalidMeasure("masses must be finite and strictly positive")
        total = w.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidMeasure(f"masses sum to {total!r}, expected 1 within {MASS_TOL}")
        if abs(total - 1.0) > 1e-15:  # already normalized to machine precision: keep bytes
            w = w / total
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "masses", _frozen(w))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def content_hash(self) -> str:
        """Hex digest identifying this measure's exact content."""
        h = hashlib.sha256()
        h.update(np.int64(self.points.shape).tobytes())
        h.update(np.ascontiguousarray(self.points).tobytes())
        h.update(np.ascontiguousarray(self.masses).tobytes())
        return h.hexdigest()

    def mean(self) -> np.ndarray:
        """Mass-weighted mean of the cloud."""
        return self.masses @ self.points

    def centered(self) -> "DiscreteMeasure":
        """Copy of the measure translated so its weighted mean is the origin."""
        return DiscreteMeasure(self.points - self.mean(), self.masses)


@dataclass(frozen=True)
class LabeledCloudSet:
    """An ordered collection of measures with one class label per cloud."""

    clouds: tuple
    labels: np.ndarray

    def __post_init__(self):
        clouds = tuple(self.clouds)
        if len(clouds) < 1:
            raise InvalidMeasure("a labeled cloud set needs at least one cloud")
        for k, c in enumerate(clouds):
            if not isinstance(c, DiscreteMeasure):
                raise InvalidMeasure(f"cloud {k} is not a DiscreteMeasure")
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != len(clouds):
            raise InvalidMeasure(
                f"labels must be 1-D with length {len(clouds)}, got shape {labels.shape}"
            )
        labels = labels.copy()
        labels.flags.writeable = False
        object.__setattr__(self, "clouds", clouds)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.clouds)

    @property
    def dim(self) -> int:
        dims = {c.dim for c in self.clouds}
        if len(dims) != 1:
            raise InvalidMeasure(f"clouds have mixed ambient dimensions {sorted(dims)}")
        return self.clouds[0].dim

    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def class_indices(self, label) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


def uniform_measure(points) -> DiscreteMeasure:
    """Measure putting mass 1/n on each of the given points."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise InvalidMeasure("cannot build a measure from an empty point set")
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    n = pts.shape[0]
    return DiscreteMeasure(pts, np.full(n, 1.0 / n))


def gaussian_reference(n: int, d: int, center=0.0, scale=1.0, seed: int = 0) -> DiscreteMeasure:
    """Uniform-mass cloud of n i.i.d. samples from an axis-aligned Gaussian.

    center and scale broadcast to length d; scale must be strictly positive.
    Fixed seeds give byte-identical clouds.
    """
    if n < 1:
        raise InvalidParameter(f"need n >= 1 reference points, got {n}")
    if d < 1:
        raise InvalidParameter(f"need dimension d >= 1, got {d}")
    center = np.broadcast_to(np.asarray(center, dtype=float), (d,))
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (d,))
    if not (np.isfinite(center).all() and np.isfinite(scale).all()):
        raise InvalidParameter("center and scale must be finite")
    if (scale <= 0).any():
        raise InvalidParameter("scale components must be strictly positive")
    rng = np.random.default_rng(seed)
    pts = center + scale * rng.standard_normal((n, d))
    return uniform_measure(pts)


_TRANSFORM_KINDS = ("translate", "shear", "scale")


def _validate_transform(kind, param, d):
    if kind == "translate":
        v = np.broadcast_to(np.asarray(param, dtype=float), (d,))
        if not np.isfinite(v).all():
            raise InvalidParameter("translation vector must be finite")
        return v
    if kind == "scale":
        s = float(param)
        if not np.isfinite(s) or s <= 0:
            raise InvalidParameter(f"scale factor must be finite and positive, got {param!r}")
        return s
    if kind == "shear":
        A = np.asarray(param, dtype=float)
        if A.shape != (d, d) or not np.isfinite(A).all():
            raise InvalidParameter(f"shear matrix must be a finite ({d}, {d}) array")
        if abs(np.linalg.det(A)) < 1e-12:
            raise InvalidParameter("shear matrix is singular")
        return A
    raise InvalidParameter(f"unknown transform kind {kind!r}; expected one of {_TRANSFORM_KINDS}")


def _is_identity(kind, param, d) -> bool:
    if kind == "translate":
        return not np.any(param)
    if kind == "scale":
        return param == 1.0
    return np.array_equal(param, np.eye(d))


def synthetic_family(base: DiscreteMeasure, transform, count: int, seed: int = 0) -> LabeledCloudSet:
    """Family of clouds pushing `base` through random instances of one transform.

    transform is a (kind, param) pair with kind in {"translate", "shear",
    "scale"}.  Each cloud uses its own intensity u ~ U[0, 1) interpolating
    between the identity and the given transform: translation by u*v, scaling
    by s**u, shearing by I + u*(A - I).  Identity parameters (v=0, s=1, A=I)
    reproduce the base cloud bit-exactly.  Labels carry the family kind.
    """
    if count < 1:
        raise InvalidParameter(f"need count >= 1 clouds, got {count}")
    try:
        kind, param = transform
    except (TypeError, ValueError):
        raise InvalidParameter("transform must be a (kind, param) pair") from None
    d = base.dim
    param = _validate_transform(kind, param, d)
    labels = np.array([kind] * count)
    if _is_identity(kind, param, d):
        clouds = tuple(DiscreteMeasure(base.points, base.masses) for _ in range(count))
        return LabeledCloudSet(clouds, labels)
    rng = np.random.default_rng(seed)
    intensities = rng.random(count)
    clouds = []
    eye = np.eye(d)
    for u in intensities:
        if kind == "translate":
            pts = base.points + u * param
        elif kind == "scale":
            pts = base.points * (param ** u)
        else:
            pts = base.points @ (eye + u * (param - eye)).T
        clouds.append(DiscreteMeasure(pts, base.masses))
    return LabeledCloudSet(tuple(clouds), labels)


# ---------------------------------------------------------------------------
# CSV and manifest I/O
#
# Point-cloud CSV: header row `x1,...,xd[,mass]`, one point per row, UTF-8,
# "." decimal separator.  The mass column is optional on read (uniform masses
# assumed) and always written.  Manifest JSON: {"clouds": [{"path", "label"}]}
# with paths resolved relative to the manifest file.
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_cloud_csv(measure: DiscreteMeasure, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(measure.dim)] + ["mass"])
        for row, w in zip(measure.points, measure.masses):
            writer.writerow([_fmt(v) for v in row] + [_fmt(w)])


def read_cloud_csv(path) -> DiscreteMeasure:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"point-cloud file not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file (header row required)") from None
        header = [h.strip() for h in header]
        has_mass = bool(header) and header[-1] == "mass"
        coord_cols = header[:-1] if has_mass else header
        expected = [f"x{i + 1}" for i in range(len(coord_cols))]
        if not coord_cols or coord_cols != expected:
            raise DataError(f"{path}: header must be x1..xd[,mass], got {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                rows.append([float(v) for v in rec])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    if has_mass:
        return DiscreteMeasure(data[:, :-1], data[:, -1])
    return uniform_measure(data)


def write_manifest(path, cloud_paths, labels) -> None:
    path = Path(path)
    entries = [
        {"label": str(lab), "path": str(p)} for p, lab in zip(cloud_paths, labels)
    ]
    path.write_text(
        json.dumps({"clouds": entries}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_manifest(path) -> LabeledCloudSet:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    entries = doc.get("clouds") if isinstance(doc, dict) else None
    if not isinstance(entries, list) or not entries:
        raise DataError(f'{path}: expected {{"clouds": [{{"path", "label"}}, ...]}}')
    clouds, labels = [], []
    for k, entry in enumerate(entries):
        if not isinstance(entry, dict) or "path" not in entry or "label" not in entry:
            raise DataError(f"{path}: cloud entry {k} needs 'path' and 'label'")
        clouds.append(read_cloud_csv(path.parent / entry["path"]))
        labels.append(str(entry["label"]))
    return LabeledCloudSet(tuple(clouds), np.array(labels))
