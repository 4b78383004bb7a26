"""Command-line pipeline from dataset manifests to CSV/JSON artifacts.

Subcommands: synth, embed, reduce, classify, barycenter, iterate, bench.
Every command is a pure function of its configuration and input files: given
the same config, re-runs produce byte-identical outputs (the only exception
is wall-clock timing, which goes to stdout and to the explicitly
non-reproducible timing CSVs of `bench` and `barycenter --compare-true`).
One config seed drives all stochastic steps through per-stage derived
sub-seeds.  Exit codes: 0 ok, 2 bad configuration, 3 data error, 4 solver
failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import barycenter as bary
from . import classify as clf
from . import embedding as emb
from . import measures as meas
from . import reduction as red
from .errors import (
    ConfigError,
    DataError,
    InvalidParameter,
    KernelUnderflow,
    LotError,
    SolverFailure,
)
from .transport import SinkhornConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4


def derive_seed(seed: int, stage: str) -> int:
    """Stable per-stage sub-seed so stages re-run independently."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


# ---------------------------------------------------------------------------
# Atomic, deterministic output helpers
# ---------------------------------------------------------------------------


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, payload) -> None:
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv_rows(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    _write_text(path, buf.getvalue())


def _write_cloud(measure, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    meas.write_cloud_csv(measure, tmp)
    os.replace(tmp, path)


def _write_embeddings(embs, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    emb.write_embedding_csv(embs, tmp)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    """Validated pipeline configuration (see README for the JSON schema)."""

    dataset: Path
    reference: dict
    method: str
    lambd: float | None
    normalize: bool
    exponent: int
    seed: int
    out: Path
    center_clouds: bool

    def solver_method(self):
        if self.method == "sinkhorn":
            return SinkhornConfig(lambd=self.lambd)
        return "exact"


def load_config(path, seed_override=None, out_override=None) -> PipelineConfig:
    if path is None:
        raise ConfigError("this command needs --config pointing at a pipeline JSON file")
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")

    def need(key):
        if key not in doc:
            raise ConfigError(f"{path}: missing required key {key!r}")
        return doc[key]

    dataset = (path.parent / str(need("dataset"))).resolve()
    if not dataset.is_file():
        raise ConfigError(f"{path}: dataset manifest not found: {dataset}")
    reference = need("reference")
    if not isinstance(reference, dict) or reference.get("kind") not in ("gaussian", "file"):
        raise ConfigError(f'{path}: reference must be {{"kind": "gaussian"|"file", ...}}')
    if reference["kind"] == "gaussian":
        m = reference.get("m")
        if not isinstance(m, int) or m < 1:
            raise ConfigError(f"{path}: gaussian reference needs integer m >= 1")
    else:
        ref_path = (path.parent / str(reference.get("path", ""))).resolve()
        if not ref_path.is_file():
            raise ConfigError(f"{path}: reference file not found: {ref_path}")
        reference = {**reference, "path": str(ref_path)}
    method = doc.get("method", "exact")
    if method not in ("exact", "sinkhorn"):
        raise ConfigError(f"{path}: method must be 'exact' or 'sinkhorn', got {method!r}")
    lambd = doc.get("lambd")
    if method == "sinkhorn":
        if not isinstance(lambd, (int, float)) or lambd <= 0:
            raise ConfigError(f"{path}: sinkhorn needs a positive 'lambd'")
        lambd = float(lambd)
    exponent = doc.get("exponent", 2)
    if exponent not in (1, 2):
        raise ConfigError(f"{path}: exponent must be 1 or 2")
    seed = seed_override if seed_override is not None else doc.get("seed")
    if not isinstance(seed, int):
        raise ConfigError(f"{path}: integer 'seed' is required (or pass --seed)")
    out = out_override if out_override is not None else doc.get("out")
    if not out:
        raise ConfigError(f"{path}: 'out' directory is required (or pass --out)")
    return PipelineConfig(
        dataset=dataset,
        reference=dict(reference),
        method=method,
        lambd=lambd,
        normalize=bool(doc.get("normalize", False)),
        exponent=int(exponent),
        seed=int(seed),
        out=Path(out),
        center_clouds=bool(doc.get("center_clouds", False)),
    )


def load_dataset(cfg: PipelineConfig) -> meas.LabeledCloudSet:
    data = meas.read_manifest(cfg.dataset)
    if cfg.center_clouds:
        data = meas.LabeledCloudSet(
            tuple(c.centered() for c in data.clouds), data.labels
        )
    return data


def resolve_reference(cfg: PipelineConfig, data: meas.LabeledCloudSet) -> meas.DiscreteMeasure:
    spec = cfg.reference
    if spec["kind"] == "file":
        return meas.read_cloud_csv(spec["path"])
    d = int(spec.get("d", data.dim))
    if spec.get("fit", False):
        pooled = np.vstack([c.points for c in data.clouds])
        center = pooled.mean(axis=0)
        scale = np.where(pooled.std(axis=0) > 0, pooled.std(axis=0), 1.0)
    else:
        center = spec.get("center", 0.0)
        scale = spec.get("scale", 1.0)
    return meas.gaussian_reference(
        int(spec["m"]), d, center=center, scale=scale, seed=derive_seed(cfg.seed, "reference")
    )


def _run_meta(cfg: PipelineConfig, command: str, **extra) -> dict:
    meta = {
        "command": command,
        "dataset": str(cfg.dataset),
        "method": cfg.method,
        "lambd": cfg.lambd,
        "exponent": cfg.exponent,
        "normalize": cfg.normalize,
        "center_clouds": cfg.center_clouds,
        "seed": cfg.seed,
    }
    meta.update(extra)
    return meta


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def _class_transform(kind: str, c: int, d: int, rng):
    if kind == "translate":
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        return ("translate", 2.0 * direction)
    if kind == "scale":
        return ("scale", 1.6 + 0.2 * (c % 3))
    A = np.eye(d)
    if c % 2 == 0:
        A[0, 1 % d] = 1.5
    else:
        A[1 % d, 0] = 1.5
    return ("shear", A)


def make_synthetic_dataset(classes: int, clouds_per_class: int, points: int, d: int,
                           kinds, seed: int) -> meas.LabeledCloudSet:
    """Transform families of a common base shape, one class per family.

    Class c applies kinds[c % len(kinds)] around a class-specific center on a
    circle of radius 5, so classes are separated but clouds within a class
    vary only by a random transform intensity.
    """
    if classes < 1 or clouds_per_class < 1 or points < 1 or d < 2:
        raise InvalidParameter("need classes, clouds_per_class, points >= 1 and d >= 2")
    kinds = list(kinds)
    for kind in kinds:
        if kind not in meas._TRANSFORM_KINDS:
            raise InvalidParameter(f"unknown family kind {kind!r}")
    rng = np.random.default_rng(derive_seed(seed, "synth"))
    base_points = rng.standard_normal((points, d))
    all_clouds, all_labels = [], []
    for c in range(classes):
        kind = kinds[c % len(kinds)]
        angle = 2.0 * np.pi * c / classes
        center = np.zeros(d)
        center[0], center[1] = 5.0 * np.cos(angle), 5.0 * np.sin(angle)
        base = meas.uniform_measure(base_points + center)
        family = meas.synthetic_family(
            base,
            _class_transform(kind, c, d, rng),
            clouds_per_class,
            seed=derive_seed(seed, f"family-{c}"),
        )
        all_clouds.extend(family.clouds)
        all_labels.extend([f"{kind}{c}"] * clouds_per_class)
    return meas.LabeledCloudSet(tuple(all_clouds), np.array(all_labels))


def cmd_synth(args) -> int:
    out = Path(args.out)
    data = make_synthetic_dataset(
        args.classes, args.clouds_per_class, args.points, args.dim,
        [k.strip() for k in args.kinds.split(",") if k.strip()],
        args.seed,
    )
    (out / "clouds").mkdir(parents=True, exist_ok=True)
    rel_paths = []
    for k, cloud in enumerate(data.clouds):
        rel = Path("clouds") / f"cloud_{k:03d}.csv"
        _write_cloud(cloud, out / rel)
        rel_paths.append(str(rel))
    tmp = out / "manifest.json.tmp"
    meas.write_manifest(tmp, rel_paths, data.labels)
    os.replace(tmp, out / "manifest.json")
    print(f"synth: wrote {len(data)} clouds ({args.classes} classes) under {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# embed
# ---------------------------------------------------------------------------


def cmd_embed(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    data = load_dataset(cfg)
    reference = resolve_reference(cfg, data)
    t0 = time.perf_counter()
    embs = emb.embed_point_clouds(
        reference, data, method=cfg.solver_method(),
        normalize=cfg.normalize, exponent=cfg.exponent,
    )
    elapsed = time.perf_counter() - t0
    out = cfg.out
    _write_embeddings(embs, out / "embeddings.csv")
    _write_cloud(reference, out / "reference.csv")
    _write_json(
        out / "embed_run.json",
        _run_meta(
            cfg, "embed",
            reference_hash=embs.reference_id,
            m=embs.m, d=embs.dim, n_clouds=len(embs),
        ),
    )
    print(f"embed: {len(embs)} clouds -> {out / 'embeddings.csv'} ({elapsed:.2f}s)")
    return EXIT_OK


def _load_embedding_artifacts(cfg: PipelineConfig, embeddings_path=None):
    """Embedding rows plus the reference they were computed against."""
    emb_path = Path(embeddings_path) if embeddings_path else cfg.out / "embeddings.csv"
    ref_path = emb_path.parent / "reference.csv"
    if not ref_path.is_file():
        raise DataError(f"reference cloud not found next to embeddings: {ref_path}")
    reference = meas.read_cloud_csv(ref_path)
    return emb.read_embedding_csv(emb_path, reference)


# ---------------------------------------------------------------------------
# reduce
# ---------------------------------------------------------------------------


def cmd_reduce(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    emb_path = Path(args.embeddings) if args.embeddings else cfg.out / "embeddings.csv"
    rows, labels, _ = emb.read_embedding_rows(emb_path)
    seed = derive_seed(cfg.seed, "reduce")
    k = args.components
    if args.reducer == "pca":
        model, bal = red.pca_reduction(rows, labels, seed)
        coords = model.project(bal.rows, k)
        out_labels = bal.labels
    else:
        model, coords, out_labels = red.lda_reduction(rows, labels, k, seed)
    k_eff = coords.shape[1]
    out = cfg.out
    _write_csv_rows(
        out / f"reduced_{args.reducer}.csv",
        [f"component_{i + 1}" for i in range(k_eff)] + ["label"],
        [[repr(float(v)) for v in row] + [str(lab)] for row, lab in zip(coords, out_labels)],
    )
    _write_json(
        out / "reduce_run.json",
        _run_meta(cfg, "reduce", reducer=args.reducer, components=k_eff,
                  embeddings=str(emb_path), n_rows=int(coords.shape[0])),
    )
    print(f"reduce: {args.reducer} -> {out / f'reduced_{args.reducer}.csv'} ({k_eff} components)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------


def stratified_split(labels, test_fraction: float, seed: int):
    """Per-class seeded split; every class keeps >= 1 row on each side."""
    labels = np.asarray(labels)
    if not 0 < test_fraction < 1:
        raise ConfigError(f"test fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        if members.shape[0] < 2:
            raise DataError(
                f"class {cls!r} has {members.shape[0]} cloud(s); need at least 2 to split"
            )
        n_test = int(round(test_fraction * members.shape[0]))
        n_test = min(max(n_test, 1), members.shape[0] - 1)
        test_idx.append(members[:n_test])
        train_idx.append(members[n_test:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


def cmd_classify(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    emb_path = Path(args.embeddings) if args.embeddings else cfg.out / "embeddings.csv"
    rows, labels, _ = emb.read_embedding_rows(emb_path)
    if np.unique(labels).shape[0] < 2:
        raise DataError("classification needs at least 2 classes")
    train_idx, test_idx = stratified_split(
        labels, args.test_fraction, derive_seed(cfg.seed, "split")
    )
    # oversample the two sides separately to avoid leakage across the split
    train_bal = red.balance(rows[train_idx], labels[train_idx],
                            derive_seed(cfg.seed, "balance-train"))
    test_bal = red.balance(rows[test_idx], labels[test_idx],
                           derive_seed(cfg.seed, "balance-test"))
    report = clf.get_best_classifier(
        train_bal.rows, train_bal.labels, test_bal.rows, test_bal.labels,
        folds=args.folds, seed=derive_seed(cfg.seed, "cv"),
    )
    out = cfg.out
    payload = report.to_dict()
    payload["train_size"] = int(len(train_bal))
    payload["test_size"] = int(len(test_bal))
    _write_json(out / "report.json", payload)
    _write_text(out / "report.txt", report.to_text())
    _write_json(
        out / "classify_run.json",
        _run_meta(cfg, "classify", embeddings=str(emb_path),
                  test_fraction=args.test_fraction, folds=args.folds,
                  selected=report.selected),
    )
    best = report.selected_model()
    print(
        f"classify: selected {report.selected} "
        f"(cv {best.cv_mean:.3f}, test {best.test_accuracy:.3f}) -> {out / 'report.json'}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# barycenter
# ---------------------------------------------------------------------------


def _first_k_per_class(embs: emb.LabeledEmbeddingSet, k: int):
    keep = []
    for cls in embs.classes():
        members = np.flatnonzero(embs.labels == cls)
        if members.shape[0] < k:
            raise DataError(f"class {cls!r} has {members.shape[0]} clouds; fixed weights need {k}")
        keep.append(members[:k])
    keep = np.sort(np.concatenate(keep))
    return (
        emb.LabeledEmbeddingSet(
            rows=embs.rows[keep], labels=embs.labels[keep],
            reference=embs.reference, normalized=embs.normalized,
        ),
        keep,
    )


def _load_weight_rows(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"weights file not found: {path}")
    try:
        rows = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    return rows


def cmd_barycenter(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    embs = _load_embedding_artifacts(cfg, args.embeddings)
    data = load_dataset(cfg)
    if len(data) != len(embs) or not np.array_equal(
        np.asarray(data.labels, dtype=str), np.asarray(embs.labels, dtype=str)
    ):
        raise DataError("dataset manifest does not line up with the embedding rows")
    seed = derive_seed(cfg.seed, "barycenter")
    subset_map = np.arange(len(embs))
    source = embs
    if args.mode == "within":
        if args.weights == "fixed":
            source, subset_map = _first_k_per_class(embs, bary.FIXED_TRIO_WEIGHTS.shape[1])
            results, labels, weights = bary.generate_barycenters_within_class(
                source, weights=list(bary.FIXED_TRIO_WEIGHTS), uniform=False, seed=seed
            )
        elif args.weights == "uniform":
            results, labels, weights = bary.generate_barycenters_within_class(
                source, uniform=True, seed=seed
            )
        elif args.weights.startswith("random:"):
            n = _positive_int(args.weights.partition(":")[2], "random:N")
            results, labels, weights = bary.generate_barycenters_within_class(
                source, uniform=False, n=n, seed=seed
            )
        else:
            grid = _load_weight_rows(args.weights)
            results, labels, weights = bary.generate_barycenters_within_class(
                source, weights=list(grid), uniform=False, seed=seed
            )
    elif args.mode == "between":
        if not args.pairs:
            raise ConfigError("between mode needs --pairs 'labelA:labelB[,labelC:labelD...]'")
        pairs = []
        for chunk in args.pairs.split(","):
            c1, sep, c2 = chunk.partition(":")
            if not sep:
                raise ConfigError(f"malformed pair {chunk!r}; expected 'labelA:labelB'")
            pairs.append((c1.strip(), c2.strip()))
        weight_rows = None
        if args.weights.startswith("file:"):
            weight_rows = list(_load_weight_rows(args.weights.partition(":")[2]))
        elif args.weights not in ("random", "uniform"):
            raise ConfigError("between mode accepts --weights random or file:PATH")
        elif args.weights == "uniform":
            weight_rows = [np.array([0.5, 0.5])] * len(pairs)
        results, representatives, weights = bary.generate_barycenters_between_classes(
            source, pairs, weights=weight_rows, seed=seed
        )
        labels = np.array([r.label for r in results])
    else:  # general
        if not args.weights.startswith("file:"):
            raise ConfigError("general mode needs --weights file:PATH (a K x N weight matrix)")
        grid = _load_weight_rows(args.weights.partition(":")[2])
        rows_out = bary.generate_barycenters_general(source.rows, grid)
        results = []
        for k, (row, w) in enumerate(zip(rows_out, grid)):
            cloud = emb.pushforward(
                emb.embedding_from_row(row, source.reference, source.normalized),
                source.reference.masses,
            )
            results.append(
                bary.BarycenterResult(
                    embedding=row, cloud=cloud, weights=bary.as_weights(w),
                    source_indices=np.arange(len(source)), label="general",
                )
            )
        labels = np.array([r.label for r in results])
        weights = [r.weights for r in results]

    out = cfg.out
    cloud_files = []
    for k, result in enumerate(results):
        rel = Path("barycenters") / f"bary_{k:03d}_{_safe(result.label)}.csv"
        _write_cloud(result.cloud, out / rel)
        cloud_files.append(str(rel))
    _write_json(
        out / "barycenter_weights.json",
        [
            {
                "label": str(r.label),
                "source_indices": [int(subset_map[i]) for i in r.source_indices],
                "weights": [float(v) for v in r.weights.values],
            }
            for r in results
        ],
    )

    timing = None
    if not args.no_delta:
        support = args.support_size if args.support_size else embs.m
        delta_rows = []
        t_true = 0.0
        t_lot = 0.0
        for k, result in enumerate(results):
            family_clouds = [data.clouds[int(subset_map[i])] for i in result.source_indices]
            family_rows = source.rows[result.source_indices]
            t0 = time.perf_counter()
            true_res = bary.true_barycenter(
                family_clouds, result.weights, support, seed=derive_seed(cfg.seed, f"true-{k}")
            )
            t_true += time.perf_counter() - t0
            t0 = time.perf_counter()
            _ = result.weights.values @ family_rows  # LOT synthesis cost, timed for comparison
            t_lot += time.perf_counter() - t0
            delta_rows.append(
                [
                    str(result.label),
                    k,
                    repr(
                        bary.relative_error(
                            family_rows, source.reference, result.weights, family_clouds,
                            normalized=source.normalized, true_measure=true_res.measure,
                        )
                    ),
                ]
            )
        _write_csv_rows(out / "delta.csv", ["class", "index", "delta"], delta_rows)
        timing = (t_lot, t_true)
        if args.compare_true:
            _write_csv_rows(
                out / "timing.csv",
                ["approach", "seconds"],
                [["lot_barycenter", repr(t_lot)], ["true_barycenter", repr(t_true)]],
            )

    _write_json(
        out / "barycenter_run.json",
        _run_meta(cfg, "barycenter", mode=args.mode, weights=args.weights,
                  n_barycenters=len(results), cloud_files=cloud_files,
                  delta=not args.no_delta),
    )
    msg = f"barycenter: wrote {len(results)} clouds under {out / 'barycenters'}"
    if timing is not None:
        msg += f" (lot {timing[0]:.3f}s vs true {timing[1]:.3f}s)"
    print(msg)
    return EXIT_OK


def _safe(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "-" for ch in str(label))


def _positive_int(text: str, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"{what} needs an integer, got {text!r}") from None
    if value < 1:
        raise ConfigError(f"{what} must be >= 1, got {value}")
    return value


# ---------------------------------------------------------------------------
# iterate
# ---------------------------------------------------------------------------


def cmd_iterate(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    data = load_dataset(cfg)
    if args.reference_size:
        m_ref = args.reference_size
    elif cfg.reference["kind"] == "gaussian":
        m_ref = int(cfg.reference["m"])
    else:
        m_ref = meas.read_cloud_csv(cfg.reference["path"]).n
    t0 = time.perf_counter()
    trace = emb.compute_barycenter_embeddings(
        args.iterations, data, method=cfg.solver_method(),
        m_reference=m_ref, seed=derive_seed(cfg.seed, "iterate"),
        exponent=cfg.exponent,
    )
    elapsed = time.perf_counter() - t0
    out = cfg.out
    index = {"iterations": []}
    for j in range(len(trace)):
        record = trace[j]
        it_dir = out / "iterations" / f"iter_{j:02d}"
        _write_embeddings(record.embeddings, it_dir / "embeddings.csv")
        _write_cloud(record.reference, it_dir / "reference.csv")
        bary_files = []
        for lab, cloud in zip(record.class_barycenter_labels, record.class_barycenter_clouds):
            rel = f"bary_{_safe(lab)}.csv"
            _write_cloud(cloud, it_dir / rel)
            bary_files.append(rel)
        index["iterations"].append(
            {
                "iteration": j,
                "directory": str(it_dir.relative_to(out)),
                "reference_hash": record.reference.content_hash(),
                "class_barycenters": bary_files,
                "transport_objectives": [float(v) for v in record.transport_objectives],
            }
        )
    _write_json(out / "iterations" / "index.json", index)
    if not args.no_delta:
        stats = bary.iteration_delta_stats(
            trace, data, n_weights=args.delta_weights,
            seed=derive_seed(cfg.seed, "delta"),
        )
        _write_csv_rows(
            out / "delta_stats.csv",
            ["class", "iteration", "mean", "std", "n"],
            [[s["class"], s["iteration"], repr(s["mean"]), repr(s["std"]), s["n"]] for s in stats],
        )
    _write_json(
        out / "iterate_run.json",
        _run_meta(cfg, "iterate", iterations=args.iterations, reference_size=m_ref,
                  delta_weights=None if args.no_delta else args.delta_weights),
    )
    print(f"iterate: {len(trace)} iterations under {out / 'iterations'} ({elapsed:.2f}s)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def cmd_bench(args) -> int:
    out = Path(args.out)
    data = make_synthetic_dataset(
        args.classes, args.clouds_per_class, args.points, 2,
        ["translate"], args.seed,
    )
    pooled = np.vstack([c.points for c in data.clouds])
    scale = np.where(pooled.std(axis=0) > 0, pooled.std(axis=0), 1.0)
    reference = meas.gaussian_reference(
        args.points, 2, center=pooled.mean(axis=0), scale=scale,
        seed=derive_seed(args.seed, "bench-reference"),
    )
    t0 = time.perf_counter()
    embs = emb.embed_point_clouds(reference, data)
    t_embed = time.perf_counter() - t0

    rng = np.random.default_rng(derive_seed(args.seed, "bench-weights"))
    tasks = []  # (class label, weight vector, member indices)
    for cls in embs.classes():
        members = np.flatnonzero(embs.labels == cls)
        for _ in range(args.weights_per_class):
            tasks.append((cls, bary.random_simplex_weights(members.shape[0], rng), members))

    t0 = time.perf_counter()
    lot_clouds = []
    for _, wv, members in tasks:
        row = wv.values @ embs.rows[members]
        lot_clouds.append(
            emb.pushforward(emb.embedding_from_row(row, reference, embs.normalized),
                            reference.masses)
        )
    t_lot = t_embed + (time.perf_counter() - t0)

    t0 = time.perf_counter()
    true_results = [
        bary.true_barycenter([data.clouds[i] for i in members], wv, reference.n,
                             seed=derive_seed(args.seed, f"bench-true-{k}"))
        for k, (_, wv, members) in enumerate(tasks)
    ]
    t_true = time.perf_counter() - t0

    delta_rows = []
    for k, ((cls, wv, members), lot_cloud, true_res) in enumerate(
        zip(tasks, lot_clouds, true_results)
    ):
        delta = bary.relative_error(
            embs.rows[members], reference, wv, [data.clouds[i] for i in members],
            normalized=embs.normalized, true_measure=true_res.measure,
        )
        delta_rows.append([str(cls), k, repr(delta)])
    _write_csv_rows(out / "bench_delta.csv", ["class", "index", "delta"], delta_rows)
    _write_csv_rows(
        out / "bench.csv",
        ["approach", "seconds"],
        [["lot_barycenter", repr(t_lot)], ["true_barycenter", repr(t_true)]],
    )
    print(
        f"bench: {len(tasks)} weight vectors; lot {t_lot:.2f}s (embed {t_embed:.2f}s) "
        f"vs true {t_true:.2f}s (ratio {t_lot / t_true:.4f}) -> {out / 'bench.csv'}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lotkit",
        description="Embed point-cloud datasets by linearized optimal transport "
        "and run reductions, classifiers, and barycenter synthesis on top.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline configuration JSON")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic labeled dataset")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--clouds-per-class", type=int, default=15)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--kinds", default="translate,shear",
                   help="comma list from translate,shear,scale (cycled per class)")
    p.set_defaults(func=cmd_synth, needs_out=True, needs_seed=True)

    p = sub.add_parser("embed", parents=[common], help="embed a dataset against a reference")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("reduce", parents=[common], help="project embeddings with PCA or LDA")
    p.add_argument("--reducer", choices=("pca", "lda"), default="pca")
    p.add_argument("-k", "--components", type=int, default=3)
    p.add_argument("--embeddings", help="embedding CSV (default: <out>/embeddings.csv)")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("classify", parents=[common],
                       help="split, re-balance, and select the best classifier")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--embeddings", help="embedding CSV (default: <out>/embeddings.csv)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("barycenter", parents=[common],
                       help="synthesize barycenter clouds and report relative error")
    p.add_argument("--mode", choices=("within", "between", "general"), default="within")
    p.add_argument("--weights", default="uniform",
                   help="within: fixed|uniform|random:N|PATH; between: random|file:PATH; "
                        "general: file:PATH")
    p.add_argument("--pairs", help="between mode: 'labelA:labelB[,labelC:labelD...]'")
    p.add_argument("--support-size", type=int, default=None,
                   help="true-barycenter support size (default: reference size)")
    p.add_argument("--compare-true", action="store_true",
                   help="also write timing.csv comparing synthesis against the true solver")
    p.add_argument("--no-delta", action="store_true",
                   help="skip the true-barycenter oracle and the delta table")
    p.add_argument("--embeddings", help="embedding CSV (default: <out>/embeddings.csv)")
    p.set_defaults(func=cmd_barycenter)

    p = sub.add_parser("iterate", parents=[common],
                       help="iteratively refine the reference toward the data barycenter")
    p.add_argument("--iterations", type=int, default=2)
    p.add_argument("--reference-size", type=int, default=None)
    p.add_argument("--delta-weights", type=int, default=10,
                   help="random weight vectors per class for the delta table")
    p.add_argument("--no-delta", action="store_true")
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("bench", parents=[common],
                       help="time embedding-space barycenters against the true solver")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--clouds-per-class", type=int, default=10)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--weights-per-class", type=int, default=2)
    p.set_defaults(func=cmd_bench, needs_out=True, needs_seed=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "needs_out", False) and not args.out:
            raise ConfigError(f"{args.command} needs --out")
        if getattr(args, "needs_seed", False):
            if args.seed is None:
                raise ConfigError(f"{args.command} needs --seed")
        return args.func(args)
    except (ConfigError, InvalidParameter) as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverFailure, KernelUnderflow) as exc:
        print(f"error (solver): {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except LotError as exc:
        print(f"error (data): {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
