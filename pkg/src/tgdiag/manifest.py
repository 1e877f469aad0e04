"""Manifest-driven experiment runs with reproducible artifact trees.

Manifests are JSON with a versioned schema, validated fail-closed: unknown
fields are rejected so provenance stays honest.  Re-running the same
manifest reproduces every artifact byte for byte; ``provenance.json``
records the manifest hash, tool version, and every file written.
"""

from __future__ import annotations

import hashlib
import json
import os
import subprocess

from . import __version__
from ._rng import derive_seed
from .baselines import (
    BASELINE_NAMES,
    FeatureScorer,
    PredictionSet,
    check_coverage,
    make_baseline,
    parse_predictions,
    write_predictions,
)
from .diagnostics import (
    DiagnosticsError,
    assign_verdict,
    load_thresholds,
    report_to_json,
    write_series_csv,
    write_verdicts,
)
from .generators import write_id_map, write_pair_groups
from .graphdata import write_edge_stream, write_metadata, write_split
from .pipeline import (
    DatasetBundle,
    Stage,
    build_dataset,
    evaluate_plan,
    prepare_plan,
)
from .sampling import NegativePolicy
from .validation import InputError

MANIFEST_SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version", "property", "seed", "dataset", "split", "sampling",
    "transforms", "models", "metrics", "output_dir",
}
_DATASET_KEYS = {
    "file": {"kind", "path", "orientation"},
    "sbm": {"kind", "nodes_per_group", "p_intra", "p_inter", "horizon", "seed"},
    "ba": {"kind", "nodes", "edges_per_step", "train_steps", "val_steps", "seed"},
    "recency": {"kind", "nodes", "edges_per_step", "steps", "seed"},
    "persistence": {"kind", "source", "snapshot_t", "horizon", "bin_seconds"},
    "periodicity": {"kind", "source", "snapshot_t", "horizon", "bin_seconds"},
}
_SPLIT_KEYS = {"train_frac", "val_frac"}
_SAMPLING_KEYS = {"ratio", "exclusion", "orientation", "seed"}
_METRIC_KEYS = {
    "persistence": {"threshold"},
    "periodicity": {"threshold"},
    "recency": set(),
    "homophily": {"ks"},
    "preferential_attachment": {"bin_width_log2", "min_edges_per_bin"},
    "direction": set(),
    "density": {"doublings", "threshold"},
    "granularity": {"bin_seconds"},
}
_MODEL_KEYS = {
    "baseline": {"kind", "name", "model_id", "params"},
    "file": {"kind", "model_id", "path"},
    "bridge": {"kind", "name", "command", "model_id", "extra_args"},
}
_TRANSFORM_OPS = {"discretize": {"op", "bin_seconds"}, "augment_reverse": {"op"}}


class StageFailure(Exception):
    """An error annotated with the pipeline stage it occurred in."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"stage {stage!r}: {error}")
        self.stage = stage
        self.error = error


def _reject_unknown(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise InputError(f"unknown field(s) {sorted(unknown)} in {where}")


def validate_manifest(manifest: dict) -> dict:
    """Fail-closed schema check; returns the manifest unchanged."""
    if not isinstance(manifest, dict):
        raise InputError("manifest must be a JSON object")
    _reject_unknown(manifest, _TOP_KEYS, "manifest")
    for required in ("schema_version", "property", "seed", "dataset", "models"):
        if required not in manifest:
            raise InputError(f"manifest missing required field {required!r}")
    if manifest["schema_version"] != MANIFEST_SCHEMA_VERSION:
        raise InputError(
            f"unsupported schema_version {manifest['schema_version']!r}"
        )
    prop = manifest["property"]
    if prop not in _METRIC_KEYS:
        raise InputError(f"unknown property {prop!r}")
    if not isinstance(manifest["seed"], int):
        raise InputError("seed must be an integer")
    dataset = manifest["dataset"]
    if not isinstance(dataset, dict) or "kind" not in dataset:
        raise InputError("dataset block must be an object with a kind")
    kind = dataset["kind"]
    if kind not in _DATASET_KEYS:
        raise InputError(f"unknown dataset kind {kind!r}")
    _reject_unknown(dataset, _DATASET_KEYS[kind], f"dataset ({kind})")
    if kind in ("persistence", "periodicity"):
        source = dataset["source"]
        if not isinstance(source, dict) or source.get("kind") not in _DATASET_KEYS:
            raise InputError("dataset source must itself be a dataset block")
        _reject_unknown(
            source, _DATASET_KEYS[source["kind"]], "dataset source"
        )
    if "split" in manifest:
        _reject_unknown(manifest["split"], _SPLIT_KEYS, "split")
    if "sampling" in manifest:
        _reject_unknown(manifest["sampling"], _SAMPLING_KEYS, "sampling")
    if "metrics" in manifest:
        _reject_unknown(manifest["metrics"], _METRIC_KEYS[prop], f"metrics ({prop})")
    for i, transform in enumerate(manifest.get("transforms", [])):
        op = transform.get("op")
        if op not in _TRANSFORM_OPS:
            raise InputError(f"unknown transform op {op!r}")
        _reject_unknown(transform, _TRANSFORM_OPS[op], f"transforms[{i}]")
        if op == "augment_reverse" and prop != "direction":
            raise InputError("augment_reverse is only meaningful for direction runs")
    models = manifest["models"]
    if not isinstance(models, list) or not models:
        raise InputError("models must be a non-empty list")
    for i, model in enumerate(models):
        kind = model.get("kind")
        if kind not in _MODEL_KEYS:
            raise InputError(f"unknown model kind {kind!r} in models[{i}]")
        _reject_unknown(model, _MODEL_KEYS[kind], f"models[{i}]")
        if kind == "baseline" and model.get("name") not in BASELINE_NAMES:
            raise InputError(f"unknown baseline {model.get('name')!r} in models[{i}]")
        if kind == "file" and "model_id" not in model:
            raise InputError(f"file model in models[{i}] needs a model_id")
        if kind == "bridge" and not isinstance(model.get("command"), list):
            raise InputError(f"bridge model in models[{i}] needs a command list")
    return manifest


def _model_id(model: dict) -> str:
    raw = model.get("model_id") or model.get("name")
    if not raw:
        raise InputError("model needs a model_id")
    safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in str(raw))
    if not safe:
        raise InputError(f"model_id {raw!r} has no usable characters")
    return safe


class _ArtifactWriter:
    def __init__(self, root: str):
        self.root = root
        self.paths: list[str] = []

    def write(self, relative: str, data: bytes) -> str:
        path = os.path.join(self.root, relative)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(data)
        self.paths.append(relative.replace(os.sep, "/"))
        return path


def _write_examples(writer: _ArtifactWriter, stage_dir: str, stage: Stage) -> None:
    if stage.examples is None:
        return
    for label, triples in (
        ("positives", stage.examples.positives),
        ("negatives", stage.examples.negatives),
    ):
        rows = ["u,v,t"]
        rows.extend(f"{u},{v},{t}" for u, v, t in triples)
        rows.append("")
        writer.write(
            f"{stage_dir}/train_{label}.csv", "\n".join(rows).encode("ascii")
        )


def _write_stage(writer: _ArtifactWriter, stage: Stage) -> str:
    stage_dir = f"stages/{stage.name}"
    writer.write(f"{stage_dir}/edges.csv", write_edge_stream(stage.stream))
    writer.write(f"{stage_dir}/meta.json", write_metadata(stage.stream))
    if stage.split is not None:
        writer.write(f"{stage_dir}/split.json", write_split(stage.split))
    _write_examples(writer, stage_dir, stage)
    qu, qv, qt = stage.queries
    rows = ["u,v,t"]
    rows.extend(f"{u},{v},{t}" for u, v, t in zip(qu.tolist(), qv.tolist(), qt.tolist()))
    rows.append("")
    writer.write(f"{stage_dir}/queries.csv", "\n".join(rows).encode("ascii"))
    return stage_dir


def _write_dataset(writer: _ArtifactWriter, bundle: DatasetBundle) -> None:
    writer.write("dataset/edges.csv", write_edge_stream(bundle.stream))
    writer.write("dataset/meta.json", write_metadata(bundle.stream))
    if bundle.stream.node_groups is not None:
        from .graphdata import write_node_groups

        writer.write("dataset/groups.csv", write_node_groups(bundle.stream.node_groups))
    if bundle.pair_groups is not None:
        writer.write("dataset/pair_groups.csv", write_pair_groups(bundle.pair_groups))
    if bundle.node_map is not None:
        writer.write("dataset/id_map.csv", write_id_map(bundle.node_map))


def _predict_baseline(model: dict, stage: Stage, model_id: str,
                      default_seed: int) -> PredictionSet:
    params = dict(model.get("params", {}))
    name = model["name"]
    if name == "feature":
        params.setdefault("seed", default_seed)
        scorer: FeatureScorer = make_baseline(name, **params)
        if stage.examples is None:
            raise InputError("feature baseline needs training examples")
        scorer.fit(stage.examples, stage.stream, stage.train_end)
    else:
        scorer = make_baseline(name, **params)
        scorer.fit(stage.stream, stage.train_end)
    return scorer.predict_scores(stage.queries, model_id)


def _predict_file(model: dict, stage: Stage, model_id: str,
                  multi_stage: bool) -> PredictionSet:
    path = model["path"]
    if multi_stage:
        path = os.path.join(path, f"{stage.name}.csv")
    if not os.path.exists(path):
        raise InputError(f"missing external prediction file: {path}")
    with open(path, "rb") as fh:
        return parse_predictions(fh.read(), model_id)


def _predict_bridge(model: dict, stage: Stage, model_id: str, writer: _ArtifactWriter,
                    stage_dir: str, seed: int) -> PredictionSet:
    out_rel = f"predictions/{model_id}/{stage.name}.csv"
    out_path = os.path.join(writer.root, out_rel)
    os.makedirs(os.path.dirname(out_path), exist_ok=True)
    command = list(model["command"]) + [
        "--model", model["name"],
        "--data", os.path.join(writer.root, stage_dir),
        "--queries", os.path.join(writer.root, stage_dir, "queries.csv"),
        "--out", out_path,
        "--seed", str(seed),
    ] + list(model.get("extra_args", []))
    result = subprocess.run(command, capture_output=True, text=True)
    if result.returncode != 0:
        raise InputError(
            f"bridge command failed with exit {result.returncode}: "
            f"{result.stderr.strip()[-500:]}"
        )
    if not os.path.exists(out_path):
        raise InputError(f"bridge produced no prediction file at {out_path}")
    if os.path.exists(out_path + ".meta.json"):
        writer.paths.append(f"{out_rel}.meta.json")  # bridge sidecar
    with open(out_path, "rb") as fh:
        return parse_predictions(fh.read(), model_id)


def run_manifest(
    manifest: dict,
    output_dir: str | None = None,
    threads: int = 1,
    thresholds_path: str | None = None,
) -> dict:
    """Execute a validated manifest; returns {model_id: (report, verdict)}.

    The artifact tree under ``output_dir`` is a pure function of the
    manifest content, so re-runs are byte-identical.
    """
    try:
        validate_manifest(manifest)
    except InputError as exc:
        raise StageFailure("load", exc) from exc
    prop = manifest["property"]
    seed = manifest["seed"]
    out = output_dir or manifest.get("output_dir")
    if out is None:
        raise StageFailure("load", InputError("no output directory given"))
    writer = _ArtifactWriter(out)

    try:
        bundle = build_dataset(manifest["dataset"], seed)
    except InputError as exc:
        raise StageFailure("load", exc) from exc

    transforms = manifest.get("transforms", [])
    augment = any(tr["op"] == "augment_reverse" for tr in transforms)
    try:
        for tr in transforms:
            if tr["op"] == "discretize":
                from .transforms import discretize

                bundle.stream = discretize(bundle.stream, tr["bin_seconds"])
    except InputError as exc:
        raise StageFailure("transform", exc) from exc

    sampling = dict(manifest.get("sampling", {}))
    policy = NegativePolicy(
        ratio=float(sampling.get("ratio", 1.0)),
        exclusion=sampling.get("exclusion", "per_timestep"),
        orientation=sampling.get("orientation", "as_stored"),
        seed=sampling.get("seed", derive_seed(seed, 2)),
    )
    opts = dict(manifest.get("metrics", {}))
    opts.update(manifest.get("split", {}))
    try:
        plan = prepare_plan(
            prop, bundle, policy, opts, threads=threads,
            augment_reverse_training=augment,
        )
    except InputError as exc:
        raise StageFailure("sample", exc) from exc

    _write_dataset(writer, bundle)
    stage_dirs = {stage.name: _write_stage(writer, stage) for stage in plan.stages}

    thresholds = load_thresholds(thresholds_path)
    results: dict[str, tuple] = {}
    verdict_rows = []
    multi_stage = len(plan.stages) > 1
    for index, model in enumerate(manifest["models"]):
        model_id = _model_id(model)
        if model_id in results:
            raise StageFailure(
                f"predict:{model_id}", InputError(f"duplicate model id {model_id!r}")
            )
        predictions: dict[str, PredictionSet] = {}
        for stage in plan.stages:
            try:
                if model["kind"] == "baseline":
                    preds = _predict_baseline(
                        model, stage, model_id, derive_seed(seed, 3, index)
                    )
                elif model["kind"] == "file":
                    preds = _predict_file(model, stage, model_id, multi_stage)
                    check_coverage(preds, stage.queries)
                else:
                    preds = _predict_bridge(
                        model, stage, model_id, writer, stage_dirs[stage.name],
                        derive_seed(seed, 3, index),
                    )
                    check_coverage(preds, stage.queries)
            except InputError as exc:
                raise StageFailure(f"predict:{model_id}", exc) from exc
            rel = f"predictions/{model_id}/{stage.name}.csv"
            writer.write(rel, write_predictions(preds))
            predictions[stage.name] = preds
        try:
            report = evaluate_plan(plan, predictions)
            verdict = assign_verdict(prop, report, thresholds)
        except DiagnosticsError as exc:
            raise StageFailure(f"metrics:{model_id}", exc) from exc
        writer.write(f"reports/{model_id}.json", report_to_json(report))
        for series_name, series in report.series.items():
            writer.write(
                f"reports/{model_id}__{series_name}.csv", write_series_csv(series)
            )
        verdict_rows.append((prop, model_id, verdict.level))
        results[model_id] = (report, verdict)

    writer.write("verdicts.csv", write_verdicts(verdict_rows))
    payload = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool_version": __version__,
        "manifest_sha256": hashlib.sha256(
            json.dumps(manifest, sort_keys=True).encode()
        ).hexdigest(),
        "manifest": manifest,
        "artifacts": sorted(writer.paths) + ["provenance.json"],
    }
    with open(os.path.join(out, "provenance.json"), "wb") as fh:
        fh.write((json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("ascii"))
    return results
