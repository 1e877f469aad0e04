"""Command-line interface.

Subcommands mirror the library operations: ``generate``, ``transform``,
``sample``, ``baseline``, ``eval``, ``report``, ``validate``, and ``run``
for manifest-driven pipelines.  Exit codes: 0 success, 1 metric-stage
failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .baselines import make_baseline, parse_predictions, write_predictions
from .diagnostics import (
    PROPERTIES,
    DiagnosticsError,
    assign_verdict,
    load_thresholds,
    parse_verdicts,
    report_to_json,
    write_series_csv,
)
from .generators import parse_pair_groups, write_id_map, write_pair_groups
from .graphdata import (
    chronological_split,
    load_dataset,
    parse_edge_stream,
    save_dataset,
)
from .manifest import StageFailure, run_manifest, validate_manifest
from .pipeline import DatasetBundle, build_dataset, evaluate_plan, prepare_plan
from .sampling import NegativePolicy, sample_negatives
from .transforms import discretize, flatten_timestamps, to_continuous
from .validation import InputError

EXIT_OK = 0
EXIT_METRIC = 1
EXIT_INPUT = 2


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("TGDIAG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"TGDIAG_THREADS must be an integer, got {env!r}") from None
    return 1


def _load_queries(path: str, node_count: int):
    with open(path, "rb") as fh:
        stream = parse_edge_stream(fh.read(), node_count, "discrete")
    return stream.u, stream.v, stream.t


def _cmd_generate(args) -> int:
    spec: dict = {"kind": args.kind, "seed": args.seed}
    if args.kind == "sbm":
        spec.update(
            nodes_per_group=args.nodes_per_group, p_intra=args.p_intra,
            p_inter=args.p_inter, horizon=args.horizon or 100,
        )
    elif args.kind == "ba":
        spec.update(
            nodes=args.nodes, edges_per_step=args.edges_per_step,
            train_steps=args.train_steps, val_steps=args.val_steps,
        )
    elif args.kind == "recency":
        spec.update(
            nodes=args.nodes, edges_per_step=args.edges_per_step, steps=args.steps,
        )
    else:  # persistence | periodicity
        if not args.source or args.snapshot_t is None:
            raise InputError(f"{args.kind} requires --source and --snapshot-t")
        spec = {
            "kind": args.kind,
            "source": {"kind": "file", "path": args.source},
            "snapshot_t": args.snapshot_t,
            "horizon": args.horizon or (10 if args.kind == "persistence" else 20),
        }
        if args.bin_seconds:
            spec["bin_seconds"] = args.bin_seconds
    bundle = build_dataset(spec, args.seed)
    save_dataset(bundle.stream, args.out)
    if bundle.pair_groups is not None:
        with open(os.path.join(args.out, "pair_groups.csv"), "wb") as fh:
            fh.write(write_pair_groups(bundle.pair_groups))
    if bundle.node_map is not None:
        with open(os.path.join(args.out, "id_map.csv"), "wb") as fh:
            fh.write(write_id_map(bundle.node_map))
    print(f"wrote {len(bundle.stream)} edges to {args.out}")
    return EXIT_OK


def _cmd_transform(args) -> int:
    stream = load_dataset(args.input)
    if args.op == "discretize":
        out = discretize(stream, args.bin_seconds, args.granularity)
    elif args.op == "to-continuous":
        out = to_continuous(stream, args.bin_seconds)
    else:  # flatten
        split = chronological_split(stream, args.train_frac, args.val_frac)
        out = flatten_timestamps(stream, split)
    save_dataset(out, args.out)
    print(f"wrote {len(out)} edges to {args.out}")
    return EXIT_OK


def _cmd_sample(args) -> int:
    stream = load_dataset(args.data)
    policy = NegativePolicy(
        ratio=args.ratio, exclusion=args.exclusion,
        orientation=args.orientation, seed=args.seed,
    )
    threads = _resolve_threads(args.threads)
    examples = sample_negatives(stream, None, policy, epoch=args.epoch,
                                threads=threads)
    if args.segment != "all":
        split = chronological_split(stream, args.train_frac, args.val_frac)
        examples = examples.sliced(split, args.segment)
    os.makedirs(args.out, exist_ok=True)
    for label, triples in (
        ("positives", examples.positives), ("negatives", examples.negatives),
    ):
        rows = ["u,v,t"]
        rows.extend(f"{u},{v},{t}" for u, v, t in triples)
        rows.append("")
        with open(os.path.join(args.out, f"{label}.csv"), "wb") as fh:
            fh.write("\n".join(rows).encode("ascii"))
    policy_echo = {
        "ratio": policy.ratio, "exclusion": policy.exclusion,
        "orientation": policy.orientation, "seed": policy.seed,
        "epoch": args.epoch, "segment": args.segment,
    }
    with open(os.path.join(args.out, "policy.json"), "w", encoding="ascii") as fh:
        json.dump(policy_echo, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"wrote {len(examples.positives)} positives / "
        f"{len(examples.negatives)} negatives to {args.out}"
    )
    return EXIT_OK


def _cmd_baseline(args) -> int:
    stream = load_dataset(args.data)
    if args.train_end is not None:
        train_end = args.train_end
    else:
        train_end = chronological_split(
            stream, args.train_frac, args.val_frac
        ).train_end
    queries = _load_queries(args.queries, stream.node_count)
    params: dict = {}
    if args.name in ("edgebank", "recency") and args.undirected:
        params["undirected"] = True
    if args.name == "recency":
        params["decay"] = args.decay
    if args.name == "feature":
        params.update(
            learning_rate=args.learning_rate, iterations=args.iterations,
            decay=args.decay, seed=args.seed,
        )
    scorer = make_baseline(args.name, **params)
    if args.name == "feature":
        if not args.examples:
            raise InputError("feature baseline requires --examples DIR")
        from .sampling import LabeledExampleSet

        def _read(label):
            path = os.path.join(args.examples, f"{label}.csv")
            with open(path, "rb") as fh:
                s = parse_edge_stream(fh.read(), stream.node_count, "discrete")
            return tuple(zip(s.u.tolist(), s.v.tolist(), s.t.tolist()))

        examples = LabeledExampleSet(
            positives=_read("positives"), negatives=_read("negatives"),
            node_count=stream.node_count,
        )
        scorer.fit(examples, stream, train_end)
    else:
        scorer.fit(stream, train_end)
    predictions = scorer.predict_scores(queries, args.model_id)
    with open(args.out, "wb") as fh:
        fh.write(write_predictions(predictions))
    print(f"wrote {len(predictions)} predictions to {args.out}")
    return EXIT_OK


def _bundle_from_dir(data_dir: str, orientation: str) -> DatasetBundle:
    stream = load_dataset(data_dir)
    pair_groups = None
    groups_path = os.path.join(data_dir, "pair_groups.csv")
    if os.path.exists(groups_path):
        with open(groups_path, "rb") as fh:
            pair_groups = parse_pair_groups(fh.read())
    return DatasetBundle(stream=stream, orientation=orientation,
                         pair_groups=pair_groups)


def _cmd_eval(args) -> int:
    if args.property == "granularity":
        raise InputError(
            "granularity needs one prediction set per variant; drive it "
            "through `tgdiag run` with a granularity manifest"
        )
    bundle = _bundle_from_dir(args.data, args.orientation)
    opts: dict = {"train_frac": args.train_frac, "val_frac": args.val_frac}
    if args.ks:
        opts["ks"] = args.ks
    if args.threshold is not None:
        opts["threshold"] = args.threshold
    policy = NegativePolicy(seed=args.seed)
    plan = prepare_plan(args.property, bundle, policy, opts, threads=1)
    with open(args.pred, "rb") as fh:
        predictions = parse_predictions(fh.read(), args.model_id)
    stage_name = plan.stages[0].name
    report = evaluate_plan(plan, {stage_name: predictions})
    verdict = assign_verdict(args.property, report, load_thresholds(args.thresholds))
    payload = json.loads(report_to_json(report))
    payload["verdict"] = {"level": verdict.level, "rationale": verdict.rationale}
    out_text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(out_text)
        if args.series_dir:
            os.makedirs(args.series_dir, exist_ok=True)
            for name, series in report.series.items():
                path = os.path.join(args.series_dir, f"{args.model_id}__{name}.csv")
                with open(path, "wb") as sfh:
                    sfh.write(write_series_csv(series))
    else:
        sys.stdout.write(out_text)
    print(f"verdict: {verdict.level} ({verdict.rationale})", file=sys.stderr)
    return EXIT_OK


def _cmd_report(args) -> int:
    cells: dict[tuple[str, str], str] = {}
    models: list[str] = []
    for run_dir in args.inputs:
        path = os.path.join(run_dir, "verdicts.csv")
        if not os.path.exists(path):
            raise InputError(f"no verdicts.csv under {run_dir}")
        with open(path, "rb") as fh:
            for prop, model, level in parse_verdicts(fh.read()):
                cells[(prop, model)] = level
                if model not in models:
                    models.append(model)
    rows = ["property," + ",".join(models)]
    for prop in PROPERTIES:
        row = [prop] + [cells.get((prop, model), "") for model in models]
        rows.append(",".join(row))
    rows.append("")
    text = "\n".join(rows)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_validate(args) -> int:
    with open(args.pred, "rb") as fh:
        predictions = parse_predictions(fh.read())
    if args.queries:
        if args.data:
            node_count = load_dataset(args.data).node_count
        else:
            top = int(max(predictions.u.max(), predictions.v.max())) + 1 if len(
                predictions
            ) else 1
            node_count = max(top, 1)
        queries = _load_queries(args.queries, node_count)
        from .baselines import check_coverage

        check_coverage(predictions, queries)
    print(f"valid: {len(predictions)} records")
    return EXIT_OK


def _cmd_run(args) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid manifest JSON: {exc}") from None
    validate_manifest(manifest)
    threads = _resolve_threads(args.threads)
    results = run_manifest(
        manifest, output_dir=args.out, threads=threads,
        thresholds_path=args.thresholds,
    )
    for model_id, (report, verdict) in results.items():
        print(f"{manifest['property']},{model_id},{verdict.level}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tgdiag",
        description="Diagnostics for temporal-graph link predictors.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic dataset")
    gen.add_argument("--kind", required=True,
                     choices=["sbm", "ba", "recency", "persistence", "periodicity"])
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--nodes-per-group", type=int, default=500)
    gen.add_argument("--p-intra", type=float, default=0.005)
    gen.add_argument("--p-inter", type=float, default=0.001)
    gen.add_argument("--horizon", type=int, default=None)
    gen.add_argument("--nodes", type=int, default=1000)
    gen.add_argument("--edges-per-step", type=int, default=2000)
    gen.add_argument("--train-steps", type=int, default=100)
    gen.add_argument("--val-steps", type=int, default=21)
    gen.add_argument("--steps", type=int, default=10)
    gen.add_argument("--source", help="dataset dir for persistence/periodicity")
    gen.add_argument("--snapshot-t", type=int, help="snapshot timestep")
    gen.add_argument("--bin-seconds", type=int, default=0,
                     help="discretize a continuous source first")
    gen.set_defaults(func=_cmd_generate)

    tr = sub.add_parser("transform", help="apply a dataset transform")
    tr.add_argument("--op", required=True,
                    choices=["discretize", "flatten", "to-continuous"])
    tr.add_argument("--in", dest="input", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--bin-seconds", type=int, default=3600)
    tr.add_argument("--granularity", default=None)
    tr.add_argument("--train-frac", type=float, default=0.7)
    tr.add_argument("--val-frac", type=float, default=0.15)
    tr.set_defaults(func=_cmd_transform)

    sm = sub.add_parser("sample", help="sample negative examples")
    sm.add_argument("--data", required=True)
    sm.add_argument("--out", required=True)
    sm.add_argument("--ratio", type=float, default=1.0)
    sm.add_argument("--exclusion", default="per_timestep",
                    choices=["per_timestep", "any_timestep"])
    sm.add_argument("--orientation", default="as_stored",
                    choices=["as_stored", "single_direction"])
    sm.add_argument("--seed", type=int, required=True)
    sm.add_argument("--epoch", type=int, default=0)
    sm.add_argument("--segment", default="all",
                    choices=["all", "train", "val", "test"])
    sm.add_argument("--train-frac", type=float, default=0.7)
    sm.add_argument("--val-frac", type=float, default=0.15)
    sm.add_argument("--threads", type=int, default=None)
    sm.set_defaults(func=_cmd_sample)

    bl = sub.add_parser("baseline", help="fit a baseline and score queries")
    bl.add_argument("--name", required=True,
                    choices=["edgebank", "recency", "popularity", "feature"])
    bl.add_argument("--data", required=True)
    bl.add_argument("--queries", required=True)
    bl.add_argument("--out", required=True)
    bl.add_argument("--model-id", default=None)
    bl.add_argument("--train-end", type=int, default=None)
    bl.add_argument("--train-frac", type=float, default=0.7)
    bl.add_argument("--val-frac", type=float, default=0.15)
    bl.add_argument("--undirected", action="store_true")
    bl.add_argument("--decay", type=float, default=0.5)
    bl.add_argument("--learning-rate", type=float, default=0.1)
    bl.add_argument("--iterations", type=int, default=500)
    bl.add_argument("--seed", type=int, default=0)
    bl.add_argument("--examples", default=None,
                    help="examples dir (feature baseline)")
    bl.set_defaults(func=_cmd_baseline)

    ev = sub.add_parser("eval", help="score a prediction file against a property")
    ev.add_argument("--property", required=True, choices=list(PROPERTIES))
    ev.add_argument("--pred", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--out", default=None)
    ev.add_argument("--series-dir", default=None)
    ev.add_argument("--model-id", default="external")
    ev.add_argument("--orientation", default="undirected",
                    choices=["directed", "undirected"])
    ev.add_argument("--train-frac", type=float, default=0.7)
    ev.add_argument("--val-frac", type=float, default=0.15)
    ev.add_argument("--ks", type=int, nargs="*", default=None)
    ev.add_argument("--threshold", type=float, default=None)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--thresholds", default=None,
                    help="alternative thresholds JSON")
    ev.set_defaults(func=_cmd_eval)

    rp = sub.add_parser("report", help="merge run verdicts into a matrix")
    rp.add_argument("--in", dest="inputs", nargs="+", required=True)
    rp.add_argument("--out", default=None)
    rp.set_defaults(func=_cmd_report)

    va = sub.add_parser("validate", help="check a prediction file's conformance")
    va.add_argument("--pred", required=True)
    va.add_argument("--queries", default=None)
    va.add_argument("--data", default=None)
    va.set_defaults(func=_cmd_validate)

    rn = sub.add_parser("run", help="run a manifest end to end")
    rn.add_argument("manifest")
    rn.add_argument("--out", default=None)
    rn.add_argument("--threads", type=int, default=None)
    rn.add_argument("--thresholds", default=None)
    rn.set_defaults(func=_cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageFailure as failure:
        print(f"error at stage {failure.stage}: {failure.error}", file=sys.stderr)
        if isinstance(failure.error, DiagnosticsError):
            return EXIT_METRIC
        return EXIT_INPUT
    except DiagnosticsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_METRIC
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
