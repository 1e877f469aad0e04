"""Property experiment assembly: datasets, stages, queries, and reports.

A property run is organized as *stages*: each stage carries the stream a
model may train on (history up to ``train_end``), the training example
set, and the queries to score.  Most properties have a single ``test``
stage; density retrains per negative ratio and granularity runs one stage
per dataset variant.  Evaluation consumes one prediction set per stage and
produces a single :class:`~tgdiag.diagnostics.MetricReport` plus verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed
from .baselines import PredictionSet
from .diagnostics import (
    DiagnosticsError,
    MetricReport,
    balanced_accuracy_from_scores,
    degree_binned_scores,
    direction_symmetry,
    group_mean_scores,
    predicted_density,
    recency_profile,
    roc_auc_from_scores,
    topk_composition,
)
from .generators import (
    BaParams,
    PeriodicityData,
    PersistenceData,
    RecencyParams,
    SbmParams,
    gen_ba_dynamic,
    gen_periodicity,
    gen_persistence,
    gen_recency,
    gen_sbm_dynamic,
)
from .graphdata import (
    EdgeStream,
    SplitSpec,
    chronological_split,
    load_dataset,
    snapshot_at,
)
from .sampling import (
    LabeledExampleSet,
    NegativePolicy,
    sample_negatives,
    triples_to_arrays,
)
from .transforms import augment_reverse, discretize, granularity_variants
from .validation import InputError, check_choice

Queries = tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass
class DatasetBundle:
    """A dataset plus the conventions needed to evaluate on it."""

    stream: EdgeStream
    orientation: str  # "directed" or "undirected" candidate universe
    pair_groups: dict[tuple[int, int], str] | None = None
    node_map: tuple[int, ...] | None = None


@dataclass
class Stage:
    """One train-and-score unit of a property run."""

    name: str
    stream: EdgeStream
    train_end: int
    queries: Queries
    split: SplitSpec | None = None
    examples: LabeledExampleSet | None = None


@dataclass
class PropertyPlan:
    """Stages plus everything evaluation needs once predictions exist."""

    property: str
    stages: list[Stage]
    context: dict = field(default_factory=dict)


def _collapse(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def _universe_arrays(node_count: int, orientation: str) -> tuple[np.ndarray, np.ndarray]:
    if orientation == "undirected":
        return tuple(np.triu_indices(node_count, k=1))  # type: ignore[return-value]
    a = np.repeat(np.arange(node_count, dtype=np.int64), node_count)
    b = np.tile(np.arange(node_count, dtype=np.int64), node_count)
    keep = a != b
    return a[keep], b[keep]


def _universe_queries(node_count: int, orientation: str, t: int) -> Queries:
    u, v = _universe_arrays(node_count, orientation)
    return u, v, np.full(len(u), t, dtype=np.int64)


def _stack_queries(parts: list[Queries]) -> Queries:
    u = np.concatenate([p[0] for p in parts])
    v = np.concatenate([p[1] for p in parts])
    t = np.concatenate([p[2] for p in parts])
    return u, v, t


def _positive_pairs_at(stream: EdgeStream, t: int, orientation: str) -> set:
    mask = stream.t == t
    pairs = zip(stream.u[mask].tolist(), stream.v[mask].tolist())
    if orientation == "undirected":
        return {_collapse(a, b) for a, b in pairs}
    return set(pairs)


def _test_timesteps(stream: EdgeStream, split: SplitSpec) -> list[int]:
    times = stream.distinct_timesteps()
    out = [int(t) for t in times if t > split.val_end]
    if not out:
        raise InputError("no test timesteps after the validation boundary")
    return out


def _augment_train_stream(stream: EdgeStream, train_end: int) -> EdgeStream:
    """Add the reverse of every distinct training triple (test data untouched)."""
    present = set(zip(stream.u.tolist(), stream.v.tolist(), stream.t.tolist()))
    extra = [
        (v, u, t)
        for (u, v, t) in sorted(present)
        if t <= train_end and (v, u, t) not in present
    ]
    rows = list(zip(stream.u.tolist(), stream.v.tolist(), stream.t.tolist())) + extra
    return EdgeStream.from_edges(
        stream.node_count, rows, stream.time_kind,
        stream.granularity, stream.node_groups, sort=True,
    )


def _enforce_ratio(examples: LabeledExampleSet, ratio: float) -> LabeledExampleSet:
    """Trim surplus negatives so the post-augmentation ratio holds exactly."""
    target = math.ceil(ratio * len(examples.positives))
    if len(examples.negatives) <= target:
        return examples
    return LabeledExampleSet(
        positives=examples.positives,
        negatives=examples.negatives[:target],
        node_count=examples.node_count,
        policy=examples.policy,
        exclusions=None,
    )


# ---------------------------------------------------------------------------
# dataset assembly


_GENERATOR_ORIENTATION = "undirected"


def build_dataset(spec: dict, seed: int) -> DatasetBundle:
    """Materialize the manifest's dataset block into a bundle."""
    kind = spec["kind"]
    if kind == "file":
        stream = load_dataset(spec["path"])
        return DatasetBundle(
            stream=stream, orientation=spec.get("orientation", "directed")
        )
    if kind == "sbm":
        params = SbmParams(
            nodes_per_group=spec.get("nodes_per_group", 500),
            p_intra=spec.get("p_intra", 0.005),
            p_inter=spec.get("p_inter", 0.001),
            horizon=spec.get("horizon", 100),
            seed=spec.get("seed", derive_seed(seed, 1)),
        )
        return DatasetBundle(gen_sbm_dynamic(params), _GENERATOR_ORIENTATION)
    if kind == "ba":
        params = BaParams(
            nodes=spec.get("nodes", 1000),
            edges_per_step=spec.get("edges_per_step", 2000),
            train_steps=spec.get("train_steps", 100),
            val_steps=spec.get("val_steps", 21),
            seed=spec.get("seed", derive_seed(seed, 1)),
        )
        return DatasetBundle(gen_ba_dynamic(params), _GENERATOR_ORIENTATION)
    if kind == "recency":
        params = RecencyParams(
            nodes=spec["nodes"],
            edges_per_step=spec["edges_per_step"],
            steps=spec.get("steps", 10),
            seed=spec.get("seed", derive_seed(seed, 1)),
        )
        return DatasetBundle(gen_recency(params), _GENERATOR_ORIENTATION)
    if kind in ("persistence", "periodicity"):
        source = build_dataset(spec["source"], derive_seed(seed, 2))
        base = source.stream
        if base.time_kind == "continuous":
            base = discretize(base, spec.get("bin_seconds", 3600))
        t0 = spec["snapshot_t"]
        if kind == "persistence":
            data: PersistenceData = gen_persistence(
                snapshot_at(base, t0), spec.get("horizon", 10)
            )
            return DatasetBundle(
                data.stream, _GENERATOR_ORIENTATION, node_map=data.node_map
            )
        perio: PeriodicityData = gen_periodicity(
            snapshot_at(base, t0), snapshot_at(base, t0 + 1), spec.get("horizon", 20)
        )
        return DatasetBundle(
            perio.stream,
            _GENERATOR_ORIENTATION,
            pair_groups=perio.pair_groups,
            node_map=perio.node_map,
        )
    raise InputError(f"unknown dataset kind {kind!r}")


# ---------------------------------------------------------------------------
# property plans


def _plan_persistence(bundle, policy, opts, threads) -> PropertyPlan:
    stream = bundle.stream
    split = chronological_split(
        stream, opts.get("train_frac", 0.7), opts.get("val_frac", 0.15)
    )
    examples = sample_negatives(stream, split, policy, threads=threads).sliced(
        split, "train"
    )
    tests = _test_timesteps(stream, split)
    queries = _stack_queries(
        [_universe_queries(stream.node_count, bundle.orientation, t) for t in tests]
    )
    labels = {}
    for t in tests:
        positive = _positive_pairs_at(stream, t, bundle.orientation)
        u, v, tt = _universe_queries(stream.node_count, bundle.orientation, t)
        for a, b in zip(u.tolist(), v.tolist()):
            labels[(a, b, t)] = 1 if (a, b) in positive else 0
    stage = Stage("test", stream, split.train_end, queries, split, examples)
    return PropertyPlan(
        "persistence", [stage], {"labels": labels, "threshold": opts.get("threshold", 0.5)}
    )


def _plan_periodicity(bundle, policy, opts, threads) -> PropertyPlan:
    if bundle.pair_groups is None:
        raise InputError("periodicity requires pair groups")
    plan = _plan_persistence(bundle, policy, opts, threads)
    # Same universe queries and split; labels follow the parity pattern.
    stage = plan.stages[0]
    labels = {}
    for (u, v, t) in plan.context["labels"]:
        group = bundle.pair_groups[(u, v)]
        active = ("both", "even") if t % 2 == 0 else ("both", "odd")
        labels[(u, v, t)] = 1 if group in active else 0
    return PropertyPlan(
        "periodicity",
        [stage],
        {
            "labels": labels,
            "pair_groups": bundle.pair_groups,
            "threshold": opts.get("threshold", 0.5),
        },
    )


def _plan_recency(bundle, policy, opts, threads) -> PropertyPlan:
    stream = bundle.stream
    last_seen: dict[tuple[int, int], int] = {}
    for u, v, t in zip(stream.u.tolist(), stream.v.tolist(), stream.t.tolist()):
        key = _collapse(u, v) if bundle.orientation == "undirected" else (u, v)
        last_seen[key] = max(t, last_seen.get(key, t))
    t_max = int(stream.t.max())
    examples = sample_negatives(stream, None, policy, threads=threads)
    pairs = sorted(last_seen)
    qu = np.array([p[0] for p in pairs], dtype=np.int64)
    qv = np.array([p[1] for p in pairs], dtype=np.int64)
    qt = np.full(len(pairs), t_max + 1, dtype=np.int64)
    stage = Stage("test", stream, t_max, (qu, qv, qt), None, examples)
    return PropertyPlan("recency", [stage], {"last_seen": last_seen})


def _plan_homophily(bundle, policy, opts, threads) -> PropertyPlan:
    stream = bundle.stream
    if stream.node_groups is None:
        raise InputError("homophily requires node groups")
    t_max = int(stream.t.max())
    examples = sample_negatives(stream, None, policy, threads=threads)
    queries = _universe_queries(stream.node_count, bundle.orientation, t_max + 1)
    universe = len(queries[0])
    ks = opts.get("ks", [1000, 10000, 100000])
    for k in ks:
        if k > universe:
            raise InputError(f"top-k list contains k={k} above universe {universe}")
    stage = Stage("test", stream, t_max, queries, None, examples)
    return PropertyPlan(
        "homophily", [stage], {"ks": list(ks), "node_groups": stream.node_groups}
    )


def _plan_preferential_attachment(bundle, policy, opts, threads) -> PropertyPlan:
    stream = bundle.stream
    t_max = int(stream.t.max())
    degrees = np.bincount(
        np.concatenate([stream.u, stream.v]), minlength=stream.node_count
    )
    n = stream.node_count
    lo = np.minimum(stream.u, stream.v)
    hi = np.maximum(stream.u, stream.v)
    positive_idx = np.unique(lo * n - lo * (lo + 1) // 2 + hi - lo - 1)
    all_u, all_v = _universe_arrays(n, "undirected")
    all_idx = all_u * n - all_u * (all_u + 1) // 2 + all_v - all_u - 1
    keep = ~np.isin(all_idx, positive_idx)
    qu, qv = all_u[keep], all_v[keep]
    qt = np.full(len(qu), t_max + 1, dtype=np.int64)
    examples = sample_negatives(stream, None, policy, threads=threads)
    stage = Stage("test", stream, t_max, (qu, qv, qt), None, examples)
    return PropertyPlan(
        "preferential_attachment",
        [stage],
        {
            "degrees": degrees,
            "bin_width_log2": opts.get("bin_width_log2", 1.0),
            "min_edges_per_bin": opts.get("min_edges_per_bin", 30),
        },
    )


def _plan_direction(bundle, policy, opts, threads, augment: bool) -> PropertyPlan:
    stream = bundle.stream
    split = chronological_split(
        stream, opts.get("train_frac", 0.7), opts.get("val_frac", 0.15)
    )
    examples = sample_negatives(stream, split, policy, threads=threads)
    train_examples = examples.sliced(split, "train")
    train_stream = stream
    if augment:
        train_stream = _augment_train_stream(stream, split.train_end)
        train_examples = _enforce_ratio(augment_reverse(train_examples), policy.ratio)
    positives = sorted(
        set(
            (int(u), int(v), int(t))
            for u, v, t in zip(stream.u, stream.v, stream.t)
            if t > split.val_end
        )
    )
    if not positives:
        raise InputError("direction experiment needs test positives")
    others = [n for n in examples.negatives if n[2] > split.val_end]
    wanted: dict[tuple[int, int, int], None] = {}
    for (u, v, t) in positives:
        wanted.setdefault((u, v, t), None)
        wanted.setdefault((v, u, t), None)
    for triple in others:
        wanted.setdefault(triple, None)
    queries = triples_to_arrays(list(wanted))
    stage = Stage("test", train_stream, split.train_end, queries, split, train_examples)
    return PropertyPlan("direction", [stage], {"positives": positives})


def _plan_density(bundle, policy, opts, threads) -> PropertyPlan:
    stream = bundle.stream
    split = chronological_split(
        stream, opts.get("train_frac", 0.7), opts.get("val_frac", 0.15)
    )
    t_star = _test_timesteps(stream, split)[0]
    queries = _universe_queries(stream.node_count, bundle.orientation, t_star)
    ratios = [2**i for i in range(opts.get("doublings", 0) + 1)]
    stages = []
    for ratio in ratios:
        stage_policy = NegativePolicy(
            ratio=float(ratio),
            exclusion=policy.exclusion,
            orientation=policy.orientation,
            seed=policy.seed,
        )
        examples = sample_negatives(stream, split, stage_policy, threads=threads)
        stages.append(
            Stage(
                f"ratio_{ratio}", stream, split.train_end, queries, split,
                examples.sliced(split, "train"),
            )
        )
    true_pairs = _positive_pairs_at(stream, t_star, bundle.orientation)
    universe = len(queries[0])
    return PropertyPlan(
        "density",
        stages,
        {
            "timestep": t_star,
            "ratios": ratios,
            "true_density": len(true_pairs) / universe,
            "threshold": opts.get("threshold", 0.5),
            "directed": bundle.orientation == "directed",
            "node_count": stream.node_count,
        },
    )


def _granularity_time_maps(variants, bin_seconds: int):
    """Per-variant mapping from discrete bin to query timestamp."""
    cont = variants["continuous"].stream
    bins = (cont.t - cont.t.min()) // bin_seconds + 1
    rep: dict[int, int] = {}
    for b, t in zip(bins.tolist(), cont.t.tolist()):
        rep[b] = max(t, rep.get(b, t))

    def map_continuous(t: int) -> int:
        return rep[t]

    return {
        "continuous": map_continuous,
        "discrete": lambda t: t,
        "flattened": lambda t, split=variants["discrete"].split: (
            1 if t <= split.train_end else (2 if t <= split.val_end else 3)
        ),
    }


def _map_examples(examples: LabeledExampleSet, time_map) -> LabeledExampleSet:
    positives = tuple((u, v, time_map(t)) for u, v, t in examples.positives)
    # Coarser timescales (flattening above all) can land a pair's negative
    # on a timestamp where the same pair is positive; positives win.
    positive_set = set(positives)
    negatives: dict[tuple[int, int, int], None] = {}
    for u, v, t in examples.negatives:
        mapped = (u, v, time_map(t))
        if mapped not in positive_set:
            negatives.setdefault(mapped, None)
    return LabeledExampleSet(
        positives=positives,
        negatives=tuple(negatives),
        node_count=examples.node_count,
        policy=examples.policy,
        exclusions=None,
    )


def _plan_granularity(bundle, policy, opts, threads) -> PropertyPlan:
    bin_seconds = opts.get("bin_seconds", 3600)
    variants = granularity_variants(
        bundle.stream,
        bin_seconds,
        opts.get("train_frac", 0.7),
        opts.get("val_frac", 0.15),
    )
    discrete = variants["discrete"]
    examples = sample_negatives(discrete.stream, discrete.split, policy,
                                threads=threads)
    time_maps = _granularity_time_maps(variants, bin_seconds)
    stages = []
    labels_by_stage: dict[str, dict] = {}
    for name in ("continuous", "discrete", "flattened"):
        variant = variants[name]
        time_map = time_maps[name]
        train = _map_examples(examples.sliced(discrete.split, "train"), time_map)
        test = _map_examples(examples.sliced(discrete.split, "test"), time_map)
        merged: dict[tuple[int, int, int], int] = {}
        for triple in test.positives:
            merged[triple] = 1
        for triple in test.negatives:
            merged.setdefault(triple, 0)
        labels_by_stage[name] = merged
        queries = triples_to_arrays(list(merged))
        stages.append(
            Stage(
                name,
                variant.stream,
                variant.split.train_end,
                queries,
                variant.split,
                train,
            )
        )
    return PropertyPlan("granularity", stages, {"labels_by_stage": labels_by_stage})


def prepare_plan(
    property: str,
    bundle: DatasetBundle,
    policy: NegativePolicy,
    opts: dict | None = None,
    threads: int = 1,
    augment_reverse_training: bool = False,
) -> PropertyPlan:
    """Build the stages and evaluation context for one property run."""
    check_choice(
        property,
        (
            "granularity", "direction", "density", "persistence",
            "periodicity", "recency", "homophily", "preferential_attachment",
        ),
        "property",
    )
    opts = opts or {}
    if property == "persistence":
        return _plan_persistence(bundle, policy, opts, threads)
    if property == "periodicity":
        return _plan_periodicity(bundle, policy, opts, threads)
    if property == "recency":
        return _plan_recency(bundle, policy, opts, threads)
    if property == "homophily":
        return _plan_homophily(bundle, policy, opts, threads)
    if property == "preferential_attachment":
        return _plan_preferential_attachment(bundle, policy, opts, threads)
    if property == "direction":
        return _plan_direction(bundle, policy, opts, threads, augment_reverse_training)
    if property == "density":
        return _plan_density(bundle, policy, opts, threads)
    return _plan_granularity(bundle, policy, opts, threads)


# ---------------------------------------------------------------------------
# evaluation


def _scores_and_labels(predictions: PredictionSet, labels: dict):
    y = []
    s = []
    for u, v, t, score in predictions.records():
        try:
            y.append(labels[(u, v, t)])
        except KeyError:
            raise DiagnosticsError(f"no label for prediction ({u},{v},{t})") from None
        s.append(score)
    return np.array(y), np.array(s)


def _evaluate_persistence(plan, predictions) -> MetricReport:
    preds = predictions["test"]
    y, s = _scores_and_labels(preds, plan.context["labels"])
    threshold = plan.context["threshold"]
    report = MetricReport(property="persistence", model_id=preds.model_id)
    report.statistics["balanced_accuracy"] = balanced_accuracy_from_scores(
        y, s, threshold
    )
    report.statistics["roc_auc"] = roc_auc_from_scores(y, s)
    report.statistics["mean_positive"] = float(s[y == 1].mean())
    report.statistics["mean_negative"] = float(s[y == 0].mean())
    return report


def _evaluate_periodicity(plan, predictions) -> MetricReport:
    preds = predictions["test"]
    y, s = _scores_and_labels(preds, plan.context["labels"])
    report = group_mean_scores(preds, plan.context["pair_groups"], with_parity=True)
    report.property = "periodicity"
    report.statistics["balanced_accuracy"] = balanced_accuracy_from_scores(
        y, s, plan.context["threshold"]
    )
    stats = report.statistics
    for parity, wrong in (("even", "odd"), ("odd", "even")):
        active = stats.get(f"mean_{parity}_at_{parity}")
        inactive = stats.get(f"mean_{wrong}_at_{parity}")
        if active is None or inactive is None:
            raise DiagnosticsError(
                f"periodicity needs non-empty even/odd groups at {parity} timesteps"
            )
        stats[f"separation_{parity}"] = active - inactive
    return report


def _evaluate_recency(plan, predictions) -> MetricReport:
    return recency_profile(predictions["test"], plan.context["last_seen"])


def _evaluate_homophily(plan, predictions) -> MetricReport:
    preds = predictions["test"]
    merged = MetricReport(property="homophily", model_id=preds.model_id)
    for k in plan.context["ks"]:
        part = topk_composition(preds, plan.context["node_groups"], k)
        stats = part.statistics
        merged.statistics[f"inter_frac@{k}"] = stats["frac_0_1"]
        merged.statistics[f"intra_imbalance@{k}"] = abs(
            stats["frac_0_0"] - stats["frac_1_1"]
        )
        for key, value in stats.items():
            if key != "k":
                merged.statistics[f"{key}@{k}"] = value
        merged.series[f"composition@{k}"] = part.series["composition"]
    return merged


def _evaluate_pa(plan, predictions) -> MetricReport:
    return degree_binned_scores(
        predictions["test"],
        plan.context["degrees"],
        plan.context["bin_width_log2"],
        plan.context["min_edges_per_bin"],
    )


def _evaluate_direction(plan, predictions) -> MetricReport:
    return direction_symmetry(predictions["test"], plan.context["positives"])


def _evaluate_density(plan, predictions) -> MetricReport:
    ctx = plan.context
    series = {}
    model_id = None
    for ratio in ctx["ratios"]:
        preds = predictions[f"ratio_{ratio}"]
        model_id = preds.model_id
        series[ratio] = predicted_density(
            preds, ctx["node_count"], ctx["timestep"], ctx["directed"],
            ctx["threshold"],
        )
    report = MetricReport(property="density", model_id=model_id)
    report.statistics["predicted_density"] = series[ctx["ratios"][0]]
    report.statistics["true_density"] = ctx["true_density"]
    report.series["density_by_ratio"] = series
    return report


def _evaluate_granularity(plan, predictions) -> MetricReport:
    labels_by_stage = plan.context["labels_by_stage"]
    stats = {}
    model_id = None
    names = {"continuous": "auc_continuous", "discrete": "auc_discrete",
             "flattened": "auc_flat"}
    for stage, stat in names.items():
        preds = predictions[stage]
        model_id = preds.model_id
        y, s = _scores_and_labels(preds, labels_by_stage[stage])
        stats[stat] = roc_auc_from_scores(y, s)
    return MetricReport(property="granularity", model_id=model_id, statistics=stats)


_EVALUATORS = {
    "persistence": _evaluate_persistence,
    "periodicity": _evaluate_periodicity,
    "recency": _evaluate_recency,
    "homophily": _evaluate_homophily,
    "preferential_attachment": _evaluate_pa,
    "direction": _evaluate_direction,
    "density": _evaluate_density,
    "granularity": _evaluate_granularity,
}


def evaluate_plan(
    plan: PropertyPlan, predictions: dict[str, PredictionSet]
) -> MetricReport:
    """One report from the per-stage prediction sets of a single model."""
    for stage in plan.stages:
        if stage.name not in predictions:
            raise InputError(f"missing predictions for stage {stage.name!r}")
    return _EVALUATORS[plan.property](plan, predictions)
