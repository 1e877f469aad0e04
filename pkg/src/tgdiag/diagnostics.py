"""Per-property metric computation and learned/limited/not-learned verdicts.

Metric kernels are implemented from scratch (sort-and-rank ROC-AUC,
confusion-matrix balanced accuracy, midrank Spearman); the test suite
checks them against independent brute-force oracles.

Verdict boundaries are declared approximations, not ground truth; they
live in the versioned ``thresholds.json`` shipped with the package so
researchers can recalibrate without touching code.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .baselines import PredictionSet
from .validation import InputError

PROPERTIES = (
    "granularity",
    "direction",
    "density",
    "persistence",
    "periodicity",
    "recency",
    "homophily",
    "preferential_attachment",
)

VERDICT_LEVELS = ("learned", "limited", "not_learned")

SERIES_HEADER = "key,value"
VERDICT_HEADER = "property,model,level"


class DiagnosticsError(RuntimeError):
    """Metric-stage failure: missing statistic, degenerate input, bad labels."""


@dataclass
class MetricReport:
    """Named scalar statistics plus plot-ready series for one (property, model)."""

    property: str
    model_id: str
    statistics: dict[str, float] = field(default_factory=dict)
    series: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, value in self.statistics.items():
            if not math.isfinite(float(value)):
                raise DiagnosticsError(f"statistic {name!r} is not finite")


@dataclass(frozen=True)
class Verdict:
    level: str
    rationale: str

    def __post_init__(self) -> None:
        if self.level not in VERDICT_LEVELS:
            raise DiagnosticsError(f"unknown verdict level {self.level!r}")


def load_thresholds(path: str | None = None) -> dict:
    if path is None:
        text = resources.files("tgdiag").joinpath("thresholds.json").read_text()
    else:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    thresholds = json.loads(text)
    if "version" not in thresholds:
        raise InputError("thresholds file must carry a version field")
    return thresholds


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged."""
    order = np.argsort(values, kind="mergesort")
    _, inverse, counts = np.unique(values[order], return_inverse=True,
                                   return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts
    average = (starts + 1 + ends) / 2.0
    ranks = np.empty(len(values), dtype=np.float64)
    ranks[order] = average[inverse]
    return ranks


def roc_auc_from_scores(y_true, y_score) -> float:
    """Probability a random positive outscores a random negative, ties as 1/2.

    Computed by sort-and-rank in O(n log n); agrees exactly with brute-force
    pair counting.
    """
    y = np.asarray(y_true, dtype=np.int64)
    s = np.asarray(y_score, dtype=np.float64)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DiagnosticsError("roc_auc requires at least one example of each class")
    ranks = _midranks(s)
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _labels_to_array(
    predictions: PredictionSet, labels: Mapping[tuple[int, int, int], int]
) -> np.ndarray:
    y = np.empty(len(predictions), dtype=np.int64)
    for i, (u, v, t, _) in enumerate(predictions.records()):
        try:
            y[i] = labels[(u, v, t)]
        except KeyError:
            raise DiagnosticsError(f"no label for record ({u},{v},{t})") from None
    return y


def roc_auc(
    predictions: PredictionSet, labels: Mapping[tuple[int, int, int], int]
) -> float:
    return roc_auc_from_scores(_labels_to_array(predictions, labels), predictions.score)


def balanced_accuracy_from_scores(y_true, y_score, threshold: float = 0.5) -> float:
    """(TPR + TNR) / 2 with predicted-positive meaning ``score >= threshold``."""
    y = np.asarray(y_true, dtype=np.int64)
    s = np.asarray(y_score, dtype=np.float64)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DiagnosticsError(
            "balanced_accuracy requires at least one example of each class"
        )
    predicted = s >= threshold
    tpr = float(predicted[y == 1].sum()) / n_pos
    tnr = float((~predicted)[y == 0].sum()) / n_neg
    return (tpr + tnr) / 2.0


def balanced_accuracy(
    predictions: PredictionSet,
    labels: Mapping[tuple[int, int, int], int],
    threshold: float = 0.5,
) -> float:
    return balanced_accuracy_from_scores(
        _labels_to_array(predictions, labels), predictions.score, threshold
    )


def spearman(x, y) -> float:
    """Rank correlation with midranks; 0 when either side has no variance."""
    rx = _midranks(np.asarray(x, dtype=np.float64))
    ry = _midranks(np.asarray(y, dtype=np.float64))
    sx, sy = rx.std(), ry.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    rho = float(np.mean((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))
    return max(-1.0, min(1.0, rho))


def direction_symmetry(
    predictions: PredictionSet, positives: Sequence[tuple[int, int, int]]
) -> MetricReport:
    """Score gaps between positives and their reversed counterparts.

    Gaps are measured over one-directional positives (those whose reverse
    is not itself positive); remaining scored records count as "other"
    negatives.  The series is the empirical CDF of the absolute gaps.
    """
    scores = predictions.as_dict()
    pos_set = set(map(tuple, positives))
    one_dir = [p for p in pos_set if (p[1], p[0], p[2]) not in pos_set]
    if not one_dir:
        raise DiagnosticsError("direction symmetry needs one-directional positives")
    gaps = []
    pos_scores = []
    rev_scores = []
    for u, v, t in sorted(one_dir):
        try:
            s_fwd = scores[(u, v, t)]
            s_rev = scores[(v, u, t)]
        except KeyError as exc:
            raise DiagnosticsError(f"missing score for {exc.args[0]}") from None
        gaps.append(abs(s_fwd - s_rev))
        pos_scores.append(s_fwd)
        rev_scores.append(s_rev)
    gaps_arr = np.array(gaps)
    both_dir = pos_set - set(one_dir)
    reverse_set = {(v, u, t) for u, v, t in one_dir}
    stats = {
        "median_gap": float(np.median(gaps_arr)),
        "frac_gap_lt_0.02": float((gaps_arr < 0.02).mean()),
        "mean_positive": float(np.mean(pos_scores)),
        "mean_reverse": float(np.mean(rev_scores)),
    }
    if both_dir:
        both_scores = [scores[p] for p in both_dir if p in scores]
        if both_scores:
            stats["mean_both_directions"] = float(np.mean(both_scores))
    other = [
        s
        for (u, v, t, s) in predictions.records()
        if (u, v, t) not in pos_set and (u, v, t) not in reverse_set
    ]
    if other:
        stats["mean_other"] = float(np.mean(other))
    unique_gaps = np.unique(gaps_arr)
    cdf = {
        float(g): float((gaps_arr <= g).mean()) for g in unique_gaps
    }
    return MetricReport(
        property="direction",
        model_id=predictions.model_id,
        statistics=stats,
        series={"gap_cdf": cdf},
    )


def predicted_density(
    predictions: PredictionSet,
    node_count: int,
    timestep: int,
    directed: bool = True,
    threshold: float = 0.5,
) -> float:
    """Fraction of the full candidate universe scored at or above threshold."""
    mask = predictions.t == timestep
    u = predictions.u[mask]
    v = predictions.v[mask]
    universe = node_count * (node_count - 1)
    if not directed:
        universe //= 2
        if np.any(u >= v):
            raise InputError("record outside the undirected (u < v) universe")
    if len(u) and (u.max() >= node_count or v.max() >= node_count):
        raise InputError("record outside the node universe")
    if len(u) != universe:
        raise InputError(
            f"incomplete universe coverage at t={timestep}: "
            f"{universe - len(u)} records missing"
        )
    return float((predictions.score[mask] >= threshold).sum()) / universe


def group_mean_scores(
    predictions: PredictionSet,
    pair_groups: Mapping[tuple[int, int], str],
    with_parity: bool = False,
) -> MetricReport:
    """Mean and standard deviation of scores per pair group.

    With ``with_parity`` the means are additionally broken down by the
    parity of the record's timestep, as needed for periodicity analysis.
    """
    by_group: dict[str, list[float]] = {}
    by_parity: dict[tuple[str, str], list[float]] = {}
    for u, v, t, s in predictions.records():
        try:
            g = pair_groups[(u, v)]
        except KeyError:
            raise DiagnosticsError(f"unlabeled pair ({u},{v})") from None
        by_group.setdefault(g, []).append(s)
        if with_parity:
            parity = "even" if t % 2 == 0 else "odd"
            by_parity.setdefault((g, parity), []).append(s)
    if not by_group:
        raise DiagnosticsError("no predictions to aggregate")
    stats: dict[str, float] = {}
    means: dict[str, float] = {}
    total = 0.0
    count = 0
    for g in sorted(by_group):
        values = np.array(by_group[g])
        stats[f"mean_{g}"] = float(values.mean())
        stats[f"std_{g}"] = float(values.std())
        stats[f"count_{g}"] = float(len(values))
        means[g] = float(values.mean())
        total += float(values.sum())
        count += len(values)
    stats["mean_overall"] = total / count
    for (g, parity) in sorted(by_parity):
        stats[f"mean_{g}_at_{parity}"] = float(np.mean(by_parity[(g, parity)]))
    return MetricReport(
        property="periodicity" if with_parity else "persistence",
        model_id=predictions.model_id,
        statistics=stats,
        series={"group_means": means},
    )


def recency_profile(
    predictions: PredictionSet, last_seen: Mapping[tuple[int, int], int]
) -> MetricReport:
    """Mean score per last-seen timestep, with rank correlation and spread."""
    buckets: dict[int, list[float]] = {}
    for u, v, _, s in predictions.records():
        try:
            step = last_seen[(u, v)]
        except KeyError:
            raise DiagnosticsError(f"no last-seen timestep for pair ({u},{v})") from None
        buckets.setdefault(step, []).append(s)
    expected = sorted(set(last_seen.values()))
    for step in expected:
        if step not in buckets:
            raise DiagnosticsError(f"empty last-seen bucket at timestep {step}")
    steps = sorted(buckets)
    means = [float(np.mean(buckets[s])) for s in steps]
    return MetricReport(
        property="recency",
        model_id=predictions.model_id,
        statistics={
            "spearman": spearman(steps, means),
            "spread": max(means) - min(means),
            "n_buckets": float(len(steps)),
        },
        series={"mean_score_by_last_seen": dict(zip(steps, means))},
    )


def topk_composition(
    predictions: PredictionSet, node_groups: Mapping[int, int], k: int
) -> MetricReport:
    """Group-pair composition of the k most likely links.

    Ties break by (score descending, u ascending, v ascending).  Fractions
    over the three group pairs sum to one.
    """
    if k < 1:
        raise InputError("k must be at least 1")
    if k > len(predictions):
        raise InputError(f"k={k} exceeds the {len(predictions)} predictions")
    order = np.lexsort((predictions.v, predictions.u, -predictions.score))[:k]
    counts: dict[str, int] = {}
    for u, v in zip(predictions.u[order].tolist(), predictions.v[order].tolist()):
        a, b = sorted((node_groups[u], node_groups[v]))
        key = f"{a}-{b}"
        counts[key] = counts.get(key, 0) + 1
    fractions = {key: counts.get(key, 0) / k for key in ("0-0", "0-1", "1-1")}
    for key in sorted(counts):
        if key not in fractions:
            fractions[key] = counts[key] / k
    stats = {f"frac_{key.replace('-', '_')}": value for key, value in fractions.items()}
    stats["k"] = float(k)
    return MetricReport(
        property="homophily",
        model_id=predictions.model_id,
        statistics=stats,
        series={"composition": fractions},
    )


def degree_binned_scores(
    predictions: PredictionSet,
    degrees,
    bin_width_log2: float = 1.0,
    min_edges_per_bin: int = 30,
) -> MetricReport:
    """Mean score per logarithmic-degree bin of the adjacent nodes.

    Every edge contributes its score to both endpoints' bins; zero-degree
    nodes fall into a dedicated bin with lower bound 0.  The headline
    statistic is the Spearman correlation between bin order and bin mean
    over bins holding at least ``min_edges_per_bin`` edge contributions.
    """
    if bin_width_log2 <= 0:
        raise InputError("bin_width_log2 must be positive")
    deg = np.asarray(degrees, dtype=np.int64)
    if len(deg) and deg.min() < 0:
        raise InputError("degrees must be non-negative")
    by_bin: dict[int, list[float]] = {}
    for u, v, _, s in predictions.records():
        for node in (u, v):
            d = int(deg[node])
            index = -1 if d == 0 else int(math.floor(math.log2(d) / bin_width_log2))
            by_bin.setdefault(index, []).append(s)
    indices = sorted(by_bin)
    lower_bound = lambda i: 0.0 if i == -1 else float(2.0 ** (i * bin_width_log2))
    means = {lower_bound(i): float(np.mean(by_bin[i])) for i in indices}
    counts = {lower_bound(i): float(len(by_bin[i])) for i in indices}
    qualifying = [i for i in indices if len(by_bin[i]) >= min_edges_per_bin]
    if len(qualifying) >= 2:
        rho = spearman(qualifying, [float(np.mean(by_bin[i])) for i in qualifying])
    else:
        rho = 0.0
    return MetricReport(
        property="preferential_attachment",
        model_id=predictions.model_id,
        statistics={
            "spearman": rho,
            "n_bins": float(len(indices)),
            "n_qualifying_bins": float(len(qualifying)),
        },
        series={
            "mean_score_by_degree_bin": means,
            "edge_count_by_degree_bin": counts,
        },
    )


def _require(stats: Mapping[str, float], prop: str, *names: str) -> list[float]:
    out = []
    for name in names:
        if name not in stats:
            raise DiagnosticsError(f"missing statistic {name!r} for {prop} verdict")
        out.append(float(stats[name]))
    return out


def _verdict_direction(stats, th) -> Verdict:
    gap, pos, rev = _require(stats, "direction", "median_gap", "mean_positive",
                             "mean_reverse")
    if gap >= th["learned_median_gap"] and rev <= pos - th["learned_reverse_margin"]:
        return Verdict(
            "learned",
            f"median_gap={gap:.3f}>={th['learned_median_gap']} and "
            f"mean_reverse={rev:.3f}<=mean_positive-{th['learned_reverse_margin']}",
        )
    if gap >= th["limited_median_gap"]:
        return Verdict("limited", f"median_gap={gap:.3f}>={th['limited_median_gap']}")
    return Verdict("not_learned", f"median_gap={gap:.3f}<{th['limited_median_gap']}")


def _verdict_density(stats, th) -> Verdict:
    pred, true = _require(stats, "density", "predicted_density", "true_density")
    if pred == 0.0 and true == 0.0:
        factor = 1.0
    elif pred == 0.0 or true == 0.0:
        factor = math.inf
    else:
        factor = max(pred / true, true / pred)
    if factor <= th["learned_factor"]:
        return Verdict("learned", f"density factor {factor:.2f}<={th['learned_factor']}")
    if factor <= th["limited_factor"]:
        return Verdict("limited", f"density factor {factor:.2f}<={th['limited_factor']}")
    return Verdict("not_learned", f"density factor {factor:.2f}>{th['limited_factor']}")


def _verdict_persistence(stats, th) -> Verdict:
    bal, pos, neg = _require(stats, "persistence", "balanced_accuracy",
                             "mean_positive", "mean_negative")
    if bal >= th["learned_balanced_accuracy"] and pos - neg >= th["learned_mean_gap"]:
        return Verdict(
            "learned",
            f"balanced_accuracy={bal:.3f} and mean gap {pos - neg:.3f}"
            f">={th['learned_mean_gap']}",
        )
    if bal >= th["limited_balanced_accuracy"]:
        return Verdict(
            "limited", f"balanced_accuracy={bal:.3f}>={th['limited_balanced_accuracy']}"
        )
    return Verdict(
        "not_learned",
        f"balanced_accuracy={bal:.3f}<{th['limited_balanced_accuracy']}",
    )


def _verdict_periodicity(stats, th) -> Verdict:
    bal, sep_even, sep_odd = _require(
        stats, "periodicity", "balanced_accuracy", "separation_even", "separation_odd"
    )
    sep = th["separation"]
    if sep_even >= sep and sep_odd >= sep and bal >= th["learned_balanced_accuracy"]:
        return Verdict(
            "learned",
            f"separations ({sep_even:.3f}, {sep_odd:.3f})>= {sep} at both parities "
            f"and balanced_accuracy={bal:.3f}",
        )
    if sep_even >= sep or sep_odd >= sep or bal >= th["limited_balanced_accuracy"]:
        return Verdict(
            "limited",
            f"separation >= {sep} at one parity or balanced_accuracy={bal:.3f}"
            f">={th['limited_balanced_accuracy']}",
        )
    return Verdict(
        "not_learned",
        f"separations ({sep_even:.3f}, {sep_odd:.3f}) below {sep} and "
        f"balanced_accuracy={bal:.3f}",
    )


def _verdict_recency(stats, th) -> Verdict:
    rho, spread = _require(stats, "recency", "spearman", "spread")
    if rho >= th["learned_spearman"] and spread >= th["learned_spread"]:
        return Verdict("learned", f"spearman={rho:.3f} and spread={spread:.3f}")
    if rho >= th["limited_spearman"]:
        return Verdict("limited", f"spearman={rho:.3f}>={th['limited_spearman']}")
    return Verdict("not_learned", f"spearman={rho:.3f}<{th['limited_spearman']}")


def _verdict_homophily(stats, th) -> Verdict:
    inter = {k: v for k, v in stats.items() if k.startswith("inter_frac@")}
    imbalance = {k: v for k, v in stats.items() if k.startswith("intra_imbalance@")}
    if not inter or not imbalance:
        raise DiagnosticsError(
            "missing statistic 'inter_frac@<k>'/'intra_imbalance@<k>' "
            "for homophily verdict"
        )
    inter_ok = all(v <= th["max_inter_fraction"] for v in inter.values())
    balanced = all(v <= th["max_intra_imbalance"] for v in imbalance.values())
    if inter_ok and balanced:
        return Verdict(
            "learned",
            f"inter fraction <= {th['max_inter_fraction']} and intra imbalance "
            f"<= {th['max_intra_imbalance']} at all k",
        )
    if inter_ok:
        return Verdict(
            "limited", f"inter fraction <= {th['max_inter_fraction']} at all k "
            "but intra groups imbalanced",
        )
    return Verdict(
        "not_learned", f"inter fraction above {th['max_inter_fraction']}"
    )


def _verdict_pa(stats, th) -> Verdict:
    (rho,) = _require(stats, "preferential_attachment", "spearman")
    if rho >= th["learned_spearman"]:
        return Verdict("learned", f"bin-mean spearman={rho:.3f}>={th['learned_spearman']}")
    if rho >= th["limited_spearman"]:
        return Verdict("limited", f"bin-mean spearman={rho:.3f}>={th['limited_spearman']}")
    return Verdict("not_learned", f"bin-mean spearman={rho:.3f}<{th['limited_spearman']}")


def _verdict_granularity(stats, th) -> Verdict:
    cont, disc, flat = _require(
        stats, "granularity", "auc_continuous", "auc_discrete", "auc_flat"
    )
    margin = th["margin_over_flat"]
    if cont >= flat + margin and cont >= disc:
        return Verdict(
            "learned",
            f"auc_continuous={cont:.3f}>=auc_flat+{margin} and >=auc_discrete",
        )
    if disc >= flat + margin:
        return Verdict("limited", f"auc_discrete={disc:.3f}>=auc_flat+{margin}")
    return Verdict(
        "not_learned", f"neither continuous nor discrete beats flat by {margin}"
    )


_VERDICT_RULES = {
    "direction": _verdict_direction,
    "density": _verdict_density,
    "persistence": _verdict_persistence,
    "periodicity": _verdict_periodicity,
    "recency": _verdict_recency,
    "homophily": _verdict_homophily,
    "preferential_attachment": _verdict_pa,
    "granularity": _verdict_granularity,
}


def assign_verdict(
    property: str, report: MetricReport, thresholds: dict | None = None
) -> Verdict:
    """Apply the documented per-property decision rule; pure and deterministic."""
    if property not in _VERDICT_RULES:
        raise InputError(f"unknown property {property!r}; expected one of {PROPERTIES}")
    th = (thresholds or load_thresholds())[property]
    return _VERDICT_RULES[property](report.statistics, th)


def _format_key(key) -> str:
    if isinstance(key, str):
        return key
    value = float(key)
    if value.is_integer():
        return str(int(value))
    return repr(value)


def report_to_json(report: MetricReport) -> bytes:
    payload = {
        "property": report.property,
        "model_id": report.model_id,
        "statistics": {k: report.statistics[k] for k in sorted(report.statistics)},
        "series": {
            name: {
                _format_key(k): series[k]
                for k in sorted(series, key=lambda x: (isinstance(x, str), x))
            }
            for name, series in sorted(report.series.items())
        },
    }
    return (json.dumps(payload, indent=2, sort_keys=False) + "\n").encode("ascii")


def write_series_csv(series: Mapping) -> bytes:
    rows = [SERIES_HEADER]
    for key in sorted(series, key=lambda x: (isinstance(x, str), x)):
        rows.append(f"{_format_key(key)},{float(series[key]):.6f}")
    rows.append("")
    return "\n".join(rows).encode("ascii")


def write_verdicts(rows: Sequence[tuple[str, str, str]]) -> bytes:
    out = [VERDICT_HEADER]
    out.extend(f"{prop},{model},{level}" for prop, model, level in rows)
    out.append("")
    return "\n".join(out).encode("ascii")


def parse_verdicts(text: bytes | str) -> list[tuple[str, str, str]]:
    if isinstance(text, bytes):
        text = text.decode("ascii")
    lines = [line for line in text.split("\n") if line]
    if not lines or lines[0] != VERDICT_HEADER:
        raise InputError(f"expected header {VERDICT_HEADER!r}")
    rows = []
    for line in lines[1:]:
        fields = line.split(",")
        if len(fields) != 3 or fields[2] not in VERDICT_LEVELS:
            raise InputError(f"malformed verdict row: {line!r}")
        rows.append((fields[0], fields[1], fields[2]))
    return rows
