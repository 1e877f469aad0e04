"""Dataset variants for the granularity and direction experiments.

All transforms are pure functions of their inputs; thin sklearn-style
transformer wrappers are provided so they compose with estimator
pipelines and ``get_params`` tooling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .graphdata import EdgeStream, SplitSpec, chronological_split
from .sampling import LabeledExampleSet
from .validation import InputError, check_choice, check_positive_int, check_stream_kind

GRANULARITY_KINDS = ("continuous", "discrete", "flattened")


@dataclass(frozen=True)
class GranularityVariant:
    """One training/evaluation variant of a dataset.

    ``split`` carries the discrete-version boundaries that decide
    train/val/test membership for every variant, so no edge ever moves
    between segments; the flattened variant cannot exist without it.
    """

    kind: str
    stream: EdgeStream
    split: SplitSpec | None = None

    def __post_init__(self) -> None:
        check_choice(self.kind, GRANULARITY_KINDS, "kind")
        if self.kind == "flattened" and self.split is None:
            raise InputError("flattened variant requires an accompanying split")


def discretize(
    stream: EdgeStream, bin_seconds: int, granularity: str | None = None
) -> EdgeStream:
    """Bin continuous timestamps into 1-based fixed-width steps.

    ``t' = floor((t - t_min) / bin_seconds) + 1``; duplicate (u, v) pairs
    within one bin collapse to their first occurrence.  Bins are anchored
    at the stream's minimum timestamp so step 0 stays free as a sentinel.
    """
    check_stream_kind(stream, "continuous", "discretize")
    check_positive_int(bin_seconds, "bin_seconds")
    label = granularity if granularity is not None else f"{bin_seconds}s"
    if len(stream) == 0:
        return stream.replace(time_kind="discrete", granularity=label)
    bins = (stream.t - stream.t.min()) // bin_seconds + 1
    seen: set[tuple[int, int, int]] = set()
    keep = np.ones(len(bins), dtype=bool)
    for i, key in enumerate(zip(stream.u.tolist(), stream.v.tolist(), bins.tolist())):
        if key in seen:
            keep[i] = False
        else:
            seen.add(key)
    # Input is sorted by t, hence by bin too; stability keeps in-bin order.
    return EdgeStream(
        node_count=stream.node_count,
        u=stream.u[keep],
        v=stream.v[keep],
        t=bins[keep],
        time_kind="discrete",
        granularity=label,
        node_groups=stream.node_groups,
    )


def to_continuous(stream: EdgeStream, seconds_per_step: int = 3600) -> EdgeStream:
    """Reinterpret discrete steps as synthetic UNIX-second timestamps.

    Maps step ``t`` to ``t * seconds_per_step`` so that
    ``discretize(..., seconds_per_step)`` recovers the original steps
    exactly.  Used to build continuous granularity variants of synthetic
    datasets, which are generated in discrete time.
    """
    check_stream_kind(stream, "discrete", "to_continuous")
    check_positive_int(seconds_per_step, "seconds_per_step")
    return EdgeStream(
        node_count=stream.node_count,
        u=stream.u,
        v=stream.v,
        t=stream.t * seconds_per_step,
        time_kind="continuous",
        granularity=None,
        node_groups=stream.node_groups,
    )


def continuous_split_from_discrete(
    continuous: EdgeStream, bin_seconds: int, split: SplitSpec
) -> SplitSpec:
    """Translate discrete-split boundaries into continuous timestamps.

    An edge falls in bin ``b`` iff ``t <= t_min + b * bin_seconds - 1``,
    so membership of every edge is preserved exactly.
    """
    check_stream_kind(continuous, "continuous", "continuous_split_from_discrete")
    if len(continuous) == 0:
        raise InputError("cannot map split boundaries of an empty stream")
    t_min = int(continuous.t.min())
    return SplitSpec(
        train_end=t_min + split.train_end * bin_seconds - 1,
        val_end=t_min + split.val_end * bin_seconds - 1,
    )


def flatten_timestamps(stream: EdgeStream, split: SplitSpec) -> EdgeStream:
    """Collapse timestamps to 1 (train), 2 (val), 3 (test).

    Edge multiplicities and within-segment order are preserved.
    """
    check_stream_kind(stream, "discrete", "flatten_timestamps")
    flat = np.where(
        stream.t <= split.train_end, 1, np.where(stream.t <= split.val_end, 2, 3)
    ).astype(np.int64)
    return EdgeStream(
        node_count=stream.node_count,
        u=stream.u,
        v=stream.v,
        t=flat,
        time_kind="discrete",
        granularity="flat",
        node_groups=stream.node_groups,
    )


def _dedup_with_reverses(
    triples: tuple[tuple[int, int, int], ...],
) -> tuple[tuple[int, int, int], ...]:
    out: dict[tuple[int, int, int], None] = {}
    for u, v, t in triples:
        out.setdefault((u, v, t), None)
        out.setdefault((v, u, t), None)
    return tuple(out)


def augment_reverse(examples: LabeledExampleSet) -> LabeledExampleSet:
    """Add the reverse of every positive and negative example.

    Originals are retained and exact duplicates collapse, so each label
    group is closed under pair reversal.  A reversed negative may coincide
    with a positive (the reverse of a positive is an eligible negative);
    positives take precedence and such negatives are dropped.  The
    sampling context is discarded: redraws of an augmented set are not
    meaningful.
    """
    positives = _dedup_with_reverses(examples.positives)
    positive_set = set(positives)
    negatives = tuple(
        triple
        for triple in _dedup_with_reverses(examples.negatives)
        if triple not in positive_set
    )
    return LabeledExampleSet(
        positives=positives,
        negatives=negatives,
        node_count=examples.node_count,
        policy=examples.policy,
        exclusions=None,
    )


def granularity_variants(
    stream: EdgeStream,
    bin_seconds: int,
    train_frac: float = 0.7,
    val_frac: float = 0.15,
    granularity: str | None = None,
) -> dict[str, GranularityVariant]:
    """The continuous / discrete / flattened triple for one dataset.

    A continuous input is discretized with ``bin_seconds``; a discrete
    input gets a synthetic continuous twin via :func:`to_continuous`.
    Split boundaries always come from the discrete version.
    """
    if stream.time_kind == "continuous":
        continuous = stream
        discrete = discretize(stream, bin_seconds, granularity)
    else:
        discrete = stream
        continuous = to_continuous(stream, bin_seconds)
    split = chronological_split(discrete, train_frac, val_frac)
    cont_split = continuous_split_from_discrete(continuous, bin_seconds, split)
    return {
        "continuous": GranularityVariant("continuous", continuous, cont_split),
        "discrete": GranularityVariant("discrete", discrete, split),
        "flattened": GranularityVariant(
            "flattened", flatten_timestamps(discrete, split), split
        ),
    }


class Discretizer(BaseEstimator, TransformerMixin):
    """Transformer wrapper around :func:`discretize`."""

    def __init__(self, bin_seconds: int = 3600, granularity: str | None = None):
        self.bin_seconds = bin_seconds
        self.granularity = granularity

    def fit(self, stream: EdgeStream, y=None):
        return self

    def transform(self, stream: EdgeStream) -> EdgeStream:
        return discretize(stream, self.bin_seconds, self.granularity)


class TimestampFlattener(BaseEstimator, TransformerMixin):
    """Learns split boundaries at fit time, flattens timestamps at transform."""

    def __init__(self, train_frac: float = 0.7, val_frac: float = 0.15):
        self.train_frac = train_frac
        self.val_frac = val_frac

    def fit(self, stream: EdgeStream, y=None):
        self.split_ = chronological_split(stream, self.train_frac, self.val_frac)
        return self

    def transform(self, stream: EdgeStream) -> EdgeStream:
        return flatten_timestamps(stream, self.split_)


class ReverseAugmenter(BaseEstimator, TransformerMixin):
    """Transformer wrapper around :func:`augment_reverse`."""

    def fit(self, examples: LabeledExampleSet, y=None):
        return self

    def transform(self, examples: LabeledExampleSet) -> LabeledExampleSet:
        return augment_reverse(examples)
