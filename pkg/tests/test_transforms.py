import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tgdiag.graphdata import SplitSpec, chronological_split
from tgdiag.sampling import LabeledExampleSet
from tgdiag.transforms import (
    Discretizer,
    GranularityVariant,
    ReverseAugmenter,
    TimestampFlattener,
    augment_reverse,
    continuous_split_from_discrete,
    discretize,
    flatten_timestamps,
    granularity_variants,
    to_continuous,
)
from tgdiag.validation import InputError

from conftest import make_stream


# --- discretize ----------------------------------------------------------------

def test_discretize_dedups_within_bin():
    stream = make_stream(
        2, [(0, 1, 100), (0, 1, 150), (0, 1, 4000)], time_kind="continuous"
    )
    out = discretize(stream, 3600)
    assert out.edges == ((0, 1, 1), (0, 1, 2))
    assert out.time_kind == "discrete"


def test_discretize_requires_continuous():
    with pytest.raises(InputError, match="continuous"):
        discretize(make_stream(2, [(0, 1, 1)]), 10)


def test_discretize_rejects_zero_bin():
    stream = make_stream(2, [(0, 1, 1)], time_kind="continuous")
    with pytest.raises(InputError, match="bin_seconds"):
        discretize(stream, 0)


def test_discretize_idempotent_on_binned_data():
    stream = make_stream(
        3, [(0, 1, 7), (1, 2, 7), (0, 1, 3707), (1, 2, 9999)],
        time_kind="continuous",
    )
    once = discretize(stream, 3600)
    again = discretize(once.replace(time_kind="continuous"), 1)
    assert again.edges == once.edges


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_discretize_preserves_distinct_pairs(data):
    node_count = data.draw(st.integers(2, 6))
    n = data.draw(st.integers(1, 30))
    edges = []
    for _ in range(n):
        u = data.draw(st.integers(0, node_count - 1))
        v = data.draw(st.integers(0, node_count - 2))
        v = v + (v >= u)
        edges.append((u, v, data.draw(st.integers(0, 5000))))
    stream = make_stream(node_count, edges, time_kind="continuous")
    bin_seconds = data.draw(st.sampled_from([1, 7, 60, 3600]))
    out = discretize(stream, bin_seconds)
    assert set(zip(out.u.tolist(), out.v.tolist())) == set(
        zip(stream.u.tolist(), stream.v.tolist())
    )


def test_snapshot_sizes_sum_to_discrete_edge_count():
    # per-bin dedup means summing snapshot sizes over all timesteps
    # recovers the discrete edge count exactly
    from tgdiag.graphdata import snapshot_at

    rng = __import__("numpy").random.default_rng(12)
    edges = []
    for _ in range(300):
        u = int(rng.integers(12))
        v = int(rng.integers(11))
        v = v + (v >= u)
        edges.append((u, v, int(rng.integers(0, 40_000))))
    stream = make_stream(12, edges, time_kind="continuous")
    disc = discretize(stream, 3600)
    total = sum(
        len(snapshot_at(disc, int(t)).pairs) for t in disc.distinct_timesteps()
    )
    assert total == len(disc)


def test_discretize_collapses_enron_shaped_counts():
    # 3 pairs, each hitting bins with known duplicate structure:
    # bin 1 sees (0,1) x3 and (1,2) x1; bin 2 sees (0,1) x2, (2,0) x2.
    edges = [
        (0, 1, 0), (0, 1, 10), (0, 1, 59), (1, 2, 30),
        (0, 1, 60), (0, 1, 100), (2, 0, 70), (2, 0, 119),
    ]
    stream = make_stream(3, edges, time_kind="continuous")
    out = discretize(stream, 60)
    assert len(out) == 4  # hand count: 2 distinct in bin 1 + 2 in bin 2
    assert sorted(zip(out.u.tolist(), out.v.tolist(), out.t.tolist())) == [
        (0, 1, 1), (0, 1, 2), (1, 2, 1), (2, 0, 2),
    ]


# --- flatten -------------------------------------------------------------------

def test_flatten_maps_segments():
    stream = make_stream(3, [(0, 1, t) for t in range(1, 11)])
    split = chronological_split(stream, 0.7, 0.15)
    flat = flatten_timestamps(stream, split)
    assert flat.t.tolist() == [1] * 7 + [2] + [3, 3]
    assert len(flat) == len(stream)


def test_flatten_boundary_timestep_goes_to_val():
    stream = make_stream(3, [(0, 1, 1), (1, 2, 5), (0, 2, 9)])
    flat = flatten_timestamps(stream, SplitSpec(train_end=1, val_end=5))
    assert flat.t.tolist() == [1, 2, 3]


def test_flatten_empty_stream():
    flat = flatten_timestamps(make_stream(2, []), SplitSpec(1, 2))
    assert len(flat) == 0


def test_flatten_preserves_multiplicity_and_order():
    stream = make_stream(3, [(0, 1, 1), (0, 1, 2), (1, 0, 2), (0, 1, 3)])
    flat = flatten_timestamps(stream, SplitSpec(train_end=2, val_end=3))
    assert flat.edges == ((0, 1, 1), (0, 1, 1), (1, 0, 1), (0, 1, 2))


# --- reverse augmentation --------------------------------------------------------

def _examples(pos, neg=(), node_count=5):
    return LabeledExampleSet(tuple(pos), tuple(neg), node_count)


def test_augment_adds_reverse():
    out = augment_reverse(_examples([(0, 1, 4)]))
    assert set(out.positives) == {(0, 1, 4), (1, 0, 4)}


def test_augment_dedups_bidirectional():
    out = augment_reverse(_examples([(0, 1, 4), (1, 0, 4)]))
    assert sorted(out.positives) == [(0, 1, 4), (1, 0, 4)]


def test_augment_count_formula():
    # |output| = 2*|input| - (# records whose reverse is already present)
    pos = [(0, 1, 1), (1, 0, 1), (2, 3, 1), (0, 1, 2)]
    bidirectional = sum(
        1 for (u, v, t) in pos if (v, u, t) in set(pos)
    )
    out = augment_reverse(_examples(pos))
    assert len(out.positives) == 2 * len(pos) - bidirectional


def test_augment_closed_under_reversal():
    pos = [(0, 1, 1), (2, 3, 2)]
    neg = [(1, 2, 1), (3, 0, 2)]
    out = augment_reverse(_examples(pos, neg))
    for group in (out.positives, out.negatives):
        assert {(v, u, t) for u, v, t in group} == set(group)


def test_augment_drops_negative_colliding_with_positive():
    # the reverse of a positive is an eligible negative before augmentation;
    # afterwards the positive label wins
    out = augment_reverse(_examples([(0, 1, 1)], [(1, 0, 1), (2, 3, 1)]))
    assert set(out.positives) == {(0, 1, 1), (1, 0, 1)}
    assert set(out.negatives) == {(2, 3, 1), (3, 2, 1)}


# --- continuous twin -------------------------------------------------------------

def test_to_continuous_inverts_discretize():
    stream = make_stream(3, [(0, 1, 1), (1, 2, 3), (0, 2, 3)])
    cont = to_continuous(stream, 3600)
    assert cont.time_kind == "continuous"
    back = discretize(cont, 3600)
    assert back.edges == stream.edges


def test_continuous_split_preserves_membership():
    stream = make_stream(3, [(0, 1, t) for t in (100, 5000, 9000, 13000)],
                         time_kind="continuous")
    disc = discretize(stream, 3600)
    split = SplitSpec(train_end=2, val_end=3)
    cont_split = continuous_split_from_discrete(stream, 3600, split)
    bins = [(int(t) - 100) // 3600 + 1 for t in stream.t]
    for t, b in zip(stream.t.tolist(), bins):
        assert cont_split.segment_of(t) == split.segment_of(b)


# --- variants --------------------------------------------------------------------

def test_granularity_variants_from_discrete():
    stream = make_stream(3, [(0, 1, t) for t in range(1, 11)])
    variants = granularity_variants(stream, 3600)
    assert set(variants) == {"continuous", "discrete", "flattened"}
    assert variants["discrete"].stream == stream.replace()
    assert variants["continuous"].stream.time_kind == "continuous"
    assert sorted(set(variants["flattened"].stream.t.tolist())) == [1, 2, 3]
    assert variants["flattened"].split is not None


def test_granularity_variant_requires_split_when_flattened():
    stream = make_stream(3, [(0, 1, 1)])
    with pytest.raises(InputError, match="split"):
        GranularityVariant("flattened", stream, None)


# --- estimator wrappers ------------------------------------------------------------

def test_discretizer_transformer():
    stream = make_stream(2, [(0, 1, 100), (0, 1, 150)], time_kind="continuous")
    disc = Discretizer(bin_seconds=3600)
    assert disc.fit(stream).transform(stream).edges == ((0, 1, 1),)
    assert disc.get_params() == {"bin_seconds": 3600, "granularity": None}


def test_flattener_learns_split_at_fit():
    stream = make_stream(3, [(0, 1, t) for t in range(1, 11)])
    flattener = TimestampFlattener().fit(stream)
    assert flattener.split_ == SplitSpec(7, 8)
    assert set(flattener.transform(stream).t.tolist()) == {1, 2, 3}


def test_reverse_augmenter_transformer():
    out = ReverseAugmenter().fit_transform(_examples([(0, 1, 4)]))
    assert set(out.positives) == {(0, 1, 4), (1, 0, 4)}
