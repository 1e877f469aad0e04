import numpy as np
import pytest

from tgdiag._rng import make_rng, splitmix64
from tgdiag.generators import (
    BaParams,
    RecencyParams,
    SbmParams,
    ba_attachment_count,
    degree_proportional_endpoints,
    gen_ba_dynamic,
    gen_periodicity,
    gen_persistence,
    gen_recency,
    gen_sbm_dynamic,
    parse_id_map,
    parse_pair_groups,
    write_id_map,
    write_pair_groups,
)
from tgdiag.graphdata import Snapshot, write_edge_stream
from tgdiag.validation import InputError


def test_splitmix64_pinned_vectors():
    # Hand-evaluated from the documented formula; any reimplementation of
    # the seed derivation (e.g. the model bridge) must reproduce these.
    mask = (1 << 64) - 1
    z = (0 + 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4B09B) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    assert splitmix64(0) == z ^ (z >> 31) == 0xB604D07639442CE8
    assert splitmix64(1) == 0x73BC0947F53C6FE1

    from tgdiag._rng import derive_seed

    assert derive_seed(42, 7) == 0x6BA00701108FD3BE
    assert derive_seed(42, 7, 3) == 0x6E1E70E5CE88C79B


# --- SBM ---------------------------------------------------------------------

def test_sbm_zero_probabilities_empty():
    params = SbmParams(nodes_per_group=10, p_intra=0.0, p_inter=0.0, horizon=5,
                       seed=1)
    assert len(gen_sbm_dynamic(params)) == 0


def test_sbm_deterministic_bytes():
    params = SbmParams(nodes_per_group=20, horizon=10, seed=99)
    a = write_edge_stream(gen_sbm_dynamic(params))
    b = write_edge_stream(gen_sbm_dynamic(params))
    assert a == b


def test_sbm_groups_and_orientation():
    params = SbmParams(nodes_per_group=15, p_intra=0.3, p_inter=0.05, horizon=4,
                       seed=5)
    stream = gen_sbm_dynamic(params)
    assert stream.node_count == 30
    assert stream.node_groups == {i: (0 if i < 15 else 1) for i in range(30)}
    assert np.all(stream.u < stream.v)


def test_sbm_counts_near_binomial_expectation():
    # Oracle: per timestep, intra counts ~ Binomial(C(n,2), p_intra) and
    # inter ~ Binomial(n*n, p_inter); all seeded counts within 4 sigma.
    n, p_intra, p_inter, horizon = 40, 0.2, 0.05, 30
    stream = gen_sbm_dynamic(
        SbmParams(nodes_per_group=n, p_intra=p_intra, p_inter=p_inter,
                  horizon=horizon, seed=11)
    )
    pairs_intra = n * (n - 1) // 2
    pairs_inter = n * n
    bounds = {
        "intra": (pairs_intra * p_intra,
                  (pairs_intra * p_intra * (1 - p_intra)) ** 0.5),
        "inter": (pairs_inter * p_inter,
                  (pairs_inter * p_inter * (1 - p_inter)) ** 0.5),
    }
    violations = 0
    for t in range(1, horizon + 1):
        mask = stream.t == t
        u, v = stream.u[mask], stream.v[mask]
        counts = {
            "intra": int(np.sum((u < n) & (v < n)) + np.sum((u >= n) & (v >= n))),
            "inter": int(np.sum((u < n) & (v >= n))),
        }
        for kind, (mean, sigma) in bounds.items():
            expected = 2 * mean if kind == "intra" else mean
            spread = (2**0.5) * sigma if kind == "intra" else sigma
            if abs(counts[kind] - expected) > 4 * spread:
                violations += 1
    assert violations == 0


# --- BA ----------------------------------------------------------------------

def test_ba_attachment_count_default():
    assert ba_attachment_count(1000, 2000) == 2


def test_ba_initial_edge_count():
    params = BaParams(nodes=50, edges_per_step=100, train_steps=3, val_steps=1,
                      seed=2)
    stream = gen_ba_dynamic(params)
    m = ba_attachment_count(50, 100)
    assert int(np.sum(stream.t == 1)) == (50 - m) * m
    for t in range(2, 5):
        assert int(np.sum(stream.t == t)) == 100


def test_ba_step_pairs_distinct_and_loopless():
    stream = gen_ba_dynamic(BaParams(nodes=30, edges_per_step=60, train_steps=4,
                                     val_steps=2, seed=8))
    assert np.all(stream.u < stream.v)
    for t in np.unique(stream.t):
        mask = stream.t == t
        pairs = list(zip(stream.u[mask].tolist(), stream.v[mask].tolist()))
        assert len(pairs) == len(set(pairs))


def test_ba_deterministic_bytes():
    params = BaParams(nodes=30, edges_per_step=40, train_steps=3, val_steps=2,
                      seed=4)
    assert write_edge_stream(gen_ba_dynamic(params)) == write_edge_stream(
        gen_ba_dynamic(params)
    )


def test_ba_zero_degree_node_never_sampled():
    degrees = np.array([0, 3, 1, 0, 2])
    draws = degree_proportional_endpoints(degrees, 5000, make_rng(123))
    assert set(np.unique(draws).tolist()) <= {1, 2, 4}


def test_ba_endpoint_frequencies_match_degree_proportions():
    # Monte-Carlo oracle: frequencies of 10,000 draws vs exact multinomial
    # probabilities, every node within 3 sigma.
    degrees = np.array([1, 2, 3, 4, 5, 6, 7, 8, 9, 10], dtype=np.int64)
    n_draws = 10_000
    draws = degree_proportional_endpoints(degrees, n_draws, make_rng(77))
    probs = degrees / degrees.sum()
    counts = np.bincount(draws, minlength=10)
    sigma = np.sqrt(n_draws * probs * (1 - probs))
    assert np.all(np.abs(counts - n_draws * probs) <= 3 * sigma)


def test_ba_heavy_tail_at_defaults():
    stream = gen_ba_dynamic(BaParams(seed=1))
    degrees = np.bincount(np.concatenate([stream.u, stream.v]), minlength=1000)
    assert degrees.max() >= 10 * np.median(degrees)


# --- recency ------------------------------------------------------------------

def test_recency_disjoint_across_timesteps():
    stream = gen_recency(RecencyParams(nodes=30, edges_per_step=12, seed=6))
    seen: set = set()
    for t in range(1, 11):
        mask = stream.t == t
        pairs = set(zip(stream.u[mask].tolist(), stream.v[mask].tolist()))
        assert len(pairs) == 12
        assert not pairs & seen
        seen |= pairs


def test_recency_boundary_uses_entire_pool():
    stream = gen_recency(RecencyParams(nodes=5, edges_per_step=1, steps=10,
                                       seed=3))
    pairs = set(zip(stream.u.tolist(), stream.v.tolist()))
    assert len(pairs) == 10  # C(5,2): every pair used exactly once


def test_recency_infeasible_params_rejected():
    with pytest.raises(InputError, match="infeasible"):
        RecencyParams(nodes=5, edges_per_step=2, steps=10)


def test_recency_deterministic_bytes():
    params = RecencyParams(nodes=20, edges_per_step=5, seed=9)
    assert write_edge_stream(gen_recency(params)) == write_edge_stream(
        gen_recency(params)
    )


# --- persistence / periodicity --------------------------------------------------

def test_persistence_repeats_snapshot():
    data = gen_persistence(Snapshot(0, frozenset({(0, 1)})), 3)
    assert data.stream.edges == ((0, 1, 1), (0, 1, 2), (0, 1, 3))


def test_persistence_edge_count():
    snap = Snapshot(0, frozenset({(0, 1), (1, 2), (0, 3)}))
    data = gen_persistence(snap, 7)
    assert len(data.stream) == 7 * len(snap.pairs)


def test_persistence_reindexes_and_records_map():
    data = gen_persistence(Snapshot(0, frozenset({(9, 4)})), 2)
    assert data.stream.node_count == 2
    assert data.node_map == (4, 9)
    # joining output ids through the map recovers the input pair
    originals = {
        tuple(sorted((data.node_map[u], data.node_map[v])))
        for u, v in zip(data.stream.u.tolist(), data.stream.v.tolist())
    }
    assert originals == {(4, 9)}


def test_persistence_rejects_empty_snapshot():
    with pytest.raises(InputError, match="non-empty"):
        gen_persistence(Snapshot(0, frozenset()), 3)


def test_periodicity_group_algebra():
    a = Snapshot(0, frozenset({(0, 1)}))
    b = Snapshot(1, frozenset({(0, 1), (1, 2)}))
    data = gen_periodicity(a, b, 4)
    groups = data.pair_groups
    assert groups[(0, 1)] == "both"
    assert groups[(1, 2)] == "odd"
    assert sorted(groups.values()).count("even") == 0
    assert groups[(0, 2)] == "never"
    # snapshot A appears at even timesteps, B at odd
    for t in (1, 3):
        mask = data.stream.t == t
        assert set(zip(data.stream.u[mask].tolist(),
                       data.stream.v[mask].tolist())) == {(0, 1), (1, 2)}
    for t in (2, 4):
        mask = data.stream.t == t
        assert set(zip(data.stream.u[mask].tolist(),
                       data.stream.v[mask].tolist())) == {(0, 1)}


def test_periodicity_equal_snapshots_reduce_to_persistence():
    snap = Snapshot(0, frozenset({(0, 1), (2, 3)}))
    data = gen_periodicity(snap, snap, 5)
    labels = set(data.pair_groups.values())
    assert "odd" not in labels and "even" not in labels


def test_periodicity_groups_partition_universe():
    rng = np.random.default_rng(0)
    pairs_a = {(int(a), int(b)) for a, b in
               [sorted(rng.choice(10, 2, replace=False)) for _ in range(8)]}
    pairs_b = {(int(a), int(b)) for a, b in
               [sorted(rng.choice(10, 2, replace=False)) for _ in range(8)]}
    data = gen_periodicity(Snapshot(0, frozenset(pairs_a)),
                           Snapshot(1, frozenset(pairs_b)), 6)
    n = data.stream.node_count
    assert len(data.pair_groups) == n * (n - 1) // 2


def test_pair_groups_round_trip():
    data = gen_periodicity(
        Snapshot(0, frozenset({(0, 1)})), Snapshot(1, frozenset({(1, 2)})), 2
    )
    assert parse_pair_groups(write_pair_groups(data.pair_groups)) == data.pair_groups


def test_id_map_round_trip():
    assert parse_id_map(write_id_map((4, 9, 12))) == (4, 9, 12)
