"""Seeded synthetic dataset constructions for the property experiments.

Every generator is a deterministic function of its parameters: the same
seed yields byte-identical CSV output.  Undirected semantics are encoded
by emitting each pair once with ``u < v``.  Randomness is consumed through
per-timestep sub-seeded generators (see :mod:`tgdiag._rng`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from ._rng import make_rng
from .graphdata import EdgeStream, Snapshot, _parse_rows
from .sampling import _draw_without_replacement, decode_pairs
from .validation import InputError, check_positive_int, check_probability

PAIR_GROUP_HEADER = "u,v,group"
PAIR_GROUP_LABELS = ("both", "odd", "even", "never")
ID_MAP_HEADER = "node,original"


@dataclass(frozen=True)
class SbmParams:
    """Two-group stochastic block model, resampled independently per timestep."""

    nodes_per_group: int = 500
    groups: int = 2
    p_intra: float = 0.005
    p_inter: float = 0.001
    horizon: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        check_positive_int(self.nodes_per_group, "nodes_per_group")
        if self.groups != 2:
            raise InputError("only the two-group block model is supported")
        check_probability(self.p_intra, "p_intra")
        check_probability(self.p_inter, "p_inter")
        check_positive_int(self.horizon, "horizon")


@dataclass(frozen=True)
class BaParams:
    """Dynamic preferential-attachment process seeded with a static BA graph."""

    nodes: int = 1000
    edges_per_step: int = 2000
    train_steps: int = 100
    val_steps: int = 21
    seed: int = 0

    def __post_init__(self) -> None:
        check_positive_int(self.nodes, "nodes")
        check_positive_int(self.edges_per_step, "edges_per_step")
        check_positive_int(self.train_steps, "train_steps")
        check_positive_int(self.val_steps, "val_steps")
        if self.edges_per_step > self.nodes * (self.nodes - 1) // 2:
            raise InputError("edges_per_step exceeds the number of distinct pairs")


@dataclass(frozen=True)
class RecencyParams:
    """Uniform edge sets, pairwise disjoint across timesteps."""

    nodes: int
    edges_per_step: int
    steps: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        check_positive_int(self.nodes, "nodes")
        check_positive_int(self.edges_per_step, "edges_per_step")
        check_positive_int(self.steps, "steps")
        if self.steps * self.edges_per_step > self.nodes * (self.nodes - 1) // 2:
            raise InputError(
                "disjointness infeasible: steps * edges_per_step exceeds the pair pool"
            )


class PersistenceData(NamedTuple):
    stream: EdgeStream
    node_map: tuple[int, ...]  # node_map[dense_id] = original id


class PeriodicityData(NamedTuple):
    stream: EdgeStream
    pair_groups: dict[tuple[int, int], str]
    node_map: tuple[int, ...]


def gen_sbm_dynamic(params: SbmParams) -> EdgeStream:
    """Resample a two-group SBM independently at each timestep.

    Node ids ``0..n-1`` form group 0 and ``n..2n-1`` group 1; every
    unordered pair is included with ``p_intra`` or ``p_inter`` per step.
    """
    n = params.nodes_per_group
    intra_u, intra_v = np.triu_indices(n, k=1)
    inter_u = np.repeat(np.arange(n), n)
    inter_v = np.tile(np.arange(n, 2 * n), n)
    chunks_u: list[np.ndarray] = []
    chunks_v: list[np.ndarray] = []
    chunks_t: list[np.ndarray] = []
    for t in range(1, params.horizon + 1):
        rng = make_rng(params.seed, t)
        mask0 = rng.random(len(intra_u)) < params.p_intra
        mask1 = rng.random(len(intra_u)) < params.p_intra
        mask_x = rng.random(len(inter_u)) < params.p_inter
        step_u = np.concatenate(
            [intra_u[mask0], intra_u[mask1] + n, inter_u[mask_x]]
        )
        step_v = np.concatenate(
            [intra_v[mask0], intra_v[mask1] + n, inter_v[mask_x]]
        )
        order = np.lexsort((step_v, step_u))
        chunks_u.append(step_u[order])
        chunks_v.append(step_v[order])
        chunks_t.append(np.full(len(step_u), t, dtype=np.int64))
    groups = {i: (0 if i < n else 1) for i in range(2 * n)}
    return EdgeStream(
        node_count=2 * n,
        u=np.concatenate(chunks_u) if chunks_u else np.empty(0, dtype=np.int64),
        v=np.concatenate(chunks_v) if chunks_v else np.empty(0, dtype=np.int64),
        t=np.concatenate(chunks_t) if chunks_t else np.empty(0, dtype=np.int64),
        time_kind="discrete",
        granularity="synthetic",
        node_groups=groups,
    )


def ba_attachment_count(nodes: int, edges_per_step: int) -> int:
    """Attachment parameter for the initial graph: ``(nodes - m) * m`` edges."""
    return max(1, round(edges_per_step / nodes))


def _ba_initial_edges(
    nodes: int, m: int, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """Grow a static Barabasi-Albert graph; returns (nodes - m) * m edges."""
    targets = list(range(m))
    repeated: list[int] = []
    edges: list[tuple[int, int]] = []
    for source in range(m, nodes):
        edges.extend((t, source) for t in targets)
        repeated.extend(targets)
        repeated.extend([source] * m)
        picked: set[int] = set()
        while len(picked) < m:
            picked.add(repeated[int(rng.integers(len(repeated)))])
        targets = sorted(picked)
    return edges


def degree_proportional_endpoints(
    degrees, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Sample node ids independently, each proportional to its degree."""
    deg = np.asarray(degrees, dtype=np.float64)
    total = deg.sum()
    if total <= 0:
        raise InputError("cannot sample endpoints: all degrees are zero")
    return rng.choice(len(deg), size=size, p=deg / total)


def _degree_proportional_pairs(
    degrees: np.ndarray, count: int, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """``count`` distinct non-loop pairs; endpoints degree-proportional,
    self-loops and intra-step duplicates rejected and resampled."""
    active = int(np.count_nonzero(degrees))
    if count > active * (active - 1) // 2:
        raise InputError("edges_per_step exceeds pairs of positive-degree nodes")
    chosen: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    while len(chosen) < count:
        draw = degree_proportional_endpoints(
            degrees, 2 * max(64, count - len(chosen)), rng
        )
        for x, y in zip(draw[0::2].tolist(), draw[1::2].tolist()):
            if x == y:
                continue
            pair = (x, y) if x < y else (y, x)
            if pair in seen:
                continue
            seen.add(pair)
            chosen.append(pair)
            if len(chosen) == count:
                break
    return chosen


def gen_ba_dynamic(params: BaParams) -> EdgeStream:
    """Preferential-attachment dynamics over ``train_steps + val_steps`` steps.

    Timestep 1 is a static BA graph (attachment count chosen so its edge
    count approximates ``edges_per_step``); every later step draws
    ``edges_per_step`` distinct pairs with both endpoints sampled
    proportional to cumulative degree over all previous timesteps, counted
    with multiplicity.
    """
    horizon = params.train_steps + params.val_steps
    m = ba_attachment_count(params.nodes, params.edges_per_step)
    initial = _ba_initial_edges(params.nodes, m, make_rng(params.seed, 1))
    degrees = np.zeros(params.nodes, dtype=np.int64)
    rows: list[tuple[int, int, int]] = []
    for u, v in initial:
        rows.append((u, v, 1))
        degrees[u] += 1
        degrees[v] += 1
    for t in range(2, horizon + 1):
        pairs = _degree_proportional_pairs(
            degrees, params.edges_per_step, make_rng(params.seed, t)
        )
        pairs.sort()
        for u, v in pairs:
            rows.append((u, v, t))
        for u, v in pairs:
            degrees[u] += 1
            degrees[v] += 1
    return EdgeStream.from_edges(
        params.nodes, rows, "discrete", granularity="synthetic", sort=False
    )


def gen_recency(params: RecencyParams) -> EdgeStream:
    """Uniform random edge sets with global pairwise disjointness.

    Each timestep samples ``edges_per_step`` unordered pairs uniformly from
    the pool of pairs never used before; drawn pairs leave the pool for all
    subsequent timesteps.
    """
    universe = params.nodes * (params.nodes - 1) // 2
    used: frozenset[int] = frozenset()
    rows: list[tuple[int, int, int]] = []
    for t in range(1, params.steps + 1):
        idx = _draw_without_replacement(
            make_rng(params.seed, t), universe, used, params.edges_per_step
        )
        idx.sort()
        u, v = decode_pairs(idx, params.nodes, "single_direction")
        rows.extend((int(a), int(b), t) for a, b in zip(u, v))
        used = used | frozenset(idx.tolist())
    return EdgeStream.from_edges(
        params.nodes, rows, "discrete", granularity="synthetic", sort=False
    )


def _dense_remap(nodes: set[int]) -> tuple[dict[int, int], tuple[int, ...]]:
    originals = tuple(sorted(nodes))
    return {orig: dense for dense, orig in enumerate(originals)}, originals


def _canonical_pairs(snapshot: Snapshot) -> set[tuple[int, int]]:
    return {(u, v) if u < v else (v, u) for u, v in snapshot.pairs}


def gen_persistence(snapshot: Snapshot, horizon: int) -> PersistenceData:
    """Repeat one snapshot at every timestep ``1..horizon``.

    Nodes absent from the snapshot are excluded; remaining nodes are
    re-indexed densely and the id map recorded.  Pair orientation is
    canonicalized to ``u < v``.
    """
    check_positive_int(horizon, "horizon")
    if not snapshot.pairs:
        raise InputError("persistence requires a non-empty snapshot")
    pairs = _canonical_pairs(snapshot)
    mapping, originals = _dense_remap({n for p in pairs for n in p})
    mapped = sorted((mapping[u], mapping[v]) for u, v in pairs)
    rows = [(u, v, t) for t in range(1, horizon + 1) for u, v in mapped]
    stream = EdgeStream.from_edges(
        len(originals), rows, "discrete", granularity="synthetic", sort=False
    )
    return PersistenceData(stream=stream, node_map=originals)


def gen_periodicity(
    snap_even: Snapshot, snap_odd: Snapshot, horizon: int
) -> PeriodicityData:
    """Alternate two snapshots: the first at even timesteps, the second at odd.

    Returns the stream plus the partition of the unordered candidate
    universe into ``both`` / ``even`` / ``odd`` / ``never`` pair groups.
    """
    check_positive_int(horizon, "horizon")
    pairs_even = _canonical_pairs(snap_even)
    pairs_odd = _canonical_pairs(snap_odd)
    if not pairs_even and not pairs_odd:
        raise InputError("periodicity requires at least one non-empty snapshot")
    nodes = {n for p in pairs_even | pairs_odd for n in p}
    mapping, originals = _dense_remap(nodes)
    even = {(mapping[u], mapping[v]) for u, v in pairs_even}
    odd = {(mapping[u], mapping[v]) for u, v in pairs_odd}
    rows = []
    for t in range(1, horizon + 1):
        for u, v in sorted(even if t % 2 == 0 else odd):
            rows.append((u, v, t))
    stream = EdgeStream.from_edges(
        len(originals), rows, "discrete", granularity="synthetic", sort=False
    )
    n = len(originals)
    groups: dict[tuple[int, int], str] = {}
    for u in range(n):
        for v in range(u + 1, n):
            pair = (u, v)
            in_even, in_odd = pair in even, pair in odd
            if in_even and in_odd:
                groups[pair] = "both"
            elif in_even:
                groups[pair] = "even"
            elif in_odd:
                groups[pair] = "odd"
            else:
                groups[pair] = "never"
    return PeriodicityData(stream=stream, pair_groups=groups, node_map=originals)


def write_pair_groups(groups: Mapping[tuple[int, int], str]) -> bytes:
    rows = [PAIR_GROUP_HEADER]
    rows.extend(f"{u},{v},{groups[(u, v)]}" for u, v in sorted(groups))
    rows.append("")
    return "\n".join(rows).encode("ascii")


def parse_pair_groups(text: bytes | str) -> dict[tuple[int, int], str]:
    if isinstance(text, bytes):
        text = text.decode("ascii")
    groups: dict[tuple[int, int], str] = {}
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != PAIR_GROUP_HEADER:
        raise InputError(f"line 1: expected header {PAIR_GROUP_HEADER!r}")
    for i, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 3 or fields[2] not in PAIR_GROUP_LABELS:
            raise InputError(f"malformed pair-group row at line {i}: {line!r}")
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError:
            raise InputError(f"malformed pair-group row at line {i}: {line!r}") from None
        groups[(u, v)] = fields[2]
    return groups


def write_id_map(node_map: tuple[int, ...]) -> bytes:
    rows = [ID_MAP_HEADER]
    rows.extend(f"{dense},{orig}" for dense, orig in enumerate(node_map))
    rows.append("")
    return "\n".join(rows).encode("ascii")


def parse_id_map(text: bytes | str) -> tuple[int, ...]:
    out: dict[int, int] = {}
    for line_no, fields in _parse_rows(text, ID_MAP_HEADER, 2):
        dense, orig = int(fields[0]), int(fields[1])
        if dense in out:
            raise InputError(f"duplicate node at line {line_no}")
        out[dense] = orig
    if set(out) != set(range(len(out))):
        raise InputError("id map must cover dense ids 0..K-1")
    return tuple(out[i] for i in range(len(out)))
