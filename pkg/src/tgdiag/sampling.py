"""Negative-example generation with per-experiment policies and ratio schedules.

Candidate universes never contain self-loops.  Under ``as_stored``
orientation the universe is all ordered pairs (so the reverse of a positive
edge is an eligible negative); under ``single_direction`` it is all
unordered pairs, written ``u < v``.

Exclusion policies:

* ``per_timestep``  -- a pair positive at timestep ``t`` is excluded from
  the negatives of ``t`` only;
* ``any_timestep``  -- a pair positive anywhere in the stream is excluded
  from every timestep's negatives (in either orientation when the universe
  is unordered).

Sampling is uniform without replacement within each timestep.  Every
timestep draws from its own sub-seeded generator
(``derive_seed(seed, epoch, t)``, see :mod:`tgdiag._rng`), so output is
identical no matter how timesteps are scheduled across threads, and
epoch-indexed redraws are reproducible.  Epoch 0 is the initial draw.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from ._rng import make_rng
from .graphdata import EdgeStream, SplitSpec
from .validation import (
    EXCLUSIONS,
    ORIENTATIONS,
    InputError,
    check_choice,
    check_stream_kind,
)


class PoolExhaustedError(InputError):
    """The eligible candidate pool is smaller than the requested draw."""


@dataclass(frozen=True)
class NegativePolicy:
    """How negatives are drawn: ratio per positive, exclusion rule, orientation."""

    ratio: float = 1.0
    exclusion: str = "per_timestep"
    orientation: str = "as_stored"
    seed: int = 0

    def __post_init__(self) -> None:
        if not (float(self.ratio) > 0 and math.isfinite(self.ratio)):
            raise InputError(f"ratio must be positive, got {self.ratio!r}")
        check_choice(self.exclusion, EXCLUSIONS, "exclusion")
        check_choice(self.orientation, ORIENTATIONS, "orientation")


@dataclass(frozen=True)
class LabeledExampleSet:
    """Positive and sampled-negative (u, v, t) triples for one split.

    ``node_count``/``policy`` carry enough context for epoch redraws; sets
    reconstructed from bare CSV files lack the exclusion index and must be
    redrawn from the originating stream instead.
    """

    positives: tuple[tuple[int, int, int], ...]
    negatives: tuple[tuple[int, int, int], ...]
    node_count: int
    policy: NegativePolicy | None = None
    exclusions: dict | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        by_time_pos: dict[int, set] = {}
        for u, v, t in self.positives:
            by_time_pos.setdefault(t, set()).add((u, v))
        for u, v, t in self.negatives:
            if (u, v) in by_time_pos.get(t, ()):
                raise InputError(
                    f"negative ({u},{v},{t}) collides with a positive example"
                )

    def sliced(self, split: SplitSpec, segment: str) -> "LabeledExampleSet":
        """Restrict to the timesteps of one split segment."""
        check_choice(segment, ("train", "val", "test"), "segment")
        keep = lambda t: split.segment_of(t) == segment
        return LabeledExampleSet(
            positives=tuple(p for p in self.positives if keep(p[2])),
            negatives=tuple(n for n in self.negatives if keep(n[2])),
            node_count=self.node_count,
            policy=self.policy,
            exclusions=self.exclusions,
        )


def universe_size(node_count: int, orientation: str) -> int:
    ordered = node_count * (node_count - 1)
    return ordered if orientation == "as_stored" else ordered // 2


def pair_to_index(u: int, v: int, node_count: int, orientation: str) -> int:
    if orientation == "as_stored":
        return u * (node_count - 1) + v - (v > u)
    lo, hi = (u, v) if u < v else (v, u)
    return lo * node_count - lo * (lo + 1) // 2 + hi - lo - 1


def _decode_ordered(idx: np.ndarray, node_count: int) -> tuple[np.ndarray, np.ndarray]:
    u = idx // (node_count - 1)
    r = idx % (node_count - 1)
    v = r + (r >= u)
    return u, v


def _decode_unordered(idx: np.ndarray, node_count: int) -> tuple[np.ndarray, np.ndarray]:
    offsets = np.arange(node_count, dtype=np.int64)
    offsets = offsets * node_count - offsets * (offsets + 1) // 2
    u = np.searchsorted(offsets, idx, side="right") - 1
    v = idx - offsets[u] + u + 1
    return u, v


def decode_pairs(
    idx: np.ndarray, node_count: int, orientation: str
) -> tuple[np.ndarray, np.ndarray]:
    idx = np.asarray(idx, dtype=np.int64)
    if orientation == "as_stored":
        return _decode_ordered(idx, node_count)
    return _decode_unordered(idx, node_count)


def _draw_without_replacement(
    rng: np.random.Generator, universe: int, excluded: frozenset, need: int
) -> np.ndarray:
    """``need`` distinct indices, uniform over ``universe`` minus ``excluded``."""
    pool_size = universe - len(excluded)
    if need > pool_size:
        raise PoolExhaustedError(
            f"need {need} negatives but only {pool_size} candidates remain"
        )
    if universe <= 4 * need + 1024:
        # Small pool: materialize the complement and sample directly.
        eligible = np.setdiff1d(
            np.arange(universe, dtype=np.int64),
            np.fromiter(excluded, dtype=np.int64, count=len(excluded)),
            assume_unique=True,
        )
        return eligible[rng.choice(pool_size, size=need, replace=False)]
    # Large sparse pool: rejection sampling is exact and allocation-free.
    chosen: list[int] = []
    seen = set(excluded)
    while len(chosen) < need:
        batch = rng.integers(0, universe, size=max(64, 2 * (need - len(chosen))))
        for value in batch.tolist():
            if value in seen:
                continue
            seen.add(value)
            chosen.append(value)
            if len(chosen) == need:
                break
    return np.array(chosen, dtype=np.int64)


def _positive_pair_indices(
    stream: EdgeStream, orientation: str
) -> tuple[dict[int, frozenset], frozenset]:
    """Per-timestep and global positive pair-index sets, oriented per policy."""
    n = stream.node_count
    if orientation == "as_stored":
        idx = stream.u * (n - 1) + stream.v - (stream.v > stream.u)
    else:
        lo = np.minimum(stream.u, stream.v)
        hi = np.maximum(stream.u, stream.v)
        idx = lo * n - lo * (lo + 1) // 2 + hi - lo - 1
    per_t: dict[int, frozenset] = {}
    for t in stream.distinct_timesteps().tolist():
        per_t[t] = frozenset(idx[stream.t == t].tolist())
    return per_t, frozenset(idx.tolist())


def sample_negatives(
    stream: EdgeStream,
    split: SplitSpec | None,
    policy: NegativePolicy,
    epoch: int = 0,
    threads: int = 1,
) -> LabeledExampleSet:
    """Draw ``ceil(ratio * positives)`` negatives per timestep.

    Positives are all edges of the (discrete) stream; use
    :meth:`LabeledExampleSet.sliced` with ``split`` to restrict the result
    to one segment.  Negatives within a timestep are emitted in canonical
    pair order, so exhausting a pool reproduces it identically every epoch.
    """
    check_stream_kind(stream, "discrete", "sample_negatives")
    del split  # membership slicing is the caller's concern; kept for symmetry
    universe = universe_size(stream.node_count, policy.orientation)
    per_t, global_pos = _positive_pair_indices(stream, policy.orientation)

    def _one_timestep(t: int) -> tuple[np.ndarray, np.ndarray]:
        n_pos = int(np.count_nonzero(stream.t == t))
        need = math.ceil(policy.ratio * n_pos)
        excluded = per_t[t] if policy.exclusion == "per_timestep" else global_pos
        rng = make_rng(policy.seed, epoch, t)
        idx = _draw_without_replacement(rng, universe, excluded, need)
        idx.sort()
        return decode_pairs(idx, stream.node_count, policy.orientation)

    times = stream.distinct_timesteps().tolist()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            drawn = list(pool.map(_one_timestep, times))
    else:
        drawn = [_one_timestep(t) for t in times]

    negatives: list[tuple[int, int, int]] = []
    for t, (nu, nv) in zip(times, drawn):
        negatives.extend((int(a), int(b), t) for a, b in zip(nu, nv))
    positives = tuple(
        (int(a), int(b), int(c)) for a, b, c in zip(stream.u, stream.v, stream.t)
    )
    return LabeledExampleSet(
        positives=positives,
        negatives=tuple(negatives),
        node_count=stream.node_count,
        policy=policy,
        exclusions={"per_timestep": per_t, "global": global_pos},
    )


def redraw_negatives_per_epoch(
    examples: LabeledExampleSet, epoch: int, policy: NegativePolicy | None = None
) -> LabeledExampleSet:
    """Resample negatives with the epoch-derived seed; positives unchanged."""
    policy = policy or examples.policy
    if policy is None or examples.exclusions is None:
        raise InputError(
            "example set lacks sampling context; redraw from the stream instead"
        )
    universe = universe_size(examples.node_count, policy.orientation)
    per_t = examples.exclusions["per_timestep"]
    global_pos = examples.exclusions["global"]
    counts: dict[int, int] = {}
    for _, _, t in examples.positives:
        counts[t] = counts.get(t, 0) + 1
    negatives: list[tuple[int, int, int]] = []
    for t in sorted(counts):
        need = math.ceil(policy.ratio * counts[t])
        excluded = per_t[t] if policy.exclusion == "per_timestep" else global_pos
        rng = make_rng(policy.seed, epoch, t)
        idx = _draw_without_replacement(rng, universe, excluded, need)
        idx.sort()
        nu, nv = decode_pairs(idx, examples.node_count, policy.orientation)
        negatives.extend((int(a), int(b), t) for a, b in zip(nu, nv))
    return LabeledExampleSet(
        positives=examples.positives,
        negatives=tuple(negatives),
        node_count=examples.node_count,
        policy=policy,
        exclusions=examples.exclusions,
    )


def ratio_schedule(doublings: int) -> list[int]:
    """``[1, 2, 4, ..., 2**doublings]``."""
    if doublings < 0:
        raise InputError("doublings must be non-negative")
    return [2**i for i in range(doublings + 1)]


def iter_triples(
    examples: LabeledExampleSet,
) -> Iterator[tuple[tuple[int, int, int], int]]:
    """All (triple, label) pairs, positives first."""
    for p in examples.positives:
        yield p, 1
    for n in examples.negatives:
        yield n, 0


def triples_to_arrays(
    triples: Sequence[tuple[int, int, int]],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not triples:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    u, v, t = (np.array(col, dtype=np.int64) for col in zip(*triples))
    return u, v, t
