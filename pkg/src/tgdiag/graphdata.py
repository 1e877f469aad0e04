"""Temporal-graph data model, bit-exact file I/O, and structural validation.

An edge stream is a chronologically ordered multiset of directed,
timestamped interactions over a fixed node universe ``{0, ..., node_count-1}``.
Self-loops are rejected everywhere.  Undirected datasets are represented by
convention: generators emit every pair with ``u < v``.

On-disk formats (all ASCII, ``\\n`` line endings, no trailing whitespace):

* edge CSV         -- header exactly ``u,v,t``, decimal integer fields
* node-group CSV   -- header ``node,group``
* metadata sidecar -- JSON ``{"node_count": N, "time_kind": ..., "granularity": ...}``
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .validation import InputError, check_positive_int, check_time_kind

EDGE_HEADER = "u,v,t"
GROUP_HEADER = "node,group"

EDGES_FILENAME = "edges.csv"
META_FILENAME = "meta.json"
GROUPS_FILENAME = "groups.csv"


class TemporalEdge(NamedTuple):
    """One timestamped directed interaction from node ``u`` to node ``v``."""

    u: int
    v: int
    t: int


@dataclass(frozen=True, eq=False)
class EdgeStream:
    """Immutable edge multiset, stored as parallel arrays sorted by timestamp.

    Invariants, enforced at construction:

    * timestamps non-decreasing (ties keep insertion order, which parsing
      and all generators make deterministic);
    * node ids in ``[0, node_count)``; no self-loops; timestamps >= 0;
    * ``node_groups``, when present, assigns a group to every node id
      exactly once.
    """

    node_count: int
    u: np.ndarray
    v: np.ndarray
    t: np.ndarray
    time_kind: str
    granularity: str | None = None
    node_groups: Mapping[int, int] | None = None

    def __post_init__(self) -> None:
        check_positive_int(self.node_count, "node_count")
        check_time_kind(self.time_kind)
        for name in ("u", "v", "t"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.u.shape == self.v.shape == self.t.shape) or self.u.ndim != 1:
            raise InputError("edge arrays must be one-dimensional and equally long")
        if len(self.t) and np.any(np.diff(self.t) < 0):
            raise InputError("edges must be sorted by non-decreasing timestamp")
        if len(self.t) and self.t[0] < 0:
            raise InputError("negative timestamp")
        if np.any(self.u == self.v):
            raise InputError("self-loop edge")
        if len(self.u) and (
            self.u.min() < 0
            or self.v.min() < 0
            or max(self.u.max(), self.v.max()) >= self.node_count
        ):
            raise InputError("node id outside [0, node_count)")
        if self.node_groups is not None:
            groups = dict(self.node_groups)
            if set(groups) != set(range(self.node_count)):
                raise InputError("node_groups must cover every node id exactly once")
            object.__setattr__(self, "node_groups", groups)

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[tuple[int, int, int]],
        time_kind: str,
        granularity: str | None = None,
        node_groups: Mapping[int, int] | None = None,
        sort: bool = True,
    ) -> "EdgeStream":
        """Build a stream from ``(u, v, t)`` triples, stably sorting by ``t``."""
        rows = list(edges)
        if rows:
            u, v, t = (np.array(col, dtype=np.int64) for col in zip(*rows))
        else:
            u = v = t = np.empty(0, dtype=np.int64)
        if sort and len(t):
            order = np.argsort(t, kind="stable")
            u, v, t = u[order], v[order], t[order]
        return cls(node_count, u, v, t, time_kind, granularity, node_groups)

    @cached_property
    def edges(self) -> tuple[TemporalEdge, ...]:
        return tuple(
            TemporalEdge(int(a), int(b), int(c))
            for a, b, c in zip(self.u, self.v, self.t)
        )

    def __len__(self) -> int:
        return len(self.t)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EdgeStream):
            return NotImplemented
        return (
            self.node_count == other.node_count
            and self.time_kind == other.time_kind
            and self.granularity == other.granularity
            and self.node_groups == other.node_groups
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.t, other.t)
        )

    def distinct_timesteps(self) -> np.ndarray:
        return np.unique(self.t)

    def replace(self, **changes) -> "EdgeStream":
        fields = {
            "node_count": self.node_count,
            "u": self.u,
            "v": self.v,
            "t": self.t,
            "time_kind": self.time_kind,
            "granularity": self.granularity,
            "node_groups": self.node_groups,
        }
        fields.update(changes)
        return EdgeStream(**fields)


@dataclass(frozen=True)
class Snapshot:
    """The distinct directed pairs of one discrete timestep."""

    t: int
    pairs: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        if any(u == v for u, v in self.pairs):
            raise InputError("snapshot contains a self-loop")

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class SplitSpec:
    """Chronological split boundaries; both ends inclusive."""

    train_end: int
    val_end: int

    def __post_init__(self) -> None:
        if self.train_end >= self.val_end:
            raise InputError("split requires train_end < val_end")

    def segment_of(self, t: int) -> str:
        if t <= self.train_end:
            return "train"
        if t <= self.val_end:
            return "val"
        return "test"


def _parse_field(field: str, line_no: int) -> int:
    body = field[1:] if field.startswith("-") else field
    if not body.isdigit() or not body.isascii():
        raise InputError(f"malformed row at line {line_no}: field {field!r}")
    return -int(body) if field.startswith("-") else int(body)


def _parse_rows(text: bytes | str, header: str, n_fields: int):
    """Yield ``(line_no, fields)`` for a strict CSV with the given header."""
    if isinstance(text, bytes):
        try:
            text = text.decode("ascii")
        except UnicodeDecodeError as exc:
            raise InputError(f"non-ASCII byte in CSV: {exc}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != header:
        raise InputError(f"line 1: expected header {header!r}")
    for i, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != n_fields or any(f != f.strip() or f == "" for f in fields):
            raise InputError(f"malformed row at line {i}: {line!r}")
        yield i, fields


def parse_edge_stream(
    text: bytes | str,
    node_count: int,
    time_kind: str,
    granularity: str | None = None,
    node_groups: Mapping[int, int] | None = None,
) -> EdgeStream:
    """Parse edge CSV bytes into a validated stream.

    Rows are read in file order and then stably sorted by timestamp, so
    intra-timestep order is exactly the file order.  Errors report the
    offending 1-based line number.
    """
    check_positive_int(node_count, "node_count")
    us: list[int] = []
    vs: list[int] = []
    ts: list[int] = []
    for line_no, fields in _parse_rows(text, EDGE_HEADER, 3):
        u, v, t = (_parse_field(f, line_no) for f in fields)
        if t < 0:
            raise InputError(f"negative timestamp at line {line_no}")
        if u < 0 or v < 0:
            raise InputError(f"negative node id at line {line_no}")
        if u == v:
            raise InputError(f"self-loop at line {line_no}")
        if u >= node_count or v >= node_count:
            raise InputError(
                f"node id >= node_count ({node_count}) at line {line_no}"
            )
        us.append(u)
        vs.append(v)
        ts.append(t)
    u_arr = np.array(us, dtype=np.int64)
    v_arr = np.array(vs, dtype=np.int64)
    t_arr = np.array(ts, dtype=np.int64)
    order = np.argsort(t_arr, kind="stable")
    return EdgeStream(
        node_count, u_arr[order], v_arr[order], t_arr[order],
        time_kind, granularity, node_groups,
    )


def write_edge_stream(stream: EdgeStream) -> bytes:
    """Canonical edge CSV; ``parse_edge_stream`` inverts it exactly."""
    rows = [EDGE_HEADER]
    rows.extend(f"{u},{v},{t}" for u, v, t in zip(stream.u, stream.v, stream.t))
    rows.append("")
    return "\n".join(rows).encode("ascii")


def parse_node_groups(text: bytes | str, node_count: int) -> dict[int, int]:
    groups: dict[int, int] = {}
    for line_no, fields in _parse_rows(text, GROUP_HEADER, 2):
        node, group = (_parse_field(f, line_no) for f in fields)
        if node < 0 or node >= node_count:
            raise InputError(f"node id out of range at line {line_no}")
        if node in groups:
            raise InputError(f"duplicate node at line {line_no}")
        groups[node] = group
    return groups


def write_node_groups(groups: Mapping[int, int]) -> bytes:
    rows = [GROUP_HEADER]
    rows.extend(f"{node},{groups[node]}" for node in sorted(groups))
    rows.append("")
    return "\n".join(rows).encode("ascii")


def write_metadata(stream: EdgeStream) -> bytes:
    meta = {
        "node_count": stream.node_count,
        "time_kind": stream.time_kind,
        "granularity": stream.granularity,
    }
    return (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode("ascii")


def parse_metadata(text: bytes | str) -> dict:
    try:
        meta = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid metadata JSON: {exc}") from None
    if not isinstance(meta, dict) or set(meta) != {
        "node_count", "time_kind", "granularity",
    }:
        raise InputError(
            "metadata must contain exactly node_count, time_kind, granularity"
        )
    check_positive_int(meta["node_count"], "node_count")
    check_time_kind(meta["time_kind"])
    if meta["granularity"] is not None and not isinstance(meta["granularity"], str):
        raise InputError("granularity must be a string or null")
    return meta


def save_dataset(stream: EdgeStream, directory: str | os.PathLike) -> None:
    """Write ``edges.csv``, ``meta.json`` and, if present, ``groups.csv``."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, EDGES_FILENAME), "wb") as fh:
        fh.write(write_edge_stream(stream))
    with open(os.path.join(directory, META_FILENAME), "wb") as fh:
        fh.write(write_metadata(stream))
    if stream.node_groups is not None:
        with open(os.path.join(directory, GROUPS_FILENAME), "wb") as fh:
            fh.write(write_node_groups(stream.node_groups))


def load_dataset(directory: str | os.PathLike) -> EdgeStream:
    """Inverse of :func:`save_dataset`."""
    edges_path = os.path.join(directory, EDGES_FILENAME)
    meta_path = os.path.join(directory, META_FILENAME)
    for path in (edges_path, meta_path):
        if not os.path.exists(path):
            raise InputError(f"missing dataset file: {path}")
    with open(meta_path, "rb") as fh:
        meta = parse_metadata(fh.read())
    groups = None
    groups_path = os.path.join(directory, GROUPS_FILENAME)
    if os.path.exists(groups_path):
        with open(groups_path, "rb") as fh:
            groups = parse_node_groups(fh.read(), meta["node_count"])
    with open(edges_path, "rb") as fh:
        return parse_edge_stream(
            fh.read(), meta["node_count"], meta["time_kind"],
            meta["granularity"], groups,
        )


def snapshot_at(stream: EdgeStream, t: int) -> Snapshot:
    """Distinct directed pairs with timestamp exactly ``t`` (duplicates collapsed)."""
    from .validation import check_stream_kind

    check_stream_kind(stream, "discrete", "snapshot_at")
    mask = stream.t == t
    pairs = frozenset(zip(stream.u[mask].tolist(), stream.v[mask].tolist()))
    return Snapshot(t=int(t), pairs=pairs)


def _as_fraction(value: float, name: str) -> Fraction:
    # Fractions entered as decimals (0.7, 0.15) must behave like exact
    # rationals: floor(0.7 * 10) is 7, not 6.
    frac = Fraction(value).limit_denominator(10**6)
    if not 0 < frac < 1:
        raise InputError(f"{name} must lie strictly inside (0, 1), got {value!r}")
    return frac


def chronological_split(
    stream: EdgeStream, train_frac: float = 0.7, val_frac: float = 0.15
) -> SplitSpec:
    """Split distinct timesteps chronologically into train / val / test.

    The earliest ``floor(train_frac * T)`` timesteps become training data;
    the remainder is divided between validation (first) and test in
    proportion ``val_frac : (1 - train_frac - val_frac)``, so the default
    0.7 / 0.15 splits the remainder evenly with an odd timestep going to
    test.  Boundaries never cut through a timestep.
    """
    from .validation import check_stream_kind

    check_stream_kind(stream, "discrete", "chronological_split")
    tf = _as_fraction(train_frac, "train_frac")
    vf = _as_fraction(val_frac, "val_frac")
    if tf + vf >= 1:
        raise InputError("train_frac + val_frac must be < 1")
    times = stream.distinct_timesteps()
    count = len(times)
    if count < 3:
        raise InputError(f"need at least 3 distinct timesteps, got {count}")
    n_train = math.floor(tf * count)
    if n_train < 1:
        raise InputError("split produces an empty training segment")
    remainder = count - n_train
    n_val = math.floor(remainder * vf / (1 - tf))
    if n_val < 1:
        raise InputError("split produces an empty validation segment")
    if remainder - n_val < 1:
        raise InputError("split produces an empty test segment")
    return SplitSpec(
        train_end=int(times[n_train - 1]),
        val_end=int(times[n_train + n_val - 1]),
    )


def write_split(split: SplitSpec) -> bytes:
    payload = {"train_end": split.train_end, "val_end": split.val_end}
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("ascii")


def parse_split(text: bytes | str) -> SplitSpec:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid split JSON: {exc}") from None
    if not isinstance(payload, dict) or set(payload) != {"train_end", "val_end"}:
        raise InputError("split file must contain exactly train_end and val_end")
    return SplitSpec(int(payload["train_end"]), int(payload["val_end"]))
