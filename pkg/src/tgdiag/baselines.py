"""Reference predictors exercising the full pipeline without deep learning.

All predictors follow the estimator convention: construct with
hyperparameters, ``fit(stream, train_end=...)`` on training history,
``predict_scores(queries)`` to obtain a :class:`PredictionSet`.  Scores are
guaranteed to lie in [0, 1] by construction; no clamping anywhere.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .graphdata import EdgeStream
from .sampling import LabeledExampleSet
from .validation import InputError

PREDICTION_HEADER = "u,v,t,score"
_SCORE_RE = re.compile(r"^[01]\.\d{6}$")


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """Scored (u, v, t) records produced by any predictor."""

    u: np.ndarray
    v: np.ndarray
    t: np.ndarray
    score: np.ndarray
    model_id: str

    def __post_init__(self) -> None:
        for name, dtype in (("u", np.int64), ("v", np.int64),
                            ("t", np.int64), ("score", np.float64)):
            arr = np.ascontiguousarray(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.u)
        if not (len(self.v) == len(self.t) == len(self.score) == n):
            raise InputError("prediction arrays must be equally long")
        if n and (not np.all(np.isfinite(self.score))
                  or self.score.min() < 0.0 or self.score.max() > 1.0):
            raise InputError("scores must be finite and lie in [0, 1]")
        triples = set(zip(self.u.tolist(), self.v.tolist(), self.t.tolist()))
        if len(triples) != n:
            raise InputError("duplicate (u, v, t) record in prediction set")

    def __len__(self) -> int:
        return len(self.u)

    def records(self):
        yield from zip(
            self.u.tolist(), self.v.tolist(), self.t.tolist(), self.score.tolist()
        )

    def as_dict(self) -> dict[tuple[int, int, int], float]:
        return {
            (u, v, t): s
            for u, v, t, s in zip(
                self.u.tolist(), self.v.tolist(), self.t.tolist(), self.score.tolist()
            )
        }


def write_predictions(predictions: PredictionSet) -> bytes:
    """Canonical prediction CSV: scores printed with 6 decimal places."""
    rows = [PREDICTION_HEADER]
    rows.extend(
        f"{u},{v},{t},{s:.6f}" for u, v, t, s in predictions.records()
    )
    rows.append("")
    return "\n".join(rows).encode("ascii")


def parse_predictions(text: bytes | str, model_id: str = "external") -> PredictionSet:
    """Strict parse of the prediction protocol.

    Format conformance is a hard contract for external predictors: the
    score field must be printed with exactly 6 decimal places.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("ascii")
        except UnicodeDecodeError as exc:
            raise InputError(f"non-ASCII byte in prediction CSV: {exc}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != PREDICTION_HEADER:
        raise InputError(f"line 1: expected header {PREDICTION_HEADER!r}")
    us, vs, ts, ss = [], [], [], []
    for i, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 4:
            raise InputError(f"malformed prediction row at line {i}: {line!r}")
        if not all(f.isdigit() for f in fields[:3]):
            raise InputError(f"malformed prediction row at line {i}: {line!r}")
        if not _SCORE_RE.match(fields[3]):
            raise InputError(
                f"score must be printed with 6 decimal places at line {i}: "
                f"{fields[3]!r}"
            )
        score = float(fields[3])
        if score > 1.0:
            raise InputError(f"score above 1 at line {i}")
        us.append(int(fields[0]))
        vs.append(int(fields[1]))
        ts.append(int(fields[2]))
        ss.append(score)
    return PredictionSet(
        np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64),
        np.array(ts, dtype=np.int64), np.array(ss, dtype=np.float64), model_id,
    )


def check_coverage(predictions: PredictionSet, queries) -> None:
    """Predictions must cover the query triples exactly (no misses, no extras)."""
    qu, qv, qt = queries
    wanted = set(zip(qu.tolist(), qv.tolist(), qt.tolist()))
    got = set(zip(predictions.u.tolist(), predictions.v.tolist(),
                  predictions.t.tolist()))
    missing = len(wanted - got)
    extra = len(got - wanted)
    if missing or extra:
        raise InputError(
            f"prediction set does not match queries: "
            f"{missing} missing, {extra} extra records"
        )


def _train_mask(stream: EdgeStream, train_end: int) -> np.ndarray:
    return stream.t <= train_end


def _resolve_train_end(stream: EdgeStream, train_end: int | None) -> int:
    if train_end is None:
        raise InputError("train_end is required to fit on a stream")
    return int(train_end)


class EdgeBank(BaseEstimator):
    """Memorization baseline: 1.0 iff the queried pair was seen in training.

    Direction-sensitive by default, matching directed edge storage; with
    ``undirected=True`` both orientations of a training edge count as seen.
    """

    def __init__(self, undirected: bool = False):
        self.undirected = undirected

    def fit(self, stream: EdgeStream, train_end: int | None = None):
        end = _resolve_train_end(stream, train_end)
        mask = _train_mask(stream, end)
        seen = set(zip(stream.u[mask].tolist(), stream.v[mask].tolist()))
        if self.undirected:
            seen |= {(v, u) for u, v in seen}
        self.seen_ = frozenset(seen)
        return self

    def predict_scores(self, queries, model_id: str | None = None) -> PredictionSet:
        qu, qv, qt = queries
        scores = np.fromiter(
            ((u, v) in self.seen_ for u, v in zip(qu.tolist(), qv.tolist())),
            dtype=np.float64,
            count=len(qu),
        )
        name = model_id or ("edgebank-undirected" if self.undirected else "edgebank")
        return PredictionSet(qu, qv, qt, scores, name)


class RecencyScorer(BaseEstimator):
    """Exponential decay in the time since the pair was last seen in training.

    ``score = exp(-decay * (t_query - last_seen))``, 0 for never-seen pairs.
    Queries at or before the last sighting score 1.
    """

    def __init__(self, decay: float = 0.5, undirected: bool = False):
        self.decay = decay
        self.undirected = undirected

    def fit(self, stream: EdgeStream, train_end: int | None = None):
        end = _resolve_train_end(stream, train_end)
        mask = _train_mask(stream, end)
        last: dict[tuple[int, int], int] = {}
        for u, v, t in zip(
            stream.u[mask].tolist(), stream.v[mask].tolist(), stream.t[mask].tolist()
        ):
            last[(u, v)] = max(t, last.get((u, v), t))
            if self.undirected:
                last[(v, u)] = max(t, last.get((v, u), t))
        self.last_seen_ = last
        return self

    def predict_scores(self, queries, model_id: str | None = None) -> PredictionSet:
        if self.decay < 0:
            raise InputError("decay must be non-negative")
        qu, qv, qt = queries
        scores = np.zeros(len(qu), dtype=np.float64)
        for i, (u, v, t) in enumerate(zip(qu.tolist(), qv.tolist(), qt.tolist())):
            seen_at = self.last_seen_.get((u, v))
            if seen_at is not None:
                scores[i] = math.exp(-self.decay * max(0, t - seen_at))
        return PredictionSet(qu, qv, qt, scores, model_id or "recency")


class PopularityScorer(BaseEstimator):
    """Degree-product preference, normalized by the largest queried product.

    Degrees are counted with multiplicity over the training split; a query
    batch whose products are all zero scores zero everywhere.
    """

    def fit(self, stream: EdgeStream, train_end: int | None = None):
        end = _resolve_train_end(stream, train_end)
        mask = _train_mask(stream, end)
        degrees = np.bincount(
            np.concatenate([stream.u[mask], stream.v[mask]]),
            minlength=stream.node_count,
        ).astype(np.int64)
        self.degrees_ = degrees
        return self

    def predict_scores(self, queries, model_id: str | None = None) -> PredictionSet:
        qu, qv, qt = queries
        products = (self.degrees_[qu] * self.degrees_[qv]).astype(np.float64)
        top = products.max() if len(products) else 0.0
        scores = products / top if top > 0 else np.zeros_like(products)
        return PredictionSet(qu, qv, qt, scores, model_id or "popularity")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(logits: np.ndarray, y: np.ndarray) -> float:
    # Honest log-loss: saturating on the wrong side yields an infinite
    # loss, which fit() reports as a diverging learning rate.
    p = _sigmoid(logits)
    with np.errstate(divide="ignore"):
        terms = np.where(y == 1, np.log(p), np.log1p(-p))
    return float(-terms.mean())


def bce_gradient(
    features: np.ndarray, logits: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, float]:
    residual = _sigmoid(logits) - y
    return features.T @ residual / len(y), float(residual.mean())


class FeatureScorer(BaseEstimator):
    """Logistic model over hand-built pair features.

    Features: seen-before indicator, log-degrees of both endpoints,
    recency of each endpoint and of the pair, and a group-match indicator
    when node groups are present.  Trained by full-batch gradient descent
    on binary cross-entropy; weights start from a small seeded normal
    draw, so results are deterministic given the seed.
    """

    def __init__(
        self,
        learning_rate: float = 0.1,
        iterations: int = 500,
        decay: float = 0.5,
        seed: int = 0,
    ):
        self.learning_rate = learning_rate
        self.iterations = iterations
        self.decay = decay
        self.seed = seed

    def _build_index(self, stream: EdgeStream, train_end: int) -> None:
        mask = _train_mask(stream, train_end)
        u = stream.u[mask].tolist()
        v = stream.v[mask].tolist()
        t = stream.t[mask].tolist()
        self._pair_last: dict[tuple[int, int], int] = {}
        self._node_last: dict[int, int] = {}
        for a, b, ts in zip(u, v, t):
            self._pair_last[(a, b)] = max(ts, self._pair_last.get((a, b), ts))
            self._node_last[a] = max(ts, self._node_last.get(a, ts))
            self._node_last[b] = max(ts, self._node_last.get(b, ts))
        self._degrees = np.bincount(
            np.concatenate([stream.u[mask], stream.v[mask]]),
            minlength=stream.node_count,
        ).astype(np.float64)
        self._groups = stream.node_groups

    def _features(self, qu, qv, qt) -> np.ndarray:
        n = len(qu)
        width = 7 if self._groups is not None else 6
        x = np.zeros((n, width), dtype=np.float64)
        x[:, 1] = np.log1p(self._degrees[qu])
        x[:, 2] = np.log1p(self._degrees[qv])
        for i, (u, v, t) in enumerate(zip(qu.tolist(), qv.tolist(), qt.tolist())):
            if (u, v) in self._pair_last:
                x[i, 0] = 1.0
                x[i, 5] = math.exp(-self.decay * max(0, t - self._pair_last[(u, v)]))
            if u in self._node_last:
                x[i, 3] = math.exp(-self.decay * max(0, t - self._node_last[u]))
            if v in self._node_last:
                x[i, 4] = math.exp(-self.decay * max(0, t - self._node_last[v]))
            if self._groups is not None:
                x[i, 6] = 1.0 if self._groups[u] == self._groups[v] else 0.0
        return x

    def fit(
        self,
        examples: LabeledExampleSet,
        stream: EdgeStream,
        train_end: int | None = None,
    ):
        if not examples.positives or not examples.negatives:
            raise InputError("feature scorer needs both positive and negative examples")
        end = _resolve_train_end(stream, train_end)
        self._build_index(stream, end)
        from .sampling import triples_to_arrays

        pu, pv, pt = triples_to_arrays(examples.positives)
        nu, nv, nt = triples_to_arrays(examples.negatives)
        x = np.vstack([self._features(pu, pv, pt), self._features(nu, nv, nt)])
        y = np.concatenate(
            [np.ones(len(pu)), np.zeros(len(nu))]
        )
        rng = np.random.default_rng(self.seed)
        weights = rng.normal(0.0, 0.01, size=x.shape[1])
        bias = 0.0
        losses: list[float] = []
        for _ in range(self.iterations):
            logits = x @ weights + bias
            loss = bce_loss(logits, y)
            if not math.isfinite(loss):
                raise InputError(
                    f"training diverged (non-finite loss) at learning rate "
                    f"{self.learning_rate}"
                )
            losses.append(loss)
            grad_w, grad_b = bce_gradient(x, logits, y)
            weights = weights - self.learning_rate * grad_w
            bias = bias - self.learning_rate * grad_b
        self.weights_ = weights
        self.bias_ = bias
        self.loss_curve_ = losses
        return self

    def predict_scores(self, queries, model_id: str | None = None) -> PredictionSet:
        qu, qv, qt = queries
        x = self._features(qu, qv, qt)
        scores = _sigmoid(x @ self.weights_ + self.bias_)
        return PredictionSet(qu, qv, qt, scores, model_id or "feature")


BASELINE_NAMES = ("edgebank", "recency", "popularity", "feature")


def make_baseline(name: str, **params):
    if name == "edgebank":
        return EdgeBank(**params)
    if name == "recency":
        return RecencyScorer(**params)
    if name == "popularity":
        return PopularityScorer(**params)
    if name == "feature":
        return FeatureScorer(**params)
    raise InputError(f"unknown baseline {name!r}; expected one of {BASELINE_NAMES}")
