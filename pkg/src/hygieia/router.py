"""Common-vs-rare case routing: hashed text embeddings plus a KNN classifier.

The default embedding backend is a deterministic feature hasher: each token
of the concatenated phenotypes lands in one of d buckets with a +/-1 sign
derived from a stable digest, then the vector is L2-normalized. The KNN
model is a lazy learner storing every reference point verbatim.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from hashlib import blake2b
from pathlib import Path

from .errors import DimensionMismatch, EmptyTrainingSet, KTooLarge
from .model import PatientCase

DEFAULT_DIM = 256

_TOKEN_RE = re.compile(r"[\W_]+", re.UNICODE)


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding entries must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))


def _tokens(text: str) -> list[str]:
    return [t for t in _TOKEN_RE.split(text.lower()) if t]


class HashingEmbedder:
    """Offline, deterministic embedding backend."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def embed_text(self, text: str) -> EmbeddingVector:
        buckets = [0.0] * self.dim
        for token in _tokens(text):
            digest = blake2b(token.encode("utf-8"), digest_size=9).digest()
            value = int.from_bytes(digest[:8], "big")
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            buckets[value % self.dim] += sign
        norm = math.sqrt(sum(v * v for v in buckets))
        if norm > 0:
            buckets = [v / norm for v in buckets]
        return EmbeddingVector(tuple(buckets))

    def embed_case(self, case: PatientCase) -> EmbeddingVector:
        return self.embed_text(" ".join(case.phenotypes))


def embed_case(case: PatientCase, dim: int = DEFAULT_DIM) -> EmbeddingVector:
    return HashingEmbedder(dim).embed_case(case)


class Metric(str, Enum):
    COSINE = "Cosine"
    EUCLIDEAN = "Euclidean"


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise DimensionMismatch(f"{a.dim} vs {b.dim}")
    dot = sum(x * y for x, y in zip(a.values, b.values))
    na, nb = a.norm(), b.norm()
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def _distance(metric: Metric, a: EmbeddingVector, b: EmbeddingVector) -> float:
    if metric is Metric.COSINE:
        return 1.0 - cosine_similarity(a, b)
    if a.dim != b.dim:
        raise DimensionMismatch(f"{a.dim} vs {b.dim}")
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a.values, b.values)))


@dataclass(frozen=True)
class RouterModel:
    reference_points: tuple[tuple[EmbeddingVector, str], ...]
    knn_k: int
    metric: Metric
    label_set: tuple[str, ...]

    @property
    def dim(self) -> int:
        return self.reference_points[0][0].dim


@dataclass(frozen=True)
class RouteDecision:
    label: str
    score: float  # fraction of the k neighbors voting for label
    neighbor_ids: tuple[int, ...]  # reference indices, ascending distance


def fit_router(
    examples: list[tuple[EmbeddingVector, str]],
    knn_k: int = 5,
    metric: Metric = Metric.COSINE,
) -> RouterModel:
    """Store all examples verbatim; label_set keeps first-seen order."""
    if not examples:
        raise EmptyTrainingSet("router needs at least one example")
    if knn_k > len(examples):
        raise KTooLarge(f"knn_k={knn_k} exceeds {len(examples)} examples")
    dim = examples[0][0].dim
    for vec, _ in examples:
        if vec.dim != dim:
            raise DimensionMismatch(f"{vec.dim} vs {dim}")
    label_set: list[str] = []
    for _, label in examples:
        if label not in label_set:
            label_set.append(label)
    return RouterModel(
        reference_points=tuple((vec, label) for vec, label in examples),
        knn_k=knn_k,
        metric=metric,
        label_set=tuple(label_set),
    )


def classify(model: RouterModel, v: EmbeddingVector) -> RouteDecision:
    """Plurality vote over the k nearest references.

    Ties between labels break toward the smaller mean distance among each
    label's voting neighbors, then label_set order. Exact distance ties
    between references break toward the lower reference index.
    """
    if v.dim != model.dim:
        raise DimensionMismatch(f"query dim {v.dim} vs model dim {model.dim}")
    ranked = sorted(
        ((_distance(model.metric, v, ref), idx) for idx, (ref, _) in enumerate(model.reference_points)),
        key=lambda pair: (pair[0], pair[1]),
    )
    top = ranked[: model.knn_k]
    votes = Counter(model.reference_points[idx][1] for _, idx in top)
    best_count = max(votes.values())
    tied = [label for label, count in votes.items() if count == best_count]
    if len(tied) > 1:
        mean_dist = {
            label: sum(d for d, idx in top if model.reference_points[idx][1] == label) / votes[label]
            for label in tied
        }
        lowest = min(mean_dist.values())
        tied = [label for label in tied if mean_dist[label] == lowest]
        if len(tied) > 1:
            tied.sort(key=model.label_set.index)
    winner = tied[0]
    return RouteDecision(
        label=winner,
        score=votes[winner] / model.knn_k,
        neighbor_ids=tuple(idx for _, idx in top),
    )


def save_router(model: RouterModel, path: str | Path) -> None:
    doc = {
        "dim": model.dim,
        "metric": model.metric.value,
        "knn_k": model.knn_k,
        "labels": list(model.label_set),
        "points": [{"v": list(vec.values), "label": label} for vec, label in model.reference_points],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_router(path: str | Path) -> RouterModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    points = tuple(
        (EmbeddingVector(tuple(float(x) for x in p["v"])), p["label"]) for p in doc["points"]
    )
    return RouterModel(
        reference_points=points,
        knn_k=int(doc["knn_k"]),
        metric=Metric(doc["metric"]),
        label_set=tuple(doc["labels"]),
    )
