"""Two-level embedding aggregation.

Page embeddings are pooled into one document embedding, and labeled
document embeddings are pooled into one centroid per class, either by
element-wise mean or by weighted averaging with caller-supplied
nonnegative weights. Aggregation order is canonical (pages by page_index,
documents in input order, classes lexicographic by label) so rebuilt
centroids are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .exceptions import (
    AllZeroWeights,
    DimensionMismatch,
    EmptyInput,
    LengthMismatch,
    MissingWeight,
    ValidationError,
)
from .vectors import check_vector

AGGREGATIONS = ("mean", "weighted")


@dataclass(frozen=True)
class PageEmbedding:
    """Embedding of one page of one document."""

    vector: np.ndarray
    page_index: int
    source_id: str

    def __post_init__(self):
        object.__setattr__(self, "vector", check_vector(self.vector))
        if self.page_index < 0:
            raise ValidationError("page_index must be nonnegative")


@dataclass(frozen=True)
class DocumentEmbedding:
    """Aggregated embedding of a whole document."""

    vector: np.ndarray
    doc_id: str
    page_count: int
    aggregation: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "vector", check_vector(self.vector))
        if self.page_count < 1:
            raise ValidationError("page_count must be >= 1")
        if self.aggregation not in AGGREGATIONS:
            raise ValidationError(f"aggregation must be one of {AGGREGATIONS}")

    @property
    def dim(self) -> int:
        return int(self.vector.size)


@dataclass(frozen=True)
class ClassCentroid:
    """Per-class embedding with its label and member count."""

    vector: np.ndarray
    label: str
    member_count: int

    def __post_init__(self):
        object.__setattr__(self, "vector", check_vector(self.vector))
        if self.member_count < 1:
            raise ValidationError("member_count must be >= 1")

    @property
    def dim(self) -> int:
        return int(self.vector.size)


def _stack(items: Sequence, what: str) -> np.ndarray:
    if len(items) == 0:
        raise EmptyInput(f"cannot pool an empty sequence of {what}")
    rows = [check_vector(v, name=f"{what}[{i}]") for i, v in enumerate(items)]
    dim = rows[0].size
    for i, r in enumerate(rows):
        if r.size != dim:
            raise DimensionMismatch(f"{what}[{i}] has dim {r.size}, expected {dim}")
    return np.stack(rows)


def check_weights(weights, count: int) -> np.ndarray:
    """Validate a weight vector: finite, nonnegative, right length, not all zero."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size != count:
        raise LengthMismatch(f"expected {count} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights contain non-finite values")
    if np.any(w < 0):
        raise ValidationError("weights must be nonnegative")
    if not np.any(w > 0):
        raise AllZeroWeights("at least one weight must be strictly positive")
    return w


def mean_pool(items: Sequence) -> np.ndarray:
    """Element-wise average of equal-dimension vectors, float64 accumulation."""
    m = _stack(items, "items")
    return m.astype(np.float64).mean(axis=0).astype(np.float32)


def weighted_pool(items: Sequence, weights) -> np.ndarray:
    """Weighted element-wise average: sum_i w_i v_i / sum_i w_i."""
    m = _stack(items, "items")
    w = check_weights(weights, m.shape[0])
    out = (m.astype(np.float64) * w[:, None]).sum(axis=0) / w.sum()
    return out.astype(np.float32)


def build_document_embedding(
    pages: Sequence[PageEmbedding],
    weights=None,
) -> DocumentEmbedding:
    """Aggregate one document's page embeddings into a DocumentEmbedding.

    Pages are sorted by page_index before pooling (weights, when given,
    are paired with the pages as passed and travel with them through the
    sort). ``weights=None`` selects mean pooling.
    """
    if len(pages) == 0:
        raise EmptyInput("document has no pages")
    order = sorted(range(len(pages)), key=lambda i: pages[i].page_index)
    vectors = [pages[i].vector for i in order]
    doc_id = pages[0].source_id
    if weights is None:
        vec = mean_pool(vectors)
        mode = "mean"
    else:
        w = check_weights(weights, len(pages))
        vec = weighted_pool(vectors, w[order])
        mode = "weighted"
    return DocumentEmbedding(
        vector=vec, doc_id=doc_id, page_count=len(pages), aggregation=mode
    )


def build_class_centroids(
    samples: Sequence[tuple[DocumentEmbedding, str]],
    doc_weights: Mapping[str, float] | None = None,
) -> list[ClassCentroid]:
    """One centroid per distinct label, in lexicographic label order.

    ``doc_weights`` switches the per-class pooling to a weighted average
    keyed by doc_id; every document in ``samples`` must then have a weight.
    """
    if len(samples) == 0:
        raise EmptyInput("no labeled samples")
    groups: dict[str, list[DocumentEmbedding]] = {}
    for doc, label in samples:
        groups.setdefault(label, []).append(doc)
    centroids = []
    for label in sorted(groups):
        docs = groups[label]
        vectors = [d.vector for d in docs]
        if doc_weights is None:
            vec = mean_pool(vectors)
        else:
            try:
                w = [doc_weights[d.doc_id] for d in docs]
            except KeyError as e:
                raise MissingWeight(f"no weight for doc_id {e.args[0]!r}") from None
            vec = weighted_pool(vectors, w)
        centroids.append(ClassCentroid(vector=vec, label=label, member_count=len(docs)))
    return centroids
