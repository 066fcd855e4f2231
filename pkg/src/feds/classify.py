"""Nearest-centroid classification under cosine similarity or L2 distance.

A query is scored against every class centroid and assigned to the class
with the highest cosine similarity (or lowest L2 distance). Scores are
reported raw: cosine in [-1, 1] descending, L2 in [0, inf) ascending;
score ties rank the lexicographically smaller label first so results are
deterministic across runs and platforms.

``CentroidClassifier`` wraps the same logic in a scikit-learn estimator
(fit/predict/get_params) so it composes with pipelines and model
selection utilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .exceptions import DimensionMismatch, FedsError, NoClasses, ValidationError
from .pooling import ClassCentroid, DocumentEmbedding, build_class_centroids
from .vectors import check_matrix, check_measure, check_vector, cosine_similarity, l2_distance


@dataclass(frozen=True)
class ClassificationResult:
    """Predicted class plus the full ranking of all classes with raw scores."""

    predicted_label: str
    ranking: tuple[tuple[str, float], ...]
    measure: str
    query_dim: int


@dataclass(frozen=True)
class BatchItem:
    """One classify_batch output: a result or an error message, never both."""

    doc_id: str
    result: ClassificationResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def classify(query, centroids: Sequence[ClassCentroid], measure: str = "cosine") -> ClassificationResult:
    """Rank every centroid against ``query`` and pick the best class."""
    check_measure(measure)
    if len(centroids) == 0:
        raise NoClasses("no class centroids to classify against")
    labels = [c.label for c in centroids]
    if len(set(labels)) != len(labels):
        raise ValidationError("centroid labels must be unique")
    q = check_vector(query, name="query")
    dim = centroids[0].dim
    if q.size != dim:
        raise DimensionMismatch(f"query has dim {q.size}, centroids have dim {dim}")
    kernel = cosine_similarity if measure == "cosine" else l2_distance
    scored = [(c.label, kernel(q, c.vector)) for c in centroids]
    if measure == "cosine":
        ranking = sorted(scored, key=lambda t: (-t[1], t[0]))
    else:
        ranking = sorted(scored, key=lambda t: (t[1], t[0]))
    return ClassificationResult(
        predicted_label=ranking[0][0],
        ranking=tuple(ranking),
        measure=measure,
        query_dim=int(q.size),
    )


def classify_batch(
    queries: Sequence[tuple[str, object]],
    centroids: Sequence[ClassCentroid],
    measure: str = "cosine",
) -> list[BatchItem]:
    """Classify many (doc_id, vector) queries; failures do not abort the batch.

    Output order equals input order; each successful element equals the
    single-query ``classify`` on that vector.
    """
    out = []
    for doc_id, vec in queries:
        try:
            out.append(BatchItem(doc_id=doc_id, result=classify(vec, centroids, measure)))
        except FedsError as e:
            out.append(BatchItem(doc_id=doc_id, error=str(e)))
    return out


class CentroidClassifier(BaseEstimator, ClassifierMixin):
    """scikit-learn estimator for nearest-centroid classification.

    Parameters
    ----------
    measure : {"cosine", "l2"}, default="cosine"
        Similarity measure used both to rank classes and to predict.

    Attributes
    ----------
    classes_ : ndarray of shape (n_classes,)
        Class labels in lexicographic order.
    centroids_ : ndarray of shape (n_classes, dim), float32
        Un-normalized per-class mean embeddings, row-aligned with classes_.
    member_counts_ : ndarray of shape (n_classes,)
        Number of training documents behind each centroid.
    """

    def __init__(self, measure: str = "cosine"):
        self.measure = measure

    def fit(self, X, y):
        check_measure(self.measure)
        X = check_matrix(X, name="X")
        y = np.asarray(y)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValidationError("y must be 1-D with one label per row of X")
        samples = [
            (DocumentEmbedding(vector=row, doc_id=str(i), page_count=1), str(label))
            for i, (row, label) in enumerate(zip(X, y))
        ]
        cents = build_class_centroids(samples)
        self.classes_ = np.array([c.label for c in cents])
        self.centroids_ = np.stack([c.vector for c in cents])
        self.member_counts_ = np.array([c.member_count for c in cents])
        self.dim_ = int(X.shape[1])
        return self

    def _centroid_objects(self) -> list[ClassCentroid]:
        if not hasattr(self, "classes_"):
            raise ValidationError("estimator is not fitted; call fit first")
        return [
            ClassCentroid(vector=v, label=str(l), member_count=int(m))
            for v, l, m in zip(self.centroids_, self.classes_, self.member_counts_)
        ]

    def rank(self, query) -> ClassificationResult:
        """Full ranked result for one query vector."""
        return classify(query, self._centroid_objects(), self.measure)

    def predict(self, X):
        X = check_matrix(X, name="X")
        cents = self._centroid_objects()
        return np.array([classify(row, cents, self.measure).predicted_label for row in X])
