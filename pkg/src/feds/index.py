"""Similarity search over stored sample embeddings.

``FlatIndex`` is the exact exhaustive scan and doubles as the oracle for
``IvfFlatIndex``, an inverted-file index whose coarse quantizer is a
seeded Lloyd's k-means. Queries against the IVF index scan only the
``nprobe`` partitions with the nearest coarse centroids and return the
exact top-k within that subset; with nprobe == nlist the result is
identical to the flat scan.

Hits are ordered best-first with (score, id) ties resolved toward the
lower id, which makes result lists canonical regardless of insertion
order. Coarse assignment always uses L2 whatever the query measure, so
partition contents do not depend on how the index is queried.

Search is read-only and safe to run from many threads at once; train and
add require exclusive access (many readers XOR one writer). Deletion is
not supported: rebuild instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import store as store_mod
from .exceptions import (
    BadNprobe,
    DimensionMismatch,
    DuplicateId,
    NotTrained,
    StoreError,
    TooFewVectors,
    ValidationError,
)
from .vectors import batch_scores, check_matrix, check_measure, check_vector

KMEANS_MAX_ITERS = 25


@dataclass(frozen=True)
class SearchHit:
    id: int
    label_id: int
    score: float
    measure: str


def _top_hits(ids, label_ids, scores, k: int, measure: str) -> list[SearchHit]:
    key = -scores if measure == "cosine" else scores
    order = np.lexsort((ids, key))[:k]
    return [
        SearchHit(id=int(ids[i]), label_id=int(label_ids[i]), score=float(scores[i]), measure=measure)
        for i in order
    ]


class FlatIndex:
    """Exact nearest-neighbor search by exhaustive scan."""

    def __init__(self, dim: int):
        if dim < 1:
            raise DimensionMismatch("dim must be positive")
        self.dim = dim
        self._ids: list[int] = []
        self._label_ids: list[int] = []
        self._rows: list[np.ndarray] = []
        self._id_set: set[int] = set()
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._ids)

    def add(self, id: int, vector, label_id: int = 0) -> None:
        if id in self._id_set:
            raise DuplicateId(f"id {id} already present")
        v = check_vector(vector, dim=self.dim)
        self._ids.append(int(id))
        self._label_ids.append(int(label_id))
        self._rows.append(v)
        self._id_set.add(id)
        self._matrix = None

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = (
                np.stack(self._rows) if self._rows else np.empty((0, self.dim), np.float32)
            )
        return self._matrix

    def search(self, query, k: int, measure: str = "cosine") -> list[SearchHit]:
        check_measure(measure)
        if k < 1:
            raise ValidationError("k must be >= 1")
        q = check_vector(query, dim=self.dim, name="query")
        if not self._ids:
            return []
        scores = batch_scores(self.matrix(), q, measure)
        return _top_hits(np.array(self._ids), np.array(self._label_ids), scores, k, measure)

    @classmethod
    def from_samples(cls, samples, dim: int) -> "FlatIndex":
        index = cls(dim)
        for s in samples:
            index.add(s.id, s.vector, s.label_id)
        return index


def _distinct_sample(matrix: np.ndarray, nlist: int, rng: np.random.Generator) -> np.ndarray:
    """nlist initial centroids drawn from the data, value-distinct when possible."""
    order = rng.permutation(matrix.shape[0])
    chosen: list[int] = []
    for i in order:
        if all(not np.array_equal(matrix[i], matrix[j]) for j in chosen):
            chosen.append(int(i))
            if len(chosen) == nlist:
                break
    for i in order:  # not enough distinct values: fill with duplicates
        if len(chosen) == nlist:
            break
        if i not in chosen:
            chosen.append(int(i))
    return matrix[chosen].copy()


def _assign(matrix: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest coarse centroid per row by L2, ties to the lowest index."""
    d2 = np.empty((matrix.shape[0], centroids.shape[0]))
    m = matrix.astype(np.float64)
    for j in range(centroids.shape[0]):
        diff = m - centroids[j].astype(np.float64)
        d2[:, j] = (diff * diff).sum(axis=1)
    return d2.argmin(axis=1)


def kmeans_centroids(matrix: np.ndarray, nlist: int, seed: int) -> np.ndarray:
    """Seeded Lloyd's k-means, fixed at 25 iterations or assignment convergence.

    Empty clusters are repaired by re-seeding from the point farthest from
    its own centroid.
    """
    rng = np.random.default_rng(seed)
    centroids = _distinct_sample(matrix, nlist, rng)
    prev = None
    for _ in range(KMEANS_MAX_ITERS):
        assign = _assign(matrix, centroids)
        if prev is not None and np.array_equal(assign, prev):
            break
        for j in range(nlist):
            members = assign == j
            if members.any():
                centroids[j] = matrix[members].astype(np.float64).mean(axis=0).astype(np.float32)
        empty = [j for j in range(nlist) if not (assign == j).any()]
        if empty:
            own = np.sqrt(
                ((matrix.astype(np.float64) - centroids[assign].astype(np.float64)) ** 2).sum(axis=1)
            )
            for j in empty:
                i = int(own.argmax())
                centroids[j] = matrix[i]
                assign[i] = j
                own[i] = 0.0
        prev = assign
    return centroids


class IvfFlatIndex:
    """IVF-flat index: k-means coarse quantizer plus probed posting lists."""

    def __init__(self, dim: int, nlist: int):
        if dim < 1:
            raise DimensionMismatch("dim must be positive")
        if nlist < 1:
            raise ValidationError("nlist must be >= 1")
        self.dim = dim
        self.nlist = nlist
        self.trained = False
        self.centroids: np.ndarray | None = None
        self._part_ids: list[list[int]] = [[] for _ in range(nlist)]
        self._part_label_ids: list[list[int]] = [[] for _ in range(nlist)]
        self._part_rows: list[list[np.ndarray]] = [[] for _ in range(nlist)]
        self._part_matrix: list[np.ndarray | None] = [None] * nlist
        self._id_set: set[int] = set()

    def __len__(self) -> int:
        return len(self._id_set)

    @classmethod
    def train(cls, vectors, nlist: int, seed: int) -> "IvfFlatIndex":
        """Build a trained, empty index: coarse centroids only."""
        if nlist < 1:
            raise ValidationError("nlist must be >= 1")
        if isinstance(vectors, np.ndarray):
            matrix = check_matrix(vectors)
        else:
            rows = [check_vector(v) for v in vectors]
            if len(rows) < nlist:
                raise TooFewVectors(f"need at least nlist={nlist} vectors, got {len(rows)}")
            matrix = check_matrix(np.stack(rows))
        if matrix.shape[0] < nlist:
            raise TooFewVectors(f"need at least nlist={nlist} vectors, got {matrix.shape[0]}")
        index = cls(matrix.shape[1], nlist)
        index.centroids = kmeans_centroids(matrix, nlist, seed)
        index.trained = True
        return index

    def _nearest_partition(self, vector: np.ndarray) -> int:
        dists = batch_scores(self.centroids, vector, "l2")
        return int(dists.argmin())

    def add(self, id: int, vector, label_id: int = 0) -> None:
        if not self.trained:
            raise NotTrained("train the index before adding entries")
        if id in self._id_set:
            raise DuplicateId(f"id {id} already present")
        v = check_vector(vector, dim=self.dim)
        p = self._nearest_partition(v)
        self._part_ids[p].append(int(id))
        self._part_label_ids[p].append(int(label_id))
        self._part_rows[p].append(v)
        self._part_matrix[p] = None
        self._id_set.add(id)

    def partition_sizes(self) -> list[int]:
        return [len(ids) for ids in self._part_ids]

    def _matrix_for(self, p: int) -> np.ndarray:
        if self._part_matrix[p] is None:
            rows = self._part_rows[p]
            self._part_matrix[p] = (
                np.stack(rows) if rows else np.empty((0, self.dim), np.float32)
            )
        return self._part_matrix[p]

    def search(self, query, k: int, nprobe: int, measure: str = "cosine") -> list[SearchHit]:
        """Exact top-k within the nprobe partitions nearest to the query."""
        check_measure(measure)
        if not self.trained:
            raise NotTrained("train the index before searching")
        if not 1 <= nprobe <= self.nlist:
            raise BadNprobe(f"nprobe must be in [1, {self.nlist}], got {nprobe}")
        if k < 1:
            raise ValidationError("k must be >= 1")
        q = check_vector(query, dim=self.dim, name="query")
        coarse = batch_scores(self.centroids, q, "l2")
        probes = np.lexsort((np.arange(self.nlist), coarse))[:nprobe]
        ids: list[np.ndarray] = []
        label_ids: list[np.ndarray] = []
        scores: list[np.ndarray] = []
        for p in probes:
            if not self._part_ids[p]:
                continue
            ids.append(np.array(self._part_ids[p]))
            label_ids.append(np.array(self._part_label_ids[p]))
            scores.append(batch_scores(self._matrix_for(p), q, measure))
        if not ids:
            return []
        return _top_hits(
            np.concatenate(ids), np.concatenate(label_ids), np.concatenate(scores), k, measure
        )


def save_ivf_index(index: IvfFlatIndex, path) -> None:
    """Persist coarse centroids and partition assignments in a FEDS container.

    The label table holds the partition ordinals; entry vectors are not
    duplicated here in the index file and come from the classification
    store at load time.
    """
    if not index.trained:
        raise NotTrained("cannot save an untrained index")
    labels = [str(p) for p in range(index.nlist)]
    centroids = [
        store_mod.StoredCentroid(label_id=p, member_count=len(index._part_ids[p]), vector=index.centroids[p])
        for p in range(index.nlist)
    ]
    assignments = sorted(
        (
            store_mod.IvfAssignment(id=i, partition=p)
            for p in range(index.nlist)
            for i in index._part_ids[p]
        ),
        key=lambda a: a.id,
    )
    store_mod.write_container(path, index.dim, labels, centroids=centroids, assignments=assignments)


def load_ivf_index(path, samples) -> IvfFlatIndex:
    """Rebuild an IVF index from a saved container plus the store's samples."""
    dim, labels, stored_samples, centroids, assignments = store_mod.read_container(path)
    if stored_samples or not centroids or not assignments:
        raise StoreError("not an index file (expected centroid and assignment sections only)")
    nlist = len(centroids)
    index = IvfFlatIndex(dim, nlist)
    index.centroids = np.stack([c.vector for c in sorted(centroids, key=lambda c: c.label_id)])
    index.trained = True
    by_id = {s.id: s for s in samples}
    if set(by_id) != {a.id for a in assignments}:
        raise StoreError("index assignments do not match the supplied samples")
    for a in assignments:
        if not 0 <= a.partition < nlist:
            raise StoreError(f"assignment references partition {a.partition} of {nlist}")
        s = by_id[a.id]
        v = check_vector(s.vector, dim=dim)
        index._part_ids[a.partition].append(a.id)
        index._part_label_ids[a.partition].append(s.label_id)
        index._part_rows[a.partition].append(v)
        index._id_set.add(a.id)
    return index
