"""feds: nearest-centroid document classification over multi-modal embeddings.

Labeled documents are embedded page by page, pooled into document and
class embeddings, persisted in the FEDS binary store, and new documents
are assigned to the class whose centroid is nearest under cosine
similarity or L2 distance. A flat scan and an IVF-flat index serve
similarity search over the stored samples.
"""

__version__ = "0.1.0"

from .classify import (
    BatchItem,
    CentroidClassifier,
    ClassificationResult,
    classify,
    classify_batch,
)
from .evaluate import (
    ConfusionMatrix,
    EvaluationResult,
    MetricsReport,
    SplitSpec,
    compute_metrics,
    run_evaluation,
    stratified_split,
)
from .exceptions import FedsError, ProviderError, StoreError, ValidationError
from .index import FlatIndex, IvfFlatIndex, SearchHit, load_ivf_index, save_ivf_index
from .ingest import (
    EmbeddingProvider,
    HttpProvider,
    Manifest,
    MockProvider,
    PagePayload,
    embed_page,
    ingest_manifest,
    load_manifest,
    mock_embed,
    parse_manifest,
)
from .pooling import (
    ClassCentroid,
    DocumentEmbedding,
    PageEmbedding,
    build_class_centroids,
    build_document_embedding,
    mean_pool,
    weighted_pool,
)
from .store import read_store, write_store
from .vectors import cosine_similarity, l2_distance, l2_norm

__all__ = [
    "BatchItem",
    "CentroidClassifier",
    "ClassCentroid",
    "ClassificationResult",
    "ConfusionMatrix",
    "DocumentEmbedding",
    "EmbeddingProvider",
    "EvaluationResult",
    "FedsError",
    "FlatIndex",
    "HttpProvider",
    "IvfFlatIndex",
    "Manifest",
    "MetricsReport",
    "MockProvider",
    "PageEmbedding",
    "PagePayload",
    "ProviderError",
    "SearchHit",
    "SplitSpec",
    "StoreError",
    "ValidationError",
    "build_class_centroids",
    "build_document_embedding",
    "classify",
    "classify_batch",
    "compute_metrics",
    "cosine_similarity",
    "embed_page",
    "ingest_manifest",
    "l2_distance",
    "l2_norm",
    "load_ivf_index",
    "load_manifest",
    "mean_pool",
    "mock_embed",
    "parse_manifest",
    "read_store",
    "run_evaluation",
    "save_ivf_index",
    "stratified_split",
    "weighted_pool",
    "write_store",
]
