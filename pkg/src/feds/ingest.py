"""Document ingestion: page payloads -> page embeddings -> document embeddings.

Documents arrive as a JSON manifest pointing at already-rendered page
files (rasterization is an upstream concern); each page is embedded by a
pluggable provider and the page embeddings are pooled per document. A
failed document is reported and skipped so one corrupt file cannot sink a
batch.

Manifest schema (UTF-8 JSON, page paths relative to the manifest file):

    {
      "dim": int,
      "provider": {"kind": "mock" | "http", "url"?: str},
      "documents": [
        {
          "doc_id": str,
          "label"?: str,
          "pages": [{"path": str, "text_hint"?: str}],
          "page_weights"?: [num, ...]
        }
      ]
    }

The mock provider is fully pinned (SHA-256 seed, splitmix64 stream,
uniform map to [-1, 1), unit normalization) so independent
implementations produce bit-identical integer streams; it lets the whole
pipeline run and be tested with no model behind it.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import requests

from .exceptions import (
    ContentRejected,
    ManifestError,
    ProviderBadResponse,
    ProviderError,
    ProviderUnavailable,
    StoreError,
    ValidationError,
)
from .pooling import DocumentEmbedding, PageEmbedding, build_document_embedding, check_weights

_M64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (output, next_state)."""
    state = (state + 0x9E3779B97F4A7C15) & _M64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31), state


def mock_embed_u64(content: bytes, text_hint: str | None, dim: int) -> list[int]:
    """The integer stage of the mock embedder: dim splitmix64 outputs.

    The seed is the first 8 bytes of SHA-256(content || 0x00 || hint-bytes)
    read as a little-endian u64.
    """
    hint_bytes = text_hint.encode("utf-8") if text_hint is not None else b""
    digest = hashlib.sha256(content + b"\x00" + hint_bytes).digest()
    state = int.from_bytes(digest[:8], "little")
    out = []
    for _ in range(dim):
        value, state = splitmix64(state)
        out.append(value)
    return out


def mock_embed(content: bytes, text_hint: str | None, dim: int) -> np.ndarray:
    """Deterministic unit-norm embedding of arbitrary bytes."""
    if dim < 2:
        raise ValidationError("mock embeddings need dim >= 2")
    words = mock_embed_u64(content, text_hint, dim)
    values = np.array([w / 2.0**63 - 1.0 for w in words], dtype=np.float64)
    norm = np.sqrt(np.dot(values, values))
    if norm == 0.0:
        raise ValidationError("degenerate all-zero mock embedding")
    return (values / norm).astype(np.float32)


@dataclass(frozen=True)
class PagePayload:
    """One rendered page: raw bytes plus an optional textual prompt."""

    doc_id: str
    page_index: int
    content: bytes
    text_hint: str | None = None

    def __post_init__(self):
        if len(self.content) == 0:
            raise ContentRejected(f"empty page content ({self.doc_id} page {self.page_index})")
        if self.page_index < 0:
            raise ValidationError("page_index must be nonnegative")


class EmbeddingProvider(Protocol):
    name: str
    dim: int

    def embed(self, content: bytes, text_hint: str | None) -> np.ndarray: ...


class MockProvider:
    """Model-free provider backed by the pinned hash pipeline."""

    def __init__(self, dim: int):
        self.name = "mock"
        self.dim = dim

    def embed(self, content: bytes, text_hint: str | None) -> np.ndarray:
        return mock_embed(content, text_hint, self.dim)


class HttpProvider:
    """Client for the sidecar protocol: POST {url}/embed.

    Request: {"content_b64": str, "text_hint": str|null, "dim": int}
    Response 200: {"vector": [num x dim], "model": str}
    Any non-200 status maps to ProviderUnavailable; a well-formed response
    with the wrong dim or non-finite values maps to ProviderBadResponse.
    """

    def __init__(self, url: str, dim: int, retries: int = 0, timeout: float = 30.0):
        self.name = f"http:{url}"
        self.url = url.rstrip("/")
        self.dim = dim
        self.retries = retries
        self.timeout = timeout

    def embed(self, content: bytes, text_hint: str | None) -> np.ndarray:
        payload = {
            "content_b64": base64.b64encode(content).decode("ascii"),
            "text_hint": text_hint,
            "dim": self.dim,
        }
        last_error = None
        for _ in range(self.retries + 1):
            try:
                resp = requests.post(f"{self.url}/embed", json=payload, timeout=self.timeout)
            except requests.RequestException as e:
                last_error = ProviderUnavailable(f"embed request failed: {e}")
                continue
            if resp.status_code != 200:
                last_error = ProviderUnavailable(f"embed endpoint returned {resp.status_code}")
                continue
            try:
                body = resp.json()
                vector = np.asarray(body["vector"], dtype=np.float32)
            except (ValueError, KeyError, TypeError) as e:
                raise ProviderBadResponse(f"malformed embed response: {e}") from None
            if vector.ndim != 1 or vector.size != self.dim:
                raise ProviderBadResponse(f"expected dim {self.dim}, got shape {vector.shape}")
            if not np.all(np.isfinite(vector)):
                raise ProviderBadResponse("embed response contains non-finite values")
            return vector
        raise last_error


def make_provider(descriptor: dict, dim: int, retries: int = 0):
    kind = descriptor.get("kind")
    if kind == "mock":
        return MockProvider(dim)
    if kind == "http":
        url = descriptor.get("url")
        if not url:
            raise ManifestError("http provider requires a url")
        return HttpProvider(url, dim, retries=retries)
    raise ManifestError(f"unknown provider kind {kind!r}")


def embed_page(provider, payload: PagePayload) -> PageEmbedding:
    """Embed one page via the provider, validating the returned vector."""
    vector = provider.embed(payload.content, payload.text_hint)
    v = np.asarray(vector, dtype=np.float32)
    if v.ndim != 1 or v.size != provider.dim:
        raise ProviderBadResponse(f"provider returned shape {v.shape}, expected ({provider.dim},)")
    if not np.all(np.isfinite(v)):
        raise ProviderBadResponse("provider returned non-finite values")
    return PageEmbedding(vector=v, page_index=payload.page_index, source_id=payload.doc_id)


@dataclass(frozen=True)
class ManifestEntry:
    doc_id: str
    pages: tuple[dict, ...]
    label: str | None = None
    page_weights: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Manifest:
    dim: int
    provider: dict
    entries: tuple[ManifestEntry, ...]
    base_dir: str = "."


def load_manifest(path, require_labels: bool = False) -> Manifest:
    """Parse and validate a manifest JSON file."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ManifestError(f"manifest is not valid JSON: {e}") from None
    return parse_manifest(raw, base_dir=os.path.dirname(os.path.abspath(path)), require_labels=require_labels)


def parse_manifest(raw: dict, base_dir: str = ".", require_labels: bool = False) -> Manifest:
    if not isinstance(raw, dict):
        raise ManifestError("manifest must be a JSON object")
    dim = raw.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise ManifestError("manifest dim must be a positive integer")
    provider = raw.get("provider")
    if not isinstance(provider, dict) or "kind" not in provider:
        raise ManifestError("manifest provider must be an object with a kind")
    documents = raw.get("documents")
    if not isinstance(documents, list) or not documents:
        raise ManifestError("manifest must list at least one document")

    entries = []
    seen_pages: set[tuple[str, int]] = set()
    for pos, doc in enumerate(documents):
        if not isinstance(doc, dict) or not isinstance(doc.get("doc_id"), str):
            raise ManifestError(f"document #{pos} needs a string doc_id")
        doc_id = doc["doc_id"]
        pages = doc.get("pages")
        if not isinstance(pages, list) or not pages:
            raise ManifestError(f"document {doc_id!r} needs a nonempty pages list")
        for i, page in enumerate(pages):
            if not isinstance(page, dict) or not isinstance(page.get("path"), str):
                raise ManifestError(f"document {doc_id!r} page #{i} needs a string path")
            hint = page.get("text_hint")
            if hint is not None and not isinstance(hint, str):
                raise ManifestError(f"document {doc_id!r} page #{i} text_hint must be a string")
            if (doc_id, i) in seen_pages:
                raise ManifestError(f"duplicate (doc_id, page_index) ({doc_id!r}, {i})")
            seen_pages.add((doc_id, i))
        label = doc.get("label")
        if label is not None and not isinstance(label, str):
            raise ManifestError(f"document {doc_id!r} label must be a string")
        if require_labels and label is None:
            raise ManifestError(f"document {doc_id!r} is missing the required label")
        weights = doc.get("page_weights")
        if weights is not None:
            try:
                weights = tuple(float(w) for w in weights)
            except (TypeError, ValueError):
                raise ManifestError(f"document {doc_id!r} page_weights must be numbers") from None
            check_weights(weights, len(pages))
        entries.append(
            ManifestEntry(
                doc_id=doc_id,
                pages=tuple(pages),
                label=label,
                page_weights=weights,
            )
        )
    doc_ids = [e.doc_id for e in entries]
    if len(set(doc_ids)) != len(doc_ids):
        raise ManifestError("doc_id values must be unique")
    return Manifest(dim=dim, provider=provider, entries=tuple(entries), base_dir=base_dir)


@dataclass(frozen=True)
class IngestFailure:
    doc_id: str
    error: str
    category: str = "internal"  # one of: io, provider, validation, internal


def _failure_category(error: Exception) -> str:
    if isinstance(error, ProviderError):
        return "provider"
    if isinstance(error, (OSError, StoreError)):
        return "io"
    if isinstance(error, ValidationError):
        return "validation"
    return "internal"


@dataclass
class IngestReport:
    documents: list[tuple[DocumentEmbedding, str | None]] = field(default_factory=list)
    failures: list[IngestFailure] = field(default_factory=list)


def _load_payloads(manifest: Manifest, entry: ManifestEntry) -> list[PagePayload]:
    payloads = []
    for i, page in enumerate(entry.pages):
        path = os.path.join(manifest.base_dir, page["path"])
        with open(path, "rb") as f:
            content = f.read()
        payloads.append(
            PagePayload(
                doc_id=entry.doc_id,
                page_index=i,
                content=content,
                text_hint=page.get("text_hint"),
            )
        )
    return payloads


def ingest_manifest(
    manifest: Manifest,
    provider,
    aggregation: str = "mean",
    parallelism: int = 1,
) -> IngestReport:
    """Embed and aggregate every manifest document.

    Output order is manifest order; a document that fails (unreadable
    page, provider error, bad weights) lands in ``failures`` and the rest
    proceed. Page-embedding calls run on up to ``parallelism`` threads.
    """
    if aggregation not in ("mean", "weighted"):
        raise ValidationError(f"aggregation must be mean or weighted, got {aggregation!r}")
    if provider.dim != manifest.dim:
        raise ValidationError(f"provider dim {provider.dim} != manifest dim {manifest.dim}")

    def one_document(entry: ManifestEntry) -> DocumentEmbedding:
        if aggregation == "weighted" and entry.page_weights is None:
            raise ValidationError(f"document {entry.doc_id!r} has no page_weights")
        payloads = _load_payloads(manifest, entry)
        pages = [embed_page(provider, p) for p in payloads]
        weights = entry.page_weights if aggregation == "weighted" else None
        return build_document_embedding(pages, weights=weights)

    report = IngestReport()
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(one_document, e) for e in manifest.entries]
            outcomes = []
            for entry, fut in zip(manifest.entries, futures):
                try:
                    outcomes.append((entry, fut.result(), None))
                except Exception as e:
                    outcomes.append((entry, None, e))
    else:
        outcomes = []
        for entry in manifest.entries:
            try:
                outcomes.append((entry, one_document(entry), None))
            except Exception as e:
                outcomes.append((entry, None, e))

    for entry, doc, error in outcomes:
        if error is None:
            report.documents.append((doc, entry.label))
        else:
            report.failures.append(
                IngestFailure(doc_id=entry.doc_id, error=str(error), category=_failure_category(error))
            )
    return report
