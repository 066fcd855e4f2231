"""Embedding backends for the sidecar.

Two encoders sit behind one interface: ``ClipEncoder`` wraps a real
pre-trained CLIP-class checkpoint (needs downloadable weights), and
``HashEncoder`` is a deterministic, dependency-free stand-in that keeps
the service and its protocol fully testable offline. Both return
unit-norm float32 vectors.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np

_M64 = (1 << 64) - 1


class Encoder(Protocol):
    name: str
    dim: int

    def embed_image(self, image) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


def _hash_vector(payload: bytes, dim: int) -> np.ndarray:
    """Deterministic unit vector: SHA-256 seed, splitmix64 stream, [-1, 1) map."""
    state = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
    values = np.empty(dim, dtype=np.float64)
    for i in range(dim):
        state = (state + 0x9E3779B97F4A7C15) & _M64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        values[i] = (z ^ (z >> 31)) / 2.0**63 - 1.0
    return (values / np.sqrt(np.dot(values, values))).astype(np.float32)


class HashEncoder:
    """Model-free encoder hashing decoded pixels (or text bytes)."""

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.name = f"hash-{dim}"
        self.dim = dim

    def embed_image(self, image) -> np.ndarray:
        rgb = image.convert("RGB")
        header = f"image:{rgb.width}x{rgb.height}:".encode()
        return _hash_vector(header + rgb.tobytes(), self.dim)

    def embed_text(self, text: str) -> np.ndarray:
        return _hash_vector(b"text:" + text.encode("utf-8"), self.dim)


class ClipEncoder:
    """CLIP-class checkpoint via sentence-transformers, run deterministically."""

    def __init__(self, model_name: str = "clip-ViT-B-32", device: str = "cpu"):
        from sentence_transformers import SentenceTransformer

        self.name = model_name
        self._model = SentenceTransformer(model_name, device=device)
        self._model.eval()
        probe = self._model.encode(["probe"], convert_to_numpy=True)
        self.dim = int(probe.shape[1])

    def _unit(self, vec: np.ndarray) -> np.ndarray:
        v = np.asarray(vec, dtype=np.float64).reshape(-1)
        return (v / np.sqrt(np.dot(v, v))).astype(np.float32)

    def embed_image(self, image) -> np.ndarray:
        return self._unit(self._model.encode([image.convert("RGB")], convert_to_numpy=True)[0])

    def embed_text(self, text: str) -> np.ndarray:
        return self._unit(self._model.encode([text], convert_to_numpy=True)[0])


def make_encoder(model: str, dim: int, device: str = "cpu") -> Encoder:
    """Encoder factory: ``hash`` selects the offline backend, anything else
    is treated as a checkpoint name for ClipEncoder."""
    if model == "hash":
        return HashEncoder(dim)
    return ClipEncoder(model, device=device)


def fuse_unit_mean(image_vec: np.ndarray, text_vec: np.ndarray) -> np.ndarray:
    """Pinned image-text fusion: mean of the two unit vectors, renormalized."""
    merged = (image_vec.astype(np.float64) + text_vec.astype(np.float64)) / 2.0
    norm = np.sqrt(np.dot(merged, merged))
    if norm == 0.0:
        raise ValueError("image and text embeddings cancel exactly; cannot fuse")
    return (merged / norm).astype(np.float32)
