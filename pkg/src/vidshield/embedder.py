"""Frozen random-projection image embedder and cosine similarity.

The embedder stands in for a large pretrained vision encoder: it only
needs to give a stable, deterministic notion of image similarity, so a
seeded two-layer random projection with tanh and L2 normalization is
enough. ``sim`` is the shared cosine primitive, used both on embeddings
and directly on flattened latent tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ZeroVectorError(ValueError):
    """Cosine similarity is undefined for an all-zero vector."""


@dataclass
class EmbeddingVector:
    values: np.ndarray
    unit_norm: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.unit_norm:
            n = np.linalg.norm(self.values)
            if abs(n - 1.0) > 1e-9:
                raise ValueError(f"unit_norm embedding has norm {n}")


def _flatten(x) -> np.ndarray:
    if isinstance(x, EmbeddingVector):
        return x.values
    data = getattr(x, "data", None)
    if data is None:
        data = getattr(x, "pixels", x)
    return np.asarray(data, dtype=np.float64).reshape(-1)


def sim(a, b) -> float:
    """Cosine similarity of two tensor-likes, flattened; always in [-1, 1]."""
    va, vb = _flatten(a), _flatten(b)
    if va.shape != vb.shape:
        raise ValueError(f"sim: lengths {va.size} and {vb.size} differ")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine similarity undefined for a zero vector")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


class ImageEmbedder:
    """Seeded projection network: pixels -> unit-norm embedding vector.

    Projection weights are generated lazily per input size, so the same
    embedder instance handles frames of any resolution while staying
    deterministic in (seed, resolution).
    """

    def __init__(self, seed: int = 0, embed_dim: int = 64, hidden_dim: int = 128):
        self.seed = seed
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self._weights: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _proj(self, in_dim: int):
        w = self._weights.get(in_dim)
        if w is None:
            rng = np.random.default_rng([self.seed, in_dim])
            w1 = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(self.hidden_dim, in_dim))
            w2 = rng.normal(0.0, 1.0 / np.sqrt(self.hidden_dim),
                            size=(self.embed_dim, self.hidden_dim))
            w = (w1, w2)
            self._weights[in_dim] = w
        return w

    def embed(self, frame) -> EmbeddingVector:
        """Embed a pixel frame ([0,255] ints or array-like) deterministically."""
        px = np.asarray(getattr(frame, "pixels", frame), dtype=np.float64)
        v = (px / 127.5 - 1.0).reshape(-1)
        w1, w2 = self._proj(v.size)
        e = w2 @ np.tanh(w1 @ v)
        n = np.linalg.norm(e)
        if n == 0.0:
            raise ZeroVectorError("embedding collapsed to the zero vector")
        return EmbeddingVector(values=e / n)
