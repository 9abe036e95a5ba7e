"""Embedding providers for toolset similarity analysis.

The engine only needs fixed-dimension vectors and cosine similarity; real
providers are deployment configuration. The shipped default is a
deterministic hashed bag-of-words embedder: no model weights, stable across
processes, and similar texts (shared tokens) land close in cosine space,
which is exactly what the near-duplicate tests need.
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol, Sequence

import numpy as np

from .errors import ForgekitError


class EmbedderError(ForgekitError):
    pass


class DimensionMismatchError(EmbedderError):
    pass


class EmbeddingProvider(Protocol):
    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


_TOKEN_RE = re.compile(r"[a-z0-9]+")


class HashEmbedder:
    """Deterministic feature-hashing embedder (signed token buckets)."""

    def __init__(self, dim: int = 128):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            for token in _TOKEN_RE.findall(text.lower()):
                h = hashlib.sha256(token.encode("utf-8")).digest()
                idx = int.from_bytes(h[:4], "big") % self.dim
                sign = 1.0 if h[4] & 1 else -1.0
                out[i, idx] += sign
            norm = np.linalg.norm(out[i])
            if norm > 0:
                out[i] /= norm
        return out


def as_matrix(vectors) -> np.ndarray:
    """Coerce an embed() result to a 2-D float matrix, checking dimensions."""
    try:
        rows = [np.asarray(v, dtype=np.float64) for v in vectors]
    except (TypeError, ValueError) as exc:
        raise EmbedderError(f"embedder returned non-numeric vectors: {exc}") from exc
    if not rows:
        return np.zeros((0, 0))
    dims = {r.shape for r in rows}
    if len(dims) > 1 or any(r.ndim != 1 for r in rows):
        raise DimensionMismatchError(f"inconsistent vector shapes: {sorted(dims)}")
    return np.vstack(rows)


def cosine_matrix(m: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity; zero vectors are orthogonal to everything."""
    norms = np.linalg.norm(m, axis=1)
    safe = np.where(norms == 0, 1.0, norms)
    unit = m / safe[:, None]
    sims = unit @ unit.T
    sims[norms == 0, :] = 0.0
    sims[:, norms == 0] = 0.0
    return np.clip(sims, -1.0, 1.0)
