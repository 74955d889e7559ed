"""Sentence embedding providers for relevance scoring.

Two providers share one interface: a deterministic hashing embedder (feature
hashing over word unigrams and bigrams, FNV-1a 64-bit) for offline use and
tests, and a client for a remote embedding service. Cosine similarity between
the resulting vectors drives candidate selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import requests

from .kg import normalize

DEFAULT_HASH_DIM = 64
DEFAULT_TIMEOUT = 30.0

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


class EmbeddingError(RuntimeError):
    """Embedding provider failure (connection, timeout, malformed response)."""


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash, bit-exact across platforms."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int

    def __post_init__(self) -> None:
        if len(self.values) != self.dim:
            raise ValueError(f"vector has {len(self.values)} values, dim says {self.dim}")

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))


@dataclass(frozen=True)
class EmbeddingProvider:
    """Configuration for one embedding source.

    ``kind`` is "hash" or "remote"; remote providers need an endpoint and read
    their dimension from the service response (``dim`` then acts as an
    optional cross-check).
    """

    kind: str = "hash"
    dim: int | None = DEFAULT_HASH_DIM
    endpoint: str | None = None
    normalize: bool = True
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self) -> None:
        if self.kind not in ("hash", "remote"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote provider requires an endpoint")
        if self.kind == "hash" and (self.dim is None or self.dim < 1):
            raise ValueError("hash provider requires a positive dim")

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return embed(self, texts)


def _features(text: str) -> list[str]:
    words = normalize(text).split()
    return words + [f"{a} {b}" for a, b in zip(words, words[1:])]


def _maybe_normalize(values: list[float], do_normalize: bool) -> tuple[float, ...]:
    if do_normalize:
        norm = math.sqrt(sum(v * v for v in values))
        if norm > 0.0:
            values = [v / norm for v in values]
    return tuple(values)


def _hash_embed(texts: Sequence[str], dim: int, do_normalize: bool) -> list[EmbeddingVector]:
    out = []
    for text in texts:
        values = [0.0] * dim
        for feature in _features(text):
            h = fnv1a64(feature.encode("utf-8"))
            sign = -1.0 if (h >> 63) & 1 else 1.0
            values[h % dim] += sign
        out.append(EmbeddingVector(_maybe_normalize(values, do_normalize), dim))
    return out


def _remote_embed(provider: EmbeddingProvider, texts: Sequence[str]) -> list[EmbeddingVector]:
    if not texts:
        raise EmbeddingError(f"remote embed at {provider.endpoint}: empty text batch")
    try:
        response = requests.post(
            provider.endpoint,
            json={"texts": list(texts)},
            timeout=provider.timeout,
        )
    except requests.RequestException as exc:
        raise EmbeddingError(f"remote embed at {provider.endpoint}: {exc}") from exc
    if not 200 <= response.status_code < 300:
        raise EmbeddingError(
            f"remote embed at {provider.endpoint}: HTTP {response.status_code}"
        )
    try:
        rows = response.json()["embeddings"]
    except (ValueError, KeyError) as exc:
        raise EmbeddingError(
            f"remote embed at {provider.endpoint}: malformed response ({exc})"
        ) from exc
    if not isinstance(rows, list) or len(rows) != len(texts):
        got = len(rows) if isinstance(rows, list) else "non-list"
        raise EmbeddingError(
            f"remote embed at {provider.endpoint}: expected {len(texts)} rows, got {got}"
        )
    out = []
    for index, row in enumerate(rows):
        if not isinstance(row, list) or not all(isinstance(v, (int, float)) for v in row):
            raise EmbeddingError(
                f"remote embed at {provider.endpoint}: malformed row at batch index {index}"
            )
        if provider.dim is not None and len(row) != provider.dim:
            raise EmbeddingError(
                f"remote embed at {provider.endpoint}: row at batch index {index} "
                f"has dim {len(row)}, expected {provider.dim}"
            )
        values = _maybe_normalize([float(v) for v in row], provider.normalize)
        out.append(EmbeddingVector(values, len(values)))
    return out


def embed(provider: EmbeddingProvider, texts: Sequence[str]) -> list[EmbeddingVector]:
    """One vector per text, in input order."""
    if provider.kind == "hash":
        return _hash_embed(texts, provider.dim, provider.normalize)
    return _remote_embed(provider, texts)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity, clamped to [-1, 1]; zero if either vector is zero."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    norm_a = a.norm()
    norm_b = b.norm()
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    dot = sum(x * y for x, y in zip(a.values, b.values))
    return max(-1.0, min(1.0, dot / (norm_a * norm_b)))
