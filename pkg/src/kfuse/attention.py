"""Single-layer masked self-attention, used to validate visibility semantics.

Token vectors are the deterministic hash embedding of each surface plus a
sinusoidal encoding of its soft position; query/key projections come from a
seeded generator. Scores at invisible pairs are forced to -inf before the
row softmax, so their attention weights are exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingProvider, embed
from .tree import FlattenedSequence, PackedVisibleMatrix, unpack


@dataclass(frozen=True)
class AttentionMap:
    weights: np.ndarray  # n x n, rows sum to 1


def sinusoidal_encoding(positions, dim: int) -> np.ndarray:
    """Standard transformer position encoding over arbitrary position ids."""
    pos = np.asarray(positions, dtype=np.float64)[:, None]
    index = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * np.floor(index / 2.0) / dim)
    encoding = np.empty((pos.shape[0], dim))
    encoding[:, 0::2] = np.sin(angle[:, 0::2])
    encoding[:, 1::2] = np.cos(angle[:, 1::2])
    return encoding


def masked_attention(
    seq: FlattenedSequence, visible: PackedVisibleMatrix, dim: int = 32, seed: int = 0
) -> AttentionMap:
    if visible.n != seq.n:
        raise ValueError(f"visibility is {visible.n}x{visible.n} but sequence has {seq.n} tokens")
    n = seq.n
    if n == 0:
        return AttentionMap(weights=np.zeros((0, 0)))

    provider = EmbeddingProvider(kind="hash", dim=dim)
    token_vectors = np.array([v.values for v in embed(provider, seq.tokens)])
    x = token_vectors + sinusoidal_encoding(seq.soft_positions, dim)

    rng = np.random.default_rng(seed)
    w_query = rng.standard_normal((dim, dim)) / np.sqrt(dim)
    w_key = rng.standard_normal((dim, dim)) / np.sqrt(dim)
    scores = (x @ w_query) @ (x @ w_key).T / np.sqrt(dim)

    scores = np.where(unpack(visible) == 1, scores, -np.inf)
    # every row has a visible diagonal entry, so the row max is finite
    shifted = np.exp(scores - scores.max(axis=1, keepdims=True))
    weights = shifted / shifted.sum(axis=1, keepdims=True)
    return AttentionMap(weights=weights)
