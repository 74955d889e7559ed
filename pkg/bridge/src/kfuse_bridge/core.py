"""Batch bindings over the inject pipeline.

Results come back as flat buffers with row offsets so training code can hand
them to a tensor library without per-row Python objects: row i of a buffer is
``buffer[offsets[i]:offsets[i + 1]]``. Output is field-identical to the
``kfuse inject`` command on the same inputs and configuration.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from kfuse.cli import process_record
from kfuse.embedding import EmbeddingProvider
from kfuse.injector import ManualOverrideTable, load_overrides, resolve_config
from kfuse.kg import Category, KgStore, load_kg


class BridgeConfigError(ValueError):
    """Unknown or ill-typed configuration key."""


_VALID_KEYS = frozenset(
    {
        "threshold",
        "max_length",
        "max_triplets",
        "max_span",
        "ablate",
        "gating",
        "provider",
        "endpoint",
        "dim",
        "overrides",
        "seed",
    }
)


@dataclass(frozen=True)
class KgHandle:
    """Immutable handle around a loaded store; safe for concurrent batches."""

    path: str
    store: KgStore


@dataclass(frozen=True)
class BoundBatch:
    """One inject batch as flat buffers plus per-row offsets.

    ``offsets`` applies to soft_positions, is_branch, and segment_ids;
    ``packed_offsets`` applies to packed_visible. Offsets have one more entry
    than there are rows and partition each flat buffer exactly.
    """

    tokens: tuple[tuple[str, ...], ...]
    soft_positions: np.ndarray
    is_branch: np.ndarray
    segment_ids: np.ndarray
    offsets: np.ndarray
    packed_visible: np.ndarray
    packed_offsets: np.ndarray
    n_per_row: tuple[int, ...]

    def __post_init__(self) -> None:
        rows = len(self.n_per_row)
        if len(self.offsets) != rows + 1 or len(self.packed_offsets) != rows + 1:
            raise ValueError("offsets must have one entry more than there are rows")
        for i, n in enumerate(self.n_per_row):
            if self.offsets[i + 1] - self.offsets[i] != n:
                raise ValueError(f"row {i}: offset span != n_per_row")
            if self.packed_offsets[i + 1] - self.packed_offsets[i] != n * (n + 1) // 2:
                raise ValueError(f"row {i}: packed span != n(n+1)/2")
        for buffer in (self.soft_positions, self.is_branch, self.segment_ids):
            if len(buffer) != self.offsets[-1]:
                raise ValueError("flat buffer length differs from final offset")
        if len(self.packed_visible) != self.packed_offsets[-1]:
            raise ValueError("packed buffer length differs from final offset")

    def row(self, i: int) -> dict:
        lo, hi = int(self.offsets[i]), int(self.offsets[i + 1])
        plo, phi = int(self.packed_offsets[i]), int(self.packed_offsets[i + 1])
        return {
            "tokens": list(self.tokens[i]),
            "soft_positions": self.soft_positions[lo:hi].tolist(),
            "is_branch": [bool(b) for b in self.is_branch[lo:hi]],
            "segment_ids": self.segment_ids[lo:hi].tolist(),
            "packed_visible": bytes(self.packed_visible[plo:phi]),
            "n": self.n_per_row[i],
        }


def bind_load_kg(path: str) -> KgHandle:
    """Load a compact KG file into an immutable handle."""
    return KgHandle(path=path, store=load_kg(path))


def _parse_ablation(value) -> frozenset[Category]:
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
    else:
        parts = [str(p) for p in value]
    categories = set()
    for part in parts:
        try:
            categories.add(Category(part.upper()))
        except ValueError:
            raise BridgeConfigError(
                f"unknown ablation category {part!r}; expected alias, cat, desc"
            )
    return frozenset(categories)


def _build_provider(config: Mapping) -> EmbeddingProvider:
    if config.get("provider", "hash") == "remote":
        endpoint = config.get("endpoint")
        if not endpoint:
            raise BridgeConfigError("remote provider requires an endpoint")
        return EmbeddingProvider(kind="remote", dim=None, endpoint=endpoint)
    return EmbeddingProvider(kind="hash", dim=int(config.get("dim", 64)))


def bind_inject_batch(
    handle: KgHandle,
    texts: Sequence[str | tuple[str, str] | list[str]],
    config: Mapping | None = None,
) -> BoundBatch:
    """Run the inject pipeline over a batch of texts or (a, b) pairs.

    Config keys mirror the inject command's flags; rows are keyed by their
    batch index for override lookup, matching a corpus whose ids are 0..N-1.
    """
    config = dict(config or {})
    unknown = set(config) - _VALID_KEYS
    if unknown:
        raise BridgeConfigError(
            f"unknown config keys {sorted(unknown)}; valid keys are {sorted(_VALID_KEYS)}"
        )
    provider = _build_provider(config)
    overrides: ManualOverrideTable | None = None
    if config.get("overrides"):
        overrides = load_overrides(config["overrides"])

    first_is_pair = bool(texts) and not isinstance(texts[0], str)
    injection = resolve_config(
        is_pair=first_is_pair,
        threshold=config.get("threshold"),
        max_length=config.get("max_length"),
        max_triplets_per_entity=int(config.get("max_triplets", 3)),
        ablation=_parse_ablation(config.get("ablate", ())),
        gating=bool(config.get("gating", False)),
        max_span=int(config.get("max_span", 6)),
    )

    tokens: list[tuple[str, ...]] = []
    soft_positions: list[int] = []
    is_branch: list[int] = []
    segment_ids: list[int] = []
    offsets = [0]
    packed_chunks: list[bytes] = []
    packed_offsets = [0]
    n_per_row: list[int] = []

    for index, text in enumerate(texts):
        if isinstance(text, str):
            obj = {"id": index, "text": text}
        else:
            text_a, text_b = text
            obj = {"id": index, "text_a": text_a, "text_b": text_b}
        record = process_record(obj, handle.store, provider, injection, overrides).record
        tokens.append(tuple(record["tokens"]))
        soft_positions.extend(record["soft_positions"])
        is_branch.extend(int(b) for b in record["is_branch"])
        segment_ids.extend(record["segment_ids"])
        offsets.append(len(soft_positions))
        packed_chunks.append(base64.b64decode(record["packed_visible"]))
        packed_offsets.append(packed_offsets[-1] + len(packed_chunks[-1]))
        n_per_row.append(record["n"])

    return BoundBatch(
        tokens=tuple(tokens),
        soft_positions=np.asarray(soft_positions, dtype=np.int64),
        is_branch=np.asarray(is_branch, dtype=np.uint8),
        segment_ids=np.asarray(segment_ids, dtype=np.int64),
        offsets=np.asarray(offsets, dtype=np.int64),
        packed_visible=np.frombuffer(b"".join(packed_chunks), dtype=np.uint8),
        packed_offsets=np.asarray(packed_offsets, dtype=np.int64),
        n_per_row=tuple(n_per_row),
    )
