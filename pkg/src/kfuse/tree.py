"""Sentence trees and their model-ready artifacts.

A sentence tree is an ordered list of token groups; a group may carry
knowledge branches (relation + object tokens) injected after it. Flattening
emits tokens with overlapping soft positions, the visible matrix encodes
which token pairs may attend to each other, and the matrix is stored packed:
the upper triangle row-major, one byte per cell, n(n+1)/2 bytes total.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

import numpy as np

from .matcher import tokenize


@dataclass(frozen=True)
class KnowledgeBranch:
    relation: str
    object_tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.object_tokens:
            raise ValueError(f"branch {self.relation!r} has no object tokens")


@dataclass(frozen=True)
class TokenGroup:
    tokens: tuple[str, ...]
    mention_entity: str | None = None
    branches: tuple[KnowledgeBranch, ...] = ()

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError("token group must contain at least one token")
        if self.branches and self.mention_entity is None:
            raise ValueError("branches require a mention entity")


@dataclass(frozen=True)
class SentenceTree:
    groups: tuple[TokenGroup, ...] = ()


@dataclass
class FlattenedSequence:
    """Unrolled tree: tokens with soft positions and group/branch bookkeeping.

    ``branch_of`` holds a branch instance index (None for main-sentence
    tokens); it distinguishes sibling branches of one group and is what the
    visibility rules and truncation rebuilds operate on.
    """

    tokens: list[str] = field(default_factory=list)
    soft_positions: list[int] = field(default_factory=list)
    is_branch: list[bool] = field(default_factory=list)
    group_of: list[int] = field(default_factory=list)
    branch_of: list[int | None] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = len(self.tokens)
        for name in ("soft_positions", "is_branch", "group_of", "branch_of"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from token count {n}")

    @property
    def n(self) -> int:
        return len(self.tokens)

    def main_token_count(self) -> int:
        return sum(1 for b in self.is_branch if not b)


@dataclass(frozen=True)
class PackedVisibleMatrix:
    """Upper triangle (row-major, diagonal included) of a binary visibility
    matrix, one byte per entry."""

    n: int
    data: bytes

    def __post_init__(self) -> None:
        expected = self.n * (self.n + 1) // 2
        if len(self.data) != expected:
            raise ValueError(f"packed length {len(self.data)}, expected {expected} for n={self.n}")
        if any(b not in (0, 1) for b in self.data):
            raise ValueError("packed entries must be 0 or 1")
        for i in range(self.n):
            if self.data[_triu_index(self.n, i, i)] != 1:
                raise ValueError(f"diagonal entry ({i}, {i}) must be 1")

    def at(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return self.data[_triu_index(self.n, i, j)]

    def to_base64(self) -> str:
        return base64.b64encode(self.data).decode("ascii")

    @classmethod
    def from_base64(cls, n: int, encoded: str) -> "PackedVisibleMatrix":
        return cls(n=n, data=base64.b64decode(encoded))


def _triu_index(n: int, i: int, j: int) -> int:
    # row-major upper triangle with diagonal: row i starts after i rows of
    # lengths n, n-1, ..., n-i+1
    return i * n - i * (i - 1) // 2 + (j - i)


def flatten(tree: SentenceTree) -> FlattenedSequence:
    """Emit groups in order, each followed by its branches.

    Main-sentence tokens count 0, 1, 2, ...; each branch restarts at (last
    position of its head group) + 1 and counts on within the branch; the next
    main token reuses that same restart position, so main and branch
    positions deliberately overlap. Relations are tokenized like any text.
    """
    seq = FlattenedSequence()
    position = 0
    branch_uid = 0
    for group_index, group in enumerate(tree.groups):
        for token in group.tokens:
            seq.tokens.append(token)
            seq.soft_positions.append(position)
            seq.is_branch.append(False)
            seq.group_of.append(group_index)
            seq.branch_of.append(None)
            position += 1
        head_last = position - 1
        for branch in group.branches:
            branch_position = head_last + 1
            for token in (*tokenize(branch.relation).tokens, *branch.object_tokens):
                seq.tokens.append(token)
                seq.soft_positions.append(branch_position)
                seq.is_branch.append(True)
                seq.group_of.append(group_index)
                seq.branch_of.append(branch_uid)
                branch_position += 1
            branch_uid += 1
    return seq


def _visibility_dense(seq: FlattenedSequence) -> np.ndarray:
    """Dense n-by-n visibility over a flattened sequence.

    Main tokens all see each other; a branch token sees its head group and
    its own branch, and nothing else. Diagonal is always visible.
    """
    n = seq.n
    branch = np.array([-1 if b is None else b for b in seq.branch_of], dtype=np.int64)
    group = np.array(seq.group_of, dtype=np.int64) if n else np.empty(0, dtype=np.int64)
    is_main = branch == -1
    both_main = is_main[:, None] & is_main[None, :]
    same_branch = (branch[:, None] == branch[None, :]) & ~is_main[:, None]
    cross = (is_main[:, None] != is_main[None, :]) & (group[:, None] == group[None, :])
    visible = both_main | same_branch | cross
    if n:
        np.fill_diagonal(visible, True)
    return visible.astype(np.uint8)


def visible_matrix_of(seq: FlattenedSequence) -> PackedVisibleMatrix:
    dense = _visibility_dense(seq)
    n = seq.n
    iu = np.triu_indices(n)
    return PackedVisibleMatrix(n=n, data=dense[iu].tobytes())


def build_visible_matrix(tree: SentenceTree) -> PackedVisibleMatrix:
    return visible_matrix_of(flatten(tree))


def pack(dense) -> PackedVisibleMatrix:
    """Pack a symmetric binary matrix with unit diagonal."""
    matrix = np.asarray(dense)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    n = matrix.shape[0]
    asym = np.argwhere(matrix != matrix.T)
    if asym.size:
        i, j = (int(v) for v in asym[0])
        raise ValueError(f"matrix is not symmetric at ({i}, {j})")
    bad = np.argwhere((matrix != 0) & (matrix != 1))
    if bad.size:
        i, j = (int(v) for v in bad[0])
        raise ValueError(f"matrix entry at ({i}, {j}) is not binary")
    diag_bad = np.flatnonzero(np.diagonal(matrix) != 1)
    if diag_bad.size:
        i = int(diag_bad[0])
        raise ValueError(f"diagonal entry ({i}, {i}) must be 1")
    iu = np.triu_indices(n)
    return PackedVisibleMatrix(n=n, data=matrix.astype(np.uint8)[iu].tobytes())


def unpack(packed: PackedVisibleMatrix) -> np.ndarray:
    """Rebuild the symmetric dense matrix from its packed upper triangle."""
    n = packed.n
    dense = np.zeros((n, n), dtype=np.uint8)
    iu = np.triu_indices(n)
    values = np.frombuffer(packed.data, dtype=np.uint8)
    dense[iu] = values
    dense.T[iu] = values
    return dense


def _slice(seq: FlattenedSequence, kept: int) -> FlattenedSequence:
    # Tail truncation never changes earlier soft positions, and dropping a
    # head-group token also drops its branches (they are emitted after it).
    return FlattenedSequence(
        tokens=seq.tokens[:kept],
        soft_positions=seq.soft_positions[:kept],
        is_branch=seq.is_branch[:kept],
        group_of=seq.group_of[:kept],
        branch_of=seq.branch_of[:kept],
    )


def kept_pair_lengths(len_a: int, len_b: int, max_length: int) -> tuple[int, int]:
    """Per-half kept lengths under the equal-budget rule.

    Each half gets floor(max_length / 2); unused slots (plus the odd spare)
    go to whichever half still has tokens to keep, larger demand first, ties
    to the first half.
    """
    if max_length < 2:
        raise ValueError(f"max_length must be >= 2, got {max_length}")
    half = max_length // 2
    kept_a = min(len_a, half)
    kept_b = min(len_b, half)
    leftover = max_length - kept_a - kept_b
    while leftover > 0 and (kept_a < len_a or kept_b < len_b):
        if len_a - kept_a >= len_b - kept_b and kept_a < len_a:
            kept_a += 1
        else:
            kept_b += 1
        leftover -= 1
    return kept_a, kept_b


def truncate_pair(
    a: FlattenedSequence, b: FlattenedSequence, max_length: int
) -> tuple[FlattenedSequence, FlattenedSequence]:
    """Tail-truncate a sentence pair to a shared budget."""
    kept_a, kept_b = kept_pair_lengths(a.n, b.n, max_length)
    return _slice(a, kept_a), _slice(b, kept_b)


def truncate_single(a: FlattenedSequence, max_length: int) -> FlattenedSequence:
    """Tail-truncate a single sequence to max_length tokens."""
    if max_length < 1:
        raise ValueError(f"max_length must be >= 1, got {max_length}")
    if a.n <= max_length:
        return a
    return _slice(a, max_length)


def concat_pair(a: FlattenedSequence, b: FlattenedSequence) -> FlattenedSequence:
    """Join two halves as if their trees were one: the second half's main
    positions continue after the first half's, groups and branches renumber."""
    group_offset = (max(a.group_of) + 1) if a.group_of else 0
    branch_ids = [x for x in a.branch_of if x is not None]
    branch_offset = (max(branch_ids) + 1) if branch_ids else 0
    position_offset = a.main_token_count()
    return FlattenedSequence(
        tokens=a.tokens + b.tokens,
        soft_positions=a.soft_positions + [p + position_offset for p in b.soft_positions],
        is_branch=a.is_branch + b.is_branch,
        group_of=a.group_of + [g + group_offset for g in b.group_of],
        branch_of=a.branch_of
        + [None if x is None else x + branch_offset for x in b.branch_of],
    )
