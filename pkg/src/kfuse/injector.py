"""Knowledge selection and injection: query, relevance scoring, gating.

For each mention the store's candidate entities are scored by cosine
similarity between the sentence embedding and a text sequence concatenating
each candidate's properties. The best candidate is injected only if its
similarity strictly exceeds the threshold; manual overrides bypass scoring
entirely. With gating on, a sentence whose enriched form would exceed the
length budget keeps no knowledge at all.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

from .embedding import EmbeddingProvider, cosine, embed
from .kg import Category, KgFormatError, KgStore, Triplet, normalize, record_triplets, triplets_of
from .matcher import DEFAULT_MAX_SPAN, MentionSpan, TokenSequence, find_mentions, tokenize
from .tree import KnowledgeBranch, SentenceTree, TokenGroup, flatten, kept_pair_lengths

logger = logging.getLogger(__name__)

#: tuned defaults for sentence-pair tasks and single-text tasks
PAIR_DEFAULTS = {"threshold": 0.5, "max_length": 256}
SINGLE_DEFAULTS = {"threshold": 0.6, "max_length": 128}


@dataclass(frozen=True)
class InjectionConfig:
    threshold: float = PAIR_DEFAULTS["threshold"]
    max_triplets_per_entity: int = 3
    ablation: frozenset[Category] = frozenset()
    gating: bool = False
    max_length: int = PAIR_DEFAULTS["max_length"]
    max_span: int = DEFAULT_MAX_SPAN

    def __post_init__(self) -> None:
        if not -1.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [-1, 1], got {self.threshold}")
        if self.max_triplets_per_entity < 1:
            raise ValueError("max_triplets_per_entity must be >= 1")
        if self.max_length < 1:
            raise ValueError("max_length must be >= 1")
        if self.max_span < 1:
            raise ValueError("max_span must be >= 1")
        object.__setattr__(self, "ablation", frozenset(self.ablation))


def resolve_config(
    is_pair: bool,
    threshold: float | None = None,
    max_length: int | None = None,
    max_triplets_per_entity: int = 3,
    ablation: frozenset[Category] = frozenset(),
    gating: bool = False,
    max_span: int = DEFAULT_MAX_SPAN,
) -> InjectionConfig:
    """Fill unset knobs from the task-shape defaults (pair vs single text)."""
    defaults = PAIR_DEFAULTS if is_pair else SINGLE_DEFAULTS
    return InjectionConfig(
        threshold=defaults["threshold"] if threshold is None else threshold,
        max_triplets_per_entity=max_triplets_per_entity,
        ablation=ablation,
        gating=gating,
        max_length=defaults["max_length"] if max_length is None else max_length,
        max_span=max_span,
    )


@dataclass(frozen=True)
class CandidateScore:
    entity_id: str
    candidate_sequence: str
    similarity: float


class InjectionOutcome(Enum):
    BARE = "bare"          # nothing selected for injection
    INJECTED = "injected"  # knowledge branches attached
    GATED = "gated"        # knowledge selected but dropped by the gate


class ManualOverrideTable:
    """(sentence id, normalized surface) -> triplets to inject.

    An empty triplet list suppresses injection for that mention. ``missed``
    counts override keys whose surface never matched a mention.
    """

    def __init__(self) -> None:
        self.entries: dict[tuple[str, str], list[Triplet]] = {}
        self.missed = 0

    def add(self, sentence_id: str, surface: str, triplets: Sequence[Triplet]) -> None:
        key = (str(sentence_id), normalize(surface))
        if key in self.entries:
            raise KgFormatError(f"duplicate override for sentence {sentence_id!r}, surface {surface!r}")
        self.entries[key] = list(triplets)

    def get(self, sentence_id: str, surface: str) -> list[Triplet] | None:
        return self.entries.get((str(sentence_id), normalize(surface)))

    def surfaces_for(self, sentence_id: str) -> set[str]:
        return {surface for sid, surface in self.entries if sid == str(sentence_id)}


def load_overrides(path: str) -> ManualOverrideTable:
    """Read a JSON-Lines override file: {sentence_id, surface, triplets}."""
    table = ManualOverrideTable()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                triplets = [
                    Triplet(subject="", relation=t["relation"], object_text=t["object_text"])
                    for t in obj.get("triplets", [])
                ]
                table.add(obj["sentence_id"], obj["surface"], triplets)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise KgFormatError(f"override line {line_no}: malformed entry ({exc})") from exc
    return table


def k_query(
    tokens: TokenSequence,
    store: KgStore,
    mentions: Sequence[MentionSpan],
    ablation: frozenset[Category] | set[Category] = frozenset(),
) -> list[list[tuple[str, list[Triplet]]]]:
    """Per-mention candidate entities with their ablation-filtered triplets.

    Candidates whose triplets are all ablated stay in the result with an
    empty list: they remain selectable but inject nothing.
    """
    if mentions and mentions[-1].end > len(tokens.tokens):
        raise ValueError("mentions do not fit the given token sequence")
    return [
        [(entity_id, triplets_of(store, entity_id, ablation)) for entity_id in mention.candidate_ids]
        for mention in mentions
    ]


def build_candidate_sequence(record, store: KgStore | None = None) -> str:
    """Concatenate label and property texts ("; "-joined) in triplet order."""
    parts = [record.label] + [t.object_text for t in record_triplets(record, store)]
    return "; ".join(parts)


def select_entity(
    candidates: Sequence[tuple[str, str]],
    sentence_text: str,
    provider: EmbeddingProvider,
    threshold: float,
) -> CandidateScore | None:
    """Highest-similarity candidate, if strictly above the threshold.

    Ties break toward the ascending entity id; an empty candidate list
    selects nothing.
    """
    if not candidates:
        return None
    vectors = embed(provider, [sentence_text] + [seq for _, seq in candidates])
    sentence_vector = vectors[0]
    best = None
    for (entity_id, sequence), vector in zip(candidates, vectors[1:]):
        score = CandidateScore(entity_id, sequence, cosine(vector, sentence_vector))
        if (
            best is None
            or score.similarity > best.similarity
            or (score.similarity == best.similarity and score.entity_id < best.entity_id)
        ):
            best = score
    return best if best.similarity > threshold else None


def _branches(triplets: Sequence[Triplet]) -> tuple[KnowledgeBranch, ...]:
    branches = []
    for triplet in triplets:
        object_tokens = tokenize(triplet.object_text).tokens
        if object_tokens:
            branches.append(KnowledgeBranch(triplet.relation, object_tokens))
    return tuple(branches)


def _strip_branches(tree: SentenceTree) -> SentenceTree:
    return SentenceTree(tuple(replace(group, branches=()) for group in tree.groups))


def flattened_length(tree: SentenceTree) -> int:
    return flatten(tree).n


def _count_missed_overrides(
    overrides: ManualOverrideTable, sentence_id: str, matched_surfaces: set[str]
) -> None:
    for surface in overrides.surfaces_for(sentence_id) - matched_surfaces:
        overrides.missed += 1
        logger.warning(
            "override for sentence %r surface %r matched no mention", sentence_id, surface
        )


def inject_with_outcome(
    tokens: TokenSequence,
    store: KgStore,
    provider: EmbeddingProvider,
    config: InjectionConfig,
    overrides: ManualOverrideTable | None = None,
    sentence_id: str = "",
    apply_gate: bool = True,
    count_misses: bool = True,
) -> tuple[SentenceTree, InjectionOutcome]:
    """Build the sentence tree and report whether knowledge survived the gate.

    ``apply_gate=False`` defers gating to the caller and ``count_misses=False``
    defers override-miss accounting (both used for sentence pairs, which
    share one budget and one override namespace).
    """
    mentions = find_mentions(tokens, store, config.max_span)
    matched_surfaces: set[str] = set()

    groups: list[TokenGroup] = []
    cursor = 0
    for mention in mentions:
        for index in range(cursor, mention.start):
            groups.append(TokenGroup(tokens=(tokens.tokens[index],)))
        override = overrides.get(sentence_id, mention.surface) if overrides else None
        if override is not None:
            matched_surfaces.add(normalize(mention.surface))
            entity_id = mention.candidate_ids[0]
            selected = [t for t in override if t.category not in config.ablation]
        else:
            candidates = [
                (entity_id, build_candidate_sequence(store.records[entity_id], store))
                for entity_id in mention.candidate_ids
            ]
            chosen = select_entity(candidates, tokens.source_text, provider, config.threshold)
            if chosen is None:
                entity_id = None
                selected = []
            else:
                entity_id = chosen.entity_id
                selected = triplets_of(store, entity_id, config.ablation)
        selected = selected[: config.max_triplets_per_entity]
        groups.append(
            TokenGroup(
                tokens=tuple(tokens.tokens[mention.start : mention.end]),
                mention_entity=entity_id,
                branches=_branches(selected),
            )
        )
        cursor = mention.end
    for index in range(cursor, len(tokens.tokens)):
        groups.append(TokenGroup(tokens=(tokens.tokens[index],)))
    tree = SentenceTree(tuple(groups))

    if overrides is not None and count_misses:
        _count_missed_overrides(overrides, sentence_id, matched_surfaces)

    has_knowledge = any(group.branches for group in tree.groups)
    if not has_knowledge:
        return tree, InjectionOutcome.BARE
    if apply_gate and config.gating and flattened_length(tree) > config.max_length:
        return _strip_branches(tree), InjectionOutcome.GATED
    return tree, InjectionOutcome.INJECTED


def inject_sentence(
    tokens: TokenSequence,
    store: KgStore,
    provider: EmbeddingProvider,
    config: InjectionConfig,
    overrides: ManualOverrideTable | None = None,
    sentence_id: str = "",
) -> SentenceTree:
    """find_mentions -> (override | query + select) -> cap -> gate -> tree."""
    tree, _ = inject_with_outcome(tokens, store, provider, config, overrides, sentence_id)
    return tree


def inject_pair_with_outcome(
    tokens_a: TokenSequence,
    tokens_b: TokenSequence,
    store: KgStore,
    provider: EmbeddingProvider,
    config: InjectionConfig,
    overrides: ManualOverrideTable | None = None,
    sentence_id: str = "",
) -> tuple[SentenceTree, SentenceTree, InjectionOutcome]:
    """Inject both halves, gating on the pair's shared length budget.

    If the enriched halves would not both fit their (leftover-adjusted)
    budgets, all knowledge for the pair is dropped.
    """
    tree_a, outcome_a = inject_with_outcome(
        tokens_a, store, provider, config, overrides, sentence_id,
        apply_gate=False, count_misses=False,
    )
    tree_b, outcome_b = inject_with_outcome(
        tokens_b, store, provider, config, overrides, sentence_id,
        apply_gate=False, count_misses=False,
    )
    if overrides is not None:
        matched = {
            normalize(mention.surface)
            for tokens in (tokens_a, tokens_b)
            for mention in find_mentions(tokens, store, config.max_span)
            if overrides.get(sentence_id, mention.surface) is not None
        }
        _count_missed_overrides(overrides, sentence_id, matched)
    injected = InjectionOutcome.INJECTED in (outcome_a, outcome_b)
    if not injected:
        return tree_a, tree_b, InjectionOutcome.BARE
    if config.gating:
        len_a, len_b = flattened_length(tree_a), flattened_length(tree_b)
        kept = kept_pair_lengths(len_a, len_b, config.max_length)
        if kept != (len_a, len_b):
            return _strip_branches(tree_a), _strip_branches(tree_b), InjectionOutcome.GATED
    return tree_a, tree_b, InjectionOutcome.INJECTED
