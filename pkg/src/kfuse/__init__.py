"""Knowledge-fusion preprocessing: KG-backed sentence enrichment with
flattened sequences, soft positions, and packed visible matrices."""

from .attention import AttentionMap, masked_attention, sinusoidal_encoding
from .embedding import (
    EmbeddingError,
    EmbeddingProvider,
    EmbeddingVector,
    cosine,
    embed,
    fnv1a64,
)
from .injector import (
    CandidateScore,
    InjectionConfig,
    InjectionOutcome,
    ManualOverrideTable,
    build_candidate_sequence,
    inject_pair_with_outcome,
    inject_sentence,
    inject_with_outcome,
    k_query,
    load_overrides,
    resolve_config,
    select_entity,
)
from .kg import (
    Category,
    EntityRecord,
    IngestStats,
    KgFormatError,
    KgStore,
    Triplet,
    ingest_wikidata,
    load_kg,
    lookup_surface,
    normalize,
    save_kg,
    triplets_of,
)
from .matcher import MentionSpan, TokenSequence, find_mentions, tokenize
from .stats import (
    RunSeries,
    TTestResult,
    aggregate,
    mse,
    spearman,
    t_cdf,
    t_test_one_tailed,
)
from .tree import (
    FlattenedSequence,
    KnowledgeBranch,
    PackedVisibleMatrix,
    SentenceTree,
    TokenGroup,
    build_visible_matrix,
    concat_pair,
    flatten,
    pack,
    truncate_pair,
    truncate_single,
    unpack,
    visible_matrix_of,
)

__version__ = "0.1.0"
