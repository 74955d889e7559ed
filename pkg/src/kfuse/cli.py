"""Batch command-line front-end: ingest, inject, attend, stats.

Input corpora are JSON Lines of {id, text} or {id, text_a, text_b}; output
records carry the flattened tokens, soft positions, branch flags, segment
ids, and the base64-encoded packed visible matrix. Processing streams line
by line, so memory use is independent of corpus size.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .attention import masked_attention
from .embedding import EmbeddingError, EmbeddingProvider
from .injector import (
    InjectionConfig,
    InjectionOutcome,
    ManualOverrideTable,
    inject_pair_with_outcome,
    inject_with_outcome,
    load_overrides,
    resolve_config,
)
from .kg import Category, KgFormatError, ingest_wikidata, load_kg
from .matcher import tokenize
from .stats import (
    HIGHER_BETTER,
    LOWER_BETTER,
    load_run_file,
    render_report,
    render_report_csv,
    t_test_one_tailed,
)
from .tree import (
    FlattenedSequence,
    PackedVisibleMatrix,
    concat_pair,
    flatten,
    truncate_pair,
    truncate_single,
    visible_matrix_of,
)

_CHUNK_LINES = 256


class CliError(RuntimeError):
    pass


def _parse_ablation(spec: str | None) -> frozenset[Category]:
    if not spec:
        return frozenset()
    categories = set()
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            categories.add(Category(part.upper()))
        except ValueError:
            raise CliError(f"unknown ablation category {part!r}; expected alias, cat, desc")
    return frozenset(categories)


def _make_provider(args) -> EmbeddingProvider:
    if args.provider == "remote":
        endpoint = args.endpoint or os.environ.get("KFUSE_ENDPOINT")
        if not endpoint:
            raise CliError("remote provider needs --endpoint or KFUSE_ENDPOINT")
        return EmbeddingProvider(kind="remote", dim=None, endpoint=endpoint)
    return EmbeddingProvider(kind="hash", dim=args.dim)


@dataclass
class RecordResult:
    record: dict
    outcome: InjectionOutcome
    truncated: bool


def _sequence_record(record_id, halves: list[FlattenedSequence]) -> dict:
    combined = halves[0] if len(halves) == 1 else concat_pair(halves[0], halves[1])
    packed = visible_matrix_of(combined)
    segment_ids = []
    for segment, half in enumerate(halves):
        segment_ids.extend([segment] * half.n)
    return {
        "id": record_id,
        "tokens": combined.tokens,
        "soft_positions": combined.soft_positions,
        "is_branch": combined.is_branch,
        "segment_ids": segment_ids,
        "packed_visible": packed.to_base64(),
        "n": combined.n,
    }


def process_record(
    obj: dict,
    store,
    provider: EmbeddingProvider,
    config: InjectionConfig,
    overrides: ManualOverrideTable | None = None,
) -> RecordResult:
    record_id = obj["id"]
    sentence_id = str(record_id)
    if "text" in obj:
        tree, outcome = inject_with_outcome(
            tokenize(obj["text"]), store, provider, config, overrides, sentence_id
        )
        seq = flatten(tree)
        kept = truncate_single(seq, config.max_length)
        truncated = kept.n < seq.n
        record = _sequence_record(record_id, [kept])
    else:
        tree_a, tree_b, outcome = inject_pair_with_outcome(
            tokenize(obj["text_a"]),
            tokenize(obj["text_b"]),
            store,
            provider,
            config,
            overrides,
            sentence_id,
        )
        seq_a, seq_b = flatten(tree_a), flatten(tree_b)
        kept_a, kept_b = truncate_pair(seq_a, seq_b, config.max_length)
        truncated = kept_a.n < seq_a.n or kept_b.n < seq_b.n
        record = _sequence_record(record_id, [kept_a, kept_b])
    return RecordResult(record, outcome, truncated)


def _parse_input_line(line: str, line_no: int) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CliError(f"input line {line_no}: invalid JSON ({exc})")
    if not isinstance(obj, dict) or "id" not in obj:
        raise CliError(f"input line {line_no}: record must be an object with an id")
    if "text" not in obj and not ("text_a" in obj and "text_b" in obj):
        raise CliError(f"input line {line_no}: need text or text_a/text_b")
    return obj


def _input_records(path: str):
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if line.strip():
                yield _parse_input_line(line, line_no)


def _chunked(iterable, size: int):
    chunk = []
    for item in iterable:
        chunk.append(item)
        if len(chunk) >= size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


def cmd_ingest(args) -> int:
    with open(args.allowlist, encoding="utf-8") as handle:
        allowlist = {line.strip() for line in handle if line.strip()}
    stats = ingest_wikidata(args.raw, allowlist, args.out)
    print(json.dumps(stats.as_dict(), indent=2))
    return 0


def cmd_inject(args) -> int:
    store = load_kg(args.kg)
    provider = _make_provider(args)
    overrides = load_overrides(args.overrides) if args.overrides else None
    records = _input_records(args.input)
    try:
        first = next(records)
    except StopIteration:
        first = None

    config = resolve_config(
        is_pair=first is not None and "text" not in first,
        threshold=args.threshold,
        max_length=args.max_length,
        max_triplets_per_entity=args.max_triplets,
        ablation=_parse_ablation(args.ablate),
        gating=args.gating,
        max_span=args.max_span,
    )

    counts = {"sentences": 0, "injected": 0, "gated": 0, "uninjected": 0, "truncated": 0}

    def work(obj: dict) -> RecordResult:
        try:
            return process_record(obj, store, provider, config, overrides)
        except EmbeddingError as exc:
            raise CliError(f"sentence {obj['id']!r}: {exc}") from exc

    def stream():
        if first is not None:
            yield first
        yield from records

    with open(args.output, "w", encoding="utf-8") as out:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            for chunk in _chunked(stream(), _CHUNK_LINES):
                results = list(pool.map(work, chunk)) if args.jobs > 1 else [work(o) for o in chunk]
                for result in results:
                    out.write(json.dumps(result.record, ensure_ascii=False) + "\n")
                    counts["sentences"] += 1
                    if result.outcome is InjectionOutcome.INJECTED:
                        counts["injected"] += 1
                    elif result.outcome is InjectionOutcome.GATED:
                        counts["gated"] += 1
                    else:
                        counts["uninjected"] += 1
                    counts["truncated"] += int(result.truncated)

    manifest = {
        "config": {
            "threshold": config.threshold,
            "max_triplets_per_entity": config.max_triplets_per_entity,
            "ablation": sorted(c.value for c in config.ablation),
            "gating": config.gating,
            "max_length": config.max_length,
            "max_span": config.max_span,
        },
        "kg_path": args.kg,
        "input_path": args.input,
        "output_path": args.output,
        "provider": {"kind": provider.kind, "dim": provider.dim, "endpoint": provider.endpoint},
        "seed": args.seed,
        "override_misses": overrides.missed if overrides else 0,
        "counts": counts,
    }
    rendered = json.dumps(manifest, indent=2)
    if args.manifest:
        with open(args.manifest, "w", encoding="utf-8") as handle:
            handle.write(rendered + "\n")
    print(rendered)
    return 0


def cmd_attend(args) -> int:
    with open(args.record, encoding="utf-8") as handle:
        lines = [line for line in handle if line.strip()]
    if not 1 <= args.line <= len(lines):
        raise CliError(f"--line {args.line} out of range (file has {len(lines)} records)")
    obj = json.loads(lines[args.line - 1])
    seq = FlattenedSequence(
        tokens=list(obj["tokens"]),
        soft_positions=list(obj["soft_positions"]),
        is_branch=list(obj["is_branch"]),
        group_of=[0] * obj["n"],
        branch_of=[None] * obj["n"],
    )
    visible = PackedVisibleMatrix.from_base64(obj["n"], obj["packed_visible"])
    attention = masked_attention(seq, visible, dim=args.dim, seed=args.seed)
    target = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        np.savetxt(target, attention.weights, delimiter=",", fmt="%.10g")
    finally:
        if args.out:
            target.close()
    return 0


def cmd_stats(args) -> int:
    direction = HIGHER_BETTER if args.direction == "higher" else LOWER_BETTER
    baseline = load_run_file(args.baseline, direction)
    treatment = load_run_file(args.treatment, direction)
    common = sorted(set(baseline) & set(treatment))
    if not common:
        raise CliError("baseline and treatment share no metrics")
    rows = [(metric, t_test_one_tailed(baseline[metric], treatment[metric])) for metric in common]
    print(render_report_csv(rows) if args.csv else render_report(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kfuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="filter a raw entity dump into the compact KG format")
    p_ingest.add_argument("--raw", required=True)
    p_ingest.add_argument("--allowlist", required=True, help="file of domain entity ids, one per line")
    p_ingest.add_argument("--out", required=True)
    p_ingest.set_defaults(func=cmd_ingest)

    p_inject = sub.add_parser("inject", help="enrich a corpus and emit model-ready records")
    p_inject.add_argument("--input", required=True)
    p_inject.add_argument("--kg", required=True)
    p_inject.add_argument("--output", required=True)
    p_inject.add_argument("--threshold", type=float, default=None)
    p_inject.add_argument("--max-length", type=int, default=None)
    p_inject.add_argument("--max-triplets", type=int, default=3)
    p_inject.add_argument("--max-span", type=int, default=6)
    p_inject.add_argument("--ablate", default=None, help="comma list of alias,cat,desc")
    p_inject.add_argument("--gating", action="store_true")
    p_inject.add_argument("--provider", choices=["hash", "remote"], default="hash")
    p_inject.add_argument("--endpoint", default=None)
    p_inject.add_argument("--dim", type=int, default=64)
    p_inject.add_argument("--overrides", default=None)
    p_inject.add_argument("--seed", type=int, default=0)
    p_inject.add_argument("--jobs", type=int, default=1)
    p_inject.add_argument("--manifest", default=None)
    p_inject.set_defaults(func=cmd_inject)

    p_attend = sub.add_parser("attend", help="attention map of one output record as CSV")
    p_attend.add_argument("--record", required=True)
    p_attend.add_argument("--line", type=int, default=1)
    p_attend.add_argument("--dim", type=int, default=32)
    p_attend.add_argument("--seed", type=int, default=0)
    p_attend.add_argument("--out", default=None)
    p_attend.set_defaults(func=cmd_attend)

    p_stats = sub.add_parser("stats", help="one-tailed t-test report between run files")
    p_stats.add_argument("--baseline", required=True)
    p_stats.add_argument("--treatment", required=True)
    p_stats.add_argument("--direction", choices=["higher", "lower"], required=True)
    p_stats.add_argument("--csv", action="store_true")
    p_stats.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, KgFormatError, EmbeddingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
