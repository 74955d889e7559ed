"""Compact knowledge-graph store: loading, filtering, surface indexing, triplet access.

The store keeps one record per entity with five properties (label, aliases,
description, instance-of links, subclass-of links) and an index from
normalized surface strings to entity ids. Stores are immutable after load;
ingestion is a single streaming pass over a raw Wikidata-style dump.
"""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator


class Category(str, Enum):
    """Knowledge category of a triplet: alias, categorical, or descriptive."""

    ALIAS = "ALIAS"
    CAT = "CAT"
    DESC = "DESC"


#: relation name -> knowledge category
RELATION_CATEGORY = {
    "alias": Category.ALIAS,
    "instance of": Category.CAT,
    "subclass of": Category.CAT,
    "description": Category.DESC,
}


class KgFormatError(ValueError):
    """Malformed or inconsistent knowledge-graph input."""


_WHITESPACE = re.compile(r"\s+")
_STRIP_CHARS = string.punctuation + string.whitespace


def normalize(surface: str) -> str:
    """Lowercase, collapse internal whitespace, strip surrounding punctuation."""
    collapsed = _WHITESPACE.sub(" ", surface.lower())
    return collapsed.strip(_STRIP_CHARS)


@dataclass(frozen=True)
class EntityRecord:
    """One knowledge-graph item with the five retained properties."""

    id: str
    label: str
    aliases: tuple[str, ...] = ()
    description: str = ""
    instance_of: tuple[str, ...] = ()
    subclass_of: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise KgFormatError("entity id must be non-empty")
        if not self.label:
            raise KgFormatError(f"record {self.id!r}: label must be non-empty")
        # Keep aliases duplicate-free and distinct from the label.
        seen: set[str] = {self.label}
        cleaned = []
        for alias in self.aliases:
            if alias and alias not in seen:
                cleaned.append(alias)
                seen.add(alias)
        object.__setattr__(self, "aliases", tuple(cleaned))
        object.__setattr__(self, "instance_of", tuple(self.instance_of))
        object.__setattr__(self, "subclass_of", tuple(self.subclass_of))

    def surfaces(self) -> Iterator[str]:
        yield self.label
        yield from self.aliases


@dataclass(frozen=True)
class Triplet:
    """(subject, relation, object text) with its knowledge category."""

    subject: str
    relation: str
    object_text: str
    category: Category = field(init=False)

    def __post_init__(self) -> None:
        if self.relation not in RELATION_CATEGORY:
            raise KgFormatError(
                f"unknown relation {self.relation!r}; expected one of "
                f"{sorted(RELATION_CATEGORY)}"
            )
        if not self.object_text.strip():
            raise KgFormatError(
                f"triplet ({self.subject!r}, {self.relation!r}): object text is empty"
            )
        object.__setattr__(self, "category", RELATION_CATEGORY[self.relation])


class KgStore:
    """Immutable entity collection with a normalized surface index."""

    def __init__(self, records: Iterable[EntityRecord]):
        self.records: dict[str, EntityRecord] = {}
        for record in records:
            if record.id in self.records:
                raise KgFormatError(f"duplicate entity id {record.id!r}")
            self.records[record.id] = record
        self.surface_index: dict[str, list[str]] = {}
        for record in self.records.values():
            for surface in record.surfaces():
                key = normalize(surface)
                if not key:
                    continue
                self.surface_index.setdefault(key, []).append(record.id)
        for ids in self.surface_index.values():
            ids.sort()

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self.records

    def label_of(self, entity_id: str) -> str | None:
        record = self.records.get(entity_id)
        return record.label if record is not None else None


def record_triplets(record: EntityRecord, store: KgStore | None = None) -> list[Triplet]:
    """All triplets of a record in fixed relation order: alias*, instance of*,
    subclass of*, description.

    Categorical objects resolve to the target record's label when the target
    exists in ``store``; otherwise the raw identifier is kept.
    """

    def cat_text(target_id: str) -> str:
        if store is not None:
            label = store.label_of(target_id)
            if label is not None:
                return label
        return target_id

    triplets = [Triplet(record.id, "alias", alias) for alias in record.aliases]
    triplets += [Triplet(record.id, "instance of", cat_text(t)) for t in record.instance_of]
    triplets += [Triplet(record.id, "subclass of", cat_text(t)) for t in record.subclass_of]
    if record.description.strip():
        triplets.append(Triplet(record.id, "description", record.description))
    return triplets


def triplets_of(
    store: KgStore, entity_id: str, ablation: frozenset[Category] | set[Category] = frozenset()
) -> list[Triplet]:
    """Triplets of one entity, minus the ablated categories."""
    record = store.records.get(entity_id)
    if record is None:
        raise KgFormatError(f"unknown entity id {entity_id!r}")
    return [t for t in record_triplets(record, store) if t.category not in ablation]


def lookup_surface(store: KgStore, surface: str) -> list[EntityRecord]:
    """Records whose normalized label or alias equals the normalized surface."""
    ids = store.surface_index.get(normalize(surface), [])
    return [store.records[i] for i in ids]


def _str_list(obj: dict, key: str) -> tuple[str, ...]:
    values = obj.get(key, ())
    if not isinstance(values, (list, tuple)) or not all(isinstance(v, str) for v in values):
        raise KgFormatError(f"{key} must be a list of strings")
    return tuple(values)


def _record_from_obj(obj: dict, line_no: int) -> EntityRecord:
    try:
        if not isinstance(obj, dict):
            raise KgFormatError("record must be a JSON object")
        if not isinstance(obj.get("id"), str) or not isinstance(obj.get("label"), str):
            raise KgFormatError("id and label must be strings")
        description = obj.get("description", "")
        if not isinstance(description, str):
            raise KgFormatError("description must be a string")
        return EntityRecord(
            id=obj["id"],
            label=obj["label"],
            aliases=_str_list(obj, "aliases"),
            description=description,
            instance_of=_str_list(obj, "instance_of"),
            subclass_of=_str_list(obj, "subclass_of"),
        )
    except KgFormatError as exc:
        raise KgFormatError(f"line {line_no}: malformed record ({exc})") from exc


def load_kg(path: str) -> KgStore:
    """Load a compact JSON-Lines knowledge graph file."""
    records = []
    ids_seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise KgFormatError(f"line {line_no}: invalid JSON ({exc})") from exc
            record = _record_from_obj(obj, line_no)
            if record.id in ids_seen:
                raise KgFormatError(f"line {line_no}: duplicate entity id {record.id!r}")
            ids_seen.add(record.id)
            records.append(record)
    return KgStore(records)


def save_kg(store: KgStore, path: str) -> None:
    """Write the compact JSON-Lines format, ascending by entity id."""
    with open(path, "w", encoding="utf-8") as handle:
        for entity_id in sorted(store.records):
            record = store.records[entity_id]
            obj = {
                "id": record.id,
                "label": record.label,
                "aliases": list(record.aliases),
                "description": record.description,
                "instance_of": list(record.instance_of),
                "subclass_of": list(record.subclass_of),
            }
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")


@dataclass
class IngestStats:
    """Counts from one ingestion pass; kept + dropped == input records."""

    kept: int = 0
    dropped: int = 0
    drop_reasons: Counter = field(default_factory=Counter)

    def drop(self, reason: str) -> None:
        self.dropped += 1
        self.drop_reasons[reason] += 1

    def as_dict(self) -> dict:
        return {
            "kept": self.kept,
            "dropped": self.dropped,
            "drop_reasons": dict(self.drop_reasons),
        }


def _claim_targets(claims: dict, prop: str) -> list[str]:
    """Target entity ids of one property's statements, skipping unreadable ones."""
    targets = []
    for statement in claims.get(prop, ()):
        if isinstance(statement, str):
            targets.append(statement)
            continue
        try:
            value = statement["mainsnak"]["datavalue"]["value"]
        except (KeyError, TypeError):
            continue
        target = value.get("id") if isinstance(value, dict) else value
        if isinstance(target, str) and target:
            targets.append(target)
    return targets


def _english(field_value: dict | None) -> str:
    if not isinstance(field_value, dict):
        return ""
    en = field_value.get("en")
    if isinstance(en, dict):
        value = en.get("value", "")
        return value if isinstance(value, str) else ""
    return ""


def ingest_wikidata(raw_path: str, domain_allowlist: set[str], out_path: str) -> IngestStats:
    """Filter a raw Wikidata-style dump down to the compact five-property format.

    A record is kept iff it has an English label and at least one instance-of
    or subclass-of target in the allowlist. Unparseable records are counted
    and skipped; the stream is never aborted.
    """
    stats = IngestStats()
    ids_seen: set[str] = set()
    with open(raw_path, encoding="utf-8") as raw, open(out_path, "w", encoding="utf-8") as out:
        for line in raw:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                stats.drop("unparseable")
                continue
            if not isinstance(obj, dict) or not isinstance(obj.get("id"), str) or not obj["id"]:
                stats.drop("unparseable")
                continue
            label = _english(obj.get("labels"))
            if not label:
                stats.drop("no_english_label")
                continue
            claims = obj.get("claims") if isinstance(obj.get("claims"), dict) else {}
            instance_of = _claim_targets(claims, "P31")
            subclass_of = _claim_targets(claims, "P279")
            if not domain_allowlist.intersection(instance_of + subclass_of):
                stats.drop("outside_domain")
                continue
            if obj["id"] in ids_seen:
                stats.drop("duplicate_id")
                continue
            ids_seen.add(obj["id"])
            aliases_en = obj.get("aliases", {}).get("en", []) if isinstance(obj.get("aliases"), dict) else []
            aliases = [a["value"] for a in aliases_en if isinstance(a, dict) and isinstance(a.get("value"), str)]
            record = {
                "id": obj["id"],
                "label": label,
                "aliases": aliases,
                "description": _english(obj.get("descriptions")),
                "instance_of": instance_of,
                "subclass_of": subclass_of,
            }
            out.write(json.dumps(record, ensure_ascii=False) + "\n")
            stats.kept += 1
    return stats
