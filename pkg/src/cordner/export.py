"""Mention dumps (JSON), PubTator export, statistics and dump validation.

JSON dumps use inclusive ``end`` offsets (the last character of the
mention); PubTator files use exclusive ends. ``end_exclusive ==
end_inclusive + 1``.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List

from .ingest import Scope
from .pubtator import PubTatorDocument, RawAnnotation, parse_composed, serialize_composed
from .store import Store
from .tagger.external import OutputUnparseable, map_offsets, pseudo_id, split_pseudo_id
from .tagger.types import ENTITY_TYPES, Entity, EntityMention, EntityType, Location

RECORD_KEYS = {"location", "entity_str", "entity_type", "entity_id"}
LOCATION_KEYS = {"paragraph", "start", "end"}


class WriteFailure(OSError):
    pass


def mention_record(m: EntityMention) -> dict:
    return {
        "location": {"paragraph": m.location.paragraph, "start": m.location.start,
                     "end": m.location.end},
        "entity_str": m.entity_str,
        "entity_type": m.entity_type.value,
        "entity_id": m.entity_id,
    }


def _atomic_write(destination, content: str) -> None:
    destination = Path(destination)
    try:
        destination.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=destination.parent, prefix=f".{destination.name}.")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(content)
        os.replace(tmp, destination)
    except OSError as exc:
        raise WriteFailure(f"cannot write {destination}: {exc}") from exc


def build_dump(store: Store, scope=Scope.FULLTEXT) -> Dict[str, List[dict]]:
    dump = {pid: [] for pid in store.paper_ids()}
    for m in store.query_mentions(scope=scope):
        dump.setdefault(m.paper_id, []).append(mention_record(m))
    return dump


def render_dump(dump) -> str:
    return json.dumps(dump, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def export_json(store: Store, scope, destination) -> int:
    """Write the mention dump for ``scope``; returns the number of mentions."""
    dump = build_dump(store, Scope(scope))
    _atomic_write(destination, render_dump(dump))
    return sum(len(v) for v in dump.values())


def export_pubtator(store: Store, scope, destination, docs_per_file: int = 1000) -> int:
    """Write composed PubTator files, ``docs_per_file`` papers each.

    Title and abstract mentions go on the main document block; in fulltext
    scope every body paragraph follows as a ``<paper_id>:<index>``
    pseudo-document. Returns the number of files written.
    """
    scope = Scope(scope)
    if docs_per_file < 1:
        raise ValueError("docs_per_file must be >= 1")
    destination = Path(destination)
    ids = store.paper_ids()
    by_doc: Dict[str, List[EntityMention]] = {}
    for m in store.query_mentions(scope=scope):
        by_doc.setdefault(m.paper_id, []).append(m)
    files = 0
    for first in range(0, len(ids), docs_per_file):
        chunk = store.get_documents(ids[first:first + docs_per_file])
        blocks = []
        for doc in chunk:
            blocks.extend(_pubtator_blocks(doc, by_doc.get(doc.paper_id, []), scope))
        _atomic_write(destination / f"part-{files:05d}.pubtator", serialize_composed(blocks))
        files += 1
    return files


def _pubtator_blocks(doc, mentions, scope) -> List[PubTatorDocument]:
    main = PubTatorDocument(doc.paper_id, doc.title, doc.abstract)
    shift = len(doc.title) + 1
    body: Dict[int, PubTatorDocument] = {}
    if scope is Scope.FULLTEXT:
        for i, text in enumerate(doc.body_paragraphs, start=2):
            pid = pseudo_id(doc.paper_id, i)
            body[i] = PubTatorDocument(pid, pid, text)
    for m in mentions:
        loc = m.location
        if loc.paragraph <= 1:
            offset = 0 if loc.paragraph == 0 else shift
            target = main
        else:
            target = body[loc.paragraph]
            offset = len(target.title) + 1
        target.annotations.append(RawAnnotation(loc.start + offset, loc.end + 1 + offset,
                                                m.entity_str, m.entity_type.value, m.entity_id))
    return [main, *(body[i] for i in sorted(body))]


def read_pubtator_export(paths: Iterable) -> List[EntityMention]:
    """Parse files written by :func:`export_pubtator` back into mentions."""
    mentions = []
    for path in paths:
        for doc in parse_composed(Path(path).read_text(encoding="utf-8")):
            pseudo = None
            if doc.title == doc.doc_id:
                try:
                    pseudo = split_pseudo_id(doc.doc_id)
                except OutputUnparseable:
                    pass
            for ann in doc.annotations:
                entity = Entity(EntityType(ann.type_label), ann.id_label)
                if pseudo is not None:
                    paper_id, paragraph = pseudo
                    loc = map_offsets(doc, ann, paragraph)
                elif ann.end <= len(doc.title):
                    paper_id, loc = doc.doc_id, Location(0, ann.start, ann.end - 1)
                else:
                    paper_id = doc.doc_id
                    loc = map_offsets(doc, ann, 1)
                mentions.append(EntityMention(paper_id, loc, ann.surface, entity))
    mentions.sort(key=EntityMention.sort_key)
    return mentions


@dataclass
class StatsTable:
    counts: Dict[Scope, Dict[EntityType, int]]

    def row(self, scope) -> tuple:
        return tuple(self.counts[Scope(scope)][t] for t in ENTITY_TYPES)

    def as_dict(self):
        return {s.value: {t.value: n for t, n in row.items()} for s, row in self.counts.items()}

    def render(self) -> str:
        header = ["Corpus", *(f"{t.value}s" if t is not EntityType.SPECIES else "Species"
                              for t in ENTITY_TYPES)]
        rows = [["Abstracts", *map(str, self.row(Scope.ABSTRACTS))],
                ["Fulltexts", *map(str, self.row(Scope.FULLTEXT))]]
        widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
        lines = []
        for r in [header, *rows]:
            lines.append(" | ".join(c.rjust(w) if i else c.ljust(w)
                                    for i, (c, w) in enumerate(zip(r, widths))))
        lines.insert(1, "-+-".join("-" * w for w in widths))
        return "\n".join(lines)


def compute_stats(store: Store) -> StatsTable:
    return StatsTable({s: store.count_mentions(s) for s in Scope})


@dataclass
class ValidationResult:
    records: int = 0
    errors: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_dump(store: Store, dump) -> ValidationResult:
    """Check schema and span integrity of a parsed dump against the store."""
    result = ValidationResult()
    if not isinstance(dump, dict):
        result.errors.append("top level must be an object mapping paper ids to lists")
        return result
    texts = store.paragraph_texts()
    types = {t.value for t in ENTITY_TYPES}
    for paper_id, records in dump.items():
        if not isinstance(records, list):
            result.errors.append(f"{paper_id}: value must be a list")
            continue
        for n, r in enumerate(records):
            result.records += 1
            where = f"{paper_id}[{n}]"
            if not isinstance(r, dict) or set(r) != RECORD_KEYS:
                result.errors.append(f"{where}: keys must be exactly {sorted(RECORD_KEYS)}")
                continue
            loc = r["location"]
            if not isinstance(loc, dict) or set(loc) != LOCATION_KEYS or not all(
                    type(loc[k]) is int for k in LOCATION_KEYS):
                result.errors.append(f"{where}: location must hold integer "
                                     f"{sorted(LOCATION_KEYS)}")
                continue
            if not isinstance(r["entity_str"], str) or not isinstance(r["entity_id"], str):
                result.errors.append(f"{where}: entity_str and entity_id must be strings")
                continue
            if r["entity_type"] not in types:
                result.errors.append(f"{where}: bad entity_type {r['entity_type']!r}")
                continue
            text = texts.get((paper_id, loc["paragraph"]))
            if text is None:
                result.errors.append(f"{where}: no paragraph {loc['paragraph']} in the store")
                continue
            start, end = loc["start"], loc["end"]
            if not 0 <= start <= end < len(text) or text[start:end + 1] != r["entity_str"]:
                result.errors.append(f"{where}: {r['entity_str']!r} does not match paragraph "
                                     f"{loc['paragraph']} at [{start}, {end}]")
    return result


def validate_dump_file(store: Store, path) -> ValidationResult:
    try:
        with open(path, encoding="utf-8") as f:
            dump = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        return ValidationResult(errors=[f"cannot read {path}: {exc}"])
    return validate_dump(store, dump)
