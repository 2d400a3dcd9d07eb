"""CORD-19 JSON parses to paragraph-indexed documents.

Paragraph 0 is the title, 1 the abstract, 2.. the body texts in order.
"""
from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

logger = logging.getLogger(__name__)

ABSTRACT_JOINER = " "

_LINEBREAK_RE = re.compile(r"\r\n|[\r\n]")


class Scope(str, enum.Enum):
    ABSTRACTS = "abstracts"
    FULLTEXT = "fulltext"

    def __str__(self):
        return self.value

    def includes(self, paragraph: int) -> bool:
        return self is Scope.FULLTEXT or paragraph <= 1


class IngestError(ValueError):
    pass


class JsonMalformed(IngestError):
    pass


class MissingPaperId(IngestError):
    pass


class MissingBodyText(IngestError):
    pass


def normalize_text(text: str) -> str:
    """Replace each line break (``\\r\\n``, ``\\r`` or ``\\n``) with one space."""
    return _LINEBREAK_RE.sub(" ", text)


@dataclass
class Document:
    paper_id: str
    title: str = ""
    abstract_paragraphs: List[str] = field(default_factory=list)
    body_paragraphs: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.paper_id:
            raise MissingPaperId("paper_id must be non-empty")
        self.title = normalize_text(self.title)
        self.abstract_paragraphs = [normalize_text(p) for p in self.abstract_paragraphs]
        self.body_paragraphs = [normalize_text(p) for p in self.body_paragraphs]

    @property
    def abstract(self) -> str:
        return ABSTRACT_JOINER.join(self.abstract_paragraphs)

    @property
    def paragraph_count(self) -> int:
        return 2 + len(self.body_paragraphs)

    def paragraph_texts(self) -> List[str]:
        return [self.title, self.abstract, *self.body_paragraphs]


@dataclass(frozen=True)
class ParagraphRef:
    paper_id: str
    paragraph: int
    text: str


def _texts(entries, what):
    if not isinstance(entries, list):
        raise JsonMalformed(f"{what} must be a list")
    out = []
    for entry in entries:
        if not isinstance(entry, dict) or not isinstance(entry.get("text"), str):
            raise JsonMalformed(f"{what} entries must be objects with a string 'text'")
        out.append(entry["text"])
    return out


def parse_cord19(text: str, require_body: bool = True) -> Document:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JsonMalformed(str(exc)) from exc
    if not isinstance(data, dict):
        raise JsonMalformed("top-level value must be an object")
    paper_id = data.get("paper_id")
    if not isinstance(paper_id, str) or not paper_id:
        raise MissingPaperId("missing or empty 'paper_id'")
    metadata = data.get("metadata") or {}
    if not isinstance(metadata, dict):
        raise JsonMalformed("'metadata' must be an object")
    title = metadata.get("title") or ""
    if not isinstance(title, str):
        raise JsonMalformed("'metadata.title' must be a string")
    abstract = _texts(data.get("abstract") or [], "abstract")
    if "body_text" not in data:
        if require_body:
            raise MissingBodyText(f"{paper_id}: no 'body_text' field")
        body = []
    else:
        body = _texts(data["body_text"], "body_text")
    return Document(paper_id, title, abstract, body)


def paragraphs(document: Document, scope=Scope.FULLTEXT) -> List[ParagraphRef]:
    scope = Scope(scope)
    texts = document.paragraph_texts()
    if scope is Scope.ABSTRACTS:
        texts = texts[:2]
    return [ParagraphRef(document.paper_id, i, t) for i, t in enumerate(texts)]


@dataclass
class IngestReport:
    ingested: int = 0
    skipped: int = 0
    failed: int = 0
    duplicates: List[str] = field(default_factory=list)
    errors: List[tuple] = field(default_factory=list)

    def as_dict(self):
        return {"ingested": self.ingested, "skipped": self.skipped, "failed": self.failed,
                "duplicates": list(self.duplicates)}


def ingest_collection(path, store, require_body: bool = True) -> IngestReport:
    """Upsert every ``*.json`` parse under ``path`` (non-recursive).

    Files without ``body_text`` count as skipped when ``require_body`` is set;
    unreadable or malformed files count as failed. Neither stops the run.
    """
    path = Path(path)
    report = IngestReport()
    seen = {}
    for file in sorted(path.glob("*.json")):
        try:
            doc = parse_cord19(file.read_text(encoding="utf-8"), require_body=require_body)
        except MissingBodyText as exc:
            report.skipped += 1
            report.errors.append((file.name, str(exc)))
            continue
        except (IngestError, OSError, UnicodeDecodeError) as exc:
            logger.warning("failed to ingest %s: %s", file.name, exc)
            report.failed += 1
            report.errors.append((file.name, str(exc)))
            continue
        if doc.paper_id in seen:
            logger.info("%s: duplicate paper_id %s (first in %s), last file wins",
                        file.name, doc.paper_id, seen[doc.paper_id])
            report.duplicates.append(doc.paper_id)
        seen[doc.paper_id] = file.name
        store.upsert_document(doc)
        report.ingested += 1
    return report


def ingest_pubtator(path, store) -> IngestReport:
    """Upsert title/abstract documents from a PubTator file or directory.

    Annotations present in the input are not imported.
    """
    from .pubtator import read_input

    report = IngestReport()
    seen = set()
    for entry in read_input(path):
        if not entry.ok:
            report.failed += 1
            report.errors.append((entry.name, str(entry.error)))
            continue
        for pdoc in entry.documents:
            if pdoc.doc_id in seen:
                report.duplicates.append(pdoc.doc_id)
            seen.add(pdoc.doc_id)
            abstract = [pdoc.abstract] if pdoc.abstract else []
            store.upsert_document(Document(pdoc.doc_id, pdoc.title, abstract, []))
            report.ingested += 1
    return report
