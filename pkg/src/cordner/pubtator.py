"""PubTator text format: single files, composed files and directories.

Annotation offsets are document-level: they index into ``title + " " +
abstract`` and ``end`` is exclusive. Offsets count Unicode code points.
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence

DEFAULT_EXTENSIONS = (".txt", ".pubtator")

_TITLE_RE = re.compile(r"^([^|\t]+)\|t\|(.*)$")
_ABSTRACT_RE = re.compile(r"^([^|\t]+)\|a\|(.*)$")


class PubTatorError(ValueError):
    """Base class for format errors. ``block`` is set by :func:`parse_composed`."""

    def __init__(self, message, line=None):
        self.message = message
        self.line = line
        self.block = None
        super().__init__(message)

    def __str__(self):
        parts = []
        if self.block is not None:
            parts.append(f"block {self.block}")
        if self.line is not None:
            parts.append(f"line {self.line}")
        prefix = ", ".join(parts)
        return f"{prefix}: {self.message}" if prefix else self.message


class MalformedLine(PubTatorError):
    pass


class IdMismatch(PubTatorError):
    pass


class SpanOutOfBounds(PubTatorError):
    pass


class SurfaceMismatch(PubTatorError):
    pass


class InvariantViolation(PubTatorError):
    pass


class DirectoryUnreadable(OSError):
    pass


@dataclass
class RawAnnotation:
    start: int
    end: int
    surface: str
    type_label: str
    id_label: str


@dataclass
class PubTatorDocument:
    doc_id: str
    title: str
    abstract: str
    annotations: List[RawAnnotation] = field(default_factory=list)

    @property
    def text(self) -> str:
        return f"{self.title} {self.abstract}"

    def check(self, error=InvariantViolation) -> None:
        """Raise ``error`` (or a more specific subclass) if an invariant fails."""
        if not self.doc_id or "|" in self.doc_id or "\t" in self.doc_id \
                or "\n" in self.doc_id:
            raise error(f"invalid document id {self.doc_id!r}")
        for name in ("title", "abstract"):
            if "\n" in getattr(self, name) or "\r" in getattr(self, name):
                raise error(f"{name} of {self.doc_id} contains a line break")
        text = self.text
        for ann in self.annotations:
            _check_annotation(ann, text, self.doc_id, error)


def _check_annotation(ann, text, doc_id, error=None, line=None):
    if not 0 <= ann.start < ann.end <= len(text):
        exc = error or SpanOutOfBounds
        raise exc(f"span [{ann.start},{ann.end}) outside document {doc_id} "
                  f"of length {len(text)}", line)
    if text[ann.start:ann.end] != ann.surface:
        exc = error or SurfaceMismatch
        raise exc(f"surface {ann.surface!r} != text slice "
                  f"{text[ann.start:ann.end]!r} in document {doc_id}", line)
    for value in (ann.surface, ann.type_label, ann.id_label):
        if "\t" in value or "\n" in value:
            raise (error or InvariantViolation)(
                f"annotation field {value!r} contains a tab or newline", line)


def _lines(text: str) -> List[str]:
    return text.replace("\r\n", "\n").split("\n")


def _parse_lines(lines: Sequence[str], first_line: int = 1) -> PubTatorDocument:
    doc = None
    abstract_seen = False
    for offset, line in enumerate(lines):
        lineno = first_line + offset
        if doc is None:
            m = _TITLE_RE.match(line)
            if not m:
                raise MalformedLine(f"expected a title line, got {line!r}", lineno)
            doc = PubTatorDocument(m.group(1), m.group(2), "")
            continue
        if not abstract_seen:
            m = _ABSTRACT_RE.match(line)
            if not m:
                raise MalformedLine(f"expected an abstract line, got {line!r}", lineno)
            if m.group(1) != doc.doc_id:
                raise IdMismatch(f"abstract id {m.group(1)!r} != title id {doc.doc_id!r}",
                                 lineno)
            doc.abstract = m.group(2)
            abstract_seen = True
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            raise MalformedLine(f"annotation line needs 6 tab-separated fields, "
                                f"got {len(fields)}: {line!r}", lineno)
        doc_id, start, end, surface, type_label, id_label = fields
        if not (start.isdigit() and end.isdigit() and start.isascii() and end.isascii()):
            raise MalformedLine(f"non-integer offsets in {line!r}", lineno)
        if doc_id != doc.doc_id:
            raise IdMismatch(f"annotation id {doc_id!r} != title id {doc.doc_id!r}", lineno)
        ann = RawAnnotation(int(start), int(end), surface, type_label, id_label)
        _check_annotation(ann, doc.text, doc.doc_id, line=lineno)
        doc.annotations.append(ann)
    if doc is None:
        raise MalformedLine("empty document: no title line", first_line)
    if not abstract_seen:
        raise MalformedLine(f"document {doc.doc_id} has no abstract line",
                            first_line + len(lines))
    return doc


def parse_single(text: str) -> PubTatorDocument:
    """Parse one PubTator document. Leading and trailing blank lines are ignored."""
    lines = _lines(text)
    lo, hi = 0, len(lines)
    while lo < hi and not lines[lo].strip():
        lo += 1
    while hi > lo and not lines[hi - 1].strip():
        hi -= 1
    return _parse_lines(lines[lo:hi], first_line=lo + 1)


def _blocks(text: str):
    current, start = [], 0
    for i, line in enumerate(_lines(text)):
        if line.strip():
            if not current:
                start = i + 1
            current.append(line)
        elif current:
            yield start, current
            current = []
    if current:
        yield start, current


def iter_composed(text: str) -> Iterator[PubTatorDocument]:
    for index, (first_line, block) in enumerate(_blocks(text)):
        try:
            yield _parse_lines(block, first_line)
        except PubTatorError as exc:
            exc.block = index
            raise


def parse_composed(text: str) -> List[PubTatorDocument]:
    """Parse any number of documents separated by one or more blank lines."""
    return list(iter_composed(text))


def serialize(document: PubTatorDocument) -> str:
    document.check()
    out = [f"{document.doc_id}|t|{document.title}", f"{document.doc_id}|a|{document.abstract}"]
    for a in document.annotations:
        out.append(f"{document.doc_id}\t{a.start}\t{a.end}\t{a.surface}\t{a.type_label}\t{a.id_label}")
    return "\n".join(out) + "\n"


def serialize_composed(documents: Sequence[PubTatorDocument]) -> str:
    return "\n".join(serialize(d) for d in documents)


@dataclass
class ScanEntry:
    name: str
    documents: List[PubTatorDocument]
    error: Optional[Exception] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def scan_directory(path, extensions: Sequence[str] = DEFAULT_EXTENSIONS) -> Iterator[ScanEntry]:
    """Yield one entry per matching file, in lexicographic file-name order.

    A file that fails to read or parse produces an entry with ``error`` set;
    the scan continues with the next file.
    """
    path = Path(path)
    try:
        names = sorted(e.name for e in os.scandir(path)
                       if e.is_file() and e.name.endswith(tuple(extensions)))
    except OSError as exc:
        raise DirectoryUnreadable(f"cannot read directory {path}: {exc}") from exc
    for name in names:
        try:
            docs = parse_composed((path / name).read_text(encoding="utf-8"))
        except (PubTatorError, OSError, UnicodeDecodeError) as exc:
            yield ScanEntry(name, [], exc)
        else:
            yield ScanEntry(name, docs)


def read_input(path, extensions: Sequence[str] = DEFAULT_EXTENSIONS) -> Iterator[ScanEntry]:
    """Read a single, composed, or directory-of-files PubTator input."""
    path = Path(path)
    if path.is_dir():
        yield from scan_directory(path, extensions)
        return
    try:
        docs = parse_composed(path.read_text(encoding="utf-8"))
    except (PubTatorError, UnicodeDecodeError) as exc:
        yield ScanEntry(path.name, [], exc)
    else:
        yield ScanEntry(path.name, docs)
