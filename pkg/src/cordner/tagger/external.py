"""Adapter for PubTator-speaking command-line taggers (TaggerOne, GNormPlus).

Every paragraph is shipped as its own pseudo-document: id and title are
``<paper_id>:<paragraph>``, the paragraph text is the abstract. Offsets in
the tool's output are mapped back to paragraph-local, inclusive-end
locations.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import shlex
import shutil
import signal
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, List, Optional, Sequence

from ..pubtator import (PubTatorDocument, PubTatorError, RawAnnotation, parse_composed,
                        serialize_composed)
from .types import ENTITY_TYPES, Entity, EntityMention, EntityType, Location

logger = logging.getLogger(__name__)

SCRATCH_ENV = "CORDNER_SCRATCH"

_PSEUDO_ID_RE = re.compile(r"^(.+):(\d+)$")

# Raw id prefixes emitted by the upstream tools, mapped onto ours.
_PREFIX_ALIASES = {
    "MESH:": "MESH:", "MeSH:": "MESH:", "mesh:": "MESH:",
    "OMIM:": "OMIM:", "omim:": "OMIM:",
    "GENE:": "GENE:", "NCBIGene:": "GENE:", "Gene:": "GENE:",
    "TAXON:": "TAXON:", "Tax:": "TAXON:", "NCBITaxon:": "TAXON:", "taxon:": "TAXON:",
}
_DEFAULT_PREFIX = {
    EntityType.CHEMICAL: "MESH:",
    EntityType.DISEASE: "MESH:",
    EntityType.GENE: "GENE:",
    EntityType.SPECIES: "TAXON:",
}


class ExternalTaggerError(RuntimeError):
    pass


class ProcessTimeout(ExternalTaggerError):
    pass


class NonZeroExit(ExternalTaggerError):
    pass


class OutputUnparseable(ExternalTaggerError):
    pass


class OffsetUnmappable(ExternalTaggerError):
    pass


@dataclass(frozen=True)
class TaggerBackendConfig:
    name: str
    kind: str = "lexicon"                     # "lexicon" | "external"
    entity_types: FrozenSet[EntityType] = frozenset(ENTITY_TYPES)
    vocabulary: Optional[str] = None          # lexicon: path to the vocabulary file
    command: Optional[str] = None             # external: template with {input} / {output}
    workdir: Optional[str] = None             # external: parent of per-batch scratch dirs
    timeout: float = 600.0
    batch_size: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "entity_types",
                           frozenset(EntityType(t) for t in self.entity_types))
        if self.kind not in ("lexicon", "external"):
            raise ValueError(f"backend {self.name}: unknown kind {self.kind!r}")
        if not self.entity_types:
            raise ValueError(f"backend {self.name}: no entity types declared")
        if self.timeout <= 0:
            raise ValueError(f"backend {self.name}: timeout must be > 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"backend {self.name}: batch size must be >= 1")
        if self.kind == "external":
            if not self.command or "{input}" not in self.command:
                raise ValueError(f"backend {self.name}: command needs an {{input}} placeholder")
        elif not self.vocabulary:
            raise ValueError(f"backend {self.name}: lexicon backend needs a vocabulary")

    def fingerprint(self) -> str:
        payload = {
            "name": self.name, "kind": self.kind,
            "types": sorted(t.value for t in self.entity_types),
            "command": self.command,
        }
        if self.vocabulary:
            with open(self.vocabulary, "rb") as f:
                payload["vocabulary_sha256"] = hashlib.sha256(f.read()).hexdigest()
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def pseudo_id(paper_id: str, paragraph: int) -> str:
    return f"{paper_id}:{paragraph}"


def split_pseudo_id(doc_id: str):
    m = _PSEUDO_ID_RE.match(doc_id)
    if not m:
        raise OutputUnparseable(f"not a pseudo-document id: {doc_id!r}")
    return m.group(1), int(m.group(2))


def package_paragraph(ref) -> PubTatorDocument:
    doc_id = pseudo_id(ref.paper_id, ref.paragraph)
    return PubTatorDocument(doc_id, doc_id, ref.text)


def map_offsets(origin: PubTatorDocument, annotation: RawAnnotation,
                paragraph_index: int) -> Location:
    """Map a document-level, exclusive-end annotation inside the abstract slot
    of ``origin`` to a paragraph-local, inclusive-end Location."""
    shift = len(origin.title) + 1
    if annotation.start < shift:
        raise OffsetUnmappable(
            f"annotation [{annotation.start},{annotation.end}) of {origin.doc_id} "
            f"starts inside the title region (abstract begins at {shift})")
    if annotation.end > len(origin.text):
        raise OffsetUnmappable(f"annotation [{annotation.start},{annotation.end}) of "
                               f"{origin.doc_id} runs past the document end")
    return Location(paragraph_index, annotation.start - shift, annotation.end - shift - 1)


def normalize_entity_id(entity_type: EntityType, raw: str) -> Optional[str]:
    """Bring a tool-emitted id into ``PREFIX:local`` form; None if absent."""
    raw = raw.strip()
    if raw in ("", "-", "None"):
        return None
    for alias, prefix in _PREFIX_ALIASES.items():
        if raw.startswith(alias):
            return prefix + raw[len(alias):]
    return _DEFAULT_PREFIX[entity_type] + raw


def _render_command(template: str, input_path: Path, output_path: Path) -> List[str]:
    args = []
    for token in shlex.split(template):
        args.append(token.replace("{input}", str(input_path))
                         .replace("{output}", str(output_path)))
    return args


def _run(args, cwd, timeout):
    proc = subprocess.Popen(args, cwd=cwd, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                            stdin=subprocess.DEVNULL, start_new_session=True)
    try:
        stdout, stderr = proc.communicate(timeout=timeout)
    except subprocess.TimeoutExpired:
        # kill the whole process group: wrappers like `sh -c` leave children behind
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        proc.communicate()
        raise ProcessTimeout(f"{args[0]} exceeded {timeout:g}s") from None
    return proc.returncode, stdout, stderr


def run_external(config: TaggerBackendConfig, batch: Sequence[PubTatorDocument],
                 keep_scratch: bool = False) -> List[EntityMention]:
    """Tag a batch of pseudo-documents with the configured command.

    The command runs once, in a fresh scratch directory. Without an
    ``{output}`` placeholder the tool's stdout is read as its output.
    """
    if not batch:
        return []
    by_id = {doc.doc_id: doc for doc in batch}
    parent = config.workdir or os.environ.get(SCRATCH_ENV) or None
    if parent:
        os.makedirs(parent, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f"{config.name}-", dir=parent))
    try:
        input_path = scratch / "input.pubtator"
        output_path = scratch / "output.pubtator"
        input_path.write_text(serialize_composed(batch), encoding="utf-8")
        args = _render_command(config.command, input_path, output_path)
        code, stdout, stderr = _run(args, scratch, config.timeout)
        if code != 0:
            tail = stderr.decode("utf-8", "replace").strip()[-500:]
            raise NonZeroExit(f"{args[0]} exited with {code}: {tail}")
        try:
            if "{output}" in config.command:
                raw = output_path.read_text(encoding="utf-8")
            else:
                raw = stdout.decode("utf-8")
            tagged = parse_composed(raw)
        except (OSError, UnicodeDecodeError, PubTatorError) as exc:
            raise OutputUnparseable(f"{config.name}: {exc}") from exc
        return _collect(config, by_id, tagged)
    finally:
        if not keep_scratch:
            shutil.rmtree(scratch, ignore_errors=True)


def _collect(config, by_id, tagged) -> List[EntityMention]:
    mentions = []
    for doc in tagged:
        origin = by_id.get(doc.doc_id)
        if origin is None:
            raise OutputUnparseable(f"{config.name}: unknown document id {doc.doc_id!r} in output")
        if doc.title != origin.title or doc.abstract != origin.abstract:
            raise OutputUnparseable(f"{config.name}: text of {doc.doc_id} was altered")
        paper_id, paragraph = split_pseudo_id(doc.doc_id)
        for ann in doc.annotations:
            try:
                etype = EntityType(ann.type_label)
            except ValueError:
                continue
            if etype not in config.entity_types:
                continue
            entity_id = normalize_entity_id(etype, ann.id_label)
            if entity_id is None:
                logger.debug("dropping %s annotation without id in %s", etype, doc.doc_id)
                continue
            loc = map_offsets(origin, ann, paragraph)
            mentions.append(EntityMention(paper_id, loc, ann.surface, Entity(etype, entity_id)))
    return mentions
