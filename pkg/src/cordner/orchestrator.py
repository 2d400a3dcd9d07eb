"""Split the corpus into batches and run tagger backends over them in parallel.

Batches are pulled from a shared queue by a thread pool; results are
committed in plan order (paper id order per backend), one transaction per
document, so the stored state does not depend on the worker count.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .ingest import Document, Scope, paragraphs
from .store import Store
from .tagger.external import SCRATCH_ENV, TaggerBackendConfig, package_paragraph, run_external
from .tagger.lexicon import tag_document
from .tagger.types import ENTITY_TYPES, EntityMention, EntityType
from .tagger.vocabulary import read_vocabulary

logger = logging.getLogger(__name__)

WORKERS_ENV = "CORDNER_WORKERS"


class ConfigError(ValueError):
    pass


class PipelineFailed(RuntimeError):
    def __init__(self, report):
        super().__init__(f"all {len(report.failures)} batches failed")
        self.report = report


class LexiconBackend:
    def __init__(self, config: TaggerBackendConfig):
        self.config = config
        self.name = config.name
        self.entity_types = config.entity_types
        self.vocabulary = read_vocabulary(config.vocabulary).restrict(config.entity_types)
        self.batch_size = config.batch_size
        self._fingerprint = config.fingerprint()

    def fingerprint(self) -> str:
        return self._fingerprint

    def tag_batch(self, documents: Sequence[Document], scope) -> List[EntityMention]:
        out = []
        for doc in documents:
            out.extend(tag_document(self.vocabulary, paragraphs(doc, scope)))
        return out


class ExternalBackend:
    def __init__(self, config: TaggerBackendConfig):
        self.config = config
        self.name = config.name
        self.entity_types = config.entity_types
        self.batch_size = config.batch_size
        self._fingerprint = config.fingerprint()

    def fingerprint(self) -> str:
        return self._fingerprint

    def tag_batch(self, documents: Sequence[Document], scope) -> List[EntityMention]:
        batch = [package_paragraph(ref) for doc in documents
                 for ref in paragraphs(doc, scope) if ref.text]
        return run_external(self.config, batch)


def build_backend(config):
    """Turn a TaggerBackendConfig into a backend; other objects pass through.

    A backend needs ``name``, ``entity_types``, ``fingerprint()`` and
    ``tag_batch(documents, scope)``.
    """
    if not isinstance(config, TaggerBackendConfig):
        return config
    if config.kind == "external":
        return ExternalBackend(config)
    return LexiconBackend(config)


@dataclass
class PipelineConfig:
    backends: list
    workers: int = 1
    batch_size: int = 32
    scope: Scope = Scope.FULLTEXT
    retry_limit: int = 1

    def __post_init__(self):
        self.scope = Scope(self.scope)
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.retry_limit < 0:
            raise ConfigError("retry_limit must be >= 0")
        if not self.backends:
            raise ConfigError("at least one backend is required")
        owner: Dict[EntityType, str] = {}
        names = set()
        for b in self.backends:
            if b.name in names:
                raise ConfigError(f"duplicate backend name {b.name!r}")
            names.add(b.name)
            for t in b.entity_types:
                if t in owner:
                    raise ConfigError(f"entity type {t.value} handled by both "
                                      f"{owner[t]!r} and {b.name!r}")
                owner[t] = b.name


@dataclass
class BatchFailure:
    batch_id: str
    backend: str
    error: str
    paper_ids: List[str]


@dataclass
class RunReport:
    run_id: Optional[int] = None
    scheduled: int = 0
    processed: int = 0
    failed: int = 0
    mentions: Dict[EntityType, int] = field(default_factory=lambda: {t: 0 for t in ENTITY_TYPES})
    duration: float = 0.0
    failures: List[BatchFailure] = field(default_factory=list)

    def as_dict(self):
        return {
            "run_id": self.run_id, "scheduled": self.scheduled,
            "processed": self.processed, "failed": self.failed,
            "mentions": {t.value: n for t, n in self.mentions.items()},
            "duration_s": round(self.duration, 3),
            "failures": [vars(f) for f in self.failures],
        }


def plan_batches(documents: Sequence, batch_size: int) -> List[list]:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    docs = list(documents)
    return [docs[i:i + batch_size] for i in range(0, len(docs), batch_size)]


def _tag_with_retries(backend, store, paper_ids, scope, retry_limit):
    documents = store.get_documents(paper_ids)
    last = None
    for attempt in range(retry_limit + 1):
        try:
            return backend.tag_batch(documents, scope), None
        except Exception as exc:  # backends may fail arbitrarily; report, don't abort
            last = exc
            logger.warning("backend %s failed on batch starting %s (attempt %d): %s",
                           backend.name, paper_ids[0], attempt + 1, exc)
    return None, last


def run_pipeline(config: PipelineConfig, store: Store) -> RunReport:
    t0 = time.perf_counter()
    backends = [build_backend(b) for b in config.backends]
    all_ids = store.paper_ids()
    scope_tag = config.scope.value
    plans = []
    scheduled = set()
    for backend in backends:
        fp = f"{backend.fingerprint()}/{scope_tag}"
        done = store.completed(backend.name, fp)
        pending = [pid for pid in all_ids if pid not in done]
        scheduled.update(pending)
        size = getattr(backend, "batch_size", None) or config.batch_size
        for i, batch in enumerate(plan_batches(pending, size)):
            plans.append((backend, fp, f"{backend.name}#{i}", batch))

    report = RunReport(scheduled=len(scheduled))
    if not plans:
        report.duration = time.perf_counter() - t0
        return report

    run_fp = hashlib.sha256(json.dumps(sorted({fp for _, fp, _, _ in plans})).encode())
    report.run_id = store.begin_run(run_fp.hexdigest()[:16])
    failed_ids = set()
    status = "aborted"
    try:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_tag_with_retries, backend, store, batch,
                                   config.scope, config.retry_limit)
                       for backend, _, _, batch in plans]
            try:
                for (backend, fp, batch_id, batch), future in zip(plans, futures):
                    mentions, error = future.result()
                    if error is not None:
                        report.failures.append(BatchFailure(batch_id, backend.name,
                                                            f"{type(error).__name__}: {error}",
                                                            list(batch)))
                        failed_ids.update(batch)
                        continue
                    by_doc: Dict[str, List[EntityMention]] = {pid: [] for pid in batch}
                    for m in mentions:
                        if m.entity_type in backend.entity_types and m.paper_id in by_doc:
                            by_doc[m.paper_id].append(m)
                    for pid in batch:
                        inserted = store.commit_document(pid, backend.name, fp, report.run_id,
                                                         by_doc[pid])
                        for t, n in inserted.items():
                            report.mentions[t] += n
            except BaseException:
                for f in futures:
                    f.cancel()
                raise
        status = "failed" if len(report.failures) == len(plans) else "done"
    finally:
        report.failed = len(failed_ids)
        report.processed = report.scheduled - report.failed
        report.duration = time.perf_counter() - t0
        store.finish_run(report.run_id, status)
    if status == "failed":
        raise PipelineFailed(report)
    return report


def _types(value: str):
    return frozenset(EntityType(t.strip()) for t in value.split(",") if t.strip())


def load_config(path, environ=None) -> PipelineConfig:
    """Read an INI pipeline config.

    ``[pipeline]`` holds ``scope``, ``workers``, ``batch_size`` and
    ``retry_limit``; each ``[backend.<name>]`` section declares one backend.
    Relative vocabulary/workdir paths resolve against the config file's
    directory and ``{config_dir}`` is substituted in commands.
    ``CORDNER_WORKERS`` and ``CORDNER_SCRATCH`` override workers and every
    external backend's workdir.
    """
    environ = os.environ if environ is None else environ
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as f:
            parser.read_file(f)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    base = path.resolve().parent

    def resolve(p):
        return str(p if Path(p).is_absolute() else base / p)

    try:
        section = parser["pipeline"] if parser.has_section("pipeline") else {}
        workers = int(environ.get(WORKERS_ENV) or section.get("workers", 1))
        scratch = environ.get(SCRATCH_ENV)
        backends = []
        for name in parser.sections():
            if not name.startswith("backend."):
                if name != "pipeline":
                    raise ConfigError(f"unknown section [{name}]")
                continue
            sec = parser[name]
            kind = sec.get("kind", "lexicon")
            workdir = sec.get("workdir")
            if kind == "external" and scratch:
                workdir = scratch
            command = sec.get("command")
            backends.append(TaggerBackendConfig(
                name=name[len("backend."):],
                kind=kind,
                entity_types=_types(sec.get("entity_types", ",".join(t.value for t in ENTITY_TYPES))),
                vocabulary=resolve(sec["vocabulary"]) if "vocabulary" in sec else None,
                command=command.replace("{config_dir}", str(base)) if command else None,
                workdir=resolve(workdir) if workdir else None,
                timeout=sec.getfloat("timeout", 600.0),
                batch_size=sec.getint("batch_size") if "batch_size" in sec else None,
            ))
        return PipelineConfig(
            backends=backends,
            workers=workers,
            batch_size=int(section.get("batch_size", 32)),
            scope=Scope(section.get("scope", "fulltext")),
            retry_limit=int(section.get("retry_limit", 1)),
        )
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
