"""SQLite persistence for documents, paragraphs, mentions and runs.

All writes go through one connection guarded by a lock, so a single
:class:`Store` can be shared by worker threads.
"""
from __future__ import annotations

import contextlib
import datetime
import hashlib
import sqlite3
import threading
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence

from .ingest import Document, Scope
from .tagger.types import Entity, EntityMention, EntityType, Location

SCHEMA_VERSION = 1

_SCHEMA = """
CREATE TABLE IF NOT EXISTS schema_version (version INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS documents (
    paper_id TEXT PRIMARY KEY,
    title TEXT NOT NULL,
    paragraph_count INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS paragraphs (
    paper_id TEXT NOT NULL REFERENCES documents(paper_id) ON DELETE CASCADE,
    idx INTEGER NOT NULL,
    text TEXT NOT NULL,
    PRIMARY KEY (paper_id, idx)
);
CREATE TABLE IF NOT EXISTS runs (
    run_id INTEGER PRIMARY KEY AUTOINCREMENT,
    fingerprint TEXT NOT NULL,
    started TEXT NOT NULL,
    finished TEXT,
    status TEXT NOT NULL DEFAULT 'running'
);
CREATE TABLE IF NOT EXISTS mentions (
    paper_id TEXT NOT NULL,
    paragraph INTEGER NOT NULL,
    start_pos INTEGER NOT NULL,
    end_pos INTEGER NOT NULL,
    entity_str TEXT NOT NULL,
    entity_type TEXT NOT NULL
        CHECK (entity_type IN ('Chemical', 'Disease', 'Gene', 'Species')),
    entity_id TEXT NOT NULL,
    backend TEXT NOT NULL,
    run_id INTEGER REFERENCES runs(run_id),
    UNIQUE (paper_id, paragraph, start_pos, end_pos, entity_type, entity_id),
    FOREIGN KEY (paper_id, paragraph) REFERENCES paragraphs(paper_id, idx) ON DELETE CASCADE
);
CREATE TABLE IF NOT EXISTS completions (
    paper_id TEXT NOT NULL REFERENCES documents(paper_id) ON DELETE CASCADE,
    backend TEXT NOT NULL,
    fingerprint TEXT NOT NULL,
    run_id INTEGER REFERENCES runs(run_id),
    PRIMARY KEY (paper_id, backend, fingerprint)
);
CREATE INDEX IF NOT EXISTS mentions_type ON mentions(entity_type);
"""

_CONTENT_TABLES = {
    "documents": "paper_id",
    "paragraphs": "paper_id, idx",
    "mentions": "paper_id, paragraph, start_pos, end_pos, entity_type, entity_id",
    "completions": "paper_id, backend, fingerprint",
}


class StorageFailure(RuntimeError):
    pass


class SpanIntegrityViolation(StorageFailure):
    pass


class SchemaTooNew(StorageFailure):
    pass


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


class Store:
    def __init__(self, path=":memory:"):
        self.path = str(path)
        self._lock = threading.RLock()
        try:
            self._conn = sqlite3.connect(self.path, check_same_thread=False,
                                         isolation_level=None, timeout=30)
            self._conn.execute("PRAGMA foreign_keys = ON")
            if self.path != ":memory:":
                self._conn.execute("PRAGMA journal_mode = WAL")
            self._migrate()
        except sqlite3.Error as exc:
            raise StorageFailure(f"cannot open store {self.path}: {exc}") from exc

    def _migrate(self):
        with self.transaction() as cur:
            tables = {r[0] for r in cur.execute(
                "SELECT name FROM sqlite_master WHERE type = 'table'")}
            if "schema_version" in tables:
                row = cur.execute("SELECT MAX(version) FROM schema_version").fetchone()
                version = row[0] or 0
                if version > SCHEMA_VERSION:
                    raise SchemaTooNew(f"store schema version {version} is newer than "
                                       f"supported version {SCHEMA_VERSION}")
            else:
                version = 0
            for statement in _SCHEMA.split(";"):
                if statement.strip():
                    cur.execute(statement)
            if version < SCHEMA_VERSION:
                cur.execute("DELETE FROM schema_version")
                cur.execute("INSERT INTO schema_version VALUES (?)", (SCHEMA_VERSION,))

    def close(self):
        with self._lock:
            self._conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @contextlib.contextmanager
    def transaction(self) -> Iterator[sqlite3.Cursor]:
        with self._lock:
            cur = self._conn.cursor()
            try:
                cur.execute("BEGIN IMMEDIATE")
                yield cur
                cur.execute("COMMIT")
            except BaseException:
                if self._conn.in_transaction:
                    self._conn.execute("ROLLBACK")
                raise
            finally:
                cur.close()

    def _read(self, sql, params=()):
        with self._lock:
            try:
                return self._conn.execute(sql, params).fetchall()
            except sqlite3.Error as exc:
                raise StorageFailure(str(exc)) from exc

    # documents

    def upsert_document(self, document: Document) -> None:
        """Insert or replace a document. Mentions on paragraphs whose text
        changed or that disappeared are deleted, as are its completion marks."""
        texts = document.paragraph_texts()
        try:
            with self.transaction() as cur:
                old = dict(cur.execute("SELECT idx, text FROM paragraphs WHERE paper_id = ?",
                                       (document.paper_id,)).fetchall())
                row = cur.execute("SELECT title, paragraph_count FROM documents "
                                  "WHERE paper_id = ?", (document.paper_id,)).fetchone()
                if row == (document.title, len(texts)) and old == dict(enumerate(texts)):
                    return
                if row is None:
                    cur.execute("INSERT INTO documents VALUES (?, ?, ?)",
                                (document.paper_id, document.title, len(texts)))
                else:
                    cur.execute("UPDATE documents SET title = ?, paragraph_count = ? "
                                "WHERE paper_id = ?",
                                (document.title, len(texts), document.paper_id))
                    cur.execute("DELETE FROM completions WHERE paper_id = ?",
                                (document.paper_id,))
                for idx in sorted(set(old) - set(range(len(texts)))):
                    cur.execute("DELETE FROM paragraphs WHERE paper_id = ? AND idx = ?",
                                (document.paper_id, idx))
                for idx, text in enumerate(texts):
                    if idx not in old:
                        cur.execute("INSERT INTO paragraphs VALUES (?, ?, ?)",
                                    (document.paper_id, idx, text))
                    elif old[idx] != text:
                        cur.execute("DELETE FROM mentions WHERE paper_id = ? AND paragraph = ?",
                                    (document.paper_id, idx))
                        cur.execute("UPDATE paragraphs SET text = ? WHERE paper_id = ? AND idx = ?",
                                    (text, document.paper_id, idx))
        except sqlite3.Error as exc:
            raise StorageFailure(str(exc)) from exc

    def paper_ids(self) -> List[str]:
        return [r[0] for r in self._read("SELECT paper_id FROM documents ORDER BY paper_id")]

    def get_document(self, paper_id: str) -> Optional[Document]:
        docs = self.get_documents([paper_id])
        return docs[0] if docs else None

    def get_documents(self, paper_ids: Sequence[str]) -> List[Document]:
        """Load documents in the order given; unknown ids are skipped.

        The abstract comes back as a single paragraph (already joined).
        """
        out = []
        for pid in paper_ids:
            rows = self._read("SELECT idx, text FROM paragraphs WHERE paper_id = ? ORDER BY idx",
                              (pid,))
            if not rows:
                continue
            texts = [t for _, t in rows]
            abstract = [texts[1]] if len(texts) > 1 and texts[1] else []
            out.append(Document(pid, texts[0], abstract, texts[2:]))
        return out

    def paragraph_text(self, paper_id: str, paragraph: int) -> Optional[str]:
        rows = self._read("SELECT text FROM paragraphs WHERE paper_id = ? AND idx = ?",
                          (paper_id, paragraph))
        return rows[0][0] if rows else None

    def paragraph_texts(self, scope=Scope.FULLTEXT) -> Dict[tuple, str]:
        sql = "SELECT paper_id, idx, text FROM paragraphs"
        if Scope(scope) is Scope.ABSTRACTS:
            sql += " WHERE idx <= 1"
        return {(p, i): t for p, i, t in self._read(sql)}

    # mentions

    def _insert(self, cur, run_id, mentions, backend) -> int:
        cache = {}
        inserted = {t: 0 for t in EntityType}
        for m in mentions:
            key = (m.paper_id, m.location.paragraph)
            if key not in cache:
                row = cur.execute("SELECT text FROM paragraphs WHERE paper_id = ? AND idx = ?",
                                  key).fetchone()
                cache[key] = row[0] if row else None
            text = cache[key]
            if text is None:
                raise SpanIntegrityViolation(f"no paragraph {key[1]} for document {key[0]}")
            if m.location.end >= len(text) or not m.matches(text):
                raise SpanIntegrityViolation(
                    f"{m.entity_str!r} does not match paragraph {key[1]} of {key[0]} "
                    f"at [{m.location.start}, {m.location.end}]")
            cur.execute(
                "INSERT OR IGNORE INTO mentions VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (m.paper_id, m.location.paragraph, m.location.start, m.location.end,
                 m.entity_str, m.entity_type.value, m.entity_id, backend, run_id))
            inserted[m.entity_type] += cur.rowcount
        return inserted

    def insert_mentions(self, run_id, mentions: Iterable[EntityMention],
                        backend: str = "manual") -> int:
        """Insert mentions in one transaction; returns the number of new rows.

        Any span that does not match its stored paragraph text aborts the
        whole transaction.
        """
        try:
            with self.transaction() as cur:
                return sum(self._insert(cur, run_id, mentions, backend).values())
        except sqlite3.Error as exc:
            raise StorageFailure(str(exc)) from exc

    def commit_document(self, paper_id: str, backend: str, fingerprint: str, run_id,
                        mentions: Sequence[EntityMention]) -> Dict[EntityType, int]:
        """Write one document's mentions and mark it complete for the backend.

        Returns the number of newly inserted rows per entity type.
        """
        try:
            with self.transaction() as cur:
                inserted = self._insert(cur, run_id, mentions, backend)
                cur.execute("INSERT OR REPLACE INTO completions VALUES (?, ?, ?, ?)",
                            (paper_id, backend, fingerprint, run_id))
                return inserted
        except sqlite3.Error as exc:
            raise StorageFailure(str(exc)) from exc

    def completed(self, backend: str, fingerprint: str) -> set:
        return {r[0] for r in self._read(
            "SELECT paper_id FROM completions WHERE backend = ? AND fingerprint = ?",
            (backend, fingerprint))}

    def query_mentions(self, paper_ids: Optional[Iterable[str]] = None,
                       entity_types: Optional[Iterable] = None,
                       scope=Scope.FULLTEXT) -> List[EntityMention]:
        where, params = [], []
        if paper_ids is not None:
            ids = list(paper_ids)
            where.append(f"paper_id IN ({','.join('?' * len(ids))})")
            params.extend(ids)
        if entity_types is not None:
            types = [EntityType(t).value for t in entity_types]
            where.append(f"entity_type IN ({','.join('?' * len(types))})")
            params.extend(types)
        if Scope(scope) is Scope.ABSTRACTS:
            where.append("paragraph <= 1")
        sql = ("SELECT paper_id, paragraph, start_pos, end_pos, entity_str, entity_type, "
               "entity_id FROM mentions")
        if where:
            sql += " WHERE " + " AND ".join(where)
        sql += " ORDER BY paper_id, paragraph, start_pos, end_pos, entity_type, entity_id"
        return [EntityMention(p, Location(para, s, e), text, Entity(EntityType(t), i))
                for p, para, s, e, text, t, i in self._read(sql, params)]

    def count_mentions(self, scope=Scope.FULLTEXT) -> Dict[EntityType, int]:
        sql = "SELECT entity_type, COUNT(*) FROM mentions"
        if Scope(scope) is Scope.ABSTRACTS:
            sql += " WHERE paragraph <= 1"
        counts = {t: 0 for t in EntityType}
        for t, n in self._read(sql + " GROUP BY entity_type"):
            counts[EntityType(t)] = n
        return counts

    def row_counts(self) -> Dict[str, int]:
        return {t: self._read(f"SELECT COUNT(*) FROM {t}")[0][0]
                for t in (*_CONTENT_TABLES, "runs")}

    # runs

    def begin_run(self, fingerprint: str) -> int:
        with self.transaction() as cur:
            cur.execute("INSERT INTO runs (fingerprint, started) VALUES (?, ?)",
                        (fingerprint, _now()))
            return cur.lastrowid

    def finish_run(self, run_id: int, status: str = "done") -> None:
        with self.transaction() as cur:
            cur.execute("UPDATE runs SET finished = ?, status = ? WHERE run_id = ?",
                        (_now(), status, run_id))

    def digest(self) -> str:
        """SHA-256 over all content tables (the runs log excluded)."""
        h = hashlib.sha256()
        for table, order in _CONTENT_TABLES.items():
            h.update(table.encode())
            for row in self._read(f"SELECT * FROM {table} ORDER BY {order}"):
                h.update(repr(row).encode())
        return h.hexdigest()


def open_store(path) -> Store:
    if str(path) != ":memory:":
        Path(path).parent.mkdir(parents=True, exist_ok=True)
    return Store(path)
