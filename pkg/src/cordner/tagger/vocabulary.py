"""Term vocabularies and their compiled trie form."""
from __future__ import annotations

import functools
import threading
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .types import ENTITY_TYPES, Entity, EntityType, UnknownEntityType

# Terms at least this long match case-insensitively; shorter ones match exactly.
CASE_FOLD_MIN_LENGTH = 5

_BMP = 0x10000


class VocabularyError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class EmptyTerm(VocabularyError):
    pass


class MalformedRow(VocabularyError):
    pass


def fold_char(c: str) -> str:
    low = c.lower()
    return low if len(low) == 1 else c


def fold(text: str) -> str:
    """Length-preserving lowercase: characters whose lowercase form is not a
    single character are kept as they are."""
    return "".join(map(fold_char, text))


@functools.lru_cache(maxsize=None)
def _bmp_tables():
    chars = [chr(i) for i in range(_BMP)]
    folded = np.fromiter((ord(fold_char(c)) for c in chars), np.uint32, _BMP)
    alnum = np.fromiter((c.isalnum() for c in chars), np.bool_, _BMP)
    return folded, alnum


def encode(text: str):
    """Return ``(codes, folded_codes, alnum_mask)`` for ``text``."""
    codes = np.frombuffer(text.encode("utf-32-le", "surrogatepass"), dtype="<u4").astype(np.uint32)
    fold_table, alnum_table = _bmp_tables()
    clipped = np.minimum(codes, _BMP - 1)
    folded = fold_table[clipped]
    alnum = alnum_table[clipped]
    astral = np.flatnonzero(codes >= _BMP)
    for i in astral:
        c = text[i]
        folded[i] = ord(fold_char(c))
        alnum[i] = c.isalnum()
    return codes, folded, alnum


@dataclass
class Trie:
    child_ptr: np.ndarray
    child_chars: np.ndarray
    child_nodes: np.ndarray
    node_key: np.ndarray
    keys: List[str]

    @classmethod
    def build(cls, keys: Sequence[str]) -> "Trie":
        children: List[Dict[int, int]] = [{}]
        node_key = [-1]
        for key_id, key in enumerate(keys):
            node = 0
            for ch in key:
                nxt = children[node].get(ord(ch))
                if nxt is None:
                    nxt = len(children)
                    children[node][ord(ch)] = nxt
                    children.append({})
                    node_key.append(-1)
                node = nxt
            node_key[node] = key_id
        ptr = np.zeros(len(children) + 1, np.int64)
        chars, targets = [], []
        for n, kids in enumerate(children):
            for c in sorted(kids):
                chars.append(c)
                targets.append(kids[c])
            ptr[n + 1] = len(chars)
        return cls(ptr, np.asarray(chars, np.uint32), np.asarray(targets, np.int64),
                   np.asarray(node_key, np.int64), list(keys))


@dataclass
class CompiledVocabulary:
    exact: Trie
    folded: Trie
    exact_entities: List[List[int]]
    folded_entities: List[List[int]]
    entities: List[Entity]           # sorted: rank order doubles as id tie-break
    entity_types: np.ndarray         # type index per entity


class Vocabulary:
    """A set of ``(term, Entity)`` entries.

    Matching: terms of ``CASE_FOLD_MIN_LENGTH`` characters or more match
    case-insensitively, shorter terms match exactly.
    """

    def __init__(self, entries: Iterable[Tuple[str, Entity]] = ()):
        seen = set()
        self.entries: List[Tuple[str, Entity]] = []
        for term, entity in entries:
            if not term:
                raise EmptyTerm(f"empty term for {entity.entity_id}")
            if (term, entity) not in seen:
                seen.add((term, entity))
                self.entries.append((term, entity))
        self._compiled: Optional[CompiledVocabulary] = None
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __repr__(self):
        return f"Vocabulary({len(self)} entries)"

    @property
    def max_term_length(self) -> int:
        return max((len(t) for t, _ in self.entries), default=0)

    def restrict(self, types: Iterable[EntityType]) -> "Vocabulary":
        wanted = {EntityType(t) for t in types}
        return Vocabulary((t, e) for t, e in self.entries if e.entity_type in wanted)

    @property
    def compiled(self) -> CompiledVocabulary:
        if self._compiled is None:
            with self._lock:
                if self._compiled is None:
                    self._compiled = self._compile()
        return self._compiled

    def _compile(self) -> CompiledVocabulary:
        entities = sorted({e for _, e in self.entries},
                          key=lambda e: (e.entity_type.value, e.entity_id))
        rank = {e: i for i, e in enumerate(entities)}
        exact: Dict[str, set] = {}
        folded: Dict[str, set] = {}
        for term, entity in self.entries:
            if len(term) >= CASE_FOLD_MIN_LENGTH:
                folded.setdefault(fold(term), set()).add(rank[entity])
            else:
                exact.setdefault(term, set()).add(rank[entity])
        exact_keys = sorted(exact)
        folded_keys = sorted(folded)
        type_index = {t: i for i, t in enumerate(ENTITY_TYPES)}
        return CompiledVocabulary(
            exact=Trie.build(exact_keys),
            folded=Trie.build(folded_keys),
            exact_entities=[sorted(exact[k]) for k in exact_keys],
            folded_entities=[sorted(folded[k]) for k in folded_keys],
            entities=entities,
            entity_types=np.asarray([type_index[e.entity_type] for e in entities], np.int64),
        )


def load_vocabulary(source: str) -> Vocabulary:
    """Parse ``entity_id <TAB> entity_type <TAB> term1|term2|...`` rows.

    Blank lines and lines starting with ``#`` are ignored.
    """
    entries = []
    for lineno, line in enumerate(source.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise MalformedRow(f"expected 3 tab-separated fields, got {len(fields)}", lineno)
        entity_id, type_label, terms = fields
        try:
            entity = Entity(EntityType.parse(type_label), entity_id)
        except UnknownEntityType:
            raise
        except ValueError as exc:
            raise MalformedRow(str(exc), lineno) from None
        for term in terms.split("|"):
            if not term:
                raise EmptyTerm(f"empty term in row for {entity_id}", lineno)
            entries.append((term, entity))
    return Vocabulary(entries)


def read_vocabulary(path) -> Vocabulary:
    with open(path, encoding="utf-8") as f:
        return load_vocabulary(f.read())
