from __future__ import annotations

from typing import List, Sequence

import numpy as np

from . import _kernels
from .types import TYPE_INDEX, ENTITY_TYPES, EntityMention, Location
from .vocabulary import Vocabulary, encode


def _priority_order(starts, ends, ranks):
    # longest first, then leftmost, then smallest entity_id
    return np.lexsort((ranks, starts, starts - ends)).astype(np.int64)


def tag_paragraph(vocabulary: Vocabulary, paragraph) -> List[EntityMention]:
    """Tag one paragraph with every vocabulary match that survives overlap
    resolution, sorted by (start, end)."""
    text = paragraph.text
    if not text or not len(vocabulary):
        return []
    cv = vocabulary.compiled
    codes, folded, alnum = encode(text)
    hits = []
    for trie, key_entities, source in ((cv.exact, cv.exact_entities, codes),
                                       (cv.folded, cv.folded_entities, folded)):
        if len(trie.keys) == 0:
            continue
        found = _kernels.trie_scan(source, alnum, trie.child_ptr, trie.child_chars,
                                   trie.child_nodes, trie.node_key)
        for start, end, key in found.tolist():
            for ent in key_entities[key]:
                hits.append((start, end, ent))
    if not hits:
        return []
    arr = np.asarray(hits, np.int64)
    starts, ends, ranks = arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy()
    types = cv.entity_types[ranks]
    keep = _kernels.greedy_select(starts, ends, types, _priority_order(starts, ends, ranks),
                                  len(ENTITY_TYPES), len(text))
    out = []
    for idx in np.flatnonzero(keep).tolist():
        s, e = hits[idx][0], hits[idx][1]
        out.append(EntityMention(paragraph.paper_id, Location(paragraph.paragraph, s, e - 1),
                                 text[s:e], cv.entities[hits[idx][2]]))
    out.sort(key=lambda m: (m.location.start, m.location.end,
                            m.entity_type.value, m.entity_id))
    return out


def resolve_overlaps(mentions: Sequence[EntityMention]) -> List[EntityMention]:
    """Drop same-type overlaps: the longer mention wins, then the one that
    starts first, then the smaller entity_id. Mentions of different types
    never suppress each other."""
    mentions = list(mentions)
    if not mentions:
        return []
    ids = sorted({m.entity_id for m in mentions})
    id_rank = {v: i for i, v in enumerate(ids)}
    starts = np.fromiter((m.location.start for m in mentions), np.int64, len(mentions))
    ends = np.fromiter((m.location.end + 1 for m in mentions), np.int64, len(mentions))
    ranks = np.fromiter((id_rank[m.entity_id] for m in mentions), np.int64, len(mentions))
    types = np.fromiter((TYPE_INDEX[m.entity_type] for m in mentions), np.int64, len(mentions))
    keep = _kernels.greedy_select(starts, ends, types, _priority_order(starts, ends, ranks),
                                  len(ENTITY_TYPES), int(ends.max()))
    out = [m for m, k in zip(mentions, keep.tolist()) if k]
    out.sort(key=lambda m: (m.location.start, m.location.end,
                            m.entity_type.value, m.entity_id))
    return out


def tag_document(vocabulary: Vocabulary, paragraph_refs) -> List[EntityMention]:
    out = []
    for ref in paragraph_refs:
        out.extend(tag_paragraph(vocabulary, ref))
    return out
