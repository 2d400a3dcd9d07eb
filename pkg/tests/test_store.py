import sqlite3
import threading

import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.stateful import RuleBasedStateMachine, invariant, rule

from cordner.ingest import Document, Scope
from cordner.store import SchemaTooNew, SpanIntegrityViolation, Store
from cordner.tagger import Entity, EntityMention, Location


def m(pid, para, start, text, etype="Chemical", eid="MESH:A"):
    return EntityMention(pid, Location(para, start, start + len(text) - 1), text, Entity(etype, eid))


DOC = Document("p1", "Aspirin title", ["Covid abstract"], ["body one", "body two"])


def test_upsert_idempotent(store):
    store.upsert_document(DOC)
    counts = store.row_counts()
    digest = store.digest()
    store.upsert_document(DOC)
    assert store.row_counts() == counts
    assert store.digest() == digest


def test_upsert_removed_paragraph_cascades(store):
    store.upsert_document(DOC)
    store.insert_mentions(None, [m("p1", 3, 5, "two"), m("p1", 2, 5, "one")])
    store.upsert_document(Document("p1", DOC.title, DOC.abstract_paragraphs, ["body one"]))
    assert [x.location.paragraph for x in store.query_mentions()] == [2]


def test_upsert_changed_text_drops_stale_mentions(store):
    store.upsert_document(DOC)
    store.insert_mentions(None, [m("p1", 0, 0, "Aspirin"), m("p1", 2, 5, "one")])
    store.commit_document("p1", "lex", "fp", None, [])
    store.upsert_document(Document("p1", "Other title", DOC.abstract_paragraphs, DOC.body_paragraphs))
    assert [x.location.paragraph for x in store.query_mentions()] == [2]
    assert store.completed("lex", "fp") == set()


def test_document_count(store):
    for i in range(3):
        store.upsert_document(Document(f"p{i}", "t"))
    assert store.row_counts()["documents"] == 3
    assert store.get_document("p1").paragraph_texts() == ["t", ""]


def test_insert_mentions_uniqueness(store):
    store.upsert_document(DOC)
    batch = [m("p1", 0, 0, "Aspirin"), m("p1", 1, 0, "Covid", "Disease", "MESH:D1"),
             m("p1", 2, 0, "body"), m("p1", 2, 5, "one"), m("p1", 3, 5, "two", "Gene", "GENE:1")]
    assert store.insert_mentions(None, batch) == 5
    assert store.insert_mentions(None, batch) == 0


def test_insert_mentions_span_gate(store):
    store.upsert_document(DOC)
    good = m("p1", 0, 0, "Aspirin")
    bad = m("p1", 0, 1, "Aspirin")
    with pytest.raises(SpanIntegrityViolation):
        store.insert_mentions(None, [good, bad])
    assert store.query_mentions() == []
    with pytest.raises(SpanIntegrityViolation):
        store.insert_mentions(None, [m("p1", 9, 0, "x")])
    with pytest.raises(SpanIntegrityViolation):
        store.insert_mentions(None, [m("nope", 0, 0, "x")])


def test_concurrent_disjoint_transactions(tmp_path):
    store = Store(tmp_path / "c.sqlite")
    docs = [Document(f"d{i}", "alpha beta gamma") for i in range(20)]
    for d in docs:
        store.upsert_document(d)
    results = []

    def work(ids):
        n = 0
        for pid in ids:
            n += store.insert_mentions(None, [m(pid, 0, 0, "alpha"), m(pid, 0, 6, "beta")])
        results.append(n)

    threads = [threading.Thread(target=work, args=([f"d{i}" for i in range(k, 20, 2)],))
               for k in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(results) == [20, 20]
    assert store.row_counts()["mentions"] == 40
    store.close()


def _fixture(store):
    store.upsert_document(DOC)
    store.upsert_document(Document("p0", "Species here", [], ["Aspirin again"]))
    store.insert_mentions(None, [
        m("p1", 0, 0, "Aspirin"), m("p1", 1, 0, "Covid", "Disease", "MESH:D1"),
        m("p1", 3, 5, "two", "Gene", "GENE:2"), m("p0", 0, 0, "Species", "Species", "TAXON:1"),
        m("p0", 2, 0, "Aspirin"),
    ])


def test_query_filters_and_order(store):
    assert store.query_mentions() == []
    _fixture(store)
    allm = store.query_mentions()
    assert [x.sort_key() for x in allm] == sorted(x.sort_key() for x in allm)
    assert {x.entity_type.value for x in store.query_mentions(entity_types=["Chemical"])} == {"Chemical"}
    assert {x.paper_id for x in store.query_mentions(paper_ids=["p0"])} == {"p0"}
    abstracts = store.query_mentions(scope=Scope.ABSTRACTS)
    assert abstracts == [x for x in allm if x.location.paragraph <= 1]


def test_schema_version_guard(tmp_path):
    path = tmp_path / "s.sqlite"
    Store(path).close()
    con = sqlite3.connect(path)
    con.execute("UPDATE schema_version SET version = 99")
    con.commit()
    con.close()
    with pytest.raises(SchemaTooNew):
        Store(path)


def test_runs_log(store):
    run = store.begin_run("abc")
    store.finish_run(run)
    assert store.row_counts()["runs"] == 1


WORDS = ["alpha", "beta", "gamma", "delta"]


class StoreMachine(RuleBasedStateMachine):
    """Random interleavings of upserts and inserts keep the schema invariants."""

    def __init__(self):
        super().__init__()
        self.store = Store(":memory:")

    @rule(pid=st.sampled_from(["a", "b", "c"]),
          body=st.lists(st.lists(st.sampled_from(WORDS), min_size=1, max_size=3), max_size=3))
    def upsert(self, pid, body):
        self.store.upsert_document(Document(pid, "alpha beta", ["gamma"],
                                            [" ".join(p) for p in body]))

    @rule(pid=st.sampled_from(["a", "b", "c"]), para=st.integers(0, 4), word=st.sampled_from(WORDS),
          eid=st.sampled_from(["MESH:1", "MESH:2"]))
    def insert(self, pid, para, word, eid):
        text = self.store.paragraph_text(pid, para)
        if text is None or word not in text:
            return
        start = text.index(word)
        self.store.insert_mentions(None, [m(pid, para, start, word, eid=eid)])

    @invariant()
    def referential_integrity(self):
        conn = self.store._conn
        orphans = conn.execute(
            "SELECT COUNT(*) FROM mentions m LEFT JOIN paragraphs p "
            "ON p.paper_id = m.paper_id AND p.idx = m.paragraph WHERE p.text IS NULL").fetchone()[0]
        assert orphans == 0
        dupes = conn.execute(
            "SELECT COUNT(*) FROM (SELECT 1 FROM mentions GROUP BY paper_id, paragraph, start_pos, "
            "end_pos, entity_type, entity_id HAVING COUNT(*) > 1)").fetchone()[0]
        assert dupes == 0
        for x in self.store.query_mentions():
            assert x.matches(self.store.paragraph_text(x.paper_id, x.location.paragraph))

    def teardown(self):
        self.store.close()


TestStoreMachine = StoreMachine.TestCase
TestStoreMachine.settings = settings(max_examples=50, stateful_step_count=20, deadline=None)
