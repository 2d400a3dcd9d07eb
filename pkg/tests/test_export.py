import json

import pytest

from corpus import make_documents, make_vocabulary
from cordner.export import (build_dump, compute_stats, export_json, export_pubtator,
                            read_pubtator_export, render_dump, validate_dump, validate_dump_file)
from cordner.ingest import Document, Scope
from cordner.orchestrator import PipelineConfig, run_pipeline
from cordner.pubtator import parse_composed
from cordner.tagger import Entity, EntityMention, Location, TaggerBackendConfig
from oracles import stats_from_dump_files


def m(pid, para, start, text, etype="Chemical", eid="MESH:A"):
    return EntityMention(pid, Location(para, start, start + len(text) - 1), text, Entity(etype, eid))


@pytest.fixture
def small(store):
    store.upsert_document(Document("p1", "Aspirin works", ["Covid spreads fast"],
                                   ["body text", "human cells"]))
    store.upsert_document(Document("p2", "Nothing here", [], []))
    store.insert_mentions(None, [
        m("p1", 0, 0, "Aspirin"),
        m("p1", 1, 0, "Covid", "Disease", "MESH:D1"),
        m("p1", 3, 0, "human", "Species", "TAXON:9606"),
    ])
    return store


@pytest.fixture
def tagged(store, tmp_path):
    tsv, terms = make_vocabulary(150, seed=11)
    vocab = tmp_path / "v.tsv"
    vocab.write_text(tsv, encoding="utf-8")
    for d in make_documents(25, terms, seed=11):
        store.upsert_document(d)
    cfg = TaggerBackendConfig("lex", kind="lexicon", vocabulary=str(vocab))
    run_pipeline(PipelineConfig([cfg]), store)
    return store


def test_empty_store_dump(store, tmp_path):
    assert export_json(store, "fulltext", tmp_path / "d.json") == 0
    assert (tmp_path / "d.json").read_text() == "{}\n"
    assert export_pubtator(store, "fulltext", tmp_path / "pt") == 0


def test_inclusive_end_record(small):
    dump = build_dump(small)
    assert dump["p2"] == []
    assert dump["p1"][0] == {"location": {"paragraph": 0, "start": 0, "end": 6},
                             "entity_str": "Aspirin", "entity_type": "Chemical",
                             "entity_id": "MESH:A"}
    assert [r["location"]["paragraph"] for r in dump["p1"]] == [0, 1, 3]


def test_abstracts_dump_is_filtered_fulltext(tagged):
    full = build_dump(tagged, Scope.FULLTEXT)
    abstracts = build_dump(tagged, Scope.ABSTRACTS)
    assert abstracts == {pid: [r for r in rs if r["location"]["paragraph"] <= 1]
                         for pid, rs in full.items()}
    assert any(r["location"]["paragraph"] >= 2 for rs in full.values() for r in rs)


def test_repeated_export_byte_identical(tagged, tmp_path):
    export_json(tagged, "fulltext", tmp_path / "a.json")
    export_json(tagged, "fulltext", tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_pubtator_export_offsets(small, tmp_path):
    assert export_pubtator(small, "fulltext", tmp_path / "pt") == 1
    docs = parse_composed((tmp_path / "pt" / "part-00000.pubtator").read_text())
    assert [d.doc_id for d in docs] == ["p1", "p1:2", "p1:3", "p2"]
    main = docs[0]
    assert [(a.start, a.end, a.surface) for a in main.annotations] == [
        (0, 7, "Aspirin"), (14, 19, "Covid")]
    [human] = docs[2].annotations
    assert (human.start, human.end) == (5, 10)
    export_pubtator(small, "abstracts", tmp_path / "ab")
    abstracts = parse_composed((tmp_path / "ab" / "part-00000.pubtator").read_text())
    assert [d.doc_id for d in abstracts] == ["p1", "p2"]


def test_pubtator_export_splits_files(tagged, tmp_path):
    assert export_pubtator(tagged, "fulltext", tmp_path / "pt", docs_per_file=10) == 3
    with pytest.raises(ValueError):
        export_pubtator(tagged, "fulltext", tmp_path / "pt", docs_per_file=0)


@pytest.mark.parametrize("scope", ["abstracts", "fulltext"])
def test_pubtator_round_trip(tagged, tmp_path, scope):
    export_pubtator(tagged, scope, tmp_path / "pt", docs_per_file=7)
    back = read_pubtator_export(sorted((tmp_path / "pt").iterdir()))
    assert back == tagged.query_mentions(scope=scope)


def test_stats_values(store):
    assert compute_stats(store).row("fulltext") == (0, 0, 0, 0)
    store.upsert_document(Document("p1", "Aspirin works", ["Covid spreads fast"], ["x", "human"]))
    store.insert_mentions(None, [m("p1", 0, 0, "Aspirin"), m("p1", 1, 0, "Covid", "Disease", "MESH:D1"),
                                 m("p1", 3, 0, "human", "Species", "TAXON:9606")])
    stats = compute_stats(store)
    assert stats.row("abstracts") == (1, 1, 0, 0)
    assert stats.row("fulltext") == (1, 1, 0, 1)
    text = stats.render()
    assert "Abstracts" in text and "Chemicals" in text and "Species" in text


def test_stats_match_dump_oracle(tagged, tmp_path):
    export_json(tagged, "abstracts", tmp_path / "a.json")
    export_json(tagged, "fulltext", tmp_path / "f.json")
    assert compute_stats(tagged).as_dict() == stats_from_dump_files(tmp_path / "a.json",
                                                                    tmp_path / "f.json")


def test_validate_dump_accepts_export(tagged, tmp_path):
    export_json(tagged, "fulltext", tmp_path / "d.json")
    result = validate_dump_file(tagged, tmp_path / "d.json")
    assert result.ok and result.records > 0


@pytest.mark.parametrize("mutate", [
    lambda r: r["location"].update(start=r["location"]["start"] + 1),
    lambda r: r["location"].update(end="3"),
    lambda r: r.update(entity_type="Protein"),
    lambda r: r.update(extra=1),
    lambda r: r["location"].update(paragraph=99),
    lambda r: r.update(entity_str="Zzz"),
])
def test_validate_dump_rejects(small, mutate):
    dump = json.loads(render_dump(build_dump(small)))
    mutate(dump["p1"][0])
    result = validate_dump(small, dump)
    assert not result.ok and len(result.errors) == 1


def test_validate_dump_bad_shapes(small, tmp_path):
    assert not validate_dump(small, []).ok
    assert not validate_dump(small, {"p1": {}}).ok
    (tmp_path / "x.json").write_text("{oops")
    assert not validate_dump_file(small, tmp_path / "x.json").ok


def test_inclusive_end_five_characters(store):
    store.upsert_document(Document("p", "T", ["Novel Covid cases"]))
    store.insert_mentions(None, [m("p", 1, 6, "Covid", "Disease", "MESH:D1")])
    [r] = build_dump(store)["p"]
    assert (r["location"]["start"], r["location"]["end"]) == (6, 10)
    store.upsert_document(Document("q", "T", ["Severe Covid cases"]))
    store.insert_mentions(None, [m("q", 1, 7, "Covid", "Disease", "MESH:D1")])
    [r] = build_dump(store)["q"]
    assert (r["location"]["start"], r["location"]["end"]) == (7, 11)


def test_title_mention_exclusive_end_in_pubtator(store, tmp_path):
    store.upsert_document(Document("p", "Covid news", ["x"]))
    store.insert_mentions(None, [m("p", 0, 0, "Covid", "Disease", "MESH:D1")])
    export_pubtator(store, "abstracts", tmp_path)
    [doc] = parse_composed((tmp_path / "part-00000.pubtator").read_text())
    [ann] = doc.annotations
    assert (ann.start, ann.end) == (0, 5)


def test_stats_two_chemicals_one_species(store):
    store.upsert_document(Document("p", "Aspirin and", ["ibuprofen"], ["in human"]))
    store.insert_mentions(None, [m("p", 0, 0, "Aspirin"), m("p", 1, 0, "ibuprofen", eid="MESH:B"),
                                 m("p", 2, 3, "human", "Species", "TAXON:9606")])
    stats = compute_stats(store)
    assert stats.row("abstracts") == (2, 0, 0, 0)
    assert stats.row("fulltext") == (2, 0, 0, 1)
