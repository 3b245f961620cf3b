import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exprag.corpus import Document
from exprag.dense import (
    build_vector_index,
    embed_text,
    load_embeddings,
    search_dense,
    trigram_embedder_id,
    write_embeddings,
)
from exprag.errors import DataError, MalformedRecordError
from exprag.ranking import StrategyId, check_ranked_list


@settings(max_examples=60, deadline=None)
@given(st.text(min_size=3, max_size=60))
def test_embedding_is_unit_norm(text):
    assert np.linalg.norm(embed_text(text, 256)) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("text", ["", "a", "ab"])
def test_short_text_embeds_to_zero(text):
    assert not embed_text(text, 256).any()


def test_self_cosine_is_one():
    v = embed_text("paris", 256)
    assert float(v @ v) == pytest.approx(1.0)


def test_embedding_is_case_insensitive_and_stable():
    assert np.array_equal(embed_text("Paris", 64), embed_text("paris", 64))
    assert trigram_embedder_id(64) == "trigram-hash-v1/dim=64"


def test_small_dim_rejected():
    with pytest.raises(ValueError):
        embed_text("abc", 8)


def test_brute_force_cosine_order():
    docs = [Document("a", "", "the cat sat"), Document("b", "", "a dog ran far"), Document("c", "", "cats and dogs")]
    vindex = build_vector_index(docs, dim=128)
    q = "cat sat down"
    qv = embed_text(q, 128)
    cos = {d.doc_id: float(sum(x * y for x, y in zip(embed_text(d.indexed_text, 128), qv))) for d in docs}
    want = sorted((d for d in cos if cos[d] != 0), key=lambda d: (-cos[d], d))
    hits = search_dense(q, vindex, 10)
    check_ranked_list(hits)
    assert [h.doc_id for h in hits] == want
    for h in hits:
        assert h.score == pytest.approx(cos[h.doc_id], abs=1e-12)
        assert h.strategy is StrategyId.DENSE


def test_identical_text_is_rank_one():
    docs = [Document("d1", "T", "some body text"), Document("d2", "", "other words here")]
    hit = search_dense("T some body text", build_vector_index(docs, dim=256), 1)[0]
    assert hit.doc_id == "d1"
    assert hit.score == pytest.approx(1.0, abs=1e-6)


def test_empty_query_returns_nothing():
    docs = [Document("d1", "", "anything")]
    assert search_dense("", build_vector_index(docs, dim=64), 10) == []


def test_dimension_mismatch():
    vindex = build_vector_index([Document("d1", "", "text")], dim=64)
    with pytest.raises(ValueError, match="dimension"):
        search_dense("text", vindex, 5, query_vector=np.ones(32))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.text(alphabet="abcde ", min_size=3, max_size=30).filter(lambda s: len(s) >= 3), min_size=1, max_size=8))
def test_dense_self_retrieval(texts):
    docs = [Document(f"d{i}", "", t) for i, t in enumerate(texts)]
    vindex = build_vector_index(docs, dim=64)
    for d in docs:
        scores = {h.doc_id: h.score for h in search_dense(d.text, vindex, len(docs))}
        assert scores[d.doc_id] >= max(scores.values()) - 1e-12


def test_external_embeddings_round_trip(tmp_path):
    vecs = {"d1": np.array([3.0, 4.0]), "q1": np.array([1.0, 0.0])}
    p = tmp_path / "e.jsonl"
    write_embeddings(vecs, p)
    loaded = load_embeddings(p)
    assert np.allclose(loaded["d1"], [0.6, 0.8])  # re-normalized
    vindex = build_vector_index([Document("d1", "", "x")], vectors=loaded, embedder="external")
    with pytest.raises(ValueError, match="query vector"):
        search_dense("x", vindex, 5)
    hit = search_dense("x", vindex, 5, query_vector=loaded["q1"])[0]
    assert hit.score == pytest.approx(0.6)


def test_external_embeddings_errors(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_text(json.dumps({"_id": "a", "vector": [1, 0]}) + "\n" + json.dumps({"_id": "b", "vector": [1]}) + "\n")
    with pytest.raises(MalformedRecordError) as info:
        load_embeddings(p)
    assert info.value.line_no == 2
    with pytest.raises(DataError, match="no embedding"):
        build_vector_index([Document("zz", "", "x")], vectors={"a": np.ones(2)})
