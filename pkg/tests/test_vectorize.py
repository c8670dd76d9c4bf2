from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from postscreen.errors import DataError
from postscreen.preprocess import TextCleaner
from postscreen.corpus import Corpus, LabeledPost
from postscreen.vectorize import (
    EntityVocab,
    FeatureLayout,
    SparseVector,
    assemble,
    bow_vector,
    concat_sparse,
    embed_average,
    fit_tfidf,
    group_term_scores,
    load_embeddings,
    rank_entity_terms,
    select_entity_terms,
    transform_tfidf,
    EmbeddingTable,
)

from .oracles import naive_tfidf

DOCS = [["a", "b"], ["a"], ["c"]]


class TestFitTfidf:
    def test_spec_idf_values(self):
        model = fit_tfidf(DOCS, min_df=1)
        assert model.idf[model.vocabulary["a"]] == pytest.approx(
            1.2876820724517808, abs=1e-15
        )
        assert model.idf[model.vocabulary["b"]] == pytest.approx(
            1.6931471805599454, abs=1e-15
        )

    def test_min_df_threshold(self):
        model = fit_tfidf(DOCS, min_df=2)
        assert set(model.vocabulary) == {"a"}

    def test_single_doc_idf_is_one(self):
        model = fit_tfidf([["a"]], min_df=1)
        assert model.idf[model.vocabulary["a"]] == pytest.approx(1.0, abs=1e-15)

    def test_all_empty_docs_error(self):
        with pytest.raises(DataError, match="empty"):
            fit_tfidf([[], []])

    def test_indices_dense_and_sorted(self):
        model = fit_tfidf([["z", "m", "a"], ["m"]], min_df=1)
        assert sorted(model.vocabulary.values()) == list(range(len(model)))
        terms = sorted(model.vocabulary, key=model.vocabulary.get)
        assert terms == sorted(terms)


class TestTransformTfidf:
    def test_empty_doc_zero_vector(self):
        model = fit_tfidf(DOCS)
        assert transform_tfidf(model, []).nnz == 0

    def test_single_term_unit_vector(self):
        model = fit_tfidf(DOCS)
        vec = transform_tfidf(model, ["c"])
        assert vec.values.tolist() == [1.0]

    def test_frozen_spec_example(self):
        model = fit_tfidf(DOCS)
        vec = transform_tfidf(model, ["a", "a", "b"])
        by_term = dict(zip(vec.indices.tolist(), vec.values.tolist()))
        assert by_term[model.vocabulary["a"]] == pytest.approx(
            0.8355915419449176, abs=1e-12
        )
        assert by_term[model.vocabulary["b"]] == pytest.approx(
            0.5493512310263033, abs=1e-12
        )

    def test_oov_ignored(self):
        model = fit_tfidf(DOCS)
        vec = transform_tfidf(model, ["zzz"])
        assert vec.nnz == 0

    def _assert_matches_oracle(self, docs, queries, min_df=1):
        model = fit_tfidf(docs, min_df=min_df)
        rows, idf, vocab = naive_tfidf(docs, min_df=min_df)
        assert sorted(model.vocabulary) == vocab
        for term in vocab:
            assert model.idf[model.vocabulary[term]] == pytest.approx(
                idf[term], abs=1e-9
            )
        for query in queries:
            vec = transform_tfidf(model, query)
            dense = {}
            for i, v in zip(vec.indices.tolist(), vec.values.tolist()):
                dense[i] = v
            counts = {}
            for t in query:
                if t in idf:
                    counts[t] = counts.get(t, 0) + 1
            weights = {t: c * idf[t] for t, c in counts.items()}
            norm = math.sqrt(sum(w * w for w in weights.values()))
            expected = {t: (w / norm if norm else 0.0) for t, w in weights.items()}
            assert len(dense) == len(expected)
            for t, w in expected.items():
                assert dense[model.vocabulary[t]] == pytest.approx(w, abs=1e-9)

    def test_exhaustive_small_corpora_match_oracle(self):
        # every corpus of 1-2 docs over {a,b,c} with per-doc term counts 0-2
        alphabet = ("a", "b", "c")
        doc_shapes = [
            [t for t, c in zip(alphabet, counts) for _ in range(c)]
            for counts in itertools.product(range(3), repeat=3)
        ]
        non_empty = [d for d in doc_shapes if d]
        checked = 0
        for doc_a in non_empty:
            self._assert_matches_oracle([doc_a], [doc_a, ["a", "z"]])
            checked += 1
        for doc_a, doc_b in itertools.product(non_empty[:13], non_empty[:13]):
            self._assert_matches_oracle([doc_a, doc_b], [doc_a, doc_b])
            checked += 1
        assert checked > 150

    def test_random_corpora_up_to_5x5_match_oracle(self):
        rng = np.random.default_rng(42)
        alphabet = ["a", "b", "c", "d", "e"]
        for _ in range(1000):
            n_docs = int(rng.integers(1, 6))
            docs = []
            for _ in range(n_docs):
                length = int(rng.integers(0, 7))
                docs.append([alphabet[i] for i in rng.integers(0, 5, size=length)])
            if not any(docs):
                continue
            min_df = int(rng.integers(1, 3))
            if not any(
                c >= min_df
                for c in
                [sum(1 for d in docs if t in d) for t in alphabet]
            ):
                min_df = 1
            self._assert_matches_oracle(docs, docs, min_df=min_df)

    @given(
        st.lists(
            st.lists(st.sampled_from("abcde"), max_size=6), min_size=1, max_size=5
        ).filter(lambda docs: any(docs)),
        st.lists(st.sampled_from("abcdez"), max_size=8),
    )
    def test_norm_is_zero_or_one(self, docs, query):
        model = fit_tfidf(docs)
        vec = transform_tfidf(model, query)
        norm = float(np.sqrt(vec.values @ vec.values)) if vec.nnz else 0.0
        assert norm == pytest.approx(0.0, abs=1e-9) or norm == pytest.approx(
            1.0, abs=1e-9
        )


class TestEmbeddings:
    def _write(self, tmp_path, body):
        path = tmp_path / "vecs.txt"
        path.write_text(body, encoding="utf-8")
        return path

    def test_small_fixture_file(self, tmp_path):
        path = self._write(tmp_path, "2 3\nhello 1 2 3\nworld 0 0 1\n")
        table = load_embeddings(path)
        assert table.dim == 3 and len(table) == 2
        assert table.vectors["hello"].tolist() == [1.0, 2.0, 3.0]

    def test_dim_mismatch_names_line(self, tmp_path):
        path = self._write(tmp_path, "2 3\nhello 1 2 3\nworld 0 1\n")
        with pytest.raises(DataError, match="line 3"):
            load_embeddings(path)

    def test_count_mismatch_rejected(self, tmp_path):
        path = self._write(tmp_path, "3 2\na 1 2\nb 3 4\n")
        with pytest.raises(DataError, match="promises 3"):
            load_embeddings(path)

    def test_duplicate_token_last_wins_with_warning(self, tmp_path, caplog):
        path = self._write(tmp_path, "2 2\ntok 1 1\ntok 2 2\n")
        with caplog.at_level("WARNING"):
            table = load_embeddings(path)
        assert table.vectors["tok"].tolist() == [2.0, 2.0]
        assert "duplicate" in caplog.text

    def test_restrict_keeps_subset(self, tmp_path):
        path = self._write(tmp_path, "2 2\na 1 1\nb 2 2\n")
        table = load_embeddings(path, restrict={"b"})
        assert "a" not in table and "b" in table

    def test_fixture_embedding_files_load(self, fixtures_dir):
        table = load_embeddings(fixtures_dir / "embeddings_hi.vec")
        assert table.dim == 16 and len(table) > 100


class TestEmbedAverage:
    TABLE = EmbeddingTable(
        2, {"a": np.array([2.0, 0.0]), "b": np.array([0.0, 4.0])}
    )

    def test_all_oov_zero_vector(self):
        assert embed_average(self.TABLE, ["x", "y"]).tolist() == [0.0, 0.0]

    def test_single_token_identity(self):
        assert embed_average(self.TABLE, ["a"]).tolist() == [2.0, 0.0]

    def test_mean_of_two(self):
        assert embed_average(self.TABLE, ["a", "b"]).tolist() == [1.0, 2.0]

    @given(st.lists(st.sampled_from(["a", "b", "x"]), max_size=10), st.randoms())
    def test_permutation_invariant(self, tokens, rnd):
        shuffled = list(tokens)
        rnd.shuffle(shuffled)
        assert np.allclose(
            embed_average(self.TABLE, tokens), embed_average(self.TABLE, shuffled)
        )

    @given(st.lists(st.sampled_from(["a", "b"]), min_size=1, max_size=6))
    def test_duplication_invariant(self, tokens):
        assert np.allclose(
            embed_average(self.TABLE, tokens), embed_average(self.TABLE, tokens * 2)
        )


class TestEntitySelection:
    def test_spec_rule_example(self):
        selected = rank_entity_terms(
            {"w": 0.4}, {"w": 0.3}, {"w": 0.0}, top_k=10, ratio_min=0.1
        )
        assert [term for term, _ in selected] == ["w"]

    def test_absent_from_misclassified_not_selected(self):
        selected = rank_entity_terms({}, {"w": 0.9}, {}, top_k=10, ratio_min=0.5)
        assert selected == []

    def test_high_other_class_score_filtered(self):
        selected = rank_entity_terms(
            {"w": 0.4}, {"w": 0.3}, {"w": 0.2}, top_k=10, ratio_min=0.1
        )
        assert selected == []

    def test_top_k_zero_empty(self):
        selected = rank_entity_terms({"w": 0.4}, {"w": 0.3}, {}, top_k=0, ratio_min=1.0)
        assert selected == []

    def test_ranked_by_min_v_t_with_lexicographic_ties(self):
        v = {"x": 0.5, "y": 0.5, "z": 0.9}
        t = {"x": 0.5, "y": 0.5, "z": 0.1}
        selected = rank_entity_terms(v, t, {}, top_k=3, ratio_min=1.0)
        assert [term for term, _ in selected] == ["x", "y", "z"]

    def test_group_scores_match_manual_mean(self):
        docs = [["w", "w", "q"], ["q"]]
        scores = group_term_scores(docs)
        rows, _, _ = naive_tfidf(docs)
        expected_w = (rows[0].get("w", 0.0) + rows[1].get("w", 0.0)) / 2
        assert scores["w"] == pytest.approx(expected_w, abs=1e-12)

    def _mini_corpus(self):
        posts = (
            LabeledPost(id="1", text="vaccine works fine", coarse="real", split="train"),
            LabeledPost(id="2", text="vaccine guidance official", coarse="real", split="train"),
            LabeledPost(id="3", text="garlic cure miracle", coarse="fake", split="train"),
            LabeledPost(id="4", text="miracle bleach cure", coarse="fake", split="train"),
        )
        return Corpus(posts=posts, language="english", task="fake_news")

    def test_corpus_level_selection(self):
        cleaner = TextCleaner("english")
        train = self._mini_corpus()
        miscl = [
            (LabeledPost(id="9", text="official vaccine update", coarse="real",
                         split="validation"), "fake"),
        ]
        vocab = select_entity_terms(train, miscl, cleaner, top_k=5, ratio_min=0.1)
        assert "vaccine" in vocab.terms
        assert "miracle" not in vocab.terms

    def test_empty_misclassified_warns_and_returns_empty(self, caplog):
        cleaner = TextCleaner("english")
        with caplog.at_level("WARNING"):
            vocab = select_entity_terms(self._mini_corpus(), [], cleaner)
        assert len(vocab) == 0
        assert "empty" in caplog.text

    def test_vocab_roundtrip_file(self, tmp_path):
        vocab = EntityVocab(terms=("a", "b"), scores={"a": (0.1, 0.2, 0.0),
                                                      "b": (0.3, 0.4, 0.01)})
        path = tmp_path / "vocab.tsv"
        vocab.save(path)
        clone = EntityVocab.load(path)
        assert clone.terms == vocab.terms
        assert clone.scores == vocab.scores


class TestBowVector:
    VOCAB = EntityVocab(terms=("lockdown", "who"))

    def test_presence_absence(self):
        vec = bow_vector(self.VOCAB, ["who", "said"])
        assert vec.indices.tolist() == [1]
        assert vec.values.tolist() == [1.0]

    def test_empty_tokens(self):
        assert bow_vector(self.VOCAB, []).nnz == 0

    def test_presence_not_count(self):
        vec = bow_vector(self.VOCAB, ["who", "who", "who"])
        assert vec.values.tolist() == [1.0]


class TestAssemble:
    LAYOUT = FeatureLayout(blocks=(("dense", 3), ("tfidf", 2), ("bow", 0), ("meta", 6)))

    def test_lengths(self):
        fv = assemble(
            np.zeros(3),
            SparseVector(np.array([0], dtype=np.int64), np.array([1.0])),
            np.zeros(6),
            self.LAYOUT,
        )
        assert fv.length == 11
        assert fv.to_dense().shape == (11,)

    def test_zero_blocks(self):
        fv = assemble(np.zeros(3), SparseVector.empty(), np.zeros(6), self.LAYOUT)
        assert fv.to_dense().tolist() == [0.0] * 11

    def test_block_spans_isolated(self):
        fv = assemble(
            np.array([1.0, 2.0, 3.0]),
            SparseVector(np.array([1], dtype=np.int64), np.array([9.0])),
            np.arange(6, dtype=np.float64),
            self.LAYOUT,
        )
        dense = fv.to_dense()
        assert dense[:3].tolist() == [1.0, 2.0, 3.0]
        assert dense[3:5].tolist() == [0.0, 9.0]
        assert dense[5:].tolist() == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]

    def test_length_mismatch_errors(self):
        with pytest.raises(DataError, match="dense"):
            assemble(np.zeros(2), SparseVector.empty(), np.zeros(6), self.LAYOUT)
        with pytest.raises(DataError, match="meta"):
            assemble(np.zeros(3), SparseVector.empty(), np.zeros(5), self.LAYOUT)

    def test_sparse_index_out_of_range(self):
        bad = SparseVector(np.array([7], dtype=np.int64), np.array([1.0]))
        with pytest.raises(DataError, match="outside sparse region"):
            assemble(np.zeros(3), bad, np.zeros(6), self.LAYOUT)

    def test_concat_sparse_offsets(self):
        a = SparseVector(np.array([0], dtype=np.int64), np.array([1.0]))
        b = SparseVector(np.array([0], dtype=np.int64), np.array([2.0]))
        merged = concat_sparse([a, b], [3, 2])
        assert merged.indices.tolist() == [0, 3]
        assert merged.values.tolist() == [1.0, 2.0]
