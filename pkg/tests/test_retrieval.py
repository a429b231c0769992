import numpy as np
import pytest

from domlex.retrieval import (
    EvalReport,
    InducedDictionary,
    RetrievalResult,
    cosine,
    csls,
    evaluate_p_at_1,
    induce,
)
from domlex.store import BilingualDictionary, EmbeddingSpace, Vocabulary


def unit_rows(rng, n, d):
    rows = rng.normal(size=(n, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def csls_oracle(queries, candidates, k):
    """Direct O(n^2) reimplementation used as the independent check."""
    nq, nc = queries.shape[0], candidates.shape[0]
    sim = np.array([[float(np.dot(q, c)) for c in candidates] for q in queries])
    out = np.empty((nq, nc))
    for i in range(nq):
        r_t = sum(sorted(sim[i, :], reverse=True)[:k]) / k
        for j in range(nc):
            r_s = sum(sorted(sim[:, j], reverse=True)[:k]) / k
            out[i, j] = 2.0 * sim[i, j] - r_t - r_s
    return out


class TestCosine:
    def test_identical(self):
        assert cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(0.0)

    def test_halfway(self):
        value = cosine(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
        assert value == pytest.approx(np.sqrt(2.0) / 2.0, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            cosine(np.zeros(2), np.array([1.0, 0.0]))


class TestCsls:
    def test_single_pair_collapses_to_zero(self):
        # with one query and one candidate, r_T = r_S = cos, so CSLS = 0
        rng = np.random.default_rng(0)
        for _ in range(5):
            q = unit_rows(rng, 1, 6)
            c = unit_rows(rng, 1, 6)
            assert csls(q, c, k=1)[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_matches_oracle_small(self):
        rng = np.random.default_rng(1)
        q = unit_rows(rng, 4, 8)
        c = unit_rows(rng, 4, 8)
        assert np.max(np.abs(csls(q, c, k=2) - csls_oracle(q, c, 2))) < 1e-9

    def test_exact_candidate_wins(self):
        rng = np.random.default_rng(2)
        q = unit_rows(rng, 2, 10)
        far = unit_rows(rng, 2, 10)
        candidates = np.vstack([far[0], q[0], far[1]])
        scores = csls(q[:1], candidates, k=1)
        assert np.argmax(scores[0]) == 1

    def test_transposing_roles_transposes_scores(self):
        rng = np.random.default_rng(3)
        q = unit_rows(rng, 7, 5)
        c = unit_rows(rng, 9, 5)
        forward = csls(q, c, k=3)
        backward = csls(c, q, k=3)
        assert np.allclose(forward.T, backward, atol=1e-12)

    def test_k_out_of_range(self):
        rng = np.random.default_rng(4)
        q = unit_rows(rng, 3, 4)
        c = unit_rows(rng, 3, 4)
        with pytest.raises(ValueError, match="out of range"):
            csls(q, c, k=4)

    def test_non_unit_rows_rejected(self):
        rng = np.random.default_rng(5)
        q = rng.normal(size=(3, 4)) * 3.0
        with pytest.raises(ValueError, match="unit length"):
            csls(q, q, k=1)

    def test_random_instances_match_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            nq = int(rng.integers(2, 30))
            nc = int(rng.integers(2, 30))
            k = int(rng.integers(1, min(nq, nc) + 1))
            q = unit_rows(rng, nq, 6)
            c = unit_rows(rng, nc, 6)
            assert np.max(np.abs(csls(q, c, k=k) - csls_oracle(q, c, k))) < 1e-9


def space_of(matrix, prefix="w"):
    words = [f"{prefix}{i}" for i in range(matrix.shape[0])]
    return EmbeddingSpace(vocab=Vocabulary.from_words(words), matrix=matrix)


class TestInduce:
    def test_identity_cosine(self):
        rng = np.random.default_rng(7)
        space = space_of(rng.normal(size=(10, 6)))
        induced = induce(space, space, metric="cosine")
        assert [(i, j) for i, j, _ in induced.pairs] == [(i, i) for i in range(10)]

    def test_identity_csls(self):
        rng = np.random.default_rng(8)
        space = space_of(rng.normal(size=(10, 6)))
        induced = induce(space, space, metric="csls", k=3)
        assert [(i, j) for i, j, _ in induced.pairs] == [(i, i) for i in range(10)]

    def test_known_permutation_recovered(self):
        rng = np.random.default_rng(9)
        src = space_of(rng.normal(size=(12, 5)), prefix="s")
        perm = rng.permutation(12)
        tgt = space_of(src.matrix[perm], prefix="t")
        induced = induce(src, tgt, metric="cosine")
        recovered = {i: j for i, j, _ in induced.pairs}
        assert all(perm[recovered[i]] == i for i in range(12))

    def test_empty_target_rejected(self):
        src = space_of(np.ones((2, 3)))
        empty = EmbeddingSpace(vocab=Vocabulary.from_words([]), matrix=np.empty((0, 3)))
        with pytest.raises(ValueError, match="empty target"):
            induce(src, empty)

    def test_positive_query_scaling_keeps_argmax(self):
        rng = np.random.default_rng(10)
        src = space_of(rng.normal(size=(15, 6)), prefix="s")
        tgt = space_of(rng.normal(size=(20, 6)), prefix="t")
        scaled = space_of(src.matrix * rng.uniform(0.1, 10.0, size=(15, 1)), prefix="s")
        base = induce(src, tgt, metric="cosine")
        after = induce(scaled, tgt, metric="cosine")
        assert [j for _, j, _ in base.pairs] == [j for _, j, _ in after.pairs]


class TestInducedDictionary:
    def test_bounds_inferred(self):
        d = InducedDictionary(pairs=[(0, 3, 0.5), (2, 1, 0.4)])
        assert d.n_src == 3 and d.n_tgt == 4

    def test_non_finite_score_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            InducedDictionary(pairs=[(0, 0, np.nan)])


class TestRetrievalResult:
    def test_scores_must_descend(self):
        with pytest.raises(ValueError, match="non-increasing"):
            RetrievalResult(query="q", candidates=[("a", 0.1), ("b", 0.9)])


class TestEvaluate:
    def gold(self):
        return BilingualDictionary(
            entries={"a": ("x", "y"), "b": ("z",), "c": ("w",)}, name="gold"
        )

    def test_all_correct(self):
        report = evaluate_p_at_1({"a": "x", "b": "z", "c": "w"}, self.gold())
        assert report.p_at_1 == 1.0
        assert report.evaluated_count == 3 and report.skipped_oov_count == 0

    def test_multi_translation_counts(self):
        report = evaluate_p_at_1({"a": "y", "b": "z", "c": "w"}, self.gold())
        assert report.p_at_1 == 1.0

    def test_oov_excluded_from_denominator(self):
        report = evaluate_p_at_1({"a": "x"}, self.gold())
        assert report.evaluated_count == 1
        assert report.skipped_oov_count == 2
        assert report.p_at_1 == 1.0
        assert report.evaluated_count + report.skipped_oov_count == len(self.gold())

    def test_wrong_counts_against(self):
        report = evaluate_p_at_1({"a": "z", "b": "z"}, self.gold())
        assert report.p_at_1 == pytest.approx(0.5)

    def test_serialization(self):
        report = evaluate_p_at_1({"a": "x"}, self.gold())
        assert '"p_at_1": 1.0' in report.to_json()
        lines = report.to_tsv().splitlines()
        assert lines[0] == "a\tcorrect\tx"
        assert "oov" in lines[1]

    def test_report_invariants(self):
        with pytest.raises(ValueError):
            EvalReport(p_at_1=1.5, evaluated_count=1, skipped_oov_count=0)
