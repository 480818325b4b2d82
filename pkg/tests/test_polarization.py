"""DC/CC topic embeddings, polarization scores, ranking, variants, PCA."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pacte import (
    ContextualEncoding,
    PolarizationScore,
    Side,
    TopicDocuments,
    TopicKeywords,
    VariantMode,
    cc_topic_embedding,
    dc_embedding_for_mode,
    dc_keyword_embedding,
    dc_topic_embedding,
    pca_project,
    polarization_score,
    power_iteration_components,
    rank_topics,
)


def _enc(doc_id: str, tokens: list[str], vectors) -> ContextualEncoding:
    vectors = np.asarray(vectors, dtype=float)
    return ContextualEncoding(doc_id, tokens, vectors, pooled=vectors.mean(axis=0))


class TestDcKeywordEmbedding:
    def test_absent_keyword_returns_none(self):
        enc = _enc("d", ["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
        assert dc_keyword_embedding(enc, "zzz") is None

    def test_repeated_occurrences_average(self):
        enc = _enc("d", ["a", "b", "a"], [[1.0, 0.0], [5.0, 5.0], [3.0, 2.0]])
        np.testing.assert_allclose(dc_keyword_embedding(enc, "a"), [2.0, 1.0])


class TestDcTopicEmbedding:
    def test_renormalizes_over_present_keywords(self):
        # topic weights: a=0.6, miss=0.3, b=0.1; present {a, b} renormalize to 6/7, 1/7
        enc = _enc("d", ["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
        kw = TopicKeywords(topic_id=2, entries=((0.6, "a"), (0.3, "miss"), (0.1, "b")))
        dc = dc_topic_embedding(enc, kw)
        np.testing.assert_allclose(dc.vector, [6 / 7, 1 / 7], atol=1e-12)
        assert dc.used_keywords == ("a", "b") and dc.topic_id == 2

    def test_no_keywords_present_returns_none(self):
        enc = _enc("d", ["x"], [[1.0, 0.0]])
        kw = TopicKeywords(topic_id=0, entries=((1.0, "absent"),))
        assert dc_topic_embedding(enc, kw) is None


class TestCcTopicEmbedding:
    def _dc(self, doc_id, vec):
        from pacte import DcTopicEmbedding

        return DcTopicEmbedding(doc_id, 0, np.asarray(vec, dtype=float), ())

    def test_weighted_mean_with_renormalization(self):
        docs = TopicDocuments(0, Side.LIBERAL, ((0.5, "a"), (0.3, "b"), (0.2, "c")))
        # b unrepresented: weights renormalize to 5/7 and 2/7
        vec = cc_topic_embedding(
            [self._dc("a", [1.0, 0.0]), None, self._dc("c", [0.0, 1.0])], docs
        )
        np.testing.assert_allclose(vec, [5 / 7, 2 / 7], atol=1e-12)

    def test_all_missing_is_an_error_naming_topic_and_side(self):
        docs = TopicDocuments(7, Side.CONSERVATIVE, ((1.0, "a"),))
        with pytest.raises(ValueError, match="topic 7 is unrepresentable for side Conservative"):
            cc_topic_embedding([None], docs)

    def test_length_mismatch_rejected(self):
        docs = TopicDocuments(0, Side.LIBERAL, ((1.0, "a"),))
        with pytest.raises(ValueError, match="DC embeddings"):
            cc_topic_embedding([], docs)


class TestPolarizationScore:
    def test_identical_vectors_score_zero(self):
        # axis-aligned input: the cosine arithmetic is exact in float64
        s = polarization_score(0, np.array([2.0, 0.0]), np.array([2.0, 0.0]))
        assert s.beta == 0.0 and s.cosine == 1.0
        # general input: exact only to rounding (sqrt(5)**2 != 5)
        s2 = polarization_score(0, np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        assert s2.beta == pytest.approx(0.0, abs=1e-15)
        assert s2.cosine == pytest.approx(1.0, abs=1e-15)

    def test_opposite_vectors_score_one(self):
        s = polarization_score(0, np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
        assert s.beta == 1.0 and s.cosine == -1.0

    def test_orthogonal_vectors_score_half(self):
        s = polarization_score(0, np.array([1.0, 0.0]), np.array([0.0, 3.0]))
        assert s.beta == 0.5

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            polarization_score(3, np.zeros(4), np.ones(4))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shapes differ"):
            polarization_score(0, np.ones(3), np.ones(4))

    @given(
        dim=st.integers(2, 24),
        seed=st.integers(0, 10_000),
        scale_l=st.floats(0.01, 100.0),
        scale_r=st.floats(0.01, 100.0),
    )
    @settings(max_examples=150)
    def test_bounded_and_scale_invariant(self, dim, seed, scale_l, scale_r):
        rng = np.random.default_rng(seed)
        left, right = rng.normal(size=dim), rng.normal(size=dim)
        if np.linalg.norm(left) < 1e-6 or np.linalg.norm(right) < 1e-6:
            return
        s = polarization_score(0, left, right)
        assert 0.0 <= s.beta <= 1.0
        scaled = polarization_score(0, scale_l * left, scale_r * right)
        assert scaled.beta == pytest.approx(s.beta, abs=1e-9)


class TestRanking:
    def test_sorts_by_beta_descending_ties_by_topic_id(self):
        scores = [
            PolarizationScore(3, 0.0, 0.5),
            PolarizationScore(1, 0.2, 0.4),
            PolarizationScore(2, 0.0, 0.5),
            PolarizationScore(0, 0.9, 0.05),
        ]
        ranking = rank_topics(scores, pair=("L", "R"))
        assert ranking.topic_order == [2, 3, 1, 0]

    def test_exclusions_dropped(self):
        scores = [PolarizationScore(i, 0.0, 0.1 * i) for i in range(4)]
        ranking = rank_topics(scores, pair=("L", "R"), exclude=[3, 1])
        assert ranking.topic_order == [2, 0]


class TestVariantModes:
    def test_doc_embedding_mode_is_topic_independent(self):
        enc = _enc("d", ["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
        kw1 = TopicKeywords(topic_id=0, entries=((1.0, "a"),))
        kw2 = TopicKeywords(topic_id=1, entries=((1.0, "b"),))
        dc1 = dc_embedding_for_mode(VariantMode.DOC_EMBEDDING, enc, kw1)
        dc2 = dc_embedding_for_mode(VariantMode.DOC_EMBEDDING, enc, kw2)
        np.testing.assert_array_equal(dc1.vector, dc2.vector)
        np.testing.assert_array_equal(dc1.vector, enc.pooled)

    def test_keyword_modes_depend_on_topic(self):
        enc = _enc("d", ["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
        kw1 = TopicKeywords(topic_id=0, entries=((1.0, "a"),))
        kw2 = TopicKeywords(topic_id=1, entries=((1.0, "b"),))
        dc1 = dc_embedding_for_mode(VariantMode.PACTE, enc, kw1)
        dc2 = dc_embedding_for_mode(VariantMode.PACTE, enc, kw2)
        assert not np.array_equal(dc1.vector, dc2.vector)

    def test_parse_and_label_modes(self):
        assert VariantMode.parse("PaCTE") is VariantMode.PACTE
        assert VariantMode.PACTE.label_mode == "true_labels"
        assert VariantMode.NO_FINETUNE.label_mode == "none"
        assert VariantMode.SHUFFLED_LABELS.label_mode == "shuffled_labels"
        assert VariantMode.DOC_EMBEDDING.label_mode == "true_labels"
        with pytest.raises(ValueError, match="unknown variant"):
            VariantMode.parse("Nope")


# --- PCA oracle: classic Jacobi rotation eigensolver, written independently ---


def jacobi_eigh(matrix: np.ndarray, sweeps: int = 100, tol: float = 1e-14):
    a = np.array(matrix, dtype=float, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(sweeps):
        off = np.sqrt(sum(a[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta**2 + 1)) if theta != 0 else 1.0
                c = 1 / np.sqrt(t**2 + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    order = np.argsort(np.diag(a))[::-1]
    return np.diag(a)[order], v[:, order]


def _sign_fix(vec: np.ndarray) -> np.ndarray:
    for x in vec:
        if abs(x) > 1e-12:
            return vec if x > 0 else -vec
    return vec


def _separated_cov(rng: np.random.Generator, eigenvalues: list[float]) -> np.ndarray:
    """Random symmetric matrix with a chosen (well separated) spectrum.

    Power iteration's convergence rate is the eigenvalue ratio, so eigenvector
    comparisons are only well posed when the spectrum has clear gaps.
    """
    dim = len(eigenvalues)
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q @ np.diag(eigenvalues) @ q.T


class TestPowerIterationPca:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_matches_jacobi_oracle(self, seed):
        rng = np.random.default_rng(seed)
        cov = _separated_cov(rng, [6.0, 3.5, 2.0, 1.0, 0.5, 0.2])
        values, components = power_iteration_components(cov, 3)
        ref_vals, ref_vecs = jacobi_eigh(cov)
        np.testing.assert_allclose(values, ref_vals[:3], atol=1e-8)
        for j in range(3):
            np.testing.assert_allclose(
                components[j], _sign_fix(ref_vecs[:, j]), atol=1e-6
            )

    def test_projection_matches_oracle(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(120, 5)) @ np.diag([8.0, 3.0, 1.0, 0.3, 0.1])
        centered = x - x.mean(0)
        cov = centered.T @ centered / (x.shape[0] - 1)
        _, ref_vecs = jacobi_eigh(cov)
        expected = centered @ np.column_stack([_sign_fix(ref_vecs[:, j]) for j in range(2)])
        np.testing.assert_allclose(pca_project(x, 2), expected, atol=1e-6)

    def test_rank_one_data_second_component_is_null(self):
        rng = np.random.default_rng(4)
        direction = np.array([1.0, 2.0, -1.0])
        x = np.outer(rng.normal(size=15), direction)
        proj = pca_project(x, 2)
        assert np.abs(proj[:, 1]).max() < 1e-8

    def test_equal_eigenvalues_converge(self):
        # unit square: covariance is isotropic, any orthonormal pair works
        x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        proj = pca_project(x, 2)
        cov_in = (x - x.mean(0)).T @ (x - x.mean(0))
        cov_out = (proj - proj.mean(0)).T @ (proj - proj.mean(0))
        np.testing.assert_allclose(np.sort(np.diag(cov_out)), np.sort(np.diag(cov_in)), atol=1e-9)

    def test_sign_convention_first_nonzero_positive(self):
        rng = np.random.default_rng(7)
        cov = _separated_cov(rng, [5.0, 2.0, 0.8, 0.1])
        _, components = power_iteration_components(cov, 2)
        for comp in components:
            lead = next(c for c in comp if abs(c) > 1e-12)
            assert lead > 0

    def test_input_validation(self):
        with pytest.raises(ValueError, match="at least 2 rows"):
            pca_project(np.ones((1, 3)), 1)
        with pytest.raises(ValueError, match="n_components"):
            pca_project(np.random.default_rng(0).normal(size=(5, 3)), 4)

    def test_zero_variance_data_projects_to_zero(self):
        x = np.ones((6, 3))
        proj = pca_project(x, 2)
        np.testing.assert_allclose(proj, 0.0, atol=1e-12)
