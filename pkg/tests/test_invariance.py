import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from textscale.errors import DegenerateClass, DimensionMismatch, NoPositiveMargin, NoPreferencePairs, ZeroMass
from textscale.invariance import (
    KernelKind,
    MarginTable,
    ScaleDistribution,
    gram_matrix,
    hit_miss_margins,
    learn_scale_distribution,
    level_grams,
    neg_kl,
    pairwise_margins,
    relevance_at_scale,
    relevance_profile,
    scale_distance,
    silm_relevance,
    single_scale_kernel,
    sitk,
    sitk_matrix,
)
from textscale.scalespace import build_stack
from textscale.signals import normalize_signal, sentence2d_signal, word2d_signal

from conftest import indexed

KINDS = [KernelKind("linear"), KernelKind("cosine"), KernelKind("rbf", 0.7), KernelKind("jensen-shannon")]


def table(h):
    h = np.atleast_2d(np.asarray(h, float))
    return MarginTable(h, np.arange(1.0, h.shape[1] + 1))


def brute_margins(levels, labels):
    """All-pairs distance scan with explicit loops and first-index tie breaking."""
    n, m = levels.shape[:2]
    out = np.zeros((n, m))
    for j in range(m):
        for i in range(n):
            hit = miss = None
            for k in range(n):
                if k == i:
                    continue
                d = math.sqrt(max(float(np.sum((levels[i, j] - levels[k, j]) ** 2)), 0.0))
                if labels[k] == labels[i]:
                    if hit is None or d < hit:
                        hit = d
                elif miss is None or d < miss:
                    miss = d
            out[i, j] = miss - hit
    return out


def sphere_grid(h, steps=1000):
    """Max of q . h over the non-negative part of the unit sphere, on a 10^6-point angle grid."""
    th = np.linspace(0, np.pi / 2, steps)
    ph = np.linspace(0, np.pi / 2, steps)
    t, p = np.meshgrid(th, ph)
    q = np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)
    return float((q @ h).max())


class TestKernelKind:
    def test_parse(self):
        assert KernelKind.parse("js") == KernelKind("jensen-shannon")
        assert KernelKind.parse("rbf:2.5") == KernelKind("rbf", 2.5)
        assert KernelKind.parse("cosine").variant == "cosine"

    @pytest.mark.parametrize("args", [("poly",), ("rbf", 0.0), ("rbf", -1.0)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            KernelKind(*args)


class TestSingleScaleKernel:
    def test_js_identical(self, rng):
        p = rng.random((5, 4))
        assert single_scale_kernel(p, p, KernelKind("jensen-shannon")) == pytest.approx(1.0, abs=1e-12)

    def test_js_disjoint(self):
        a, b = np.array([1.0, 1.0, 0.0, 0.0]), np.array([0.0, 0.0, 2.0, 1.0])
        assert single_scale_kernel(a, b, KernelKind("jensen-shannon")) == pytest.approx(0.0, abs=1e-12)

    def test_linear_double_sum(self, rng):
        a, b = rng.random((6, 5)), rng.random((6, 5))
        ref = sum(a[i, j] * b[i, j] for i in range(6) for j in range(5))
        assert abs(single_scale_kernel(a, b) - ref) < 1e-12

    def test_rbf_formula(self, rng):
        a, b = rng.random(7), rng.random(7)
        ref = math.exp(-np.sum((a - b) ** 2) / (2 * 0.7**2))
        assert single_scale_kernel(a, b, KernelKind("rbf", 0.7)) == pytest.approx(ref, rel=1e-14)

    def test_cosine_scale_free(self, rng):
        a, b = rng.random(7), rng.random(7)
        k = single_scale_kernel(a, b, KernelKind("cosine"))
        assert single_scale_kernel(3 * a, 0.5 * b, KernelKind("cosine")) == pytest.approx(k, rel=1e-14)
        assert single_scale_kernel(a, a, KernelKind("cosine")) == pytest.approx(1.0, rel=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            single_scale_kernel(np.ones(3), np.ones(4))

    @pytest.mark.parametrize("variant", ["cosine", "jensen-shannon"])
    def test_zero_signal(self, variant):
        with pytest.raises(ZeroMass):
            single_scale_kernel(np.zeros(3), np.ones(3), KernelKind(variant))

    @pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.variant)
    def test_gram_matches_pairwise(self, rng, kind):
        sigs = list(rng.random((6, 4, 3)))
        g = gram_matrix(sigs, kind)
        for i in range(6):
            for j in range(6):
                assert g[i, j] == pytest.approx(single_scale_kernel(sigs[i], sigs[j], kind), abs=1e-12)

    def test_gram_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            gram_matrix([np.ones(3), np.ones(4)])

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, 8, elements=st.floats(0.01, 1)), arrays(float, 8, elements=st.floats(0.01, 1)))
    def test_js_bounded(self, a, b):
        assert 0.0 <= single_scale_kernel(a, b, KernelKind("jensen-shannon")) <= 1.0


class TestScaleDistance:
    @pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.variant)
    def test_self_distance_zero(self, rng, kind):
        a = rng.random(6)
        assert scale_distance(a, a, kind) == pytest.approx(0.0, abs=1e-6)

    def test_rbf_range(self, rng):
        kind = KernelKind("rbf", 0.5)
        for _ in range(20):
            a, b = rng.random(5), rng.random(5)
            d2 = scale_distance(a, b, kind) ** 2
            assert d2 == pytest.approx(2 - 2 * single_scale_kernel(a, b, kind), abs=1e-12)
            assert 0 <= d2 <= 2

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_metric_on_linear(self, seed):
        a, b, c = np.random.default_rng(seed).normal(size=(3, 6))
        ab, ba = scale_distance(a, b), scale_distance(b, a)
        assert ab >= 0 and ab == pytest.approx(ba, abs=1e-12)
        assert ab <= scale_distance(a, c) + scale_distance(c, b) + 1e-9
        assert ab == pytest.approx(np.linalg.norm(a - b), rel=1e-9)


class TestHitMissMargins:
    def test_separated_clusters_positive(self, rng):
        centres = {"a": np.zeros(4), "b": np.full(4, 10.0)}
        labels = ["a", "b"] * 5
        levels = np.array([[centres[l] + 0.1 * rng.normal(size=4) for _ in range(3)] for l in labels])
        m = hit_miss_margins(list(levels), labels)
        assert m.values.shape == (10, 3)
        assert (m.values > 0).all()

    def test_duplicate_in_both_classes(self, rng):
        levels = rng.random((5, 3, 4))
        levels[1] = levels[2] = levels[0]
        m = hit_miss_margins(list(levels), ["a", "b", "a", "b", "a"])
        np.testing.assert_allclose(m.values[0], 0.0, atol=1e-7)
        np.testing.assert_allclose(m.values[2], 0.0, atol=1e-7)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(4, 20), st.integers(0, 2**32 - 1))
    def test_brute_force(self, n, seed):
        rng = np.random.default_rng(seed)
        levels = rng.random((n, 3, 5))
        labels = ["a", "b"] * (n // 2) + ["c"] * (n % 2)
        if labels.count("c") == 1:
            labels[-1] = "a"
        m = hit_miss_margins(list(levels), labels)
        np.testing.assert_allclose(m.values, brute_margins(levels, labels), atol=1e-7)

    def test_uses_stack_scales(self, rng):
        stacks = [build_stack(rng.random(10), [1.0, 2.0, 4.0]) for _ in range(4)]
        m = hit_miss_margins(stacks, ["a", "a", "b", "b"])
        np.testing.assert_array_equal(m.scales, [1.0, 2.0, 4.0])

    @pytest.mark.parametrize("labels", [["a", "a", "a"], ["a", "a", "b"]])
    def test_degenerate(self, rng, labels):
        with pytest.raises(DegenerateClass):
            hit_miss_margins(list(rng.random((3, 2, 2))), labels)

    def test_csv(self, tmp_path):
        p = tmp_path / "m.csv"
        table([[1.0, -2.0]]).to_csv(p)
        assert p.read_text().splitlines() == ["row,1.0,2.0", "0,1.0,-2.0"]


class TestLearnScaleDistribution:
    def test_positive_vector(self):
        q = learn_scale_distribution(table([1.0, 3.0]))
        np.testing.assert_allclose(q.weights, [0.31623, 0.94868], atol=1e-5)
        assert q.norm == "l2"

    def test_positive_part(self):
        np.testing.assert_allclose(learn_scale_distribution(table([-1.0, 2.0])).weights, [0.0, 1.0])

    def test_column_mean(self):
        q = learn_scale_distribution(table([[1.0, 0.0], [1.0, 2.0]]))
        np.testing.assert_allclose(q.weights, np.array([1.0, 1.0]) / math.sqrt(2))

    def test_no_positive(self):
        with pytest.raises(NoPositiveMargin):
            learn_scale_distribution(table([-1.0, 0.0]))

    def test_empty(self):
        with pytest.raises(ValueError):
            learn_scale_distribution(MarginTable(np.zeros((0, 2)), np.arange(2.0)))

    def test_grid_search_3_scales(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            h = rng.normal(size=(12, 3))
            hbar = h.mean(axis=0)
            if (hbar <= 0).all():
                continue
            q = learn_scale_distribution(table(h))
            got = float(h.sum(axis=0) @ q.weights)
            best = sphere_grid(h.sum(axis=0))
            assert got >= best - 1e-3 * max(1.0, abs(best))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_beats_random_feasible_points(self, seed, m):
        rng = np.random.default_rng(seed)
        h = rng.normal(size=(6, m))
        if (h.mean(axis=0) <= 0).all():
            return
        q = learn_scale_distribution(table(h)).weights
        cand = np.abs(rng.normal(size=(20000, m)))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        assert h.mean(axis=0) @ q >= (cand @ h.mean(axis=0)).max() - 1e-12

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, (5, 4), elements=st.floats(-5, 5)), st.floats(1e-3, 1e3))
    def test_norm_and_equivariance(self, h, c):
        try:
            q = learn_scale_distribution(table(h))
        except NoPositiveMargin:
            assert (h.mean(axis=0) <= 0).all()
            return
        assert (q.weights >= 0).all()
        assert np.linalg.norm(q.weights) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(learn_scale_distribution(table(c * h)).weights, q.weights, atol=1e-9)


class TestScaleDistribution:
    def test_probability_conversion(self):
        q = ScaleDistribution(np.array([1.0, 2.0]), np.array([0.6, 0.8]), "l2").as_probability()
        assert q.norm == "prob"
        assert q.weights.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(q.weights, [3 / 7, 4 / 7])

    def test_zero_mass(self):
        with pytest.raises(ZeroMass):
            ScaleDistribution(np.array([1.0]), np.array([0.0]), "l2").as_probability()

    def test_validation(self):
        with pytest.raises(ValueError):
            ScaleDistribution(np.array([1.0, 2.0]), np.array([1.0]))
        with pytest.raises(ValueError):
            ScaleDistribution(np.array([1.0]), np.array([-1.0]))

    def test_mass_in(self):
        q = ScaleDistribution(np.array([1.0, 4.0, 16.0]), np.array([1.0, 1.0, 2.0]), "l2")
        assert q.mass_in(2, 20) == pytest.approx(0.75)


class TestSITK:
    @pytest.fixture
    def stacks(self, rng):
        return [build_stack(rng.random((12, 3)), [0.5, 2.0, 8.0]) for _ in range(5)]

    @pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.variant)
    def test_point_mass(self, stacks, kind):
        for j in range(3):
            q = ScaleDistribution.point(stacks[0].scales_x, j)
            ref = single_scale_kernel(stacks[0].levels[j], stacks[1].levels[j], kind)
            assert sitk(stacks[0], stacks[1], q, kind) == pytest.approx(ref, rel=1e-12)

    def test_uniform_two_scales(self, rng):
        a, b = (build_stack(rng.random(10), [1.0, 4.0]) for _ in range(2))
        q = ScaleDistribution.uniform([1.0, 4.0])
        ks = [single_scale_kernel(a.levels[j], b.levels[j]) for j in range(2)]
        assert sitk(a, b, q) == pytest.approx(np.mean(ks), rel=1e-12)

    @pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.variant)
    def test_matrix(self, stacks, kind):
        q = ScaleDistribution(stacks[0].scales_x, np.array([0.2, 0.5, 0.3]))
        k = sitk_matrix(stacks, q, kind)
        np.testing.assert_allclose(k, k.T, atol=1e-12)
        for i in range(5):
            for j in range(5):
                assert k[i, j] == pytest.approx(sitk(stacks[i], stacks[j], q, kind), abs=1e-12)
        if kind.variant in ("rbf", "jensen-shannon", "cosine"):
            np.testing.assert_allclose(np.diag(k), 1.0, atol=1e-12)

    def test_bilinear_in_q(self, stacks):
        g = level_grams(stacks)
        w1, w2 = np.array([0.2, 0.3, 0.5]), np.array([0.6, 0.1, 0.3])
        k1 = sitk_matrix(stacks, ScaleDistribution(stacks[0].scales_x, w1), grams=g)
        k2 = sitk_matrix(stacks, ScaleDistribution(stacks[0].scales_x, w2), grams=g)
        mix = sitk_matrix(stacks, ScaleDistribution(stacks[0].scales_x, 0.25 * w1 + 0.75 * w2), grams=g)
        np.testing.assert_allclose(mix, 0.25 * k1 + 0.75 * k2, atol=1e-12)

    def test_requires_probability(self, stacks):
        q = ScaleDistribution(stacks[0].scales_x, np.array([0.6, 0.8, 0.0]), "l2")
        with pytest.raises(ValueError):
            sitk(stacks[0], stacks[1], q)

    def test_ladder_mismatch(self, stacks):
        with pytest.raises(DimensionMismatch):
            sitk(stacks[0], stacks[1], ScaleDistribution.uniform([1.0, 2.0]))


class TestRelevance:
    @pytest.fixture
    def docs(self):
        text = "apple pie. banana bread. cherry tart. apple tart. banana pie."
        doc, vocab = indexed(text)
        return doc, vocab

    def test_neg_kl_identity(self, rng):
        p = rng.random(6)
        assert neg_kl(p, p) == pytest.approx(0.0, abs=1e-12)
        assert neg_kl(p, 2 * p) == pytest.approx(0.0, abs=1e-12)

    def test_neg_kl_formula(self):
        p, q = np.array([0.5, 0.5, 0.0]), np.array([0.25, 0.25, 0.5])
        eps = 1e-9
        ref = -sum(a * math.log((a + eps) / (b + eps)) for a, b in zip(p, q))
        assert neg_kl(p, q) == pytest.approx(ref, rel=1e-14)
        assert neg_kl(p, q) == pytest.approx(-math.log(2), rel=1e-8)

    def test_self_relevance_is_maximal(self, docs, rng):
        doc, vocab = docs
        sig = normalize_signal(word2d_signal(doc, vocab)).values
        assert relevance_at_scale(sig, sig, "word") == pytest.approx(0.0, abs=1e-12)
        other = rng.random(sig.shape)
        assert relevance_at_scale(sig, other, "word") < 0

    def test_no_shared_vocabulary_scores_lower(self):
        words = "apple banana cherry durian".split()
        from textscale.textio import Document, TokenizerConfig, Vocabulary, index_document

        vocab = Vocabulary(tuple(words), (1,) * 4)
        cfg = TokenizerConfig()
        q = index_document(Document("q", "apple banana apple."), vocab, cfg)
        some = index_document(Document("s", "apple cherry durian."), vocab, cfg)
        none = index_document(Document("n", "cherry durian cherry."), vocab, cfg)
        lq, ls, ln = (normalize_signal(word2d_signal(d, vocab)).values for d in (q, some, none))
        assert relevance_at_scale(lq, ln, "word") < relevance_at_scale(lq, ls, "word")

    def test_sentence_sum_over_rows(self, docs):
        doc, vocab = docs
        d = sentence2d_signal(doc, vocab).values
        qv = d[0]
        ref = sum(neg_kl(qv, row) for row in d)
        assert relevance_at_scale(qv, d, "sentence") == pytest.approx(ref, rel=1e-12)
        assert relevance_at_scale(qv, d, "sentence", "mean") == pytest.approx(ref / len(d), rel=1e-12)

    def test_bow(self, rng):
        a, b = rng.random(5), rng.random(5)
        assert relevance_at_scale(a, b, "bow") == pytest.approx(neg_kl(a, b))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            relevance_at_scale(np.ones(3), np.ones((4, 5)), "sentence")
        with pytest.raises(ValueError):
            relevance_at_scale(np.ones(3), np.ones(3), "nope")

    def test_silm_point_mass(self, docs):
        doc, vocab = docs
        d = build_stack(sentence2d_signal(doc, vocab), [0.5, 2.0])
        q = build_stack(sentence2d_signal(doc, vocab).values[:1], [0.5, 2.0])
        for j in range(2):
            dist = ScaleDistribution.point(d.scales_x, j)
            ref = relevance_at_scale(q.levels[j], d.levels[j])
            assert silm_relevance(q, d, dist) == pytest.approx(ref, rel=1e-12)
        prof = relevance_profile(q, d)
        assert silm_relevance(q, d, ScaleDistribution.uniform([0.5, 2.0])) == pytest.approx(prof.mean(), rel=1e-12)


class TestPairwiseMargins:
    def test_single_pair_shape(self, rng):
        q = rng.random((2, 4))
        a, b = rng.random((2, 3, 4)), rng.random((2, 3, 4))
        m = pairwise_margins([("q", q, [("a", a, 1), ("b", b, 0)])])
        assert m.values.shape == (1, 2)
        assert m.rows == (("q", "a", "b"),)

    def test_identical_docs_zero(self, rng):
        q = rng.random((2, 4))
        a = rng.random((2, 3, 4))
        m = pairwise_margins([("q", q, [("a", a, 2), ("b", a.copy(), 1)])])
        np.testing.assert_allclose(m.values, 0.0, atol=1e-12)

    def test_matches_recomputed_relevance(self, rng):
        q = rng.random((3, 4))
        docs = [(f"d{i}", rng.random((3, 5, 4)), g) for i, g in enumerate([2, 1, 0, 1])]
        m = pairwise_margins([("q", q, docs)])
        assert len(m.values) == 5  # 2>1 twice, 2>0, 1>0 twice
        look = {did: s for did, s, _ in docs}
        for (qid, i, j), row in zip(m.rows, m.values):
            for lvl in range(3):
                ref = relevance_at_scale(q[lvl], look[i][lvl]) - relevance_at_scale(q[lvl], look[j][lvl])
                assert row[lvl] == pytest.approx(ref, rel=1e-12, abs=1e-12)

    def test_no_pairs(self, rng):
        with pytest.raises(NoPreferencePairs):
            pairwise_margins([("q", rng.random((1, 3)), [("a", rng.random((1, 2, 3)), 1)])])
