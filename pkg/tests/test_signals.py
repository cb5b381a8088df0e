import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from textscale.errors import EmptySignal, FormatError, MissingEmbedding, ZeroMass
from textscale.signals import (
    Signal1D,
    Signal2D,
    bow1d_signal,
    normalize_signal,
    resample_bilinear,
    resample_rows,
    sentence2d_signal,
    topic1d_signal,
    word2d_signal,
)
from textscale.textio import Document, Vocabulary, index_document

from conftest import indexed


class TestWord2D:
    def test_demo_shape_and_one_hot_rows(self, demo_doc, demo_vocab):
        sig = word2d_signal(demo_doc, demo_vocab)
        assert sig.values.shape == (10, 12)
        np.testing.assert_array_equal(sig.values.sum(axis=1), np.ones(10))
        assert set(np.unique(sig.values)) == {0.0, 1.0}
        assert sig.values[4, demo_vocab.index["iphone"]] == 1

    def test_single_token(self):
        doc, vocab = indexed("hello")
        np.testing.assert_array_equal(word2d_signal(doc, vocab).values, [[1.0]])

    def test_no_in_vocabulary_tokens(self):
        vocab = Vocabulary(("a",), (1,))
        with pytest.raises(EmptySignal):
            word2d_signal(index_document(Document("d", "zz yy"), vocab), vocab)

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError):
            Signal2D(np.array([[1.0, -0.5]]))


class TestBow:
    def test_demo_counts(self, demo_doc, demo_vocab):
        bow = bow1d_signal(word2d_signal(demo_doc, demo_vocab))
        counts = dict(zip(demo_vocab.words, bow.values))
        assert counts["new"] == 3 and counts["york"] == 2
        for w in ("time", "free", "iphone", "gift", "customer"):
            assert counts[w] == 1
        for w in ("apple", "egg", "city", "service", "coupon"):
            assert counts[w] == 0
        assert bow.domain == "semantic"

    def test_one_hot_row(self):
        sig = Signal2D(np.array([[0.0, 1.0, 0.0]]))
        np.testing.assert_array_equal(bow1d_signal(sig).values, [0, 1, 0])


class TestSentence2D:
    def test_row_counts(self):
        doc, vocab = indexed("a b a. c. b b b")
        sig = sentence2d_signal(doc, vocab)
        np.testing.assert_array_equal(sig.values.sum(axis=1), [3, 1, 3])
        assert sig.values[0, vocab.index["a"]] == 2
        assert sig.kind == "sentence"

    def test_single_sentence_is_bow(self):
        doc, vocab = indexed("x y x")
        np.testing.assert_array_equal(sentence2d_signal(doc, vocab).values[0], bow1d_signal(word2d_signal(doc, vocab)).values)

    def test_identical_sentences(self):
        doc, vocab = indexed("p q. p q.")
        v = sentence2d_signal(doc, vocab).values
        np.testing.assert_array_equal(v[0], v[1])

    def test_all_empty(self):
        vocab = Vocabulary(("a",), (1,))
        with pytest.raises(EmptySignal):
            sentence2d_signal(index_document(Document("d", "x. y."), vocab), vocab)


class TestTopic:
    def _doc(self):
        doc, _ = indexed("a. b. c", doc_id="t")
        return doc

    def test_copy(self):
        table = {("t", i): np.array([i, 1.0 - i / 2, 0.5]) for i in range(3)}
        sig = topic1d_signal(self._doc(), table)
        assert sig.values.shape == (3, 3)
        np.testing.assert_array_equal(sig.values[2], table[("t", 2)])

    def test_missing(self):
        table = {("t", 0): np.ones(2), ("t", 1): np.ones(2)}
        with pytest.raises(MissingEmbedding) as err:
            topic1d_signal(self._doc(), table)
        assert err.value.sentence_index == 2

    def test_ragged(self):
        table = {("t", 0): np.ones(2), ("t", 1): np.ones(3), ("t", 2): np.ones(2)}
        with pytest.raises(FormatError):
            topic1d_signal(self._doc(), table)


class TestNormalize:
    def test_demo_entries(self, demo_doc, demo_vocab):
        v = normalize_signal(word2d_signal(demo_doc, demo_vocab)).values
        np.testing.assert_allclose(v[v > 0], 0.1)

    def test_idempotent(self, rng):
        sig = normalize_signal(Signal2D(rng.random((4, 3))))
        again = normalize_signal(sig)
        np.testing.assert_array_equal(again.values, sig.values)
        assert again.normalized

    def test_zero_mass(self):
        with pytest.raises(ZeroMass):
            normalize_signal(Signal1D(np.zeros(3)))


class TestResample:
    def test_identity(self, rng):
        sig = Signal2D(rng.random((5, 3)))
        np.testing.assert_array_equal(resample_bilinear(sig, 5).values, sig.values)

    def test_ramp(self):
        out = resample_rows(np.arange(4.0)[:, None], 7)
        np.testing.assert_allclose(out[:, 0], [0, 0.5, 1, 1.5, 2, 2.5, 3])

    def test_renormalizes(self, rng):
        sig = normalize_signal(Signal2D(rng.random((5, 3))))
        out = resample_bilinear(sig, 11)
        assert out.values.shape == (11, 3)
        assert abs(out.mass - 1) < 1e-12

    def test_single_row_broadcast(self):
        out = resample_rows(np.array([[1.0, 2.0]]), 3)
        np.testing.assert_array_equal(out, [[1, 2]] * 3)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.tuples(st.integers(2, 12), st.integers(1, 4)), elements=st.floats(0, 10)), st.integers(1, 30))
def test_resample_bounds_property(values, n):
    out = resample_rows(values, n)
    assert out.shape == (n, values.shape[1])
    assert (out >= values.min(axis=0) - 1e-12).all()
    assert (out <= values.max(axis=0) + 1e-12).all()


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 5), st.integers(2, 10), st.integers(1, 25))
def test_resample_constant_property(c, n, m):
    np.testing.assert_allclose(resample_rows(np.full((n, 2), c), m), c, rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=8), min_size=1, max_size=5))
def test_word_rows_and_bow_counts_property(sentences):
    text = " ".join(" ".join(s) + "." for s in sentences)
    doc, vocab = indexed(text)
    sig = word2d_signal(doc, vocab)
    np.testing.assert_array_equal(sig.values.sum(axis=1), 1.0)
    expect = np.zeros(len(vocab))
    for w in (t for s in sentences for t in s):
        expect[vocab.index[w]] += 1
    np.testing.assert_array_equal(bow1d_signal(sig).values, expect)
    np.testing.assert_allclose(normalize_signal(sig).mass, 1.0, atol=1e-9)
