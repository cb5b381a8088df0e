"""Synthetic corpora with planted multi-scale structure, for tests and experiments."""
from __future__ import annotations

from dataclasses import dataclass

from .textio import Document, Vocabulary


def _words(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i:02d}" for i in range(n)]


def _sentence(rng, pool, lo=6, hi=10) -> str:
    return " ".join(rng.choice(pool, size=int(rng.integers(lo, hi + 1)))) + "."


def block_document(rng, n_blocks=3, min_sentences=5, max_sentences=8, block_vocab=8, sentence_len=(8, 12), doc_id="doc"):
    """Concatenated blocks of sentences drawn from disjoint vocabularies.

    Returns the document and the indices of the first sentence of every
    block after the first (the true boundaries).
    """
    sentences, bounds = [], []
    for b in range(n_blocks):
        if b:
            bounds.append(len(sentences))
        pool = _words(f"b{b}w", block_vocab)
        for _ in range(int(rng.integers(min_sentences, max_sentences + 1))):
            sentences.append(_sentence(rng, pool, *sentence_len))
    return Document(doc_id, " ".join(sentences)), bounds


@dataclass
class ClassificationSet:
    docs: list[Document]
    labels: list[str]
    vocab: Vocabulary


def ngram_class_corpus(rng, n_docs=40, length=48, n_background=12, offset=14):
    """Two classes that differ only in where an n-gram run of a marker word sits.

    Every document is random background tokens plus one run of ``n``
    consecutive marker tokens, ``n`` drawn from {1, 2, 4}. Class ``a`` places
    the run around position ``length/2 - offset/2``, class ``b`` around
    ``length/2 + offset/2``; the run start is jittered by up to ``n``
    positions. Word counts are identically distributed in both classes.
    """
    background = _words("bg", n_background)
    docs, labels = [], []
    for i in range(n_docs):
        label = "a" if i % 2 == 0 else "b"
        n = int(rng.choice([1, 2, 4]))
        toks = list(rng.choice(background, size=length))
        centre = length // 2 + (-offset // 2 if label == "a" else offset // 2)
        start = centre - n // 2 + int(rng.integers(-n, n + 1))
        for k in range(n):
            toks[start + k] = "marker"
        docs.append(Document(f"d{i:03d}", " ".join(toks), label))
        labels.append(label)
    words = tuple(["marker"] + background)
    return ClassificationSet(docs, labels, Vocabulary(words, (1,) * len(words)))


@dataclass
class RetrievalSet:
    docs: list[Document]
    queries: list[Document]
    qrels: dict[str, dict[str, int]]
    planted: dict[tuple[str, str], tuple[int, int]]  # (query, doc) -> sentence span
    vocab: Vocabulary


def planted_retrieval_set(rng, n_docs=50, n_queries=10, doc_sentences=30, passage=3, relevant_per_query=5,
                          topic_vocab=8, background_vocab=40, query_words=4, shared_words=2):
    """Long background documents with short topical passages planted in some of them.

    Query ``k`` is a sentence of topic-``k`` words; the documents with a
    topic-``k`` passage are relevant (grade 1), every other document is
    judged non-relevant. Topic passages also contain background words, and
    each topic vocabulary shares ``shared_words`` words with the next topic,
    so single words are ambiguous while passages are not.
    """
    background = _words("bg", background_vocab)
    topics = [_words(f"t{k}w", topic_vocab) for k in range(n_queries)]
    for k in range(n_queries):
        topics[k] = topics[k] + topics[(k + 1) % n_queries][:shared_words]
    docs, qrels, planted = [], {}, {}
    owner = {}
    for k in range(n_queries):
        for j in range(relevant_per_query):
            owner[k * relevant_per_query + j] = k
    for i in range(n_docs):
        did = f"d{i:03d}"
        sents = [_sentence(rng, background) for _ in range(doc_sentences)]
        if i in owner:
            k = owner[i]
            start = int(rng.integers(0, doc_sentences - passage + 1))
            pool = topics[k] + background[:4]
            for x in range(start, start + passage):
                sents[x] = _sentence(rng, pool)
            planted[(f"q{k:02d}", did)] = (start, start + passage)
        docs.append(Document(did, " ".join(sents)))
    queries = []
    for k in range(n_queries):
        qid = f"q{k:02d}"
        queries.append(Document(qid, " ".join(rng.choice(topics[k][:topic_vocab], size=query_words, replace=False)) + "."))
        qrels[qid] = {d.id: int((qid, d.id) in planted) for d in docs}
    words = tuple(background + [w for t in topics for w in t[:topic_vocab]])
    return RetrievalSet(docs, queries, qrels, planted, Vocabulary(words, (1,) * len(words)))
