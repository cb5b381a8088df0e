"""A tiny worked example: one headline, a 12-word vocabulary and a hand-made word graph."""
from __future__ import annotations

from .semgraph import SemanticGraph
from .textio import Document, TokenizerConfig, Vocabulary

TEXT = "New York Times offers free iPhone 3G as gifts for new customers in New York"

WORDS = ("new", "york", "time", "free", "iphone", "gift", "customer", "apple", "egg", "city", "service", "coupon")

STOPWORDS = frozenset({"offers", "3g", "as", "for", "in"})

EDGES = (
    ("new", "york", 3.0),
    ("york", "time", 2.0),
    ("new", "time", 2.0),
    ("iphone", "apple", 2.5),
    ("new", "egg", 1.0),
    ("iphone", "egg", 1.0),
    ("customer", "service", 2.0),
    ("free", "coupon", 1.5),
    ("gift", "coupon", 1.5),
    ("free", "gift", 1.0),
    ("york", "city", 2.0),
    ("new", "city", 1.5),
    ("customer", "gift", 1.0),
    ("iphone", "free", 0.8),
)


def tokenizer() -> TokenizerConfig:
    return TokenizerConfig(stopwords=STOPWORDS, stemmer="plural")


def vocabulary() -> Vocabulary:
    return Vocabulary(WORDS, (1,) * len(WORDS))


def document() -> Document:
    return Document("headline", TEXT)


def graph() -> SemanticGraph:
    vocab = vocabulary()
    return SemanticGraph(WORDS, {(vocab.index[a], vocab.index[b]): w for a, b, w in EDGES})
