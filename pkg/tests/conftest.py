import numpy as np
import pytest

from textscale import demo
from textscale.textio import Document, TokenizerConfig, build_vocabulary, index_document


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def demo_vocab():
    return demo.vocabulary()


@pytest.fixture
def demo_doc(demo_vocab):
    return index_document(demo.document(), demo_vocab, demo.tokenizer())


@pytest.fixture
def demo_graph():
    return demo.graph()


def indexed(text, doc_id="d", config=TokenizerConfig()):
    doc = Document(doc_id, text)
    vocab = build_vocabulary([doc], config)
    return index_document(doc, vocab, config), vocab
