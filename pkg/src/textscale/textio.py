"""Corpus ingestion, tokenization, vocabulary construction and on-disk formats.

File formats (all UTF-8, one record per line):

* corpus        JSON lines with keys ``id``, ``text`` and optional ``label``
* vocabulary    ``index<TAB>word<TAB>df``
* graph         ``word_a<TAB>word_b<TAB>weight``; node weights as ``word<TAB>*<TAB>weight``
* topics        ``doc_id<TAB>sentence_index<TAB>v1,v2,...,vk``
* signal        header ``TSS1 rows cols`` then tab-separated rows
* qrels         ``query_id 0 doc_id relevance``
* run           ``query_id Q0 doc_id rank score tag``
* scales        ``scale<TAB>weight``
"""
from __future__ import annotations

import contextlib
import dataclasses
import json
import math
import os
import re
import string
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyVocabulary, FormatError, TextScaleError

_SENTENCE_END = re.compile(r"[.!?]+")
_STRIP = string.punctuation


@dataclass
class Document:
    id: str
    text: str
    label: str | None = None
    sentences: list[list[int]] = field(default_factory=list)

    @property
    def tokens(self) -> list[int]:
        return [t for s in self.sentences for t in s]


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    df: tuple[int, ...]

    def __post_init__(self):
        if len(self.words) != len(self.df):
            raise ValueError("words and df must have equal length")
        if len(set(self.words)) != len(self.words):
            raise ValueError("duplicate words in vocabulary")
        object.__setattr__(self, "index", {w: i for i, w in enumerate(self.words)})

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index


# Stemmers are looked up by name so configs stay serializable.
STEMMERS: dict[str, Callable[[str], str]] = {"identity": lambda w: w}


def register_stemmer(name: str, fn: Callable[[str], str]) -> None:
    STEMMERS[name] = fn


def _plural_stem(word: str) -> str:
    if len(word) > 3 and word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


register_stemmer("plural", _plural_stem)


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    stopwords: frozenset[str] = frozenset()
    max_vocab: int = 20000
    stemmer: str = "identity"

    def __post_init__(self):
        if self.max_vocab < 1:
            raise ValueError("max_vocab must be >= 1")
        if self.stemmer not in STEMMERS:
            raise ValueError(f"unknown stemmer {self.stemmer!r}")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))


def tokenize(text: str, config: TokenizerConfig = TokenizerConfig()) -> list[list[str]]:
    """Split text into sentences of tokens.

    Sentences end at ``.``, ``!`` or ``?``; tokens are whitespace separated with
    surrounding punctuation stripped. Lowercasing, stopword removal and
    stemming are applied in that order. Sentences left empty are dropped.
    """
    stem = STEMMERS[config.stemmer]
    out = []
    for chunk in _SENTENCE_END.split(text):
        sent = []
        for raw in chunk.split():
            tok = raw.strip(_STRIP)
            if not tok:
                continue
            if config.lowercase:
                tok = tok.lower()
            if tok in config.stopwords:
                continue
            sent.append(stem(tok))
        if sent:
            out.append(sent)
    return out


def build_vocabulary(corpus: Sequence[Document], config: TokenizerConfig = TokenizerConfig()) -> Vocabulary:
    """Rank words by document frequency (ties lexicographic) and keep the top ``max_vocab``."""
    if not corpus:
        raise ValueError("corpus is empty")
    df: Counter[str] = Counter()
    for doc in corpus:
        df.update({t for s in tokenize(doc.text, config) for t in s})
    if not df:
        raise EmptyVocabulary("no token survived filtering")
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[: config.max_vocab]
    return Vocabulary(tuple(w for w, _ in ranked), tuple(c for _, c in ranked))


def index_document(doc: Document, vocab: Vocabulary, config: TokenizerConfig = TokenizerConfig()) -> Document:
    """Return a copy of ``doc`` with ``sentences`` as vocabulary indices.

    Out-of-vocabulary tokens are dropped; sentences keep their position even
    if they become empty, so sentence indices stay aligned with topic tables.
    """
    idx = vocab.index
    sentences = [[idx[t] for t in s if t in idx] for s in tokenize(doc.text, config)]
    return dataclasses.replace(doc, sentences=sentences)


def index_corpus(corpus: Iterable[Document], vocab: Vocabulary, config: TokenizerConfig = TokenizerConfig()):
    return [index_document(d, vocab, config) for d in corpus]


# ---------------------------------------------------------------------------
# persistence helpers


@contextlib.contextmanager
def atomic_write(path, mode="w"):
    """Write to a temporary file next to ``path`` and rename on success."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, encoding=None if "b" in mode else "utf-8", newline=None if "b" in mode else "\n") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line


def _float(text, path, lineno):
    try:
        value = float(text)
    except ValueError:
        raise FormatError(f"not a number: {text!r}", path, lineno) from None
    if not math.isfinite(value):
        raise FormatError(f"non-finite value: {text!r}", path, lineno)
    return value


def _fmt(x: float) -> str:
    return repr(float(x))


def load_corpus(path) -> list[Document]:
    docs, seen = [], set()
    for lineno, line in _lines(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", path, lineno) from None
        if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
            raise FormatError("record needs 'id' and 'text'", path, lineno)
        doc_id = str(obj["id"])
        if not doc_id:
            raise FormatError("empty document id", path, lineno)
        if doc_id in seen:
            raise FormatError(f"duplicate document id {doc_id!r}", path, lineno)
        seen.add(doc_id)
        label = obj.get("label")
        docs.append(Document(doc_id, str(obj["text"]), None if label is None else str(label)))
    return docs


def save_corpus(docs: Iterable[Document], path) -> None:
    with atomic_write(path) as fh:
        for d in docs:
            rec = {"id": d.id, "text": d.text}
            if d.label is not None:
                rec["label"] = d.label
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def save_vocabulary(vocab: Vocabulary, path) -> None:
    with atomic_write(path) as fh:
        for i, (w, c) in enumerate(zip(vocab.words, vocab.df)):
            fh.write(f"{i}\t{w}\t{c}\n")


def load_vocabulary(path) -> Vocabulary:
    words, df = [], []
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError("expected 'index<TAB>word<TAB>df'", path, lineno)
        try:
            i, c = int(parts[0]), int(parts[2])
        except ValueError:
            raise FormatError("index and df must be integers", path, lineno) from None
        if i != len(words):
            raise FormatError(f"expected index {len(words)}, got {i}", path, lineno)
        if c < 1:
            raise FormatError("df must be >= 1", path, lineno)
        if parts[1] in words:
            raise FormatError(f"duplicate word {parts[1]!r}", path, lineno)
        words.append(parts[1])
        df.append(c)
    return Vocabulary(tuple(words), tuple(df))


def save_graph(graph, path) -> None:
    with atomic_write(path) as fh:
        for (a, b), w in sorted(graph.edges.items()):
            fh.write(f"{graph.words[a]}\t{graph.words[b]}\t{_fmt(w)}\n")
        for i, mu in enumerate(graph.node_weights):
            if mu != 1.0:
                fh.write(f"{graph.words[i]}\t*\t{_fmt(mu)}\n")


def load_graph(path, vocab: Vocabulary | None = None):
    """Read a semantic graph.

    With a vocabulary, rows naming unknown words are skipped; without one the
    node set is the words in order of first appearance.
    """
    from .semgraph import SemanticGraph

    words = list(vocab.words) if vocab is not None else []
    index = dict(vocab.index) if vocab is not None else {}
    edges: dict[tuple[int, int], float] = {}
    nodes: dict[int, float] = {}

    def lookup(word):
        if word not in index:
            if vocab is not None:
                return None
            index[word] = len(words)
            words.append(word)
        return index[word]

    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError("expected 'word_a<TAB>word_b<TAB>weight'", path, lineno)
        w = _float(parts[2], path, lineno)
        if w <= 0:
            raise FormatError(f"weight must be positive, got {parts[2]}", path, lineno)
        a = lookup(parts[0])
        if parts[1] == "*":
            if a is not None:
                nodes[a] = w
            continue
        b = lookup(parts[1])
        if a is None or b is None:
            continue
        if a == b:
            raise FormatError("self-edge", path, lineno)
        key = (min(a, b), max(a, b))
        if key in edges:
            raise FormatError("pair listed twice", path, lineno)
        edges[key] = w
    mu = np.ones(len(words))
    for i, w in nodes.items():
        mu[i] = w
    return SemanticGraph(tuple(words), edges, mu)


def format_signal(sig) -> str:
    """``TSS1`` text for a signal or a plain 1D/2D array."""
    values = np.asarray(sig.values if hasattr(sig, "values") else sig, dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    header = f"TSS1 {values.shape[0]} {values.shape[1]}"
    kind = getattr(sig, "kind", None)
    if kind is not None:
        header += f" kind={kind} normalized={int(sig.normalized)}"
    rows = ["\t".join(_fmt(v) for v in row) for row in values]
    return "\n".join([header, *rows]) + "\n"


def save_signal(sig, path) -> None:
    text = format_signal(sig)
    with atomic_write(path) as fh:
        fh.write(text)


def load_matrix(path) -> tuple[np.ndarray, dict]:
    """Read a ``TSS1`` file; returns the matrix and any ``key=value`` header fields."""
    it = _lines(path)
    try:
        lineno, header = next(it)
    except StopIteration:
        raise FormatError("empty file", path, 1) from None
    parts = header.split()
    if len(parts) < 3 or parts[0] != "TSS1":
        raise FormatError("expected header 'TSS1 rows cols'", path, lineno)
    try:
        rows, cols = int(parts[1]), int(parts[2])
    except ValueError:
        raise FormatError("rows and cols must be integers", path, lineno) from None
    meta = dict(p.split("=", 1) for p in parts[3:] if "=" in p)
    out = np.empty((rows, cols))
    r = 0
    for lineno, line in it:
        if r >= rows:
            raise FormatError("more rows than declared", path, lineno)
        cells = line.split("\t")
        if len(cells) != cols:
            raise FormatError(f"expected {cols} columns, got {len(cells)}", path, lineno)
        out[r] = [_float(c, path, lineno) for c in cells]
        r += 1
    if r != rows:
        raise FormatError(f"expected {rows} rows, got {r}", path, None)
    return out, meta


def load_signal(path):
    from .signals import Signal2D

    values, meta = load_matrix(path)
    if (values < 0).any():
        raise FormatError("signal entries must be non-negative", path, None)
    return Signal2D(values, kind=meta.get("kind", "word"), normalized=meta.get("normalized", "0") == "1")


def save_topic_table(table: dict, path) -> None:
    with atomic_write(path) as fh:
        for (doc_id, i), vec in sorted(table.items()):
            fh.write(f"{doc_id}\t{i}\t{','.join(_fmt(v) for v in vec)}\n")


def load_topic_table(path) -> dict[tuple[str, int], np.ndarray]:
    table, k = {}, None
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError("expected 'doc_id<TAB>sentence_index<TAB>v1,...,vk'", path, lineno)
        try:
            i = int(parts[1])
        except ValueError:
            raise FormatError("sentence index must be an integer", path, lineno) from None
        vec = np.array([_float(v, path, lineno) for v in parts[2].split(",")])
        if k is None:
            k = len(vec)
        elif len(vec) != k:
            raise FormatError(f"expected {k} topic dimensions, got {len(vec)}", path, lineno)
        table[(parts[0], i)] = vec
    return table


def save_scale_distribution(q, path) -> None:
    with atomic_write(path) as fh:
        fh.write(f"#norm={q.norm}\n")
        for s, w in zip(q.scales, q.weights):
            fh.write(f"{_fmt(s)}\t{_fmt(w)}\n")


def load_scale_distribution(path):
    from .invariance import ScaleDistribution

    norm = None
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first.startswith("#norm="):
        norm = first.split("=", 1)[1]
    scales, weights = [], []
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError("expected 'scale<TAB>weight'", path, lineno)
        s, w = _float(parts[0], path, lineno), _float(parts[1], path, lineno)
        if s < 0 or w < 0:
            raise FormatError("scale and weight must be non-negative", path, lineno)
        if scales and s <= scales[-1]:
            raise FormatError("scales must be strictly ascending", path, lineno)
        scales.append(s)
        weights.append(w)
    if not scales:
        raise FormatError("no scales", path, None)
    weights = np.array(weights)
    if norm is None:
        norm = "prob" if abs(weights.sum() - 1) < 1e-9 else "l2"
    if norm not in ("prob", "l2"):
        raise FormatError(f"unknown normalization {norm!r}", path, 1)
    return ScaleDistribution(np.array(scales), weights, norm)


def load_qrels(path) -> dict[str, dict[str, int]]:
    qrels: dict[str, dict[str, int]] = {}
    for lineno, line in _lines(path):
        parts = line.split()
        if len(parts) != 4:
            raise FormatError("expected 'query_id 0 doc_id relevance'", path, lineno)
        try:
            rel = int(parts[3])
        except ValueError:
            raise FormatError("relevance must be an integer", path, lineno) from None
        qrels.setdefault(parts[0], {})[parts[2]] = rel
    return qrels


def save_qrels(qrels: dict, path) -> None:
    with atomic_write(path) as fh:
        for qid in sorted(qrels):
            for did, rel in sorted(qrels[qid].items()):
                fh.write(f"{qid} 0 {did} {rel}\n")


def load_run(path) -> dict[str, list[tuple[str, float]]]:
    """Read a TREC run; documents per query are ordered by rank."""
    rows: dict[str, list[tuple[int, str, float]]] = {}
    for lineno, line in _lines(path):
        parts = line.split()
        if len(parts) != 6:
            raise FormatError("expected 'query_id Q0 doc_id rank score tag'", path, lineno)
        try:
            rank, score = int(parts[3]), _float(parts[4], path, lineno)
        except ValueError:
            raise FormatError("rank must be an integer", path, lineno) from None
        rows.setdefault(parts[0], []).append((rank, parts[2], score))
    return {q: [(d, s) for _, d, s in sorted(r, key=lambda t: t[0])] for q, r in rows.items()}


def save_run(run: dict, path, tag="textscale") -> None:
    with atomic_write(path) as fh:
        for qid in sorted(run):
            for rank, (did, score) in enumerate(run[qid], 1):
                fh.write(f"{qid} Q0 {did} {rank} {_fmt(score)} {tag}\n")


def load_labels(path) -> dict[str, str]:
    """Read ``doc_id<TAB>label`` rows (classification gold or predictions)."""
    out = {}
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError("expected 'doc_id<TAB>label'", path, lineno)
        out[parts[0]] = parts[1]
    return out


def persist_artifact(artifact, path) -> None:
    from .invariance import ScaleDistribution
    from .semgraph import SemanticGraph
    from .signals import Signal2D

    if isinstance(artifact, Vocabulary):
        save_vocabulary(artifact, path)
    elif isinstance(artifact, SemanticGraph):
        save_graph(artifact, path)
    elif isinstance(artifact, Signal2D):
        save_signal(artifact, path)
    elif isinstance(artifact, ScaleDistribution):
        save_scale_distribution(artifact, path)
    elif isinstance(artifact, dict):
        save_topic_table(artifact, path)
    else:
        raise TypeError(f"cannot persist {type(artifact).__name__}")


_LOADERS = {
    "vocabulary": load_vocabulary,
    "graph": load_graph,
    "signal": load_signal,
    "scales": load_scale_distribution,
    "topics": load_topic_table,
    "qrels": load_qrels,
    "run": load_run,
    "corpus": load_corpus,
}


def load_artifact(path, kind: str, **kwargs):
    try:
        loader = _LOADERS[kind]
    except KeyError:
        raise TextScaleError(f"unknown artifact kind {kind!r}") from None
    return loader(path, **kwargs)
