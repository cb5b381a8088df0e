"""Textual signals: word-level 2D, bag-of-words 1D, sentence-level 2D and topic 1D."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import EmptySignal, FormatError, MissingEmbedding, ZeroMass
from .textio import Document, Vocabulary


@dataclass(frozen=True)
class Signal2D:
    """Dense non-negative matrix indexed by (spatial position, vocabulary index)."""

    values: np.ndarray
    kind: str = "word"  # "word" | "sentence"
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("Signal2D needs a 2D array")
        if (v < 0).any():
            raise ValueError("signal entries must be non-negative")
        object.__setattr__(self, "values", v)

    @property
    def spatial_len(self) -> int:
        return self.values.shape[0]

    @property
    def semantic_len(self) -> int:
        return self.values.shape[1]

    @property
    def mass(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class Signal1D:
    values: np.ndarray
    domain: str = "semantic"  # "semantic" | "spatial"
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("Signal1D needs a 1D array")
        if (v < 0).any():
            raise ValueError("signal entries must be non-negative")
        object.__setattr__(self, "values", v)

    @property
    def mass(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class TopicSignal:
    """Spatial sequence of k-dimensional topic embeddings, one per sentence.

    Only spatial smoothing is ever applied to it, independently per dimension.
    """

    values: np.ndarray  # (N, k)
    doc_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("TopicSignal needs an (N, k) array")
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @property
    def spatial_len(self) -> int:
        return self.values.shape[0]


def word2d_signal(doc: Document, vocab: Vocabulary) -> Signal2D:
    tokens = doc.tokens
    if not tokens:
        raise EmptySignal(f"document {doc.id!r} has no in-vocabulary tokens")
    out = np.zeros((len(tokens), len(vocab)))
    out[np.arange(len(tokens)), tokens] = 1.0
    return Signal2D(out, kind="word")


def bow1d_signal(sig: Signal2D) -> Signal1D:
    return Signal1D(sig.values.sum(axis=0), domain="semantic", normalized=sig.normalized)


def sentence2d_signal(doc: Document, vocab: Vocabulary) -> Signal2D:
    if not doc.sentences:
        raise EmptySignal(f"document {doc.id!r} has no sentences")
    out = np.zeros((len(doc.sentences), len(vocab)))
    for x, sent in enumerate(doc.sentences):
        np.add.at(out[x], sent, 1.0)
    if not out.any():
        raise EmptySignal(f"all sentences of {doc.id!r} are empty after filtering")
    return Signal2D(out, kind="sentence")


def topic1d_signal(doc: Document, embeddings: dict) -> TopicSignal:
    rows, k = [], None
    for i in range(len(doc.sentences)):
        try:
            vec = np.asarray(embeddings[(doc.id, i)], dtype=float)
        except KeyError:
            raise MissingEmbedding(doc.id, i) from None
        if k is None:
            k = len(vec)
        elif len(vec) != k:
            raise FormatError(f"sentence {i} of {doc.id!r} has {len(vec)} topic dimensions, expected {k}")
        rows.append(vec)
    if not rows:
        raise EmptySignal(f"document {doc.id!r} has no sentences")
    return TopicSignal(np.vstack(rows), doc.id)


def normalize_signal(sig):
    """Divide by total mass so the signal is a joint distribution."""
    total = float(sig.values.sum())
    if total <= 0:
        raise ZeroMass("cannot normalize a signal with zero mass")
    if getattr(sig, "normalized", False) and abs(total - 1.0) < 1e-12:
        return sig
    return dataclasses.replace(sig, values=sig.values / total, normalized=True)


def resample_rows(values: np.ndarray, new_len: int) -> np.ndarray:
    """Linear interpolation along axis 0 with endpoints aligned."""
    values = np.asarray(values, dtype=float)
    if new_len < 1:
        raise ValueError("new length must be >= 1")
    n = values.shape[0]
    if n == new_len:
        return values.copy()
    if n == 1:
        return np.repeat(values, new_len, axis=0)
    pos = np.linspace(0.0, n - 1, new_len)
    lo = np.clip(np.floor(pos).astype(int), 0, n - 2)
    frac = (pos - lo).reshape((-1,) + (1,) * (values.ndim - 1))
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac


def resample_bilinear(sig, new_spatial_len: int):
    """Stretch the spatial axis to ``new_spatial_len``; the semantic axis is untouched."""
    values = resample_rows(sig.values, new_spatial_len)
    if getattr(sig, "normalized", False):
        values = values / values.sum()
    return dataclasses.replace(sig, values=values)
