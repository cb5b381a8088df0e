"""Print the demo headline's word-by-position signal before and after smoothing.

Usage: python scripts/demo_smoothing.py [--scales 1 4 64] [--boundary renormalize]
"""
import argparse

from textscale import demo
from textscale.kernels import Boundary, smooth_separable_2d
from textscale.semgraph import semantic_kernel_operator
from textscale.signals import normalize_signal, word2d_signal
from textscale.textio import index_document


def show(title, values, words):
    print(f"\n{title}")
    print("pos  " + " ".join(f"{w[:7]:>7}" for w in words))
    for i, row in enumerate(values):
        print(f"{i:3d}  " + " ".join(f"{v:7.4f}" for v in row))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scales", type=float, nargs="+", default=[1.0, 4.0, 64.0])
    ap.add_argument("--boundary", default="renormalize", choices=[b.value for b in Boundary])
    args = ap.parse_args()

    vocab = demo.vocabulary()
    doc = index_document(demo.document(), vocab, demo.tokenizer())
    sig = normalize_signal(word2d_signal(doc, vocab))
    graph = demo.graph()
    words = list(vocab.words)
    print("tokens:", " ".join(words[t] for t in doc.tokens))
    show("raw signal", sig.values, words)
    for s in args.scales:
        out = smooth_separable_2d(sig, s, semantic_kernel_operator(graph, s), boundary=Boundary(args.boundary)).values
        show(f"s_x = s_y = {s:g} (max/min {out.max() / out.min():.3f})", out, words)


if __name__ == "__main__":
    main()
