"""Scale-space representations of text over spatial and semantic domains."""
from .errors import *  # noqa: F401,F403
from .invariance import (
    KernelKind,
    ScaleDistribution,
    hit_miss_margins,
    learn_scale_distribution,
    pairwise_margins,
    silm_relevance,
    single_scale_kernel,
    sitk,
    sitk_matrix,
)
from .kernels import Boundary, discrete_gaussian_kernel, poisson_kernel, sampled_gaussian_kernel, smooth_separable_2d
from .scalespace import ScaleLadder, build_scale_ladder, build_stack, build_interval_tree, detect_interest_points
from .semgraph import SemanticGraph, SemanticSmoother, build_pmi_graph, graph_smooth
from .signals import Signal1D, Signal2D, TopicSignal, bow1d_signal, normalize_signal, sentence2d_signal, word2d_signal
from .tasks import (
    KernelPerceptron,
    evaluate_classification,
    evaluate_retrieval,
    hierarchical_segment,
    keyword_hierarchy,
    passage_retrieve,
)
from .textio import Document, TokenizerConfig, Vocabulary, build_vocabulary, index_document, load_artifact, persist_artifact

__version__ = "0.1.0"
