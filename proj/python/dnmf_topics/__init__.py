"""Deep-model-constrained NMF topic modeling.

Thin python surface over the C++ core: corpus-scale work goes through the
`dnmf` CLI; this module exposes the numerical operations for scripting and
experimentation.
"""

from ._core import (  # noqa: F401
    ComputeError,
    ValidationError,
    __version__,
    clustering_accuracy,
    coherence,
    fit,
    layer_widths,
    mbn_cluster,
    similarity_count,
    solve,
    spectral_cluster,
    top_words,
)

__all__ = [
    "ComputeError",
    "ValidationError",
    "__version__",
    "clustering_accuracy",
    "coherence",
    "fit",
    "layer_widths",
    "mbn_cluster",
    "similarity_count",
    "solve",
    "spectral_cluster",
    "top_words",
]
