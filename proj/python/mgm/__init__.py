"""Manifold graph metrics over NNK neighborhoods."""

import json

from ._mgm import (
    Error,
    InputError,
    Manifest,
    Normalization,
    NumericalError,
    feature_names,
    nnk_graph,
    read_embeddings,
    run_graph,
    run_metrics,
    run_synth,
    subspace_affinity,
    synthesize,
    write_embeddings,
)
from ._mgm import run_analyze as _run_analyze


def run_analyze(config, out=None):
    """Runs the model-level analyses and returns the report as a dict."""
    return json.loads(_run_analyze(config, out))


__all__ = [
    "Error",
    "InputError",
    "Manifest",
    "Normalization",
    "NumericalError",
    "feature_names",
    "nnk_graph",
    "read_embeddings",
    "run_analyze",
    "run_graph",
    "run_metrics",
    "run_synth",
    "subspace_affinity",
    "synthesize",
    "write_embeddings",
]
