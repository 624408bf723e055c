"""Probabilistic theory revision for propositional domain theories."""

from .theory import (
    Clause,
    DomainTheory,
    Example,
    Exemplar,
    Literal,
    TheoryError,
    classify,
    parse_exemplars,
    parse_theory,
    serialize_theory,
)
from .dtgraph import (
    EdgeKind,
    GraphError,
    Parity,
    WeightedDtGraph,
    build_dtgraph,
    delete_edge,
    edge_parity,
    enumerate_subgraphs,
    set_weight,
    suture,
    to_theory,
)
from .flow import bottom_up, process_exemplar, top_down
from .weights import apply_bias, default_weights, radicality, semantic_impact
from .revision import dnf_id3, r_value, relevance_sets, revise
from .control import PtrConfig, PtrOutcome, Termination, consistency_check, ptr, ptrstar

__version__ = "0.1.0"

__all__ = [
    "Clause", "DomainTheory", "Example", "Exemplar", "Literal", "TheoryError",
    "classify", "parse_exemplars", "parse_theory", "serialize_theory",
    "EdgeKind", "GraphError", "Parity", "WeightedDtGraph", "build_dtgraph",
    "delete_edge", "edge_parity", "enumerate_subgraphs", "set_weight",
    "suture", "to_theory",
    "bottom_up", "process_exemplar", "top_down",
    "apply_bias", "default_weights", "radicality", "semantic_impact",
    "dnf_id3", "r_value", "relevance_sets", "revise",
    "PtrConfig", "PtrOutcome", "Termination", "consistency_check", "ptr", "ptrstar",
]
