"""Randomized constructions of clique decompositions at desk scale: exact
solvers, boosters, omni-absorbers, local-lemma embeddings, nibble matchings
and spread measurements."""

from .errors import (DesignForgeError, InvalidParameter, NonTermination, NotFound,
                     PreconditionViolation, ResourceLimit, RetryExhausted, StageFailure)
from .graph import (Graph, Hypergraph, DesignHypergraph, design_hypergraph, is_kq_divisible,
                    verify_decomposition, verify_packing)

__version__ = "0.1.0"

__all__ = [
    "DesignForgeError", "InvalidParameter", "NonTermination", "NotFound", "PreconditionViolation",
    "ResourceLimit", "RetryExhausted", "StageFailure", "Graph", "Hypergraph", "DesignHypergraph",
    "design_hypergraph", "is_kq_divisible", "verify_decomposition", "verify_packing",
]
