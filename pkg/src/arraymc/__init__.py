"""Symbolic safety checking of array-based transition systems.

The main entry points are :func:`parse_spec` / :func:`load_spec` for the
input language, :func:`breach` for backward reachability,
:func:`breach_plus_inv` and :func:`sinv` for invariant synthesis, and the
:mod:`arraymc.oracle` module for brute-force checks on small models.
"""

from __future__ import annotations

from .errors import (
    ArrayMCError,
    ConfigError,
    FunctionalFormError,
    InternalError,
    PartitionError,
    SpecError,
    UnsupportedOperation,
)
from .invariants import (
    Candidate,
    VerifiedInvariant,
    breach_plus_inv,
    choose,
    index_abstraction,
    min_formula,
    signature_abstraction,
    sinv,
    verify_candidate,
)
from .parser import format_spec, load_spec, parse_spec
from .reachability import ReachResult, Trace, breach, preimage, preimage_cubes
from .smt import Engine, ExistsForallSentence
from .system import SystemSpec

__all__ = [
    "ArrayMCError",
    "Candidate",
    "ConfigError",
    "Engine",
    "ExistsForallSentence",
    "FunctionalFormError",
    "InternalError",
    "PartitionError",
    "ReachResult",
    "SpecError",
    "SystemSpec",
    "Trace",
    "UnsupportedOperation",
    "VerifiedInvariant",
    "breach",
    "breach_plus_inv",
    "choose",
    "format_spec",
    "index_abstraction",
    "load_spec",
    "min_formula",
    "parse_spec",
    "preimage",
    "preimage_cubes",
    "signature_abstraction",
    "sinv",
    "verify_candidate",
]
