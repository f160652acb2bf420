"""Minimal ontology-based data access engine: mapping language, graph-pattern
query subset, lens views, query unfolding into relational plans, an in-memory
evaluator, and a materialization oracle for equivalence testing."""

from .mapping import (
    MappingAssertion,
    MappingParseError,
    MappingSet,
    SourceQuery,
    TargetTriple,
    parse_mappings,
)
from .oracle import Triple, materialize_triples, naive_match
from .plan import ResultTable, evaluate
from .query import QueryAst, QueryParseError, UnsupportedFeatureError, parse_query
from .store import LensDef, StoreError, Table, TableStore
from .terms import Iri, Literal, Placeholder, Template, TriplePattern, Var
from .unfold import UnfoldResult, unfold

__all__ = [
    "Iri",
    "LensDef",
    "Literal",
    "MappingAssertion",
    "MappingParseError",
    "MappingSet",
    "Placeholder",
    "QueryAst",
    "QueryParseError",
    "ResultTable",
    "SourceQuery",
    "StoreError",
    "Table",
    "TableStore",
    "TargetTriple",
    "Template",
    "Triple",
    "TriplePattern",
    "UnfoldResult",
    "UnsupportedFeatureError",
    "Var",
    "evaluate",
    "materialize_triples",
    "naive_match",
    "parse_mappings",
    "parse_query",
    "unfold",
]
