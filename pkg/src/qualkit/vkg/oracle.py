"""Independent correctness oracle: instantiate every mapping over every
source row into a triple bag, then answer queries by brute-force pattern
matching with backtracking.

This path shares no code with unfolding or plan evaluation; agreement
between the two on arbitrary queries and stores is the engine's central
correctness check. Triples form a bag (no deduplication), mirroring the
evaluator's bag semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

from .mapping import MappingSet
from .plan import ResultTable
from .query import QueryAst
from .store import TableStore
from .terms import Iri, Literal, Template, TriplePattern, Var


@dataclass(frozen=True)
class Triple:
    subject: tuple[str, str]  # (kind, value) with kind "iri" | "lit"
    predicate: str
    object: tuple[str, str]


def _instantiate(term, row) -> tuple[str, str] | None:
    if isinstance(term, Iri):
        return ("iri", term.value)
    if isinstance(term, Literal):
        return ("lit", term.value)
    assert isinstance(term, Template)
    values = {}
    for column in term.columns:
        cell = row.get(column)
        if cell is None:
            return None
        values[column] = cell
    kind = "iri" if term.kind == "iri" else "lit"
    return (kind, term.expand(values))


def materialize_triples(mappings: MappingSet, store: TableStore) -> list[Triple]:
    triples: list[Triple] = []
    for assertion in mappings.assertions:
        source = assertion.source
        rows = store.scan(source.table, dict(source.where) if source.where else None)
        for row in rows:
            for target in assertion.target:
                subject = _instantiate(target.subject, row)
                obj = _instantiate(target.object, row)
                if subject is None or obj is None:
                    continue
                triples.append(Triple(subject, target.predicate.value, obj))
    return triples


def _pattern_term(term) -> tuple[str, str] | None:
    """Constant pattern terms as (kind, value); None for variables."""
    if isinstance(term, Iri):
        return ("iri", term.value)
    if isinstance(term, Literal):
        return ("lit", term.value)
    return None


def _match_triple(
    pattern: TriplePattern, triple: Triple, binding: dict[Var, tuple[str, str]]
) -> dict[Var, tuple[str, str]] | None:
    if triple.predicate != pattern.predicate.value:  # type: ignore[union-attr]
        return None
    extension = dict(binding)
    for term, value in ((pattern.subject, triple.subject), (pattern.object, triple.object)):
        if isinstance(term, Var):
            bound = extension.get(term)
            if bound is None:
                extension[term] = value
            elif bound != value:
                return None
        else:
            constant = _pattern_term(term)
            if constant != value:
                return None
    return extension


class _TripleIndex:
    """Bag-preserving lookup by predicate, optionally narrowed by a bound
    subject or object; purely a speedup, the per-triple matching is unchanged."""

    def __init__(self, triples: list[Triple]):
        self.by_predicate: dict[str, list[Triple]] = {}
        self.by_subject: dict[tuple[str, tuple[str, str]], list[Triple]] = {}
        self.by_object: dict[tuple[str, tuple[str, str]], list[Triple]] = {}
        for triple in triples:
            self.by_predicate.setdefault(triple.predicate, []).append(triple)
            self.by_subject.setdefault(
                (triple.predicate, triple.subject), []
            ).append(triple)
            self.by_object.setdefault(
                (triple.predicate, triple.object), []
            ).append(triple)

    def candidates(
        self, pattern: TriplePattern, binding: dict[Var, tuple[str, str]]
    ) -> list[Triple]:
        predicate = pattern.predicate.value  # type: ignore[union-attr]
        for term, index in (
            (pattern.subject, self.by_subject),
            (pattern.object, self.by_object),
        ):
            value = None
            if isinstance(term, Var):
                value = binding.get(term)
            else:
                value = _pattern_term(term)
            if value is not None:
                return index.get((predicate, value), [])
        return self.by_predicate.get(predicate, [])


def _solutions(
    patterns: list[TriplePattern],
    index: _TripleIndex,
    binding: dict[Var, tuple[str, str]],
) -> list[dict[Var, tuple[str, str]]]:
    if not patterns:
        return [binding]
    # Fewest-candidates-first keeps the search narrow without affecting the bag.
    candidate_lists = [index.candidates(p, binding) for p in patterns]
    best = min(range(len(patterns)), key=lambda i: len(candidate_lists[i]))
    pattern = patterns[best]
    rest = patterns[:best] + patterns[best + 1:]
    out = []
    for triple in candidate_lists[best]:
        extended = _match_triple(pattern, triple, binding)
        if extended is not None:
            out.extend(_solutions(rest, index, extended))
    return out


def naive_match(query: QueryAst, triples: list[Triple]) -> ResultTable:
    index = _TripleIndex(triples)

    solutions = _solutions(list(query.required), index, {})
    for var, value in query.filters:
        solutions = [
            s for s in solutions if s.get(var) == ("lit", value)
        ]
    for block in query.optional_blocks:
        extended: list[dict[Var, tuple[str, str]]] = []
        for solution in solutions:
            attempts = _solutions(list(block), index, dict(solution))
            if attempts:
                extended.extend(attempts)
            else:
                extended.append(solution)
        solutions = extended

    columns = [v.name for v in query.select_vars]
    rows = []
    for solution in solutions:
        row = []
        for var in query.select_vars:
            value = solution.get(var)
            row.append(value[1] if value is not None else None)
        rows.append(tuple(row))
    rows.sort(key=lambda r: tuple((v is None, v if v is not None else "") for v in r))
    return ResultTable(columns=columns, rows=rows)
