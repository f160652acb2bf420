"""Mapping language: triple templates over relational source queries.

Block grammar::

    @prefix tasi: <http://tasi.com#> .

    mappingId Some_Name
    target :q_{number} tasi:manufacturerName {canonical_manufacturer_name} .
    source SELECT number, canonical_manufacturer_name
           FROM lenses.qualification_manufacturer

A target is one subject with a ``;``-separated predicate-object list ending
in ``.``; ``a`` abbreviates rdf:type. Placeholders in the target must be
projected by the source query. Sources are the conjunctive subset: column
list, one table or lens, optional equality predicates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .terms import (
    RDF_TYPE,
    Iri,
    Literal,
    Placeholder,
    Template,
    parse_template_body,
)


class MappingParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class SourceQuery:
    table: str
    columns: tuple[str, ...]
    where: tuple[tuple[str, str], ...] = ()

    def to_sql(self) -> str:
        text = f"SELECT {', '.join(self.columns)} FROM {self.table}"
        if self.where:
            conditions = " AND ".join(f"{c} = '{v}'" for c, v in self.where)
            text += f" WHERE {conditions}"
        return text


@dataclass(frozen=True)
class TargetTriple:
    subject: Iri | Template
    predicate: Iri
    object: Iri | Literal | Template

    def placeholder_columns(self) -> tuple[str, ...]:
        columns: list[str] = []
        for term in (self.subject, self.predicate, self.object):
            if isinstance(term, Template):
                columns.extend(term.columns)
        return tuple(columns)


@dataclass(frozen=True)
class MappingAssertion:
    mapping_id: str
    target: tuple[TargetTriple, ...]
    source: SourceQuery


@dataclass
class MappingSet:
    prefixes: dict[str, str] = field(default_factory=dict)
    assertions: list[MappingAssertion] = field(default_factory=list)

    def to_text(self) -> str:
        lines = []
        for prefix in sorted(self.prefixes):
            lines.append(f"@prefix {prefix}: <{self.prefixes[prefix]}> .")
        if self.prefixes:
            lines.append("")
        for assertion in self.assertions:
            lines.append(f"mappingId {assertion.mapping_id}")
            chunks = []
            for i, triple in enumerate(assertion.target):
                lead = "target " if i == 0 else "  "
                sep = " ;" if i + 1 < len(assertion.target) else " ."
                if i > 0:
                    chunks.append(
                        f"  {triple.predicate} {triple.object}{sep}"
                    )
                else:
                    chunks.append(
                        f"{lead}{triple.subject} {triple.predicate} {triple.object}{sep}"
                    )
            lines.extend(chunks)
            lines.append(f"source {assertion.source.to_sql()}")
            lines.append("")
        return "\n".join(lines)


_PREFIX_RE = re.compile(r"@prefix\s+(\w*):\s*<([^>]*)>\s*\.\s*$")
_SOURCE_RE = re.compile(
    r"SELECT\s+(?P<cols>.+?)\s+FROM\s+(?P<table>[\w.]+)"
    r"(?:\s+WHERE\s+(?P<where>.+))?\s*$",
    re.IGNORECASE | re.DOTALL,
)
_WHERE_RE = re.compile(r"([\w.]+)\s*=\s*'([^']*)'")


class _TargetScanner:
    def __init__(self, text: str, line: int, prefixes: dict[str, str]):
        self.text = text
        self.pos = 0
        self.line = line
        self.prefixes = prefixes

    def error(self, message: str) -> MappingParseError:
        return MappingParseError(message, self.line, self.pos + 1)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take_punct(self, char: str) -> bool:
        if self.peek() == char:
            self.pos += 1
            return True
        return False

    def _until(self, closing: str, start_desc: str) -> str:
        end = self.text.find(closing, self.pos)
        if end < 0:
            raise self.error(f"unterminated {start_desc}")
        body = self.text[self.pos:end]
        self.pos = end + 1
        return body

    def term(self) -> Iri | Literal | Template:
        self.skip_ws()
        if self.pos >= len(self.text):
            raise self.error("expected term")
        char = self.text[self.pos]
        if char == "<":
            self.pos += 1
            return self._wrap(self._until(">", "IRI"), "iri")
        if char == '"':
            self.pos += 1
            return self._wrap(self._until('"', "string literal"), "literal")
        if char == "{":
            self.pos += 1
            column = self._until("}", "placeholder")
            return self._wrap("{" + column + "}", "literal")
        match = re.match(r"[^\s;]+", self.text[self.pos:])
        if not match:
            raise self.error(f"unexpected character {char!r}")
        word = match.group(0)
        self.pos += len(word)
        if word == "a":
            return Iri(RDF_TYPE)
        if ":" not in word:
            raise self.error(f"expected IRI, literal, or 'a', got {word!r}")
        prefix, local = word.split(":", 1)
        if prefix not in self.prefixes:
            raise self.error(f"unknown prefix {prefix!r}")
        return self._wrap(self.prefixes[prefix] + local, "iri")

    def _wrap(self, body: str, kind: str) -> Iri | Literal | Template:
        try:
            return parse_template_body(body, kind)
        except ValueError as exc:
            raise self.error(str(exc)) from exc


def _parse_target(text: str, line: int, prefixes: dict[str, str]) -> tuple[TargetTriple, ...]:
    stripped = text.rstrip()
    if not stripped.endswith("."):
        raise MappingParseError("target must end with '.'", line, len(text))
    scanner = _TargetScanner(stripped[:-1], line, prefixes)
    subject = scanner.term()
    if isinstance(subject, Literal) or (
        isinstance(subject, Template) and subject.kind == "literal"
    ):
        raise MappingParseError("subject must be an IRI or IRI template", line)
    triples: list[TargetTriple] = []
    while True:
        predicate = scanner.term()
        if not isinstance(predicate, Iri):
            raise MappingParseError("predicate must be a constant IRI", line)
        obj = scanner.term()
        triples.append(TargetTriple(subject=subject, predicate=predicate, object=obj))
        if scanner.take_punct(";"):
            continue
        if scanner.at_end():
            return tuple(triples)
        raise MappingParseError("expected ';' or end of target", line, scanner.pos + 1)


def _parse_source(text: str, line: int) -> SourceQuery:
    match = _SOURCE_RE.match(text.strip())
    if not match:
        raise MappingParseError(
            "source must be SELECT cols FROM table [WHERE col = 'v' ...]", line
        )
    columns = tuple(c.strip() for c in match.group("cols").split(","))
    if any(not re.fullmatch(r"\w+", c) for c in columns):
        raise MappingParseError(f"bad column list {match.group('cols')!r}", line)
    where: tuple[tuple[str, str], ...] = ()
    if match.group("where"):
        clause = match.group("where").strip()
        parts = re.split(r"\s+AND\s+", clause, flags=re.IGNORECASE)
        pairs = []
        for part in parts:
            cond = _WHERE_RE.fullmatch(part.strip())
            if not cond:
                raise MappingParseError(f"unsupported WHERE condition {part!r}", line)
            pairs.append((cond.group(1), cond.group(2)))
        where = tuple(pairs)
    return SourceQuery(table=match.group("table"), columns=columns, where=where)


def parse_mappings(text: str) -> MappingSet:
    prefixes: dict[str, str] = {}
    assertions: list[MappingAssertion] = []
    lines = text.splitlines()
    i = 0

    def skip_blank() -> None:
        nonlocal i
        while i < len(lines) and not lines[i].strip():
            i += 1

    while True:
        skip_blank()
        if i >= len(lines):
            break
        line = lines[i].strip()
        if line.startswith("@prefix"):
            match = _PREFIX_RE.match(line)
            if not match:
                raise MappingParseError("malformed @prefix line", i + 1)
            prefixes[match.group(1)] = match.group(2)
            i += 1
            continue
        if not line.startswith("mappingId"):
            raise MappingParseError(
                f"expected '@prefix' or 'mappingId', got {line.split()[0]!r}", i + 1
            )
        mapping_id = line[len("mappingId"):].strip()
        if not mapping_id:
            raise MappingParseError("mappingId needs a name", i + 1)
        i += 1
        skip_blank()
        if i >= len(lines) or not lines[i].strip().startswith("target"):
            raise MappingParseError("expected 'target' after mappingId", i + 1)
        target_line = i + 1
        target_text = lines[i].strip()[len("target"):]
        while not target_text.rstrip().endswith(".") and i + 1 < len(lines):
            i += 1
            target_text += " " + lines[i].strip()
        i += 1
        if i >= len(lines) or not lines[i].strip().lower().startswith("source"):
            raise MappingParseError("expected 'source' after target", i + 1)
        source_line = i + 1
        source_text = lines[i].strip()[len("source"):]
        i += 1
        while i < len(lines) and lines[i].strip() and not lines[i].strip().startswith("mappingId"):
            source_text += " " + lines[i].strip()
            i += 1
        target = _parse_target(target_text, target_line, prefixes)
        source = _parse_source(source_text, source_line)
        assertion = MappingAssertion(mapping_id=mapping_id, target=target, source=source)
        _validate_assertion(assertion, target_line)
        assertions.append(assertion)
    return MappingSet(prefixes=prefixes, assertions=assertions)


def _validate_assertion(assertion: MappingAssertion, line: int) -> None:
    available = set(assertion.source.columns)
    for triple in assertion.target:
        for column in triple.placeholder_columns():
            if column not in available:
                raise MappingParseError(
                    f"placeholder {{{column}}} not projected by the source query",
                    line,
                )
