"""Graph-pattern query subset: basic graph patterns, one OPTIONAL level,
equality filters.

Anything outside the subset (nested OPTIONAL, UNION, non-equality FILTER,
object lists with ',', numeric literals, SELECT *) raises
UnsupportedFeatureError rather than being silently misread. Optional blocks
may share variables with the required part but not with each other; each
block left-joins against the required solutions as a whole.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .terms import RDF_TYPE, Iri, Literal, TriplePattern, Var


class QueryParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnsupportedFeatureError(QueryParseError):
    pass


@dataclass(frozen=True)
class QueryAst:
    select_vars: tuple[Var, ...]
    required: tuple[TriplePattern, ...]
    optional_blocks: tuple[tuple[TriplePattern, ...], ...] = ()
    filters: tuple[tuple[Var, str], ...] = ()
    prefixes: dict[str, str] = field(default_factory=dict, compare=False, hash=False)

    def all_variables(self) -> set[Var]:
        out: set[Var] = set()
        for pattern in self.required:
            out.update(pattern.variables)
        for block in self.optional_blocks:
            for pattern in block:
                out.update(pattern.variables)
        return out

    def to_text(self) -> str:
        lines = ["SELECT " + " ".join(str(v) for v in self.select_vars), "WHERE {"]
        for pattern in self.required:
            lines.append(f"  {_term_text(pattern.subject)} {_term_text(pattern.predicate)} "
                         f"{_term_text(pattern.object)} .")
        for block in self.optional_blocks:
            lines.append("  OPTIONAL {")
            for pattern in block:
                lines.append(f"    {_term_text(pattern.subject)} {_term_text(pattern.predicate)} "
                             f"{_term_text(pattern.object)} .")
            lines.append("  }")
        for var, value in self.filters:
            lines.append(f'  FILTER ({var} = "{value}")')
        lines.append("}")
        return "\n".join(lines)


def _term_text(term: object) -> str:
    if isinstance(term, Iri):
        return "a" if term.value == RDF_TYPE else f"<{term.value}>"
    return str(term)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<iri><[^>]*>)
  | (?P<literal>"(?:[^"\\]|\\.)*")
  | (?P<var>\?\w+)
  | (?P<punct>[{}();.,=*])
  | (?P<word>[A-Za-z_][\w.\-]*:?[\w.\-/]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise QueryParseError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = match.lastgroup or ""
        value = match.group(0)
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, value, line, pos - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rfind("\n") + 1
        pos = match.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.prefixes: dict[str, str] = {}

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        token = self.tokens[self.pos]
        if token.kind != "eof":
            self.pos += 1
        return token

    def error(self, message: str, token: _Token | None = None) -> QueryParseError:
        token = token or self.peek()
        return QueryParseError(message, token.line, token.column)

    def unsupported(self, message: str, token: _Token | None = None) -> UnsupportedFeatureError:
        token = token or self.peek()
        return UnsupportedFeatureError(message, token.line, token.column)

    def expect_punct(self, char: str) -> _Token:
        token = self.next()
        if token.kind != "punct" or token.value != char:
            raise self.error(f"expected {char!r}, got {token.value!r}", token)
        return token

    def expect_keyword(self, word: str) -> _Token:
        token = self.next()
        if token.kind != "word" or token.value.upper() != word:
            raise self.error(f"expected {word}, got {token.value!r}", token)
        return token

    # --- grammar ---

    def parse(self) -> QueryAst:
        while self.peek().kind == "word" and self.peek().value.upper() == "PREFIX":
            self.next()
            name = self.next()
            if name.kind != "word" or not name.value.endswith(":"):
                raise self.error("expected prefix name ending in ':'", name)
            iri = self.next()
            if iri.kind != "iri":
                raise self.error("expected <iri> in PREFIX declaration", iri)
            self.prefixes[name.value[:-1]] = iri.value[1:-1]
        self.expect_keyword("SELECT")
        select_vars: list[Var] = []
        while self.peek().kind == "var":
            select_vars.append(Var(self.next().value[1:]))
        if not select_vars:
            if self.peek().value == "*":
                raise self.unsupported("SELECT * is not supported; list variables")
            raise self.error("SELECT needs at least one variable")
        self.expect_keyword("WHERE")
        self.expect_punct("{")
        required, optional_blocks, filters = self.group(allow_nested=True)
        self.expect_punct("}")
        if self.peek().kind != "eof":
            raise self.unsupported(
                f"unexpected trailing content {self.peek().value!r} "
                "(solution modifiers are not supported)"
            )
        ast = QueryAst(
            select_vars=tuple(select_vars),
            required=tuple(required),
            optional_blocks=tuple(optional_blocks),
            filters=tuple(filters),
            prefixes=dict(self.prefixes),
        )
        self._validate(ast)
        return ast

    def _validate(self, ast: QueryAst) -> None:
        if not ast.required:
            raise self.error("query needs at least one required pattern")
        all_vars = ast.all_variables()
        for var in ast.select_vars:
            if var not in all_vars:
                raise self.error(f"selected variable {var} not used in any pattern")
        required_vars = {v for p in ast.required for v in p.variables}
        for var, _ in ast.filters:
            if var not in required_vars:
                raise self.unsupported(
                    f"FILTER on {var} outside the required patterns"
                )
        seen: set[Var] = set()
        for block in ast.optional_blocks:
            block_vars = {v for p in block for v in p.variables} - required_vars
            if block_vars & seen:
                raise self.unsupported(
                    "optional blocks sharing variables with each other"
                )
            seen |= block_vars

    def group(self, allow_nested: bool) -> tuple[
        list[TriplePattern], list[tuple[TriplePattern, ...]], list[tuple[Var, str]]
    ]:
        patterns: list[TriplePattern] = []
        optional_blocks: list[tuple[TriplePattern, ...]] = []
        filters: list[tuple[Var, str]] = []
        while True:
            token = self.peek()
            if token.kind == "punct" and token.value == "}":
                return patterns, optional_blocks, filters
            if token.kind == "eof":
                raise self.error("unexpected end of query inside group")
            if token.kind == "word" and token.value.upper() == "OPTIONAL":
                if not allow_nested:
                    raise self.unsupported("nested OPTIONAL blocks")
                self.next()
                self.expect_punct("{")
                inner, nested, inner_filters = self.group(allow_nested=False)
                if nested or inner_filters:
                    raise self.unsupported("only plain patterns inside OPTIONAL")
                if not inner:
                    raise self.error("empty OPTIONAL block")
                self.expect_punct("}")
                optional_blocks.append(tuple(inner))
                continue
            if token.kind == "word" and token.value.upper() == "FILTER":
                self.next()
                filters.append(self.filter_body())
                continue
            if token.kind == "word" and token.value.upper() in (
                "UNION", "GRAPH", "MINUS", "BIND", "VALUES", "SERVICE",
            ):
                raise self.unsupported(f"{token.value.upper()} is not supported")
            patterns.extend(self.triple_block())

    def filter_body(self) -> tuple[Var, str]:
        if self.peek().kind == "word":
            raise self.unsupported(
                f"FILTER function {self.peek().value!r}; only equality "
                '(?var = "literal") is supported'
            )
        self.expect_punct("(")
        left = self.next()
        if left.kind == "word":
            raise self.unsupported(
                f"FILTER function {left.value!r}; only equality (?var = \"literal\") "
                "is supported", left
            )
        if left.kind != "var":
            raise self.error("FILTER expects a variable on the left", left)
        op = self.next()
        if op.value != "=":
            raise self.unsupported(
                f"FILTER operator {op.value!r}; only '=' is supported", op
            )
        value = self.next()
        if value.kind != "literal":
            raise self.unsupported("FILTER compares against a string literal only", value)
        self.expect_punct(")")
        return (Var(left.value[1:]), _unescape(value.value))

    def triple_block(self) -> list[TriplePattern]:
        subject = self.term(position="subject")
        patterns: list[TriplePattern] = []
        while True:
            predicate = self.term(position="predicate")
            obj = self.term(position="object")
            patterns.append(TriplePattern(subject, predicate, obj))
            token = self.peek()
            if token.kind == "punct" and token.value == ";":
                self.next()
                if self.peek().kind == "punct" and self.peek().value in ".}":
                    break
                continue
            if token.kind == "punct" and token.value == ",":
                raise self.unsupported("object lists with ',' are not supported", token)
            break
        if self.peek().kind == "punct" and self.peek().value == ".":
            self.next()
        return patterns

    def term(self, position: str):
        token = self.next()
        if token.kind == "var":
            if position == "predicate":
                raise self.unsupported(
                    "variable predicates are outside the supported subset", token
                )
            return Var(token.value[1:])
        if token.kind == "iri":
            return Iri(token.value[1:-1])
        if token.kind == "literal":
            if position != "object":
                raise self.error(f"literal not allowed in {position} position", token)
            return Literal(_unescape(token.value))
        if token.kind == "word":
            if token.value == "a":
                if position != "predicate":
                    raise self.error("'a' is only valid as a predicate", token)
                return Iri(RDF_TYPE)
            if ":" in token.value:
                prefix, local = token.value.split(":", 1)
                if prefix not in self.prefixes:
                    raise self.error(f"unknown prefix {prefix!r}", token)
                return Iri(self.prefixes[prefix] + local)
        if token.kind == "punct" and token.value in "0123456789":
            raise self.unsupported("numeric literals are not supported", token)
        raise self.error(f"expected a term, got {token.value!r}", token)


def _unescape(quoted: str) -> str:
    body = quoted[1:-1]
    return body.replace('\\"', '"').replace("\\\\", "\\")


def parse_query(text: str) -> QueryAst:
    return _Parser(text).parse()
