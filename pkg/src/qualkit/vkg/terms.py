"""Term model shared by the mapping language, the query language, and plans.

IRI templates substitute percent-encoded column values, so distinct literal
skeletons produce disjoint IRI ranges and a template can be matched back
against a constant IRI unambiguously.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from urllib.parse import quote, unquote

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class Iri:
    value: str

    def __str__(self) -> str:
        return f"<{self.value}>"


@dataclass(frozen=True)
class Literal:
    value: str

    def __str__(self) -> str:
        return '"' + self.value + '"'


@dataclass(frozen=True)
class Placeholder:
    column: str


@dataclass(frozen=True)
class Template:
    """IRI or literal skeleton with {column} placeholders.

    Adjacent placeholders without separating text are rejected: they would
    make constant matching ambiguous.
    """

    kind: str  # "iri" | "literal"
    parts: tuple[str | Placeholder, ...]

    def __post_init__(self) -> None:
        previous_placeholder = False
        for part in self.parts:
            if isinstance(part, Placeholder):
                if previous_placeholder:
                    raise ValueError("adjacent placeholders are ambiguous")
                previous_placeholder = True
            else:
                previous_placeholder = False

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(p.column for p in self.parts if isinstance(p, Placeholder))

    @property
    def skeleton(self) -> tuple[object, ...]:
        """Structure with placeholder names erased; equal skeletons unify."""
        return tuple(
            part if isinstance(part, str) else Placeholder("") for part in self.parts
        ) + (self.kind,)

    def expand(self, values: dict[str, str]) -> str:
        chunks = []
        for part in self.parts:
            if isinstance(part, Placeholder):
                value = values[part.column]
                chunks.append(quote(value, safe="") if self.kind == "iri" else value)
            else:
                chunks.append(part)
        return "".join(chunks)

    def match(self, value: str) -> dict[str, str] | None:
        """Invert expand(): column values when `value` fits the skeleton."""
        pattern_chunks = ["^"]
        for part in self.parts:
            if isinstance(part, Placeholder):
                charset = r"[A-Za-z0-9._~%\-]*" if self.kind == "iri" else r".*?"
                pattern_chunks.append(f"({charset})")
            else:
                pattern_chunks.append(re.escape(part))
        pattern_chunks.append("$")
        match = re.match("".join(pattern_chunks), value, re.DOTALL)
        if not match:
            return None
        out: dict[str, str] = {}
        for placeholder, raw in zip(
            (p for p in self.parts if isinstance(p, Placeholder)), match.groups()
        ):
            decoded = unquote(raw) if self.kind == "iri" else raw
            if placeholder.column in out and out[placeholder.column] != decoded:
                return None
            out[placeholder.column] = decoded
        return out

    def __str__(self) -> str:
        body = "".join(
            "{" + part.column + "}" if isinstance(part, Placeholder) else part
            for part in self.parts
        )
        if self.kind == "iri":
            return f"<{body}>"
        return '"' + body + '"'


def parse_template_body(body: str, kind: str) -> Template | Iri | Literal:
    """Split `a{b}c` bodies into parts; no placeholder means a constant."""
    parts: list[str | Placeholder] = []
    rest = body
    while rest:
        start = rest.find("{")
        if start < 0:
            parts.append(rest)
            break
        end = rest.find("}", start)
        if end < 0:
            raise ValueError(f"unterminated placeholder in {body!r}")
        if start > 0:
            parts.append(rest[:start])
        column = rest[start + 1:end]
        if not re.fullmatch(r"\w+", column):
            raise ValueError(f"bad placeholder name {column!r}")
        parts.append(Placeholder(column))
        rest = rest[end + 1:]
    if not any(isinstance(p, Placeholder) for p in parts):
        return Iri(body) if kind == "iri" else Literal(body)
    return Template(kind, tuple(parts))


Subject = Iri | Template | Var
Predicate = Iri | Var
Object = Iri | Literal | Template | Var


@dataclass(frozen=True)
class TriplePattern:
    subject: Subject
    predicate: Predicate
    object: Object

    @property
    def variables(self) -> tuple[Var, ...]:
        return tuple(
            t for t in (self.subject, self.predicate, self.object) if isinstance(t, Var)
        )
