"""Shared domain types: component and qualification records, match results, rule tables.

All types here are immutable value objects. Manufacturer names are kept
exactly as entered; normalization is a read-time lookup through a
:class:`RuleTable` and never rewrites stored data.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation


class ValidationError(ValueError):
    """Raised when a record or config violates a declared invariant."""


class Status(str, enum.Enum):
    CLOSED = "Closed"
    ONGOING = "Ongoing"
    FAILED = "Failed"
    OBSOLETE = "Obsolete"


class MatchType(str, enum.Enum):
    DIRECT = "Direct"
    SIMILARITY = "Similarity"
    ALTERNATIVE = "Alternative"


class CascadeStage(str, enum.Enum):
    DIRECT_FOUND = "DirectFound"
    SIMILARITY_FOUND = "SimilarityFound"
    ALTERNATIVE_PROPOSED = "AlternativeProposed"
    NONE_FOUND = "NoneFound"


class RuleState(str, enum.Enum):
    PROPOSED = "Proposed"
    ACCEPTED = "Accepted"
    EDITED = "Edited"
    REJECTED = "Rejected"


def parse_decimal(text: str, field_name: str = "value") -> Decimal:
    """Parse a fixed-point decimal, rejecting NaN/Inf and garbage."""
    try:
        value = Decimal(text.strip())
    except InvalidOperation as exc:
        raise ValidationError(f"{field_name}: not a decimal: {text!r}") from exc
    if not value.is_finite():
        raise ValidationError(f"{field_name}: not finite: {text!r}")
    return value


def format_decimal(value: Decimal) -> str:
    """Render with minimal digits: no exponent, no trailing fractional zeros."""
    text = format(value, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("", "-"):
        text = "0"
    return text


@dataclass(frozen=True)
class PlmComponent:
    """One row of the product-lifecycle database.

    The quadruple (part_number, package_code, subpackage_code,
    manufacturer_name) identifies a row; manufacturer_name is raw, as
    entered.
    """

    part_number: str
    package_code: str
    subpackage_code: str
    manufacturer_name: str
    family: str
    pitch: Decimal
    pin_dimension: Decimal
    lead_finish: str | None = None
    raw_material: str | None = None
    package_length: Decimal | None = None
    package_width: Decimal | None = None
    package_height: Decimal | None = None
    assembly_type: str | None = None
    generic_pn: str | None = None

    def __post_init__(self) -> None:
        if not self.part_number:
            raise ValidationError("part_number: must be nonempty")
        if self.pitch is not None and self.pitch <= 0:
            raise ValidationError(f"pitch: must be > 0, got {self.pitch}")
        if self.pin_dimension is not None and self.pin_dimension <= 0:
            raise ValidationError(f"pin_dimension: must be > 0, got {self.pin_dimension}")

    @property
    def identity(self) -> tuple[str, str, str, str]:
        return (
            self.part_number,
            self.package_code,
            self.subpackage_code,
            self.manufacturer_name,
        )


@dataclass(frozen=True)
class QualificationCard:
    """One qualification record; part_number is absent until cleaning extracts it."""

    number: str
    package_code: str
    subpackage_code: str
    manufacturer_name: str
    status: Status
    notes: str
    part_number: str | None = None
    qualification_type: str | None = None
    description: str | None = None
    documentation: str | None = None
    conformal_coating: str | None = None
    substrate_material: str | None = None
    assembly_type: str | None = None
    pitch: Decimal | None = None
    pin_dimension: Decimal | None = None
    family: str | None = None

    def __post_init__(self) -> None:
        if not self.number:
            raise ValidationError("number: must be nonempty")
        if not isinstance(self.status, Status):
            raise ValidationError(f"status: invalid value {self.status!r}")

    def with_part_number(self, pn: str) -> "QualificationCard":
        return dataclasses.replace(self, part_number=pn)


@dataclass(frozen=True)
class QualMatch:
    """A qualification card matched to a component; score is cosine similarity
    and is present exactly for Alternative matches."""

    qualification: QualificationCard
    match_type: MatchType
    score: float | None = None

    def __post_init__(self) -> None:
        if (self.score is not None) != (self.match_type is MatchType.ALTERNATIVE):
            raise ValidationError(
                "score: present iff match_type is Alternative"
            )
        if self.score is not None and not -1.0 - 1e-9 <= self.score <= 1.0 + 1e-9:
            raise ValidationError(f"score: out of [-1, 1]: {self.score}")


@dataclass(frozen=True)
class QualificationReport:
    """Cascade output for one component.

    Alternative candidates only appear when direct and similarity are both
    empty, and are sorted by score descending with ties broken by
    qualification number.
    """

    component: PlmComponent
    direct: tuple[QualMatch, ...]
    similarity: tuple[QualMatch, ...]
    alternative: tuple[QualMatch, ...]
    cascade_stage: CascadeStage

    def __post_init__(self) -> None:
        if self.alternative and (self.direct or self.similarity):
            raise ValidationError(
                "alternative nonempty requires direct and similarity empty"
            )
        scores = [
            (-(m.score or 0.0), m.qualification.number) for m in self.alternative
        ]
        if scores != sorted(scores):
            raise ValidationError("alternative not sorted by (score desc, number asc)")


@dataclass(frozen=True)
class NormalizationRule:
    """Variant manufacturer names mapped to one canonical name, with review state."""

    id: int
    variants: frozenset[str]
    canonical: str
    state: RuleState = RuleState.PROPOSED
    editor_note: str | None = None

    def __post_init__(self) -> None:
        if not self.variants:
            raise ValidationError(f"rule {self.id}: needs at least one variant")
        if not self.canonical:
            raise ValidationError(f"rule {self.id}: canonical must be nonempty")


class RuleTable:
    """Immutable raw-name -> canonical-name lookup.

    Canonical names map to themselves unless an explicit row overrides them,
    which keeps :func:`canonical_manufacturer` idempotent.
    """

    def __init__(self, rows: dict[str, str] | None = None):
        mapping = dict(rows or {})
        for raw, canonical in mapping.items():
            target = mapping.get(canonical, canonical)
            if target != canonical:
                raise ValidationError(
                    f"rule table not idempotent: {raw!r} -> {canonical!r} -> {target!r}"
                )
        self._rows = mapping

    @property
    def rows(self) -> dict[str, str]:
        return dict(self._rows)

    def __len__(self) -> int:
        return len(self._rows)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RuleTable) and self._rows == other._rows

    def lookup(self, raw: str) -> str:
        key = raw.strip()
        return self._rows.get(key, key)


def canonical_manufacturer(raw: str, rules: RuleTable) -> str:
    """Canonical name when a rule maps `raw` (matched after trimming), else `raw` unchanged."""
    canonical = rules.lookup(raw)
    if canonical == raw.strip():
        return raw
    return canonical


@dataclass(frozen=True)
class GroundTruthMatches:
    direct: frozenset[str] = field(default_factory=frozenset)
    similarity: frozenset[str] = field(default_factory=frozenset)
    alternative: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.direct & self.similarity:
            raise ValidationError("direct and similarity labels must be disjoint")

    @property
    def any(self) -> frozenset[str]:
        return self.direct | self.similarity | self.alternative


@dataclass(frozen=True)
class GroundTruth:
    """Generated labels: per-component match sets, cleaning rules, per-card true PN."""

    matches: dict[str, GroundTruthMatches]
    rules: RuleTable
    pn_by_qual: dict[str, str | None]
