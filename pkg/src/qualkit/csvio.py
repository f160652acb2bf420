"""CSV schemas for the two databases and the cleaning-rule table.

All files are UTF-8, comma-separated, RFC-4180 quoted, with a header row.
Absent optional values are empty cells, never empty strings: an optional
string field round-trips to None when the cell is empty.
"""

from __future__ import annotations

import csv
import io
from decimal import Decimal
from pathlib import Path
from typing import Iterable

from .model import (
    PlmComponent,
    QualificationCard,
    RuleTable,
    Status,
    ValidationError,
    format_decimal,
    parse_decimal,
)

PLM_HEADER = [
    "part_number",
    "package",
    "subpackage_code",
    "manufacturer_name",
    "family",
    "pitch",
    "pin_dimension_um",
    "lead_finish",
    "raw_material",
    "package_length_mm",
    "package_width_mm",
    "package_height_mm",
    "assembly_type",
    "generic_pn",
]

QC_HEADER = [
    "number",
    "package",
    "subpackage_code",
    "manufacturer_name",
    "status",
    "qualification_type",
    "description",
    "documentation",
    "conformal_coating",
    "substrate_material",
    "assembly_type",
    "pitch",
    "pin_dimension_um",
    "family",
    "notes",
    "part_number",
]

RULES_HEADER = ["raw_name", "canonical_name"]


def _opt(value: str | None) -> str:
    return "" if value is None else value


def _opt_dec(value: Decimal | None) -> str:
    return "" if value is None else format_decimal(value)


def _cell(value: str) -> str | None:
    return value if value != "" else None


def _cell_dec(value: str, field_name: str) -> Decimal | None:
    return parse_decimal(value, field_name) if value != "" else None


def component_to_row(c: PlmComponent) -> list[str]:
    return [
        c.part_number,
        c.package_code,
        c.subpackage_code,
        c.manufacturer_name,
        c.family,
        format_decimal(c.pitch),
        format_decimal(c.pin_dimension),
        _opt(c.lead_finish),
        _opt(c.raw_material),
        _opt_dec(c.package_length),
        _opt_dec(c.package_width),
        _opt_dec(c.package_height),
        _opt(c.assembly_type),
        _opt(c.generic_pn),
    ]


def component_from_row(row: dict[str, str]) -> PlmComponent:
    return PlmComponent(
        part_number=row["part_number"],
        package_code=row["package"],
        subpackage_code=row["subpackage_code"],
        manufacturer_name=row["manufacturer_name"],
        family=row["family"],
        pitch=parse_decimal(row["pitch"], "pitch"),
        pin_dimension=parse_decimal(row["pin_dimension_um"], "pin_dimension_um"),
        lead_finish=_cell(row["lead_finish"]),
        raw_material=_cell(row["raw_material"]),
        package_length=_cell_dec(row["package_length_mm"], "package_length_mm"),
        package_width=_cell_dec(row["package_width_mm"], "package_width_mm"),
        package_height=_cell_dec(row["package_height_mm"], "package_height_mm"),
        assembly_type=_cell(row["assembly_type"]),
        generic_pn=_cell(row["generic_pn"]),
    )


def card_to_row(q: QualificationCard) -> list[str]:
    return [
        q.number,
        q.package_code,
        q.subpackage_code,
        q.manufacturer_name,
        q.status.value,
        _opt(q.qualification_type),
        _opt(q.description),
        _opt(q.documentation),
        _opt(q.conformal_coating),
        _opt(q.substrate_material),
        _opt(q.assembly_type),
        _opt_dec(q.pitch),
        _opt_dec(q.pin_dimension),
        _opt(q.family),
        q.notes,
        _opt(q.part_number),
    ]


def card_from_row(row: dict[str, str]) -> QualificationCard:
    try:
        status = Status(row["status"])
    except ValueError as exc:
        raise ValidationError(f"status: unknown value {row['status']!r}") from exc
    return QualificationCard(
        number=row["number"],
        package_code=row["package"],
        subpackage_code=row["subpackage_code"],
        manufacturer_name=row["manufacturer_name"],
        status=status,
        notes=row["notes"],
        part_number=_cell(row["part_number"]),
        qualification_type=_cell(row["qualification_type"]),
        description=_cell(row["description"]),
        documentation=_cell(row["documentation"]),
        conformal_coating=_cell(row["conformal_coating"]),
        substrate_material=_cell(row["substrate_material"]),
        assembly_type=_cell(row["assembly_type"]),
        pitch=_cell_dec(row["pitch"], "pitch"),
        pin_dimension=_cell_dec(row["pin_dimension_um"], "pin_dimension_um"),
        family=_cell(row["family"]),
    )


def _write_csv(path: Path, header: list[str], rows: Iterable[list[str]]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _read_csv(path: Path, header: list[str]) -> list[dict[str, str]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            got_header = next(reader, None)
            if got_header != header:
                raise ValidationError(
                    f"{path}: unexpected header {got_header!r}, expected {header!r}"
                )
            rows = []
            for line_no, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise ValidationError(
                        f"{path}:{line_no}: expected {len(header)} cells, got {len(row)}"
                    )
                rows.append(dict(zip(header, row)))
            return rows
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def write_plm(path: Path, components: Iterable[PlmComponent]) -> None:
    _write_csv(path, PLM_HEADER, (component_to_row(c) for c in components))


def read_plm(path: Path) -> list[PlmComponent]:
    components = [component_from_row(r) for r in _read_csv(path, PLM_HEADER)]
    seen: set[tuple[str, str, str, str]] = set()
    for c in components:
        if c.identity in seen:
            raise ValidationError(f"{path}: duplicate component identity {c.identity}")
        seen.add(c.identity)
    return components


def write_qc(path: Path, cards: Iterable[QualificationCard]) -> None:
    _write_csv(path, QC_HEADER, (card_to_row(q) for q in cards))


def read_qc(path: Path) -> list[QualificationCard]:
    cards = [card_from_row(r) for r in _read_csv(path, QC_HEADER)]
    seen: set[str] = set()
    for q in cards:
        if q.number in seen:
            raise ValidationError(f"{path}: duplicate qualification number {q.number!r}")
        seen.add(q.number)
    return cards


def write_rules(path: Path, table: RuleTable) -> None:
    rows = sorted(table.rows.items())
    _write_csv(path, RULES_HEADER, ([raw, canonical] for raw, canonical in rows))


def read_rules(path: Path) -> RuleTable:
    rows = _read_csv(path, RULES_HEADER)
    return RuleTable({r["raw_name"]: r["canonical_name"] for r in rows})


def serialize_component(c: PlmComponent) -> str:
    """Single-record CSV text (header + one row); inverse of parse_component."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(PLM_HEADER)
    writer.writerow(component_to_row(c))
    return buf.getvalue()


def parse_component(text: str) -> PlmComponent:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != PLM_HEADER:
        raise ValidationError(f"unexpected header {header!r}")
    return component_from_row(dict(zip(PLM_HEADER, next(reader))))


def serialize_card(q: QualificationCard) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(QC_HEADER)
    writer.writerow(card_to_row(q))
    return buf.getvalue()


def parse_card(text: str) -> QualificationCard:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != QC_HEADER:
        raise ValidationError(f"unexpected header {header!r}")
    return card_from_row(dict(zip(QC_HEADER, next(reader))))
