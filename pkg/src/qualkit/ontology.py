"""Domain vocabulary and the standard mapping set over the two databases.

Components and qualification cards each get an IRI class plus data
properties for the join attributes and physical characteristics. Both
manufacturerName properties read from lens views that normalize the raw
name through the cleaning-rule table, so query answers always compare
canonical manufacturers while the base tables keep the raw spelling.
"""

from __future__ import annotations

from decimal import Decimal

from . import csvio
from .model import PlmComponent, QualificationCard, RuleTable, format_decimal
from .vkg import LensDef, MappingSet, Table, TableStore, parse_mappings

BASE = "http://tasi.com/"
VOCAB = "http://tasi.com#"

COMPONENT_CLASS = f"{VOCAB}PLMDB_COMPONENT"
CARD_CLASS = f"{VOCAB}QUALIFICATION_CARD"

PLM_TABLE = "plm"
QC_TABLE = "qc"
RULES_TABLE = "rules"
PLM_LENS = "lenses.component_manufacturer"
QC_LENS = "lenses.qualification_manufacturer"

DEFAULT_MAPPINGS_TEXT = """\
@prefix : <http://tasi.com/> .
@prefix tasi: <http://tasi.com#> .

mappingId Component
target :c_{part_number}/{package}/{subpackage_code}/{manufacturer_name} a tasi:PLMDB_COMPONENT ; tasi:componentPn {part_number} ; tasi:pkgCode {package} ; tasi:spkgCode {subpackage_code} ; tasi:componentFamily {family} .
source SELECT part_number, package, subpackage_code, manufacturer_name, family FROM plm

mappingId Component_Manufacturer
target :c_{part_number}/{package}/{subpackage_code}/{manufacturer_name} tasi:manufacturerName {canonical_manufacturer_name} .
source SELECT part_number, package, subpackage_code, manufacturer_name, canonical_manufacturer_name FROM lenses.component_manufacturer

mappingId Component_Physical
target :c_{part_number}/{package}/{subpackage_code}/{manufacturer_name} tasi:pitch {pitch} ; tasi:pinDimension {pin_dimension_um} ; tasi:leadFinish {lead_finish} ; tasi:rawMaterial {raw_material} ; tasi:pkgLength {package_length_mm} ; tasi:pkgWidth {package_width_mm} ; tasi:pkgHeight {package_height_mm} ; tasi:assemblyType {assembly_type} .
source SELECT part_number, package, subpackage_code, manufacturer_name, pitch, pin_dimension_um, lead_finish, raw_material, package_length_mm, package_width_mm, package_height_mm, assembly_type FROM plm

mappingId Component_GenericPn
target :c_{part_number}/{package}/{subpackage_code}/{manufacturer_name} tasi:componentGenPn {generic_pn} .
source SELECT part_number, package, subpackage_code, manufacturer_name, generic_pn FROM plm

mappingId Qualification
target :q_{number} a tasi:QUALIFICATION_CARD ; tasi:qID {number} ; tasi:pkgCode {package} ; tasi:spkgCode {subpackage_code} .
source SELECT number, package, subpackage_code FROM qc

mappingId Qualification_Manufacturer
target :q_{number} tasi:manufacturerName {canonical_manufacturer_name} .
source SELECT number, canonical_manufacturer_name
       FROM lenses.qualification_manufacturer

mappingId Qualification_Pn
target :q_{number} tasi:qualificationPn {part_number} .
source SELECT number, part_number FROM qc

mappingId Qualification_Metadata
target :q_{number} tasi:status {status} ; tasi:qualificationType {qualification_type} ; tasi:qualificationDesc {description} ; tasi:documentation {documentation} ; tasi:conformalCoating {conformal_coating} ; tasi:substrateMaterial {substrate_material} ; tasi:assemblyType {assembly_type} ; tasi:pitch {pitch} ; tasi:pinDimension {pin_dimension_um} ; tasi:componentFamily {family} .
source SELECT number, status, qualification_type, description, documentation, conformal_coating, substrate_material, assembly_type, pitch, pin_dimension_um, family FROM qc
"""


def default_mappings() -> MappingSet:
    return parse_mappings(DEFAULT_MAPPINGS_TEXT)


def _dec(value: Decimal | None) -> str | None:
    return None if value is None else format_decimal(value)


def component_row(c: PlmComponent) -> dict[str, str | None]:
    return {
        "part_number": c.part_number,
        "package": c.package_code,
        "subpackage_code": c.subpackage_code,
        "manufacturer_name": c.manufacturer_name,
        "family": c.family,
        "pitch": format_decimal(c.pitch),
        "pin_dimension_um": format_decimal(c.pin_dimension),
        "lead_finish": c.lead_finish,
        "raw_material": c.raw_material,
        "package_length_mm": _dec(c.package_length),
        "package_width_mm": _dec(c.package_width),
        "package_height_mm": _dec(c.package_height),
        "assembly_type": c.assembly_type,
        "generic_pn": c.generic_pn,
    }


def card_row(q: QualificationCard) -> dict[str, str | None]:
    return {
        "number": q.number,
        "package": q.package_code,
        "subpackage_code": q.subpackage_code,
        "manufacturer_name": q.manufacturer_name,
        "status": q.status.value,
        "qualification_type": q.qualification_type,
        "description": q.description,
        "documentation": q.documentation,
        "conformal_coating": q.conformal_coating,
        "substrate_material": q.substrate_material,
        "assembly_type": q.assembly_type,
        "pitch": _dec(q.pitch),
        "pin_dimension_um": _dec(q.pin_dimension),
        "family": q.family,
        "notes": q.notes,
        "part_number": q.part_number,
    }


def build_store(
    components: list[PlmComponent],
    cards: list[QualificationCard],
    rules: RuleTable,
) -> TableStore:
    store = TableStore()
    store.register_table(
        Table(
            name=PLM_TABLE,
            columns=list(csvio.PLM_HEADER),
            rows=[component_row(c) for c in components],
            unique_keys=[
                ("part_number", "package", "subpackage_code", "manufacturer_name")
            ],
        )
    )
    store.register_table(
        Table(
            name=QC_TABLE,
            columns=list(csvio.QC_HEADER),
            rows=[card_row(q) for q in cards],
            unique_keys=[("number",)],
        )
    )
    store.register_table(rules_table(rules))
    store.register_lens(
        LensDef(
            name=PLM_LENS,
            base_table=PLM_TABLE,
            rule_table=RULES_TABLE,
            raw_column="manufacturer_name",
            output_column="canonical_manufacturer_name",
        )
    )
    store.register_lens(
        LensDef(
            name=QC_LENS,
            base_table=QC_TABLE,
            rule_table=RULES_TABLE,
            raw_column="manufacturer_name",
            output_column="canonical_manufacturer_name",
        )
    )
    return store


def rules_table(rules: RuleTable) -> Table:
    rows = [
        {"raw_name": raw, "canonical_name": canonical}
        for raw, canonical in sorted(rules.rows.items())
    ]
    return Table(
        name=RULES_TABLE,
        columns=["raw_name", "canonical_name"],
        rows=rows,
        unique_keys=[("raw_name",)],
    )


def replace_rules(store: TableStore, rules: RuleTable) -> None:
    store.replace_table(rules_table(rules))
