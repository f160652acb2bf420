"""Seeded generator of random in-subset graph queries over the standard
vocabulary, used by the engine/oracle equivalence suites."""

from __future__ import annotations

from random import Random

from qualkit.ontology import COMPONENT_CLASS, CARD_CLASS, VOCAB
from qualkit.vkg import QueryAst, TableStore
from qualkit.vkg.terms import Iri, Literal, RDF_TYPE, TriplePattern, Var

# property -> (relation, column) pairs it reads from, for value sampling
PROPERTY_SOURCES: dict[str, list[tuple[str, str]]] = {
    "componentPn": [("plm", "part_number")],
    "pkgCode": [("plm", "package"), ("qc", "package")],
    "spkgCode": [("plm", "subpackage_code"), ("qc", "subpackage_code")],
    "manufacturerName": [
        ("lenses.component_manufacturer", "canonical_manufacturer_name"),
        ("lenses.qualification_manufacturer", "canonical_manufacturer_name"),
    ],
    "componentFamily": [("plm", "family"), ("qc", "family")],
    "pitch": [("plm", "pitch"), ("qc", "pitch")],
    "pinDimension": [("plm", "pin_dimension_um"), ("qc", "pin_dimension_um")],
    "leadFinish": [("plm", "lead_finish")],
    "rawMaterial": [("plm", "raw_material")],
    "pkgLength": [("plm", "package_length_mm")],
    "pkgWidth": [("plm", "package_width_mm")],
    "pkgHeight": [("plm", "package_height_mm")],
    "assemblyType": [("plm", "assembly_type"), ("qc", "assembly_type")],
    "componentGenPn": [("plm", "generic_pn")],
    "qID": [("qc", "number")],
    "qualificationPn": [("qc", "part_number")],
    "status": [("qc", "status")],
    "qualificationType": [("qc", "qualification_type")],
    "qualificationDesc": [("qc", "description")],
    "documentation": [("qc", "documentation")],
    "conformalCoating": [("qc", "conformal_coating")],
    "substrateMaterial": [("qc", "substrate_material")],
}

CLASSES = (COMPONENT_CLASS, CARD_CLASS)


def _sample_value(rng: Random, store: TableStore, prop: str) -> str:
    if rng.random() < 0.25:
        return "no-such-value"
    table, column = rng.choice(PROPERTY_SOURCES[prop])
    rows = store.relation(table).rows
    for _ in range(8):
        if not rows:
            break
        value = rng.choice(rows).get(column)
        if value is not None:
            return value
    return "no-such-value"


def random_query(rng: Random, store: TableStore) -> QueryAst:
    props = sorted(PROPERTY_SOURCES)
    subjects = [Var("s0")] + ([Var("s1")] if rng.random() < 0.5 else [])
    literal_vars: list[Var] = []
    fresh = iter(f"v{i}" for i in range(100))
    required: list[TriplePattern] = []
    filters: list[tuple[Var, str]] = []

    def make_object(prop: str):
        roll = rng.random()
        if roll < 0.20:
            return Literal(_sample_value(rng, store, prop))
        if roll < 0.35 and literal_vars:
            return rng.choice(literal_vars)
        if roll < 0.40 and len(subjects) > 1:
            return subjects[-1]  # kind mismatch on purpose now and then
        var = Var(next(fresh))
        literal_vars.append(var)
        return var

    for subject in subjects:
        if rng.random() < 0.55:
            required.append(
                TriplePattern(subject, Iri(RDF_TYPE), Iri(rng.choice(CLASSES)))
            )
        for _ in range(rng.randint(1, 3)):
            prop = rng.choice(props)
            required.append(
                TriplePattern(subject, Iri(VOCAB + prop), make_object(prop))
            )

    optional_blocks: list[tuple[TriplePattern, ...]] = []
    if rng.random() < 0.35:
        block = []
        for _ in range(rng.randint(1, 2)):
            prop = rng.choice(props)
            block.append(
                TriplePattern(
                    rng.choice(subjects), Iri(VOCAB + prop), Var(next(fresh))
                )
            )
        optional_blocks.append(tuple(block))

    required_literal_vars = [
        v for p in required for v in p.variables if v in literal_vars
    ]
    if required_literal_vars and rng.random() < 0.15:
        var = rng.choice(required_literal_vars)
        prop = rng.choice(props)
        filters.append((var, _sample_value(rng, store, prop)))

    all_vars = sorted(
        {v for p in required for v in p.variables}
        | {v for b in optional_blocks for p in b for v in p.variables},
        key=lambda v: v.name,
    )
    k = rng.randint(1, len(all_vars))
    select = tuple(sorted(rng.sample(all_vars, k), key=lambda v: v.name))
    return QueryAst(
        select_vars=select,
        required=tuple(required),
        optional_blocks=tuple(optional_blocks),
        filters=tuple(filters),
        prefixes={"tasi": VOCAB},
    )
