from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from qualkit import csvio
from qualkit.model import (
    MatchType,
    PlmComponent,
    QualMatch,
    QualificationCard,
    QualificationReport,
    CascadeStage,
    RuleTable,
    Status,
    ValidationError,
    canonical_manufacturer,
    format_decimal,
    parse_decimal,
)


def make_component(**overrides) -> PlmComponent:
    base = dict(
        part_number="P1000001",
        package_code="FP1",
        subpackage_code="a1",
        manufacturer_name="ABC",
        family="FP",
        pitch=Decimal("1.27"),
        pin_dimension=Decimal("100"),
    )
    base.update(overrides)
    return PlmComponent(**base)


def make_card(**overrides) -> QualificationCard:
    base = dict(
        number="qc1",
        package_code="FP1",
        subpackage_code="a1",
        manufacturer_name="ABC Corp",
        status=Status.CLOSED,
        notes="Assembly FP1 qualified (pn P1000001) with SMT process",
    )
    base.update(overrides)
    return QualificationCard(**base)


def test_canonical_manufacturer_with_rule():
    rules = RuleTable({"ABC Corp": "ABC"})
    assert canonical_manufacturer("ABC Corp", rules) == "ABC"


def test_canonical_manufacturer_identity_fallback():
    assert canonical_manufacturer("XYZ", RuleTable({})) == "XYZ"


def test_canonical_manufacturer_trims_for_matching_only():
    rules = RuleTable({"ABC Inter.": "ABC"})
    assert canonical_manufacturer("  ABC Inter. ", rules) == "ABC"
    # fallback preserves the original string, casing included
    assert canonical_manufacturer("  MiXeD  ", rules) == "  MiXeD  "


def test_canonical_manufacturer_idempotent():
    rules = RuleTable({"ABC Corp": "ABC", "ABC Inc.": "ABC"})
    for raw in ("ABC Corp", "ABC", "other"):
        once = canonical_manufacturer(raw, rules)
        assert canonical_manufacturer(once, rules) == once


def test_rule_table_rejects_non_idempotent_chains():
    with pytest.raises(ValidationError):
        RuleTable({"A": "B", "B": "C"})


def test_component_invariants():
    with pytest.raises(ValidationError):
        make_component(part_number="")
    with pytest.raises(ValidationError):
        make_component(pitch=Decimal("0"))
    with pytest.raises(ValidationError):
        make_component(pin_dimension=Decimal("-5"))


def test_card_invariants():
    with pytest.raises(ValidationError):
        make_card(number="")
    with pytest.raises(ValidationError):
        make_card(status="Closed")  # plain string is not a Status


def test_qualmatch_score_only_for_alternative():
    card = make_card()
    with pytest.raises(ValidationError):
        QualMatch(card, MatchType.DIRECT, score=0.5)
    with pytest.raises(ValidationError):
        QualMatch(card, MatchType.ALTERNATIVE)
    QualMatch(card, MatchType.ALTERNATIVE, score=0.5)


def test_report_cascade_invariant():
    card = make_card()
    with pytest.raises(ValidationError):
        QualificationReport(
            component=make_component(),
            direct=(QualMatch(card, MatchType.DIRECT),),
            similarity=(),
            alternative=(QualMatch(card, MatchType.ALTERNATIVE, score=0.1),),
            cascade_stage=CascadeStage.DIRECT_FOUND,
        )


def test_report_alternative_ordering_enforced():
    a = QualMatch(make_card(number="qc1"), MatchType.ALTERNATIVE, score=0.2)
    b = QualMatch(make_card(number="qc2"), MatchType.ALTERNATIVE, score=0.9)
    with pytest.raises(ValidationError):
        QualificationReport(
            component=make_component(),
            direct=(),
            similarity=(),
            alternative=(a, b),
            cascade_stage=CascadeStage.ALTERNATIVE_PROPOSED,
        )


def test_format_decimal_minimal_digits():
    assert format_decimal(Decimal("1.270")) == "1.27"
    assert format_decimal(Decimal("100")) == "100"
    assert format_decimal(Decimal("0.5000")) == "0.5"
    assert format_decimal(Decimal("2")) == "2"


def test_parse_decimal_rejects_garbage():
    with pytest.raises(ValidationError):
        parse_decimal("abc", "pitch")
    with pytest.raises(ValidationError):
        parse_decimal("NaN", "pitch")


# \x00 is outside what CSV can carry; \r avoids newline-translation noise.
_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\r\x00"),
    min_size=1,
    max_size=24,
)
_decimals = st.decimals(
    min_value=Decimal("0.001"), max_value=Decimal("9999"), places=3
)
_opt_text = st.none() | _text
_opt_dec = st.none() | _decimals


@given(
    part_number=_text,
    package=_text,
    spkg=_text,
    manufacturer=_text,
    family=_text,
    pitch=_decimals,
    pin=_decimals,
    lead=_opt_text,
    material=_opt_text,
    length=_opt_dec,
    width=_opt_dec,
    height=_opt_dec,
    assembly=_opt_text,
    generic=_opt_text,
)
def test_component_serialization_round_trip(
    part_number, package, spkg, manufacturer, family, pitch, pin,
    lead, material, length, width, height, assembly, generic,
):
    component = PlmComponent(
        part_number=part_number,
        package_code=package,
        subpackage_code=spkg,
        manufacturer_name=manufacturer,
        family=family,
        pitch=pitch,
        pin_dimension=pin,
        lead_finish=lead,
        raw_material=material,
        package_length=length,
        package_width=width,
        package_height=height,
        assembly_type=assembly,
        generic_pn=generic,
    )
    assert csvio.parse_component(csvio.serialize_component(component)) == component


@given(
    number=_text,
    package=_text,
    spkg=_text,
    manufacturer=_text,
    status=st.sampled_from(list(Status)),
    notes=st.text(
        alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\r\x00"),
        max_size=80,
    ),
    part_number=_opt_text,
    qtype=_opt_text,
    pitch=_opt_dec,
    pin=_opt_dec,
)
def test_card_serialization_round_trip(
    number, package, spkg, manufacturer, status, notes, part_number, qtype, pitch, pin
):
    card = QualificationCard(
        number=number,
        package_code=package,
        subpackage_code=spkg,
        manufacturer_name=manufacturer,
        status=status,
        notes=notes,
        part_number=part_number,
        qualification_type=qtype,
        pitch=pitch,
        pin_dimension=pin,
    )
    assert csvio.parse_card(csvio.serialize_card(card)) == card


def test_absent_optionals_serialize_as_empty_cells():
    component = make_component()
    text = csvio.serialize_component(component)
    row = text.splitlines()[1]
    assert row.endswith(",,,,,,,")  # seven trailing empty optional cells
