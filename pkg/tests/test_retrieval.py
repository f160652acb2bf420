from __future__ import annotations

import dataclasses
from decimal import Decimal
from random import Random

import pytest

from qualkit.corpus import CorpusConfig, generate, table1_corpus
from qualkit.model import (
    CascadeStage,
    MatchType,
    PlmComponent,
    QualificationCard,
    RuleTable,
    Status,
)
from qualkit.retrieval import (
    FP_RULE,
    GENERIC_RULE,
    PnNotFound,
    RetrievalEngine,
    brute_force_retrieve,
    passes_rule,
    rule_for_family,
)

from conftest import cleaned_engine, mock_clean


def fixture_engine() -> RetrievalEngine:
    corpus = table1_corpus()
    cards = [
        q.with_part_number(corpus.truth.pn_by_qual[q.number]) for q in corpus.cards
    ]
    return RetrievalEngine(corpus.components, cards, corpus.truth.rules)


def fp_component(**overrides) -> PlmComponent:
    base = dict(
        part_number="P7000001",
        package_code="FP9",
        subpackage_code="z1",
        manufacturer_name="Mfr",
        family="FP",
        pitch=Decimal("1.27"),
        pin_dimension=Decimal("104"),
        assembly_type="SMT",
    )
    base.update(overrides)
    return PlmComponent(**base)


def fp_card(**overrides) -> QualificationCard:
    base = dict(
        number="qx1",
        package_code="FP9",
        subpackage_code="z9",
        manufacturer_name="Other",
        status=Status.CLOSED,
        notes="no reference",
        pitch=Decimal("1.27"),
        pin_dimension=Decimal("100"),
        assembly_type="SMT",
        family="FP",
    )
    base.update(overrides)
    return QualificationCard(**base)


def test_find_direct_fixture():
    engine = fixture_engine()
    matches = engine.find_direct("P1111111")
    assert [m.qualification.number for m in matches] == ["qc1"]
    assert matches[0].match_type is MatchType.DIRECT


def test_find_direct_unknown_pn():
    engine = fixture_engine()
    with pytest.raises(PnNotFound):
        engine.find_direct("NOPE")


def test_find_similarity_shares_triple_different_pn():
    corpus = table1_corpus()
    extra = dataclasses.replace(
        corpus.components[0], part_number="P9999999", generic_pn=None
    )
    cards = [
        q.with_part_number(corpus.truth.pn_by_qual[q.number]) for q in corpus.cards
    ]
    engine = RetrievalEngine(corpus.components + [extra], cards, corpus.truth.rules)
    matches = engine.find_by_similarity("P9999999")
    assert [m.qualification.number for m in matches] == ["qc1"]
    assert matches[0].match_type is MatchType.SIMILARITY
    assert engine.find_direct("P9999999") == []


def test_similarity_excludes_cards_without_extracted_pn():
    corpus = table1_corpus()
    extra = dataclasses.replace(
        corpus.components[0], part_number="P9999999", generic_pn=None
    )
    cards = [q for q in corpus.cards]  # part_number left None
    engine = RetrievalEngine(corpus.components + [extra], cards, corpus.truth.rules)
    assert engine.find_by_similarity("P9999999") == []


def test_direct_and_similarity_disjoint_on_fixture():
    engine = fixture_engine()
    for pn in ("P1111111", "P2222222", "P3333333"):
        direct = {m.qualification.number for m in engine.find_direct(pn)}
        similar = {m.qualification.number for m in engine.find_by_similarity(pn)}
        assert not (direct & similar)


def test_fp_rule_boundary_inclusive_five_microns():
    rules = RuleTable({})
    component = fp_component(pin_dimension=Decimal("104"))
    within = fp_card(pin_dimension=Decimal("100"))
    assert passes_rule(component, within, FP_RULE, rules)  # |4| <= 5
    at_boundary = fp_card(pin_dimension=Decimal("99"))
    assert passes_rule(component, at_boundary, FP_RULE, rules)  # |5| == 5
    outside = fp_card(pin_dimension=Decimal("110"))
    assert not passes_rule(component, outside, FP_RULE, rules)  # |6| > 5


def test_fp_rule_tiny_overshoot_rejected():
    rules = RuleTable({})
    component = fp_component(pin_dimension=Decimal("100"))
    card = fp_card(pin_dimension=Decimal("105.000001"))
    assert not passes_rule(component, card, FP_RULE, rules)
    exactly = fp_card(pin_dimension=Decimal("105"))
    assert passes_rule(component, exactly, FP_RULE, rules)


def test_fp_rule_requires_all_attributes():
    rules = RuleTable({})
    component = fp_component()
    assert not passes_rule(
        component, fp_card(pitch=Decimal("0.5")), FP_RULE, rules
    )
    assert not passes_rule(
        component, fp_card(assembly_type="THT"), FP_RULE, rules
    )
    assert not passes_rule(
        component, fp_card(package_code="FP8"), FP_RULE, rules
    )
    assert not passes_rule(component, fp_card(pitch=None), FP_RULE, rules)


def test_generic_rule_uses_canonical_manufacturer():
    rules = RuleTable({"Mfr Corp": "Mfr"})
    component = fp_component(family="Hybrid", manufacturer_name="Mfr")
    card = fp_card(manufacturer_name="Mfr Corp")
    assert passes_rule(component, card, GENERIC_RULE, rules)
    assert not passes_rule(component, card, GENERIC_RULE, RuleTable({}))


def test_rule_registry_fp_and_fallback():
    assert rule_for_family("FP") is FP_RULE
    assert rule_for_family("Capacitor") is GENERIC_RULE


def test_find_alternative_missing_attributes_diagnostic():
    corpus = table1_corpus()
    component = fp_component(assembly_type=None)
    cards = [q.with_part_number(corpus.truth.pn_by_qual[q.number]) for q in corpus.cards]
    engine = RetrievalEngine(corpus.components + [component], cards, corpus.truth.rules)
    matches, diagnostics = engine.find_alternative(component)
    assert matches == []
    assert diagnostics and "assembly_type" in diagnostics[0]


def test_find_alternative_ranks_by_cosine_with_scores():
    corpus = table1_corpus()
    component = fp_component()
    candidates = [
        fp_card(number="qa1", notes="flat package reflow batch 1"),
        fp_card(number="qa2", notes="flat package reflow batch 2"),
        fp_card(number="qa3", pin_dimension=Decimal("200"), notes="excluded"),
    ]
    engine = RetrievalEngine(
        corpus.components + [component],
        candidates,
        corpus.truth.rules,
    )
    matches, diagnostics = engine.find_alternative(component, k=10)
    assert diagnostics == []
    numbers = [m.qualification.number for m in matches]
    assert set(numbers) == {"qa1", "qa2"}
    scores = [m.score for m in matches]
    assert scores == sorted(scores, reverse=True)
    assert all(m.match_type is MatchType.ALTERNATIVE for m in matches)


def test_retrieve_cascade_direct_found():
    engine = fixture_engine()
    report = engine.retrieve("P1111111")
    assert report.cascade_stage is CascadeStage.DIRECT_FOUND
    assert report.alternative == ()


def test_retrieve_cascade_none_found():
    corpus = table1_corpus()
    loner = fp_component(package_code="FP77", pin_dimension=Decimal("100"))
    cards = [q.with_part_number(corpus.truth.pn_by_qual[q.number]) for q in corpus.cards]
    engine = RetrievalEngine(corpus.components + [loner], cards, corpus.truth.rules)
    report = engine.retrieve("P7000001")
    assert report.cascade_stage is CascadeStage.NONE_FOUND
    assert report.direct == report.similarity == report.alternative == ()


def test_retrieve_cascade_alternative_proposed():
    corpus = table1_corpus()
    component = fp_component()
    cards = [fp_card(number="qa1"), fp_card(number="qa2")]
    engine = RetrievalEngine(
        corpus.components + [component], cards, corpus.truth.rules
    )
    report = engine.retrieve("P7000001")
    assert report.cascade_stage is CascadeStage.ALTERNATIVE_PROPOSED
    assert len(report.alternative) == 2
    assert report.direct == () and report.similarity == ()


def test_manufacturer_variant_substitution_leaves_results_unchanged():
    corpus = generate(CorpusConfig(n_components=120, seed=19))
    augmented, table, _ = mock_clean(corpus)
    engine = RetrievalEngine(corpus.components, augmented, table)
    # pick a component with a direct match
    pn = next(
        pn for pn, m in sorted(corpus.truth.matches.items()) if m.direct
    )
    baseline = engine.retrieve(pn)

    # substitute a covered variant for the raw manufacturer of each matched card
    variants_by_canonical: dict[str, list[str]] = {}
    for raw, canonical in table.rows.items():
        variants_by_canonical.setdefault(canonical, []).append(raw)
    changed = []
    for card in augmented:
        canonical = table.lookup(card.manufacturer_name)
        options = [
            v for v in variants_by_canonical.get(canonical, [])
            if v != card.manufacturer_name
        ]
        if options:
            card = dataclasses.replace(card, manufacturer_name=sorted(options)[0])
        changed.append(card)
    substituted = RetrievalEngine(corpus.components, changed, table)
    after = substituted.retrieve(pn)
    assert [m.qualification.number for m in baseline.direct] == [
        m.qualification.number for m in after.direct
    ]
    assert [m.qualification.number for m in baseline.similarity] == [
        m.qualification.number for m in after.similarity
    ]
    assert [m.qualification.number for m in baseline.alternative] == [
        m.qualification.number for m in after.alternative
    ]


def test_engine_matches_brute_force_small_corpus():
    corpus = generate(CorpusConfig(n_components=80, seed=29))
    augmented, table, _ = mock_clean(corpus)
    engine = RetrievalEngine(corpus.components, augmented, table)
    for component in corpus.components[:40]:
        pn = component.part_number
        ours = engine.retrieve(pn)
        reference = brute_force_retrieve(pn, corpus.components, augmented, table)
        assert ours.cascade_stage == reference.cascade_stage, pn
        for attr in ("direct", "similarity", "alternative"):
            got = [(m.qualification.number, m.score) for m in getattr(ours, attr)]
            want = [
                (m.qualification.number, m.score) for m in getattr(reference, attr)
            ]
            if attr == "alternative":
                got = [(n, pytest.approx(s)) for n, s in got]
            assert got == want, (pn, attr)


def test_partition_property_on_random_corpus():
    corpus = generate(CorpusConfig(n_components=150, seed=41))
    augmented, table, _ = mock_clean(corpus)
    engine = RetrievalEngine(corpus.components, augmented, table)
    cards_with_pn = [q for q in augmented if q.part_number is not None]
    rng = Random(4)
    for component in rng.sample(corpus.components, 30):
        pn = component.part_number
        direct = {m.qualification.number for m in engine.find_direct(pn)}
        similar = {m.qualification.number for m in engine.find_by_similarity(pn)}
        assert not direct & similar
        canonical = table.lookup(component.manufacturer_name)
        agreeing = {
            q.number
            for q in cards_with_pn
            if q.package_code == component.package_code
            and q.subpackage_code == component.subpackage_code
            and table.lookup(q.manufacturer_name) == canonical
        }
        assert direct | similar == agreeing
        assert direct == {q for q in agreeing if engine.cards_by_number[q].part_number == pn}
