from __future__ import annotations

import json

import pytest

from qualkit.cleaning import (
    PipelineDiagnostics,
    PnReviewItem,
    RuleDecision,
    accept_all_valid,
    apply_decisions,
    cross_check,
    extract_unique_manufacturers,
    index_by_pn,
    propose_rules,
    resolve_review,
    run_pn_pipeline,
    validate_rules,
)
from qualkit.corpus import CorpusConfig, generate, table1_corpus
from qualkit.llm import LlmRequest, MockBackend, TransportError, mock_extract_pn
from qualkit.model import (
    NormalizationRule,
    RuleState,
    RuleTable,
    ValidationError,
)

from conftest import mock_clean


def test_extract_unique_manufacturers_table1(table1):
    names = extract_unique_manufacturers(table1.components, table1.cards)
    assert names == {"ABC", "XYZ", "ABC Corp", "XYZ Inc.", "ABC Inter."}


def test_extract_unique_is_idempotent_union(table1):
    once = extract_unique_manufacturers(table1.components, table1.cards)
    doubled = extract_unique_manufacturers(
        table1.components + table1.components, table1.cards + []
    )
    assert doubled <= once | {c.manufacturer_name for c in table1.components}
    assert extract_unique_manufacturers(table1.components, []) <= once


def test_unique_manufacturer_count_near_paper_scale():
    corpus = generate(CorpusConfig(n_components=20000, n_qualifications=2000, seed=42))
    names = extract_unique_manufacturers(corpus.components, corpus.cards)
    assert abs(len(names) - 466) <= 466 * 0.15


def test_propose_rules_mock_reference_cluster():
    names = {"ABC", "ABC Corp", "ABC Inc.", "ABC International"}
    rules = propose_rules(names, MockBackend())
    assert len(rules) == 1
    assert rules[0].state is RuleState.PROPOSED
    assert rules[0].canonical == "ABC"


def test_propose_rules_noncompliant_gateway_yields_empty_plus_diagnostics():
    class BrokenBackend:
        def complete(self, request: LlmRequest):
            from qualkit.llm import LlmResponse

            return LlmResponse(raw_text="garbage", parsed=None, compliant=False)

    diagnostics = PipelineDiagnostics()
    rules = propose_rules({"A", "B"}, BrokenBackend(), diagnostics)
    assert rules == []
    assert diagnostics.noncompliant_rule_responses == 1


def test_propose_rules_count_near_paper_scale():
    corpus = generate(CorpusConfig(n_components=20000, n_qualifications=2000, seed=42))
    names = extract_unique_manufacturers(corpus.components, corpus.cards)
    rules = propose_rules(names, MockBackend())
    assert abs(len(rules) - 50) <= 50 * 0.30


def test_validate_rules_detects_hallucinated_names():
    names = {"ABC", "ABC Corp"}
    rules = [
        NormalizationRule(1, frozenset({"ABC", "ABC Corp", "GHOST Ltd"}), "ABC")
    ]
    report = validate_rules(rules, names)
    assert report.hallucinated == {"GHOST Ltd"}


def test_validate_rules_detects_missing_and_overlaps():
    names = {"A", "A Corp", "B", "B Inc.", "Orphan"}
    rules = [
        NormalizationRule(1, frozenset({"A", "A Corp"}), "A"),
        NormalizationRule(2, frozenset({"B", "B Inc.", "A"}), "B"),
    ]
    report = validate_rules(rules, names)
    assert report.missing == {"Orphan"}
    assert report.overlaps == [(1, 2, "A")]


def test_validate_rules_clean_on_mock_output():
    names = {"Acme", "Acme Corp", "acme ltd", "Borel", "Borel GmbH", "Solo"}
    rules = propose_rules(names, MockBackend())
    report = validate_rules(rules, names)
    assert report.hallucinated == set()
    assert report.overlaps == []
    assert report.missing == {"Solo"} or report.missing == set()


def test_apply_decisions_accept_reference_rule():
    rule = NormalizationRule(
        1, frozenset({"ABC", "ABC Corp", "ABC Inc.", "ABC International"}), "ABC"
    )
    table, final = apply_decisions([rule], [RuleDecision(1, "Accept")])
    assert table.rows == {
        "ABC": "ABC",
        "ABC Corp": "ABC",
        "ABC Inc.": "ABC",
        "ABC International": "ABC",
    }
    assert final[0].state is RuleState.ACCEPTED


def test_apply_decisions_reject_all_gives_identity():
    rule = NormalizationRule(1, frozenset({"A", "A Corp"}), "A")
    table, _ = apply_decisions([rule], [RuleDecision(1, "Reject")])
    assert len(table) == 0
    assert table.lookup("A Corp") == "A Corp"


def test_apply_decisions_edit_splits_country_branches():
    rule = NormalizationRule(
        1, frozenset({"Acme France", "Acme Italy", "Acme"}), "Acme"
    )
    extra = NormalizationRule(2, frozenset({"Acme Italy"}), "Acme Italy")
    table, final = apply_decisions(
        [rule, extra],
        [
            RuleDecision(1, "Edit", "Acme", frozenset({"Acme France", "Acme"})),
            RuleDecision(2, "Accept"),
        ],
    )
    assert table.lookup("Acme France") == "Acme"
    assert table.lookup("Acme Italy") == "Acme Italy"


def test_apply_decisions_overlapping_edit_rejected_with_pair():
    rules = [
        NormalizationRule(1, frozenset({"A", "A Corp"}), "A"),
        NormalizationRule(2, frozenset({"B"}), "B"),
    ]
    with pytest.raises(ValidationError, match="1 and 2"):
        apply_decisions(
            rules,
            [
                RuleDecision(1, "Accept"),
                RuleDecision(2, "Edit", "B", frozenset({"B", "A Corp"})),
            ],
        )


def test_apply_decisions_unknown_rule_id():
    with pytest.raises(ValidationError, match="unknown rule"):
        apply_decisions([], [RuleDecision(9, "Accept")])


def test_cross_check_table1(table1):
    by_pn = index_by_pn(table1.components)
    rules = table1.truth.rules
    qc3 = table1.cards[2]
    assert cross_check(qc3, "P3333333", by_pn, rules) is None
    assert cross_check(qc3, "P9999999", by_pn, rules) == "NotInPlm"
    assert cross_check(qc3, "P2222222", by_pn, rules) == "AttributeMismatch"


def test_run_pn_pipeline_table1(table1):
    augmented, review = run_pn_pipeline(
        table1.cards, table1.components, table1.truth.rules, MockBackend()
    )
    assert review == []
    assert {q.number: q.part_number for q in augmented} == {
        "qc1": "P1111111", "qc2": "P2222222", "qc3": "P3333333",
    }


def test_pipeline_flags_missing_pn_as_not_extracted(table1):
    import dataclasses

    cards = list(table1.cards)
    cards[0] = dataclasses.replace(
        cards[0], notes="stand-off 0.2-0.3 mm, no reference present"
    )
    augmented, review = run_pn_pipeline(
        cards, table1.components, table1.truth.rules, MockBackend()
    )
    assert [item.reason for item in review] == ["NotExtracted"]
    assert review[0].candidate_pn is None
    by_number = {q.number: q for q in augmented}
    assert by_number["qc1"].part_number is None
    assert by_number["qc2"].part_number == "P2222222"


def test_pipeline_completeness_every_card_augmented_or_queued(small_cleaned):
    corpus, augmented, table, review = small_cleaned
    queued = {item.qual_number for item in review}
    for card in augmented:
        assert (card.part_number is not None) != (card.number in queued)
    assert len(queued) == len(review)  # exactly one item per flagged card


def test_pipeline_never_writes_failing_pn(small_cleaned):
    corpus, augmented, table, review = small_cleaned
    by_pn = index_by_pn(corpus.components)
    for card in augmented:
        if card.part_number is not None:
            assert cross_check(card, card.part_number, by_pn, table) is None


def test_pipeline_extraction_matches_truth_when_phrase_present(small_cleaned):
    corpus, augmented, table, review = small_cleaned
    truth = corpus.truth.pn_by_qual
    for card in augmented:
        if card.part_number is not None:
            assert card.part_number == truth[card.number]
    # recall deficit equals injected missing fraction
    missing = {q.number for q in corpus.cards if not mock_extract_pn(q.notes)}
    assert {i.qual_number for i in review} == missing


def test_pipeline_checkpoint_resume(tmp_path, table1):
    calls = {"n": 0}
    backend = MockBackend()

    class CountingBackend:
        def complete(self, request):
            calls["n"] += 1
            return backend.complete(request)

    checkpoint = tmp_path / "checkpoint.json"
    run_pn_pipeline(
        table1.cards, table1.components, table1.truth.rules,
        CountingBackend(), checkpoint_path=checkpoint,
    )
    assert checkpoint.exists()
    first_run_calls = calls["n"]
    augmented, review = run_pn_pipeline(
        table1.cards, table1.components, table1.truth.rules,
        CountingBackend(), checkpoint_path=checkpoint,
    )
    assert calls["n"] == first_run_calls  # resume skipped every finished card
    assert all(q.part_number for q in augmented)


def test_pipeline_transport_abort_writes_checkpoint(tmp_path, table1):
    class FlakyBackend:
        def __init__(self):
            self.calls = 0

        def complete(self, request):
            self.calls += 1
            if self.calls > 1:
                raise TransportError("link down")
            return MockBackend().complete(request)

    checkpoint = tmp_path / "checkpoint.json"
    with pytest.raises(TransportError):
        run_pn_pipeline(
            table1.cards, table1.components, table1.truth.rules,
            FlakyBackend(), checkpoint_path=checkpoint,
        )
    saved = json.loads(checkpoint.read_text())
    assert saved["done"]  # partial progress survived


def test_resolve_review_with_correct_pn(table1):
    qc_by_number = {q.number: q for q in table1.cards}
    item = PnReviewItem("qc1", None, "NotExtracted")
    card, updated = resolve_review(
        item, "P1111111", qc_by_number, table1.components, table1.truth.rules
    )
    assert card is not None and card.part_number == "P1111111"
    assert updated.resolved_pn == "P1111111"


def test_resolve_review_mismatched_package_stays_pending(table1):
    qc_by_number = {q.number: q for q in table1.cards}
    item = PnReviewItem("qc1", None, "NotExtracted")
    card, updated = resolve_review(
        item, "P2222222", qc_by_number, table1.components, table1.truth.rules
    )
    assert card is None
    assert updated.resolved_pn is None
    assert updated.reason == "AttributeMismatch"


def test_resolve_review_idempotent(table1):
    qc_by_number = {q.number: q for q in table1.cards}
    item = PnReviewItem("qc1", None, "NotExtracted")
    card1, item1 = resolve_review(
        item, "P1111111", qc_by_number, table1.components, table1.truth.rules
    )
    qc_by_number["qc1"] = card1
    card2, item2 = resolve_review(
        item1, "P1111111", qc_by_number, table1.components, table1.truth.rules
    )
    assert card2 == card1
    assert item2 == item1


def test_resolve_review_unknown_qual(table1):
    item = PnReviewItem("nope", None, "NotExtracted")
    with pytest.raises(KeyError):
        resolve_review(item, "P1111111", {}, table1.components, table1.truth.rules)


def test_no_overmerge_on_generated_clusters(small_cleaned):
    corpus, augmented, table, review = small_cleaned
    truth_rules = corpus.truth.rules
    canonical_of = {}
    for raw in extract_unique_manufacturers(corpus.components, corpus.cards):
        ours = table.lookup(raw)
        truth = truth_rules.lookup(raw)
        if ours in canonical_of:
            assert canonical_of[ours] == truth, f"{raw} merged across truth clusters"
        else:
            canonical_of[ours] = truth
