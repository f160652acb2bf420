"""Cleaning phase: manufacturer rule table and part-number recovery.

Rule flow: extract unique names from both databases, ask the gateway for
normalization rules, cross-check the answer against the input names
(hallucinated, ignored, or doubly-claimed names), then apply reviewer
decisions into the final raw -> canonical table.

PN flow: per card, extract a candidate from the free-text note, verify it
against the component database (existence plus package / subpackage /
canonical-manufacturer agreement), and write it into the card only when the
check passes. Everything unverifiable lands in a review queue; a manual
resolution goes through the exact same check. No card ever carries a part
number that failed the cross-check.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .llm import (
    PN_PATTERN,
    PN_SCHEMA,
    NORMALIZATION_SCHEMA,
    Backend,
    LlmRequest,
    Task,
    TransportError,
    build_normalization_prompt,
    build_pn_prompt,
)
from .model import (
    NormalizationRule,
    PlmComponent,
    QualificationCard,
    RuleState,
    RuleTable,
    ValidationError,
)


@dataclass(frozen=True)
class PnReviewItem:
    qual_number: str
    candidate_pn: str | None
    reason: str  # NotExtracted | NotInPlm | AttributeMismatch
    resolved_pn: str | None = None


@dataclass
class RuleValidationReport:
    hallucinated: set[str] = field(default_factory=set)
    missing: set[str] = field(default_factory=set)
    overlaps: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.hallucinated and not self.missing and not self.overlaps


@dataclass(frozen=True)
class RuleDecision:
    rule_id: int
    action: str  # Accept | Edit | Reject
    canonical: str | None = None
    variants: frozenset[str] | None = None


@dataclass
class PipelineDiagnostics:
    noncompliant_rule_responses: int = 0
    noncompliant_pn_responses: int = 0
    multi_token_notes: dict[str, list[str]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "noncompliant_rule_responses": self.noncompliant_rule_responses,
            "noncompliant_pn_responses": self.noncompliant_pn_responses,
            "multi_token_notes": {
                k: self.multi_token_notes[k] for k in sorted(self.multi_token_notes)
            },
            "notes": list(self.notes),
        }


def extract_unique_manufacturers(
    plm: list[PlmComponent], qc: list[QualificationCard]
) -> set[str]:
    names = {c.manufacturer_name.strip() for c in plm}
    names |= {q.manufacturer_name.strip() for q in qc}
    names.discard("")
    return names


def propose_rules(
    names: set[str], gateway: Backend, diagnostics: PipelineDiagnostics | None = None
) -> list[NormalizationRule]:
    """Gateway-suggested rules in Proposed state; non-compliant output yields
    no rules (and a diagnostics record), so every name falls back to review."""
    if not names:
        raise ValidationError("names must be nonempty")
    request = LlmRequest(
        task=Task.NORMALIZATION_RULES,
        prompt=build_normalization_prompt(sorted(names)),
        response_schema=NORMALIZATION_SCHEMA,
    )
    response = gateway.complete(request)
    if not response.compliant:
        if diagnostics is not None:
            diagnostics.noncompliant_rule_responses += 1
            diagnostics.notes.append("rule proposal response was not compliant")
        return []
    rules = []
    for i, entry in enumerate(response.parsed["rules"], start=1):
        variants = frozenset(entry["variants"])
        if not variants or not entry["canonical"]:
            if diagnostics is not None:
                diagnostics.notes.append(f"skipped malformed rule entry {i}")
            continue
        rules.append(
            NormalizationRule(
                id=i,
                variants=variants,
                canonical=entry["canonical"],
                state=RuleState.PROPOSED,
            )
        )
    return rules


def validate_rules(
    rules: list[NormalizationRule], names: set[str]
) -> RuleValidationReport:
    report = RuleValidationReport()
    claimed: dict[str, int] = {}
    for rule in rules:
        for variant in rule.variants:
            if variant not in names:
                report.hallucinated.add(variant)
            if variant in claimed and claimed[variant] != rule.id:
                report.overlaps.append((claimed[variant], rule.id, variant))
            else:
                claimed[variant] = rule.id
    canonicals = {rule.canonical for rule in rules}
    for name in names:
        if name not in claimed and name not in canonicals:
            report.missing.add(name)
    return report


def apply_decisions(
    rules: list[NormalizationRule], decisions: list[RuleDecision]
) -> tuple[RuleTable, list[NormalizationRule]]:
    """Fold reviewer decisions; returns the materialized table and the rules
    with their final states. Edits creating overlaps are rejected outright."""
    by_id = {rule.id: rule for rule in rules}
    for decision in decisions:
        rule = by_id.get(decision.rule_id)
        if rule is None:
            raise ValidationError(f"decision references unknown rule {decision.rule_id}")
        if decision.action == "Accept":
            by_id[rule.id] = replace(rule, state=RuleState.ACCEPTED)
        elif decision.action == "Reject":
            by_id[rule.id] = replace(rule, state=RuleState.REJECTED)
        elif decision.action == "Edit":
            if not decision.canonical or not decision.variants:
                raise ValidationError("edit decision needs canonical and variants")
            by_id[rule.id] = replace(
                rule,
                canonical=decision.canonical,
                variants=decision.variants,
                state=RuleState.EDITED,
            )
        else:
            raise ValidationError(f"unknown decision action {decision.action!r}")

    final = list(by_id.values())
    rows: dict[str, str] = {}
    owner: dict[str, int] = {}
    for rule in final:
        if rule.state not in (RuleState.ACCEPTED, RuleState.EDITED):
            continue
        for variant in rule.variants:
            if variant in owner:
                raise ValidationError(
                    f"rules {owner[variant]} and {rule.id} both claim {variant!r}"
                )
            owner[variant] = rule.id
            rows[variant] = rule.canonical
    return RuleTable(rows), final


def accept_all_valid(
    rules: list[NormalizationRule], names: set[str]
) -> tuple[RuleTable, list[NormalizationRule], RuleValidationReport]:
    """Unattended path: accept rules that survive validation, reject the rest.

    Hallucinated variants are dropped from their rules rather than silently
    mapped; rules left with fewer than one real variant are rejected.
    """
    report = validate_rules(rules, names)
    decisions = []
    seen: set[str] = set()
    for rule in rules:
        kept = frozenset(v for v in rule.variants if v in names and v not in seen)
        if not kept:
            decisions.append(RuleDecision(rule.id, "Reject"))
            continue
        seen |= kept
        if kept != rule.variants:
            decisions.append(RuleDecision(rule.id, "Edit", rule.canonical, kept))
        else:
            decisions.append(RuleDecision(rule.id, "Accept"))
    table, final = apply_decisions(rules, decisions)
    return table, final, report


def cross_check(
    card: QualificationCard,
    pn: str,
    plm_by_pn: dict[str, list[PlmComponent]],
    rules: RuleTable,
) -> str | None:
    """None when the PN verifies against some component row; otherwise the
    failure reason (NotInPlm | AttributeMismatch)."""
    rows = plm_by_pn.get(pn)
    if not rows:
        return "NotInPlm"
    card_manufacturer = rules.lookup(card.manufacturer_name)
    for component in rows:
        if (
            component.package_code == card.package_code
            and component.subpackage_code == card.subpackage_code
            and rules.lookup(component.manufacturer_name) == card_manufacturer
        ):
            return None
    return "AttributeMismatch"


def index_by_pn(plm: list[PlmComponent]) -> dict[str, list[PlmComponent]]:
    out: dict[str, list[PlmComponent]] = {}
    for component in plm:
        out.setdefault(component.part_number, []).append(component)
    return out


def run_pn_pipeline(
    qc: list[QualificationCard],
    plm: list[PlmComponent],
    rules: RuleTable,
    gateway: Backend,
    checkpoint_path: Path | None = None,
    checkpoint_every: int = 100,
    diagnostics: PipelineDiagnostics | None = None,
) -> tuple[list[QualificationCard], list[PnReviewItem]]:
    """Extract, verify, and write PNs card by card, in qual-number order.

    A transport failure checkpoints progress and re-raises; rerunning with
    the same checkpoint path resumes past the finished cards.
    """
    plm_by_pn = index_by_pn(plm)
    done: dict[str, str | None] = {}
    review_by_qual: dict[str, PnReviewItem] = {}
    if checkpoint_path is not None and checkpoint_path.exists():
        saved = json.loads(checkpoint_path.read_text(encoding="utf-8"))
        done = saved.get("done", {})
        review_by_qual = {
            entry["qual_number"]: PnReviewItem(**entry)
            for entry in saved.get("review", [])
        }

    augmented: list[QualificationCard] = []
    review: list[PnReviewItem] = []
    processed = 0

    def checkpoint() -> None:
        if checkpoint_path is not None:
            payload = {
                "done": done,
                "review": [
                    {key: getattr(item, key) for key in _REVIEW_KEYS}
                    for item in review_by_qual.values()
                ],
            }
            checkpoint_path.write_text(
                json.dumps(payload, sort_keys=True), encoding="utf-8"
            )

    def flag(card: QualificationCard, candidate: str | None, reason: str) -> None:
        done[card.number] = None
        item = PnReviewItem(card.number, candidate_pn=candidate, reason=reason)
        review_by_qual[card.number] = item
        review.append(item)
        augmented.append(
            card if card.part_number is None else replace(card, part_number=None)
        )

    for card in sorted(qc, key=lambda q: q.number):
        number = card.number
        if number in done:
            verified = done[number]
            if verified is not None:
                augmented.append(card.with_part_number(verified))
            else:
                augmented.append(
                    card if card.part_number is None else replace(card, part_number=None)
                )
                review.append(
                    review_by_qual.get(number)
                    or PnReviewItem(number, candidate_pn=None, reason="NotExtracted")
                )
            continue

        if card.part_number is not None:
            # Re-verify pre-filled PNs: safety over trust.
            candidate: str | None = card.part_number
        else:
            try:
                candidate = _extract_candidate(card, gateway, diagnostics)
            except TransportError:
                checkpoint()  # partial progress survives the abort
                raise
            processed += 1

        if candidate is None:
            flag(card, None, "NotExtracted")
        else:
            failure = cross_check(card, candidate, plm_by_pn, rules)
            if failure is None:
                done[number] = candidate
                augmented.append(card.with_part_number(candidate))
            else:
                flag(card, candidate, failure)
        if checkpoint_every and processed and processed % checkpoint_every == 0:
            checkpoint()

    checkpoint()
    return augmented, review


def _extract_candidate(
    card: QualificationCard, gateway: Backend, diagnostics: PipelineDiagnostics | None
) -> str | None:
    request = LlmRequest(
        task=Task.PN_EXTRACTION,
        prompt=build_pn_prompt(card.notes),
        response_schema=PN_SCHEMA,
    )
    try:
        response = gateway.complete(request)
    except TransportError:
        raise
    if diagnostics is not None:
        tokens = PN_PATTERN.findall(card.notes)
        if len(tokens) > 1:
            diagnostics.multi_token_notes[card.number] = tokens[1:]
        if not response.compliant:
            diagnostics.noncompliant_pn_responses += 1
    if not response.compliant:
        return None
    return response.parsed.get("pn")


def resolve_review(
    item: PnReviewItem,
    pn: str,
    qc_by_number: dict[str, QualificationCard],
    plm: list[PlmComponent] | dict[str, list[PlmComponent]],
    rules: RuleTable,
) -> tuple[QualificationCard | None, PnReviewItem]:
    """Manual PN goes through the same cross-check; only passing PNs stick.

    Returns (updated card or None, updated review item). A failing PN leaves
    the item pending with its reason updated; resolving an already-resolved
    item with the same PN is a no-op.
    """
    card = qc_by_number.get(item.qual_number)
    if card is None:
        raise KeyError(f"unknown qualification {item.qual_number!r}")
    if item.resolved_pn is not None and item.resolved_pn == pn:
        return card if card.part_number == pn else None, item
    plm_by_pn = plm if isinstance(plm, dict) else index_by_pn(plm)
    failure = cross_check(card, pn, plm_by_pn, rules)
    if failure is None:
        updated = card.with_part_number(pn)
        return updated, replace(item, candidate_pn=pn, resolved_pn=pn)
    return None, replace(item, candidate_pn=pn, reason=failure)


_REVIEW_KEYS = ("candidate_pn", "qual_number", "reason", "resolved_pn")


def review_queue_to_json(items: list[PnReviewItem]) -> str:
    payload = [
        {key: getattr(item, key) for key in _REVIEW_KEYS}
        for item in sorted(items, key=lambda i: i.qual_number)
    ]
    return json.dumps(payload, sort_keys=True, indent=1)


def review_queue_from_json(text: str) -> list[PnReviewItem]:
    return [PnReviewItem(**entry) for entry in json.loads(text)]
