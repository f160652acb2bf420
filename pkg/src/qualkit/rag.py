"""Retrieval-augmented baseline: embed both datasets, hand the top-k similar
cards to the model as context, parse its per-type match sets, score against
ground truth.

The mock backend is a perfect-within-context oracle: it applies the match
definitions symbolically to the context it was given (reading card part
numbers out of the notes, exactly like the real pipeline would have to), so
its mistakes are by construction the retrieval mistakes: anything outside
the context is unreachable. Ids the model invents are dropped and flagged,
never scored.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

from .llm import (
    RAG_SCHEMA,
    Backend,
    LlmRequest,
    Task,
    build_rag_prompt,
    mock_extract_pn,
)
from .model import GroundTruth, PlmComponent, QualificationCard, RuleTable
from .vecindex import LocalEmbedder, VectorIndex, build_index, to_canonical_json, top_k

PIN_WINDOW_UM = Decimal("5")

MATCH_DEFINITIONS = """\
Direct match: part number, package code, subpackage code and manufacturer
all equal between the component and the qualification record.
Similarity match: package code, subpackage code and manufacturer equal but
the part number differs.
Alternative match: for family FP the package code and pitch must be equal,
the pin dimension within 5 micrometers, and the assembly type equal; for
any other family the package code and manufacturer must be equal. Records
already matched as direct or similarity are not alternatives."""


@dataclass(frozen=True)
class RagPrediction:
    component_id: str
    direct: frozenset[str]
    similarity: frozenset[str]
    alternative: frozenset[str]
    raw_llm_output: str
    compliant: bool
    dropped_ids: frozenset[str] = frozenset()

    def by_type(self) -> dict[str, frozenset[str]]:
        return {
            "direct": self.direct,
            "similarity": self.similarity,
            "alternative": self.alternative,
        }


def build_context(
    component: PlmComponent,
    card_index: VectorIndex,
    cards_by_number: dict[str, QualificationCard],
    embedder: LocalEmbedder,
    rules: RuleTable,
    n: int = 200,
) -> list[QualificationCard]:
    """Top-n cards by cosine to the component embedding, best first."""
    query = embedder.embed(to_canonical_json(component, rules))
    ranked = top_k(query, card_index, k=n, query_tag=embedder.tag)
    return [cards_by_number[number] for number, _ in ranked]


def _dec(value: str | None) -> Decimal | None:
    if value is None:
        return None
    try:
        return Decimal(value)
    except InvalidOperation:
        return None


def mock_classify_payload(payload: dict) -> dict:
    """Symbolic application of the match definitions to the prompt payload."""
    component = payload["component"]
    component_pn = component.get("part_number")
    direct: list[str] = []
    similarity: list[str] = []
    alternative: list[str] = []
    for card in payload["context"]:
        number = card.get("number")
        if not number:
            continue
        card_pn = mock_extract_pn(card.get("notes", ""))
        triple = (
            card.get("package_code") == component.get("package_code")
            and card.get("subpackage_code") == component.get("subpackage_code")
            and card.get("manufacturer") == component.get("manufacturer")
        )
        if triple and card_pn is not None and card_pn == component_pn:
            direct.append(number)
        elif triple and card_pn is not None:
            similarity.append(number)
        elif _mock_alternative(component, card):
            alternative.append(number)
    return {
        "direct": sorted(direct),
        "similarity": sorted(similarity),
        "alternative": sorted(alternative),
    }


def _mock_alternative(component: dict, card: dict) -> bool:
    if card.get("package_code") != component.get("package_code"):
        return False
    if component.get("family") == "FP":
        pitch_c = _dec(component.get("pitch"))
        pitch_q = _dec(card.get("pitch"))
        pin_c = _dec(component.get("pin_dimension_um"))
        pin_q = _dec(card.get("pin_dimension_um"))
        assembly_c = component.get("assembly_type")
        assembly_q = card.get("assembly_type")
        if None in (pitch_c, pitch_q, pin_c, pin_q, assembly_c, assembly_q):
            return False
        return (
            pitch_c == pitch_q
            and abs(pin_c - pin_q) <= PIN_WINDOW_UM
            and assembly_c == assembly_q
        )
    return card.get("manufacturer") == component.get("manufacturer")


def classify(
    component: PlmComponent,
    context: list[QualificationCard],
    gateway: Backend,
    rules: RuleTable,
) -> RagPrediction:
    component_json = json.loads(to_canonical_json(component, rules))
    context_json = [json.loads(to_canonical_json(card, rules)) for card in context]
    request = LlmRequest(
        task=Task.RAG_CLASSIFICATION,
        prompt=build_rag_prompt(component_json, context_json, MATCH_DEFINITIONS),
        response_schema=RAG_SCHEMA,
    )
    response = gateway.complete(request)
    if not response.compliant:
        return RagPrediction(
            component_id=component.part_number,
            direct=frozenset(),
            similarity=frozenset(),
            alternative=frozenset(),
            raw_llm_output=response.raw_text,
            compliant=False,
        )
    context_ids = {card.number for card in context}
    sets: dict[str, frozenset[str]] = {}
    dropped: set[str] = set()
    for key in ("direct", "similarity", "alternative"):
        claimed = set(response.parsed[key])
        dropped |= claimed - context_ids
        sets[key] = frozenset(claimed & context_ids)
    return RagPrediction(
        component_id=component.part_number,
        direct=sets["direct"],
        similarity=sets["similarity"],
        alternative=sets["alternative"],
        raw_llm_output=response.raw_text,
        compliant=True,
        dropped_ids=frozenset(dropped),
    )


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    iou: float

    def as_dict(self) -> dict[str, float]:
        return {
            "precision": round(self.precision, 6),
            "recall": round(self.recall, 6),
            "f1": round(self.f1, 6),
            "iou": round(self.iou, 6),
        }


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ratio(numerator: int, denominator: int, empty_numerator: int) -> float:
    """P/R with the empty-set convention: 1 when both sides empty, 0 when
    only the denominator side is."""
    if denominator:
        return numerator / denominator
    return 1.0 if empty_numerator == 0 else 0.0


def _metrics_from_counts(tp: int, n_pred: int, n_truth: int, n_union: int) -> Metrics:
    precision = _ratio(tp, n_pred, n_truth)
    recall = _ratio(tp, n_truth, n_pred)
    iou = tp / n_union if n_union else 1.0
    return Metrics(precision, recall, f1_score(precision, recall), iou)


def _pairs(pred: frozenset[str], truth: frozenset[str]) -> tuple[int, int, int, int]:
    inter = len(pred & truth)
    return inter, len(pred), len(truth), len(pred | truth)


TYPES = ("direct", "similarity", "alternative")


def evaluate_rag(
    predictions: list[RagPrediction],
    truth: GroundTruth,
    subset: set[str] | None = None,
    mode: str = "micro",
) -> dict[str, Metrics]:
    """Per-type and overall metrics.

    Micro aggregates (component, card) pairs over the whole subset; macro
    averages per-component metrics. Overall is reported both as the union of
    the three sets per component and as the concatenation of the per-type
    pair populations (which of the two a published table means is usually
    unstated, so both are here).
    """
    if mode not in ("micro", "macro"):
        raise ValueError(f"unknown mode {mode!r}")
    rows: dict[str, Metrics] = {}
    scoped = [
        p for p in predictions if subset is None or p.component_id in subset
    ]
    for p in scoped:
        if p.component_id not in truth.matches:
            raise ValueError(f"prediction for unknown component {p.component_id}")

    populations: dict[str, list[tuple[frozenset[str], frozenset[str]]]] = {
        t: [] for t in TYPES
    }
    union_pop: list[tuple[frozenset[str], frozenset[str]]] = []
    for p in scoped:
        labels = truth.matches[p.component_id]
        truth_sets = {
            "direct": labels.direct,
            "similarity": labels.similarity,
            "alternative": labels.alternative,
        }
        for t in TYPES:
            populations[t].append((p.by_type()[t], truth_sets[t]))
        union_pop.append(
            (p.direct | p.similarity | p.alternative, labels.any)
        )

    def aggregate(pop: list[tuple[frozenset[str], frozenset[str]]]) -> Metrics:
        if mode == "micro":
            tp = np_ = nt = nu = 0
            for pred, true in pop:
                i, a, b, u = _pairs(pred, true)
                tp, np_, nt, nu = tp + i, np_ + a, nt + b, nu + u
            return _metrics_from_counts(tp, np_, nt, nu)
        per = [_metrics_from_counts(*_pairs(pred, true)) for pred, true in pop]
        if not per:
            return Metrics(1.0, 1.0, 1.0, 1.0)
        n = len(per)
        return Metrics(
            sum(m.precision for m in per) / n,
            sum(m.recall for m in per) / n,
            sum(m.f1 for m in per) / n,
            sum(m.iou for m in per) / n,
        )

    for t in TYPES:
        rows[t] = aggregate(populations[t])
    rows["overall_union"] = aggregate(union_pop)
    rows["overall_concat"] = aggregate(
        [pair for t in TYPES for pair in populations[t]]
    )
    return rows


def coverage_curve(
    contexts: dict[str, list[str]],
    truth: GroundTruth,
    ks: tuple[int, ...] = (50, 100, 200),
) -> dict[int, float]:
    """Fraction of ground-truth matches found within the top-k context,
    aggregated over all components with at least one ground-truth match."""
    out: dict[int, float] = {}
    for k in ks:
        found = 0
        total = 0
        for pn, context_ids in contexts.items():
            want = truth.matches[pn].any
            if not want:
                continue
            total += len(want)
            found += len(want & set(context_ids[:k]))
        out[k] = found / total if total else 1.0
    return out


@dataclass
class RagRunResult:
    predictions: list[RagPrediction]
    contexts: dict[str, list[str]]
    subset: set[str]
    metrics_micro: dict[str, Metrics]
    metrics_macro: dict[str, Metrics]
    coverage: dict[int, float]
    dropped_total: int = 0
    noncompliant: int = 0
    report: dict = field(default_factory=dict)


def run_rag(
    components: list[PlmComponent],
    cards: list[QualificationCard],
    truth: GroundTruth,
    gateway: Backend,
    rules: RuleTable | None = None,
    subset_size: int | None = 675,
    k: int = 200,
    seed: int = 0,
) -> RagRunResult:
    rules = rules if rules is not None else RuleTable({})
    embedder = LocalEmbedder()
    cards_by_number = {card.number: card for card in cards}
    index = build_index(
        [
            (number, to_canonical_json(card, rules))
            for number, card in sorted(cards_by_number.items())
        ],
        embedder,
    )

    pool = sorted(c.part_number for c in components)
    if subset_size is not None and subset_size < len(pool):
        rng = random.Random(seed)
        subset = set(rng.sample(pool, subset_size))
    else:
        subset = set(pool)

    by_pn = {c.part_number: c for c in components}
    predictions: list[RagPrediction] = []
    contexts: dict[str, list[str]] = {}
    dropped = 0
    noncompliant = 0
    for pn in sorted(subset):
        component = by_pn[pn]
        context = build_context(
            component, index, cards_by_number, embedder, rules, n=k
        )
        contexts[pn] = [card.number for card in context]
        prediction = classify(component, context, gateway, rules)
        predictions.append(prediction)
        dropped += len(prediction.dropped_ids)
        noncompliant += 0 if prediction.compliant else 1

    micro = evaluate_rag(predictions, truth, subset, mode="micro")
    macro = evaluate_rag(predictions, truth, subset, mode="macro")
    coverage = coverage_curve(contexts, truth)
    report = {
        "subset_size": len(subset),
        "context_k": k,
        "mode": "micro",
        "rows": {name: metrics.as_dict() for name, metrics in micro.items()},
        "rows_macro": {name: metrics.as_dict() for name, metrics in macro.items()},
        "coverage": {str(kk): round(v, 6) for kk, v in coverage.items()},
        "dropped_ids": dropped,
        "noncompliant_responses": noncompliant,
    }
    return RagRunResult(
        predictions=predictions,
        contexts=contexts,
        subset=subset,
        metrics_micro=micro,
        metrics_macro=macro,
        coverage=coverage,
        dropped_total=dropped,
        noncompliant=noncompliant,
        report=report,
    )
