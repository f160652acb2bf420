"""Qualification retrieval: direct and by-similarity matching through the
graph engine, alternative candidates through family rules plus cosine
ranking, composed into the cascade.

Direct and by-similarity run the graph query (the by-similarity variant
binds the card part number to a variable instead of the component's and the
inequality is applied on the result). Cards whose part number has not been
extracted yet are excluded from both, since equality against a missing value
is undecidable, but they remain eligible as alternative candidates. The
alternative stage only runs when direct and by-similarity both came back
empty, and its output is a ranked suggestion list for expert review, never
an automatic verdict.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from .model import (
    CascadeStage,
    MatchType,
    PlmComponent,
    QualMatch,
    QualificationCard,
    QualificationReport,
    RuleTable,
    ValidationError,
)
from .ontology import build_store, default_mappings, replace_rules
from .vecindex import LocalEmbedder, VectorIndex, build_index, to_canonical_json, top_k
from .vkg import QueryAst, TableStore, evaluate, parse_query, unfold
from .vkg.plan import (
    EvalCache,
    Join,
    LeftJoin,
    Plan,
    PlanUnion,
    Project,
    Scan,
    Select,
)
from .vkg.terms import Literal, TriplePattern

DEFAULT_K = 200
PIN_WINDOW_UM = Decimal("5")


class PnNotFound(KeyError):
    def __init__(self, pn: str):
        super().__init__(pn)
        self.pn = pn

    def __str__(self) -> str:
        return f"part number {self.pn!r} not found in the component database"


@dataclass(frozen=True)
class AttributeEquals:
    attribute: str


@dataclass(frozen=True)
class AbsoluteDifferenceWithin:
    attribute: str
    bound: Decimal

    def __post_init__(self) -> None:
        if self.bound < 0:
            raise ValidationError("bound must be nonnegative")


Comparator = AttributeEquals | AbsoluteDifferenceWithin


@dataclass(frozen=True)
class AlternativeRule:
    family: str  # "*" is the generic fallback
    predicate: tuple[Comparator, ...]


FP_RULE = AlternativeRule(
    family="FP",
    predicate=(
        AttributeEquals("package_code"),
        AttributeEquals("pitch"),
        AbsoluteDifferenceWithin("pin_dimension", PIN_WINDOW_UM),
        AttributeEquals("assembly_type"),
    ),
)

GENERIC_RULE = AlternativeRule(
    family="*",
    predicate=(
        AttributeEquals("package_code"),
        AttributeEquals("manufacturer"),
    ),
)

DEFAULT_RULES: tuple[AlternativeRule, ...] = (FP_RULE, GENERIC_RULE)


def rule_for_family(family: str, rules: tuple[AlternativeRule, ...] = DEFAULT_RULES
                    ) -> AlternativeRule:
    for rule in rules:
        if rule.family == family:
            return rule
    for rule in rules:
        if rule.family == "*":
            return rule
    raise ValidationError(f"no alternative rule for family {family!r}")


def _attribute(entity: PlmComponent | QualificationCard, name: str,
               rules: RuleTable):
    if name == "manufacturer":
        return rules.lookup(entity.manufacturer_name)
    return getattr(entity, name)


def component_rule_attributes_missing(
    component: PlmComponent, rule: AlternativeRule, rules: RuleTable
) -> list[str]:
    missing = []
    for comparator in rule.predicate:
        if _attribute(component, comparator.attribute, rules) is None:
            missing.append(comparator.attribute)
    return missing


def passes_rule(component: PlmComponent, card: QualificationCard,
                rule: AlternativeRule, rules: RuleTable) -> bool:
    for comparator in rule.predicate:
        left = _attribute(component, comparator.attribute, rules)
        right = _attribute(card, comparator.attribute, rules)
        if left is None or right is None:
            return False
        if isinstance(comparator, AttributeEquals):
            if left != right:
                return False
        else:
            if abs(left - right) > comparator.bound:
                return False
    return True


def passes_family_rule(component: PlmComponent, card: QualificationCard,
                       rules: RuleTable,
                       rule_set: tuple[AlternativeRule, ...] = DEFAULT_RULES) -> bool:
    return passes_rule(component, card, rule_for_family(component.family, rule_set), rules)


_DIRECT_QUERY_TEMPLATE = """\
PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>
PREFIX tasi: <http://tasi.com#>

SELECT ?q_number \x00SEL\x00?package_nbr ?subpackage_nbr ?manufacturer_name
       ?generic_pn ?conf_coating ?conf_substrate ?conf_mounting
       ?q_description ?q_status ?q_type ?q_documents
WHERE {
  ?c a tasi:PLMDB_COMPONENT; tasi:componentPn "\x00PN\x00";
     tasi:pkgCode ?package_nbr;
     tasi:spkgCode ?subpackage_nbr;
     tasi:manufacturerName ?manufacturer_name .
  ?qc a tasi:QUALIFICATION_CARD; tasi:qID ?q_number;
     tasi:qualificationPn \x00QPN\x00;
     tasi:pkgCode ?package_nbr;
     tasi:spkgCode ?subpackage_nbr;
     tasi:manufacturerName ?manufacturer_name .
  OPTIONAL {
      ?qc tasi:status ?q_status; tasi:documentation ?q_documents;
          tasi:qualificationDesc ?q_description;
          tasi:qualificationType ?q_type;
          tasi:conformalCoating ?conf_coating;
          tasi:substrateMaterial ?conf_substrate;
          tasi:assemblyType ?conf_mounting .
      ?c tasi:componentGenPn ?generic_pn .
  }
}
"""

_SENTINEL_PN = "\x00PN\x00"
_SENTINEL_QPN = "\x00QPN\x00"
_SENTINEL_SEL = "\x00SEL\x00"


def _query_ast(bind_card_pn: bool) -> QueryAst:
    text = _DIRECT_QUERY_TEMPLATE.replace(
        _SENTINEL_QPN, f'"{_SENTINEL_PN}"' if bind_card_pn else "?q_pn"
    ).replace(_SENTINEL_SEL, "" if bind_card_pn else "?q_pn ")
    return parse_query(text)


_DIRECT_AST = _query_ast(bind_card_pn=True)
_SIMILARITY_AST = _query_ast(bind_card_pn=False)


def _substitute_filters(plan: Plan, sentinel: str, value: str) -> Plan:
    """Rebuild the plan with `sentinel` scan-filter values replaced by `value`.

    Untouched subtrees come back as the same objects, so evaluation-cache
    entries for the static parts keep hitting. The sentinel contains NUL and
    can never collide with real cell data.
    """
    import dataclasses

    if isinstance(plan, Scan):
        if any(v == sentinel for _, v in plan.filters):
            filters = tuple(
                (c, value if v == sentinel else v) for c, v in plan.filters
            )
            return dataclasses.replace(plan, filters=filters)
        return plan
    if isinstance(plan, Select):
        child = _substitute_filters(plan.child, sentinel, value)
        return plan if child is plan.child else dataclasses.replace(plan, child=child)
    if isinstance(plan, Project):
        child = _substitute_filters(plan.child, sentinel, value)
        return plan if child is plan.child else dataclasses.replace(plan, child=child)
    if isinstance(plan, Join):
        left = _substitute_filters(plan.left, sentinel, value)
        right = _substitute_filters(plan.right, sentinel, value)
        if left is plan.left and right is plan.right:
            return plan
        return dataclasses.replace(plan, left=left, right=right)
    if isinstance(plan, LeftJoin):
        left = _substitute_filters(plan.left, sentinel, value)
        rights = tuple(_substitute_filters(r, sentinel, value) for r in plan.rights)
        if left is plan.left and all(a is b for a, b in zip(rights, plan.rights)):
            return plan
        return dataclasses.replace(plan, left=left, rights=rights)
    if isinstance(plan, PlanUnion):
        children = tuple(
            _substitute_filters(c, sentinel, value) for c in plan.children
        )
        if all(a is b for a, b in zip(children, plan.children)):
            return plan
        return dataclasses.replace(plan, children=children)
    raise TypeError(type(plan).__name__)


def _instantiate(ast: QueryAst, pn: str) -> QueryAst:
    def fix(patterns: tuple[TriplePattern, ...]) -> tuple[TriplePattern, ...]:
        out = []
        for p in patterns:
            if isinstance(p.object, Literal) and p.object.value == _SENTINEL_PN:
                p = TriplePattern(p.subject, p.predicate, Literal(pn))
            out.append(p)
        return tuple(out)

    return QueryAst(
        select_vars=ast.select_vars,
        required=fix(ast.required),
        optional_blocks=tuple(fix(block) for block in ast.optional_blocks),
        filters=ast.filters,
        prefixes=ast.prefixes,
    )


class RetrievalEngine:
    """Read-facing facade over one dataset snapshot: components, cards, the
    cleaning-rule table, the graph store, and a lazily built card index."""

    def __init__(
        self,
        components: list[PlmComponent],
        cards: list[QualificationCard],
        rules: RuleTable,
        alternative_rules: tuple[AlternativeRule, ...] = DEFAULT_RULES,
    ):
        self.components_by_pn: dict[str, PlmComponent] = {}
        for component in components:
            if component.part_number in self.components_by_pn:
                raise ValidationError(
                    f"duplicate part_number {component.part_number!r}; "
                    "retrieval is keyed by part number"
                )
            self.components_by_pn[component.part_number] = component
        self.cards_by_number = {card.number: card for card in cards}
        self.rules = rules
        self.alternative_rules = alternative_rules
        self.store: TableStore = build_store(components, cards, rules)
        self.mappings = default_mappings()
        self.embedder = LocalEmbedder()
        self._index: VectorIndex | None = None
        self._eval_cache = EvalCache()
        # Unfolding is part-number independent up to scan-filter values, so
        # the two retrieval plans are built once against the sentinel.
        self._plan_cache: dict[str, Plan] = {}

    # --- dataset maintenance ---

    def component(self, pn: str) -> PlmComponent:
        component = self.components_by_pn.get(pn)
        if component is None:
            raise PnNotFound(pn)
        return component

    def set_rules(self, rules: RuleTable) -> None:
        self.rules = rules
        replace_rules(self.store, rules)
        self._index = None  # canonical JSON renders canonical manufacturers

    def update_card(self, card: QualificationCard) -> None:
        if card.number not in self.cards_by_number:
            raise KeyError(card.number)
        self.cards_by_number[card.number] = card
        from .ontology import QC_TABLE, card_row
        from .vkg import Table
        from . import csvio

        self.store.replace_table(
            Table(
                name=QC_TABLE,
                columns=list(csvio.QC_HEADER),
                rows=[card_row(q) for q in self.cards_by_number.values()],
                unique_keys=[("number",)],
            )
        )
        self._index = None

    def card_index(self) -> VectorIndex:
        if self._index is None:
            entries = [
                (number, to_canonical_json(card, self.rules))
                for number, card in sorted(self.cards_by_number.items())
            ]
            self._index = build_index(entries, self.embedder)
        return self._index

    # --- retrieval operations ---

    def _run_template(self, name: str, ast: QueryAst, pn: str
                      ) -> list[dict[str, str | None]]:
        plan = self._plan_cache.get(name)
        if plan is None:
            plan = unfold(_instantiate(ast, _SENTINEL_PN), self.mappings, self.store).plan
            self._plan_cache[name] = plan
        bound = _substitute_filters(plan, _SENTINEL_PN, pn)
        return evaluate(bound, self.store, self._eval_cache).as_dicts()

    def find_direct(self, pn: str) -> list[QualMatch]:
        self.component(pn)
        rows = self._run_template("direct", _DIRECT_AST, pn)
        numbers = sorted({row["q_number"] for row in rows if row["q_number"]})
        return [
            QualMatch(self.cards_by_number[n], MatchType.DIRECT) for n in numbers
        ]

    def find_by_similarity(self, pn: str) -> list[QualMatch]:
        self.component(pn)
        rows = self._run_template("similarity", _SIMILARITY_AST, pn)
        numbers = sorted(
            {
                row["q_number"]
                for row in rows
                if row["q_number"] and row["q_pn"] != pn
            }
        )
        return [
            QualMatch(self.cards_by_number[n], MatchType.SIMILARITY) for n in numbers
        ]

    def find_alternative(
        self,
        component: PlmComponent,
        k: int = DEFAULT_K,
        excluded: set[str] | None = None,
    ) -> tuple[list[QualMatch], list[str]]:
        """Ranked rule-compliant candidates and diagnostics."""
        rule = rule_for_family(component.family, self.alternative_rules)
        missing = component_rule_attributes_missing(component, rule, self.rules)
        if missing:
            return [], [
                f"component {component.part_number} lacks attributes required "
                f"by the {rule.family!r} rule: {', '.join(missing)}"
            ]
        excluded = excluded or set()
        candidates = {
            number
            for number, card in self.cards_by_number.items()
            if number not in excluded
            and passes_rule(component, card, rule, self.rules)
        }
        if not candidates:
            return [], []
        query_vector = self.embedder.embed(to_canonical_json(component, self.rules))
        ranked = top_k(
            query_vector,
            self.card_index(),
            k=k,
            candidate_filter=candidates,
            query_tag=self.embedder.tag,
        )
        return [
            QualMatch(self.cards_by_number[n], MatchType.ALTERNATIVE, score=score)
            for n, score in ranked
        ], []

    def retrieve(self, pn: str, k: int = DEFAULT_K) -> QualificationReport:
        component = self.component(pn)
        direct = self.find_direct(pn)
        similarity = self.find_by_similarity(pn)
        alternative: list[QualMatch] = []
        if not direct and not similarity:
            alternative, _ = self.find_alternative(component, k=k)
        if direct:
            stage = CascadeStage.DIRECT_FOUND
        elif similarity:
            stage = CascadeStage.SIMILARITY_FOUND
        elif alternative:
            stage = CascadeStage.ALTERNATIVE_PROPOSED
        else:
            stage = CascadeStage.NONE_FOUND
        return QualificationReport(
            component=component,
            direct=tuple(direct),
            similarity=tuple(similarity),
            alternative=tuple(alternative),
            cascade_stage=stage,
        )


def brute_force_retrieve(
    pn: str,
    components: list[PlmComponent],
    cards: list[QualificationCard],
    rules: RuleTable,
    k: int = DEFAULT_K,
) -> QualificationReport:
    """Straight-line reference implementation: no graph engine, no index.

    Kept deliberately independent of RetrievalEngine so the two can check
    each other; only the embedding function is shared (ranking must agree
    on scores to be comparable at all).
    """
    component = None
    for c in components:
        if c.part_number == pn:
            component = c
            break
    if component is None:
        raise PnNotFound(pn)

    canonical = rules.lookup(component.manufacturer_name)
    direct = []
    similarity = []
    for card in sorted(cards, key=lambda q: q.number):
        if card.part_number is None:
            continue
        if (
            card.package_code == component.package_code
            and card.subpackage_code == component.subpackage_code
            and rules.lookup(card.manufacturer_name) == canonical
        ):
            if card.part_number == pn:
                direct.append(QualMatch(card, MatchType.DIRECT))
            else:
                similarity.append(QualMatch(card, MatchType.SIMILARITY))

    alternative: list[QualMatch] = []
    if not direct and not similarity:
        rule = rule_for_family(component.family)
        if not component_rule_attributes_missing(component, rule, rules):
            embedder = LocalEmbedder()
            query = embedder.embed(to_canonical_json(component, rules))
            scored = []
            for card in cards:
                if passes_rule(component, card, rule, rules):
                    vector = embedder.embed(to_canonical_json(card, rules))
                    scored.append((-float(vector @ query), card.number, card))
            scored.sort()
            alternative = [
                QualMatch(card, MatchType.ALTERNATIVE, score=-negative)
                for negative, _, card in scored[:k]
            ]

    if direct:
        stage = CascadeStage.DIRECT_FOUND
    elif similarity:
        stage = CascadeStage.SIMILARITY_FOUND
    elif alternative:
        stage = CascadeStage.ALTERNATIVE_PROPOSED
    else:
        stage = CascadeStage.NONE_FOUND
    return QualificationReport(
        component=component,
        direct=tuple(direct),
        similarity=tuple(similarity),
        alternative=tuple(alternative),
        cascade_stage=stage,
    )
