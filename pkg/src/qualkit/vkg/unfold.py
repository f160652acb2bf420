"""Query unfolding: graph patterns matched against mapping targets become
relational plans over the mapped sources.

Per pattern, every (assertion, triple template) whose predicate IRI matches
is an alternative; a combination picks one alternative per pattern. Within a
combination, shared variables become equi-joins: subject templates unify
when their skeletons are structurally equal (placeholder columns pair up;
structurally different IRI templates are assumed range-disjoint and prune
the combination), literal-valued bindings join on value, and constants turn
into scan filters. Patterns over the same subject variable, source and
template collapse into one scan when the subject columns cover a declared
unique key of the source. Multiple surviving combinations union; a pattern
with no matching mapping yields an empty-union plan and a diagnostic.

Literal equalities propagate across join keys into every reachable scan
filter, and from the required part into optional blocks, so a query pinned
to one part number never scans a whole table.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

from .mapping import MappingAssertion, MappingSet, TargetTriple
from .plan import Col, Const, Expr, Join, LeftJoin, Plan, PlanUnion, Project, Scan, Select, TemplateExpr
from .query import QueryAst
from .store import TableStore
from .terms import Iri, Literal, Template, TriplePattern, Var


@dataclass(frozen=True)
class _Spec:
    """How a variable is produced by one matched alternative."""

    kind: str  # "col" | "lit_tmpl" | "iri_tmpl" | "const_lit" | "const_iri"
    column: str | None = None
    template: Template | None = None
    value: str | None = None


@dataclass(frozen=True)
class _Alt:
    assertion: MappingAssertion
    triple: TargetTriple
    filters: tuple[tuple[str, str], ...]
    not_null: tuple[str, ...]
    subject_spec: _Spec | None
    object_spec: _Spec | None


@dataclass
class UnfoldResult:
    plan: Plan
    diagnostics: list[str] = field(default_factory=list)


class _Pruned(Exception):
    """Combination is statically empty (incompatible bindings)."""


def _term_spec(term: Iri | Literal | Template) -> _Spec:
    if isinstance(term, Iri):
        return _Spec(kind="const_iri", value=term.value)
    if isinstance(term, Literal):
        return _Spec(kind="const_lit", value=term.value)
    if term.kind == "iri":
        return _Spec(kind="iri_tmpl", template=term)
    columns = term.columns
    if len(term.parts) == 1 and len(columns) == 1:
        return _Spec(kind="col", column=columns[0])
    return _Spec(kind="lit_tmpl", template=term)


def _match_constant(term: Iri | Literal | Template, value: str, want_iri: bool
                    ) -> tuple[tuple[str, str], ...] | None:
    """Filters that make the template produce `value`, or None when impossible."""
    if isinstance(term, Iri):
        return () if want_iri and term.value == value else None
    if isinstance(term, Literal):
        return () if not want_iri and term.value == value else None
    if (term.kind == "iri") != want_iri:
        return None
    matched = term.match(value)
    if matched is None:
        return None
    return tuple(sorted(matched.items()))


def _match_pattern(pattern: TriplePattern, assertion: MappingAssertion,
                   triple: TargetTriple) -> _Alt | None:
    if not isinstance(pattern.predicate, Iri):
        raise ValueError("variable predicates are outside the supported subset")
    if triple.predicate.value != pattern.predicate.value:
        return None
    filters: list[tuple[str, str]] = []

    subject_spec = None
    if isinstance(pattern.subject, Var):
        subject_spec = _term_spec(triple.subject)
    else:
        matched = _match_constant(triple.subject, pattern.subject.value, want_iri=True)
        if matched is None:
            return None
        filters.extend(matched)

    object_spec = None
    if isinstance(pattern.object, Var):
        object_spec = _term_spec(triple.object)
    elif isinstance(pattern.object, Iri):
        matched = _match_constant(triple.object, pattern.object.value, want_iri=True)
        if matched is None:
            return None
        filters.extend(matched)
    else:
        matched = _match_constant(triple.object, pattern.object.value, want_iri=False)
        if matched is None:
            return None
        filters.extend(matched)

    not_null = set(triple.placeholder_columns())
    not_null.update(col for col, _ in filters)
    return _Alt(
        assertion=assertion,
        triple=triple,
        filters=tuple(filters),
        not_null=tuple(sorted(not_null)),
        subject_spec=subject_spec,
        object_spec=object_spec,
    )


def _alternatives(pattern: TriplePattern, mappings: MappingSet) -> list[_Alt]:
    alts = []
    for assertion in mappings.assertions:
        for triple in assertion.target:
            alt = _match_pattern(pattern, assertion, triple)
            if alt is not None:
                alts.append(alt)
    return alts


class _Group:
    """One scan in a combination; may serve several merged patterns."""

    def __init__(self, gid: int, table: str, where: tuple[tuple[str, str], ...]):
        self.gid = gid
        self.alias = f"s{gid}"
        self.table = table
        self.where = where
        self.columns: set[str] = set(c for c, _ in where)
        self.filters: dict[str, str] = dict(where)
        self.not_null: set[str] = set()
        self.intra: list[tuple[Expr, Expr]] = []

    def qualify(self, column: str) -> str:
        self.columns.add(column)
        return f"{self.alias}.{column}"

    def add_filter(self, column: str, value: str) -> None:
        self.columns.add(column)
        if column in self.filters and self.filters[column] != value:
            raise _Pruned()
        self.filters[column] = value


def _spec_expr(spec: _Spec, group: _Group) -> Expr:
    if spec.kind == "col":
        return Col(group.qualify(spec.column))
    if spec.kind in ("lit_tmpl", "iri_tmpl"):
        assert spec.template is not None
        return TemplateExpr(
            spec.template,
            tuple(group.qualify(c) for c in spec.template.columns),
        )
    assert spec.value is not None
    return Const(spec.value)


class _Combination:
    def __init__(self, store: TableStore | None):
        self.store = store
        self.groups: list[_Group] = []
        self.merge_index: dict[tuple, _Group] = {}
        # var -> list of (group, spec); first entry is the canonical producer
        self.bindings: dict[Var, list[tuple[_Group, _Spec]]] = {}
        self.inter: list[tuple[_Group, Expr, _Group, Expr]] = []

    def _new_group(self, table: str, where: tuple[tuple[str, str], ...]) -> _Group:
        group = _Group(len(self.groups), table, where)
        self.groups.append(group)
        return group

    def add_pattern(self, pattern: TriplePattern, alt: _Alt) -> None:
        source = alt.assertion.source
        group: _Group | None = None
        if (
            isinstance(pattern.subject, Var)
            and alt.subject_spec is not None
            and alt.subject_spec.kind == "iri_tmpl"
        ):
            template = alt.subject_spec.template
            assert template is not None
            merge_key = (
                pattern.subject,
                source.table,
                source.where,
                template.skeleton,
                template.columns,
            )
            group = self.merge_index.get(merge_key)
            if group is None and self.store is not None and self.store.has_unique_key(
                source.table, set(template.columns)
            ):
                group = self._new_group(source.table, source.where)
                self.merge_index[merge_key] = group
        if group is None:
            group = self._new_group(source.table, source.where)

        for column, value in alt.filters:
            group.add_filter(column, value)
        group.not_null.update(alt.not_null)
        for col in alt.not_null:
            group.columns.add(col)

        if alt.subject_spec is not None:
            assert isinstance(pattern.subject, Var)
            self._bind(pattern.subject, group, alt.subject_spec)
        if alt.object_spec is not None:
            assert isinstance(pattern.object, Var)
            self._bind(pattern.object, group, alt.object_spec)

    def _bind(self, var: Var, group: _Group, spec: _Spec) -> None:
        entries = self.bindings.setdefault(var, [])
        for other_group, other_spec in entries:
            if other_group is group and other_spec == spec:
                return  # same producer, nothing new
        if entries:
            self._constrain(entries[0], (group, spec))
            for other in entries[1:]:
                self._check_prunable(other, (group, spec))
        entries.append((group, spec))

    def _equate(self, ga: _Group, ea: Expr, gb: _Group, eb: Expr) -> None:
        if ga is gb:
            if ea != eb:
                ga.intra.append((ea, eb))
        else:
            self.inter.append((ga, ea, gb, eb))

    def _check_prunable(self, a: tuple[_Group, _Spec], b: tuple[_Group, _Spec]) -> None:
        (_, sa), (_, sb) = a, b
        iri_a = sa.kind in ("iri_tmpl", "const_iri")
        iri_b = sb.kind in ("iri_tmpl", "const_iri")
        if iri_a != iri_b:
            raise _Pruned()  # an IRI never equals a literal
        if sa.kind == "const_iri" and sb.kind == "const_iri" and sa.value != sb.value:
            raise _Pruned()
        if sa.kind == "const_lit" and sb.kind == "const_lit" and sa.value != sb.value:
            raise _Pruned()
        if sa.kind == "iri_tmpl" and sb.kind == "iri_tmpl":
            assert sa.template is not None and sb.template is not None
            if sa.template.skeleton != sb.template.skeleton:
                raise _Pruned()

    def _constrain(self, a: tuple[_Group, _Spec], b: tuple[_Group, _Spec]) -> None:
        self._check_prunable(a, b)
        (ga, sa), (gb, sb) = a, b
        if sa.kind == "iri_tmpl" and sb.kind == "iri_tmpl":
            assert sa.template is not None and sb.template is not None
            for ca, cb in zip(sa.template.columns, sb.template.columns):
                self._equate(ga, Col(ga.qualify(ca)), gb, Col(gb.qualify(cb)))
            return
        if sa.kind == "iri_tmpl" or sb.kind == "iri_tmpl":
            tmpl_side, const_side = (a, b) if sa.kind == "iri_tmpl" else (b, a)
            (gt, st), (_, sc) = tmpl_side, const_side
            assert st.template is not None
            if sc.kind != "const_iri":
                raise _Pruned()
            matched = st.template.match(sc.value or "")
            if matched is None:
                raise _Pruned()
            for column, value in matched.items():
                gt.add_filter(column, value)
            return
        # literal-valued on both sides
        if sb.kind == "const_lit":
            a, b = b, a
            (ga, sa), (gb, sb) = a, b
        if sa.kind == "const_lit":
            if sb.kind == "col":
                gb.add_filter(sb.column or "", sa.value or "")
            elif sb.kind == "lit_tmpl":
                assert sb.template is not None
                matched = sb.template.match(sa.value or "")
                if matched is None:
                    raise _Pruned()
                for column, value in matched.items():
                    gb.add_filter(column, value)
            # const_lit vs const_lit equality already checked
            return
        self._equate(ga, _spec_expr(sa, ga), gb, _spec_expr(sb, gb))

    def apply_filter(self, var: Var, value: str) -> None:
        entries = self.bindings.get(var)
        if not entries:
            raise _Pruned()
        group, spec = entries[0]
        self._constrain(entries[0], (group, _Spec(kind="const_lit", value=value)))

    def propagate_constants(self) -> None:
        """Push literal equalities across Col-Col join keys until fixpoint."""
        edges: list[tuple[str, _Group, str, _Group]] = []
        for ga, ea, gb, eb in self.inter:
            if isinstance(ea, Col) and isinstance(eb, Col):
                edges.append((ea.name, ga, eb.name, gb))
        for group in self.groups:
            for ea, eb in group.intra:
                if isinstance(ea, Col) and isinstance(eb, Col):
                    edges.append((ea.name, group, eb.name, group))
        changed = True
        while changed:
            changed = False
            known: dict[str, str] = {}
            for group in self.groups:
                for column, value in group.filters.items():
                    known[f"{group.alias}.{column}"] = value
            for qa, ga, qb, gb in edges:
                if qa in known and qb not in known:
                    gb.add_filter(qb.split(".", 1)[1], known[qa])
                    changed = True
                elif qb in known and qa not in known:
                    ga.add_filter(qa.split(".", 1)[1], known[qb])
                    changed = True

    def constant_of(self, var: Var) -> str | None:
        entries = self.bindings.get(var)
        if not entries:
            return None
        group, spec = entries[0]
        if spec.kind == "const_lit":
            return spec.value
        if spec.kind == "col":
            return group.filters.get(spec.column or "")
        return None

    def kind_of(self, var: Var) -> str | None:
        entries = self.bindings.get(var)
        if not entries:
            return None
        spec = entries[0][1]
        return "iri" if spec.kind in ("iri_tmpl", "const_iri") else "lit"

    def template_constants_of(self, var: Var) -> tuple[tuple, dict[int, str]] | None:
        """(skeleton, placeholder position -> pinned value) when the variable
        is template-bound and some of its placeholder columns are constant."""
        entries = self.bindings.get(var)
        if not entries:
            return None
        group, spec = entries[0]
        if spec.kind != "iri_tmpl" or spec.template is None:
            return None
        pinned = {
            i: group.filters[column]
            for i, column in enumerate(spec.template.columns)
            if column in group.filters
        }
        if not pinned:
            return None
        return spec.template.skeleton, pinned

    def apply_template_known(
        self, var: Var, skeleton: tuple, pinned: dict[int, str]
    ) -> None:
        """Pin placeholder columns of a template-bound variable whose value
        range is already constrained on the other side of a join."""
        entries = self.bindings.get(var)
        if not entries:
            return
        group, spec = entries[0]
        if spec.kind != "iri_tmpl" or spec.template is None:
            return
        if spec.template.skeleton != skeleton:
            raise _Pruned()  # disjoint template ranges can never join
        for i, value in pinned.items():
            group.add_filter(spec.template.columns[i], value)

    def build(self, schema: tuple[str, ...]) -> Plan:
        # Output expressions first: they register the columns each scan must
        # produce. Then constant propagation, which can add filter columns.
        outputs = []
        for name in schema:
            entries = self.bindings.get(Var(name))
            assert entries, f"unbound variable ?{name}"
            group, spec = entries[0]
            outputs.append((name, _spec_expr(spec, group)))
        self.propagate_constants()
        parts: list[Plan] = []
        for group in self.groups:
            scan: Plan = Scan(
                relation=group.table,
                alias=group.alias,
                columns=tuple(sorted(group.columns)),
                filters=tuple(sorted(group.filters.items())),
                not_null=tuple(sorted(group.not_null)),
            )
            if group.intra:
                scan = Select(scan, tuple(group.intra))
            parts.append(scan)

        joined: Plan | None = None
        joined_gids: set[int] = set()
        remaining = list(range(len(self.groups)))
        while remaining:
            if joined is None:
                gid = remaining.pop(0)
                joined = parts[gid]
                joined_gids.add(gid)
                continue
            keys: list[tuple[Expr, Expr]] = []
            pick = None
            for gid in remaining:
                keys = [
                    (ea, eb) if gb.gid == gid else (eb, ea)
                    for ga, ea, gb, eb in self.inter
                    if (ga.gid in joined_gids and gb.gid == gid)
                    or (gb.gid in joined_gids and ga.gid == gid)
                ]
                if keys:
                    pick = gid
                    break
            if pick is None:
                pick = remaining[0]
                keys = []
            remaining.remove(pick)
            joined = Join(joined, parts[pick], tuple(keys))
            joined_gids.add(pick)
        assert joined is not None
        return Project(joined, tuple(outputs))


def _bgp_schema(patterns: Iterable[TriplePattern]) -> tuple[str, ...]:
    names = sorted({v.name for p in patterns for v in p.variables})
    return tuple(names)


@dataclass
class _BgpResult:
    plan: Plan
    diagnostics: list[str]
    # var -> ("lit", value) | ("tmpl", skeleton, {placeholder position: value})
    constants: dict[Var, tuple]
    kinds: dict[Var, str]


def _unfold_bgp(
    patterns: tuple[TriplePattern, ...],
    filters: tuple[tuple[Var, str], ...],
    mappings: MappingSet,
    store: TableStore | None,
    known: dict[Var, tuple],
) -> _BgpResult:
    schema = _bgp_schema(patterns)
    diagnostics: list[str] = []
    per_pattern: list[list[_Alt]] = []
    for pattern in patterns:
        alts = _alternatives(pattern, mappings)
        if not alts:
            diagnostics.append(
                f"no mapping matches pattern {pattern.subject} "
                f"{pattern.predicate} {pattern.object}"
            )
        per_pattern.append(alts)

    if any(not alts for alts in per_pattern):
        return _BgpResult(PlanUnion((), schema), diagnostics, {}, {})

    total = 1
    for alts in per_pattern:
        total *= len(alts)
    if total > 20000:
        raise ValueError(
            f"query unfolds into {total} mapping combinations; refusing"
        )

    survivors: list[tuple[_Combination, Plan]] = []
    for choice in itertools.product(*per_pattern):
        combo = _Combination(store)
        try:
            for pattern, alt in zip(patterns, choice):
                combo.add_pattern(pattern, alt)
            for var, value in filters:
                combo.apply_filter(var, value)
            for var, info in known.items():
                if var not in combo.bindings:
                    continue
                if info[0] == "lit":
                    combo.apply_filter(var, info[1])
                else:
                    combo.apply_template_known(var, info[1], info[2])
            plan = combo.build(schema)
        except _Pruned:
            continue
        survivors.append((combo, plan))

    if not survivors:
        diagnostics.append("all mapping combinations were incompatible")
        return _BgpResult(PlanUnion((), schema), diagnostics, {}, {})

    kinds: dict[Var, str] = {}
    for name in schema:
        var = Var(name)
        seen = {combo.kind_of(var) for combo, _ in survivors}
        if len(seen) == 1 and None not in seen:
            kinds[var] = seen.pop()  # type: ignore[arg-type]

    if len(survivors) == 1:
        combo, plan = survivors[0]
        constants: dict[Var, tuple] = {}
        for name in schema:
            var = Var(name)
            literal = combo.constant_of(var)
            if literal is not None:
                constants[var] = ("lit", literal)
                continue
            template_info = combo.template_constants_of(var)
            if template_info is not None:
                constants[var] = ("tmpl", template_info[0], template_info[1])
        return _BgpResult(plan, diagnostics, constants, kinds)
    plans = tuple(plan for _, plan in survivors)
    return _BgpResult(PlanUnion(plans, schema), diagnostics, {}, kinds)


def _connected_components(
    patterns: tuple[TriplePattern, ...]
) -> list[tuple[TriplePattern, ...]]:
    remaining = list(patterns)
    components: list[tuple[TriplePattern, ...]] = []
    while remaining:
        component = [remaining.pop(0)]
        vars_seen = {v for v in component[0].variables}
        grew = True
        while grew:
            grew = False
            for pattern in list(remaining):
                if set(pattern.variables) & vars_seen:
                    component.append(pattern)
                    vars_seen.update(pattern.variables)
                    remaining.remove(pattern)
                    grew = True
        components.append(tuple(component))
    return components


def unfold(query: QueryAst, mappings: MappingSet,
           store: TableStore | None = None) -> UnfoldResult:
    required = _unfold_bgp(query.required, query.filters, mappings, store, known={})
    diagnostics = list(required.diagnostics)
    required_vars = {v.name for p in query.required for v in p.variables}

    rights: list[Plan] = []
    keys: list[tuple[tuple[Expr, Expr], ...]] = []
    block_ids: list[int] = []
    for block_id, block in enumerate(query.optional_blocks):
        for component in _connected_components(block):
            known = {
                var: value
                for var, value in required.constants.items()
                if any(var in p.variables for p in component)
            }
            inner = _unfold_bgp(component, (), mappings, store, known=known)
            diagnostics.extend(inner.diagnostics)
            shared = sorted(
                {v.name for p in component for v in p.variables} & required_vars
            )
            plan = inner.plan
            for name in shared:
                var = Var(name)
                left_kind = required.kinds.get(var)
                right_kind = inner.kinds.get(var)
                if left_kind and right_kind and left_kind != right_kind:
                    # An IRI never equals a literal: this component can never
                    # match, so the block never binds.
                    plan = PlanUnion((), _bgp_schema(component))
                    break
            rights.append(plan)
            keys.append(tuple((Col(name), Col(name)) for name in shared))
            block_ids.append(block_id)

    plan: Plan = required.plan
    if rights:
        plan = LeftJoin(plan, tuple(rights), tuple(keys), tuple(block_ids))
    outputs = tuple((v.name, Col(v.name)) for v in query.select_vars)
    return UnfoldResult(plan=Project(plan, outputs), diagnostics=diagnostics)
