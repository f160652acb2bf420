"""Relational plans produced by unfolding, and their in-memory evaluator.

Bag semantics throughout: nothing deduplicates, so a pattern matched by two
mappings legitimately yields two rows. evaluate() returns rows sorted by all
projected columns (None sorts last) so results are deterministic.

LeftJoin carries one or more independent right-hand components with their
own equi-keys: an OPTIONAL block binds as a whole, so a left row extends
with the cross product of component matches when every component has at
least one, and pads every component's columns with nulls otherwise. Each
component is probed through a hash map, which avoids materializing the
cartesian product of an optional block that touches several relations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union as TUnion

from .store import TableStore
from .terms import Template

Value = TUnion[str, None]


@dataclass(frozen=True)
class Col:
    name: str


@dataclass(frozen=True)
class Const:
    value: str


@dataclass(frozen=True)
class TemplateExpr:
    template: Template
    columns: tuple[str, ...]


Expr = TUnion[Col, Const, TemplateExpr]


@dataclass(frozen=True)
class Scan:
    relation: str
    alias: str
    columns: tuple[str, ...]
    filters: tuple[tuple[str, str], ...] = ()
    not_null: tuple[str, ...] = ()

    @property
    def output_columns(self) -> tuple[str, ...]:
        return tuple(f"{self.alias}.{c}" for c in self.columns)


@dataclass(frozen=True)
class Select:
    child: "Plan"
    predicates: tuple[tuple[Expr, Expr], ...]


@dataclass(frozen=True)
class Project:
    child: "Plan"
    outputs: tuple[tuple[str, Expr], ...]


@dataclass(frozen=True)
class Join:
    left: "Plan"
    right: "Plan"
    keys: tuple[tuple[Expr, Expr], ...]


@dataclass(frozen=True)
class LeftJoin:
    """Left outer join against one or more optional blocks.

    `rights` holds one plan per connected component of the optional blocks;
    `blocks[i]` says which block component i belongs to. A block binds as a
    whole: all of its components must match or all of its columns are null.
    """

    left: "Plan"
    rights: tuple["Plan", ...]
    keys: tuple[tuple[tuple[Expr, Expr], ...], ...]  # per right component
    blocks: tuple[int, ...] = ()


@dataclass(frozen=True)
class PlanUnion:
    children: tuple["Plan", ...]
    columns: tuple[str, ...]


Plan = TUnion[Scan, Select, Project, Join, LeftJoin, PlanUnion]


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[tuple]

    def as_dicts(self) -> list[dict[str, Value]]:
        return [dict(zip(self.columns, row)) for row in self.rows]


def _compile_expr(expr: Expr, index: dict[str, int]) -> Callable[[tuple], Value]:
    if isinstance(expr, Col):
        i = index[expr.name]
        return lambda row: row[i]
    if isinstance(expr, Const):
        value = expr.value
        return lambda row: value
    positions = [index[c] for c in expr.columns]
    template = expr.template
    names = template.columns

    def render(row: tuple) -> Value:
        values = {}
        for name, pos in zip(names, positions):
            cell = row[pos]
            if cell is None:
                return None
            values[name] = cell
        return template.expand(values)

    return render


class EvalCache:
    """Memo for filterless subplan results, keyed by (plan, store version).

    Filtered scans are already narrow thanks to indexes; the expensive
    repeated work is re-materializing whole-table subtrees (lens reads,
    optional metadata blocks) on every query, and those subtrees are
    value-identical across queries, so plan equality is a sound key.
    """

    def __init__(self) -> None:
        self.results: dict[tuple[Plan, int], tuple[list[str], list[tuple]]] = {}

    def is_static(self, plan: Plan) -> bool:
        if isinstance(plan, Scan):
            return not plan.filters
        if isinstance(plan, (Select, Project)):
            return self.is_static(plan.child)
        if isinstance(plan, Join):
            return self.is_static(plan.left) and self.is_static(plan.right)
        if isinstance(plan, LeftJoin):
            return self.is_static(plan.left) and all(
                self.is_static(r) for r in plan.rights
            )
        return all(self.is_static(c) for c in plan.children)


def _index(columns: list[str]) -> dict[str, int]:
    # First occurrence wins: a LeftJoin output repeats shared columns and the
    # left (always bound) copy is the one later projections must read.
    index: dict[str, int] = {}
    for i, c in enumerate(columns):
        index.setdefault(c, i)
    return index


def _eval(plan: Plan, store: TableStore,
          cache: EvalCache | None = None) -> tuple[list[str], list[tuple]]:
    if cache is not None and cache.is_static(plan):
        key = (plan, store.version)
        hit = cache.results.get(key)
        if hit is not None:
            return hit
        result = _eval_inner(plan, store, cache)
        cache.results[key] = result
        return result
    return _eval_inner(plan, store, cache)


def _eval_inner(plan: Plan, store: TableStore,
                cache: EvalCache | None) -> tuple[list[str], list[tuple]]:
    if isinstance(plan, Scan):
        rows = store.scan(plan.relation, dict(plan.filters) if plan.filters else None)
        needed = list(plan.columns)
        out = []
        if plan.not_null:
            checks = list(plan.not_null)
            for row in rows:
                if all(row.get(c) is not None for c in checks):
                    out.append(tuple(row.get(c) for c in needed))
        else:
            out = [tuple(row.get(c) for c in needed) for row in rows]
        return list(plan.output_columns), out

    if isinstance(plan, Select):
        columns, rows = _eval(plan.child, store, cache)
        idx = _index(columns)
        compiled = [
            (_compile_expr(a, idx), _compile_expr(b, idx)) for a, b in plan.predicates
        ]
        kept = []
        for row in rows:
            ok = True
            for fa, fb in compiled:
                va, vb = fa(row), fb(row)
                if va is None or vb is None or va != vb:
                    ok = False
                    break
            if ok:
                kept.append(row)
        return columns, kept

    if isinstance(plan, Project):
        columns, rows = _eval(plan.child, store, cache)
        idx = _index(columns)
        getters = [_compile_expr(expr, idx) for _, expr in plan.outputs]
        out_rows = [tuple(g(row) for g in getters) for row in rows]
        return [name for name, _ in plan.outputs], out_rows

    if isinstance(plan, Join):
        lcols, lrows = _eval(plan.left, store, cache)
        rcols, rrows = _eval(plan.right, store, cache)
        columns = lcols + rcols
        if not plan.keys:
            return columns, [lr + rr for lr in lrows for rr in rrows]
        lidx, ridx = _index(lcols), _index(rcols)
        lkeys = [_compile_expr(a, lidx) for a, _ in plan.keys]
        rkeys = [_compile_expr(b, ridx) for _, b in plan.keys]
        table: dict[tuple, list[tuple]] = {}
        for rr in rrows:
            key = tuple(f(rr) for f in rkeys)
            if None in key:
                continue
            table.setdefault(key, []).append(rr)
        out = []
        for lr in lrows:
            key = tuple(f(lr) for f in lkeys)
            if None in key:
                continue
            for rr in table.get(key, ()):
                out.append(lr + rr)
        return columns, out

    if isinstance(plan, LeftJoin):
        lcols, lrows = _eval(plan.left, store, cache)
        lidx = _index(lcols)
        block_ids = plan.blocks or tuple(range(len(plan.rights)))
        components = []
        for right, keys, block in zip(plan.rights, plan.keys, block_ids):
            rcols, rrows = _eval(right, store, cache)
            ridx = _index(rcols)
            lkeys = [_compile_expr(a, lidx) for a, _ in keys]
            rkeys = [_compile_expr(b, ridx) for _, b in keys]
            table: dict[tuple, list[tuple]] = {}
            for rr in rrows:
                key = tuple(f(rr) for f in rkeys)
                if None in key:
                    continue
                table.setdefault(key, []).append(rr)
            components.append((block, rcols, lkeys, table, rrows))
        columns = list(lcols)
        for _, rcols, _, _, _ in components:
            columns.extend(rcols)
        out = []
        for lr in lrows:
            # Gather matches per component, then decide bind/null per block.
            found_per_component = []
            blocks_failed: set[int] = set()
            for block, rcols, lkeys, table, rrows in components:
                if lkeys:
                    key = tuple(f(lr) for f in lkeys)
                    found = table.get(key, []) if None not in key else []
                else:
                    found = rrows
                if not found:
                    blocks_failed.add(block)
                found_per_component.append(found)
            extensions: list[tuple] = [()]
            for (block, rcols, _, _, _), found in zip(components, found_per_component):
                if block in blocks_failed:
                    pad = (None,) * len(rcols)
                    extensions = [ext + pad for ext in extensions]
                else:
                    extensions = [ext + rr for ext in extensions for rr in found]
            for ext in extensions:
                out.append(lr + ext)
        return columns, out

    if isinstance(plan, PlanUnion):
        columns = list(plan.columns)
        rows: list[tuple] = []
        for child in plan.children:
            ccols, crows = _eval(child, store, cache)
            if ccols != columns:
                raise ValueError(f"union child schema {ccols} != {columns}")
            rows.extend(crows)
        return columns, rows

    raise TypeError(f"unknown plan node {type(plan).__name__}")


def _sort_key(row: tuple) -> tuple:
    return tuple((v is None, v if v is not None else "") for v in row)


def evaluate(plan: Plan, store: TableStore,
             cache: EvalCache | None = None) -> ResultTable:
    columns, rows = _eval(plan, store, cache)
    # sorted copy: cached row lists must never be mutated
    return ResultTable(columns=columns, rows=sorted(rows, key=_sort_key))
