"""In-memory relational store: named tables, virtual lens views, scan indexes.

Tables are column-named rows holding strings or None. A lens extends its
base table with one computed column: the rule-table lookup of a raw column,
falling back to the raw value when no rule matches. Lens rows and scan
indexes are cached per store version; replacing a table bumps the version,
so readers always see either the old or the new snapshot.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

Row = dict[str, "str | None"]


class StoreError(KeyError):
    pass


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[Row]
    unique_keys: list[tuple[str, ...]] = field(default_factory=list)

    def __post_init__(self) -> None:
        known = set(self.columns)
        for key in self.unique_keys:
            missing = set(key) - known
            if missing:
                raise StoreError(f"{self.name}: unique key uses unknown columns {missing}")


@dataclass(frozen=True)
class LensDef:
    name: str
    base_table: str
    rule_table: str
    raw_column: str
    output_column: str


class TableStore:
    def __init__(self) -> None:
        self._tables: dict[str, Table] = {}
        self._lenses: dict[str, LensDef] = {}
        self._lens_cache: dict[str, tuple[int, Table]] = {}
        self._index_cache: dict[tuple[str, str], tuple[int, dict[str | None, list[Row]]]] = {}
        self._lock = threading.Lock()
        self.version = 0

    # --- registration ---

    def register_table(self, table: Table) -> None:
        with self._lock:
            if table.name in self._lenses:
                raise StoreError(f"{table.name}: name already used by a lens")
            self._tables[table.name] = table
            self.version += 1

    def replace_table(self, table: Table) -> None:
        with self._lock:
            if table.name not in self._tables:
                raise StoreError(f"{table.name}: unknown table")
            self._tables[table.name] = table
            self.version += 1

    def register_lens(self, lens: LensDef) -> None:
        with self._lock:
            base = self._tables.get(lens.base_table)
            if base is None:
                raise StoreError(f"lens {lens.name}: unknown base table {lens.base_table!r}")
            rules = self._tables.get(lens.rule_table)
            if rules is None:
                raise StoreError(f"lens {lens.name}: unknown rule table {lens.rule_table!r}")
            if lens.raw_column not in base.columns:
                raise StoreError(
                    f"lens {lens.name}: base table has no column {lens.raw_column!r}"
                )
            for needed in ("raw_name", "canonical_name"):
                if needed not in rules.columns:
                    raise StoreError(
                        f"lens {lens.name}: rule table lacks column {needed!r}"
                    )
            if lens.output_column in base.columns:
                raise StoreError(
                    f"lens {lens.name}: output column {lens.output_column!r} exists in base"
                )
            self._lenses[lens.name] = lens
            self.version += 1

    # --- access ---

    def table_names(self) -> list[str]:
        return sorted(self._tables) + sorted(self._lenses)

    def relation(self, name: str) -> Table:
        table = self._tables.get(name)
        if table is not None:
            return table
        lens = self._lenses.get(name)
        if lens is not None:
            return self._lens_table(lens)
        raise StoreError(f"unknown relation {name!r}")

    def _lens_table(self, lens: LensDef) -> Table:
        cached = self._lens_cache.get(lens.name)
        if cached is not None and cached[0] == self.version:
            return cached[1]
        base = self._tables[lens.base_table]
        rules = self._tables[lens.rule_table]
        lookup = {
            row["raw_name"]: row["canonical_name"]
            for row in rules.rows
            if row.get("raw_name") is not None
        }
        rows: list[Row] = []
        for row in base.rows:
            raw = row.get(lens.raw_column)
            extended = dict(row)
            extended[lens.output_column] = lookup.get(raw, raw) if raw is not None else None
            rows.append(extended)
        table = Table(
            name=lens.name,
            columns=base.columns + [lens.output_column],
            rows=rows,
            unique_keys=list(base.unique_keys),
        )
        self._lens_cache[lens.name] = (self.version, table)
        return table

    def scan(self, name: str, filters: dict[str, str | None] | None = None) -> list[Row]:
        """Rows matching the equality filters; single-column filters use a
        lazily built per-version index."""
        table = self.relation(name)
        if not filters:
            return table.rows
        items = sorted(filters.items())
        first_col, first_val = items[0]
        rows = self._indexed(name, table, first_col).get(first_val, [])
        for col, val in items[1:]:
            rows = [r for r in rows if r.get(col) == val]
        return rows

    def _indexed(self, name: str, table: Table, column: str) -> dict[str | None, list[Row]]:
        cache_key = (name, column)
        cached = self._index_cache.get(cache_key)
        if cached is not None and cached[0] == self.version:
            return cached[1]
        if column not in table.columns:
            raise StoreError(f"{name}: unknown column {column!r}")
        index: dict[str | None, list[Row]] = {}
        for row in table.rows:
            index.setdefault(row.get(column), []).append(row)
        self._index_cache[cache_key] = (self.version, index)
        return index

    def has_unique_key(self, name: str, columns: set[str]) -> bool:
        """True when some declared unique key of the relation is covered by `columns`."""
        table = self.relation(name)
        return any(set(key) <= columns for key in table.unique_keys)
