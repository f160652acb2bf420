"""Effort model comparing the manual process, the retrieval-augmented
baseline, and the structured pipeline.

All curves are affine in the component count: setup person-days plus
per-component minutes. A person-day is pinned to 480 minutes (8 hours);
that is the convention under which the published break-even and savings
figures hold, and every number here is exact rational arithmetic, not
floating point.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

MINUTES_PER_PERSON_DAY = 480


@dataclass(frozen=True)
class ApproachCost:
    name: str
    setup_person_days: Fraction
    per_component_minutes: Fraction

    def __post_init__(self) -> None:
        if self.setup_person_days < 0 or self.per_component_minutes < 0:
            raise ValueError(f"{self.name}: negative effort makes no sense")


AS_IS = ApproachCost("AsIs", Fraction(0), Fraction(40))
RAG = ApproachCost("Rag", Fraction(10), Fraction(15))
VKG_LLM = ApproachCost("VkgLlm", Fraction(60), Fraction(5))

DEFAULT_APPROACHES = (AS_IS, RAG, VKG_LLM)


def cumulative_effort(approach: ApproachCost, n_components: int | Fraction) -> Fraction:
    """Total effort in person-days for qualifying n components."""
    n = Fraction(n_components)
    if n < 0:
        raise ValueError("component count must be nonnegative")
    minutes = approach.setup_person_days * MINUTES_PER_PERSON_DAY
    minutes += approach.per_component_minutes * n
    return minutes / MINUTES_PER_PERSON_DAY


def break_even(a: ApproachCost, b: ApproachCost) -> Fraction | None:
    """Smallest n >= 0 where b's cumulative effort is at most a's; None when
    b never catches up."""
    if cumulative_effort(b, 0) <= cumulative_effort(a, 0):
        return Fraction(0)
    slope_a = a.per_component_minutes
    slope_b = b.per_component_minutes
    if slope_b >= slope_a:
        return None
    setup_gap = (b.setup_person_days - a.setup_person_days) * MINUTES_PER_PERSON_DAY
    return setup_gap / (slope_a - slope_b)


def relative_effort(approach: ApproachCost, baseline: ApproachCost,
                    n_components: int) -> Fraction:
    """approach / baseline at n; defined as 1 when both are zero (n = 0 with
    no setup on either side)."""
    base = cumulative_effort(baseline, n_components)
    ours = cumulative_effort(approach, n_components)
    if base == 0:
        return Fraction(1) if ours == 0 else Fraction(ours.numerator, 1)
    return ours / base


def savings(approach: ApproachCost, baseline: ApproachCost, n_components: int) -> Fraction:
    return 1 - relative_effort(approach, baseline, n_components)


@dataclass
class CostReport:
    rows: list[dict[str, str]]
    summary: dict

    def write_csv(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(
                handle,
                fieldnames=[
                    "n", "asis_days", "rag_days", "vkg_days",
                    "rag_relative", "vkg_relative",
                ],
            )
            writer.writeheader()
            writer.writerows(self.rows)

    def write_summary(self, path: Path) -> None:
        path.write_text(
            json.dumps(self.summary, sort_keys=True, indent=1), encoding="utf-8"
        )


def _round6(value: Fraction) -> str:
    return f"{float(value):.6g}"


def emit_cost_report(
    approaches: tuple[ApproachCost, ApproachCost, ApproachCost] = DEFAULT_APPROACHES,
    n_max: int = 10000,
    step: int = 100,
) -> CostReport:
    if not (n_max >= step >= 1):
        raise ValueError("need n_max >= step >= 1")
    as_is, rag, vkg = approaches
    rows = []
    for n in range(0, n_max + 1, step):
        rows.append(
            {
                "n": str(n),
                "asis_days": _round6(cumulative_effort(as_is, n)),
                "rag_days": _round6(cumulative_effort(rag, n)),
                "vkg_days": _round6(cumulative_effort(vkg, n)),
                "rag_relative": _round6(relative_effort(rag, as_is, n)),
                "vkg_relative": _round6(relative_effort(vkg, as_is, n)),
            }
        )
    checkpoints = {}
    for n in (5000, 10000):
        if n <= n_max:
            checkpoints[str(n)] = {
                "rag_savings": _round6(savings(rag, as_is, n)),
                "vkg_savings": _round6(savings(vkg, as_is, n)),
            }
    be_rag = break_even(as_is, rag)
    be_vkg = break_even(rag, vkg)
    summary = {
        "person_day_minutes": MINUTES_PER_PERSON_DAY,
        "approaches": {
            a.name: {
                "setup_person_days": str(a.setup_person_days),
                "per_component_minutes": str(a.per_component_minutes),
            }
            for a in approaches
        },
        "break_even": {
            "asis_vs_rag": None if be_rag is None else _round6(be_rag),
            "rag_vs_vkg": None if be_vkg is None else _round6(be_vkg),
        },
        "savings_vs_asis": checkpoints,
    }
    return CostReport(rows=rows, summary=summary)
