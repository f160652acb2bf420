"""Figure rendering for the report paths: effort curves and context-coverage
curves, written to files next to the delimited output.

Kept out of the computation modules on purpose: cost and RAG evaluation stay
pure CSV/JSON producers, and this module consumes exactly what they emit.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_cost_figure(rows: list[dict[str, str]], path: Path) -> Path:
    """Two panels: absolute person-days per approach, and effort relative to
    the manual baseline, both against component count."""
    n = [int(r["n"]) for r in rows]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 7), sharex=True)

    top.plot(n, [float(r["asis_days"]) for r in rows], label="manual (AS-IS)")
    top.plot(n, [float(r["rag_days"]) for r in rows], label="RAG")
    top.plot(n, [float(r["vkg_days"]) for r in rows], label="VKG+LLM")
    top.set_ylabel("cumulative effort [person-days]")
    top.legend()
    top.grid(True, alpha=0.3)

    bottom.axhline(1.0, color="gray", linewidth=0.8)
    bottom.plot(n, [float(r["rag_relative"]) for r in rows], label="RAG / AS-IS")
    bottom.plot(n, [float(r["vkg_relative"]) for r in rows], label="VKG+LLM / AS-IS")
    bottom.set_xlabel("number of components")
    bottom.set_ylabel("relative effort")
    bottom.legend()
    bottom.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_coverage_figure(coverage: dict[int, float], path: Path) -> Path:
    """Ground-truth matches found within the top-k retrieved context."""
    ks = sorted(coverage)
    values = [coverage[k] * 100 for k in ks]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, values, marker="o")
    for k, v in zip(ks, values):
        ax.annotate(f"{v:.1f}%", (k, v), textcoords="offset points", xytext=(0, 6))
    ax.set_xlabel("context size k")
    ax.set_ylabel("ground-truth matches covered [%]")
    ax.set_ylim(0, 105)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
