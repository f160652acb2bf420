"""qualctl: one binary over the whole pipeline.

Subcommands mirror the phases: gen (synthetic corpus), clean (rules + PN
recovery), query (cascade for one part number), rag (baseline evaluation),
eval (cascade scored against ground truth), cost (effort model), serve
(HTTP service). Exit codes: 0 success, 1 usage, 2 data or validation
problem, 3 transport failure. Every run writes a manifest with input
fingerprints next to its outputs.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import httpx

from . import csvio
from .cleaning import (
    PipelineDiagnostics,
    accept_all_valid,
    extract_unique_manufacturers,
    propose_rules,
    review_queue_to_json,
    run_pn_pipeline,
)
from .corpus import CorpusConfig, emit, generate, truth_from_json
from .cost import (
    AS_IS,
    RAG,
    VKG_LLM,
    ApproachCost,
    emit_cost_report,
)
from .llm import HttpBackend, MockBackend, TransportError
from .model import RuleTable, ValidationError
from .rag import RagPrediction, evaluate_rag, run_rag
from .retrieval import DEFAULT_K, PnNotFound, RetrievalEngine
from .service import report_json
from .vkg import MappingParseError, QueryParseError, StoreError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1, not argparse's default 2
        raise UsageError(message)


class CliError(Exception):
    def __init__(self, code: str, message: str, exit_code: int = 2):
        super().__init__(message)
        self.code = code
        self.exit_code = exit_code


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def write_manifest(
    directory: Path,
    command: str,
    args: dict,
    inputs: list[Path],
    started: str,
    exit_code: int,
) -> Path:
    manifest = {
        "command": command,
        "args": {k: str(v) for k, v in sorted(args.items())},
        "input_fingerprints": {
            str(p): _sha256(p) for p in inputs if p is not None and p.exists()
        },
        "started": started,
        "finished": _utcnow(),
        "exit_code": exit_code,
    }
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1), encoding="utf-8")
    return path


def _load_config(path: str | None) -> configparser.ConfigParser:
    config = configparser.ConfigParser()
    if path:
        if not Path(path).exists():
            raise CliError("config_not_found", f"config file {path!r} does not exist")
        config.read(path)
    return config


def _corpus_config(args: argparse.Namespace, file_config: configparser.ConfigParser
                   ) -> CorpusConfig:
    section = file_config["corpus"] if file_config.has_section("corpus") else {}

    def pick(name: str, cast, default):
        if getattr(args, name, None) is not None:
            return getattr(args, name)
        if name in section:
            return cast(section[name])
        return default

    base = CorpusConfig(n_components=1)  # defaults donor
    return CorpusConfig(
        n_components=pick("components", int, 1000),
        n_qualifications=pick("quals", int, None),
        seed=pick("seed", int, 0),
        never_qualified_fraction=pick(
            "never_qualified_fraction", float, base.never_qualified_fraction
        ),
        avg_direct=pick("avg_direct", float, base.avg_direct),
        avg_similarity=pick("avg_similarity", float, base.avg_similarity),
        avg_alternative=pick("avg_alternative", float, base.avg_alternative),
        manufacturer_variant_rate=pick(
            "manufacturer_variant_rate", float, base.manufacturer_variant_rate
        ),
        pn_missing_rate=pick("pn_missing_rate", float, base.pn_missing_rate),
        n_manufacturers=pick("n_manufacturers", int, base.n_manufacturers),
    )


def _gateway(kind: str):
    if kind == "mock":
        return MockBackend()
    if kind == "http":
        try:
            return HttpBackend()
        except ValueError as exc:
            raise CliError("llm_not_configured", str(exc))
    raise CliError("bad_backend", f"unknown LLM backend {kind!r}")


def _load_dataset(data_dir: Path):
    plm_path = data_dir / "plm.csv"
    qc_path = data_dir / "qc_augmented.csv"
    if not qc_path.exists():
        qc_path = data_dir / "qc.csv"
    rules_path = data_dir / "rules.csv"
    if not plm_path.exists() or not qc_path.exists():
        raise CliError(
            "data_missing", f"expected plm.csv and qc.csv under {data_dir}"
        )
    components = csvio.read_plm(plm_path)
    cards = csvio.read_qc(qc_path)
    rules = csvio.read_rules(rules_path) if rules_path.exists() else RuleTable({})
    return components, cards, rules, [plm_path, qc_path, rules_path]


# --- subcommands ---


def cmd_gen(args, file_config) -> tuple[int, Path, list[Path]]:
    config = _corpus_config(args, file_config)
    if args.profile == "paper":
        pass  # the published marginals are the defaults
    corpus = generate(config)
    out_dir = Path(args.out)
    files = emit(corpus, out_dir)
    if not args.quiet:
        qualified = sum(1 for m in corpus.truth.matches.values() if m.any)
        print(
            f"generated {len(corpus.components)} components, "
            f"{len(corpus.cards)} qualifications "
            f"({qualified} components with ground-truth matches) -> {out_dir}"
        )
    return 0, out_dir, files


def cmd_clean(args, file_config) -> tuple[int, Path, list[Path]]:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    plm_path, qc_path = Path(args.plm), Path(args.qc)
    components = csvio.read_plm(plm_path)
    cards = csvio.read_qc(qc_path)
    gateway = _gateway(args.llm)
    diagnostics = PipelineDiagnostics()

    names = extract_unique_manufacturers(components, cards)
    proposed = propose_rules(names, gateway, diagnostics)
    table, final_rules, validation = accept_all_valid(proposed, names)
    augmented, review = run_pn_pipeline(
        cards,
        components,
        table,
        gateway,
        checkpoint_path=out_dir / "checkpoint.json",
        diagnostics=diagnostics,
    )

    csvio.write_rules(out_dir / "rules.csv", table)
    csvio.write_qc(out_dir / "qc_augmented.csv", augmented)
    # The cleaned directory is a self-contained dataset for query/serve.
    csvio.write_plm(out_dir / "plm.csv", components)
    (out_dir / "review_queue.json").write_text(
        review_queue_to_json(review), encoding="utf-8"
    )
    (out_dir / "rules_proposed.json").write_text(
        json.dumps(
            [
                {
                    "id": r.id,
                    "variants": sorted(r.variants),
                    "canonical": r.canonical,
                    "state": r.state.value,
                }
                for r in final_rules
            ],
            sort_keys=True,
            indent=1,
        ),
        encoding="utf-8",
    )
    diag = diagnostics.to_json()
    diag["rule_validation"] = {
        "hallucinated": sorted(validation.hallucinated),
        "missing": sorted(validation.missing),
        "overlaps": validation.overlaps,
    }
    (out_dir / "diagnostics.json").write_text(
        json.dumps(diag, sort_keys=True, indent=1), encoding="utf-8"
    )
    if not args.quiet:
        augmented_count = sum(1 for c in augmented if c.part_number is not None)
        print(
            f"rules: {len(table)} rows from {len(proposed)} proposals; "
            f"PNs written: {augmented_count}/{len(cards)}; "
            f"review queue: {len(review)}"
        )
    return 0, out_dir, [plm_path, qc_path]


def cmd_query(args, file_config) -> tuple[int, Path, list[Path]]:
    data_dir = Path(args.data)
    components, cards, rules, inputs = _load_dataset(data_dir)
    engine = RetrievalEngine(components, cards, rules)
    try:
        report = engine.retrieve(args.pn, k=args.k)
    except PnNotFound as exc:
        raise CliError("pn_not_found", str(exc))
    payload = report_json(report, {})
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=1))
    else:
        print(f"{args.pn}: {report.cascade_stage.value}")
        for title, matches in (
            ("direct", report.direct),
            ("similarity", report.similarity),
            ("alternative suggestions", report.alternative),
        ):
            if matches:
                print(f"  {title}:")
                for m in matches:
                    score = f"  score={m.score:.4f}" if m.score is not None else ""
                    print(
                        f"    {m.qualification.number} "
                        f"[{m.qualification.status.value}]{score}"
                    )
    return 0, data_dir, inputs


def cmd_rag(args, file_config) -> tuple[int, Path, list[Path]]:
    plm_path, qc_path, truth_path = Path(args.plm), Path(args.qc), Path(args.truth)
    components = csvio.read_plm(plm_path)
    cards = csvio.read_qc(qc_path)
    truth = truth_from_json(truth_path.read_text(encoding="utf-8"))
    rules = (
        csvio.read_rules(Path(args.rules)) if args.rules else None
    )
    gateway = _gateway(args.llm)
    result = run_rag(
        components,
        cards,
        truth,
        gateway,
        rules=rules,
        subset_size=args.subset,
        k=args.k,
        seed=args.seed,
    )
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(
        json.dumps(result.report, sort_keys=True, indent=1), encoding="utf-8"
    )
    if args.plot:
        from .plots import render_coverage_figure

        render_coverage_figure(result.coverage, out_path.with_suffix(".coverage.png"))
    if not args.quiet:
        rows = result.report["rows"]
        for name in ("direct", "similarity", "alternative", "overall_union"):
            r = rows[name]
            print(
                f"{name:>14}: P={r['precision']:.3f} R={r['recall']:.3f} "
                f"F1={r['f1']:.3f} IoU={r['iou']:.3f}"
            )
        print(
            "coverage:",
            " ".join(f"top{k}={v*100:.1f}%" for k, v in sorted(result.coverage.items())),
        )
    return 0, out_path.parent, [plm_path, qc_path, truth_path]


def cmd_eval(args, file_config) -> tuple[int, Path, list[Path]]:
    data_dir = Path(args.data)
    components, cards, rules, inputs = _load_dataset(data_dir)
    truth_path = Path(args.truth)
    truth = truth_from_json(truth_path.read_text(encoding="utf-8"))
    engine = RetrievalEngine(components, cards, rules)
    predictions = []
    pns = sorted(c.part_number for c in components)
    if args.subset is not None and args.subset < len(pns):
        import random

        pns = sorted(random.Random(args.seed).sample(pns, args.subset))
    for pn in pns:
        report = engine.retrieve(pn, k=args.k)
        predictions.append(
            RagPrediction(
                component_id=pn,
                direct=frozenset(m.qualification.number for m in report.direct),
                similarity=frozenset(m.qualification.number for m in report.similarity),
                alternative=frozenset(
                    m.qualification.number for m in report.alternative
                ),
                raw_llm_output="",
                compliant=True,
            )
        )
    metrics = evaluate_rag(predictions, truth, set(pns), mode="micro")
    payload = {
        "subset_size": len(pns),
        "k": args.k,
        "rows": {name: m.as_dict() for name, m in metrics.items()},
    }
    out_path = Path(args.out) if args.out else data_dir / "eval_report.json"
    out_path.write_text(json.dumps(payload, sort_keys=True, indent=1), encoding="utf-8")
    if not args.quiet:
        for name, m in metrics.items():
            print(
                f"{name:>14}: P={m.precision:.3f} R={m.recall:.3f} "
                f"F1={m.f1:.3f} IoU={m.iou:.3f}"
            )
    return 0, out_path.parent, inputs + [truth_path]


def _cost_approaches(file_config) -> tuple[ApproachCost, ApproachCost, ApproachCost]:
    if not file_config.has_section("cost"):
        return AS_IS, RAG, VKG_LLM
    section = file_config["cost"]

    def approach(base: ApproachCost, prefix: str) -> ApproachCost:
        return ApproachCost(
            base.name,
            Fraction(section.get(f"{prefix}_setup_person_days", str(base.setup_person_days))),
            Fraction(
                section.get(
                    f"{prefix}_per_component_minutes", str(base.per_component_minutes)
                )
            ),
        )

    return approach(AS_IS, "asis"), approach(RAG, "rag"), approach(VKG_LLM, "vkg")


def cmd_cost(args, file_config) -> tuple[int, Path, list[Path]]:
    report = emit_cost_report(
        approaches=_cost_approaches(file_config), n_max=args.max_n, step=args.step
    )
    csv_path = Path(args.csv)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    report.write_csv(csv_path)
    report.write_summary(Path(args.summary))
    if args.plot:
        from .plots import render_cost_figure

        render_cost_figure(report.rows, csv_path.with_suffix(".png"))
    if not args.quiet:
        print(json.dumps(report.summary, sort_keys=True, indent=1))
    return 0, csv_path.parent, []


def cmd_serve(args, file_config) -> tuple[int, Path, list[Path]]:
    import uvicorn

    from .service import build_app

    app = build_app(Path(args.data), ui_dir=args.ui, read_only=args.read_only)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0, Path(args.data), []


def build_parser() -> _Parser:
    parser = _Parser(prog="qualctl", description=__doc__)
    parser.add_argument("--json-errors", action="store_true", default=False,
                        help="machine-readable errors on stderr")
    parser.add_argument("--quiet", action="store_true", default=False,
                        help="suppress chatter")
    parser.add_argument("--config", default=None,
                        help="INI-style config file (sections: corpus, cost)")
    # The same flags are accepted after the subcommand; SUPPRESS keeps a
    # pre-subcommand value from being clobbered by the sub-level default.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json-errors", action="store_true",
                        default=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--config", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus", parents=[common])
    p.add_argument("--components", type=int, help="number of components")
    p.add_argument("--quals", type=int, default=None,
                   help="number of qualification cards (default: derived from marginals)")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--profile", choices=["paper"], default=None,
                   help="use the published marginals (these are also the defaults)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("clean", parents=[common], help="rule proposal + PN extraction pipeline")
    p.add_argument("--plm", required=True)
    p.add_argument("--qc", required=True)
    p.add_argument("--llm", choices=["mock", "http"], default="mock")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("query", parents=[common], help="qualification cascade for one part number")
    p.add_argument("--pn", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--json", action="store_true")
    p.add_argument("--data", required=True, help="directory with cleaned dataset")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("rag", parents=[common], help="retrieval-augmented baseline evaluation")
    p.add_argument("--plm", required=True)
    p.add_argument("--qc", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--rules", default=None,
                   help="optional rule table (default: raw names, no cleaning)")
    p.add_argument("--subset", type=int, default=675)
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--llm", choices=["mock", "http"], default="mock")
    p.add_argument("--out", default="rag_report.json")
    p.add_argument("--plot", action="store_true", help="render the coverage figure")
    p.set_defaults(func=cmd_rag)

    p = sub.add_parser("eval", parents=[common], help="score the cascade against ground truth")
    p.add_argument("--data", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--subset", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cost", parents=[common], help="effort model: curves, break-evens, savings")
    p.add_argument("--max-n", type=int, default=10000)
    p.add_argument("--step", type=int, default=100)
    p.add_argument("--csv", default="cost.csv")
    p.add_argument("--summary", default="cost.json")
    p.add_argument("--plot", action="store_true", help="render the effort figure")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("serve", parents=[common], help="HTTP service over a cleaned dataset")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data", required=True)
    p.add_argument("--ui", default=None, help="directory of built console assets")
    p.add_argument("--read-only", action="store_true")
    p.set_defaults(func=cmd_serve)

    return parser


# Where each command's manifest belongs when the run fails early.
_MANIFEST_HINTS: dict[str, tuple[str, str]] = {
    "gen": ("out", "dir"),
    "clean": ("out", "dir"),
    "query": ("data", "dir"),
    "serve": ("data", "dir"),
    "rag": ("out", "file"),
    "eval": ("out", "file"),
    "cost": ("csv", "file"),
}


def _emit_error(args_ns, code: str, message: str) -> None:
    json_errors = bool(args_ns and getattr(args_ns, "json_errors", False))
    if json_errors:
        sys.stderr.write(json.dumps({"code": code, "error": message}) + "\n")
    else:
        sys.stderr.write(f"qualctl: error: {message}\n")


def main(argv: list[str] | None = None) -> int:
    started = _utcnow()
    parser = build_parser()
    args_ns = None
    try:
        args_ns = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    exit_code = 0
    out_dir: Path | None = None
    inputs: list[Path] = []
    try:
        file_config = _load_config(args_ns.config)
        exit_code, out_dir, inputs = args_ns.func(args_ns, file_config)
    except CliError as exc:
        _emit_error(args_ns, exc.code, str(exc))
        exit_code = exc.exit_code
    except (ValidationError, StoreError, MappingParseError, QueryParseError,
            FileNotFoundError, OSError) as exc:
        _emit_error(args_ns, "data_error", str(exc))
        exit_code = 2
    except TransportError as exc:
        _emit_error(args_ns, "transport_error", str(exc))
        exit_code = 3
    except httpx.HTTPError as exc:
        _emit_error(args_ns, "transport_error", str(exc))
        exit_code = 3
    except KeyboardInterrupt:
        return 130

    if out_dir is None:
        # On failure, keep the manifest beside the intended outputs.
        hint = _MANIFEST_HINTS.get(args_ns.command)
        if hint:
            attr, kind = hint
            value = getattr(args_ns, attr, None)
            if value:
                out_dir = Path(value) if kind == "dir" else Path(value).parent
    manifest_dir = out_dir if out_dir is not None else Path.cwd()
    try:
        write_manifest(
            manifest_dir,
            args_ns.command,
            {k: v for k, v in vars(args_ns).items() if k not in ("func",)},
            inputs,
            started,
            exit_code,
        )
    except OSError:
        pass  # a failed manifest write must not mask the real outcome
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
