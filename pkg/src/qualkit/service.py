"""HTTP facade: retrieval reports, review queues, decision recording.

State model: the dataset snapshot (components, cards, rules) lives in a
RetrievalEngine; human decisions append to a JSON-lines log which is fsynced
before any mutating request is acknowledged. Materialized state is the fold
of that log over the loaded dataset, so restarting the service and replaying
the log reproduces it exactly. Decisions that fail validation (cross-check
failures, overlapping rule edits) are rejected and never logged.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import csvio
from .cleaning import (
    PnReviewItem,
    cross_check,
    index_by_pn,
    review_queue_from_json,
)
from .cost import AS_IS, RAG, VKG_LLM, break_even, relative_effort, savings
from .model import (
    NormalizationRule,
    QualMatch,
    QualificationReport,
    RuleState,
    RuleTable,
    ValidationError,
)
from .retrieval import DEFAULT_K, PnNotFound, RetrievalEngine
from .vecindex import to_canonical_json
from . import __version__

SNAPSHOT_EVERY = 100

VALID_SUBJECTS = ("Rule", "PnExtraction", "AlternativeCandidate")
VALID_DECISIONS = ("Accept", "Reject", "Edit")


class SortedJSONResponse(JSONResponse):
    def render(self, content: Any) -> bytes:
        return json.dumps(content, sort_keys=True).encode("utf-8")


def _error(status: int, code: str, detail: str) -> SortedJSONResponse:
    return SortedJSONResponse({"code": code, "detail": detail}, status_code=status)


@dataclass
class Decision:
    timestamp: str
    user: str
    subject_type: str
    subject_id: str
    decision: str
    payload: dict | None = None

    def to_json(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "user": self.user,
            "subject_type": self.subject_type,
            "subject_id": self.subject_id,
            "decision": self.decision,
            "payload": self.payload,
        }


class DecisionConflict(Exception):
    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.detail = detail


class NotFound(Exception):
    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


@dataclass
class AppState:
    engine: RetrievalEngine
    base_rules: RuleTable  # as loaded; rule decisions materialize over this
    proposed_rules: dict[int, NormalizationRule]
    review_items: dict[str, PnReviewItem]
    log_path: Path
    snapshot_path: Path
    fingerprints: dict[str, str]
    metrics: dict | None = None
    annotations: dict[str, dict] = field(default_factory=dict)
    applied: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)

    # --- decision fold ---

    def apply(self, decision: Decision) -> None:
        """Mutate materialized state; raises instead of mutating on conflict."""
        if decision.subject_type == "Rule":
            self._apply_rule(decision)
        elif decision.subject_type == "PnExtraction":
            self._apply_pn(decision)
        elif decision.subject_type == "AlternativeCandidate":
            self._apply_alternative(decision)
        else:
            raise ValidationError(f"unknown subject_type {decision.subject_type!r}")
        self.applied += 1

    def _apply_rule(self, decision: Decision) -> None:
        try:
            rule_id = int(decision.subject_id)
        except ValueError:
            raise NotFound(f"rule id {decision.subject_id!r} is not an integer")
        rule = self.proposed_rules.get(rule_id)
        if rule is None:
            raise NotFound(f"unknown rule {rule_id}")
        import dataclasses

        if decision.decision == "Accept":
            updated = dataclasses.replace(rule, state=RuleState.ACCEPTED)
        elif decision.decision == "Reject":
            updated = dataclasses.replace(rule, state=RuleState.REJECTED)
        else:
            payload = decision.payload or {}
            canonical = payload.get("canonical")
            variants = payload.get("variants")
            if not canonical or not variants:
                raise ValidationError("rule edit needs canonical and variants")
            updated = dataclasses.replace(
                rule,
                canonical=canonical,
                variants=frozenset(variants),
                state=RuleState.EDITED,
                editor_note=payload.get("comment"),
            )
        candidate_rules = dict(self.proposed_rules)
        candidate_rules[rule_id] = updated
        table = _materialize_rules(candidate_rules, self.base_rules)
        self.proposed_rules = candidate_rules
        self.engine.set_rules(table)

    def _apply_pn(self, decision: Decision) -> None:
        item = self.review_items.get(decision.subject_id)
        if item is None:
            raise NotFound(f"no pending review for {decision.subject_id!r}")
        import dataclasses

        if decision.decision == "Reject":
            self.review_items[decision.subject_id] = dataclasses.replace(
                item, resolved_pn=None, reason="Rejected"
            )
            return
        payload = decision.payload or {}
        pn = payload.get("pn")
        if not pn:
            raise ValidationError("PN resolution needs payload {'pn': ...}")
        card = self.engine.cards_by_number.get(decision.subject_id)
        if card is None:
            raise NotFound(f"unknown qualification {decision.subject_id!r}")
        failure = cross_check(
            card, pn, index_by_pn(list(self.engine.components_by_pn.values())),
            self.engine.rules,
        )
        if failure is not None:
            code = "attribute_mismatch" if failure == "AttributeMismatch" else "not_in_plm"
            raise DecisionConflict(code, f"PN {pn!r} fails the cross-check: {failure}")
        self.engine.update_card(card.with_part_number(pn))
        self.review_items[decision.subject_id] = dataclasses.replace(
            item, candidate_pn=pn, resolved_pn=pn
        )

    def _apply_alternative(self, decision: Decision) -> None:
        if ":" not in decision.subject_id:
            raise ValidationError(
                "alternative subject_id is '<component_pn>:<qual_number>'"
            )
        pn, qual = decision.subject_id.split(":", 1)
        if pn not in self.engine.components_by_pn:
            raise NotFound(f"unknown part number {pn!r}")
        if qual not in self.engine.cards_by_number:
            raise NotFound(f"unknown qualification {qual!r}")
        self.annotations[decision.subject_id] = {
            "decision": decision.decision,
            "user": decision.user,
            "timestamp": decision.timestamp,
            "comment": (decision.payload or {}).get("comment"),
        }

    # --- durability ---

    def append_and_apply(self, decision: Decision) -> None:
        """Validate by applying, then the caller already holds the lock:
        append happens first so a crash between the two replays cleanly."""
        line = json.dumps(decision.to_json(), sort_keys=True)
        with open(self.log_path, "a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())
        try:
            self.apply(decision)
        except Exception:
            # The log now holds a decision the fold rejects; replay skips
            # failures the same way, so state stays consistent.
            raise
        if self.applied % SNAPSHOT_EVERY == 0:
            self.write_snapshot()

    def dry_run(self, decision: Decision) -> None:
        """Raise exactly what apply() would raise, without mutating."""
        if decision.subject_type not in VALID_SUBJECTS:
            raise ValidationError(f"unknown subject_type {decision.subject_type!r}")
        if decision.decision not in VALID_DECISIONS:
            raise ValidationError(f"unknown decision {decision.decision!r}")
        if decision.subject_type == "Rule":
            try:
                rule_id = int(decision.subject_id)
            except ValueError:
                raise NotFound(f"rule id {decision.subject_id!r} is not an integer")
            rule = self.proposed_rules.get(rule_id)
            if rule is None:
                raise NotFound(f"unknown rule {rule_id}")
            import dataclasses

            if decision.decision == "Edit":
                payload = decision.payload or {}
                if not payload.get("canonical") or not payload.get("variants"):
                    raise ValidationError("rule edit needs canonical and variants")
                candidate = dataclasses.replace(
                    rule,
                    canonical=payload["canonical"],
                    variants=frozenset(payload["variants"]),
                    state=RuleState.EDITED,
                )
            elif decision.decision == "Accept":
                candidate = dataclasses.replace(rule, state=RuleState.ACCEPTED)
            else:
                candidate = dataclasses.replace(rule, state=RuleState.REJECTED)
            candidate_rules = dict(self.proposed_rules)
            candidate_rules[rule_id] = candidate
            _materialize_rules(candidate_rules, self.base_rules)
        elif decision.subject_type == "PnExtraction":
            item = self.review_items.get(decision.subject_id)
            if item is None:
                raise NotFound(f"no pending review for {decision.subject_id!r}")
            if decision.decision != "Reject":
                payload = decision.payload or {}
                pn = payload.get("pn")
                if not pn:
                    raise ValidationError("PN resolution needs payload {'pn': ...}")
                card = self.engine.cards_by_number.get(decision.subject_id)
                if card is None:
                    raise NotFound(f"unknown qualification {decision.subject_id!r}")
                failure = cross_check(
                    card, pn,
                    index_by_pn(list(self.engine.components_by_pn.values())),
                    self.engine.rules,
                )
                if failure is not None:
                    code = (
                        "attribute_mismatch"
                        if failure == "AttributeMismatch"
                        else "not_in_plm"
                    )
                    raise DecisionConflict(
                        code, f"PN {pn!r} fails the cross-check: {failure}"
                    )
        else:
            if ":" not in decision.subject_id:
                raise ValidationError(
                    "alternative subject_id is '<component_pn>:<qual_number>'"
                )
            pn, qual = decision.subject_id.split(":", 1)
            if pn not in self.engine.components_by_pn:
                raise NotFound(f"unknown part number {pn!r}")
            if qual not in self.engine.cards_by_number:
                raise NotFound(f"unknown qualification {qual!r}")

    def write_snapshot(self) -> None:
        snapshot = {
            "applied": self.applied,
            "rule_states": {
                str(rid): rule.state.value for rid, rule in self.proposed_rules.items()
            },
            "resolved_pns": {
                number: card.part_number
                for number, card in sorted(self.engine.cards_by_number.items())
                if card.part_number is not None
            },
            "annotations": self.annotations,
        }
        self.snapshot_path.write_text(
            json.dumps(snapshot, sort_keys=True, indent=1), encoding="utf-8"
        )

    def replay_log(self) -> int:
        """Fold every logged decision; failures are skipped (they were
        rejected when first submitted). Returns the number applied."""
        if not self.log_path.exists():
            return 0
        applied = 0
        for line in self.log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            decision = Decision(
                timestamp=entry["timestamp"],
                user=entry["user"],
                subject_type=entry["subject_type"],
                subject_id=entry["subject_id"],
                decision=entry["decision"],
                payload=entry.get("payload"),
            )
            try:
                self.apply(decision)
                applied += 1
            except (DecisionConflict, NotFound, ValidationError):
                continue
        return applied


def _materialize_rules(
    rules: dict[int, NormalizationRule], base: RuleTable
) -> RuleTable:
    """Accepted and edited rules over the loaded base table; rows from the
    base table that no live rule claims are kept as-is."""
    rows: dict[str, str] = {}
    owner: dict[str, int] = {}
    for rule_id in sorted(rules):
        rule = rules[rule_id]
        if rule.state not in (RuleState.ACCEPTED, RuleState.EDITED):
            continue
        for variant in rule.variants:
            if variant in owner:
                raise DecisionConflict(
                    "rule_overlap",
                    f"rules {owner[variant]} and {rule_id} both claim {variant!r}",
                )
            owner[variant] = rule_id
            rows[variant] = rule.canonical
    merged = dict(base.rows)
    merged.update(rows)
    return RuleTable(merged)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_state(data_dir: Path) -> AppState:
    data_dir = Path(data_dir)
    plm_path = data_dir / "plm.csv"
    qc_path = data_dir / "qc_augmented.csv"
    if not qc_path.exists():
        qc_path = data_dir / "qc.csv"
    rules_path = data_dir / "rules.csv"

    components = csvio.read_plm(plm_path)
    cards = csvio.read_qc(qc_path)
    rules = csvio.read_rules(rules_path) if rules_path.exists() else RuleTable({})
    engine = RetrievalEngine(components, cards, rules)

    review_path = data_dir / "review_queue.json"
    review_items: dict[str, PnReviewItem] = {}
    if review_path.exists():
        for item in review_queue_from_json(review_path.read_text(encoding="utf-8")):
            review_items[item.qual_number] = item

    proposed_path = data_dir / "rules_proposed.json"
    proposed: dict[int, NormalizationRule] = {}
    if proposed_path.exists():
        for entry in json.loads(proposed_path.read_text(encoding="utf-8")):
            rule = NormalizationRule(
                id=entry["id"],
                variants=frozenset(entry["variants"]),
                canonical=entry["canonical"],
                state=RuleState(entry.get("state", "Proposed")),
            )
            proposed[rule.id] = rule

    metrics_path = data_dir / "rag_report.json"
    metrics = (
        json.loads(metrics_path.read_text(encoding="utf-8"))
        if metrics_path.exists()
        else None
    )

    fingerprints = {p.name: _sha256(p) for p in (plm_path, qc_path) if p.exists()}
    if rules_path.exists():
        fingerprints[rules_path.name] = _sha256(rules_path)

    state = AppState(
        engine=engine,
        base_rules=rules,
        proposed_rules=proposed,
        review_items=review_items,
        log_path=data_dir / "decisions.jsonl",
        snapshot_path=data_dir / "snapshot.json",
        fingerprints=fingerprints,
        metrics=metrics,
    )
    state.replay_log()
    return state


def _match_json(match: QualMatch, annotations: dict[str, dict], pn: str) -> dict:
    card = match.qualification
    out = {
        "number": card.number,
        "status": card.status.value,
        "package_code": card.package_code,
        "subpackage_code": card.subpackage_code,
        "manufacturer_name": card.manufacturer_name,
        "qualification_type": card.qualification_type,
        "description": card.description,
        "documentation": card.documentation,
        "notes": card.notes,
        "part_number": card.part_number,
        "match_type": match.match_type.value,
    }
    if match.match_type.value == "Alternative":
        out["score"] = match.score
        out["label"] = "suggestion"
        out["decision"] = annotations.get(f"{pn}:{card.number}")
    return out


def report_json(report: QualificationReport, annotations: dict[str, dict]) -> dict:
    pn = report.component.part_number
    return {
        "component": json.loads(
            to_canonical_json(report.component, RuleTable({}))
        ),
        "cascade_stage": report.cascade_stage.value,
        "direct": [_match_json(m, annotations, pn) for m in report.direct],
        "similarity": [_match_json(m, annotations, pn) for m in report.similarity],
        "alternative": [_match_json(m, annotations, pn) for m in report.alternative],
    }


def build_app(
    data_dir: Path | str,
    ui_dir: Path | str | None = None,
    read_only: bool = False,
) -> FastAPI:
    app = FastAPI(title="qualification retrieval service", version=__version__)
    state: AppState | None = None
    load_error: str | None = None
    try:
        state = load_state(Path(data_dir))
    except (OSError, ValidationError) as exc:
        load_error = str(exc)

    app.state.qualkit = state

    @app.get("/health")
    def health() -> Response:
        if state is None:
            return _error(503, "datasets_not_loaded", load_error or "no data")
        return SortedJSONResponse(
            {
                "status": "ok",
                "build": __version__,
                "datasets": state.fingerprints,
                "decisions_applied": state.applied,
            }
        )

    @app.get("/api/components/{pn}/qualifications")
    def qualifications(pn: str, k: int = DEFAULT_K) -> Response:
        if state is None:
            return _error(503, "datasets_not_loaded", load_error or "no data")
        if k < 1:
            return _error(400, "bad_request", "k must be >= 1")
        try:
            report = state.engine.retrieve(pn, k=k)
        except PnNotFound as exc:
            return _error(404, "pn_not_found", str(exc))
        return SortedJSONResponse(report_json(report, state.annotations))

    @app.get("/api/reviews/pending")
    def pending(type: str = "pn") -> Response:
        if state is None:
            return _error(503, "datasets_not_loaded", load_error or "no data")
        if type == "pn":
            items = [
                {
                    "qual_number": item.qual_number,
                    "candidate_pn": item.candidate_pn,
                    "reason": item.reason,
                    "notes": state.engine.cards_by_number[item.qual_number].notes
                    if item.qual_number in state.engine.cards_by_number
                    else None,
                }
                for item in sorted(
                    state.review_items.values(), key=lambda i: i.qual_number
                )
                if item.resolved_pn is None and item.reason != "Rejected"
            ]
            return SortedJSONResponse({"type": "pn", "items": items})
        if type == "rule":
            return SortedJSONResponse(
                {"type": "rule", "items": _pending_rules(state)}
            )
        return _error(400, "bad_request", f"unknown review type {type!r}")

    @app.get("/api/rules/pending")
    def rules_pending() -> Response:
        if state is None:
            return _error(503, "datasets_not_loaded", load_error or "no data")
        return SortedJSONResponse({"items": _pending_rules(state)})

    @app.post("/api/reviews")
    async def post_review(request: Request) -> Response:
        if state is None:
            return _error(503, "datasets_not_loaded", load_error or "no data")
        if read_only:
            return _error(403, "read_only", "mutations are disabled")
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "malformed", "body is not JSON")
        if not isinstance(body, dict):
            return _error(400, "malformed", "body must be a JSON object")
        missing = [
            key for key in ("subject_type", "subject_id", "decision")
            if not isinstance(body.get(key), str)
        ]
        if missing:
            return _error(400, "malformed", f"missing string fields: {missing}")
        payload = body.get("payload")
        if payload is not None and not isinstance(payload, dict):
            return _error(400, "malformed", "payload must be an object")
        decision = Decision(
            timestamp=datetime.now(timezone.utc).isoformat(),
            user=request.headers.get("X-User", "anonymous"),
            subject_type=body["subject_type"],
            subject_id=body["subject_id"],
            decision=body["decision"],
            payload=payload,
        )
        with state.lock:
            try:
                state.dry_run(decision)
            except ValidationError as exc:
                return _error(400, "malformed", str(exc))
            except NotFound as exc:
                return _error(404, "unknown_subject", exc.detail)
            except DecisionConflict as exc:
                return _error(409, exc.code, exc.detail)
            state.append_and_apply(decision)
        return SortedJSONResponse(
            {"status": "applied", "decision": decision.to_json()}
        )

    @app.get("/api/metrics")
    def metrics() -> Response:
        if state is None:
            return _error(503, "datasets_not_loaded", load_error or "no data")
        if state.metrics is None:
            return _error(404, "no_metrics", "no evaluation report loaded")
        return SortedJSONResponse(state.metrics)

    @app.get("/api/cost")
    def cost(n: int = 10000) -> Response:
        if n < 0:
            return _error(400, "bad_request", "n must be >= 0")
        be_rag = break_even(AS_IS, RAG)
        be_vkg = break_even(RAG, VKG_LLM)
        return SortedJSONResponse(
            {
                "n": n,
                "rag_relative": float(relative_effort(RAG, AS_IS, n)),
                "vkg_relative": float(relative_effort(VKG_LLM, AS_IS, n)),
                "rag_savings": float(savings(RAG, AS_IS, n)),
                "vkg_savings": float(savings(VKG_LLM, AS_IS, n)),
                "break_even_asis_rag": None if be_rag is None else float(be_rag),
                "break_even_rag_vkg": None if be_vkg is None else float(be_vkg),
            }
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _pending_rules(state: AppState) -> list[dict]:
    return [
        {
            "id": rule.id,
            "variants": sorted(rule.variants),
            "canonical": rule.canonical,
            "state": rule.state.value,
        }
        for rule_id, rule in sorted(state.proposed_rules.items())
        if rule.state is RuleState.PROPOSED
    ]
