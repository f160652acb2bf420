/**
 * Pure HTML renderers. Every renderer takes server data and returns markup;
 * there is no matching logic here, only layout. All dynamic text is escaped.
 */

import type { MatchEntry, PnQueueItem, Report, RuleItem } from "./api.js";
import type { PendingCounts } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const STATUS_CLASS: Record<string, string> = {
  Closed: "badge-closed",
  Ongoing: "badge-ongoing",
  Failed: "badge-failed",
  Obsolete: "badge-obsolete",
};

export function statusBadge(status: string): string {
  const cls = STATUS_CLASS[status] ?? "badge-unknown";
  return `<span class="badge ${cls}">${escapeHtml(status)}</span>`;
}

const FP_RULE_HINT =
  "Suggested by rule: package code and pitch equal, pin dimension within " +
  "±5 µm, assembly process equivalent. Requires expert validation.";

function matchRow(entry: MatchEntry, pn: string, readOnly: boolean): string {
  const parts = [
    `<td class="qual-number">${escapeHtml(entry.number)}</td>`,
    `<td>${statusBadge(entry.status)}</td>`,
    `<td>${escapeHtml(entry.qualification_type ?? "")}</td>`,
  ];
  if (entry.match_type === "Alternative") {
    const score = entry.score === undefined ? "" : entry.score.toFixed(4);
    parts.push(
      `<td class="score" title="${escapeHtml(FP_RULE_HINT)}">` +
        `${score}<span class="score-note">similarity score, not a qualification verdict</span></td>`,
    );
    if (entry.decision) {
      parts.push(
        `<td class="decided">${escapeHtml(entry.decision.decision)} by ` +
          `${escapeHtml(entry.decision.user)}</td>`,
      );
    } else if (readOnly) {
      parts.push(`<td class="decided muted">read-only</td>`);
    } else {
      const id = `${pn}:${entry.number}`;
      parts.push(
        `<td class="actions">` +
          `<button data-action="accept-alt" data-subject="${escapeHtml(id)}">Accept</button>` +
          `<button data-action="reject-alt" data-subject="${escapeHtml(id)}">Reject</button>` +
          `</td>`,
      );
    }
  }
  return `<tr>${parts.join("")}</tr>`;
}

function matchGroup(
  title: string,
  entries: MatchEntry[],
  pn: string,
  readOnly: boolean,
): string {
  const rows = entries.map((entry) => matchRow(entry, pn, readOnly)).join("");
  const body = entries.length
    ? `<table class="matches">${rows}</table>`
    : `<p class="empty">none</p>`;
  return (
    `<section class="match-group" data-group="${escapeHtml(title)}">` +
    `<h3>${escapeHtml(title)} <span class="count">(${entries.length})</span></h3>` +
    body +
    `</section>`
  );
}

export function renderReport(report: Report, readOnly: boolean): string {
  const pn = report.component.part_number;
  const header =
    `<div class="report-header"><h2>${escapeHtml(pn)}</h2>` +
    `<span class="stage stage-${escapeHtml(report.cascade_stage)}">` +
    `${escapeHtml(report.cascade_stage)}</span></div>`;
  if (report.cascade_stage === "NoneFound") {
    return (
      header +
      `<p class="empty-state">No direct, by-similarity, or alternative ` +
      `qualifications were found for this part number.</p>`
    );
  }
  return (
    header +
    matchGroup("Direct", report.direct, pn, readOnly) +
    matchGroup("By similarity", report.similarity, pn, readOnly) +
    matchGroup("Alternative suggestions", report.alternative, pn, readOnly)
  );
}

export function renderNotFound(pn: string): string {
  return `<p class="not-found">Unknown part number: <b>${escapeHtml(pn)}</b></p>`;
}

export function renderBanner(message: string, retryable: boolean): string {
  const retry = retryable
    ? `<button data-action="retry">Retry</button>`
    : "";
  return `<div class="banner">${escapeHtml(message)} ${retry}</div>`;
}

export function renderRuleCards(items: RuleItem[], readOnly: boolean): string {
  if (!items.length) {
    return `<p class="empty-state">No rules waiting for review.</p>`;
  }
  const cards = items.map((rule) => {
    const variants = rule.variants
      .map((v) => `<li>${escapeHtml(v)}</li>`)
      .join("");
    const actions = readOnly
      ? `<span class="muted">read-only</span>`
      : `<button data-action="accept-rule" data-rule="${rule.id}">Accept</button>` +
        `<button data-action="edit-rule" data-rule="${rule.id}">Edit</button>` +
        `<button data-action="reject-rule" data-rule="${rule.id}">Reject</button>`;
    return (
      `<div class="rule-card" data-rule-id="${rule.id}">` +
      `<ul class="variants">${variants}</ul>` +
      `<div class="canonical">&rarr; <b>${escapeHtml(rule.canonical)}</b></div>` +
      `<div class="actions">${actions}</div></div>`
    );
  });
  return cards.join("");
}

export function highlightCandidate(notes: string, candidate: string | null): string {
  const escaped = escapeHtml(notes);
  if (!candidate) {
    return escaped;
  }
  const needle = escapeHtml(candidate);
  return escaped.split(needle).join(`<mark>${needle}</mark>`);
}

export function renderPnQueue(items: PnQueueItem[], readOnly: boolean): string {
  if (!items.length) {
    return `<p class="empty-state">No part-number extractions waiting for review.</p>`;
  }
  const rows = items.map((item) => {
    const note = highlightCandidate(item.notes ?? "", item.candidate_pn);
    const entry = readOnly
      ? `<span class="muted">read-only</span>`
      : `<input data-pn-input="${escapeHtml(item.qual_number)}" ` +
        `placeholder="part number" />` +
        `<button data-action="resolve-pn" data-qual="${escapeHtml(item.qual_number)}">` +
        `Verify</button>`;
    return (
      `<tr data-qual="${escapeHtml(item.qual_number)}">` +
      `<td>${escapeHtml(item.qual_number)}</td>` +
      `<td class="reason">${escapeHtml(item.reason)}</td>` +
      `<td class="note">${note}</td>` +
      `<td class="verdict" data-verdict="${escapeHtml(item.qual_number)}"></td>` +
      `<td>${entry}</td></tr>`
    );
  });
  return `<table class="pn-queue">${rows.join("")}</table>`;
}

export function renderPendingCounts(counts: PendingCounts): string {
  return (
    `<span class="pending-count" data-queue="rules">${counts.rules}</span>` +
    `<span class="pending-count" data-queue="pn">${counts.pn}</span>`
  );
}
