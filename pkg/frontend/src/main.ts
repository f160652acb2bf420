/**
 * Browser wiring: event handlers around the pure renderers and the typed
 * client. Mutations POST a review decision and then re-fetch, so what the
 * screen shows is always the server's materialized state.
 */

import { ApiError, Client, NetworkError } from "./api.js";
import {
  initialState,
  withBanner,
  withCounts,
  withReport,
  withView,
  type ActiveView,
  type ViewState,
} from "./state.js";
import {
  renderBanner,
  renderNotFound,
  renderPendingCounts,
  renderPnQueue,
  renderReport,
  renderRuleCards,
} from "./render.js";

const POLL_INTERVAL_MS = 10_000;

const client = new Client("", null, "designer");
let state: ViewState = initialState(false);

function $(selector: string): HTMLElement {
  const element = document.querySelector(selector);
  if (!element) {
    throw new Error(`missing element ${selector}`);
  }
  return element as HTMLElement;
}

function setState(next: ViewState): void {
  state = next;
  draw();
}

function draw(): void {
  const main = $("#content");
  document.querySelectorAll("nav [data-view]").forEach((tab) => {
    tab.classList.toggle(
      "active",
      tab.getAttribute("data-view") === state.activeView,
    );
  });
  $("#pending").innerHTML = renderPendingCounts(state.pendingCounts);
  const banner = state.banner ? renderBanner(state.banner, true) : "";
  if (state.activeView === "Search" || state.activeView === "AlternativeReview") {
    const body = state.report
      ? renderReport(state.report, state.readOnly)
      : `<p class="empty-state">Search for a part number above.</p>`;
    main.innerHTML = banner + body;
  } else if (state.activeView === "RuleWorkshop") {
    main.innerHTML = banner + `<div id="rules">loading…</div>`;
    void loadRules();
  } else {
    main.innerHTML = banner + `<div id="pnqueue">loading…</div>`;
    void loadPnQueue();
  }
}

async function search(pn: string): Promise<void> {
  if (!pn) {
    return;
  }
  try {
    const report = await client.getReport(pn);
    setState(withReport(state, pn, report));
  } catch (error) {
    if (error instanceof ApiError && error.code === "pn_not_found") {
      $("#content").innerHTML = renderNotFound(pn);
      return;
    }
    handleFailure(error);
  }
}

async function loadRules(): Promise<void> {
  try {
    const pending = await client.getPendingRules();
    $("#rules").innerHTML = renderRuleCards(pending.items, state.readOnly);
  } catch (error) {
    handleFailure(error);
  }
}

async function loadPnQueue(): Promise<void> {
  try {
    const pending = await client.getPendingPn();
    $("#pnqueue").innerHTML = renderPnQueue(pending.items, state.readOnly);
  } catch (error) {
    handleFailure(error);
  }
}

async function refreshCounts(): Promise<void> {
  try {
    const [rules, pn] = await Promise.all([
      client.getPendingRules(),
      client.getPendingPn(),
    ]);
    setState(
      withCounts(
        state,
        { rules: rules.items.length, pn: pn.items.length },
        new Date().toISOString(),
      ),
    );
  } catch {
    // counts are cosmetic; the next poll retries
  }
}

function handleFailure(error: unknown): void {
  if (error instanceof NetworkError) {
    setState(withBanner(state, "Service unreachable."));
  } else if (error instanceof ApiError) {
    setState(withBanner(state, `${error.code}: ${error.message}`));
  } else {
    setState(withBanner(state, String(error)));
  }
}

async function decide(
  subjectType: "Rule" | "PnExtraction" | "AlternativeCandidate",
  subjectId: string,
  decision: "Accept" | "Reject" | "Edit",
  payload?: Record<string, unknown>,
): Promise<boolean> {
  try {
    await client.postReview({
      subject_type: subjectType,
      subject_id: subjectId,
      decision,
      ...(payload ? { payload } : {}),
    });
    return true;
  } catch (error) {
    if (error instanceof ApiError) {
      return false;
    }
    handleFailure(error);
    return false;
  }
}

async function onClick(event: Event): Promise<void> {
  const target = event.target as HTMLElement;
  const action = target.getAttribute("data-action");
  if (!action) {
    const view = target.getAttribute("data-view") as ActiveView | null;
    if (view) {
      setState(withView(state, view));
    }
    return;
  }
  if (action === "retry") {
    setState(withBanner(state, null));
    return;
  }
  if (action === "accept-alt" || action === "reject-alt") {
    const subject = target.getAttribute("data-subject") ?? "";
    const ok = await decide(
      "AlternativeCandidate",
      subject,
      action === "accept-alt" ? "Accept" : "Reject",
    );
    if (ok && state.currentPn) {
      await search(state.currentPn); // re-render from server state
    }
    return;
  }
  if (action === "accept-rule" || action === "reject-rule") {
    const ruleId = target.getAttribute("data-rule") ?? "";
    const ok = await decide(
      "Rule", ruleId, action === "accept-rule" ? "Accept" : "Reject",
    );
    if (ok) {
      await loadRules();
      await refreshCounts();
    }
    return;
  }
  if (action === "edit-rule") {
    const ruleId = target.getAttribute("data-rule") ?? "";
    const canonical = window.prompt("Canonical name:");
    if (!canonical) {
      return;
    }
    const variantsRaw = window.prompt("Variants (one per line):");
    if (!variantsRaw) {
      return;
    }
    const variants = variantsRaw
      .split("\n")
      .map((v) => v.trim())
      .filter(Boolean);
    const ok = await decide("Rule", ruleId, "Edit", { canonical, variants });
    if (ok) {
      await loadRules();
    } else {
      window.alert("Edit rejected by the server (overlapping rule?)");
    }
    return;
  }
  if (action === "resolve-pn") {
    const qual = target.getAttribute("data-qual") ?? "";
    const input = document.querySelector(
      `[data-pn-input="${qual}"]`,
    ) as HTMLInputElement | null;
    const pn = input?.value.trim() ?? "";
    if (!pn) {
      return;
    }
    const verdict = document.querySelector(`[data-verdict="${qual}"]`);
    try {
      await client.postReview({
        subject_type: "PnExtraction",
        subject_id: qual,
        decision: "Accept",
        payload: { pn },
      });
      await loadPnQueue();
      await refreshCounts();
    } catch (error) {
      if (verdict && error instanceof ApiError) {
        verdict.textContent = error.code; // e.g. attribute_mismatch
      } else {
        handleFailure(error);
      }
    }
  }
}

export function start(): void {
  $("#search-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const input = $("#search-input") as HTMLInputElement;
    void search(input.value.trim());
  });
  document.body.addEventListener("click", (event) => {
    void onClick(event);
  });
  void refreshCounts();
  window.setInterval(() => {
    void refreshCounts();
  }, POLL_INTERVAL_MS);
  draw();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  start();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", start);
}
