/**
 * Console view state and its pure transitions. The state never stores
 * derived match information: reports are kept exactly as the server sent
 * them and re-fetched after every mutation.
 */

import type { Report } from "./api.js";

export type ActiveView = "Search" | "AlternativeReview" | "RuleWorkshop" | "PnQueue";

export interface PendingCounts {
  rules: number;
  pn: number;
}

export interface ViewState {
  activeView: ActiveView;
  currentPn: string | null;
  report: Report | null;
  pendingCounts: PendingCounts;
  lastSync: string | null;
  readOnly: boolean;
  banner: string | null;
}

export function initialState(readOnly = false): ViewState {
  return {
    activeView: "Search",
    currentPn: null,
    report: null,
    pendingCounts: { rules: 0, pn: 0 },
    lastSync: null,
    readOnly,
    banner: null,
  };
}

export function withView(state: ViewState, view: ActiveView): ViewState {
  return { ...state, activeView: view, banner: null };
}

export function withReport(state: ViewState, pn: string, report: Report): ViewState {
  return { ...state, currentPn: pn, report, banner: null };
}

export function withCounts(
  state: ViewState,
  counts: PendingCounts,
  syncedAt: string,
): ViewState {
  return { ...state, pendingCounts: counts, lastSync: syncedAt };
}

export function withBanner(state: ViewState, banner: string | null): ViewState {
  return { ...state, banner };
}

export function clearReport(state: ViewState): ViewState {
  return { ...state, currentPn: null, report: null };
}
