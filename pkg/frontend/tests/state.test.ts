import { describe, expect, it } from "vitest";

import {
  clearReport,
  initialState,
  withBanner,
  withCounts,
  withReport,
  withView,
} from "../src/state.js";
import { FIXTURE_REPORT } from "./fixtures.js";

describe("view state", () => {
  it("starts on the search view with empty queues", () => {
    const state = initialState();
    expect(state.activeView).toBe("Search");
    expect(state.pendingCounts).toEqual({ rules: 0, pn: 0 });
    expect(state.readOnly).toBe(false);
    expect(state.report).toBeNull();
  });

  it("keeps the server report untouched", () => {
    const state = withReport(initialState(), "P1111111", FIXTURE_REPORT);
    expect(state.report).toBe(FIXTURE_REPORT); // same object, no derivation
    expect(state.currentPn).toBe("P1111111");
  });

  it("switching views clears banners but not the report", () => {
    let state = withReport(initialState(), "P1111111", FIXTURE_REPORT);
    state = withBanner(state, "oops");
    state = withView(state, "RuleWorkshop");
    expect(state.banner).toBeNull();
    expect(state.report).not.toBeNull();
  });

  it("records pending counts with a sync stamp", () => {
    const state = withCounts(initialState(), { rules: 2, pn: 5 }, "2026-08-09T00:00:00Z");
    expect(state.pendingCounts).toEqual({ rules: 2, pn: 5 });
    expect(state.lastSync).toBe("2026-08-09T00:00:00Z");
  });

  it("read-only flag survives transitions", () => {
    let state = initialState(true);
    state = withView(state, "PnQueue");
    state = withCounts(state, { rules: 0, pn: 1 }, "t");
    expect(state.readOnly).toBe(true);
  });

  it("clearReport drops the current search", () => {
    const state = clearReport(withReport(initialState(), "P1", FIXTURE_REPORT));
    expect(state.report).toBeNull();
    expect(state.currentPn).toBeNull();
  });

  it("transitions are pure: inputs are not mutated", () => {
    const state = initialState();
    withView(state, "PnQueue");
    withBanner(state, "x");
    expect(state.activeView).toBe("Search");
    expect(state.banner).toBeNull();
  });
});
