import { describe, expect, it } from "vitest";

import {
  escapeHtml,
  highlightCandidate,
  renderBanner,
  renderNotFound,
  renderPendingCounts,
  renderPnQueue,
  renderReport,
  renderRuleCards,
  statusBadge,
} from "../src/render.js";
import { FIXTURE_ALTERNATIVE_REPORT, FIXTURE_REPORT } from "./fixtures.js";

describe("search report rendering", () => {
  it("renders all three match groups from fixture data", () => {
    const html = renderReport(FIXTURE_REPORT, false);
    expect(html).toContain('data-group="Direct"');
    expect(html).toContain('data-group="By similarity"');
    expect(html).toContain('data-group="Alternative suggestions"');
    expect(html).toContain("qc1");
    expect(html).toContain("qc4");
    expect(html).toContain("DirectFound");
  });

  it("shows status badges sourced from the server", () => {
    const html = renderReport(FIXTURE_REPORT, false);
    expect(html).toContain('class="badge badge-closed">Closed</span>');
    expect(html).toContain('class="badge badge-ongoing">Ongoing</span>');
  });

  it("renders the empty state for NoneFound", () => {
    const html = renderReport(
      { ...FIXTURE_REPORT, cascade_stage: "NoneFound", direct: [], similarity: [] },
      false,
    );
    expect(html).toContain("No direct, by-similarity, or alternative");
    expect(html).not.toContain('data-group="Direct"');
  });

  it("renders suggestion scores with the non-verdict note and rule tooltip", () => {
    const html = renderReport(FIXTURE_ALTERNATIVE_REPORT, false);
    expect(html).toContain("0.9321");
    expect(html).toContain("similarity score, not a qualification verdict");
    expect(html).toContain("±5 µm");
  });

  it("annotates decided candidates and offers buttons on undecided ones", () => {
    const html = renderReport(FIXTURE_ALTERNATIVE_REPORT, false);
    expect(html).toContain("Accept by designer");
    expect(html).toContain('data-action="accept-alt" data-subject="P7000001:qa1"');
    expect(html).not.toContain('data-subject="P7000001:qa2"');
  });

  it("offers no mutation buttons in read-only mode", () => {
    const html = renderReport(FIXTURE_ALTERNATIVE_REPORT, true);
    expect(html).not.toContain("data-action=");
    expect(html).toContain("read-only");
  });

  it("escapes server-provided text", () => {
    const report = {
      ...FIXTURE_REPORT,
      component: { ...FIXTURE_REPORT.component, part_number: "<img>" },
      direct: [],
      similarity: [],
      alternative: [],
    };
    const html = renderReport(report, false);
    expect(html).toContain("&lt;img&gt;");
    expect(html).not.toContain("<img>");
  });
});

describe("not-found and banners", () => {
  it("renders a friendly unknown-part-number message", () => {
    expect(renderNotFound("NOPE")).toContain("Unknown part number");
  });

  it("renders retryable banners with a retry control", () => {
    const html = renderBanner("Service unreachable.", true);
    expect(html).toContain("Service unreachable.");
    expect(html).toContain('data-action="retry"');
  });
});

describe("rule workshop", () => {
  const rules = [
    { id: 1, variants: ["ABC", "ABC Corp"], canonical: "ABC", state: "Proposed" },
  ];

  it("shows variants, canonical, and the three decisions", () => {
    const html = renderRuleCards(rules, false);
    expect(html).toContain("ABC Corp");
    expect(html).toContain("<b>ABC</b>");
    for (const action of ["accept-rule", "edit-rule", "reject-rule"]) {
      expect(html).toContain(`data-action="${action}"`);
    }
  });

  it("hides decisions in read-only mode", () => {
    const html = renderRuleCards(rules, true);
    expect(html).not.toContain("data-action=");
  });

  it("renders the empty state", () => {
    expect(renderRuleCards([], false)).toContain("No rules waiting");
  });
});

describe("pn queue", () => {
  const items = [
    {
      qual_number: "qc9",
      candidate_pn: "P5555555",
      reason: "NotInPlm",
      notes: "ref (pn P5555555) reflow verified",
    },
  ];

  it("highlights the candidate token inside the note", () => {
    const html = renderPnQueue(items, false);
    expect(html).toContain("<mark>P5555555</mark>");
    expect(html).toContain("NotInPlm");
    expect(html).toContain('data-action="resolve-pn"');
    expect(html).toContain('data-verdict="qc9"');
  });

  it("renders inputs only when mutations are allowed", () => {
    const html = renderPnQueue(items, true);
    expect(html).not.toContain("data-pn-input");
  });

  it("keeps notes safe when candidate is absent", () => {
    expect(highlightCandidate("a < b", null)).toBe("a &lt; b");
  });
});

describe("small helpers", () => {
  it("escapes the five specials", () => {
    expect(escapeHtml(`<&>"'`)).toBe("&lt;&amp;&gt;&quot;&#39;");
  });

  it("unknown statuses fall back to a neutral badge", () => {
    expect(statusBadge("Weird")).toContain("badge-unknown");
  });

  it("renders pending counts per queue", () => {
    const html = renderPendingCounts({ rules: 3, pn: 7 });
    expect(html).toContain('data-queue="rules">3<');
    expect(html).toContain('data-queue="pn">7<');
  });
});
