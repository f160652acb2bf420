import type { MatchEntry, Report } from "../src/api.js";

function entry(overrides: Partial<MatchEntry> & { number: string }): MatchEntry {
  return {
    status: "Closed",
    match_type: "Direct",
    package_code: "FP1",
    subpackage_code: "a1",
    manufacturer_name: "ABC Corp",
    qualification_type: "full",
    description: "Qualification of FP1 parts",
    documentation: "DOC-00001",
    notes: "Assembly FP1 qualified (pn P1111111) with SMT process",
    part_number: "P1111111",
    ...overrides,
  };
}

/** Shaped exactly like the service's report JSON for the reference rows. */
export const FIXTURE_REPORT: Report = {
  component: {
    part_number: "P1111111",
    package_code: "FP1",
    subpackage_code: "a1",
    manufacturer: "ABC",
    family: "Hybrid",
  },
  cascade_stage: "DirectFound",
  direct: [entry({ number: "qc1" })],
  similarity: [
    entry({ number: "qc4", match_type: "Similarity", status: "Ongoing" }),
  ],
  alternative: [],
};

export const FIXTURE_ALTERNATIVE_REPORT: Report = {
  component: {
    part_number: "P7000001",
    package_code: "FP9",
    subpackage_code: "z1",
    manufacturer: "Velta",
    family: "FP",
  },
  cascade_stage: "AlternativeProposed",
  direct: [],
  similarity: [],
  alternative: [
    entry({
      number: "qa1",
      match_type: "Alternative",
      score: 0.9321,
      label: "suggestion",
      decision: null,
    }),
    entry({
      number: "qa2",
      match_type: "Alternative",
      score: 0.8712,
      label: "suggestion",
      decision: {
        decision: "Accept",
        user: "designer",
        timestamp: "2026-08-09T10:00:00+00:00",
        comment: null,
      },
    }),
  ],
};
