export const CATEGORIES = [
  "ClinicallyRelevant",
  "ClinicallyIrrelevant",
  "ProviderClinicInfo",
  "InsensitiveIdentifier",
  "CorrectDeidMissedByHuman",
  "Unknown",
] as const;

export type Category = (typeof CATEGORIES)[number];

export const SEVERITIES = ["High", "Low", "NotApplicable"] as const;

export type Severity = (typeof SEVERITIES)[number];

export interface Sample {
  key: string;
  file_name: string;
  ordinal: number;
  edit_distance: number;
  original_token: string;
  deid_token: string;
  context: string;
  category: Category;
  severity: Severity;
  version: number;
}

export interface SamplePage {
  total: number;
  total_all: number;
  annotated: number;
  page: number;
  page_size: number;
  samples: Sample[];
}

export type Filter = "all" | "unannotated" | Category;

/** Severity applies exactly to clinically relevant changes; the server
 * enforces the same rule, the UI only mirrors it. */
export function severityEnabled(category: Category | null): boolean {
  return category === "ClinicallyRelevant";
}

/** Split a context string into its " / "-separated slots and locate the
 * original/deid pair so it can be highlighted in place. */
export function contextSlots(sample: Sample): { text: string; kind: "plain" | "orig" | "deid" }[] {
  const slots = sample.context.split(" / ");
  const interior = slots.slice(1, -1);
  let origIndex = -1;
  for (let i = 0; i + 1 < interior.length; i++) {
    if (interior[i] === sample.original_token && interior[i + 1] === sample.deid_token) {
      origIndex = i;
      // a full context has two leading neighbors; prefer that reading when
      // repeated tokens make the match ambiguous
      if (interior.length === 6 && i === 2) break;
      if (interior.length < 6) break;
    }
  }
  return slots.map((text, i) => {
    const j = i - 1; // interior index
    if (j === origIndex) return { text, kind: "orig" as const };
    if (j === origIndex + 1) return { text, kind: "deid" as const };
    return { text, kind: "plain" as const };
  });
}
