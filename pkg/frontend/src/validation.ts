/**
 * Client-side mirror of the server's field rules.
 *
 * The rule set comes from ``GET /v1/config`` and covers exactly the
 * correctable fields, so "no rule for this field" means the field cannot
 * be corrected at all.  Within a rule the server's semantics are:
 *
 * - the empty string is always legal (extraction may leave fields blank),
 * - ``pattern`` must match the whole value,
 * - ``enum`` is a closed vocabulary,
 * - ``literal`` is an extra allowed spelling that bypasses the pattern
 *   (used for the lifetime expiry marker).
 */

import type { FieldRule, RuleSet } from "./types.js";

export function checkValue(rule: FieldRule | undefined, value: string): string | null {
  if (rule === undefined) {
    return "field is not correctable";
  }
  if (value === "") {
    return null;
  }
  if (rule.literal !== undefined && value === rule.literal) {
    return null;
  }
  if (rule.enum !== undefined && !rule.enum.includes(value)) {
    return `must be one of ${rule.enum.join(", ")}`;
  }
  if (rule.pattern !== undefined) {
    const re = new RegExp(`^(?:${rule.pattern})$`);
    if (!re.test(value)) {
      return rule.literal !== undefined
        ? `must match ${rule.pattern} or be "${rule.literal}"`
        : `must match ${rule.pattern}`;
    }
  }
  return null;
}

/** Validate a whole edit set; returns field → problem, empty when clean. */
export function checkEdits(
  rules: RuleSet,
  edits: Record<string, string>,
): Record<string, string> {
  const problems: Record<string, string> = {};
  for (const [field, value] of Object.entries(edits)) {
    const problem = checkValue(rules[field], value);
    if (problem !== null) {
      problems[field] = problem;
    }
  }
  return problems;
}
