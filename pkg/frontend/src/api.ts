/**
 * Thin typed client for the review endpoints.
 *
 * Every helper throws on non-2xx responses; the two structured failure
 * modes the review flow has to handle get their own error classes so
 * callers can branch without inspecting status codes:
 *
 * - `ConflictError` for 409 (stale revision or terminal record),
 * - `ValidationRejection` for a 422 carrying per-field violations.
 */

import type { RuleSet, ServiceConfig, StoredRecord } from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
    public readonly detail: unknown = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ConflictError extends ApiError {
  public readonly reason: string;
  public readonly expected: number | null;
  public readonly got: number | null;

  constructor(status: number, detail: Record<string, unknown>) {
    const reason = String(detail.reason ?? "conflict");
    super(`conflict: ${reason}`, status, detail);
    this.name = "ConflictError";
    this.reason = reason;
    this.expected = typeof detail.expected === "number" ? detail.expected : null;
    this.got = typeof detail.got === "number" ? detail.got : null;
  }
}

export class ValidationRejection extends ApiError {
  public readonly violations: Record<string, string>;

  constructor(status: number, detail: Record<string, unknown>) {
    super("correction rejected by the server", status, detail);
    this.name = "ValidationRejection";
    this.violations = (detail.violations ?? {}) as Record<string, string>;
  }
}

async function readDetail(res: Response): Promise<unknown> {
  try {
    const body = await res.json();
    return body?.detail ?? body;
  } catch {
    return null;
  }
}

async function raiseFor(res: Response): Promise<never> {
  const detail = await readDetail(res);
  if (res.status === 409 && detail && typeof detail === "object") {
    throw new ConflictError(res.status, detail as Record<string, unknown>);
  }
  if (
    res.status === 422 &&
    detail &&
    typeof detail === "object" &&
    "violations" in (detail as object)
  ) {
    throw new ValidationRejection(res.status, detail as Record<string, unknown>);
  }
  const text = typeof detail === "string" ? detail : JSON.stringify(detail);
  throw new ApiError(`request failed (${res.status}): ${text}`, res.status, detail);
}

export class ReviewApi {
  constructor(private readonly base: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await fetch(this.base + path);
    if (!res.ok) await raiseFor(res);
    return res.json() as Promise<T>;
  }

  health(): Promise<{ status: string }> {
    return this.getJson("/v1/health");
  }

  config(): Promise<ServiceConfig> {
    return this.getJson("/v1/config");
  }

  async queue(): Promise<StoredRecord[]> {
    const body = await this.getJson<{ items: StoredRecord[] }>("/v1/review/queue");
    return body.items;
  }

  record(recordId: string): Promise<StoredRecord> {
    return this.getJson(`/v1/records/${recordId}`);
  }

  /**
   * Submit corrections against the revision the reviewer was looking at.
   * An empty `edits` object confirms the record as extracted.
   */
  async submitCorrections(
    recordId: string,
    revision: number,
    edits: Record<string, string>,
  ): Promise<StoredRecord> {
    const res = await fetch(`${this.base}/v1/records/${recordId}/corrections`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ revision, edits }),
    });
    if (!res.ok) await raiseFor(res);
    return res.json() as Promise<StoredRecord>;
  }
}

/** Convenience accessor used by the app shell: rules only. */
export async function fetchRules(api: ReviewApi): Promise<RuleSet> {
  return (await api.config()).validation_rules;
}
