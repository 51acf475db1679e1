/**
 * Pure presentation logic for the review queue: which fields a reviewer
 * sees for a record and in what order.  Kept free of DOM and fetch so the
 * ordering rules are directly testable.
 */

import type { CardRecord, ServiceConfig, StoredRecord } from "./types.js";

export interface ReviewField {
  name: string;
  value: string;
  /** Extraction confidence, or null for fields without a confidence twin. */
  conf: number | null;
  flagged: boolean;
}

/**
 * Order a record's correctable fields for review: flagged fields first,
 * in the server's flagging order, then the remaining correctable fields
 * in their canonical order.
 */
export function orderFields(item: StoredRecord, config: ServiceConfig): ReviewField[] {
  const flagged = new Set(item.flagged_fields);
  const confPaired = new Set(config.conf_paired_fields);
  const describe = (name: string): ReviewField => ({
    name,
    value: String(item.record[name as keyof CardRecord]),
    conf: confPaired.has(name)
      ? (item.record[`${name}conf` as keyof CardRecord] as number)
      : null,
    flagged: flagged.has(name),
  });
  const head = item.flagged_fields.map(describe);
  const tail = config.correctable_fields
    .filter((name) => !flagged.has(name))
    .map(describe);
  return [...head, ...tail];
}

export interface QueueSummary {
  recordId: string;
  shortId: string;
  name: string;
  identifier: string;
  flaggedCount: number;
  worstConf: number | null;
  revision: number;
}

/** Compact queue-list line for one pending record. */
export function summarize(item: StoredRecord): QueueSummary {
  const confs = item.flagged_fields
    .map((name) => item.record[`${name}conf` as keyof CardRecord])
    .filter((v): v is number => typeof v === "number");
  return {
    recordId: item.record_id,
    shortId: item.record_id.slice(0, 12),
    name: item.record.name,
    identifier: item.record.identifier,
    flaggedCount: item.flagged_fields.length,
    worstConf: confs.length > 0 ? Math.min(...confs) : null,
    revision: item.revision,
  };
}

/** Most urgent first: lowest worst-confidence, ties by flagged count. */
export function sortQueue(items: StoredRecord[]): StoredRecord[] {
  const key = (item: StoredRecord): [number, number] => {
    const s = summarize(item);
    return [s.worstConf ?? 101, -s.flaggedCount];
  };
  return [...items].sort((a, b) => {
    const [wa, ca] = key(a);
    const [wb, cb] = key(b);
    return wa - wb || ca - cb || a.record_id.localeCompare(b.record_id);
  });
}
