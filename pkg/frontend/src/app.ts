/**
 * Review queue UI shell.
 *
 * Wires the typed API client and the pure queue/validation helpers to the
 * DOM: a pending-record list on the left, the selected record's fields on
 * the right with flagged fields first, and a correction form that submits
 * against the revision the reviewer loaded.  A stale revision comes back
 * as a conflict banner with a reload action rather than a silent retry.
 */

import { ApiError, ConflictError, ReviewApi, ValidationRejection } from "./api.js";
import { orderFields, sortQueue, summarize } from "./queue.js";
import type { ReviewField } from "./queue.js";
import type { ServiceConfig, StoredRecord } from "./types.js";
import { checkEdits } from "./validation.js";

const api = new ReviewApi("");

let config: ServiceConfig | null = null;
let queueItems: StoredRecord[] = [];
let selected: StoredRecord | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function escapeHtml(text: string): string {
  const div = document.createElement("div");
  div.textContent = text;
  return div.innerHTML;
}

function banner(kind: "info" | "error" | "conflict", message: string): void {
  const box = el<HTMLDivElement>("banner");
  box.className = `banner ${kind}`;
  box.textContent = message;
  box.style.display = message ? "block" : "none";
}

function clearBanner(): void {
  el<HTMLDivElement>("banner").style.display = "none";
}

async function loadQueue(): Promise<void> {
  queueItems = sortQueue(await api.queue());
  renderQueue();
}

function renderQueue(): void {
  const list = el<HTMLDivElement>("queue-list");
  el<HTMLSpanElement>("queue-count").textContent = String(queueItems.length);
  if (queueItems.length === 0) {
    list.innerHTML = '<div class="empty">Queue is empty — nothing to review.</div>';
    return;
  }
  list.innerHTML = queueItems
    .map((item) => {
      const s = summarize(item);
      const active = selected?.record_id === item.record_id ? " active" : "";
      return `
        <div class="queue-item${active}" data-id="${s.recordId}">
          <div class="queue-item-top">
            <span class="mono">${s.shortId}…</span>
            <span class="badge">${s.flaggedCount} flagged</span>
          </div>
          <div class="queue-item-name">${escapeHtml(s.name || "(no name)")}</div>
          <div class="queue-item-sub">
            NIK ${escapeHtml(s.identifier || "—")}
            ${s.worstConf !== null ? ` · worst conf ${s.worstConf}` : ""}
          </div>
        </div>`;
    })
    .join("");
  for (const node of list.querySelectorAll<HTMLDivElement>(".queue-item")) {
    node.onclick = () => void select(node.dataset.id!);
  }
}

async function select(recordId: string): Promise<void> {
  clearBanner();
  selected = await api.record(recordId);
  renderQueue();
  renderDetail();
}

function fieldRow(field: ReviewField): string {
  const conf =
    field.conf === null
      ? '<span class="conf none">—</span>'
      : `<span class="conf${field.flagged ? " low" : ""}">${field.conf}</span>`;
  return `
    <div class="field-row${field.flagged ? " flagged" : ""}" data-field="${field.name}">
      <label for="edit-${field.name}">${field.name}</label>
      ${conf}
      <input id="edit-${field.name}" name="${field.name}"
             value="${escapeHtml(field.value)}" autocomplete="off" />
      <span class="field-error" id="error-${field.name}"></span>
    </div>`;
}

function renderDetail(): void {
  const pane = el<HTMLDivElement>("detail");
  if (!selected || !config) {
    pane.innerHTML = '<div class="empty">Select a record to review.</div>';
    return;
  }
  const fields = orderFields(selected, config);
  const photo = selected.record.facePhoto
    ? `<img class="portrait" alt="portrait"
           src="data:image/png;base64,${selected.record.facePhoto}" />`
    : "";
  pane.innerHTML = `
    <div class="detail-head">
      <div>
        <div class="mono">${selected.record_id}</div>
        <div class="detail-sub">
          status ${selected.status} · revision ${selected.revision}
          · extracted ${escapeHtml(selected.record.extractedAt)}
        </div>
      </div>
      ${photo}
    </div>
    <form id="correction-form">
      ${fields.map(fieldRow).join("")}
      <div class="form-actions">
        <button type="submit" id="submit-btn">Submit corrections</button>
        <button type="button" id="confirm-btn">Confirm as extracted</button>
      </div>
    </form>`;
  el<HTMLFormElement>("correction-form").onsubmit = (e) => {
    e.preventDefault();
    void submit(collectEdits(fields));
  };
  el<HTMLButtonElement>("confirm-btn").onclick = () => void submit({});
}

function collectEdits(fields: ReviewField[]): Record<string, string> {
  const edits: Record<string, string> = {};
  for (const field of fields) {
    const input = el<HTMLInputElement>(`edit-${field.name}`);
    if (input.value !== field.value) {
      edits[field.name] = input.value;
    }
  }
  return edits;
}

function showFieldErrors(problems: Record<string, string>): void {
  for (const [field, message] of Object.entries(problems)) {
    const slot = document.getElementById(`error-${field}`);
    if (slot) slot.textContent = message;
  }
}

async function submit(edits: Record<string, string>): Promise<void> {
  if (!selected || !config) return;
  const current = selected;
  clearBanner();
  for (const slot of document.querySelectorAll(".field-error")) {
    slot.textContent = "";
  }
  const problems = checkEdits(config.validation_rules, edits);
  if (Object.keys(problems).length > 0) {
    showFieldErrors(problems);
    banner("error", "Fix the highlighted fields before submitting.");
    return;
  }
  try {
    const updated = await api.submitCorrections(
      current.record_id,
      current.revision,
      edits,
    );
    banner("info", `Record ${updated.record_id.slice(0, 12)}… marked ${updated.status}.`);
    selected = null;
    renderDetail();
    await loadQueue();
  } catch (err) {
    if (err instanceof ConflictError && err.reason === "stale-revision") {
      banner(
        "conflict",
        `Someone else reviewed this record first (you had revision ${err.got}, ` +
          `server is at ${err.expected}). Reloading the current version.`,
      );
      selected = await api.record(current.record_id);
      renderDetail();
    } else if (err instanceof ConflictError) {
      banner("conflict", `This record is final and cannot be corrected (${err.reason}).`);
    } else if (err instanceof ValidationRejection) {
      showFieldErrors(err.violations);
      banner("error", "The server rejected some values; see the highlighted fields.");
    } else if (err instanceof ApiError) {
      banner("error", err.message);
    } else {
      banner("error", String(err));
    }
  }
}

async function init(): Promise<void> {
  try {
    config = await api.config();
    el<HTMLSpanElement>("threshold").textContent = String(
      config.confidence_review_threshold,
    );
    await loadQueue();
    renderDetail();
  } catch (err) {
    banner("error", `Cannot reach the extraction service: ${String(err)}`);
  }
  el<HTMLButtonElement>("refresh-btn").onclick = () => void loadQueue();
}

void init();
