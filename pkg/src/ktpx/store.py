"""Append-only persistence for extraction results and operator corrections.

The store is a JSONL event log: one ``extraction`` event per new card, one
``correction`` event per review submission.  Nothing is ever rewritten;
current state is the left fold of the log, rebuilt on open.  That keeps
operator actions auditable and makes the file trivially safe to back up
while the service runs.

Record identity is the SHA-256 of the input image bytes, so re-submitting
the same image is a no-op that returns the already-stored result.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .errors import (
    RecordValidationError,
    StaleRevisionError,
    StoreError,
    TerminalStatusError,
)
from .record import (
    CORRECTABLE_FIELDS,
    FIELD_ORDER,
    KtpRecord,
    from_json,
    to_json,
    validate,
)

STATUS_PENDING = "pending-review"
STATUS_REVIEWED = "reviewed"
STATUS_AUTO_ACCEPTED = "auto-accepted"


def record_id_for(image_bytes: bytes) -> str:
    return hashlib.sha256(image_bytes).hexdigest()


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class Correction:
    field: str
    old: str
    new: str
    timestamp: str


@dataclass(frozen=True)
class StoredResult:
    record_id: str
    record: KtpRecord
    flagged_fields: tuple[str, ...]
    status: str
    revision: int
    corrections: tuple[Correction, ...] = ()

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "record": {name: getattr(self.record, name) for name in FIELD_ORDER},
            "flagged_fields": list(self.flagged_fields),
            "status": self.status,
            "revision": self.revision,
            "corrections": [dataclasses.asdict(c) for c in self.corrections],
        }


class ResultStore:
    """Single-writer view over one event-log file.

    All mutation goes through one lock; reads return immutable snapshots.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._state: dict[str, StoredResult] = {}
        if self.path.exists():
            self._replay()

    def _replay(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    event = json.loads(raw)
                    self._fold(event)
                except (StoreError, RecordValidationError):
                    raise
                except Exception as exc:
                    raise StoreError(f"{self.path}:{line_no}: bad event: {exc}") from exc

    def _fold(self, event: dict) -> None:
        kind = event.get("event")
        rid = event["record_id"]
        if kind == "extraction":
            record = from_json(json.dumps(event["record"]))
            self._state[rid] = StoredResult(
                record_id=rid,
                record=record,
                flagged_fields=tuple(event["flagged_fields"]),
                status=event["status"],
                revision=0,
            )
        elif kind == "correction":
            try:
                current = self._state[rid]
            except KeyError:
                raise StoreError(f"correction for unknown record {rid!r}")
            edits = {e["field"]: e["new"] for e in event["edits"]}
            corrections = current.corrections + tuple(
                Correction(e["field"], e["old"], e["new"], event["at"])
                for e in event["edits"])
            self._state[rid] = dataclasses.replace(
                current,
                record=dataclasses.replace(current.record, **edits),
                status=STATUS_REVIEWED,
                revision=event["revision"],
                corrections=corrections,
            )
        else:
            raise StoreError(f"unknown event kind {kind!r}")

    def _append(self, event: dict) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")
            fh.flush()

    # -- queries ---------------------------------------------------------

    def get(self, record_id: str) -> StoredResult:
        with self._lock:
            return self._state[record_id]

    def all_results(self) -> list[StoredResult]:
        with self._lock:
            return list(self._state.values())

    def pending(self) -> list[StoredResult]:
        """Review queue: records still waiting for an operator, oldest first."""
        with self._lock:
            return [r for r in self._state.values() if r.status == STATUS_PENDING]

    # -- mutations -------------------------------------------------------

    def record_extraction(
        self,
        record_id: str,
        record: KtpRecord,
        flagged_fields: Iterable[str],
    ) -> tuple[StoredResult, bool]:
        """Store a fresh extraction; returns (result, created).

        A record whose image was seen before is returned as-is -- the log
        gains nothing and the original result (including any review work)
        stands.
        """
        with self._lock:
            existing = self._state.get(record_id)
            if existing is not None:
                return existing, False
            flagged = tuple(flagged_fields)
            status = STATUS_PENDING if flagged else STATUS_AUTO_ACCEPTED
            stored = StoredResult(
                record_id=record_id,
                record=record,
                flagged_fields=flagged,
                status=status,
                revision=0,
            )
            self._append({
                "event": "extraction",
                "record_id": record_id,
                "at": _utcnow(),
                "record": json.loads(to_json(record)),
                "flagged_fields": list(flagged),
                "status": status,
            })
            self._state[record_id] = stored
            return stored, True

    def apply_corrections(
        self,
        record_id: str,
        edits: Mapping[str, str],
        revision: int,
    ) -> StoredResult:
        """Apply an operator's correction batch under optimistic concurrency.

        ``revision`` must equal the record's current revision.  An empty
        ``edits`` map is a confirm-all: the values stand, the record still
        moves to reviewed.  Validation runs on the fully merged record, so
        a batch either applies whole or not at all.
        """
        with self._lock:
            current = self._state[record_id]
            if current.status == STATUS_AUTO_ACCEPTED:
                raise TerminalStatusError(
                    f"record {record_id} was auto-accepted; nothing to review")
            if revision != current.revision:
                raise StaleRevisionError(expected=current.revision, got=revision)
            unknown = {name: "not a correctable field"
                       for name in edits if name not in CORRECTABLE_FIELDS}
            if unknown:
                raise RecordValidationError(unknown)
            candidate = dataclasses.replace(current.record, **edits)
            problems = validate(candidate)
            if problems:
                raise RecordValidationError(problems)

            at = _utcnow()
            batch = tuple(
                Correction(field=name, old=getattr(current.record, name),
                           new=value, timestamp=at)
                for name, value in sorted(edits.items()))
            updated = StoredResult(
                record_id=record_id,
                record=candidate,
                flagged_fields=current.flagged_fields,
                status=STATUS_REVIEWED,
                revision=current.revision + 1,
                corrections=current.corrections + batch,
            )
            self._append({
                "event": "correction",
                "record_id": record_id,
                "at": at,
                "revision": updated.revision,
                "edits": [{"field": c.field, "old": c.old, "new": c.new}
                          for c in batch],
            })
            self._state[record_id] = updated
            return updated
