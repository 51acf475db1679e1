"""Field-level scoring and latency measurement for extraction runs.

Scoring is exact string match after canonicalization (uppercase, collapse
whitespace, trim), micro-averaged over every (card, field) pair named in
the gold annotations.  A wrong non-empty prediction counts as both a false
positive and a false negative, the usual slot-filling convention.
Confidence fields never participate in scoring.
"""

from __future__ import annotations

import enum
import json
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .errors import DatasetError
from .record import FIELD_ORDER, KtpRecord

CAPTURE_KINDS = ("camera", "scanner")


def canonicalize(value: str) -> str:
    return " ".join(value.upper().split())


class Outcome(enum.Enum):
    """How one predicted field compares to its gold value."""

    TRUE_POSITIVE = (1, 0, 0)
    WRONG_VALUE = (0, 1, 1)
    FALSE_NEGATIVE = (0, 0, 1)
    FALSE_POSITIVE = (0, 1, 0)
    TRUE_NEGATIVE = (0, 0, 0)

    @property
    def tp(self) -> int:
        return self.value[0]

    @property
    def fp(self) -> int:
        return self.value[1]

    @property
    def fn(self) -> int:
        return self.value[2]


def score_field(predicted: str, expected: str) -> Outcome:
    """Compare one canonicalized prediction against its gold value."""
    if expected and predicted:
        return Outcome.TRUE_POSITIVE if predicted == expected else Outcome.WRONG_VALUE
    if expected:
        return Outcome.FALSE_NEGATIVE
    if predicted:
        return Outcome.FALSE_POSITIVE
    return Outcome.TRUE_NEGATIVE


@dataclass(frozen=True)
class GoldAnnotation:
    card_id: str
    capture_kind: str
    expected: Mapping[str, str]

    def __post_init__(self) -> None:
        if self.capture_kind not in CAPTURE_KINDS:
            raise DatasetError(
                f"card {self.card_id!r}: capture_kind must be one of "
                f"{CAPTURE_KINDS}, got {self.capture_kind!r}")
        unknown = sorted(set(self.expected) - set(FIELD_ORDER))
        if unknown:
            raise DatasetError(
                f"card {self.card_id!r}: unknown gold fields {unknown}")


def load_gold(path: str | Path) -> list[GoldAnnotation]:
    """Read a gold file: a JSON array of card annotations.

    Expected values are canonicalized on load so the stored file may use
    any whitespace or case convention.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise DatasetError("gold file must be a JSON array")
    seen: set[str] = set()
    out = []
    for entry in raw:
        try:
            ann = GoldAnnotation(
                card_id=entry["card_id"],
                capture_kind=entry["capture_kind"],
                expected={k: canonicalize(v) for k, v in entry["expected"].items()},
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise DatasetError(f"malformed gold entry: {entry!r}") from exc
        if ann.card_id in seen:
            raise DatasetError(f"duplicate card_id {ann.card_id!r}")
        seen.add(ann.card_id)
        out.append(ann)
    return out


@dataclass(frozen=True)
class _Tally:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def add(self, outcome: Outcome) -> "_Tally":
        return _Tally(self.tp + outcome.tp, self.fp + outcome.fp,
                      self.fn + outcome.fn)

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f_score(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass(frozen=True)
class EvalReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f_score: float
    per_capture_kind: dict[str, tuple[float, float, float]]
    mean_latency_ms: float
    per_field_breakdown: dict[str, tuple[int, int, int]]

    def to_dict(self) -> dict:
        return {
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "precision": self.precision,
            "recall": self.recall,
            "f_score": self.f_score,
            "per_capture_kind": {
                kind: {"precision": p, "recall": r, "f_score": f}
                for kind, (p, r, f) in self.per_capture_kind.items()
            },
            "mean_latency_ms": self.mean_latency_ms,
            "per_field_breakdown": {
                name: {"tp": tp, "fp": fp, "fn": fn}
                for name, (tp, fp, fn) in self.per_field_breakdown.items()
            },
        }


def evaluate(
    predictions: Mapping[str, KtpRecord],
    gold: Iterable[GoldAnnotation],
    latencies_ms: Iterable[float] = (),
) -> EvalReport:
    """Micro-averaged precision/recall/F over all gold (card, field) pairs.

    ``predictions`` is keyed by card id; the key sets must match the gold
    ids exactly.  (Records themselves carry no id, so the alignment that
    makes the mismatch error reportable has to come from the mapping.)
    """
    gold = list(gold)
    gold_ids = {g.card_id for g in gold}
    missing = sorted(gold_ids - set(predictions))
    extra = sorted(set(predictions) - gold_ids)
    if missing or extra:
        raise DatasetError(
            f"prediction/gold id mismatch: missing={missing} extra={extra}")

    overall = _Tally()
    by_kind: dict[str, _Tally] = {}
    by_field: dict[str, _Tally] = {}
    for ann in gold:
        rec = predictions[ann.card_id]
        kind_tally = by_kind.setdefault(ann.capture_kind, _Tally())
        for name, want in ann.expected.items():
            outcome = score_field(canonicalize(getattr(rec, name)), want)
            overall = overall.add(outcome)
            kind_tally = kind_tally.add(outcome)
            by_field[name] = by_field.setdefault(name, _Tally()).add(outcome)
        by_kind[ann.capture_kind] = kind_tally

    latencies = list(latencies_ms)
    return EvalReport(
        true_positives=overall.tp,
        false_positives=overall.fp,
        false_negatives=overall.fn,
        precision=overall.precision,
        recall=overall.recall,
        f_score=overall.f_score,
        per_capture_kind={
            kind: (t.precision, t.recall, t.f_score)
            for kind, t in sorted(by_kind.items())
        },
        mean_latency_ms=statistics.fmean(latencies) if latencies else 0.0,
        per_field_breakdown={
            name: (t.tp, t.fp, t.fn) for name, t in sorted(by_field.items())
        },
    )


@dataclass(frozen=True)
class ExtractionTiming:
    total_ms: float
    engine_ms: float

    @property
    def engine_excluded_ms(self) -> float:
        return max(0.0, self.total_ms - self.engine_ms)


def time_extraction(run: Callable[[bytes], object],
                    image_bytes: bytes) -> tuple[object, ExtractionTiming]:
    """Wall-clock one full extraction.

    ``run`` is the pipeline entry point; if its result exposes an
    ``engine_ms`` attribute, OCR engine time is reported separately from
    the in-process work.
    """
    t0 = time.perf_counter()
    result = run(image_bytes)
    total_ms = (time.perf_counter() - t0) * 1000.0
    engine_ms = float(getattr(result, "engine_ms", 0.0))
    return result, ExtractionTiming(total_ms=total_ms, engine_ms=engine_ms)


def render_report(report: EvalReport) -> str:
    """Human-readable summary table for terminal output."""
    lines = [
        f"{'':12s}{'precision':>10s}{'recall':>10s}{'f-score':>10s}",
        f"{'overall':12s}{report.precision:10.3f}{report.recall:10.3f}"
        f"{report.f_score:10.3f}",
    ]
    for kind, (p, r, f) in report.per_capture_kind.items():
        lines.append(f"{kind:12s}{p:10.3f}{r:10.3f}{f:10.3f}")
    lines.append("")
    lines.append(f"{'field':18s}{'tp':>6s}{'fp':>6s}{'fn':>6s}")
    for name, (tp, fp, fn) in report.per_field_breakdown.items():
        lines.append(f"{name:18s}{tp:6d}{fp:6d}{fn:6d}")
    lines.append("")
    lines.append(f"tp={report.true_positives} fp={report.false_positives} "
                 f"fn={report.false_negatives}  "
                 f"mean latency {report.mean_latency_ms:.1f} ms")
    return "\n".join(lines)
