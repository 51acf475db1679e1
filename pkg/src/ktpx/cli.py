"""Command-line entry points: extract, batch, eval, serve."""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from .errors import KtpxError
from .evaluate import evaluate, load_gold, render_report
from .pipeline import PipelineConfig, extract_card
from .record import from_json, to_json
from .store import ResultStore

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=int, default=127,
                   help="binarization threshold 0-255 (default 127)")
    p.add_argument("--lang", default="ind",
                   help="OCR language code (default ind)")
    p.add_argument("--grammar", type=Path, default=None,
                   help="field grammar JSON (default: built-in card grammar)")
    p.add_argument("--cascade", type=Path, default=None,
                   help="face cascade JSON (default: skip face detection)")


def _config(args: argparse.Namespace) -> PipelineConfig:
    return PipelineConfig(
        threshold=args.threshold,
        ocr_language=args.lang,
        grammar_path=args.grammar,
        cascade_path=args.cascade,
    )


def _default_out(image_path: Path) -> Path:
    return image_path.with_name(image_path.stem + ".ktp.json")


def _sidecar_dump(image_path: Path) -> Optional[str]:
    candidate = image_path.with_suffix(".tsv")
    if candidate.is_file():
        return candidate.read_text(encoding="utf-8")
    return None


def _extract_one(image_path: Path, config: PipelineConfig,
                 dump_text: Optional[str], out_path: Path) -> float:
    """Run one extraction, write the record JSON; returns wall-clock ms."""
    image_bytes = image_path.read_bytes()
    t0 = time.perf_counter()
    result = extract_card(image_bytes, config, ocr_dump_text=dump_text)
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    out_path.write_bytes(to_json(result.record))
    return elapsed_ms


def cmd_extract(args: argparse.Namespace) -> int:
    image_path = Path(args.image)
    if not image_path.is_file():
        print(f"error: file not found: {image_path}", file=sys.stderr)
        return 1
    dump_text = None
    if args.ocr_dump is not None:
        dump_path = Path(args.ocr_dump)
        if not dump_path.is_file():
            print(f"error: file not found: {dump_path}", file=sys.stderr)
            return 1
        dump_text = dump_path.read_text(encoding="utf-8")
    out_path = Path(args.out) if args.out else _default_out(image_path)
    try:
        elapsed = _extract_one(image_path, _config(args), dump_text, out_path)
    except (KtpxError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{out_path} ({elapsed:.0f} ms)")
    return 0


def cmd_batch(args: argparse.Namespace) -> int:
    root = Path(args.directory)
    if not root.is_dir():
        print(f"error: not a directory: {root}", file=sys.stderr)
        return 1
    images = sorted(p for p in root.iterdir()
                    if p.suffix.lower() in IMAGE_SUFFIXES)
    config = _config(args)

    def run(image_path: Path):
        # A sidecar <stem>.tsv word dump replaces the engine call.
        try:
            ms = _extract_one(image_path, config, _sidecar_dump(image_path),
                              _default_out(image_path))
            return image_path, ms, None
        except (KtpxError, OSError, ValueError) as exc:
            return image_path, 0.0, exc

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        outcomes = list(pool.map(run, images))

    failures = [(p, err) for p, _, err in outcomes if err is not None]
    latencies = [ms for _, ms, err in outcomes if err is None]
    for path, err in failures:
        print(f"error: {path.name}: {err}", file=sys.stderr)
    mean = statistics.fmean(latencies) if latencies else 0.0
    print(f"{len(latencies)} extracted, {len(failures)} failed, "
          f"mean {mean:.0f} ms/card")
    return 1 if failures else 0


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        gold = load_gold(args.gold)
        pred_dir = Path(args.pred)
        predictions = {}
        for ann in gold:
            pred_path = pred_dir / f"{ann.card_id}.ktp.json"
            if pred_path.is_file():
                predictions[ann.card_id] = from_json(pred_path.read_bytes())
        report = evaluate(predictions, gold)
    except (KtpxError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(render_report(report))
    if args.report:
        Path(args.report).write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        print(f"report written to {args.report}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    frontend = Path(args.frontend) if args.frontend else None
    app = create_app(_config(args), ResultStore(args.store), frontend_dir=frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ktpx",
        description="Indonesian ID-card field extraction: OCR repair, "
                    "face detection, and a review service.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract one card image to JSON")
    p.add_argument("image", help="card image file")
    _add_config_flags(p)
    p.add_argument("--ocr-dump", type=Path, default=None,
                   help="pre-captured OCR word dump; engine is not invoked")
    p.add_argument("--out", type=Path, default=None,
                   help="output path (default: <image stem>.ktp.json)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("batch", help="extract every image in a directory")
    p.add_argument("directory", help="directory of card images")
    _add_config_flags(p)
    p.add_argument("--jobs", type=int, default=4,
                   help="concurrent workers (default 4)")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("eval", help="score predictions against gold annotations")
    p.add_argument("--gold", required=True, help="gold annotation JSON file")
    p.add_argument("--pred", required=True,
                   help="directory of <card_id>.ktp.json predictions")
    p.add_argument("--report", type=Path, default=None,
                   help="also write the full report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the extraction + review HTTP service")
    _add_config_flags(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--store", type=Path, default=Path("ktpx-store.jsonl"),
                   help="event-log path (default ./ktpx-store.jsonl)")
    p.add_argument("--frontend", type=Path, default=None,
                   help="built review UI directory to serve at /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
