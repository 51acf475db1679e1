#!/usr/bin/env python3
"""Run the full fixture evaluation: batch-extract every card, then score it.

Copies the card images and their frozen OCR dumps into a work directory
(so the fixture tree stays clean), runs the batch extractor there, and
scores the outputs against the gold annotations.  This is the same flow an
operator would run on a real corpus directory.

Usage:
    python3 scripts/run_eval.py
    python3 scripts/run_eval.py --jobs 6 --report eval-out/report.json
"""

import argparse
import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from ktpx.cli import main as ktpx_main  # noqa: E402


def parse_args() -> argparse.Namespace:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cards", type=Path, default=ROOT / "fixtures" / "cards",
                    help="directory of card images + sidecar .tsv dumps")
    ap.add_argument("--gold", type=Path, default=ROOT / "fixtures" / "gold.json")
    ap.add_argument("--cascade", type=Path,
                    default=ROOT / "fixtures" / "cascade_fixture.json")
    ap.add_argument("--out", type=Path, default=ROOT / "eval-out",
                    help="work directory for extraction outputs")
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--report", type=Path, default=None,
                    help="also write the score report as JSON")
    return ap.parse_args()


def main() -> int:
    args = parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for src in sorted(args.cards.iterdir()):
        if src.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp", ".tsv"):
            shutil.copy(src, args.out / src.name)

    rc = ktpx_main(["batch", str(args.out),
                    "--jobs", str(args.jobs),
                    "--cascade", str(args.cascade)])
    if rc != 0:
        return rc

    eval_args = ["eval", "--gold", str(args.gold), "--pred", str(args.out)]
    if args.report:
        eval_args += ["--report", str(args.report)]
    return ktpx_main(eval_args)


if __name__ == "__main__":
    raise SystemExit(main())
