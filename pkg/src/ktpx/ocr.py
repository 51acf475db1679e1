"""Word-level OCR input: engine invocation and word-dump parsing.

Two ways in, one data model out. Either the external OCR engine is invoked
on an image (Indonesian language model by default) or a pre-computed
tab-separated word dump is parsed. The dump route is first-class so nothing
downstream ever needs the engine binary.

Dump format: 12 tab-separated columns with header
``level page_num block_num par_num line_num word_num left top width height conf text``
(the de-facto Tesseract TSV layout). Rows with conf -1 are layout markers
and are skipped.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

from PIL import Image

from .errors import EmptyLineError, EngineFailureError, EngineUnavailableError, ParseError
from .preproc import RasterImage

DUMP_COLUMNS = [
    "level", "page_num", "block_num", "par_num", "line_num", "word_num",
    "left", "top", "width", "height", "conf", "text",
]

DEFAULT_LANGUAGE = "ind"

# {image} and {lang} placeholders; overridable via the KTPX_OCR_CMD env var.
DEFAULT_ENGINE_CMD = "tesseract {image} stdout -l {lang} tsv"

ENGINE_CMD_ENV_VAR = "KTPX_OCR_CMD"


@dataclass(frozen=True)
class OcrWord:
    text: str
    confidence: int
    left: int
    top: int
    width: int
    height: int
    block_id: int
    paragraph_id: int
    line_id: int
    word_id: int

    def __post_init__(self):
        if not 0 <= self.confidence <= 100:
            raise ValueError(f"word confidence {self.confidence} outside [0, 100]")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"degenerate word box {self.width}x{self.height}")
        if not self.text.strip():
            raise ValueError("empty word text")


@dataclass(frozen=True)
class OcrLine:
    words: tuple[OcrWord, ...]
    confidence: int
    text: str

    @classmethod
    def from_words(cls, words: Iterable[OcrWord]) -> "OcrLine":
        ws = tuple(sorted(words, key=lambda w: w.word_id))
        return cls(words=ws, confidence=line_confidence(ws), text=" ".join(w.text for w in ws))

    @property
    def group_key(self) -> tuple[int, int, int]:
        w = self.words[0]
        return (w.block_id, w.paragraph_id, w.line_id)


@dataclass(frozen=True)
class OcrDocument:
    lines: tuple[OcrLine, ...]
    source: str = "dump-file"  # "engine-invocation" or "dump-file"


def line_confidence(words: Iterable[OcrWord]) -> int:
    """Mean of the word confidences, rounded half up to an integer.

    The rounding is exact integer arithmetic: floor((sum + n/2) / n).
    """
    confs = [w.confidence for w in words]
    if not confs:
        raise EmptyLineError("cannot aggregate confidence over zero words")
    n = len(confs)
    return (2 * sum(confs) + n) // (2 * n)


def parse_word_dump(stream: TextIO | str) -> OcrDocument:
    """Parse a tab-separated word dump into lines of words.

    Words are grouped by (page, block, paragraph, line) ids and ordered by
    word id. Rows with confidence -1 are structural markers, not words, and
    are skipped. A malformed row raises :class:`ParseError` with its row number.
    """
    if isinstance(stream, str):
        raw_lines = stream.splitlines()
    else:
        raw_lines = stream.read().splitlines()
    if not raw_lines:
        return OcrDocument(lines=())

    start = 0
    first = raw_lines[0].split("\t")
    if [c.strip() for c in first[:2]] == ["level", "page_num"]:
        if len(first) != len(DUMP_COLUMNS):
            raise ParseError(1, f"header has {len(first)} columns, expected {len(DUMP_COLUMNS)}")
        start = 1

    groups: dict[tuple[int, int, int, int], list[OcrWord]] = {}
    for row_no, raw in enumerate(raw_lines[start:], start=start + 1):
        if not raw.strip():
            continue
        cols = raw.split("\t")
        if len(cols) != len(DUMP_COLUMNS):
            raise ParseError(row_no, f"expected {len(DUMP_COLUMNS)} columns, got {len(cols)}")
        try:
            nums = [int(float(c)) for c in cols[:11]]
        except ValueError as exc:
            raise ParseError(row_no, f"non-numeric field: {exc}") from None
        conf = nums[10]
        if conf < 0:
            continue  # layout marker (page/block/paragraph/line rows)
        text = cols[11]
        if not text.strip():
            continue
        try:
            word = OcrWord(
                text=text.strip(),
                confidence=conf,
                left=nums[6], top=nums[7], width=nums[8], height=nums[9],
                block_id=nums[2], paragraph_id=nums[3], line_id=nums[4], word_id=nums[5],
            )
        except ValueError as exc:
            raise ParseError(row_no, str(exc)) from None
        groups.setdefault((nums[1], nums[2], nums[3], nums[4]), []).append(word)

    lines = tuple(OcrLine.from_words(groups[key]) for key in sorted(groups))
    return OcrDocument(lines=lines, source="dump-file")


def serialize_word_dump(doc: OcrDocument) -> str:
    """Render a document back to the 12-column dump format (header included)."""
    out = ["\t".join(DUMP_COLUMNS)]
    for line in doc.lines:
        for w in line.words:
            out.append("\t".join(str(v) for v in (
                5, 1, w.block_id, w.paragraph_id, w.line_id, w.word_id,
                w.left, w.top, w.width, w.height, w.confidence, w.text,
            )))
    return "\n".join(out) + "\n"


def engine_command(image_path: str, language: str) -> list[str]:
    template = os.environ.get(ENGINE_CMD_ENV_VAR, DEFAULT_ENGINE_CMD)
    return [part.format(image=image_path, lang=language) for part in shlex.split(template)]


def run_ocr(img: RasterImage, language: str = DEFAULT_LANGUAGE) -> OcrDocument:
    """Invoke the external OCR engine on an image and parse its word dump.

    The engine command line defaults to ``tesseract {image} stdout -l {lang} tsv``
    and can be overridden with the ``KTPX_OCR_CMD`` environment variable (same
    placeholders). Only the language parameter is set; everything else stays
    at engine defaults.
    """
    with tempfile.TemporaryDirectory(prefix="ktpx-ocr-") as tmp:
        image_path = str(Path(tmp) / "page.png")
        Image.fromarray(img.pixels).save(image_path)
        cmd = engine_command(image_path, language)
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True)
        except FileNotFoundError:
            raise EngineUnavailableError(
                f"OCR engine '{cmd[0]}' not found; pass a pre-computed word dump "
                f"(--ocr-dump) or set {ENGINE_CMD_ENV_VAR}"
            ) from None
        if proc.returncode != 0:
            raise EngineFailureError(
                f"OCR engine exited with status {proc.returncode}", stderr=proc.stderr
            )
    doc = parse_word_dump(proc.stdout)
    return OcrDocument(lines=doc.lines, source="engine-invocation")
