"""End-to-end card extraction: image bytes in, 37-field record out.

The stages run in a fixed order: decode, grayscale, binarize, OCR (live
engine or a pre-captured word dump), line repair and field parsing, face
detection, record assembly.  Everything configurable sits in
``PipelineConfig``; the stages themselves live in their own modules.
"""

from __future__ import annotations

import base64
import io
import time
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import ocr
from .errors import DecodeError
from .facedet import CascadeModel, FaceBox, crop_and_encode, detect_faces, load_cascade
from .fields import FieldGrammar, ParseDiagnostics, default_grammar, parse_document
from .preproc import DEFAULT_THRESHOLD, RasterImage, binarize, render_binary, to_grayscale
from .record import CONFIDENCE_THRESHOLD, KtpRecord, assemble

OCR_MODES = ("invoke-engine", "dump-file")


@dataclass(frozen=True)
class PipelineConfig:
    threshold: int = DEFAULT_THRESHOLD
    ocr_language: str = "ind"
    ocr_mode: str = "invoke-engine"
    grammar_path: Optional[Path] = None
    cascade_path: Optional[Path] = None
    confidence_review_threshold: int = CONFIDENCE_THRESHOLD

    def __post_init__(self) -> None:
        if not 0 <= self.threshold <= 255:
            raise ValueError(f"threshold must be in [0, 255], got {self.threshold}")
        if not 0 <= self.confidence_review_threshold <= 100:
            raise ValueError("confidence_review_threshold must be in [0, 100], "
                             f"got {self.confidence_review_threshold}")
        if self.ocr_mode not in OCR_MODES:
            raise ValueError(f"ocr_mode must be one of {OCR_MODES}, "
                             f"got {self.ocr_mode!r}")

    def load_grammar(self) -> FieldGrammar:
        if self.grammar_path is None:
            return default_grammar()
        return FieldGrammar.from_json(self.grammar_path)

    def load_cascade(self) -> Optional[CascadeModel]:
        if self.cascade_path is None:
            return None
        return load_cascade(self.cascade_path)


@dataclass(frozen=True)
class ExtractionResult:
    record: KtpRecord
    engine_ms: float
    unclaimed_lines: tuple[tuple[int, str], ...] = ()
    face_box: Optional[FaceBox] = None


def decode_image(image_bytes: bytes) -> RasterImage:
    """Decode arbitrary image bytes into an 8-bit gray or RGB raster."""
    try:
        with Image.open(io.BytesIO(image_bytes)) as im:
            if im.mode != "L":
                im = im.convert("RGB")
            return RasterImage(np.asarray(im))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc


def extract_card(
    image_bytes: bytes,
    config: PipelineConfig = PipelineConfig(),
    ocr_dump_text: Optional[str] = None,
    now: Optional[date] = None,
) -> ExtractionResult:
    """Run the full extraction chain on one card image.

    ``ocr_dump_text``, when given, replaces the engine call with a frozen
    word dump -- the reproducible path used by tests and re-processing.
    ``engine_ms`` in the result covers only the external engine run, so
    callers can report in-process time separately.
    """
    image = decode_image(image_bytes)
    gray = to_grayscale(image) if image.channels == 3 else image
    binary = binarize(gray, config.threshold)

    engine_ms = 0.0
    if ocr_dump_text is not None:
        doc = ocr.parse_word_dump(ocr_dump_text)
    elif config.ocr_mode == "dump-file":
        raise ValueError("dump-file mode requires an OCR dump for each image")
    else:
        t0 = time.perf_counter()
        doc = ocr.run_ocr(render_binary(binary), language=config.ocr_language)
        engine_ms = (time.perf_counter() - t0) * 1000.0

    diagnostics = ParseDiagnostics()
    fields = parse_document(doc, config.load_grammar(), diagnostics)

    face = None
    face_box = None
    cascade = config.load_cascade()
    if cascade is not None:
        # The detector wants the untouched grayscale card: binarization
        # flattens exactly the intensity structure the features measure.
        boxes = detect_faces(gray, cascade)
        if boxes:
            face = crop_and_encode(image, boxes[0])
            face_box = face[1]

    record = assemble(
        fields,
        face=face,
        card_b64=base64.b64encode(image_bytes).decode("ascii"),
        now=now,
    )
    return ExtractionResult(
        record=record,
        engine_ms=engine_ms,
        unclaimed_lines=tuple(diagnostics.unclaimed_lines),
        face_box=face_box,
    )
