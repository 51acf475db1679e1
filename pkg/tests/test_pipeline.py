import base64
import io
import json
from datetime import date
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from ktpx.errors import DecodeError
from ktpx.pipeline import (
    OCR_MODES,
    ExtractionResult,
    PipelineConfig,
    decode_image,
    extract_card,
)
from ktpx.record import CONF_PAIRED_FIELDS, FIELD_ORDER, to_json

from conftest import FIXTURES, make_dump

CASCADE = FIXTURES / "cascade_fixture.json"


def png_bytes(arr):
    buf = io.BytesIO()
    Image.fromarray(np.asarray(arr, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


class TestPipelineConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        assert cfg.threshold == 127
        assert cfg.ocr_language == "ind"
        assert cfg.ocr_mode == "invoke-engine"
        assert cfg.confidence_review_threshold == 85
        assert OCR_MODES == ("invoke-engine", "dump-file")

    @pytest.mark.parametrize("kw", [
        {"threshold": -1}, {"threshold": 256},
        {"confidence_review_threshold": 101},
        {"ocr_mode": "telepathy"},
    ])
    def test_rejects_bad_settings(self, kw):
        with pytest.raises(ValueError):
            PipelineConfig(**kw)

    def test_default_grammar_loaded_when_unset(self):
        grammar = PipelineConfig().load_grammar()
        assert grammar.match_label("NIK") is not None

    def test_grammar_loaded_from_path(self, tmp_path):
        path = tmp_path / "grammar.json"
        path.write_text(json.dumps({
            "fields": [{"name": "serial", "aliases": ["SERIAL"], "kind": "numeric"}],
        }), encoding="utf-8")
        grammar = PipelineConfig(grammar_path=path).load_grammar()
        assert grammar.match_label("SERIAL").field_name == "serial"
        assert grammar.match_label("NIK") is None

    def test_cascade_loaded_from_path(self):
        assert PipelineConfig().load_cascade() is None
        model = PipelineConfig(cascade_path=CASCADE).load_cascade()
        assert model.window_width == 24


class TestDecodeImage:
    def test_color_png_decodes_to_rgb(self):
        img = decode_image(png_bytes(np.zeros((8, 10, 3))))
        assert (img.height, img.width, img.channels) == (8, 10, 3)

    def test_grayscale_png_stays_single_channel(self):
        img = decode_image(png_bytes(np.zeros((8, 10))))
        assert img.channels == 1

    def test_palette_image_converted(self):
        buf = io.BytesIO()
        Image.fromarray(np.zeros((8, 8, 3), dtype=np.uint8)).convert("P").save(
            buf, format="PNG")
        assert decode_image(buf.getvalue()).channels == 3

    @pytest.mark.parametrize("payload", [b"", b"not an image", b"\x89PNG\r\n\x1a\njunk"])
    def test_garbage_rejected(self, payload):
        with pytest.raises(DecodeError):
            decode_image(payload)


@pytest.fixture(scope="module")
def card(card_paths):
    path = card_paths[0]
    return path, path.read_bytes(), path.with_suffix(".tsv").read_text(encoding="utf-8")


@pytest.fixture(scope="module")
def extracted(card):
    _, image_bytes, dump = card
    return extract_card(
        image_bytes,
        PipelineConfig(cascade_path=CASCADE),
        ocr_dump_text=dump,
        now=date(2012, 5, 4),
    )


class TestExtractCard:
    def test_record_matches_gold_values(self, extracted, gold_entries, card):
        expected = next(g for g in gold_entries if g["card_id"] == card[0].stem)
        rec = extracted.record
        assert set(expected["expected"]) == set(CONF_PAIRED_FIELDS)
        for name, want in expected["expected"].items():
            assert getattr(rec, name) == want, name

    def test_constant_fields(self, extracted):
        rec = extracted.record
        assert rec.kind == "C"
        assert rec.nationalityCode == "IND"
        assert rec.issuerCountryCode == "IND"
        assert rec.extractedAt == "04-05-2012"

    def test_serialization_has_all_keys_in_order(self, extracted):
        payload = json.loads(to_json(extracted.record))
        assert list(payload) == list(FIELD_ORDER)

    def test_confidences_are_ints(self, extracted):
        for name in CONF_PAIRED_FIELDS:
            value = getattr(extracted.record, name + "conf")
            assert type(value) is int
            assert 0 <= value <= 100

    def test_dump_path_reports_zero_engine_time(self, extracted):
        assert extracted.engine_ms == 0.0

    def test_face_box_matches_planted_face(self, extracted, planted_faces, card):
        truth = planted_faces[card[0].stem]
        box = extracted.face_box
        assert box is not None
        assert abs((box.left + box.width / 2) - truth["cx"]) <= 2
        assert abs((box.top + box.height / 2) - truth["cy"]) <= 2
        rec = extracted.record
        assert (rec.faceTop, rec.faceLeft) == (box.top, box.left)
        assert (rec.faceWidth, rec.faceHeight) == (box.width, box.height)

    def test_face_photo_is_crop_of_card(self, extracted, card):
        rec = extracted.record
        crop = np.asarray(Image.open(io.BytesIO(base64.b64decode(rec.facePhoto))))
        card_px = np.asarray(Image.open(io.BytesIO(card[1])).convert("RGB"))
        region = card_px[rec.faceTop:rec.faceTop + rec.faceHeight,
                         rec.faceLeft:rec.faceLeft + rec.faceWidth]
        assert np.array_equal(crop, region)

    def test_card_image_is_original_bytes(self, extracted, card):
        assert base64.b64decode(extracted.record.cardImage) == card[1]

    def test_without_cascade_face_fields_stay_sentinel(self, card):
        _, image_bytes, dump = card
        result = extract_card(image_bytes, PipelineConfig(), ocr_dump_text=dump)
        rec = result.record
        assert result.face_box is None
        assert rec.facePhoto == ""
        assert (rec.faceTop, rec.faceLeft, rec.faceWidth, rec.faceHeight) == (-1,) * 4

    def test_deterministic_across_runs(self, card):
        _, image_bytes, dump = card
        cfg = PipelineConfig(cascade_path=CASCADE)
        a = extract_card(image_bytes, cfg, ocr_dump_text=dump, now=date(2020, 1, 2))
        b = extract_card(image_bytes, cfg, ocr_dump_text=dump, now=date(2020, 1, 2))
        assert to_json(a.record) == to_json(b.record)

    def test_dump_file_mode_requires_dump(self, card):
        with pytest.raises(ValueError, match="dump"):
            extract_card(card[1], PipelineConfig(ocr_mode="dump-file"))

    def test_unclaimed_lines_are_reported(self):
        img = png_bytes(np.full((60, 120), 220))
        dump = make_dump([("NAMA : BUDI", [90, 90]), ("XYZZY PLUGH", [40, 40])])
        result = extract_card(img, ocr_dump_text=dump)
        assert result.unclaimed_lines == ((1, "XYZZY PLUGH"),)
        assert isinstance(result, ExtractionResult)

    def test_engine_invocation_path(self, monkeypatch, tmp_path, card):
        dump_file = tmp_path / "canned.tsv"
        dump_file.write_text(make_dump([("NAMA : BUDI", [95, 92])]))
        script = tmp_path / "fake-ocr.sh"
        script.write_text(f"#!/bin/sh\n[ -s \"$1\" ] || exit 9\ncat {dump_file}\n")
        script.chmod(0o755)
        monkeypatch.setenv("KTPX_OCR_CMD", f"{script} {{image}} {{lang}}")
        result = extract_card(card[1], PipelineConfig())
        assert result.record.name == "BUDI"
        assert result.engine_ms > 0.0
