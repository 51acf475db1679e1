"""HTTP facade: extraction, stored results, and the review workflow.

All endpoints live under ``/v1``.  Handlers are plain sync functions so the
framework runs them in its worker pool; the store serializes writes
internally.  When a built frontend directory is supplied it is mounted at
the root, after the API routes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import (
    DecodeError,
    EngineFailureError,
    EngineUnavailableError,
    ParseError,
    RecordValidationError,
    StaleRevisionError,
    TerminalStatusError,
)
from .pipeline import PipelineConfig, extract_card
from .record import CONF_PAIRED_FIELDS, CORRECTABLE_FIELDS, flag_low_confidence, validation_rules
from .store import ResultStore, record_id_for


class CorrectionRequest(BaseModel):
    edits: dict[str, str]
    revision: int


def create_app(
    config: PipelineConfig,
    store: ResultStore,
    frontend_dir: Optional[Path] = None,
) -> FastAPI:
    app = FastAPI(title="ktpx", version="0.1.0")

    @app.post("/v1/extract")
    def extract(
        image: UploadFile = File(...),
        ocr_dump: Optional[UploadFile] = File(None),
    ) -> dict:
        image_bytes = image.file.read()
        dump_text = None
        if ocr_dump is not None:
            dump_text = ocr_dump.file.read().decode("utf-8", errors="replace")
        try:
            result = extract_card(image_bytes, config, ocr_dump_text=dump_text)
        except (DecodeError, ParseError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except EngineUnavailableError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        except EngineFailureError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        flagged = flag_low_confidence(result.record,
                                      config.confidence_review_threshold)
        stored, _ = store.record_extraction(
            record_id_for(image_bytes), result.record, flagged)
        return stored.to_dict()

    @app.get("/v1/records/{record_id}")
    def get_record(record_id: str) -> dict:
        try:
            return store.get(record_id).to_dict()
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"no record {record_id!r}")

    @app.get("/v1/review/queue")
    def review_queue() -> dict:
        return {"items": [r.to_dict() for r in store.pending()]}

    @app.post("/v1/records/{record_id}/corrections")
    def corrections(record_id: str, body: CorrectionRequest) -> dict:
        try:
            updated = store.apply_corrections(record_id, body.edits, body.revision)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"no record {record_id!r}")
        except StaleRevisionError as exc:
            raise HTTPException(status_code=409, detail={
                "reason": "stale-revision",
                "expected": exc.expected,
                "got": exc.got,
            })
        except TerminalStatusError as exc:
            raise HTTPException(status_code=409, detail={
                "reason": "terminal-status", "message": str(exc),
            })
        except RecordValidationError as exc:
            raise HTTPException(status_code=422,
                                detail={"violations": exc.violations})
        return updated.to_dict()

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/v1/config")
    def get_config() -> dict:
        """Everything the review client needs to mirror server-side rules."""
        return {
            "confidence_review_threshold": config.confidence_review_threshold,
            "correctable_fields": list(CORRECTABLE_FIELDS),
            "conf_paired_fields": list(CONF_PAIRED_FIELDS),
            "validation_rules": validation_rules(),
        }

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="frontend")
    return app
