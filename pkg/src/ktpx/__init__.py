"""Indonesian ID-card (KTP) field extraction.

Image in, 37-field JSON record out: grayscale + threshold preprocessing,
an external OCR engine (or frozen word dumps), rule-based text repair and
field parsing, cascade face detection, and a review workflow for fields
whose OCR confidence falls below the operator threshold.
"""

from .errors import KtpxError
from .pipeline import ExtractionResult, PipelineConfig, extract_card
from .record import KtpRecord, flag_low_confidence, from_json, to_json

__version__ = "0.1.0"

__all__ = [
    "ExtractionResult",
    "KtpRecord",
    "KtpxError",
    "PipelineConfig",
    "extract_card",
    "flag_low_confidence",
    "from_json",
    "to_json",
    "__version__",
]
