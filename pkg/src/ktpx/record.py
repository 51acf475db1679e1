"""Card record assembly and JSON serialization.

The extraction output is a flat 37-key JSON object: 24 value fields followed
by 13 confidence fields, one per value field that carries an OCR confidence.
Attribute names deliberately mirror the serialized key names so the wire
format is readable straight off the dataclass.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, fields as dc_fields
from datetime import date
from typing import Iterable, Optional

from .errors import RecordValidationError
from .facedet import FaceBox
from .fields import (
    BLOOD_VOCABULARY,
    DATE_PATTERN,
    RELIGION_VOCABULARY,
    ExtractedField,
)

CONFIDENCE_THRESHOLD = 85

#: Serialized key order.  Everything that writes or checks a record goes
#: through this tuple, so the 37-key contract lives in exactly one place.
FIELD_ORDER = (
    "kind",
    "identifier",
    "name",
    "birthPlace",
    "birthDate",
    "gender",
    "bloodType",
    "address",
    "religion",
    "marriageStatus",
    "occupation",
    "nationalityCode",
    "expiryDate",
    "facePhoto",
    "cardImage",
    "issuerCountryCode",
    "issuedProvince",
    "issuedCity",
    "issuedDate",
    "faceTop",
    "faceLeft",
    "faceWidth",
    "faceHeight",
    "extractedAt",
    "identifierconf",
    "nameconf",
    "birthPlaceconf",
    "birthDateconf",
    "genderconf",
    "bloodTypeconf",
    "addressconf",
    "religionconf",
    "marriageStatusconf",
    "occupationconf",
    "issuedProvinceconf",
    "issuedCityconf",
    "issuedDateconf",
)

#: Value fields that have a confidence twin, in listing order.
CONF_PAIRED_FIELDS = (
    "identifier",
    "name",
    "birthPlace",
    "birthDate",
    "gender",
    "bloodType",
    "address",
    "religion",
    "marriageStatus",
    "occupation",
    "issuedProvince",
    "issuedCity",
    "issuedDate",
)

#: Fields an operator may overwrite during review.  System-derived fields
#: (images, face geometry, timestamps, constant codes) are off limits.
CORRECTABLE_FIELDS = CONF_PAIRED_FIELDS + ("expiryDate",)

_INT_FIELDS = frozenset(
    ("faceTop", "faceLeft", "faceWidth", "faceHeight")
    + tuple(n + "conf" for n in CONF_PAIRED_FIELDS)
)

MARITAL_CODES = {
    "KAWIN": "M",
    "BELUM KAWIN": "S",
    "CERAI HIDUP": "D",
    "CERAI MATI": "W",
}

GENDER_CODE_SET = ("M", "F")
MARITAL_CODE_SET = ("M", "S", "D", "W")
LIFETIME = "SEUMUR HIDUP"

_NIK_RE = re.compile(r"[0-9]{16}")
_COUNTRY_RE = re.compile(r"[A-Z]{3}")


@dataclass(frozen=True)
class KtpRecord:
    kind: str = "C"
    identifier: str = ""
    name: str = ""
    birthPlace: str = ""
    birthDate: str = ""
    gender: str = ""
    bloodType: str = ""
    address: str = ""
    religion: str = ""
    marriageStatus: str = ""
    occupation: str = ""
    nationalityCode: str = "IND"
    expiryDate: str = ""
    facePhoto: str = ""
    cardImage: str = ""
    issuerCountryCode: str = "IND"
    issuedProvince: str = ""
    issuedCity: str = ""
    issuedDate: str = ""
    faceTop: int = -1
    faceLeft: int = -1
    faceWidth: int = -1
    faceHeight: int = -1
    extractedAt: str = ""
    identifierconf: int = 0
    nameconf: int = 0
    birthPlaceconf: int = 0
    birthDateconf: int = 0
    genderconf: int = 0
    bloodTypeconf: int = 0
    addressconf: int = 0
    religionconf: int = 0
    marriageStatusconf: int = 0
    occupationconf: int = 0
    issuedProvinceconf: int = 0
    issuedCityconf: int = 0
    issuedDateconf: int = 0


assert tuple(f.name for f in dc_fields(KtpRecord)) == FIELD_ORDER


def assemble(
    extracted: Iterable[ExtractedField],
    face: Optional[tuple[str, FaceBox]] = None,
    card_b64: str = "",
    now: Optional[date] = None,
) -> KtpRecord:
    """Merge parsed fields, face data, and metadata into one record.

    Every extracted field lands in its value slot; fields with a confidence
    twin also fill it.  Missing fields keep the empty-value defaults.  The
    marital status and nationality vocabulary values are folded down to
    their single-letter / ISO-style codes here, at the edge of the schema.
    """
    values: dict[str, object] = {}

    def put(name: str, value: object) -> None:
        if name in values:
            raise ValueError(f"duplicate extracted field: {name}")
        values[name] = value

    for f in extracted:
        if f.field_name == "nationality":
            # The record carries a country code, not the WNI/WNA vocabulary
            # value; Indonesian-issued cards resolve to IND either way.
            put("nationalityCode", "IND")
            continue
        if f.field_name == "marriageStatus":
            put("marriageStatus", MARITAL_CODES.get(f.value, f.value))
        else:
            put(f.field_name, f.value)
        if f.field_name in CONF_PAIRED_FIELDS:
            values[f.field_name + "conf"] = f.confidence

    if face is not None:
        photo_b64, box = face
        values["facePhoto"] = photo_b64
        values["faceTop"] = box.top
        values["faceLeft"] = box.left
        values["faceWidth"] = box.width
        values["faceHeight"] = box.height
    stamp = now if now is not None else date.today()
    values["cardImage"] = card_b64
    values["extractedAt"] = stamp.strftime("%d-%m-%Y")

    allowed = set(FIELD_ORDER)
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ValueError(f"extracted fields with no record slot: {unknown}")
    return KtpRecord(**values)  # type: ignore[arg-type]


def to_json(rec: KtpRecord) -> bytes:
    payload = {name: getattr(rec, name) for name in FIELD_ORDER}
    return json.dumps(payload, ensure_ascii=False).encode("utf-8")


def from_json(data: bytes | str) -> KtpRecord:
    """Parse a serialized record, insisting on exactly the 37 known keys."""
    raw = json.loads(data)
    if not isinstance(raw, dict):
        raise RecordValidationError({"": "record must be a JSON object"})
    violations: dict[str, str] = {}
    for name in FIELD_ORDER:
        if name not in raw:
            violations[name] = "missing"
    for name in sorted(set(raw) - set(FIELD_ORDER)):
        violations[name] = "unexpected key"
    if violations:
        raise RecordValidationError(violations)

    values: dict[str, object] = {}
    for name in FIELD_ORDER:
        v = raw[name]
        if name in _INT_FIELDS:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                violations[name] = "must be an integer"
            elif isinstance(v, float) and not v.is_integer():
                violations[name] = "must be an integer"
            else:
                values[name] = int(v)
        else:
            if not isinstance(v, str):
                violations[name] = "must be a string"
            else:
                values[name] = v
    if violations:
        raise RecordValidationError(violations)
    return KtpRecord(**values)  # type: ignore[arg-type]


def validate(rec: KtpRecord) -> dict[str, str]:
    """Check record invariants; returns field → problem, empty when valid."""
    problems: dict[str, str] = {}
    if rec.kind != "C":
        problems["kind"] = "card kind must be 'C'"
    if rec.identifier and not _NIK_RE.fullmatch(rec.identifier):
        problems["identifier"] = "must be 16 digits"
    for name in ("birthDate", "issuedDate", "extractedAt"):
        v = getattr(rec, name)
        if v and not DATE_PATTERN.fullmatch(v):
            problems[name] = "must match DD-MM-YYYY"
    if rec.expiryDate and rec.expiryDate != LIFETIME \
            and not DATE_PATTERN.fullmatch(rec.expiryDate):
        problems["expiryDate"] = f"must match DD-MM-YYYY or be '{LIFETIME}'"
    if rec.gender and rec.gender not in GENDER_CODE_SET:
        problems["gender"] = "must be M or F"
    if rec.bloodType and rec.bloodType not in BLOOD_VOCABULARY:
        problems["bloodType"] = "must be one of " + ", ".join(BLOOD_VOCABULARY)
    if rec.religion and rec.religion not in RELIGION_VOCABULARY:
        problems["religion"] = "must be one of " + ", ".join(RELIGION_VOCABULARY)
    if rec.marriageStatus and rec.marriageStatus not in MARITAL_CODE_SET:
        problems["marriageStatus"] = "must be one of M, S, D, W"
    for name in ("nationalityCode", "issuerCountryCode"):
        v = getattr(rec, name)
        if v and not _COUNTRY_RE.fullmatch(v):
            problems[name] = "must be a 3-letter code"
    for name in CONF_PAIRED_FIELDS:
        c = getattr(rec, name + "conf")
        if not 0 <= c <= 100:
            problems[name + "conf"] = "must be in [0, 100]"

    geometry = (rec.faceTop, rec.faceLeft, rec.faceWidth, rec.faceHeight)
    if geometry != (-1, -1, -1, -1):
        if rec.faceTop < 0 or rec.faceLeft < 0 or rec.faceWidth <= 0 \
                or rec.faceHeight <= 0:
            problems["faceTop"] = "face geometry must be all -1 or a real box"
    return problems


def flag_low_confidence(rec: KtpRecord,
                        threshold: int = CONFIDENCE_THRESHOLD) -> list[str]:
    """Value fields whose confidence falls below the review threshold.

    A field at exactly the threshold passes: operators only re-check
    fields that scored strictly lower.
    """
    return [name for name in CONF_PAIRED_FIELDS
            if getattr(rec, name + "conf") < threshold]


def validation_rules() -> dict[str, dict[str, object]]:
    """Machine-readable correction constraints, keyed by field name.

    Shared by the in-process validator and the review frontend (via the
    config endpoint) so both enforce the same rules.  Every field accepts
    the empty string; ``pattern`` is a full-match regex.
    """
    date_rule: dict[str, object] = {"pattern": DATE_PATTERN.pattern}
    rules: dict[str, dict[str, object]] = {
        "identifier": {"pattern": _NIK_RE.pattern},
        "name": {},
        "birthPlace": {},
        "birthDate": dict(date_rule),
        "gender": {"enum": list(GENDER_CODE_SET)},
        "bloodType": {"enum": list(BLOOD_VOCABULARY)},
        "address": {},
        "religion": {"enum": list(RELIGION_VOCABULARY)},
        "marriageStatus": {"enum": list(MARITAL_CODE_SET)},
        "occupation": {},
        "issuedProvince": {},
        "issuedCity": {},
        "issuedDate": dict(date_rule),
        "expiryDate": {"pattern": DATE_PATTERN.pattern, "literal": LIFETIME},
    }
    assert set(rules) == set(CORRECTABLE_FIELDS)
    return rules
