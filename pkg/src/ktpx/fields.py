"""Turn raw OCR lines into named card fields.

The repair rules: a punctuation filter that spares ":.,-", a fixed
character-to-digit map for numeric fields, a three-part split of each line
(label, colon, content), a date pattern, a gender pattern, and small closed
vocabularies for the fields whose legal values are a fixed set. Every
extracted field carries the confidence of the OCR line it came from.

The KTP layout is encoded in :func:`default_grammar`; alternative layouts
load from JSON via :meth:`FieldGrammar.from_json` without a rebuild.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .ocr import OcrDocument, OcrLine

# Characters spared by the punctuation filter: they are card content.
KEPT_PUNCTUATION = ":.,-"

# Character-to-digit corrections for numeric fields (13 entries).
DIGIT_CORRECTIONS = {
    "L": "1", "l": "1",
    "O": "0", "o": "0",
    "?": "7",
    "A": "4",
    "Z": "2", "z": "2",
    "S": "5", "s": "5",
    "b": "6",
    "B": "8",
    "G": "6",
}

DATE_PATTERN = re.compile(r"[0-9]{2}-[0-9]{2}-[0-9]{4}")

# Alternation order matters: the hyphenated form must win over its prefix.
GENDER_PATTERN = re.compile(r"LAKI-LAKI|LAKI|LELAKI|PEREMPUAN")
GENDER_CODES = {"LAKI-LAKI": "M", "LAKI": "M", "LELAKI": "M", "PEREMPUAN": "F"}

FIELD_KINDS = frozenset({"free-text", "numeric", "date", "closed-set", "gender"})
CORRECTION_POLICIES = frozenset({"none", "char-to-digit", "punctuation-only"})

_DEFAULT_POLICY = {
    "free-text": "punctuation-only",
    "numeric": "char-to-digit",
    "date": "punctuation-only",
    "closed-set": "punctuation-only",
    "gender": "punctuation-only",
}

# Religion and marital sets are the official KTP vocabularies. Order is the
# tie-break for fuzzy matches: "O" leads the blood set so that a misread "0"
# resolves to it, and longer entries precede their substrings ("AB" before
# "A", "BELUM KAWIN" before "KAWIN") so the substring scan cannot shadow them.
RELIGION_VOCABULARY = ["ISLAM", "KRISTEN", "KATOLIK", "HINDU", "BUDDHA", "KONGHUCU"]
BLOOD_VOCABULARY = ["O", "AB", "A", "B", "-"]
NATIONALITY_VOCABULARY = ["WNI", "WNA"]
MARITAL_VOCABULARY = ["BELUM KAWIN", "CERAI HIDUP", "CERAI MATI", "KAWIN"]


def strip_punctuation(s: str) -> str:
    """Drop punctuation except ":.,-"; collapse whitespace runs to single spaces.

    Removed characters become spaces first, so "e;f" ends up "e f" rather
    than "ef".
    """
    kept = [ch if (ch.isalnum() or ch.isspace() or ch in KEPT_PUNCTUATION) else " " for ch in s]
    return " ".join("".join(kept).split())


def chars_to_digits(s: str, corrections: dict[str, str] | None = None) -> str:
    """Replace commonly misread characters with the digits they stand for.

    Unmapped characters (including digits) pass through untouched.
    """
    table = DIGIT_CORRECTIONS if corrections is None else corrections
    return "".join(table.get(ch, ch) for ch in s)


def extract_date(s: str) -> Optional[str]:
    """First DD-MM-YYYY shaped substring (two digits, two digits, four digits)."""
    m = DATE_PATTERN.search(s)
    return m.group(0) if m else None


def extract_gender(s: str) -> Optional[str]:
    """Map the first gender word found to its canonical code (M or F)."""
    m = GENDER_PATTERN.search(s.upper())
    return GENDER_CODES[m.group(0)] if m else None


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance (unit insert/delete/substitute costs)."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def match_closed_set(s: str, vocabulary: list[str]) -> Optional[str]:
    """Resolve free text against a fixed vocabulary.

    First entry found as a substring of the uppercased input wins; failing
    that, the entry at minimum edit distance wins if that distance is at most
    2. Ties break by vocabulary order. Returns None when nothing is close.
    """
    if not vocabulary:
        raise ValueError("closed-set match needs a non-empty vocabulary")
    upper = s.upper().strip()
    if not upper:
        return None
    for entry in vocabulary:
        if entry in upper:
            return entry
    best: Optional[str] = None
    best_distance = 3
    for entry in vocabulary:
        d = edit_distance(upper, entry)
        if d < best_distance:
            best, best_distance = entry, d
    return best


@dataclass(frozen=True)
class FieldSpec:
    """One card attribute: how its label reads and how its content is repaired.

    ``remainder_field``, on date fields, names a second field that receives
    the text left over once the date is removed (birth place on the birth
    line). ``lifetime_literal`` lets a date field accept a fixed phrase
    instead of a date. ``append_to`` marks follower fields whose whole line
    is concatenated onto another field (the address tail lines).
    """

    field_name: str
    label_aliases: tuple[str, ...]
    content_kind: str = "free-text"
    vocabulary: tuple[str, ...] = ()
    correction_policy: str = ""
    remainder_field: Optional[str] = None
    lifetime_literal: Optional[str] = None
    append_to: Optional[str] = None

    def __post_init__(self):
        if self.content_kind not in FIELD_KINDS:
            raise ValueError(f"unknown content kind {self.content_kind!r}")
        if self.content_kind == "closed-set" and not self.vocabulary:
            raise ValueError(f"closed-set field {self.field_name} needs a vocabulary")
        if not self.label_aliases:
            raise ValueError(f"field {self.field_name} has no label aliases")
        object.__setattr__(
            self, "label_aliases", tuple(a.upper() for a in self.label_aliases)
        )
        if not self.correction_policy:
            object.__setattr__(
                self, "correction_policy", _DEFAULT_POLICY[self.content_kind]
            )
        elif self.correction_policy not in CORRECTION_POLICIES:
            raise ValueError(f"unknown correction policy {self.correction_policy!r}")


def _normalize_label(s: str) -> str:
    return strip_punctuation(s).upper()


def _alias_tolerance(alias: str, cap: int) -> int:
    # Short labels get a tighter budget: distance 2 on a 3-letter label
    # would collide across fields.
    if len(alias) <= 2:
        return 0
    if len(alias) <= 4:
        return min(1, cap)
    return cap


@dataclass(frozen=True)
class FieldGrammar:
    """Ordered collection of field specs plus the label fuzziness budget."""

    specs: tuple[FieldSpec, ...]
    label_match_max_distance: int = 2
    digit_corrections: dict[str, str] = field(default_factory=lambda: dict(DIGIT_CORRECTIONS))

    def __post_init__(self):
        names = [s.field_name for s in self.specs]
        if len(names) != len(set(names)):
            raise ValueError("duplicate field names in grammar")

    def match_label(self, label: str) -> Optional[FieldSpec]:
        """Spec whose alias is closest to the (normalized) label text, or None."""
        normalized = _normalize_label(label)
        if not normalized:
            return None
        best: Optional[FieldSpec] = None
        best_distance = self.label_match_max_distance + 1
        for spec in self.specs:
            for alias in spec.label_aliases:
                alias_norm = _normalize_label(alias)
                d = edit_distance(normalized, alias_norm)
                if d <= _alias_tolerance(alias_norm, self.label_match_max_distance) and d < best_distance:
                    best, best_distance = spec, d
        return best

    @classmethod
    def from_json(cls, path: str | Path) -> "FieldGrammar":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        specs = tuple(
            FieldSpec(
                field_name=entry["name"],
                label_aliases=tuple(entry["aliases"]),
                content_kind=entry.get("kind", "free-text"),
                vocabulary=tuple(entry.get("vocabulary", ())),
                correction_policy=entry.get("correction_policy", ""),
                remainder_field=entry.get("remainder_field"),
                lifetime_literal=entry.get("lifetime_literal"),
                append_to=entry.get("append_to"),
            )
            for entry in raw["fields"]
        )
        corrections = dict(DIGIT_CORRECTIONS)
        corrections.update(raw.get("digit_corrections", {}))
        return cls(
            specs=specs,
            label_match_max_distance=int(raw.get("label_match_max_distance", 2)),
            digit_corrections=corrections,
        )


def default_grammar() -> FieldGrammar:
    """The built-in KTP layout."""
    return FieldGrammar(specs=(
        FieldSpec("identifier", ("NIK",), "numeric"),
        FieldSpec("name", ("NAMA",)),
        FieldSpec("birthDate", ("TEMPAT/TGL LAHIR", "TEMPAT TGL LAHIR", "TEMPAT/TANGGAL LAHIR"),
                  "date", remainder_field="birthPlace"),
        FieldSpec("gender", ("JENIS KELAMIN",), "gender"),
        FieldSpec("bloodType", ("GOL DARAH", "GOL. DARAH", "GOLONGAN DARAH"),
                  "closed-set", vocabulary=tuple(BLOOD_VOCABULARY)),
        FieldSpec("address", ("ALAMAT",)),
        FieldSpec("rtRw", ("RT/RW", "RT RW", "RT"), append_to="address"),
        FieldSpec("kelDesa", ("KEL/DESA", "KEL DESA", "KELURAHAN/DESA"), append_to="address"),
        FieldSpec("kecamatan", ("KECAMATAN",), append_to="address"),
        FieldSpec("religion", ("AGAMA",), "closed-set", vocabulary=tuple(RELIGION_VOCABULARY)),
        FieldSpec("marriageStatus", ("STATUS PERKAWINAN", "STATUS"),
                  "closed-set", vocabulary=tuple(MARITAL_VOCABULARY)),
        FieldSpec("occupation", ("PEKERJAAN",)),
        FieldSpec("nationality", ("KEWARGANEGARAAN",),
                  "closed-set", vocabulary=tuple(NATIONALITY_VOCABULARY)),
        FieldSpec("expiryDate", ("BERLAKU HINGGA",), "date", lifetime_literal="SEUMUR HIDUP"),
    ))


@dataclass(frozen=True)
class ExtractedField:
    """A named value pulled from one OCR line, confidence inherited from it."""

    field_name: str
    raw_text: str
    value: str
    confidence: int
    source_line: int


@dataclass
class ParseDiagnostics:
    """Lines no rule claimed, for operator-facing tallies."""

    unclaimed_lines: list[tuple[int, str]] = field(default_factory=list)

    @property
    def unclaimed_count(self) -> int:
        return len(self.unclaimed_lines)


def _match_label_suffix(segment: str, grammar: FieldGrammar) -> Optional[tuple[FieldSpec, str, str]]:
    """Match a label against the trailing tokens of a pre-colon segment.

    Longest suffix wins, so multi-word labels beat their tails. Matching on
    the suffix rather than the whole segment lets a stray leading mark
    ("4 NIK : ...") survive. Returns (spec, label text, text before label).
    """
    tokens = segment.split()
    for take in range(min(4, len(tokens)), 0, -1):
        label = " ".join(tokens[-take:])
        spec = grammar.match_label(label)
        if spec is not None:
            return spec, label, " ".join(tokens[:-take])
    return None


def split_field_line(line: OcrLine, grammar: FieldGrammar) -> Optional[tuple[FieldSpec, str]]:
    """Split one line at its first colon into (matched spec, content).

    The text before the colon must sit within the grammar's edit-distance
    budget of some label alias (case-insensitive). Returns None for lines
    that match nothing; those are simply unclaimed.
    """
    text = strip_punctuation(line.text)
    if ":" not in text:
        return None
    before, _, after = text.partition(":")
    matched = _match_label_suffix(before, grammar)
    if matched is None:
        return None
    return matched[0], after.strip()


def _line_claims(text: str, grammar: FieldGrammar) -> list[tuple[FieldSpec, str, str]]:
    """All (spec, raw label, content) claims on one stripped line.

    A KTP prints gender and blood type on a single line, so after the first
    label/colon/content split, any later segment ending in another label
    starts a new claim and terminates the previous one's content. Colons
    inside plain content are kept verbatim.
    """
    segments = text.split(":")
    if len(segments) < 2:
        return []
    head = _match_label_suffix(segments[0], grammar)
    if head is None:
        return []
    claims: list[tuple[FieldSpec, str, str]] = []
    current_spec, current_label = head[0], head[1]
    content_segments: list[str] = []
    for i, segment in enumerate(segments[1:], start=1):
        boundary = None
        if i < len(segments) - 1:
            m = _match_label_suffix(segment, grammar)
            if m is not None and m[0].field_name != current_spec.field_name:
                boundary = m
        if boundary is None:
            content_segments.append(segment)
            continue
        spec, label, before = boundary
        content_segments.append(before)
        claims.append((current_spec, current_label, ":".join(content_segments).strip()))
        current_spec, current_label = spec, label
        content_segments = []
    claims.append((current_spec, current_label, ":".join(content_segments).strip()))
    return claims


_PROVINCE_HEADLINE = "PROVINSI"
_CITY_HEADLINE_TOKENS = ("KABUPATEN", "KOTA")


def _province_headline(text: str) -> Optional[str]:
    tokens = text.split()
    if tokens and edit_distance(tokens[0].upper(), _PROVINCE_HEADLINE) <= 2:
        return " ".join(tokens[1:])
    return None


def _city_headline(text: str) -> bool:
    for token in text.upper().split():
        if token == "KOTA" or edit_distance(token, "KABUPATEN") <= 1:
            return True
    return False


def _trim_separators(s: str) -> str:
    return s.strip(" " + KEPT_PUNCTUATION)


def _apply_kind(spec: FieldSpec, content: str, grammar: FieldGrammar) -> dict[str, str]:
    """Content repair per field kind; may yield the remainder companion too."""
    if spec.correction_policy == "char-to-digit":
        content = chars_to_digits(content, grammar.digit_corrections)
    if spec.content_kind == "numeric":
        value = content.replace(" ", "")
        return {spec.field_name: value} if value else {}
    if spec.content_kind == "date":
        if spec.lifetime_literal is not None:
            literal = spec.lifetime_literal.upper()
            if edit_distance(content.upper().strip(), literal) <= 2:
                return {spec.field_name: literal}
        date = extract_date(content)
        out: dict[str, str] = {}
        if date is not None:
            out[spec.field_name] = date
        if spec.remainder_field is not None:
            place = content if date is None else content.replace(date, " ", 1)
            place = _trim_separators(" ".join(place.split()))
            if place:
                out[spec.remainder_field] = place
        return out
    if spec.content_kind == "closed-set":
        value = match_closed_set(content, list(spec.vocabulary))
        return {spec.field_name: value} if value is not None else {}
    if spec.content_kind == "gender":
        value = extract_gender(content)
        return {spec.field_name: value} if value is not None else {}
    value = content.strip()
    return {spec.field_name: value} if value else {}


def parse_document(
    doc: OcrDocument,
    grammar: FieldGrammar,
    diagnostics: Optional[ParseDiagnostics] = None,
) -> list[ExtractedField]:
    """Claim card fields from the document's lines, first claim winning.

    Per line: strip punctuation, try the label/colon/content split (with the
    shared-line rescan), fall back to the headline rules (province line
    starting PROVINSI, city line containing KABUPATEN or KOTA) and the bare
    date line (the issue date printed without a label). Address follower
    lines (RT/RW, Kel/Desa, Kecamatan) are appended to the address value;
    the address keeps the whole follower line, label included.
    """
    claimed: dict[str, ExtractedField] = {}
    address_tail: list[tuple[int, str]] = []
    for idx, line in enumerate(doc.lines):
        text = strip_punctuation(line.text)
        if not text:
            continue
        consumed = False

        province = _province_headline(text)
        if province is not None and "issuedProvince" not in claimed:
            if province:
                claimed["issuedProvince"] = ExtractedField(
                    "issuedProvince", text, province, line.confidence, idx)
            consumed = True
        elif _city_headline(text) and "issuedCity" not in claimed:
            claimed["issuedCity"] = ExtractedField(
                "issuedCity", text, text, line.confidence, idx)
            consumed = True
        else:
            claims = _line_claims(text, grammar)
            consumed = bool(claims)
            for spec, raw_label, content in claims:
                if spec.append_to is not None:
                    address_tail.append((idx, f"{raw_label} : {content}".strip()))
                    continue
                for name, value in _apply_kind(spec, content, grammar).items():
                    if name not in claimed:
                        claimed[name] = ExtractedField(name, content, value, line.confidence, idx)

        if not consumed and "issuedDate" not in claimed:
            date = extract_date(text)
            if date is not None:
                claimed["issuedDate"] = ExtractedField(
                    "issuedDate", text, date, line.confidence, idx)
                consumed = True
        if not consumed and diagnostics is not None:
            diagnostics.unclaimed_lines.append((idx, line.text))

    if address_tail:
        base = claimed.get("address")
        parts: list[tuple[int, str]] = []
        if base is not None:
            parts.append((base.source_line, base.value))
        parts.extend(address_tail)
        parts.sort(key=lambda p: p[0])
        anchor_idx = parts[0][0]
        anchor_conf = doc.lines[anchor_idx].confidence
        claimed["address"] = ExtractedField(
            "address",
            base.raw_text if base is not None else parts[0][1],
            " ".join(p[1] for p in parts),
            anchor_conf,
            anchor_idx,
        )

    return sorted(claimed.values(), key=lambda f: f.source_line)
