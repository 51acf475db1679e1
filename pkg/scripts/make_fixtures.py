#!/usr/bin/env python3
"""Generate the synthetic card fixture set.

Produces, under fixtures/:
  cards/cardNN.png   rendered card images (truth text, synthetic portrait)
  cards/cardNN.tsv   frozen OCR word dumps with injected, mostly repairable
                     recognition noise (the engine-free extraction path)
  gold.json          per-card expected field values
  faces.json         planted portrait-square geometry per card
  cascade_fixture.json  hand-built two-stage detector for the portraits

The dumps carry the noise; the rendered images stay pristine.  Most noise
is chosen so the repair rules recover the truth (digit-map confusions,
stray punctuation, near-miss vocabulary words).  A few cards carry damage
beyond repair -- a dropped value, a dropped line, free-text typos, an
ambiguous blood-type digit -- so evaluation scores stay realistically
below 1.0.

Gold values mirror the documented output conventions: province without its
keyword, city with it, and the address tail lines folded in label-first
("RT RW : 001 024 KEL DESA : ...") after punctuation stripping.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from PIL import Image, ImageDraw, ImageFont

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ktpx.facedet import (  # noqa: E402
    CascadeModel,
    CascadeStage,
    HaarFeature,
    HaarRect,
    save_cascade,
)
from ktpx.ocr import OcrDocument, OcrLine, OcrWord, serialize_word_dump  # noqa: E402

CARD_W, CARD_H = 640, 400
N_CARDS = 12

PROVINCES = (
    "DAERAH ISTIMEWA YOGYAKARTA", "JAWA TENGAH", "JAWA BARAT",
    "JAWA TIMUR", "SUMATERA UTARA", "BALI",
)
CITIES = (
    ("KABUPATEN", "SLEMAN"), ("KABUPATEN", "BANTUL"), ("KOTA", "YOGYAKARTA"),
    ("KABUPATEN", "GROBOGAN"), ("KOTA", "SEMARANG"), ("KABUPATEN", "BADUNG"),
)
NAMES = (
    "FIRHAN MAULANA", "SITI RAHAYU", "BUDI SANTOSO", "DEWI LESTARI",
    "AGUS WIBOWO", "RINA KUSUMA", "JOKO PRASETYO", "MAYA SARI",
    "ANDI NUGROHO", "LINA MARLINA", "HENDRA GUNAWAN", "RATNA WULANDARI",
)
BIRTH_PLACES = (
    "GROBOGAN", "SLEMAN", "BANDUNG", "SURABAYA",
    "MEDAN", "DENPASAR", "SOLO", "MALANG",
)
STREETS = (
    "PRM PURI DOMAS", "JL MERDEKA NO. 10", "DUSUN KRAJAN",
    "JL SUDIRMAN NO. 45", "PERUM GRIYA ASRI",
)
VILLAGES = ("WEDOMARTANI", "CONDONGCATUR", "MAGUWOHARJO", "SARIHARJO")
DISTRICTS = ("NGEMPLAK", "DEPOK", "MLATI", "NGAGLIK")
OCCUPATIONS = ("PEDAGANG", "GURU", "PETANI", "WIRASWASTA", "KARYAWAN SWASTA")
RELIGIONS = ("ISLAM", "ISLAM", "KRISTEN", "KATOLIK", "HINDU", "ISLAM")
MARITALS = ("KAWIN", "BELUM KAWIN", "CERAI HIDUP", "CERAI MATI")
BLOODS = ("O", "A", "B", "AB", "-")

#: The digit-map confusions used to noise NIK digits (reverse of the
#: repair direction, so the repair recovers the truth).
NIK_CONFUSIONS = {"0": "O", "1": "l", "2": "Z", "5": "S", "8": "B"}

MARITAL_CODES = {"KAWIN": "M", "BELUM KAWIN": "S",
                 "CERAI HIDUP": "D", "CERAI MATI": "W"}


def build_cascade() -> CascadeModel:
    """Bright-square-with-dark-surround detector, 24x24 base window.

    Stage 1: the centered 12x12 region must out-shine the window mean by
    1.2 sigma (an ideally planted square scores sqrt(3) ~ 1.73).  Stage 2:
    four half-window symmetry checks that uniform or gradient regions fail.
    """
    stage1 = CascadeStage(
        features=(HaarFeature(
            rects=(HaarRect(0, 0, 24, 24, -1.0), HaarRect(6, 6, 12, 12, 4.0)),
            threshold=1.2, pass_value=5.0, fail_value=0.0),),
        stage_threshold=5.0)
    halves = (
        ((0, 0, 12, 24), (12, 0, 12, 24)),
        ((12, 0, 12, 24), (0, 0, 12, 24)),
        ((0, 0, 24, 12), (0, 12, 24, 12)),
        ((0, 12, 24, 12), (0, 0, 24, 12)),
    )
    symmetry = tuple(
        HaarFeature(rects=(HaarRect(*a, -1.0), HaarRect(*b, 1.0)),
                    threshold=-0.15, pass_value=1.0, fail_value=0.0)
        for a, b in halves)
    stage2 = CascadeStage(features=symmetry, stage_threshold=4.0)
    return CascadeModel(window_width=24, window_height=24,
                        stages=(stage1, stage2))


def make_nik(rng: random.Random) -> str:
    return "".join(str(rng.randint(1, 9) if i == 0 else rng.randint(0, 9))
                   for i in range(16))


def make_date(rng: random.Random, y0: int, y1: int) -> str:
    return (f"{rng.randint(1, 28):02d}-{rng.randint(1, 12):02d}-"
            f"{rng.randint(y0, y1):04d}")


def noisy_nik(nik: str, rng: random.Random) -> str:
    """Swap a few digits for their look-alike letters."""
    chars = list(nik)
    slots = [i for i, c in enumerate(chars) if c in NIK_CONFUSIONS]
    for i in rng.sample(slots, k=min(3, len(slots))):
        chars[i] = NIK_CONFUSIONS[chars[i]]
    return "".join(chars)


def card_truth(i: int, rng: random.Random) -> dict:
    kind, city = CITIES[i % len(CITIES)]
    return {
        "province": PROVINCES[i % len(PROVINCES)],
        "city_kind": kind,
        "city": city,
        "nik": make_nik(rng),
        "name": NAMES[i],
        "birth_place": BIRTH_PLACES[i % len(BIRTH_PLACES)],
        "birth_date": make_date(rng, 1960, 2002),
        "gender": "LAKI-LAKI" if i % 2 == 0 else "PEREMPUAN",
        # Card 10 must carry blood type B: its dump damage prints the
        # ambiguous digit 8, which closed-set matching cannot recover.
        "blood": "B" if i == 10 else BLOODS[i % len(BLOODS)],
        "street": STREETS[i % len(STREETS)],
        "rt": f"{rng.randint(1, 20):03d}",
        "rw": f"{rng.randint(1, 40):03d}",
        "village": VILLAGES[i % len(VILLAGES)],
        "district": DISTRICTS[i % len(DISTRICTS)],
        "religion": RELIGIONS[i % len(RELIGIONS)],
        "marital": MARITALS[i % len(MARITALS)],
        "occupation": OCCUPATIONS[i % len(OCCUPATIONS)],
        "issued_date": make_date(rng, 2012, 2020),
        "expiry": "SEUMUR HIDUP" if i % 3 else make_date(rng, 2025, 2033),
    }


def card_lines(t: dict) -> list[str]:
    """The printed text lines, top to bottom (truth, no noise)."""
    return [
        f"PROVINSI {t['province']}",
        f"{t['city_kind']} {t['city']}",
        f"NIK : {t['nik']}",
        f"NAMA : {t['name']}",
        f"TEMPAT/TGL LAHIR : {t['birth_place']}, {t['birth_date']}",
        f"JENIS KELAMIN : {t['gender']} GOL. DARAH : {t['blood']}",
        f"ALAMAT : {t['street']}",
        f"RT/RW : {t['rt']}/{t['rw']}",
        f"KEL/DESA : {t['village']}",
        f"KECAMATAN : {t['district']}",
        f"AGAMA : {t['religion']}",
        f"STATUS PERKAWINAN : {t['marital']}",
        f"PEKERJAAN : {t['occupation']}",
        "KEWARGANEGARAAN : WNI",
        f"BERLAKU HINGGA : {t['expiry']}",
        t["city"],
        t["issued_date"],
    ]


def noisy_lines(i: int, t: dict, rng: random.Random) -> list[str]:
    """What the OCR 'saw': truth lines with per-card noise injected."""
    lines = card_lines(t)
    if i != 2:  # card 2 stays pristine to exercise the auto-accept path
        lines[2] = f"NIK : {noisy_nik(t['nik'], rng)}"
    if i % 4 == 0:
        lines[8] = f"KEL/DESA : {t['village']}!"
    if i % 4 == 1 and t["religion"] == "ISLAM":
        lines[10] = "AGAMA : 1SLAM"
    if i % 4 == 2 and t["blood"] == "O":
        lines[5] = lines[5][:-1] + "0"
    if i % 5 == 3 and t["marital"] == "KAWIN":
        lines[11] = "STATUS PERKAWINAN : KAWlN"

    # Damage beyond repair, one kind per designated card.
    if i == 8:
        lines[10] = "AGAMA :"                       # value never recognized
    if i == 9:
        lines[3] = "NAMA : " + t["name"].replace("I", "l", 1)
    if i == 10:
        lines[5] = lines[5][:-len(t["blood"])] + "8"  # truth is B on card 10
    if i == 11:
        del lines[12]                                # occupation line lost
    return lines


def expected_fields(i: int, t: dict) -> dict[str, str]:
    """Gold values: the truth, expressed in output conventions."""
    address = (f"{t['street']} RT RW : {t['rt']} {t['rw']} "
               f"KEL DESA : {t['village']} KECAMATAN : {t['district']}")
    return {
        "identifier": t["nik"],
        "name": t["name"],
        "birthPlace": t["birth_place"],
        "birthDate": t["birth_date"],
        "gender": "M" if t["gender"] != "PEREMPUAN" else "F",
        "bloodType": t["blood"],
        "address": address,
        "religion": t["religion"],
        "marriageStatus": MARITAL_CODES[t["marital"]],
        "occupation": t["occupation"],
        "issuedProvince": t["province"],
        "issuedCity": f"{t['city_kind']} {t['city']}",
        "issuedDate": t["issued_date"],
    }


def word_confidence(word: str, line_idx: int, i: int,
                    rng: random.Random, noisy: bool) -> int:
    if noisy:
        return rng.randint(45, 80)
    # Religion line on every third card reads poorly even when correct,
    # and half the cards have a shaky address line: review-queue fodder.
    if line_idx == 10 and i % 3 == 0:
        return rng.randint(40, 70)
    if line_idx == 6 and i % 2 == 1:
        return rng.randint(60, 80)
    return rng.randint(86, 97)


def build_dump(i: int, t: dict, font, rng: random.Random) -> str:
    truth_lines = card_lines(t)
    seen_lines = noisy_lines(i, t, rng)
    truth_words = {w for line in truth_lines for w in line.split()}
    ocr_lines = []
    for line_idx, text in enumerate(seen_lines):
        y = 26 + 21 * line_idx
        x, words = 18, []
        for word_num, word in enumerate(text.split(), start=1):
            w = max(6, int(font.getlength(word)))
            noisy = word not in truth_words
            words.append(OcrWord(
                text=word,
                confidence=word_confidence(word, line_idx, i, rng, noisy),
                left=x, top=y, width=w, height=14,
                block_id=1, paragraph_id=1, line_id=line_idx + 1,
                word_id=word_num,
            ))
            x += w + 7
        if words:
            ocr_lines.append(OcrLine.from_words(words))
    return serialize_word_dump(OcrDocument(lines=tuple(ocr_lines)))


def render_card(i: int, t: dict, font, face: dict) -> Image.Image:
    img = Image.new("RGB", (CARD_W, CARD_H), (233, 229, 220))
    draw = ImageDraw.Draw(img)
    for line_idx, text in enumerate(card_lines(t)):
        draw.text((18, 20 + 21 * line_idx), text, fill=(45, 42, 60), font=font)
    # Portrait panel: dark backdrop, bright square "face".
    panel = (500, 96, 604, 200)
    draw.rectangle(panel, fill=(44, 44, 48))
    half = face["side"] // 2
    cx, cy = face["cx"], face["cy"]
    draw.rectangle((cx - half, cy - half, cx + half - 1, cy + half - 1),
                   fill=(232, 230, 224))
    return img


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path,
                        default=Path(__file__).resolve().parent.parent / "fixtures")
    args = parser.parse_args()

    out: Path = args.out
    cards_dir = out / "cards"
    cards_dir.mkdir(parents=True, exist_ok=True)
    font = ImageFont.load_default(size=13)

    gold, faces = [], {}
    for i in range(N_CARDS):
        rng = random.Random(1000 + i)
        t = card_truth(i, rng)
        card_id = f"card{i:02d}"
        face = {"cx": 552 + rng.randint(-6, 6),
                "cy": 148 + rng.randint(-6, 6),
                "side": 28 + (i % 3) * 2}
        render_card(i, t, font, face).save(cards_dir / f"{card_id}.png")
        (cards_dir / f"{card_id}.tsv").write_text(
            build_dump(i, t, font, rng), encoding="utf-8")
        gold.append({
            "card_id": card_id,
            "capture_kind": "camera" if i % 2 == 0 else "scanner",
            "expected": expected_fields(i, t),
        })
        faces[card_id] = face

    (out / "gold.json").write_text(
        json.dumps(gold, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    (out / "faces.json").write_text(
        json.dumps(faces, indent=2) + "\n", encoding="utf-8")
    save_cascade(build_cascade(), out / "cascade_fixture.json")
    print(f"{N_CARDS} cards, gold, faces, cascade -> {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
