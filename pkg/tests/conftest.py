import json
from pathlib import Path

import pytest

from ktpx.facedet import load_cascade

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
CARDS = FIXTURES / "cards"


def make_dump(lines, start_conf=90):
    """Build a word-dump string from [(text, [conf, ...]), ...] line specs.

    Confidence lists shorter than the word count are right-padded with
    ``start_conf``.  Geometry is synthetic but well-formed.
    """
    rows = ["\t".join([
        "level", "page_num", "block_num", "par_num", "line_num", "word_num",
        "left", "top", "width", "height", "conf", "text",
    ])]
    for line_no, (text, confs) in enumerate(lines, start=1):
        words = text.split()
        confs = list(confs) + [start_conf] * (len(words) - len(confs))
        for word_no, (word, conf) in enumerate(zip(words, confs), start=1):
            rows.append("\t".join(map(str, [
                5, 1, 1, 1, line_no, word_no,
                10 + 70 * word_no, 24 * line_no, 60, 16, conf, word,
            ])))
    return "\n".join(rows) + "\n"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def cards_dir():
    return CARDS


@pytest.fixture(scope="session")
def gold_entries():
    return json.loads((FIXTURES / "gold.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def planted_faces():
    return json.loads((FIXTURES / "faces.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def cascade_model():
    return load_cascade(FIXTURES / "cascade_fixture.json")


@pytest.fixture(scope="session")
def card_paths():
    paths = sorted(CARDS.glob("card*.png"))
    assert len(paths) >= 10
    return paths
