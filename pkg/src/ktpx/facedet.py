"""Portrait localization with an integral-image Haar cascade, plus crop encoding.

The detector slides a window over a scale pyramid; each window runs a chain
of classifier stages, any stage failure rejecting it immediately. Stage
features are weighted rectangle-sum differences, area-normalized and
compared against a threshold scaled by the window's pixel standard
deviation (published cascades are trained with that normalization).

Cascades load from a small JSON format; :func:`convert_opencv_cascade`
translates the widely published frontal-face XML into it when real faces,
not synthetic fixtures, are the target.
"""

from __future__ import annotations

import base64
import io
import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .errors import BoundsError
from .preproc import RasterImage, to_grayscale

DEFAULT_SCALE_FACTOR = 1.1
DEFAULT_MIN_SIZE = 24
MIN_MERGE_NEIGHBORS = 3
_MERGE_IOU = 0.4


@dataclass(frozen=True)
class IntegralImage:
    """Cumulative pixel sums: ``table[y, x]`` is the sum strictly above-left.

    ``table`` is (h+1, w+1) with a zero first row and column, so any
    rectangle sum is four lookups. ``sq_table`` accumulates squared pixels
    for window variance.
    """

    width: int
    height: int
    table: np.ndarray
    sq_table: np.ndarray


@dataclass(frozen=True)
class FaceBox:
    """A square detection in card-image coordinates."""

    left: int
    top: int
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise BoundsError(f"degenerate box {self.width}x{self.height}")
        if self.width != self.height:
            raise BoundsError(f"detector boxes are square, got {self.width}x{self.height}")


@dataclass(frozen=True)
class HaarRect:
    x: int
    y: int
    w: int
    h: int
    weight: float


@dataclass(frozen=True)
class HaarFeature:
    """Weighted rectangle combination compared against a threshold.

    The first rect's weight is recomputed at evaluation scale so the
    response on a uniform region is exactly zero; its declared weight is a
    shape hint only (the convention of published cascades).
    """

    rects: tuple[HaarRect, ...]
    threshold: float
    pass_value: float
    fail_value: float

    def __post_init__(self):
        if not self.rects:
            raise ValueError("feature needs at least one rect")


@dataclass(frozen=True)
class CascadeStage:
    features: tuple[HaarFeature, ...]
    stage_threshold: float

    def __post_init__(self):
        if not self.features:
            raise ValueError("stage needs at least one feature")


@dataclass(frozen=True)
class CascadeModel:
    window_width: int
    window_height: int
    stages: tuple[CascadeStage, ...]

    def __post_init__(self):
        if self.window_width < 8 or self.window_height < 8:
            raise ValueError("cascade window must be at least 8x8")
        if not self.stages:
            raise ValueError("cascade needs at least one stage")
        for stage in self.stages:
            for feat in stage.features:
                for r in feat.rects:
                    if r.x < 0 or r.y < 0 or r.w <= 0 or r.h <= 0 \
                            or r.x + r.w > self.window_width or r.y + r.h > self.window_height:
                        raise ValueError(f"feature rect {r} outside {self.window_width}x{self.window_height} window")


@dataclass
class EvalCounter:
    """Observable work tally for the short-circuit property."""

    stages_evaluated: int = 0
    features_evaluated: int = 0


def integral(img: RasterImage) -> IntegralImage:
    """Cumulative-sum tables (plain and squared) for a grayscale image."""
    if img.channels != 1:
        raise BoundsError(f"integral image needs 1 channel, got {img.channels}")
    h, w = img.pixels.shape
    table = np.zeros((h + 1, w + 1), dtype=np.int64)
    sq_table = np.zeros((h + 1, w + 1), dtype=np.int64)
    px = img.pixels.astype(np.int64)
    table[1:, 1:] = px.cumsum(axis=0).cumsum(axis=1)
    sq_table[1:, 1:] = (px * px).cumsum(axis=0).cumsum(axis=1)
    return IntegralImage(width=w, height=h, table=table, sq_table=sq_table)


def _check_rect(ii: IntegralImage, left: int, top: int, width: int, height: int) -> None:
    if width <= 0 or height <= 0:
        raise BoundsError(f"degenerate rect {width}x{height}")
    if left < 0 or top < 0 or left + width > ii.width or top + height > ii.height:
        raise BoundsError(
            f"rect ({left},{top},{width},{height}) outside {ii.width}x{ii.height} image")


def rect_sum(ii: IntegralImage, rect: tuple[int, int, int, int]) -> int:
    """Pixel sum over (left, top, width, height) via four table lookups."""
    left, top, width, height = rect
    _check_rect(ii, left, top, width, height)
    t = ii.table
    return int(t[top + height, left + width] - t[top, left + width]
               - t[top + height, left] + t[top, left])


def _window_sigma(ii: IntegralImage, left: int, top: int, width: int, height: int) -> float:
    area = width * height
    t, sq = ii.table, ii.sq_table
    s = int(t[top + height, left + width] - t[top, left + width]
            - t[top + height, left] + t[top, left])
    s2 = int(sq[top + height, left + width] - sq[top, left + width]
             - sq[top + height, left] + sq[top, left])
    mean = s / area
    var = s2 / area - mean * mean
    return math.sqrt(var) if var > 0 else 1.0


@dataclass(frozen=True)
class _ScaledFeature:
    rects: np.ndarray   # (n, 4) ints: x, y, w, h at window scale
    weights: np.ndarray  # (n,) float, first weight rebalanced
    threshold: float
    pass_value: float
    fail_value: float


def _scale_features(model: CascadeModel, win_w: int, win_h: int) -> list[list[_ScaledFeature]]:
    """Rects and weights of every feature at a concrete window size.

    One shared path for the scalar evaluator and the vectorized scan, so the
    two can never disagree about rounding.
    """
    sx = win_w / model.window_width
    sy = win_h / model.window_height
    scaled: list[list[_ScaledFeature]] = []
    for stage in model.stages:
        feats = []
        for feat in stage.features:
            rects = []
            for r in feat.rects:
                x = round(r.x * sx)
                y = round(r.y * sy)
                w = max(1, round(r.w * sx))
                h = max(1, round(r.h * sy))
                w = min(w, win_w - x)
                h = min(h, win_h - y)
                rects.append((x, y, w, h))
            arr = np.array(rects, dtype=np.int64)
            weights = np.array([r.weight for r in feat.rects], dtype=np.float64)
            areas = arr[:, 2] * arr[:, 3]
            if len(weights) > 1:
                weights[0] = -float(weights[1:] @ areas[1:]) / float(areas[0])
            feats.append(_ScaledFeature(
                rects=arr, weights=weights,
                threshold=feat.threshold,
                pass_value=feat.pass_value, fail_value=feat.fail_value,
            ))
        scaled.append(feats)
    return scaled


def evaluate_window(
    ii: IntegralImage,
    model: CascadeModel,
    window: FaceBox,
    counter: Optional[EvalCounter] = None,
) -> bool:
    """Run the full stage chain on one window.

    Stages run in order and the first failing stage rejects the window
    without touching the rest (observable through ``counter``). Feature
    values are area-normalized rect sums compared against the feature
    threshold scaled by the window's pixel standard deviation.
    """
    _check_rect(ii, window.left, window.top, window.width, window.height)
    area = window.width * window.height
    sigma = _window_sigma(ii, window.left, window.top, window.width, window.height)
    stages = _scale_features(model, window.width, window.height)
    for stage, feats in zip(model.stages, stages):
        if counter is not None:
            counter.stages_evaluated += 1
        total = 0.0
        for f in feats:
            if counter is not None:
                counter.features_evaluated += 1
            value = 0.0
            for (rx, ry, rw, rh), weight in zip(f.rects, f.weights):
                value += weight * rect_sum(
                    ii, (window.left + int(rx), window.top + int(ry), int(rw), int(rh)))
            value /= area
            total += f.pass_value if value >= f.threshold * sigma else f.fail_value
        if total < stage.stage_threshold:
            return False
    return True


def _strided_view(table: np.ndarray, ny: int, nx: int, stride: int,
                  dy: int, dx: int) -> np.ndarray:
    return table[dy: dy + (ny - 1) * stride + 1: stride,
                 dx: dx + (nx - 1) * stride + 1: stride]


def _grid_rect_sums(table: np.ndarray, ny: int, nx: int, stride: int,
                    rx: int, ry: int, rw: int, rh: int) -> np.ndarray:
    """Rect sums for every lattice position at once, via strided views.

    The scan grid is a uniform lattice, so the four integral-table corners
    of a rect are plain slices -- far cheaper than fancy-index gathers.
    """
    return (_strided_view(table, ny, nx, stride, ry + rh, rx + rw)
            - _strided_view(table, ny, nx, stride, ry, rx + rw)
            - _strided_view(table, ny, nx, stride, ry + rh, rx)
            + _strided_view(table, ny, nx, stride, ry, rx))


def _flat_rect_sums(table: np.ndarray, pos_x: np.ndarray, pos_y: np.ndarray,
                    rx: int, ry: int, rw: int, rh: int) -> np.ndarray:
    x0, x1 = pos_x + rx, pos_x + rx + rw
    y0, y1 = pos_y + ry, pos_y + ry + rh
    return table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0]


def _scan_level(ii: IntegralImage, model: CascadeModel,
                win_w: int, win_h: int, stride: int) -> list[tuple[int, int]]:
    """All (x, y) positions at one pyramid level where every stage passes.

    The first stage runs on the full lattice through strided views; the few
    surviving positions are gathered into flat arrays for later stages (the
    vectorized analog of the cascade's short-circuit).
    """
    xs = np.arange(0, ii.width - win_w + 1, stride)
    ys = np.arange(0, ii.height - win_h + 1, stride)
    ny, nx = len(ys), len(xs)
    if nx == 0 or ny == 0:
        return []
    area = win_w * win_h
    s_raw = _grid_rect_sums(ii.table, ny, nx, stride, 0, 0, win_w, win_h).astype(np.float64)
    s = s_raw / area
    s2 = _grid_rect_sums(ii.sq_table, ny, nx, stride, 0, 0, win_w, win_h) / area
    var = s2 - s * s
    sigma = np.where(var > 0, np.sqrt(np.maximum(var, 0)), 1.0)

    scaled = _scale_features(model, win_w, win_h)
    full_window = (0, 0, win_w, win_h)
    totals = np.zeros((ny, nx))
    for f in scaled[0]:
        value = np.zeros((ny, nx))
        for rect, weight in zip(f.rects, f.weights):
            if tuple(int(v) for v in rect) == full_window:
                value += weight * s_raw  # window sum already on hand
            else:
                rx, ry, rw, rh = (int(v) for v in rect)
                value += weight * _grid_rect_sums(ii.table, ny, nx, stride,
                                                  rx, ry, rw, rh)
        value /= area
        totals += np.where(value >= f.threshold * sigma, f.pass_value, f.fail_value)
    alive = totals >= model.stages[0].stage_threshold
    iy, ix = np.nonzero(alive)
    pos_x, pos_y, sig = xs[ix], ys[iy], sigma[alive]

    for stage, feats in zip(model.stages[1:], scaled[1:]):
        if pos_x.size == 0:
            break
        totals = np.zeros(pos_x.size)
        for f in feats:
            value = np.zeros(pos_x.size)
            for (rx, ry, rw, rh), weight in zip(f.rects, f.weights):
                value += weight * _flat_rect_sums(ii.table, pos_x, pos_y,
                                                  int(rx), int(ry), int(rw), int(rh))
            value /= area
            totals += np.where(value >= f.threshold * sig, f.pass_value, f.fail_value)
        keep = totals >= stage.stage_threshold
        pos_x, pos_y, sig = pos_x[keep], pos_y[keep], sig[keep]
    return list(zip(pos_x.tolist(), pos_y.tolist()))


def _box_iou(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> float:
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ix = max(0, min(ax0 + aw, bx0 + bw) - max(ax0, bx0))
    iy = max(0, min(ay0 + ah, by0 + bh) - max(ay0, by0))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union else 0.0


def _merge_hits(hits: list[tuple[int, int, int, int]],
                img_w: int, img_h: int,
                min_neighbors: int = MIN_MERGE_NEIGHBORS) -> list[FaceBox]:
    """Group overlapping raw hits; groups below the neighbor floor are noise."""
    n = len(hits)
    labels = np.full(n, -1, dtype=np.int64)
    if n:
        arr = np.asarray(hits, dtype=np.float64)
        x0, y0 = arr[:, 0], arr[:, 1]
        x1, y1 = x0 + arr[:, 2], y0 + arr[:, 3]
        ix = np.maximum(0.0, np.minimum(x1[:, None], x1) - np.maximum(x0[:, None], x0))
        iy = np.maximum(0.0, np.minimum(y1[:, None], y1) - np.maximum(y0[:, None], y0))
        inter = ix * iy
        areas = arr[:, 2] * arr[:, 3]
        union = areas[:, None] + areas - inter
        overlap = inter >= _MERGE_IOU * np.maximum(union, 1e-12)
        # Flood-fill the overlap graph one component at a time; each step
        # ORs whole adjacency rows, so the work is a few vector ops per
        # component rather than a Python loop over every overlapping pair.
        group_id = 0
        for i in range(n):
            if labels[i] >= 0:
                continue
            member = overlap[i].copy()
            while True:
                grown = member | overlap[member].any(axis=0)
                if (grown == member).all():
                    break
                member = grown
            labels[member] = group_id
            group_id += 1

    groups: dict[int, list[tuple[int, int, int, int]]] = {}
    for i in range(n):
        groups.setdefault(int(labels[i]), []).append(hits[i])

    boxes = []
    for members in groups.values():
        if len(members) < min_neighbors:
            continue
        arr = np.array(members, dtype=np.float64)
        left, top, w, h = (int(round(v)) for v in arr.mean(axis=0))
        side = max(w, h)
        left = min(max(left, 0), img_w - side)
        top = min(max(top, 0), img_h - side)
        boxes.append(FaceBox(left=left, top=top, width=side, height=side))
    boxes.sort(key=lambda b: b.width * b.height, reverse=True)
    return boxes


def detect_faces(
    img: RasterImage,
    model: CascadeModel,
    scale_factor: float = DEFAULT_SCALE_FACTOR,
    min_size: int = DEFAULT_MIN_SIZE,
) -> list[FaceBox]:
    """Scan a scale pyramid and return merged detections, largest first.

    The window grows by ``scale_factor`` per level; stride is
    max(1, round(scale / 10)). Images smaller than ``min_size`` yield an
    empty result. Raw hits are merged by overlap grouping and a group only
    survives with at least three members.
    """
    gray = to_grayscale(img) if img.channels == 3 else img
    if min(gray.width, gray.height) < min_size:
        return []
    ii = integral(gray)
    hits: list[tuple[int, int, int, int]] = []
    scale = 1.0
    while True:
        win_w = round(model.window_width * scale)
        win_h = round(model.window_height * scale)
        if win_w > gray.width or win_h > gray.height:
            break
        if win_w >= min_size and win_h >= min_size:
            stride = max(1, round(scale / 10))
            for x, y in _scan_level(ii, model, win_w, win_h, stride):
                hits.append((x, y, win_w, win_h))
        scale *= scale_factor
    return _merge_hits(hits, gray.width, gray.height)


def crop_and_encode(img: RasterImage, box: FaceBox) -> tuple[str, FaceBox]:
    """Crop the box, serialize it as PNG, Base64-encode the bytes."""
    if box.left < 0 or box.top < 0 \
            or box.left + box.width > img.width or box.top + box.height > img.height:
        raise BoundsError(f"crop box {box} outside {img.width}x{img.height} image")
    crop = img.pixels[box.top:box.top + box.height, box.left:box.left + box.width]
    buf = io.BytesIO()
    Image.fromarray(crop).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii"), box


def load_cascade(path: str | Path) -> CascadeModel:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return cascade_from_dict(raw)


def cascade_from_dict(raw: dict) -> CascadeModel:
    stages = tuple(
        CascadeStage(
            features=tuple(
                HaarFeature(
                    rects=tuple(HaarRect(r["x"], r["y"], r["w"], r["h"], r["weight"])
                                for r in f["rects"]),
                    threshold=f["threshold"],
                    pass_value=f["pass_value"],
                    fail_value=f["fail_value"],
                )
                for f in s["features"]
            ),
            stage_threshold=s["stage_threshold"],
        )
        for s in raw["stages"]
    )
    return CascadeModel(
        window_width=raw["window"]["w"],
        window_height=raw["window"]["h"],
        stages=stages,
    )


def cascade_to_dict(model: CascadeModel) -> dict:
    return {
        "window": {"w": model.window_width, "h": model.window_height},
        "stages": [
            {
                "stage_threshold": s.stage_threshold,
                "features": [
                    {
                        "rects": [
                            {"x": r.x, "y": r.y, "w": r.w, "h": r.h, "weight": r.weight}
                            for r in f.rects
                        ],
                        "threshold": f.threshold,
                        "pass_value": f.pass_value,
                        "fail_value": f.fail_value,
                    }
                    for f in s.features
                ],
            }
            for s in model.stages
        ],
    }


def save_cascade(model: CascadeModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cascade_to_dict(model), indent=2), encoding="utf-8")


def convert_opencv_cascade(xml_path: str | Path) -> CascadeModel:
    """Translate a stump-tree OpenCV Haar cascade XML into the JSON model.

    Supports the current XML layout (cascade root, internalNodes and
    leafValues per weak classifier, shared feature table). Tilted features
    are rejected.
    """
    root = ET.parse(str(xml_path)).getroot()
    cascade = root.find("cascade")
    if cascade is None:
        raise ValueError("not an OpenCV cascade file (no <cascade> element)")
    width = int(cascade.findtext("width"))
    height = int(cascade.findtext("height"))

    features_xml = cascade.find("features")
    feature_rects: list[tuple[HaarRect, ...]] = []
    for f in features_xml.findall("_"):
        if f.findtext("tilted", "0").strip() == "1":
            raise ValueError("tilted features are not supported")
        rects = []
        for r in f.find("rects").findall("_"):
            x, y, w, h, weight = r.text.split()
            rects.append(HaarRect(int(x), int(y), int(w), int(h), float(weight)))
        feature_rects.append(tuple(rects))

    stages = []
    for s in cascade.find("stages").findall("_"):
        stage_threshold = float(s.findtext("stageThreshold"))
        feats = []
        for weak in s.find("weakClassifiers").findall("_"):
            nodes = weak.findtext("internalNodes").split()
            leaves = weak.findtext("leafValues").split()
            if len(nodes) != 4 or len(leaves) != 2:
                raise ValueError("only stump weak classifiers are supported")
            feat_idx = int(nodes[2])
            threshold = float(nodes[3])
            feats.append(HaarFeature(
                rects=feature_rects[feat_idx],
                threshold=threshold,
                fail_value=float(leaves[0]),
                pass_value=float(leaves[1]),
            ))
        stages.append(CascadeStage(features=tuple(feats), stage_threshold=stage_threshold))
    return CascadeModel(window_width=width, window_height=height, stages=tuple(stages))
