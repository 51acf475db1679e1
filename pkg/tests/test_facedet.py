import base64
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from PIL import Image

from ktpx.errors import BoundsError
from ktpx.facedet import (
    DEFAULT_MIN_SIZE,
    DEFAULT_SCALE_FACTOR,
    MIN_MERGE_NEIGHBORS,
    CascadeModel,
    CascadeStage,
    EvalCounter,
    FaceBox,
    HaarFeature,
    HaarRect,
    IntegralImage,
    _merge_hits,
    _scan_level,
    _window_sigma,
    cascade_from_dict,
    cascade_to_dict,
    convert_opencv_cascade,
    crop_and_encode,
    detect_faces,
    evaluate_window,
    integral,
    load_cascade,
    rect_sum,
    save_cascade,
)
from ktpx.preproc import RasterImage


def raster(arr):
    return RasterImage(np.asarray(arr, dtype=np.uint8))


def brute_rect_sum(px, left, top, width, height):
    return int(px[top:top + height, left:left + width].astype(np.int64).sum())


class TestIntegral:
    def test_table_shape_and_zero_border(self):
        ii = integral(raster(np.arange(12).reshape(3, 4) % 251))
        assert ii.table.shape == (4, 5)
        assert ii.sq_table.shape == (4, 5)
        assert not ii.table[0].any() and not ii.table[:, 0].any()
        assert ii.table.dtype == np.int64

    def test_rejects_color_input(self):
        with pytest.raises(BoundsError):
            integral(raster(np.zeros((4, 4, 3))))

    def test_tiny_known_sums(self):
        ii = integral(raster([[1, 2], [3, 4]]))
        assert rect_sum(ii, (0, 0, 2, 2)) == 10
        assert rect_sum(ii, (1, 0, 1, 2)) == 6
        assert rect_sum(ii, (0, 1, 2, 1)) == 7
        assert rect_sum(ii, (1, 1, 1, 1)) == 4

    def test_saturated_image_has_no_overflow(self):
        ii = integral(raster(np.full((64, 64), 255)))
        assert rect_sum(ii, (0, 0, 64, 64)) == 255 * 64 * 64

    @given(hnp.arrays(np.uint8, hnp.array_shapes(min_dims=2, max_dims=2,
                                                 min_side=1, max_side=12)),
           st.data())
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force(self, px, data):
        h, w = px.shape
        ii = integral(raster(px))
        left = data.draw(st.integers(0, w - 1))
        top = data.draw(st.integers(0, h - 1))
        width = data.draw(st.integers(1, w - left))
        height = data.draw(st.integers(1, h - top))
        assert rect_sum(ii, (left, top, width, height)) == \
            brute_rect_sum(px, left, top, width, height)

    @pytest.mark.parametrize("rect", [
        (-1, 0, 2, 2), (0, -1, 2, 2), (3, 0, 2, 2), (0, 3, 2, 2),
        (0, 0, 5, 1), (0, 0, 1, 5), (0, 0, 0, 1), (0, 0, 1, 0),
    ])
    def test_rect_bounds_enforced(self, rect):
        ii = integral(raster(np.zeros((4, 4))))
        with pytest.raises(BoundsError):
            rect_sum(ii, rect)


class TestWindowSigma:
    def test_uniform_window_clamps_to_one(self):
        ii = integral(raster(np.full((8, 8), 77)))
        assert _window_sigma(ii, 0, 0, 8, 8) == 1.0

    def test_known_variance(self):
        # Half zeros, half twos: mean 1, variance 1.
        ii = integral(raster([[0, 0], [2, 2]]))
        assert _window_sigma(ii, 0, 0, 2, 2) == pytest.approx(1.0)


class TestFaceBox:
    def test_must_be_square(self):
        with pytest.raises(BoundsError):
            FaceBox(0, 0, 10, 12)

    def test_must_be_positive(self):
        with pytest.raises(BoundsError):
            FaceBox(0, 0, 0, 0)


def feature(rects, threshold=0.0, pass_value=1.0, fail_value=0.0):
    return HaarFeature(rects=tuple(HaarRect(*r) for r in rects),
                       threshold=threshold, pass_value=pass_value,
                       fail_value=fail_value)


class TestModelValidation:
    def test_window_floor(self):
        with pytest.raises(ValueError):
            CascadeModel(4, 4, stages=(CascadeStage(
                (feature([(0, 0, 4, 4, -1.0)]),), 0.0),))

    def test_needs_stages_features_rects(self):
        with pytest.raises(ValueError):
            CascadeModel(24, 24, stages=())
        with pytest.raises(ValueError):
            CascadeStage(features=(), stage_threshold=0.0)
        with pytest.raises(ValueError):
            HaarFeature(rects=(), threshold=0.0, pass_value=1.0, fail_value=0.0)

    def test_rect_must_fit_window(self):
        with pytest.raises(ValueError):
            CascadeModel(24, 24, stages=(CascadeStage(
                (feature([(20, 0, 8, 8, 1.0)]),), 0.0),))


class TestEvaluateWindow:
    def always_fail_model(self):
        hard = feature([(0, 0, 24, 24, -1.0), (6, 6, 12, 12, 4.0)],
                       threshold=1e9, pass_value=1.0, fail_value=0.0)
        easy = feature([(0, 0, 24, 24, -1.0), (6, 6, 12, 12, 4.0)],
                       threshold=-1e9, pass_value=1.0, fail_value=0.0)
        return CascadeModel(24, 24, stages=(
            CascadeStage((hard,), 0.5),
            CascadeStage((easy, easy), 1.5),
        ))

    def test_failing_stage_short_circuits(self):
        rng = np.random.default_rng(5)
        ii = integral(raster(rng.integers(0, 256, (40, 40))))
        counter = EvalCounter()
        ok = evaluate_window(ii, self.always_fail_model(),
                             FaceBox(0, 0, 24, 24), counter)
        assert not ok
        assert counter.stages_evaluated == 1
        assert counter.features_evaluated == 1

    def test_passing_chain_counts_every_stage(self):
        model = self.always_fail_model()
        permissive = CascadeModel(24, 24, stages=(model.stages[1], model.stages[1]))
        ii = integral(raster(np.full((30, 30), 128)))
        counter = EvalCounter()
        assert evaluate_window(ii, permissive, FaceBox(2, 2, 24, 24), counter)
        assert counter.stages_evaluated == 2
        assert counter.features_evaluated == 4

    def test_window_outside_image_rejected(self, cascade_model):
        ii = integral(raster(np.zeros((30, 30))))
        with pytest.raises(BoundsError):
            evaluate_window(ii, cascade_model, FaceBox(10, 10, 24, 24))

    def test_uniform_window_fails_fixture_stage_one(self, cascade_model):
        # Rebalanced weights make the response on a flat region exactly 0,
        # which sits below the positive stage-one threshold.
        ii = integral(raster(np.full((24, 24), 200)))
        assert not evaluate_window(ii, cascade_model, FaceBox(0, 0, 24, 24))

    def test_bright_center_passes_fixture(self, cascade_model):
        px = np.full((24, 24), 44, dtype=np.uint8)
        px[6:18, 6:18] = 232
        assert evaluate_window(integral(raster(px)), cascade_model,
                               FaceBox(0, 0, 24, 24))


class TestScanAgreement:
    @pytest.mark.parametrize("win,stride", [(24, 1), (26, 2), (29, 3)])
    def test_vectorized_scan_matches_scalar_evaluator(self, cascade_model, win, stride):
        rng = np.random.default_rng(win * 100 + stride)
        px = rng.integers(0, 256, (52, 61), dtype=np.uint8)
        # Plant a few bright-core squares so some windows genuinely pass.
        for x, y in ((3, 5), (30, 20)):
            px[y:y + win, x:x + win] = 44
            q = win // 4
            px[y + q:y + win - q, x + q:x + win - q] = 232
        ii = integral(raster(px))
        fast = set(_scan_level(ii, cascade_model, win, win, stride))
        slow = {
            (x, y)
            for y in range(0, 52 - win + 1, stride)
            for x in range(0, 61 - win + 1, stride)
            if evaluate_window(ii, cascade_model, FaceBox(x, y, win, win))
        }
        assert fast == slow
        assert fast  # the planted squares must actually fire


class TestMergeHits:
    def test_small_groups_are_noise(self):
        assert _merge_hits([(10, 10, 24, 24)] * (MIN_MERGE_NEIGHBORS - 1), 100, 100) == []

    def test_group_at_floor_survives(self):
        boxes = _merge_hits([(10, 10, 24, 24)] * MIN_MERGE_NEIGHBORS, 100, 100)
        assert boxes == [FaceBox(10, 10, 24, 24)]

    def test_mean_box_and_max_side(self):
        hits = [(10, 10, 24, 24), (12, 12, 24, 24), (11, 11, 26, 26)]
        boxes = _merge_hits(hits, 100, 100)
        assert boxes == [FaceBox(11, 11, 25, 25)]

    def test_distinct_clusters_sorted_by_area(self):
        near = [(10, 10, 24, 24)] * 3
        far = [(60, 60, 30, 30)] * 3
        boxes = _merge_hits(near + far, 120, 120)
        assert [b.width for b in boxes] == [30, 24]

    def test_mean_box_clamped_inside_image(self):
        hits = [(78, 78, 24, 24)] * 3
        boxes = _merge_hits(hits, 100, 96)
        assert boxes == [FaceBox(76, 72, 24, 24)]

    def test_chained_overlap_forms_one_group(self):
        # a overlaps b, b overlaps c, a barely overlaps c: transitive merge.
        hits = [(0, 0, 24, 24), (6, 0, 24, 24), (12, 0, 24, 24)]
        boxes = _merge_hits(hits, 100, 100)
        assert boxes == [FaceBox(6, 0, 24, 24)]

    def test_empty_input(self):
        assert _merge_hits([], 10, 10) == []


class TestDetectFaces:
    def test_finds_planted_portrait(self, card_paths, planted_faces, cascade_model):
        from ktpx.pipeline import decode_image
        path = card_paths[0]
        img = decode_image(path.read_bytes())
        boxes = detect_faces(img, cascade_model)
        assert len(boxes) == 1
        truth = planted_faces[path.stem]
        got = boxes[0]
        assert abs((got.left + got.width / 2) - truth["cx"]) <= 2
        assert abs((got.top + got.height / 2) - truth["cy"]) <= 2

    def test_blank_image_has_no_detections(self, cascade_model):
        assert detect_faces(raster(np.full((120, 160), 210)), cascade_model) == []

    def test_image_below_min_size_skipped(self, cascade_model):
        assert detect_faces(raster(np.full((20, 200), 0)), cascade_model) == []

    def test_defaults(self):
        assert DEFAULT_SCALE_FACTOR == pytest.approx(1.1)
        assert DEFAULT_MIN_SIZE == 24


class TestCropAndEncode:
    def test_roundtrip_is_byte_exact(self):
        rng = np.random.default_rng(9)
        px = rng.integers(0, 256, (50, 70), dtype=np.uint8)
        box = FaceBox(12, 8, 30, 30)
        encoded, returned = crop_and_encode(raster(px), box)
        assert returned == box
        decoded = np.asarray(Image.open(io.BytesIO(base64.b64decode(encoded))))
        assert np.array_equal(decoded, px[8:38, 12:42])

    def test_out_of_bounds_crop_rejected(self):
        with pytest.raises(BoundsError):
            crop_and_encode(raster(np.zeros((20, 20))), FaceBox(10, 10, 15, 15))


class TestModelSerialization:
    def test_dict_roundtrip(self, cascade_model):
        assert cascade_from_dict(cascade_to_dict(cascade_model)) == cascade_model

    def test_file_roundtrip(self, cascade_model, tmp_path):
        path = tmp_path / "cascade.json"
        save_cascade(cascade_model, path)
        assert load_cascade(path) == cascade_model


OPENCV_XML = """<?xml version="1.0"?>
<opencv_storage>
<cascade>
  <width>24</width>
  <height>24</height>
  <features>
    <_>
      <rects>
        <_>0 0 24 24 -1.</_>
        <_>6 6 12 12 4.</_>
      </rects>
      <tilted>0</tilted>
    </_>
  </features>
  <stages>
    <_>
      <stageThreshold>5.0e-01</stageThreshold>
      <weakClassifiers>
        <_>
          <internalNodes>0 -1 0 1.2</internalNodes>
          <leafValues>-9.0e-01 9.0e-01</leafValues>
        </_>
      </weakClassifiers>
    </_>
  </stages>
</cascade>
</opencv_storage>
"""


class TestOpencvConversion:
    def test_converts_stump_cascade(self, tmp_path):
        path = tmp_path / "haar.xml"
        path.write_text(OPENCV_XML)
        model = convert_opencv_cascade(path)
        assert (model.window_width, model.window_height) == (24, 24)
        assert len(model.stages) == 1
        stage = model.stages[0]
        assert stage.stage_threshold == pytest.approx(0.5)
        feat = stage.features[0]
        assert feat.rects == (HaarRect(0, 0, 24, 24, -1.0), HaarRect(6, 6, 12, 12, 4.0))
        assert feat.threshold == pytest.approx(1.2)
        assert (feat.fail_value, feat.pass_value) == (-0.9, 0.9)

    def test_rejects_tilted_features(self, tmp_path):
        path = tmp_path / "tilted.xml"
        path.write_text(OPENCV_XML.replace("<tilted>0</tilted>", "<tilted>1</tilted>"))
        with pytest.raises(ValueError, match="tilted"):
            convert_opencv_cascade(path)

    def test_rejects_tree_classifiers(self, tmp_path):
        path = tmp_path / "tree.xml"
        path.write_text(OPENCV_XML.replace(
            "<internalNodes>0 -1 0 1.2</internalNodes>",
            "<internalNodes>0 1 2 0 1.2 0.3</internalNodes>"))
        with pytest.raises(ValueError, match="stump"):
            convert_opencv_cascade(path)

    def test_rejects_non_cascade_file(self, tmp_path):
        path = tmp_path / "other.xml"
        path.write_text("<opencv_storage><other/></opencv_storage>")
        with pytest.raises(ValueError):
            convert_opencv_cascade(path)
