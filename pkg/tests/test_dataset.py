import numpy as np
import pytest
from PIL import Image

from scootsense.dataset import (
    Calibration,
    load_annotation_file,
    load_annotations,
    load_calibration,
    load_category_map,
    load_depth_frame,
    load_imu_log,
    load_manifest,
    save_annotation_file,
    save_calibration,
    save_depth_frame,
    save_imu_log,
    split_dataset,
)
from scootsense.detections import BBox
from scootsense.errors import (
    CategoryError,
    ConfigError,
    FormatError,
    OrderError,
    ParseError,
    RangeError,
)
from scootsense.evaluation import GroundTruthBox
from scootsense.geometry import DepthFrame, Extrinsics, Intrinsics
from scootsense.imu import AccelSample


class TestAnnotations:
    def test_hand_converted_line(self, tmp_path):
        path = tmp_path / "42.txt"
        path.write_text("0 0.5 0.5 0.2 0.1\n")
        boxes = load_annotation_file(path, (640, 480))
        assert len(boxes) == 1
        assert boxes[0].category == 0
        assert boxes[0].image_id == "42"
        b = boxes[0].bbox
        assert (b.x1, b.y1, b.x2, b.y2) == pytest.approx((256, 216, 384, 264))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "7.txt"
        path.write_text("")
        assert load_annotation_file(path, (640, 480)) == []

    def test_category_out_of_range(self, tmp_path):
        path = tmp_path / "1.txt"
        path.write_text("6 0.5 0.5 0.1 0.1\n")
        with pytest.raises(CategoryError):
            load_annotation_file(path, (640, 480))

    def test_coordinate_out_of_range_reports_location(self, tmp_path):
        path = tmp_path / "1.txt"
        path.write_text("0 0.5 0.5 0.1 0.1\n0 1.5 0.5 0.1 0.1\n")
        with pytest.raises(RangeError) as err:
            load_annotation_file(path, (640, 480))
        assert err.value.line == 2

    def test_round_trip_within_half_pixel(self, tmp_path):
        rng = np.random.default_rng(6)
        boxes = []
        for _ in range(50):
            x1 = rng.uniform(0, 600)
            y1 = rng.uniform(0, 440)
            w = rng.uniform(2, 640 - x1)
            h = rng.uniform(2, 480 - y1)
            boxes.append(
                GroundTruthBox(image_id="0", bbox=BBox(x1, y1, x1 + w, y1 + h), category=int(rng.integers(0, 6)))
            )
        path = tmp_path / "0.txt"
        save_annotation_file(path, boxes, (640, 480))
        loaded = load_annotation_file(path, (640, 480))
        assert len(loaded) == len(boxes)
        for orig, back in zip(boxes, loaded):
            for a, b in zip(
                (orig.bbox.x1, orig.bbox.y1, orig.bbox.x2, orig.bbox.y2),
                (back.bbox.x1, back.bbox.y1, back.bbox.x2, back.bbox.y2),
            ):
                assert abs(a - b) < 0.5

    def test_directory_loader_uses_stems(self, tmp_path):
        (tmp_path / "3.txt").write_text("1 0.5 0.5 0.2 0.2\n")
        (tmp_path / "9.txt").write_text("2 0.25 0.25 0.1 0.1\n")
        boxes = load_annotations(tmp_path, (100, 100))
        assert {b.image_id for b in boxes} == {"3", "9"}


class TestDepthFrames:
    def test_load_save_load_bit_identical(self, tmp_path):
        rng = np.random.default_rng(2)
        values = rng.integers(0, 65536, size=(48, 64)).astype(np.uint16)
        path = tmp_path / "d.png"
        save_depth_frame(path, DepthFrame(64, 48, values, 0.001))
        frame = load_depth_frame(path)
        assert np.array_equal(frame.values, values)
        path2 = tmp_path / "d2.png"
        save_depth_frame(path2, frame)
        again = load_depth_frame(path2)
        assert np.array_equal(again.values, values)

    def test_unit_conversion_and_sentinels(self, tmp_path):
        values = np.array([[1000, 0, 65535]], dtype=np.uint16)
        path = tmp_path / "d.png"
        save_depth_frame(path, DepthFrame(3, 1, values, 0.001))
        frame = load_depth_frame(path, depth_scale=0.001)
        assert frame.depth_at(0, 0) == pytest.approx(1.0)
        assert frame.depth_at(1, 0) == 0.0
        assert frame.depth_at(2, 0) == pytest.approx(65.535)

    def test_rejects_8bit(self, tmp_path):
        path = tmp_path / "gray8.png"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(path)
        with pytest.raises(FormatError):
            load_depth_frame(path)

    def test_rejects_rgb(self, tmp_path):
        path = tmp_path / "rgb.png"
        Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(path)
        with pytest.raises(FormatError):
            load_depth_frame(path)


class TestImuLog:
    def test_pass_through(self, tmp_path):
        path = tmp_path / "imu.csv"
        path.write_text("t,ax,ay,az\n0.005,0.01,6.93,6.95\n")
        samples = load_imu_log(path)
        assert samples == [AccelSample(t=0.005, ax=0.01, ay=6.93, az=6.95)]

    def test_empty_body(self, tmp_path):
        path = tmp_path / "imu.csv"
        path.write_text("t,ax,ay,az\n")
        assert load_imu_log(path) == []

    def test_non_monotonic_time(self, tmp_path):
        path = tmp_path / "imu.csv"
        path.write_text("t,ax,ay,az\n1.0,0,0,9.8\n0.9,0,0,9.8\n")
        with pytest.raises(OrderError):
            load_imu_log(path)

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "imu.csv"
        path.write_text("t,ax,ay,az\n0.1,0,0,9.8\n0.2,x,0,9.8\n")
        with pytest.raises(ParseError) as err:
            load_imu_log(path)
        assert err.value.line == 3

    def test_round_trip(self, tmp_path):
        samples = [AccelSample(t=i * 0.01, ax=0.5, ay=4.9, az=8.5) for i in range(10)]
        path = tmp_path / "imu.csv"
        save_imu_log(path, samples)
        assert load_imu_log(path) == samples


class TestSplit:
    def test_paper_ratio_small(self):
        train, val, test = split_dataset(list(range(10)), (0.7, 0.2, 0.1), seed=1)
        assert (len(train), len(val), len(test)) == (7, 2, 1)

    def test_full_dataset_sizes(self):
        ids = [f"img{i}" for i in range(3427)]
        train, val, test = split_dataset(ids, (0.7, 0.2, 0.1), seed=0)
        assert (len(train), len(val), len(test)) == (2399, 685, 343)

    def test_deterministic(self):
        ids = list(range(100))
        assert split_dataset(ids, (0.7, 0.2, 0.1), seed=9) == split_dataset(ids, (0.7, 0.2, 0.1), seed=9)

    def test_partition(self):
        ids = list(range(137))
        train, val, test = split_dataset(ids, (0.6, 0.3, 0.1), seed=5)
        assert sorted(train + val + test) == ids
        assert not (set(train) & set(val) or set(val) & set(test) or set(train) & set(test))

    def test_bad_ratios(self):
        with pytest.raises(ConfigError):
            split_dataset([1, 2], (0.5, 0.5, 0.5), seed=0)
        with pytest.raises(ConfigError):
            split_dataset([1, 2], (0.7, 0.3, -0.0), seed=0)


class TestCalibration:
    def make(self):
        return Calibration(
            depth=Intrinsics(640, 480, 600.0, 601.5, 320.25, 240.0),
            color=Intrinsics(640, 480, 612.0, 612.0, 319.5, 239.5),
            depth_to_color=Extrinsics(np.eye(3), np.array([0.0148, 0.0, 0.0002])),
            depth_scale=0.001,
        )

    def test_round_trip(self, tmp_path):
        calib = self.make()
        path = tmp_path / "calib.txt"
        save_calibration(path, calib)
        loaded = load_calibration(path)
        assert loaded.depth == calib.depth
        assert loaded.color == calib.color
        assert np.array_equal(loaded.depth_to_color.rotation, calib.depth_to_color.rotation)
        assert np.array_equal(loaded.depth_to_color.translation, calib.depth_to_color.translation)
        assert loaded.depth_scale == calib.depth_scale

    def test_missing_key(self, tmp_path):
        path = tmp_path / "calib.txt"
        path.write_text("depth.width = 640\n")
        with pytest.raises(ParseError):
            load_calibration(path)


class TestCategoryMap:
    def test_fixture_map_matches_builtin(self, fixtures_dir):
        names = load_category_map(fixtures_dir / "categories.txt")
        assert names[0] == "manhole_cover"
        assert names[5] == "truncated_dome"

    def test_mismatch_rejected(self, tmp_path):
        path = tmp_path / "cats.txt"
        path.write_text("0 weeds\n1 rocks\n")
        with pytest.raises(CategoryError):
            load_category_map(path)


class TestManifest:
    def test_fixture_manifest_loads(self, replay_clip):
        manifest = load_manifest(replay_clip / "manifest.txt")
        assert [f.frame_id for f in manifest.frames] == [1, 2, 3]
        assert manifest.aligned is False
        assert manifest.detections_path is not None
        assert manifest.imu_path is not None
        calib = manifest.calibration()
        assert calib.depth.width == 640

    def test_missing_referenced_file(self, tmp_path, replay_clip):
        text = (replay_clip / "manifest.txt").read_text()
        bad = tmp_path / "manifest.txt"
        bad.write_text(text)
        (tmp_path / "calib.txt").write_text((replay_clip / "calib.txt").read_text())
        (tmp_path / "detections.txt").write_text("")
        (tmp_path / "imu.csv").write_text("t,ax,ay,az\n")
        with pytest.raises(FileNotFoundError):
            load_manifest(bad)

    def test_frame_ids_must_increase(self, tmp_path):
        (tmp_path / "calib.txt").write_text("x")
        path = tmp_path / "manifest.txt"
        path.write_text("calibration = calib.txt\nframe 2 a b 0.0\nframe 1 c d 0.1\n")
        with pytest.raises(OrderError):
            load_manifest(path)
