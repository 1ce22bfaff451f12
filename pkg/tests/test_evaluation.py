import numpy as np
import pytest

from scootsense.detections import BBox, CATEGORY_NAMES, Detection
from scootsense.errors import ConfigError
from scootsense.evaluation import (
    EvalReport,
    GroundTruthBox,
    IOU_GRID_50_95,
    average_precision,
    evaluate,
    iou,
    match_detections,
)

from oracles import evaluate_oracle, iou_oracle


def det(box, cat=0, conf=0.9, image=0):
    return Detection(bbox=BBox(*box), category=cat, confidence=conf, frame_id=image)


def gt(box, cat=0, image=0):
    return GroundTruthBox(image_id=image, bbox=BBox(*box), category=cat)


class TestIou:
    def test_identity(self):
        assert iou(BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 10, 10), BBox(30, 30, 40, 40)) == 0.0

    def test_hand_computed_overlap(self):
        assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)) == pytest.approx(1 / 3, abs=1e-12)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(12)
        for _ in range(300):
            x1, y1 = rng.uniform(0, 50, 2)
            a = BBox(x1, y1, x1 + rng.uniform(1, 60), y1 + rng.uniform(1, 60))
            x2, y2 = rng.uniform(0, 50, 2)
            b = BBox(x2, y2, x2 + rng.uniform(1, 60), y2 + rng.uniform(1, 60))
            ab = iou(a, b)
            assert ab == iou(b, a)
            assert 0.0 <= ab <= 1.0
            assert ab == pytest.approx(
                iou_oracle((a.x1, a.y1, a.x2, a.y2), (b.x1, b.y1, b.x2, b.y2)), abs=1e-12
            )


class TestMatching:
    def test_single_match(self):
        flags = match_detections([det((0, 0, 10, 10))], [gt((0, 2, 10, 12))], 0.5)
        assert flags == [True]

    def test_one_to_one(self):
        dets = [det((0, 0, 10, 10), conf=0.9), det((0, 0, 10, 10.5), conf=0.8)]
        flags = match_detections(dets, [gt((0, 0, 10, 10))], 0.5)
        assert flags == [True, False]

    def test_below_threshold_is_fp(self):
        flags = match_detections([det((0, 0, 10, 10))], [gt((6, 0, 16, 10))], 0.5)
        assert flags == [False]

    def test_greedy_takes_highest_iou(self):
        dets = [det((0, 0, 10, 10), conf=0.9)]
        gts = [gt((1, 0, 11, 10)), gt((0, 0, 10, 10))]
        flags = match_detections(dets, gts, 0.5)
        assert flags == [True]
        # second detection then has only the worse gt (IoU 9/11) left,
        # which is below a 0.9 threshold
        dets.append(det((0, 0, 10, 10), conf=0.8))
        flags = match_detections(dets, gts, 0.9)
        assert flags == [True, False]


class TestAveragePrecision:
    def test_perfect(self):
        assert average_precision([True], 1) == 1.0

    def test_total_miss(self):
        assert average_precision([False], 1) == 0.0

    def test_hand_traced_tp_fp_tp(self):
        value = average_precision([True, False, True], 2)
        assert value == pytest.approx(0.5 * 1.0 + 0.5 * (2 / 3), abs=1e-9)

    def test_no_gt_defined_zero(self):
        assert average_precision([], 0) == 0.0
        assert average_precision([False, False], 0) == 0.0

    def test_101pt_close_to_allpoint(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = int(rng.integers(1, 30))
            flags = [bool(rng.random() < 0.6) for _ in range(n)]
            n_gt = max(sum(flags), 1) + int(rng.integers(0, 3))
            a = average_precision(flags, n_gt, "allpoint")
            b = average_precision(flags, n_gt, "101pt")
            assert abs(a - b) < 0.08
            assert 0.0 <= b <= 1.0

    def test_rank_only_dependence(self):
        # a strictly monotone confidence transform preserves ranking and ties,
        # so the whole report is unchanged
        rng = np.random.default_rng(31)
        for _ in range(20):
            dets, gts = random_instance(rng)
            warped = [
                Detection(bbox=d.bbox, category=d.category, confidence=d.confidence**3, frame_id=d.frame_id)
                for d in dets
            ]
            assert evaluate(dets, gts) == evaluate(warped, gts)

    def test_duplicate_penalty(self):
        # appending a duplicate (FP, since the gt is taken) never raises AP
        base = [True, False, True]
        dup = base + [False]
        assert average_precision(dup, 2) <= average_precision(base, 2)

    def test_unknown_interpolation(self):
        with pytest.raises(ConfigError):
            average_precision([True], 1, "11pt")


def random_instance(rng):
    """One random eval problem: detections + ground truth over small images."""
    n_images = int(rng.integers(1, 4))
    n_cats = int(rng.integers(1, 4))
    cats = sorted(rng.choice(6, size=n_cats, replace=False).tolist())
    dets, gts = [], []
    for image in range(n_images):
        for _ in range(int(rng.integers(0, 6))):
            x1, y1 = rng.integers(0, 40, 2)
            w, h = rng.integers(5, 30, 2)
            gts.append(gt((x1, y1, x1 + w, y1 + h), cat=int(rng.choice(cats)), image=image))
        for _ in range(int(rng.integers(0, 9))):
            if gts and rng.random() < 0.6:
                seed_box = gts[int(rng.integers(0, len(gts)))].bbox
                dx, dy = rng.integers(-6, 7, 2)
                box = (seed_box.x1 + dx, seed_box.y1 + dy, seed_box.x2 + dx, seed_box.y2 + dy)
            else:
                x1, y1 = rng.integers(0, 40, 2)
                w, h = rng.integers(5, 30, 2)
                box = (x1, y1, x1 + w, y1 + h)
            conf = round(float(rng.uniform(0.05, 1.0)), 1)  # coarse: forces ties
            dets.append(det(tuple(float(c) for c in box), cat=int(rng.choice(cats)), conf=conf, image=image))
    return dets, gts


class TestEvaluate:
    def test_zero_detections(self):
        gts = [gt((0, 0, 10, 10), cat=2, image=0), gt((5, 5, 20, 20), cat=2, image=1)]
        report = evaluate([], gts)
        row = report.category_rows[2]
        assert row.ap50 == 0.0
        assert row.ap50_95 == 0.0
        assert row.recall == 0.0
        assert report.all_row.ap50 == 0.0

    def test_perfect_detector(self):
        rng = np.random.default_rng(3)
        gts, dets = [], []
        for image in range(3):
            for cat in (0, 3, 5):
                x1, y1 = rng.integers(0, 100, 2)
                box = (float(x1), float(y1), float(x1 + 20), float(y1 + 15))
                gts.append(gt(box, cat=cat, image=image))
                dets.append(det(box, cat=cat, conf=1.0, image=image))
        report = evaluate(dets, gts)
        assert report.all_row.precision == 1.0
        assert report.all_row.recall == 1.0
        assert report.all_row.ap50 == 1.0
        assert report.all_row.ap50_95 == 1.0

    def test_matches_bruteforce_oracle_on_200_random_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            dets, gts = random_instance(rng)
            report = evaluate(dets, gts)
            oracle = evaluate_oracle(
                [(d.frame_id, d.category, d.confidence, (d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2), i) for i, d in enumerate(dets)],
                [(g.image_id, g.category, (g.bbox.x1, g.bbox.y1, g.bbox.x2, g.bbox.y2)) for g in gts],
                IOU_GRID_50_95,
                range(6),
            )
            for cat in range(6):
                row = report.category_rows[cat]
                ref = oracle[cat]
                assert abs(row.precision - ref["P"]) <= 1e-9, (cat, "P")
                assert abs(row.recall - ref["R"]) <= 1e-9, (cat, "R")
                assert abs(row.ap50 - ref["ap50"]) <= 1e-9, (cat, "ap50")
                assert abs(row.ap50_95 - ref["ap50_95"]) <= 1e-9, (cat, "ap50_95")
                assert row.instances == ref["instances"]
            assert abs(report.all_row.precision - oracle["All"]["P"]) <= 1e-9
            assert abs(report.all_row.recall - oracle["All"]["R"]) <= 1e-9
            assert abs(report.all_row.ap50 - oracle["All"]["ap50"]) <= 1e-9
            assert abs(report.all_row.ap50_95 - oracle["All"]["ap50_95"]) <= 1e-9

    def test_ap_non_increasing_in_threshold(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            dets, gts = random_instance(rng)
            report = evaluate(dets, gts)
            for row in report.category_rows:
                assert row.ap50_95 <= row.ap50 + 1e-12

    def test_ap_monotone_across_thresholds_single_image(self):
        rng = np.random.default_rng(55)
        for _ in range(100):
            gts = []
            dets = []
            for _ in range(int(rng.integers(1, 5))):
                x1, y1 = rng.integers(0, 40, 2)
                w, h = rng.integers(5, 30, 2)
                gts.append(gt((x1, y1, x1 + w, y1 + h), cat=0, image=0))
            for _ in range(int(rng.integers(1, 7))):
                seed_box = gts[int(rng.integers(0, len(gts)))].bbox
                dx, dy = rng.integers(-5, 6, 2)
                dets.append(
                    det(
                        (seed_box.x1 + dx, seed_box.y1 + dy, seed_box.x2 + dx, seed_box.y2 + dy),
                        cat=0,
                        conf=float(rng.uniform(0.1, 1.0)),
                        image=0,
                    )
                )
            previous = None
            for thresh in (0.5, 0.6, 0.7, 0.8, 0.9):
                ap = average_precision(match_detections(dets, gts, thresh), len(gts))
                if previous is not None:
                    assert ap <= previous + 1e-12
                previous = ap

    def test_all_instances_is_sum(self):
        rng = np.random.default_rng(9)
        dets, gts = random_instance(rng)
        report = evaluate(dets, gts)
        assert report.all_row.instances == sum(r.instances for r in report.category_rows)

    def test_requires_grid_with_half(self):
        with pytest.raises(ConfigError):
            evaluate([], [], iou_grid=(0.75,))


class TestReportShape:
    def test_render_columns_and_rows(self):
        report = evaluate([], [gt((0, 0, 10, 10), cat=0)])
        text = report.render()
        lines = text.strip().split("\n")
        header = lines[0].split()
        assert header == ["Class", "Images", "Instances", "P", "R", "mAP50", "mAP50-95"]
        names = [line.split()[0] for line in lines[1:]]
        assert names == ["All", *CATEGORY_NAMES]

    def test_to_dict_structure(self):
        report = evaluate([], [gt((0, 0, 10, 10), cat=4)])
        data = report.to_dict()
        assert data["all"]["class"] == "All"
        assert [row["class"] for row in data["categories"]] == list(CATEGORY_NAMES)
        assert set(data["all"]) == {"class", "images", "instances", "P", "R", "mAP50", "mAP50-95"}
