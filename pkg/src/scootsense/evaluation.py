"""Detection-quality evaluation: IoU matching, AP, mAP50/mAP50-95 reports.

Matching follows the standard protocol: within one image and category,
detections are taken in descending-confidence order and each is greedily
matched to the unmatched ground-truth box of highest IoU at or above the
threshold. Average precision is the area under the interpolated
precision-recall curve (all-point interpolation by default; a 101-point
variant is available for cross-checks). mAP50-95 averages AP over IoU
thresholds 0.50 to 0.95 in steps of 0.05.

Scalar P and R are reported at the confidence cutoff that maximizes F1 on
the merged (all-image) PR curve of each category, computed at IoU 0.50.
Confidence ties rank by (image id, then input order) so results are
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .detections import BBox, CATEGORY_NAMES, Detection, category_name
from .errors import CategoryError, ConfigError

IOU_GRID_50_95 = tuple((50 + 5 * i) / 100 for i in range(10))


@dataclass(frozen=True)
class GroundTruthBox:
    image_id: object
    bbox: BBox
    category: int

    def __post_init__(self):
        category_name(self.category)


@dataclass(frozen=True)
class EvalRow:
    class_name: str
    images: int
    instances: int
    precision: float
    recall: float
    ap50: float
    ap50_95: float


@dataclass(frozen=True)
class EvalReport:
    """Per-category rows plus the 'All' aggregate, Table-style."""

    all_row: EvalRow
    category_rows: tuple[EvalRow, ...]

    def rows(self) -> list[EvalRow]:
        return [self.all_row, *self.category_rows]

    def render(self) -> str:
        header = ("Class", "Images", "Instances", "P", "R", "mAP50", "mAP50-95")
        cells = [header]
        for row in self.rows():
            cells.append(
                (
                    row.class_name,
                    str(row.images),
                    str(row.instances),
                    f"{row.precision:.3f}",
                    f"{row.recall:.3f}",
                    f"{row.ap50:.3f}",
                    f"{row.ap50_95:.3f}",
                )
            )
        widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
        lines = []
        for r in cells:
            first = r[0].ljust(widths[0])
            rest = "  ".join(r[i].rjust(widths[i]) for i in range(1, len(header)))
            lines.append(f"{first}  {rest}".rstrip())
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        def row_dict(row: EvalRow) -> dict:
            return {
                "class": row.class_name,
                "images": row.images,
                "instances": row.instances,
                "P": row.precision,
                "R": row.recall,
                "mAP50": row.ap50,
                "mAP50-95": row.ap50_95,
            }

        return {"all": row_dict(self.all_row), "categories": [row_dict(r) for r in self.category_rows]}


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    return a.iou(b)


def match_detections(
    dets: Sequence[Detection], gts: Sequence[GroundTruthBox], iou_thresh: float
) -> list[bool]:
    """TP/FP flags for one image and category, in descending-confidence order.

    Each ground-truth box is matched at most once; a detection matches the
    unmatched box of highest IoU at or above iou_thresh.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    taken = [False] * len(gts)
    flags = []
    for i in order:
        best_j = -1
        best_iou = iou_thresh
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            value = dets[i].bbox.iou(gt.bbox)
            if value > best_iou or (value == best_iou and value >= iou_thresh and best_j < 0):
                best_iou = value
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def average_precision(flags: Sequence[bool], n_gt: int, interpolation: str = "allpoint") -> float:
    """Area under the interpolated PR curve for a ranked TP/FP list."""
    if n_gt < 0:
        raise ValueError(f"n_gt must be >= 0, got {n_gt}")
    if interpolation not in ("allpoint", "101pt"):
        raise ConfigError(f"unknown interpolation {interpolation!r}")
    if n_gt == 0 or not flags:
        return 0.0
    precisions = []
    recalls = []
    tp = fp = 0
    for flag in flags:
        if flag:
            tp += 1
        else:
            fp += 1
        precisions.append(tp / (tp + fp))
        recalls.append(tp / n_gt)
    # Precision envelope: max precision at any recall >= r.
    envelope = list(precisions)
    for i in range(len(envelope) - 2, -1, -1):
        envelope[i] = max(envelope[i], envelope[i + 1])
    if interpolation == "101pt":
        total = 0.0
        for k in range(101):
            r = k / 100
            value = 0.0
            for rec, env in zip(recalls, envelope):
                if rec >= r:
                    value = env
                    break
            total += value
        return total / 101
    ap = 0.0
    prev_recall = 0.0
    for rec, env in zip(recalls, envelope):
        if rec > prev_recall:
            ap += (rec - prev_recall) * env
            prev_recall = rec
    return ap


def _ranked(dets: Sequence[Detection], image_key) -> list[tuple[int, Detection]]:
    """Global ranking: descending confidence, ties by (image id, input order)."""
    indexed = list(enumerate(dets))
    indexed.sort(key=lambda pair: (-pair[1].confidence, image_key(pair[1]), pair[0]))
    return indexed


def _flags_at_threshold(
    ranked: list[tuple[int, Detection]],
    gts_by_image: dict,
    image_key,
    thresh: float,
) -> list[bool]:
    taken = {img: [False] * len(boxes) for img, boxes in gts_by_image.items()}
    flags = []
    for _, det in ranked:
        img = image_key(det)
        boxes = gts_by_image.get(img, ())
        used = taken.get(img, [])
        best_j = -1
        best_iou = thresh
        for j, gt in enumerate(boxes):
            if used[j]:
                continue
            value = det.bbox.iou(gt.bbox)
            if value > best_iou or (value == best_iou and value >= thresh and best_j < 0):
                best_iou = value
                best_j = j
        if best_j >= 0:
            used[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def _max_f1_point(flags: Sequence[bool], n_gt: int) -> tuple[float, float]:
    """(precision, recall) at the cutoff maximizing F1; (0, 0) with no detections."""
    if not flags:
        return 0.0, 0.0
    best = (0.0, 0.0, 0.0)  # f1, p, r
    tp = fp = 0
    for flag in flags:
        if flag:
            tp += 1
        else:
            fp += 1
        p = tp / (tp + fp)
        r = tp / n_gt if n_gt > 0 else 0.0
        f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
        if f1 > best[0]:
            best = (f1, p, r)
    return best[1], best[2]


def evaluate(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthBox],
    iou_grid: Sequence[float] = IOU_GRID_50_95,
    interpolation: str = "allpoint",
    n_images: Optional[int] = None,
) -> EvalReport:
    """Full evaluation over all images and the six fixed categories.

    The detection's frame_id is its image id. A category with neither
    ground truth nor detections contributes a zero row but is excluded
    from the 'All' averages.
    """
    if 0.5 not in iou_grid:
        raise ConfigError("iou_grid must contain 0.50 (mAP50 is reported from it)")
    for det in dets:
        category_name(det.category)
    for gt in gts:
        category_name(gt.category)

    def det_image(det: Detection):
        return det.frame_id

    if n_images is None:
        ids = {det_image(d) for d in dets} | {g.image_id for g in gts}
        n_images = len(ids)

    rows = []
    included = []
    for cat in range(len(CATEGORY_NAMES)):
        cat_dets = [d for d in dets if d.category == cat]
        cat_gts = [g for g in gts if g.category == cat]
        n_gt = len(cat_gts)
        gts_by_image: dict = {}
        for g in cat_gts:
            gts_by_image.setdefault(g.image_id, []).append(g)
        ranked = _ranked(cat_dets, det_image)
        aps = {}
        for thresh in iou_grid:
            flags = _flags_at_threshold(ranked, gts_by_image, det_image, thresh)
            aps[thresh] = average_precision(flags, n_gt, interpolation)
        flags50 = _flags_at_threshold(ranked, gts_by_image, det_image, 0.5)
        precision, recall = _max_f1_point(flags50, n_gt)
        row = EvalRow(
            class_name=CATEGORY_NAMES[cat],
            images=n_images,
            instances=n_gt,
            precision=precision,
            recall=recall,
            ap50=aps[0.5],
            ap50_95=sum(aps.values()) / len(aps),
        )
        rows.append(row)
        if n_gt > 0 or cat_dets:
            included.append(row)

    def mean(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    all_row = EvalRow(
        class_name="All",
        images=n_images,
        instances=sum(r.instances for r in rows),
        precision=mean([r.precision for r in included]),
        recall=mean([r.recall for r in included]),
        ap50=mean([r.ap50 for r in included]),
        ap50_95=mean([r.ap50_95 for r in included]),
    )
    return EvalReport(all_row=all_row, category_rows=tuple(rows))
