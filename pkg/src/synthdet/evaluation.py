"""VOC2007-style detection evaluation: greedy matching, 11-point AP, mAP."""

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .boxes import BBox, iou
from .detect import Detection
from .errors import NoCategories, NoGroundTruth

PROTOCOL = "voc2007-11pt"
DEFAULT_IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class CategoryEval:
    ap: float
    n_gt: int
    n_det: int
    n_tp: int


@dataclass(frozen=True)
class EvalReport:
    per_category: dict[str, CategoryEval]
    mean_ap: float
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    protocol: str = PROTOCOL

    def category_ap(self, name: str) -> float:
        return self.per_category[name].ap


def match_detections(
    dets: list[Detection],
    gts: dict[str, list[BBox]],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> list[bool]:
    """Label one category's detections TP/FP against per-image ground truth.

    Detections are ranked by (score desc, image path, box); each one greedily
    claims the highest-IoU unmatched box in its image and is a true positive
    only if that IoU reaches the threshold.  Later detections on an already
    claimed box are false positives (the duplicate penalty).
    """
    order = sorted(dets, key=lambda d: (-d.score, d.image, d.bbox.astuple()))
    claimed: dict[str, list[bool]] = {img: [False] * len(boxes) for img, boxes in gts.items()}
    labels: list[bool] = []
    for det in order:
        boxes = gts.get(det.image, [])
        best_iou, best_idx = 0.0, -1
        for gi, gt_box in enumerate(boxes):
            ov = iou(det.bbox, gt_box)
            if ov > best_iou:
                best_iou, best_idx = ov, gi
        if best_iou >= iou_threshold and not claimed[det.image][best_idx]:
            claimed[det.image][best_idx] = True
            labels.append(True)
        else:
            labels.append(False)
    return labels


def average_precision_11pt(tp_fp: list[bool], n_gt: int) -> float:
    """11-point interpolated AP from an ordered TP/FP sequence.

    AP = mean over recall thresholds r in {0, 0.1, ..., 1.0} of the best
    precision achieved at recall >= r (0 when no point reaches r).
    Thresholds are computed as i/10 so exact recall ties compare equal.
    """
    if n_gt < 1:
        raise NoGroundTruth("AP needs at least one ground-truth box")
    precisions = []
    recalls = []
    tp = fp = 0
    for is_tp in tp_fp:
        tp += is_tp
        fp += not is_tp
        precisions.append(tp / (tp + fp))
        recalls.append(tp / n_gt)
    total = 0.0
    for i in range(11):
        r = i / 10
        best = 0.0
        for p, rec in zip(precisions, recalls):
            if rec >= r and p > best:
                best = p
        total += best
    return total / 11.0


def compute_map(per_category: dict[str, CategoryEval]) -> EvalReport:
    """Assemble a report; mAP is the plain mean of the per-category APs."""
    if not per_category:
        raise NoCategories("no categories were evaluated")
    mean = sum(c.ap for c in per_category.values()) / len(per_category)
    return EvalReport(per_category=dict(per_category), mean_ap=mean)


def evaluate_detections(
    dets: list[Detection],
    gts: dict[str, dict[str, list[BBox]]],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> EvalReport:
    """Full evaluation over categories.

    ``gts`` maps category -> image -> ground-truth boxes.  Categories with
    no ground truth are skipped with a warning and excluded from the mean.
    """
    per_category: dict[str, CategoryEval] = {}
    for category in sorted(gts):
        cat_gts = gts[category]
        n_gt = sum(len(v) for v in cat_gts.values())
        if n_gt == 0:
            warnings.warn(f"category {category!r} has no ground truth; excluded from mAP")
            continue
        cat_dets = [d for d in dets if d.category == category]
        labels = match_detections(cat_dets, cat_gts, iou_threshold)
        ap = average_precision_11pt(labels, n_gt) if labels else 0.0
        per_category[category] = CategoryEval(
            ap=ap, n_gt=n_gt, n_det=len(cat_dets), n_tp=sum(labels)
        )
    report = compute_map(per_category)
    return EvalReport(
        per_category=report.per_category,
        mean_ap=report.mean_ap,
        iou_threshold=iou_threshold,
    )


def write_report_csv(path, report: EvalReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "AP", "n_gt", "n_det", "n_tp"])
        for category in sorted(report.per_category):
            c = report.per_category[category]
            writer.writerow([category, f"{c.ap:.6f}", c.n_gt, c.n_det, c.n_tp])
        writer.writerow(["mAP", f"{report.mean_ap:.6f}", "", "", ""])


def write_report_json(path, report: EvalReport) -> None:
    payload = {
        "protocol": report.protocol,
        "iou_threshold": report.iou_threshold,
        "mAP": report.mean_ap,
        "categories": {
            name: {"AP": c.ap, "n_gt": c.n_gt, "n_det": c.n_det, "n_tp": c.n_tp}
            for name, c in sorted(report.per_category.items())
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
