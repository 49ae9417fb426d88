"""Candidate boxes, overlap, duplicate suppression, whole-image detection."""

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boxes import BBox, iou
from .errors import BadRow
from .features import FeatureVector

DEFAULT_NMS_THRESHOLD = 0.3
DEFAULT_SCORE_FLOOR = -1.0

__all__ = [
    "BBox",
    "Detection",
    "iou",
    "grid_proposals",
    "nms",
    "score_proposals",
    "detect_image",
    "load_proposals_csv",
    "save_detections_csv",
    "load_detections_csv",
]


@dataclass(frozen=True)
class Detection:
    image: str
    category: str
    bbox: BBox
    score: float


def grid_proposals(
    width: int,
    height: int,
    scales: list[float],
    aspect_ratios: list[float] = (1.0,),
    stride_fraction: float = 0.25,
) -> list[BBox]:
    """Deterministic multi-scale sliding-window boxes.

    Each (scale, ratio) pair yields windows of size (scale*sqrt(ratio),
    scale/sqrt(ratio)) stepped by stride_fraction*scale; windows that would
    cross the frame are dropped, not clipped.  Ordering is (scale, ratio,
    y, x).  Configurations too large for the frame are skipped with a
    warning.
    """
    out: list[BBox] = []
    for scale in scales:
        for ratio in aspect_ratios:
            w = round(scale * math.sqrt(ratio))
            h = round(scale / math.sqrt(ratio))
            if w < 1 or h < 1 or w > width or h > height:
                warnings.warn(
                    f"proposal window {w}x{h} (scale {scale}, ratio {ratio}) "
                    f"does not fit in {width}x{height}; skipped"
                )
                continue
            step = max(1, round(stride_fraction * scale))
            for y in range(0, height - h + 1, step):
                for x in range(0, width - w + 1, step):
                    out.append(BBox(x, y, x + w, y + h))
    return out


def nms(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy non-maximum suppression over one category's detections.

    Keeps the best-scoring remaining detection and removes everything with
    IoU strictly above the threshold against it.  Ties break on (score
    desc, xmin asc, ymin asc); the result is sorted by descending score.
    """
    pending = sorted(dets, key=lambda d: (-d.score, d.bbox.xmin, d.bbox.ymin))
    kept: list[Detection] = []
    while pending:
        best = pending.pop(0)
        kept.append(best)
        pending = [d for d in pending if iou(best.bbox, d.bbox) <= iou_threshold]
    return kept


def score_proposals(
    boxes: list[BBox],
    vectors: list[FeatureVector],
    models: dict,
    nms_threshold: float = DEFAULT_NMS_THRESHOLD,
    score_floor: float = DEFAULT_SCORE_FLOOR,
    image_path: str = "",
) -> list[Detection]:
    """Score featurized proposals with every model and suppress duplicates."""
    from .detector import score as score_fn

    out: list[Detection] = []
    for category in sorted(models):
        model = models[category]
        dets = []
        for box, vec in zip(boxes, vectors):
            s = score_fn(model, vec)
            if s > score_floor:
                dets.append(Detection(image_path, category, box, s))
        out.extend(nms(dets, nms_threshold))
    out.sort(key=lambda d: (d.category, -d.score, d.bbox.astuple()))
    return out


def detect_image(
    img: np.ndarray,
    models: dict,
    featurizer,
    proposals: list[BBox],
    nms_threshold: float = DEFAULT_NMS_THRESHOLD,
    score_floor: float = DEFAULT_SCORE_FLOOR,
    image_path: str = "",
) -> list[Detection]:
    """Crop, featurize, and score every proposal; NMS runs per category.

    Proposals are canonically sorted first, so the output does not depend
    on their incoming order.  Detections below ``score_floor`` are dropped
    before per-category NMS.
    """
    h, w = img.shape[:2]
    boxes = sorted(
        (b for b in proposals if b.xmax <= w and b.ymax <= h),
        key=lambda b: b.astuple(),
    )
    if not boxes:
        return []
    vectors = [featurizer.extract(img, b) for b in boxes]
    return score_proposals(
        boxes, vectors, models, nms_threshold, score_floor, image_path
    )


# --- CSV interchange ----------------------------------------------------------

def load_proposals_csv(path) -> dict[str, list[BBox]]:
    """Read externally generated proposals: image,xmin,ymin,xmax,ymax."""
    table: dict[str, list[BBox]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["image", "xmin", "ymin", "xmax", "ymax"]:
            raise BadRow(1, f"expected proposals header, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                img, x0, y0, x1, y1 = row[0], *(int(v) for v in row[1:5])
                box = BBox(x0, y0, x1, y1)
            except (ValueError, IndexError) as exc:
                raise BadRow(line_no, str(exc)) from None
            table.setdefault(img, []).append(box)
    return table


def save_detections_csv(path, dets: list[Detection]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image", "category", "xmin", "ymin", "xmax", "ymax", "score"])
        for d in dets:
            writer.writerow(
                [d.image, d.category, *d.bbox.astuple(), f"{d.score:.6f}"]
            )


def load_detections_csv(path) -> list[Detection]:
    out: list[Detection] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["image", "category", "xmin", "ymin", "xmax", "ymax", "score"]:
            raise BadRow(1, f"expected detections header, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                box = BBox(*(int(v) for v in row[2:6]))
                out.append(Detection(row[0], row[1], box, float(row[6])))
            except (ValueError, IndexError) as exc:
                raise BadRow(line_no, str(exc)) from None
    return out
