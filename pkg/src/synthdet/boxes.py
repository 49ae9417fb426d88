"""Axis-aligned pixel boxes and overlap arithmetic.

Boxes are half-open integer rectangles [xmin, xmax) x [ymin, ymax), so a
single pixel at (x, y) is BBox(x, y, x+1, y+1) and area is
(xmax-xmin)*(ymax-ymin) with no +1 fencepost.
"""

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class BBox:
    xmin: int
    ymin: int
    xmax: int
    ymax: int

    def __post_init__(self):
        if not (0 <= self.xmin < self.xmax and 0 <= self.ymin < self.ymax):
            raise ValueError(f"degenerate box {self!r}")

    @property
    def width(self) -> int:
        return self.xmax - self.xmin

    @property
    def height(self) -> int:
        return self.ymax - self.ymin

    @property
    def area(self) -> int:
        return self.width * self.height

    def astuple(self) -> tuple[int, int, int, int]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes, in [0, 1]."""
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)
