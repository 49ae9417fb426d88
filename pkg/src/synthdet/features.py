"""Patch features: native HOG extraction and an external feature-table format.

HOG follows the classic cell/block recipe: centered-difference gradients on
the strongest channel, unsigned orientations soft-binned into per-cell
histograms, overlapping blocks normalized with L2-hys.  Externally computed
vectors (e.g. deep activations) enter through a small binary table format
and are treated as their own feature space.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

from .boxes import BBox
from .errors import BadMagic, BadParams, DimensionMismatch, DuplicateId
from .image import crop, resize_bilinear

_MAGIC = b"FEAT1"


@dataclass(frozen=True)
class HogParams:
    cell_size: int = 8
    block_size: int = 2
    block_stride: int = 1
    orientations: int = 9
    patch_size: tuple[int, int] = (64, 64)
    block_norm_clip: float = 0.2

    def __post_init__(self):
        w, h = self.patch_size
        if min(self.cell_size, self.block_size, self.block_stride, self.orientations) < 1:
            raise BadParams("cell/block/stride/orientations must be >= 1")
        if w % self.cell_size or h % self.cell_size:
            raise BadParams(f"patch {w}x{h} not divisible by cell size {self.cell_size}")
        if self.block_size > min(w, h) // self.cell_size:
            raise BadParams("block does not fit in the cell grid")
        if not 0.0 < self.block_norm_clip <= 1.0:
            raise BadParams("block_norm_clip must be in (0, 1]")

    @property
    def cells(self) -> tuple[int, int]:
        return (self.patch_size[0] // self.cell_size, self.patch_size[1] // self.cell_size)

    @property
    def blocks(self) -> tuple[int, int]:
        cx, cy = self.cells
        return (
            (cx - self.block_size) // self.block_stride + 1,
            (cy - self.block_size) // self.block_stride + 1,
        )

    @property
    def dimension(self) -> int:
        bx, by = self.blocks
        return bx * by * self.block_size**2 * self.orientations

    @property
    def space_id(self) -> str:
        w, h = self.patch_size
        size = f"{w}" if w == h else f"{w}x{h}"
        return f"hog-{self.cell_size}-{self.block_size}-{self.orientations}-{size}"


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    space_id: str

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64)).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("feature values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


def l2_normalize(v: FeatureVector) -> FeatureVector:
    """Scale to unit L2 norm; the zero vector is returned unchanged."""
    norm = float(np.linalg.norm(v.values))
    if norm == 0.0:
        return v
    return FeatureVector(v.values / norm, v.space_id)


def _gradients(channel: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # centered differences with edge replication, so constant images stay
    # gradient-free right up to the border
    padded_x = np.pad(channel, ((0, 0), (1, 1)), mode="edge")
    padded_y = np.pad(channel, ((1, 1), (0, 0)), mode="edge")
    gx = padded_x[:, 2:] - padded_x[:, :-2]
    gy = padded_y[2:, :] - padded_y[:-2, :]
    return gx, gy


def hog_cell_histograms(patch: np.ndarray, params: HogParams) -> np.ndarray:
    """Orientation histograms per cell, shape (cells_y, cells_x, orientations).

    The patch is resized to params.patch_size first.  Gradients come from
    the channel with the largest magnitude at each pixel; magnitude votes
    are split linearly between the two nearest orientation bins.  The bin
    coordinate is the edge orientation (gradient angle + 90 degrees) modulo
    180, so a vertical step edge votes at 90 degrees.
    """
    patch = resize_bilinear(patch, params.patch_size).astype(np.float64)
    gx = np.empty(patch.shape[:2])
    gy = np.empty(patch.shape[:2])
    best = np.full(patch.shape[:2], -1.0)
    for ch in range(3):
        cgx, cgy = _gradients(patch[..., ch])
        mag2 = cgx * cgx + cgy * cgy
        take = mag2 > best
        gx[take] = cgx[take]
        gy[take] = cgy[take]
        best[take] = mag2[take]

    magnitude = np.sqrt(gx * gx + gy * gy)
    angle = (np.degrees(np.arctan2(gy, gx)) + 90.0) % 180.0

    n_or = params.orientations
    bin_width = 180.0 / n_or
    coord = angle / bin_width - 0.5
    lo = np.floor(coord)
    frac = coord - lo
    bin_lo = lo.astype(np.int64) % n_or
    bin_hi = (bin_lo + 1) % n_or

    cs = params.cell_size
    cells_x, cells_y = params.cells
    h, w = patch.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    cell_idx = (ys // cs) * cells_x + (xs // cs)

    hist = np.zeros((cells_y * cells_x, n_or))
    np.add.at(hist, (cell_idx.ravel(), bin_lo.ravel()), (magnitude * (1 - frac)).ravel())
    np.add.at(hist, (cell_idx.ravel(), bin_hi.ravel()), (magnitude * frac).ravel())
    return hist.reshape(cells_y, cells_x, n_or)


def extract_hog(patch: np.ndarray, params: HogParams | None = None) -> FeatureVector:
    """Dalal-Triggs style HOG descriptor of an RGB patch."""
    params = params or HogParams()
    hist = hog_cell_histograms(patch, params)
    bs, stride, clip = params.block_size, params.block_stride, params.block_norm_clip
    blocks_x, blocks_y = params.blocks
    eps2 = 1e-10
    out = np.empty((blocks_y, blocks_x, bs * bs * params.orientations))
    for by in range(blocks_y):
        for bx in range(blocks_x):
            y0, x0 = by * stride, bx * stride
            block = hist[y0 : y0 + bs, x0 : x0 + bs].ravel()
            block = block / math.sqrt(float(block @ block) + eps2)
            block = np.minimum(block, clip)
            block = block / math.sqrt(float(block @ block) + eps2)
            out[by, bx] = block
    return FeatureVector(out.ravel(), params.space_id)


# --- feature table IO ---------------------------------------------------------

def export_features(path, table: dict[str, FeatureVector]) -> None:
    """Write an id -> vector table in the binary FEAT1 layout.

    Iteration order of ``table`` is preserved, so import/export round-trips
    are byte-identical.
    """
    if not table:
        raise ValueError("cannot export an empty feature table")
    vectors = list(table.items())
    dim = len(vectors[0][1])
    space_id = vectors[0][1].space_id
    for pid, vec in vectors:
        if len(vec) != dim:
            raise DimensionMismatch(f"{pid!r} has dim {len(vec)}, expected {dim}")
        if vec.space_id != space_id:
            raise DimensionMismatch(f"{pid!r} is in space {vec.space_id!r}, expected {space_id!r}")
    sid = space_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIH", len(vectors), dim, len(sid)))
        fh.write(sid)
        for pid, vec in vectors:
            raw = pid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(vec.values.astype("<f4").tobytes())


def import_features(path) -> dict[str, FeatureVector]:
    """Read a FEAT1 table; all vectors share one dimension and space id."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(_MAGIC)] != _MAGIC:
        raise BadMagic(f"{path}: not a FEAT1 feature file")
    pos = len(_MAGIC)
    try:
        count, dim, sid_len = struct.unpack_from("<IIH", data, pos)
        pos += struct.calcsize("<IIH")
        space_id = data[pos : pos + sid_len].decode("utf-8")
        pos += sid_len
        table: dict[str, FeatureVector] = {}
        for _ in range(count):
            (id_len,) = struct.unpack_from("<I", data, pos)
            pos += 4
            pid = data[pos : pos + id_len].decode("utf-8")
            pos += id_len
            row = np.frombuffer(data, dtype="<f4", count=dim, offset=pos)
            if len(row) != dim:
                raise DimensionMismatch(f"{path}: truncated row for {pid!r}")
            pos += dim * 4
            if pid in table:
                raise DuplicateId(f"{path}: duplicate patch id {pid!r}")
            table[pid] = FeatureVector(row.astype(np.float64), space_id)
    except (struct.error, ValueError) as exc:
        raise DimensionMismatch(f"{path}: malformed payload ({exc})") from None
    if pos != len(data):
        raise DimensionMismatch(f"{path}: {len(data) - pos} trailing bytes")
    return table


def patch_id(image: str, category: str, box: BBox, tag: str) -> str:
    """Stable id for one sampled patch, parseable back by split_patch_id."""
    x0, y0, x1, y1 = box.astuple()
    return f"{image}::{category}::{x0},{y0},{x1},{y1}::{tag}"


def split_patch_id(pid: str) -> tuple[str, str, BBox, str]:
    image, category, coords, tag = pid.rsplit("::", 3)
    x0, y0, x1, y1 = (int(c) for c in coords.split(","))
    return image, category, BBox(x0, y0, x1, y1), tag


class HogFeaturizer:
    """Crop-and-describe interface used by training and detection.

    Crops are dilated by ``context_fraction`` of the box size on each side
    (clipped to the frame) before description, so the object silhouette
    lands inside the patch instead of on its border where gradients vanish.
    The same policy must be used at training and detection time.
    """

    def __init__(self, params: HogParams | None = None, context_fraction: float = 0.15):
        if context_fraction < 0:
            raise BadParams("context_fraction must be >= 0")
        self.params = params or HogParams()
        self.context_fraction = context_fraction

    @property
    def space_id(self) -> str:
        return self.params.space_id

    def __call__(self, patch: np.ndarray) -> FeatureVector:
        return extract_hog(patch, self.params)

    def extract(self, img: np.ndarray, box: BBox) -> FeatureVector:
        h, w = img.shape[:2]
        px = round(self.context_fraction * box.width)
        py = round(self.context_fraction * box.height)
        padded = BBox(
            max(0, box.xmin - px),
            max(0, box.ymin - py),
            min(w, box.xmax + px),
            min(h, box.ymax + py),
        )
        return extract_hog(crop(img, padded), self.params)


class TableFeaturizer:
    """Featurizer backed by an imported table, keyed by patch id."""

    def __init__(self, table: dict[str, FeatureVector]):
        if not table:
            raise ValueError("empty feature table")
        self.table = table
        self.space_id = next(iter(table.values())).space_id

    def lookup(self, pid: str) -> FeatureVector:
        try:
            return self.table[pid]
        except KeyError:
            raise KeyError(f"patch id {pid!r} not present in feature table") from None
