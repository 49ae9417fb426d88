"""8-bit RGB raster IO and resampling.

Binary PPM (P6, maxval 255) is the native interchange format and is written
bit-exactly; PNG is supported through Pillow for convenience.  Resampling is
a fixed bilinear kernel implemented here so outputs never depend on library
versions.
"""

from pathlib import Path

import numpy as np

from .boxes import BBox
from .errors import UnreadableAsset


def _as_rgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected (H, W, 3) uint8 image, got {img.shape} {img.dtype}")
    return img


def write_ppm(path, img: np.ndarray) -> None:
    img = _as_rgb(img)
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    # header = magic, width, height, maxval separated by whitespace/comments
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4 and pos < len(data):
        if data[pos : pos + 1].isspace():
            pos += 1
        elif data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            fields.append(data[pos:end])
            pos = end
    if len(fields) < 4 or fields[0] != b"P6":
        raise UnreadableAsset(path, "not a binary P6 PPM")
    try:
        w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    except ValueError:
        raise UnreadableAsset(path, "bad PPM header") from None
    if maxval != 255:
        raise UnreadableAsset(path, f"unsupported maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + w * h * 3]
    if len(raster) != w * h * 3:
        raise UnreadableAsset(path, "truncated PPM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape((h, w, 3)).copy()


def read_image(path) -> np.ndarray:
    """Read a .ppm natively or anything else via Pillow, as (H, W, 3) uint8."""
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        return read_ppm(path)
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise UnreadableAsset(path, f"Pillow unavailable for {path.suffix}: {exc}")
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise UnreadableAsset(path, str(exc)) from None


def write_image(path, img: np.ndarray) -> None:
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        write_ppm(path, img)
        return
    from PIL import Image

    Image.fromarray(_as_rgb(img), mode="RGB").save(path)


def read_image_size(path) -> tuple[int, int]:
    """(width, height) without decoding the full raster where possible."""
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        with open(path, "rb") as fh:
            head = fh.read(256)
        fields = head.split()
        if len(fields) < 3 or fields[0] != b"P6":
            raise UnreadableAsset(path, "not a binary P6 PPM")
        return int(fields[1]), int(fields[2])
    from PIL import Image

    with Image.open(path) as im:
        return im.size


def resize_bilinear(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Resize to (width, height) with bilinear sampling at pixel centers.

    Source coordinates are (dst + 0.5) * scale - 0.5, clamped at the borders;
    values are accumulated in float64 and rounded half-to-even.
    """
    img = _as_rgb(img)
    dst_w, dst_h = size
    src_h, src_w = img.shape[:2]
    if (src_w, src_h) == (dst_w, dst_h):
        return img.copy()

    def axis_coords(dst_n: int, src_n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = (np.arange(dst_n, dtype=np.float64) + 0.5) * (src_n / dst_n) - 0.5
        x = np.clip(x, 0.0, src_n - 1.0)
        lo = np.floor(x).astype(np.int64)
        hi = np.minimum(lo + 1, src_n - 1)
        return lo, hi, x - lo

    x0, x1, fx = axis_coords(dst_w, src_w)
    y0, y1, fy = axis_coords(dst_h, src_h)
    pix = img.astype(np.float64)
    top = pix[y0][:, x0] * (1 - fx)[None, :, None] + pix[y0][:, x1] * fx[None, :, None]
    bot = pix[y1][:, x0] * (1 - fx)[None, :, None] + pix[y1][:, x1] * fx[None, :, None]
    out = top * (1 - fy)[:, None, None] + bot * fy[:, None, None]
    return np.rint(out).clip(0, 255).astype(np.uint8)


def crop(img: np.ndarray, box: BBox) -> np.ndarray:
    """Copy of the pixels under a box, clipped to the frame."""
    img = _as_rgb(img)
    h, w = img.shape[:2]
    x0, y0 = max(0, box.xmin), max(0, box.ymin)
    x1, y1 = min(w, box.xmax), min(h, box.ymax)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"box {box} outside {w}x{h} frame")
    return img[y0:y1, x0:x1].copy()
