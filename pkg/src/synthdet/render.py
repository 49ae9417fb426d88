"""Software renderer: posed mesh + cue configuration -> image, mask, box.

The rasterizer snaps screen coordinates to a 1/256-pixel integer grid and
evaluates edge functions in exact int64 arithmetic, so the top-left fill
rule assigns every pixel on a shared edge to exactly one triangle and the
output is bit-reproducible.  Depth is resolved per pixel on 1/w, which is
linear in screen space; texture coordinates are perspective-corrected.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import BBox
from .errors import EmptyMask, EmptyMesh, EmptyRender, MissingPool
from .image import _as_rgb, resize_bilinear
from .mesh import Mesh, ViewPreset, apply_view, fit_to_unit, generate_uv
from .seeding import make_rng

SUBPIXEL = 256
CAMERA_DISTANCE = 3.0
AMBIENT = 0.35
DIFFUSE = 0.65
UNIFORM_GRAY = 127

BG_MODES = ("real_rgb", "white", "real_gray")
TX_MODES = ("real_rgb", "uniform_gray")
_BG_CODE = {"real_rgb": "RR", "white": "W", "real_gray": "RG"}
_TX_CODE = {"real_rgb": "RR", "uniform_gray": "UG"}
_CODE_BG = {v: k for k, v in _BG_CODE.items()}
_CODE_TX = {v: k for k, v in _TX_CODE.items()}

# the six background x texture cells, in conventional column order
CUE_LABELS = ("RR-RR", "W-RR", "W-UG", "RR-UG", "RG-UG", "RG-RR")


@dataclass(frozen=True)
class CueConfig:
    """One cell of the background x texture matrix plus pose and framing."""

    bg_mode: str = "real_rgb"
    tx_mode: str = "real_rgb"
    view: ViewPreset = field(default_factory=lambda: ViewPreset.named("front"))
    perturb_range_deg: float = 15.0
    image_size: tuple[int, int] = (256, 256)
    fill_fraction: float = 0.7

    def __post_init__(self):
        if self.bg_mode not in BG_MODES:
            raise ValueError(f"bg_mode must be one of {BG_MODES}")
        if self.tx_mode not in TX_MODES:
            raise ValueError(f"tx_mode must be one of {TX_MODES}")
        w, h = self.image_size
        if w < 16 or h < 16:
            raise ValueError("image dimensions must be >= 16")
        if not 0.0 < self.fill_fraction <= 1.0:
            raise ValueError("fill_fraction must be in (0, 1]")
        if self.perturb_range_deg < 0:
            raise ValueError("perturb_range_deg must be >= 0")

    @property
    def label(self) -> str:
        return f"{_BG_CODE[self.bg_mode]}-{_TX_CODE[self.tx_mode]}"

    @classmethod
    def from_label(cls, label: str, **kwargs) -> "CueConfig":
        """Build a config from a cell label like ``RR-RR`` or ``W-UG``."""
        try:
            bg_code, tx_code = label.strip().split("-")
            return cls(bg_mode=_CODE_BG[bg_code], tx_mode=_CODE_TX[tx_code], **kwargs)
        except (ValueError, KeyError):
            raise ValueError(f"unknown cue label {label!r}; expected one of {CUE_LABELS}") from None

    @property
    def needs_background(self) -> bool:
        return self.bg_mode != "white"

    @property
    def needs_texture(self) -> bool:
        return self.tx_mode == "real_rgb"


@dataclass(frozen=True)
class Provenance:
    """Everything required to reproduce one rendered image byte-for-byte."""

    model: str
    view_label: str
    yaw: float
    pitch: float
    roll: float
    bg_id: str
    texture_id: str
    seed: int
    bg_mode: str
    tx_mode: str
    width: int
    height: int
    fill_fraction: float

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "view_label": self.view_label,
            "yaw": self.yaw,
            "pitch": self.pitch,
            "roll": self.roll,
            "bg_id": self.bg_id,
            "texture_id": self.texture_id,
            "seed": self.seed,
            "bg_mode": self.bg_mode,
            "tx_mode": self.tx_mode,
            "width": self.width,
            "height": self.height,
            "fill_fraction": self.fill_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class RenderedImage:
    rgb: np.ndarray
    mask: np.ndarray
    bbox: BBox
    provenance: Provenance


def perturb_pose(view: ViewPreset, range_deg: float, seed: int) -> ViewPreset:
    """Add independent uniform offsets in [-range, +range] to yaw and pitch.

    Roll is untouched.  Zero range returns the input preset unchanged; the
    draw order (yaw first, then pitch) is part of the determinism contract.
    """
    if range_deg < 0:
        raise ValueError("perturbation range must be >= 0")
    if range_deg == 0:
        return view
    rng = make_rng(seed)
    d_yaw = rng.uniform(-range_deg, range_deg)
    d_pitch = rng.uniform(-range_deg, range_deg)
    return ViewPreset.custom(view.yaw + d_yaw, view.pitch + d_pitch, view.roll)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma, rounded and replicated over the three channels."""
    img = _as_rgb(img)
    pix = img.astype(np.float64)
    g = 0.299 * pix[..., 0] + 0.587 * pix[..., 1] + 0.114 * pix[..., 2]
    g = np.rint(g).clip(0, 255).astype(np.uint8)
    return np.repeat(g[..., None], 3, axis=2)


def derive_bbox(mask: np.ndarray) -> BBox:
    """Tight half-open box over the set pixels of a boolean raster."""
    ys, xs = np.nonzero(mask)
    if len(ys) == 0:
        raise EmptyMask("mask has no set pixels")
    return BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


# --- rasterization core -----------------------------------------------------

def _edge(ax, ay, bx, by, px, py):
    """Signed area-like edge function; >0 left of a->b for y-down coords."""
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _edge_bias(ax, ay, bx, by) -> int:
    # Top-left ownership for positively-oriented triangles (y down): a
    # horizontal edge traversed rightward is a top edge; an edge going up
    # (decreasing y) is a left edge.  Owned edges include E == 0.
    dy = by - ay
    if dy < 0 or (dy == 0 and bx - ax > 0):
        return 0
    return 1


def _raster_triangle(tx: np.ndarray, ty: np.ndarray, width: int, height: int):
    """Covered pixels of one positively-oriented snapped triangle.

    tx, ty: int64 subpixel coordinates of the three corners.  Returns
    (ys, xs, l0, l1, l2) with barycentric weights per covered pixel, or
    None when nothing is covered.
    """
    area2 = int(_edge(tx[0], ty[0], tx[1], ty[1], tx[2], ty[2]))
    if area2 <= 0:
        return None
    x_lo = max(0, math.floor(int(tx.min()) / SUBPIXEL - 0.5))
    x_hi = min(width - 1, math.ceil(int(tx.max()) / SUBPIXEL - 0.5))
    y_lo = max(0, math.floor(int(ty.min()) / SUBPIXEL - 0.5))
    y_hi = min(height - 1, math.ceil(int(ty.max()) / SUBPIXEL - 0.5))
    if x_hi < x_lo or y_hi < y_lo:
        return None
    half = SUBPIXEL // 2
    cx = (np.arange(x_lo, x_hi + 1, dtype=np.int64) * SUBPIXEL + half)[None, :]
    cy = (np.arange(y_lo, y_hi + 1, dtype=np.int64) * SUBPIXEL + half)[:, None]
    # e_k is the edge opposite corner k, so it carries corner k's weight
    e0 = _edge(tx[1], ty[1], tx[2], ty[2], cx, cy)
    e1 = _edge(tx[2], ty[2], tx[0], ty[0], cx, cy)
    e2 = _edge(tx[0], ty[0], tx[1], ty[1], cx, cy)
    inside = (
        (e0 >= _edge_bias(tx[1], ty[1], tx[2], ty[2]))
        & (e1 >= _edge_bias(tx[2], ty[2], tx[0], ty[0]))
        & (e2 >= _edge_bias(tx[0], ty[0], tx[1], ty[1]))
    )
    iy, ix = np.nonzero(inside)
    if len(iy) == 0:
        return None
    l0 = e0[iy, ix] / area2
    l1 = e1[iy, ix] / area2
    l2 = e2[iy, ix] / area2
    return iy + y_lo, ix + x_lo, l0, l1, l2


def triangle_coverage(corners, width: int, height: int) -> np.ndarray:
    """Boolean coverage mask of a single screen-space triangle.

    corners: (3, 2) float pixel coordinates, any winding.  Exposes the
    production fill rule for coverage and shared-edge checks.
    """
    pts = np.asarray(corners, dtype=np.float64)
    tx = np.rint(pts[:, 0] * SUBPIXEL).astype(np.int64)
    ty = np.rint(pts[:, 1] * SUBPIXEL).astype(np.int64)
    if _edge(tx[0], ty[0], tx[1], ty[1], tx[2], ty[2]) < 0:
        tx = tx[[0, 2, 1]]
        ty = ty[[0, 2, 1]]
    mask = np.zeros((height, width), dtype=bool)
    cov = _raster_triangle(tx, ty, width, height)
    if cov is not None:
        mask[cov[0], cov[1]] = True
    return mask


def _sample_bilinear(tex: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear texture fetch; u right, v up, both clamped to [0, 1]."""
    th, tw = tex.shape[:2]
    x = np.clip(u, 0.0, 1.0) * (tw - 1)
    y = (1.0 - np.clip(v, 0.0, 1.0)) * (th - 1)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, tw - 1)
    y1 = np.minimum(y0 + 1, th - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    top = tex[y0, x0] * (1 - fx) + tex[y0, x1] * fx
    bot = tex[y1, x0] * (1 - fx) + tex[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _project(verts: np.ndarray, cue: CueConfig):
    """Perspective-project and scale so the projected bbox fills the frame.

    Returns float screen coordinates (x right, y down) and 1/w per vertex.
    The screen-space scale is capped so extremely eccentric projections
    cannot overflow the snapped integer coordinates.
    """
    width, height = cue.image_size
    w = CAMERA_DISTANCE - verts[:, 2]
    u = verts[:, 0] / w
    v = verts[:, 1] / w
    ext_u = float(u.max() - u.min())
    ext_v = float(v.max() - v.min())
    ext = ext_v if ext_v > 1e-12 else max(ext_u, 1e-12)
    scale = cue.fill_fraction * height / ext
    span_limit = 64.0 * max(width, height)
    big = max(ext_u, ext_v, 1e-12)
    if scale * big > span_limit:
        scale = span_limit / big
    sx = width / 2.0 + scale * (u - (u.min() + u.max()) / 2.0)
    sy = height / 2.0 - scale * (v - (v.min() + v.max()) / 2.0)
    return sx, sy, 1.0 / w


# Composed backgrounds keyed by exact pixel bytes; pool images repeat across
# renders, so resizing each one once is a large win.  Bounded FIFO.
_BG_CACHE: dict[tuple[bytes, str, tuple[int, int]], np.ndarray] = {}
_BG_CACHE_MAX = 128


def _compose_background(cue: CueConfig, bg: np.ndarray | None) -> np.ndarray:
    width, height = cue.image_size
    if cue.bg_mode == "white":
        return np.full((height, width, 3), 255, dtype=np.uint8)
    bg = _as_rgb(bg)
    key = (bg.tobytes(), cue.bg_mode, cue.image_size)
    cached = _BG_CACHE.get(key)
    if cached is None:
        cached = resize_bilinear(bg, (width, height))
        if cue.bg_mode == "real_gray":
            cached = to_grayscale(cached)
        if len(_BG_CACHE) >= _BG_CACHE_MAX:
            _BG_CACHE.pop(next(iter(_BG_CACHE)))
        _BG_CACHE[key] = cached
    return cached.copy()


def render(
    mesh: Mesh,
    cue: CueConfig,
    bg: np.ndarray | None = None,
    texture: np.ndarray | None = None,
    seed: int = 0,
    bg_id: str = "",
    texture_id: str = "",
) -> RenderedImage:
    """Rasterize one mesh under a cue configuration.

    The mesh is normalized to the unit frame, rotated into the (perturbed)
    view, and drawn with flat Lambertian shading from the camera direction.
    ``bg`` is required unless bg_mode is white; ``texture`` is required for
    real-RGB object texture (UVs are synthesized if the model lacks them).
    """
    if mesh.n_vertices == 0:
        raise EmptyMesh("cannot render an empty mesh")
    if cue.needs_background and bg is None:
        raise MissingPool(f"bg_mode={cue.bg_mode} requires a background image")
    if cue.needs_texture and texture is None:
        raise MissingPool("tx_mode=real_rgb requires a texture image")

    posed = perturb_pose(cue.view, cue.perturb_range_deg, seed)
    m = apply_view(fit_to_unit(mesh), posed)
    if cue.needs_texture:
        m = generate_uv(m)

    width, height = cue.image_size
    sx, sy, winv = _project(m.vertices, cue)
    px = np.rint(sx * SUBPIXEL).astype(np.int64)
    py = np.rint(sy * SUBPIXEL).astype(np.int64)

    rgb = _compose_background(cue, bg)
    mask = np.zeros((height, width), dtype=bool)
    zbuf = np.zeros((height, width), dtype=np.float64)
    tex = texture.astype(np.float64) if cue.needs_texture else None

    verts = m.vertices
    tri = verts[m.faces]  # (m, 3, 3)
    normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    nlen = np.linalg.norm(normals, axis=1)
    ok = nlen > 0.0
    shades = np.full(m.n_faces, AMBIENT)
    shades[ok] += DIFFUSE * np.maximum(0.0, normals[ok, 2] / nlen[ok])
    for fi in range(m.n_faces):
        if not ok[fi]:
            continue
        idx = m.faces[fi]
        shade = shades[fi]

        corner_order = (0, 1, 2)
        if _edge(px[idx[0]], py[idx[0]], px[idx[1]], py[idx[1]], px[idx[2]], py[idx[2]]) < 0:
            corner_order = (0, 2, 1)
        vids = idx[list(corner_order)]
        cov = _raster_triangle(px[vids], py[vids], width, height)
        if cov is None:
            continue
        ys, xs, l0, l1, l2 = cov
        wi = winv[vids]
        zinv = l0 * wi[0] + l1 * wi[1] + l2 * wi[2]
        nearer = zinv > zbuf[ys, xs]
        if not nearer.any():
            continue
        ys, xs = ys[nearer], xs[nearer]
        zinv, l0, l1, l2 = zinv[nearer], l0[nearer], l1[nearer], l2[nearer]
        if tex is not None:
            uv = m.uvs[fi][list(corner_order)]
            num_u = l0 * uv[0, 0] * wi[0] + l1 * uv[1, 0] * wi[1] + l2 * uv[2, 0] * wi[2]
            num_v = l0 * uv[0, 1] * wi[0] + l1 * uv[1, 1] * wi[1] + l2 * uv[2, 1] * wi[2]
            colors = _sample_bilinear(tex, num_u / zinv, num_v / zinv)
        else:
            colors = np.full((len(ys), 3), float(UNIFORM_GRAY))
        rgb[ys, xs] = np.rint(np.clip(colors * shade, 0.0, 255.0)).astype(np.uint8)
        zbuf[ys, xs] = zinv
        mask[ys, xs] = True

    if not mask.any():
        raise EmptyRender(f"mesh {mesh.name!r} covered no pixels")
    return RenderedImage(
        rgb=rgb,
        mask=mask,
        bbox=derive_bbox(mask),
        provenance=Provenance(
            model=mesh.name,
            view_label=cue.view.label,
            yaw=posed.yaw,
            pitch=posed.pitch,
            roll=posed.roll,
            bg_id=bg_id,
            texture_id=texture_id,
            seed=seed,
            bg_mode=cue.bg_mode,
            tx_mode=cue.tx_mode,
            width=width,
            height=height,
            fill_fraction=cue.fill_fraction,
        ),
    )
