"""Procedural toy assets: small parametric meshes and colorful image pools.

These power the bundled demo and the end-to-end tests without shipping any
binary fixtures.  Shapes come in three families (box, cylinder assembly,
cone assembly) with per-variant proportions for intra-category variation;
backgrounds and textures are generated with a guaranteed chromatic cast so
grayscale handling is observable.
"""

import math
from pathlib import Path

import numpy as np

from .image import write_ppm
from .mesh import Mesh, write_obj
from .seeding import make_rng

TOY_CATEGORIES = ("cube", "cylinder_assembly", "cone_assembly")


def merge_meshes(parts: list[Mesh], name: str = "") -> Mesh:
    verts = []
    faces = []
    offset = 0
    for part in parts:
        verts.append(part.vertices)
        faces.append(part.faces + offset)
        offset += part.n_vertices
    return Mesh(np.vstack(verts), np.vstack(faces), name=name)


def make_cuboid(sx: float = 1.0, sy: float = 1.0, sz: float = 1.0, name: str = "cuboid") -> Mesh:
    """Axis-aligned box centered at the origin, outward-wound faces."""
    hx, hy, hz = sx / 2, sy / 2, sz / 2
    v = np.array(
        [
            [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
            [-hx, -hy, hz], [hx, -hy, hz], [hx, hy, hz], [-hx, hy, hz],
        ]
    )
    quads = [
        (4, 5, 6, 7),  # +z
        (1, 0, 3, 2),  # -z
        (5, 1, 2, 6),  # +x
        (0, 4, 7, 3),  # -x
        (7, 6, 2, 3),  # +y
        (0, 1, 5, 4),  # -y
    ]
    faces = []
    for q in quads:
        faces.append((q[0], q[1], q[2]))
        faces.append((q[0], q[2], q[3]))
    return Mesh(v, np.array(faces), name=name)


def make_cylinder(
    radius: float = 0.3,
    height: float = 1.0,
    segments: int = 16,
    axis: str = "y",
    name: str = "cylinder",
) -> Mesh:
    """Capped cylinder along the given axis, centered at the origin."""
    theta = np.linspace(0.0, 2 * math.pi, segments, endpoint=False)
    ring = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
    bottom = np.column_stack([ring[:, 0], np.full(segments, -height / 2), ring[:, 1]])
    top = np.column_stack([ring[:, 0], np.full(segments, height / 2), ring[:, 1]])
    verts = [bottom, top, [[0.0, -height / 2, 0.0]], [[0.0, height / 2, 0.0]]]
    v = np.vstack(verts)
    c_bot, c_top = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces.append((i, segments + i, segments + j))  # side, outward
        faces.append((i, segments + j, j))
        faces.append((c_top, segments + j, segments + i))  # +y cap
        faces.append((c_bot, i, j))  # -y cap
    mesh = Mesh(v, np.array(faces), name=name)
    if axis == "y":
        return mesh
    swap = {"x": [1, 0, 2], "z": [0, 2, 1]}[axis]
    return Mesh(mesh.vertices[:, swap], mesh.faces[:, [0, 2, 1]], name=name)


def make_cone(
    radius: float = 0.45, height: float = 0.8, segments: int = 16, name: str = "cone"
) -> Mesh:
    """Cone with -y base and +y apex, centered at the origin."""
    theta = np.linspace(0.0, 2 * math.pi, segments, endpoint=False)
    base = np.column_stack(
        [radius * np.cos(theta), np.full(segments, -height / 2), radius * np.sin(theta)]
    )
    v = np.vstack([base, [[0.0, height / 2, 0.0]], [[0.0, -height / 2, 0.0]]])
    apex, center = segments, segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces.append((j, i, apex))  # slanted side, outward
        faces.append((center, i, j))  # base cap, -y
    return Mesh(v, np.array(faces), name=name)


def _shift(mesh: Mesh, offset) -> Mesh:
    return Mesh(mesh.vertices + np.asarray(offset, dtype=np.float64), mesh.faces, name=mesh.name)


def make_cylinder_assembly(
    radius: float = 0.28, crossbar: float = 0.18, segments: int = 14, name: str = "cylinder_assembly"
) -> Mesh:
    """Vertical cylinder with a horizontal crossbar through its waist."""
    post = make_cylinder(radius=radius, height=1.0, segments=segments)
    bar = make_cylinder(radius=crossbar, height=0.9, segments=segments, axis="x")
    return merge_meshes([post, bar], name=name)


def make_cone_assembly(
    radius: float = 0.42, stem: float = 0.12, segments: int = 14, name: str = "cone_assembly"
) -> Mesh:
    """Cone on a short cylindrical stem, like a signal marker."""
    cone = make_cone(radius=radius, height=0.75, segments=segments)
    base = make_cylinder(radius=stem, height=0.35, segments=segments)
    return merge_meshes([_shift(cone, (0, 0.2, 0)), _shift(base, (0, -0.35, 0))], name=name)


_FAMILIES = ("cube", "cylinder_assembly", "cone_assembly")


def make_toy_mesh(family: str, variant: int = 0, name: str = "") -> Mesh:
    """A deterministic variant of one of the three shape families."""
    name = name or f"{family}_{variant}"
    k = variant % 4
    if family == "cube":
        aspects = [(1.0, 1.0, 1.0), (1.0, 0.7, 1.0), (0.75, 1.0, 1.2), (1.0, 1.0, 0.6)]
        return make_cuboid(*aspects[k], name=name)
    if family == "cylinder_assembly":
        radii = [(0.28, 0.18), (0.34, 0.14), (0.24, 0.22), (0.3, 0.1)]
        return make_cylinder_assembly(*radii[k], name=name)
    if family == "cone_assembly":
        params = [(0.42, 0.12), (0.5, 0.16), (0.36, 0.1), (0.46, 0.2)]
        return make_cone_assembly(*params[k], name=name)
    raise ValueError(f"unknown toy family {family!r}")


def toy_categories(n: int = 3) -> list[str]:
    """Category names cycling the three shape families."""
    if n <= len(TOY_CATEGORIES):
        return list(TOY_CATEGORIES[:n])
    return [f"{_FAMILIES[i % 3]}_{i:02d}" for i in range(n)]


def _family_of(category: str) -> str:
    for fam in _FAMILIES:
        if category == fam or category.startswith(fam + "_"):
            return fam
    raise ValueError(f"category {category!r} is not a toy category")


def make_background(seed: int, size: tuple[int, int] = (96, 96)) -> np.ndarray:
    """Colorful scene stand-in: two-color gradient with soft stripes.

    Both anchor colors keep red well above blue, so every pixel stays
    chromatic under any convex resampling.
    """
    rng = make_rng(seed, "bg")
    w, h = size
    c0 = np.array([170 + rng.integers(60), 40 + rng.integers(80), 10 + rng.integers(40)], float)
    c1 = np.array([120 + rng.integers(60), 70 + rng.integers(100), 15 + rng.integers(45)], float)
    t = np.linspace(0.0, 1.0, w)[None, :, None]
    img = c0[None, None, :] * (1 - t) + c1[None, None, :] * t
    phase = float(rng.uniform(0, 2 * math.pi))
    freq = 2 + int(rng.integers(4))
    rows = np.sin(np.linspace(0, freq * 2 * math.pi, h) + phase)[:, None, None]
    img = img * (0.85 + 0.15 * rows)
    return np.rint(img).clip(0, 255).astype(np.uint8)


def make_texture(seed: int, size: tuple[int, int] = (64, 64)) -> np.ndarray:
    """Soft two-tone checker texture around a warm chromatic base.

    Every pixel keeps red well above blue (clearly chromatic), while the
    tone difference between cells stays small so object texture does not
    drown out the silhouette.
    """
    rng = make_rng(seed, "tex")
    w, h = size
    base = np.array(
        [150 + rng.integers(50), 90 + rng.integers(50), 40 + rng.integers(30)], float
    )
    delta = np.array([rng.integers(15, 35), rng.integers(10, 30), rng.integers(5, 20)], float)
    cell = 5 + int(rng.integers(8))
    ys, xs = np.mgrid[0:h, 0:w]
    checker = ((ys // cell + xs // cell) % 2).astype(float)[..., None]
    img = base[None, None, :] + delta[None, None, :] * checker
    return np.rint(img).clip(0, 255).astype(np.uint8)


def make_pool(
    root,
    n_categories: int = 3,
    models_per_category: int = 4,
    n_backgrounds: int = 6,
    n_textures: int = 4,
    seed: int = 0,
    bg_size: tuple[int, int] = (96, 96),
    tx_size: tuple[int, int] = (64, 64),
) -> list[str]:
    """Write a full toy asset pool under ``root`` and return its categories."""
    root = Path(root)
    categories = toy_categories(n_categories)
    for ci, category in enumerate(categories):
        family = _family_of(category)
        model_dir = root / "models" / category
        model_dir.mkdir(parents=True, exist_ok=True)
        for mi in range(models_per_category):
            mesh = make_toy_mesh(family, variant=ci + mi, name=f"{category}_m{mi}")
            (model_dir / f"{category}_m{mi}.obj").write_text(write_obj(mesh))
        bg_dir = root / "backgrounds" / category
        bg_dir.mkdir(parents=True, exist_ok=True)
        for bi in range(n_backgrounds):
            write_ppm(bg_dir / f"bg_{bi:02d}.ppm", make_background(seed + 1000 * ci + bi, bg_size))
        tx_dir = root / "textures" / category
        tx_dir.mkdir(parents=True, exist_ok=True)
        for ti in range(n_textures):
            write_ppm(tx_dir / f"tx_{ti:02d}.ppm", make_texture(seed + 1000 * ci + ti, tx_size))
    return categories
