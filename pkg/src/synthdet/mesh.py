"""Triangle meshes: OBJ parsing, canonical framing, view rotation, UV synthesis.

Coordinate convention throughout: y-up, right-handed.  Views are intrinsic
yaw (about y), then pitch (about x), then roll (about z).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMesh, MalformedFace, MalformedVertex

# Canonical angles (yaw, pitch, roll) for the named views.  These stand in
# for poses that would otherwise be adjusted by hand per model; a "custom"
# label permits arbitrary angles.
VIEW_ANGLES: dict[str, tuple[float, float, float]] = {
    "front": (0.0, 0.0, 0.0),
    "side": (90.0, 0.0, 0.0),
    "intra": (45.0, 15.0, 0.0),
}
VIEW_ORDER = ("front", "side", "intra")


@dataclass(frozen=True)
class ViewPreset:
    label: str
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        for a in (self.yaw, self.pitch, self.roll):
            if not math.isfinite(a):
                raise ValueError("view angles must be finite")
        if self.label in VIEW_ANGLES:
            if (self.yaw, self.pitch, self.roll) != VIEW_ANGLES[self.label]:
                raise ValueError(
                    f"named view {self.label!r} must carry its canonical angles "
                    f"{VIEW_ANGLES[self.label]}"
                )
        elif self.label != "custom":
            raise ValueError(f"unknown view label {self.label!r}")

    @classmethod
    def named(cls, label: str) -> "ViewPreset":
        yaw, pitch, roll = VIEW_ANGLES[label]
        return cls(label, yaw, pitch, roll)

    @classmethod
    def custom(cls, yaw: float, pitch: float, roll: float = 0.0) -> "ViewPreset":
        return cls("custom", yaw, pitch, roll)


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle mesh.

    vertices: (n, 3) float64; faces: (m, 3) int32 indices into vertices;
    uvs: optional (m, 3, 2) float64 texture coordinates per face corner.
    """

    vertices: np.ndarray
    faces: np.ndarray
    uvs: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int32))
        v = v.reshape((-1, 3)) if v.size else v.reshape((0, 3))
        f = f.reshape((-1, 3)) if f.size else f.reshape((0, 3))
        if not np.all(np.isfinite(v)):
            raise ValueError("mesh vertices must be finite")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face index out of range")
        uv = self.uvs
        if uv is not None:
            uv = np.ascontiguousarray(np.asarray(uv, dtype=np.float64))
            if uv.shape != (len(f), 3, 2):
                raise ValueError(
                    f"uvs must have shape ({len(f)}, 3, 2), got {uv.shape}"
                )
            if not np.all(np.isfinite(uv)):
                raise ValueError("uvs must be finite")
            uv.setflags(write=False)
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "uvs", uv)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)


def _parse_floats(parts: list[str], count: int, line_no: int) -> list[float]:
    try:
        vals = [float(p) for p in parts[:count]]
    except ValueError as exc:
        raise MalformedVertex(line_no, f"non-numeric coordinate: {exc}") from None
    if len(vals) < count or not all(math.isfinite(x) for x in vals):
        raise MalformedVertex(line_no, "expected finite coordinates")
    return vals


def _resolve_index(raw: str, n: int, line_no: int, kind: str) -> int:
    try:
        idx = int(raw)
    except ValueError:
        raise MalformedFace(line_no, f"non-integer {kind} index {raw!r}") from None
    if idx > 0:
        idx -= 1
    elif idx < 0:
        idx += n
    else:
        raise MalformedFace(line_no, f"{kind} index 0 is not valid")
    if not 0 <= idx < n:
        raise MalformedFace(line_no, f"{kind} index {raw} out of range")
    return idx


def parse_obj(text: str, name: str = "") -> Mesh:
    """Parse Wavefront OBJ text into a triangle mesh.

    Supports v, vt and f directives (f in v, v/vt, v//vn and v/vt/vn forms);
    everything else, including normals and materials, is skipped.  Polygons
    with more than three corners are fan-triangulated from their first
    vertex; negative indices resolve against the count seen so far.  UVs are
    kept only if every face provides them for every corner.
    """
    vertices: list[list[float]] = []
    texcoords: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    face_uv_idx: list[tuple[int, int, int] | None] = []

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            vertices.append(_parse_floats(parts[1:], 3, line_no))
        elif tag == "vt":
            texcoords.append(_parse_floats(parts[1:], 2, line_no))
        elif tag == "f":
            corners = parts[1:]
            if len(corners) < 3:
                raise MalformedFace(line_no, f"face with {len(corners)} indices")
            vidx: list[int] = []
            tidx: list[int | None] = []
            for corner in corners:
                fields = corner.split("/")
                vidx.append(_resolve_index(fields[0], len(vertices), line_no, "vertex"))
                if len(fields) > 1 and fields[1]:
                    tidx.append(_resolve_index(fields[1], len(texcoords), line_no, "uv"))
                else:
                    tidx.append(None)
            for i in range(2, len(vidx)):
                faces.append((vidx[0], vidx[i - 1], vidx[i]))
                corner_uvs = (tidx[0], tidx[i - 1], tidx[i])
                face_uv_idx.append(None if None in corner_uvs else corner_uvs)
        # other directives (vn, o, g, s, mtllib, usemtl, ...) are ignored

    uvs = None
    if faces and all(t is not None for t in face_uv_idx):
        tc = np.asarray(texcoords, dtype=np.float64)
        uvs = np.stack([tc[list(t)] for t in face_uv_idx])  # type: ignore[arg-type]
    return Mesh(
        vertices=np.asarray(vertices, dtype=np.float64).reshape((-1, 3)),
        faces=np.asarray(faces, dtype=np.int32).reshape((-1, 3)),
        uvs=uvs,
        name=name,
    )


def write_obj(mesh: Mesh) -> str:
    """Serialize a mesh back to OBJ text (v/vt/f only)."""
    out = [f"# {mesh.name}"] if mesh.name else []
    for v in mesh.vertices:
        out.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    if mesh.uvs is None:
        for f in mesh.faces:
            out.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    else:
        for corners in mesh.uvs.reshape(-1, 2):
            out.append(f"vt {float(corners[0])!r} {float(corners[1])!r}")
        for fi, f in enumerate(mesh.faces):
            t = 3 * fi + 1
            out.append(f"f {f[0] + 1}/{t} {f[1] + 1}/{t + 1} {f[2] + 1}/{t + 2}")
    return "\n".join(out) + "\n"


def _require_nonempty(mesh: Mesh):
    if mesh.n_vertices == 0:
        raise EmptyMesh("mesh has no vertices")


def fit_to_unit(mesh: Mesh) -> Mesh:
    """Center the bounding box at the origin and scale its largest extent to 1.

    Degenerate meshes with zero extent on all axes are translated only.
    """
    _require_nonempty(mesh)
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    center = (lo + hi) / 2.0
    extent = float((hi - lo).max())
    verts = mesh.vertices - center
    if extent > 0.0:
        verts = verts / extent
    return Mesh(verts, mesh.faces, mesh.uvs, mesh.name)


def rotation_matrix(view: ViewPreset) -> np.ndarray:
    """3x3 rotation for intrinsic yaw (y), pitch (x), roll (z), right-handed."""
    y, p, r = (math.radians(a) for a in (view.yaw, view.pitch, view.roll))
    cy, sy = math.cos(y), math.sin(y)
    cp, sp = math.cos(p), math.sin(p)
    cr, sr = math.cos(r), math.sin(r)
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    return rz @ rx @ ry


def apply_view(mesh: Mesh, view: ViewPreset) -> Mesh:
    """Rotate vertices about the origin into the given view; faces/uvs unchanged."""
    _require_nonempty(mesh)
    rot = rotation_matrix(view)
    return Mesh(mesh.vertices @ rot.T, mesh.faces, mesh.uvs, mesh.name)


def generate_uv(mesh: Mesh, scheme: str = "cylindrical") -> Mesh:
    """Synthesize texture coordinates when the model lacks them.

    Cylindrical projection about the y axis: u = (atan2(z, x) + pi) / (2 pi),
    v runs 0..1 over the y extent (0.5 if the extent is zero).  Meshes that
    already carry UVs are returned unchanged.
    """
    _require_nonempty(mesh)
    if mesh.uvs is not None:
        return mesh
    if scheme != "cylindrical":
        raise ValueError(f"unknown uv scheme {scheme!r}")
    x, y, z = mesh.vertices.T
    u = (np.arctan2(z, x) + math.pi) / (2.0 * math.pi)
    y_min, y_max = float(y.min()), float(y.max())
    if y_max > y_min:
        v = (y - y_min) / (y_max - y_min)
    else:
        v = np.full_like(y, 0.5)
    per_vertex = np.stack([u, v], axis=1)
    uvs = per_vertex[mesh.faces] if mesh.n_faces else np.zeros((0, 3, 2))
    return Mesh(mesh.vertices, mesh.faces, uvs, mesh.name)
