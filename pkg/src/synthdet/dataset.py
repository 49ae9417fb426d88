"""Asset pools, virtual dataset assembly, ingestion, and patch sampling.

A dataset is described by a manifest: one JSON record per image with its
ground-truth boxes and, for rendered images, the provenance needed to
reproduce the pixels exactly.  Manifest entries store paths relative to the
manifest file so a dataset directory can be moved wholesale.
"""

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .boxes import BBox, iou
from .errors import (
    BadRow,
    MissingCategory,
    MissingImage,
    MissingPool,
    UnreadableAsset,
)
from .image import read_image, read_image_size, write_ppm
from .mesh import Mesh, ViewPreset, VIEW_ORDER, parse_obj
from .render import CueConfig, Provenance, RenderedImage, render
from .seeding import derive_seed, make_rng


@dataclass(frozen=True)
class GroundTruth:
    category: str
    bbox: BBox


@dataclass
class ManifestEntry:
    image: str  # path relative to the manifest root
    source: str  # "virtual" or "real"
    boxes: list[GroundTruth]
    provenance: Provenance | None = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    root: Path | None = None

    def __post_init__(self):
        paths = [e.image for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest image paths must be unique")

    def __len__(self) -> int:
        return len(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        return (self.root / entry.image) if self.root else Path(entry.image)

    def categories(self) -> list[str]:
        seen = sorted({gt.category for e in self.entries for gt in e.boxes})
        return seen

    def gt_by_category(self) -> dict[str, dict[str, list[BBox]]]:
        """category -> image path -> boxes, as the evaluator expects."""
        table: dict[str, dict[str, list[BBox]]] = {}
        for entry in self.entries:
            for gt in entry.boxes:
                table.setdefault(gt.category, {}).setdefault(entry.image, []).append(gt.bbox)
        return table


def save_manifest(path, manifest: DatasetManifest) -> None:
    records = []
    for e in manifest.entries:
        rec = {
            "image": e.image,
            "source": e.source,
            "boxes": [
                {"category": gt.category, **dict(zip(("xmin", "ymin", "xmax", "ymax"), gt.bbox.astuple()))}
                for gt in e.boxes
            ],
        }
        if e.provenance is not None:
            rec["provenance"] = e.provenance.to_dict()
        records.append(rec)
    Path(path).write_text(json.dumps(records, sort_keys=True, indent=1) + "\n")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    records = json.loads(path.read_text())
    entries = []
    for rec in records:
        boxes = [
            GroundTruth(b["category"], BBox(b["xmin"], b["ymin"], b["xmax"], b["ymax"]))
            for b in rec["boxes"]
        ]
        prov = Provenance.from_dict(rec["provenance"]) if "provenance" in rec else None
        entries.append(ManifestEntry(rec["image"], rec["source"], boxes, prov))
    return DatasetManifest(entries, root=path.parent)


@dataclass(frozen=True)
class DatasetSpec:
    categories: tuple[str, ...]
    images_per_category: int = 100
    models_per_category_fraction: float = 1.0
    views_enabled: tuple[str, ...] = VIEW_ORDER
    cue: CueConfig = field(default_factory=CueConfig)
    global_seed: int = 0

    def __post_init__(self):
        cats = tuple(self.categories)
        if not cats or len(set(cats)) != len(cats):
            raise ValueError("categories must be non-empty and unique")
        if self.images_per_category < 1:
            raise ValueError("images_per_category must be >= 1")
        if not 0.0 < self.models_per_category_fraction <= 1.0:
            raise ValueError("models_per_category_fraction must be in (0, 1]")
        views = tuple(self.views_enabled)
        if not views or any(v not in VIEW_ORDER for v in views):
            raise ValueError(f"views_enabled must be a non-empty subset of {VIEW_ORDER}")
        object.__setattr__(self, "categories", cats)
        # keep canonical front/side/intra ordering regardless of input order
        object.__setattr__(
            self, "views_enabled", tuple(v for v in VIEW_ORDER if v in views)
        )


class Pools:
    """Per-category model meshes and background/texture image pools.

    Models are parsed eagerly (they are small and validation should fail
    fast); images are read lazily and cached.
    """

    def __init__(
        self,
        models: dict[str, list[tuple[str, Mesh]]],
        backgrounds: dict[str, list[tuple[str, Path]]],
        textures: dict[str, list[tuple[str, Path]]],
    ):
        self.models = models
        self.backgrounds = backgrounds
        self.textures = textures
        self._image_cache: dict[Path, np.ndarray] = {}

    def counts(self, category: str) -> tuple[int, int, int]:
        return (
            len(self.models.get(category, [])),
            len(self.backgrounds.get(category, [])),
            len(self.textures.get(category, [])),
        )

    def model(self, category: str, name: str) -> Mesh:
        if category not in self.models:
            raise MissingCategory(category)
        for n, mesh in self.models[category]:
            if n == name:
                return mesh
        raise KeyError(f"model {name!r} not in category {category!r}")

    def _read(self, path: Path) -> np.ndarray:
        if path not in self._image_cache:
            self._image_cache[path] = read_image(path)
        return self._image_cache[path]

    def background(self, category: str, asset_id: str) -> np.ndarray:
        return self._read(dict(self.backgrounds[category])[asset_id])

    def texture(self, category: str, asset_id: str) -> np.ndarray:
        return self._read(dict(self.textures[category])[asset_id])


def load_pools(root, categories: list[str] | None = None) -> Pools:
    """Load the models/backgrounds/textures directory layout.

    Layout: models/<category>/*.obj, backgrounds/<category>/*.ppm|png,
    textures/<category>/*.ppm|png.  When ``categories`` is given, each one
    must provide at least one model; image pools may be empty (the render
    modes that need them will complain later).
    """
    root = Path(root)
    models: dict[str, list[tuple[str, Mesh]]] = {}
    model_root = root / "models"
    if model_root.is_dir():
        for cat_dir in sorted(model_root.iterdir()):
            if not cat_dir.is_dir():
                continue
            entries = []
            for obj_path in sorted(cat_dir.glob("*.obj")):
                try:
                    mesh = parse_obj(obj_path.read_text(), name=obj_path.stem)
                except OSError as exc:
                    raise UnreadableAsset(obj_path, str(exc)) from None
                entries.append((obj_path.stem, mesh))
            if entries:
                models[cat_dir.name] = entries

    def image_pool(kind: str) -> dict[str, list[tuple[str, Path]]]:
        pool: dict[str, list[tuple[str, Path]]] = {}
        kind_root = root / kind
        if not kind_root.is_dir():
            return pool
        for cat_dir in sorted(kind_root.iterdir()):
            if not cat_dir.is_dir():
                continue
            files = sorted(
                p for p in cat_dir.iterdir() if p.suffix.lower() in (".ppm", ".png")
            )
            if files:
                pool[cat_dir.name] = [(p.stem, p) for p in files]
        return pool

    if categories:
        for cat in categories:
            if cat not in models:
                raise MissingCategory(cat)
    return Pools(models, image_pool("backgrounds"), image_pool("textures"))


def _enabled_models(pools: Pools, category: str, fraction: float) -> list[str]:
    names = sorted(name for name, _ in pools.models[category])
    keep = max(1, math.ceil(fraction * len(names)))
    return names[:keep]


def _render_entry(
    spec: DatasetSpec, pools: Pools, category: str, index: int
) -> RenderedImage:
    models = _enabled_models(pools, category, spec.models_per_category_fraction)
    views = spec.views_enabled
    model_name = models[index % len(models)]
    view = ViewPreset.named(views[index % len(views)])
    entry_seed = derive_seed(spec.global_seed, category, index)
    cue = replace(spec.cue, view=view)

    bg = texture = None
    bg_id = texture_id = ""
    if cue.needs_background:
        pool = pools.backgrounds.get(category, [])
        if not pool:
            raise MissingPool(f"bg_mode={cue.bg_mode} but no backgrounds for {category!r}")
        bg_id = pool[int(make_rng(entry_seed, "bg").integers(len(pool)))][0]
        bg = pools.background(category, bg_id)
    if cue.needs_texture:
        pool = pools.textures.get(category, [])
        if not pool:
            raise MissingPool(f"tx_mode=real_rgb but no textures for {category!r}")
        texture_id = pool[int(make_rng(entry_seed, "tex").integers(len(pool)))][0]
        texture = pools.texture(category, texture_id)

    return render(
        pools.model(category, model_name),
        cue,
        bg=bg,
        texture=texture,
        seed=derive_seed(entry_seed, "pose"),
        bg_id=bg_id,
        texture_id=texture_id,
    )


def build_virtual_dataset(
    spec: DatasetSpec, pools: Pools, out_dir, threads: int = 1
) -> DatasetManifest:
    """Render the full virtual dataset and write images under ``out_dir``.

    Models rotate round-robin over the (fraction-cut, lexicographic)
    per-category model list; views cycle over the enabled presets;
    perturbation, background and texture draws derive from
    hash(global_seed, category, index).  Output is identical for any thread
    count.
    """
    out_dir = Path(out_dir)
    jobs = [
        (category, index)
        for category in spec.categories
        for index in range(spec.images_per_category)
    ]
    for category in spec.categories:
        if category not in pools.models:
            raise MissingCategory(category)

    def run(job: tuple[str, int]) -> RenderedImage:
        category, index = job
        try:
            return _render_entry(spec, pools, category, index)
        except Exception as exc:
            exc.args = (f"{category}[{index}]: {exc}",)
            raise

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rendered = list(pool.map(run, jobs))
    else:
        rendered = [run(job) for job in jobs]

    entries = []
    for (category, index), result in zip(jobs, rendered):
        rel = f"images/{category}/{category}_{index:04d}.ppm"
        path = out_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        write_ppm(path, result.rgb)
        entries.append(
            ManifestEntry(
                image=rel,
                source="virtual",
                boxes=[GroundTruth(category, result.bbox)],
                provenance=result.provenance,
            )
        )
    entries.sort(key=lambda e: e.image)
    return DatasetManifest(entries, root=out_dir)


def rerender_entry(entry: ManifestEntry, pools: Pools) -> RenderedImage:
    """Reproduce a virtual entry's pixels from its provenance record."""
    if entry.provenance is None:
        raise ValueError("entry has no provenance")
    p = entry.provenance
    category = entry.boxes[0].category
    cue = CueConfig(
        bg_mode=p.bg_mode,
        tx_mode=p.tx_mode,
        view=ViewPreset.custom(p.yaw, p.pitch, p.roll),
        perturb_range_deg=0.0,
        image_size=(p.width, p.height),
        fill_fraction=p.fill_fraction,
    )
    return render(
        pools.model(category, p.model),
        cue,
        bg=pools.background(category, p.bg_id) if p.bg_id else None,
        texture=pools.texture(category, p.texture_id) if p.texture_id else None,
        seed=p.seed,
        bg_id=p.bg_id,
        texture_id=p.texture_id,
    )


# --- real-image ingestion -----------------------------------------------------

_ANNOTATION_HEADER = ["image", "category", "xmin", "ymin", "xmax", "ymax"]


def ingest_real_annotations(csv_path, image_root) -> DatasetManifest:
    """Read a real-image annotation CSV into a manifest (source="real").

    Columns: image,category,xmin,ymin,xmax,ymax with integer half-open
    coordinates.  Rows are grouped per image; every referenced image must
    exist under ``image_root``.
    """
    image_root = Path(image_root)
    grouped: dict[str, list[GroundTruth]] = {}
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _ANNOTATION_HEADER:
            raise BadRow(1, f"expected header {_ANNOTATION_HEADER}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise BadRow(line_no, f"expected 6 fields, got {len(row)}")
            image, category = row[0], row[1]
            try:
                coords = [int(v) for v in row[2:6]]
            except ValueError:
                raise BadRow(line_no, f"non-integer coordinates {row[2:6]}") from None
            try:
                box = BBox(*coords)
            except ValueError as exc:
                raise BadRow(line_no, str(exc)) from None
            if not (image_root / image).is_file():
                raise MissingImage(f"row {line_no}: {image_root / image} does not exist")
            grouped.setdefault(image, []).append(GroundTruth(category, box))
    entries = [
        ManifestEntry(image=img, source="real", boxes=boxes)
        for img, boxes in sorted(grouped.items())
    ]
    return DatasetManifest(entries, root=image_root)


def write_annotations_csv(path, manifest: DatasetManifest) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_ANNOTATION_HEADER)
        for entry in manifest.entries:
            for gt in entry.boxes:
                writer.writerow([entry.image, gt.category, *gt.bbox.astuple()])


# --- patch sampling -----------------------------------------------------------

NEGATIVE_IOU_MAX = 0.3


@dataclass(frozen=True)
class Patch:
    image: str
    bbox: BBox
    category: str


@dataclass
class PatchSet:
    positives: list[Patch]
    negatives: list[Patch]
    policy: dict = field(default_factory=dict)


def sample_patches(
    manifest: DatasetManifest,
    per_image_negatives: int,
    proposal_source,
    seed: int = 0,
) -> PatchSet:
    """Positive and negative training patches from a manifest.

    Positives are exactly the ground-truth boxes.  For each image and each
    category annotated in it, up to ``per_image_negatives`` proposals with
    IoU < 0.3 against every box of that category are drawn by seeded
    shuffle.  ``proposal_source(entry, width, height)`` supplies candidate
    boxes for one image.
    """
    if not manifest.entries:
        raise ValueError("manifest is empty")
    positives: list[Patch] = []
    negatives: list[Patch] = []
    for entry in manifest.entries:
        positives.extend(Patch(entry.image, gt.bbox, gt.category) for gt in entry.boxes)
        width, height = read_image_size(manifest.resolve(entry))
        proposals = [
            b for b in proposal_source(entry, width, height) if b.xmax <= width and b.ymax <= height
        ]
        if not proposals:
            continue
        by_cat: dict[str, list[BBox]] = {}
        for gt in entry.boxes:
            by_cat.setdefault(gt.category, []).append(gt.bbox)
        for category in sorted(by_cat):
            eligible = [
                b
                for b in proposals
                if all(iou(b, gt_box) < NEGATIVE_IOU_MAX for gt_box in by_cat[category])
            ]
            rng = make_rng(seed, entry.image, category)
            order = rng.permutation(len(eligible))
            for k in order[:per_image_negatives]:
                negatives.append(Patch(entry.image, eligible[int(k)], category))
    return PatchSet(
        positives=positives,
        negatives=negatives,
        policy={
            "per_image_negatives": per_image_negatives,
            "negative_iou_max": NEGATIVE_IOU_MAX,
            "seed": seed,
        },
    )


def grid_proposal_source(scales, aspect_ratios=(1.0,), stride_fraction=0.25):
    """Proposal source wrapping :func:`synthdet.detect.grid_proposals`."""
    from .detect import grid_proposals

    def source(entry: ManifestEntry, width: int, height: int):
        return grid_proposals(width, height, scales, aspect_ratios, stride_fraction)

    return source


def csv_proposal_source(path):
    """Proposal source backed by an external image,xmin,ymin,xmax,ymax CSV."""
    from .detect import load_proposals_csv

    table = load_proposals_csv(path)

    def source(entry: ManifestEntry, width: int, height: int):
        return table.get(entry.image, [])

    return source


# --- few-shot subsampling -----------------------------------------------------

def subsample_fewshot(manifest: DatasetManifest, k: int, seed: int = 0) -> DatasetManifest:
    """Select images until each category covers k positive boxes.

    Per category, candidate images are shuffled with a seed that does not
    depend on k, and a prefix is taken until the running box count reaches
    k; the selections are therefore nested (R_5 within R_10 within R_20).
    An image kept for one category keeps all its boxes.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return DatasetManifest([], root=manifest.root)
    selected: set[str] = set()
    by_path = {e.image: e for e in manifest.entries}
    for category in manifest.categories():
        candidates = sorted(
            e.image for e in manifest.entries if any(gt.category == category for gt in e.boxes)
        )
        rng = make_rng(seed, "fewshot", category)
        order = [candidates[int(i)] for i in rng.permutation(len(candidates))]
        covered = 0
        for img in order:
            if covered >= k:
                break
            covered += sum(gt.category == category for gt in by_path[img].boxes)
            selected.add(img)
        if covered < k:
            warnings.warn(
                f"category {category!r} has only {covered} positive boxes; "
                f"requested {k}, keeping all"
            )
    entries = [by_path[img] for img in sorted(selected)]
    return DatasetManifest(entries, root=manifest.root)
