"""Declarative ablation runs: generate, featurize, train, detect, evaluate.

A plan is an INI file describing one ablation grid.  Every cell runs the
identical pipeline with identical seeds and a shared test set; only the
knob under study differs, and a resolved per-cell config is written beside
the outputs so that isolation can be audited.
"""

import configparser
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .boxes import BBox, iou
from .dataset import (
    DatasetManifest,
    DatasetSpec,
    Pools,
    build_virtual_dataset,
    grid_proposal_source,
    load_manifest,
    load_pools,
    sample_patches,
    save_manifest,
    subsample_fewshot,
)
from .detect import Detection, grid_proposals, score_proposals
from .detector import LinearModel, TrainSet, mine_hard_negatives, save_model, train_svm
from .errors import ConfigError
from .evaluation import EvalReport, evaluate_detections, write_report_csv, write_report_json
from .features import FeatureVector, HogFeaturizer, HogParams, patch_id
from .image import read_image
from .render import CUE_LABELS, CueConfig
from .seeding import derive_seed

PLAN_KINDS = ("cue_matrix", "view_ablation", "shape_ablation", "fewshot", "size_curve")


@dataclass
class PipelineParams:
    """Everything the per-cell pipeline needs besides the dataset knob."""

    hog: HogParams = field(default_factory=HogParams)
    C: float = 0.01
    tol: float = 1e-4
    max_epochs: int = 1000
    negatives_per_image: int = 6
    mining_rounds: int = 0
    mining_cap: int = 50
    scales: tuple[float, ...] = (48, 64, 88, 116)
    aspect_ratios: tuple[float, ...] = (0.7, 1.0, 1.4)
    stride_fraction: float = 0.25
    nms_threshold: float = 0.3
    score_floor: float = -1.0


@dataclass
class ExperimentPlan:
    name: str
    kind: str
    seed: int
    pools_root: Path
    dataset: DatasetSpec  # base spec; cells override single knobs
    pipeline: PipelineParams
    # test set: a manifest path, or None to render a held-out virtual set
    test_manifest: Path | None = None
    test_images_per_category: int = 12
    test_seed: int = 1
    test_cue_label: str = "RR-RR"
    # kind-specific knobs
    cue_labels: tuple[str, ...] = CUE_LABELS
    view_sets: tuple[tuple[str, ...], ...] = (("front",), ("front", "side"), ("front", "side", "intra"))
    fractions: tuple[float, ...] = (1.0, 0.5)
    k_values: tuple[int, ...] = (5, 10, 20)
    real_manifest: Path | None = None
    sizes: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in PLAN_KINDS:
            raise ConfigError(f"plan kind must be one of {PLAN_KINDS}, got {self.kind!r}")


@dataclass
class ResultTable:
    name: str
    categories: list[str]
    rows: list[tuple[str, EvalReport]]


# --- plan parsing -------------------------------------------------------------

def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def parse_plan(path) -> ExperimentPlan:
    """Read an INI experiment plan; unknown values fail fast as ConfigError."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read plan file {path}")
    try:
        plan_sec = cp["plan"]
        data_sec = cp["dataset"]
    except KeyError as exc:
        raise ConfigError(f"plan is missing required section {exc}") from None

    kind = plan_sec.get("kind", "cue_matrix")
    seed = plan_sec.getint("seed", 0)

    size_text = data_sec.get("image_size", "128x128")
    try:
        width, height = (int(v) for v in size_text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"bad image_size {size_text!r}; expected WxH") from None
    categories = tuple(_split(data_sec.get("categories", "")))
    if not categories:
        raise ConfigError("dataset.categories must list at least one category")
    try:
        cue = CueConfig.from_label(
            data_sec.get("cue", "RR-RR"),
            perturb_range_deg=data_sec.getfloat("perturb_range_deg", 15.0),
            image_size=(width, height),
            fill_fraction=data_sec.getfloat("fill_fraction", 0.7),
        )
        spec = DatasetSpec(
            categories=categories,
            images_per_category=data_sec.getint("images_per_category", 30),
            models_per_category_fraction=data_sec.getfloat("model_fraction", 1.0),
            views_enabled=tuple(_split(data_sec.get("views", "front, side, intra"))),
            cue=cue,
            global_seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    feat_sec = cp["features"] if cp.has_section("features") else {}
    space = feat_sec.get("space", "hog") if feat_sec else "hog"
    if space != "hog":
        raise ConfigError(
            f"experiment plans support the hog feature space; {space!r} features "
            "run through the import-features/train/detect commands instead"
        )
    patch = int(feat_sec.get("patch_size", 64)) if feat_sec else 64
    try:
        hog = HogParams(
            cell_size=int(feat_sec.get("cell_size", 8)) if feat_sec else 8,
            block_size=int(feat_sec.get("block_size", 2)) if feat_sec else 2,
            block_stride=int(feat_sec.get("block_stride", 1)) if feat_sec else 1,
            orientations=int(feat_sec.get("orientations", 9)) if feat_sec else 9,
            patch_size=(patch, patch),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    train_sec = cp["train"] if cp.has_section("train") else {}
    det_sec = cp["detect"] if cp.has_section("detect") else {}

    def fval(sec, key, default):
        return float(sec.get(key, default)) if sec else default

    pipeline = PipelineParams(
        hog=hog,
        C=fval(train_sec, "C", 0.01),
        tol=fval(train_sec, "tol", 1e-4),
        max_epochs=int(fval(train_sec, "max_epochs", 1000)),
        negatives_per_image=int(fval(train_sec, "negatives_per_image", 6)),
        mining_rounds=int(fval(train_sec, "mining_rounds", 0)),
        mining_cap=int(fval(train_sec, "mining_cap", 50)),
        scales=tuple(float(v) for v in _split(det_sec.get("scales", "48, 64, 88, 116"))) if det_sec else (48, 64, 88, 116),
        aspect_ratios=tuple(float(v) for v in _split(det_sec.get("aspect_ratios", "0.7, 1.0, 1.4"))) if det_sec else (0.7, 1.0, 1.4),
        stride_fraction=fval(det_sec, "stride_fraction", 0.25),
        nms_threshold=fval(det_sec, "nms_threshold", 0.3),
        score_floor=fval(det_sec, "score_floor", -1.0),
    )

    test_sec = cp["test"] if cp.has_section("test") else {}
    test_manifest = None
    if test_sec and test_sec.get("manifest"):
        test_manifest = (path.parent / test_sec.get("manifest")).resolve()

    cells_sec = cp["cells"] if cp.has_section("cells") else {}
    kwargs = {}
    if kind == "cue_matrix":
        labels = tuple(_split(cells_sec.get("labels", ", ".join(CUE_LABELS)))) if cells_sec else CUE_LABELS
        for label in labels:
            CueConfig.from_label(label)  # validates
        kwargs["cue_labels"] = labels
    elif kind == "view_ablation":
        raw = cells_sec.get("view_sets", "front; front,side; front,side,intra") if cells_sec else "front; front,side; front,side,intra"
        sets = tuple(tuple(_split(group)) for group in raw.split(";") if group.strip())
        if any(not s for s in sets):
            raise ConfigError("view_ablation cells must each enable at least one view")
        kwargs["view_sets"] = sets
    elif kind == "shape_ablation":
        fr = tuple(float(v) for v in _split(cells_sec.get("fractions", "1.0, 0.5"))) if cells_sec else (1.0, 0.5)
        if any(not 0 < f <= 1 for f in fr):
            raise ConfigError("shape fractions must be in (0, 1]")
        kwargs["fractions"] = fr
    elif kind == "fewshot":
        kwargs["k_values"] = tuple(int(v) for v in _split(cells_sec.get("k", "5, 10, 20"))) if cells_sec else (5, 10, 20)
        rm = cells_sec.get("real_manifest") if cells_sec else None
        if rm:
            kwargs["real_manifest"] = (path.parent / rm).resolve()
    elif kind == "size_curve":
        sizes = tuple(int(v) for v in _split(cells_sec.get("sizes", ""))) if cells_sec else ()
        if not sizes:
            raise ConfigError("size_curve needs cells.sizes")
        if any(s < len(categories) for s in sizes):
            raise ConfigError("every size must be >= the number of categories")
        kwargs["sizes"] = sizes

    pools_root = (path.parent / data_sec.get("pools_root", "pools")).resolve()
    return ExperimentPlan(
        name=plan_sec.get("name", path.stem),
        kind=kind,
        seed=seed,
        pools_root=pools_root,
        dataset=spec,
        pipeline=pipeline,
        test_manifest=test_manifest,
        test_images_per_category=int(test_sec.get("images_per_category", 12)) if test_sec else 12,
        test_seed=int(test_sec.get("seed", 1)) if test_sec else 1,
        test_cue_label=test_sec.get("cue", "RR-RR") if test_sec else "RR-RR",
        **kwargs,
    )


def validate_assets(plan: ExperimentPlan) -> Pools:
    """Fail fast: resolve every referenced asset before any rendering."""
    if not plan.pools_root.is_dir():
        raise ConfigError(f"pools_root {plan.pools_root} is not a directory")
    pools = load_pools(plan.pools_root, categories=list(plan.dataset.categories))
    cues = [plan.dataset.cue, CueConfig.from_label(plan.test_cue_label)]
    if plan.kind == "cue_matrix":
        cues.extend(CueConfig.from_label(lb) for lb in plan.cue_labels)
    needs_bg = any(c.needs_background for c in cues)
    needs_tx = any(c.needs_texture for c in cues)
    for category in plan.dataset.categories:
        _, n_bg, n_tx = pools.counts(category)
        if needs_bg and n_bg == 0:
            raise ConfigError(f"category {category!r} has no backgrounds")
        if needs_tx and n_tx == 0:
            raise ConfigError(f"category {category!r} has no textures")
    if plan.test_manifest is not None and not plan.test_manifest.is_file():
        raise ConfigError(f"test manifest {plan.test_manifest} does not exist")
    if plan.kind == "fewshot":
        if plan.real_manifest is None:
            raise ConfigError("fewshot plans need cells.real_manifest")
        if not plan.real_manifest.is_file():
            raise ConfigError(f"real manifest {plan.real_manifest} does not exist")
    return pools


# --- pipeline internals ---------------------------------------------------------


class _FeatureBank:
    """Patch features plus the ground truth needed for negative filtering."""

    def __init__(self, featurizer: HogFeaturizer):
        self.featurizer = featurizer
        self.pids: list[str] = []
        self.vectors: dict[str, np.ndarray] = {}
        self.tags: dict[str, str] = {}
        self.categories: dict[str, str] = {}
        self.gt: dict[str, dict[str, list[BBox]]] = {}
        self._images: dict[str, np.ndarray] = {}

    def _image(self, path: str) -> np.ndarray:
        if path not in self._images:
            self._images[path] = read_image(path)
            if len(self._images) > 64:
                self._images.pop(next(iter(self._images)))
        return self._images[path]

    def add_manifest_gt(self, manifest: DatasetManifest):
        for entry in manifest.entries:
            resolved = str(manifest.resolve(entry))
            table = self.gt.setdefault(resolved, {})
            for gt in entry.boxes:
                table.setdefault(gt.category, []).append(gt.bbox)

    def add_patches(self, manifest: DatasetManifest, patches, tag: str):
        for patch in patches:
            entry_path = str(
                (manifest.root / patch.image) if manifest.root else Path(patch.image)
            )
            pid = patch_id(entry_path, patch.category, patch.bbox, tag)
            if pid in self.vectors:
                continue
            vec = self.featurizer.extract(self._image(entry_path), patch.bbox)
            self.pids.append(pid)
            self.vectors[pid] = vec.values
            self.tags[pid] = tag
            self.categories[pid] = patch.category

    def trainset(self, category: str) -> TrainSet:
        """Positives of the category vs. everything verified non-overlapping."""
        from .features import split_patch_id

        rows, labels, ids = [], [], []
        for pid in self.pids:
            image, _, box, tag = split_patch_id(pid)
            if tag == "pos" and self.categories[pid] == category:
                rows.append(self.vectors[pid])
                labels.append(1.0)
                ids.append(pid)
            else:
                cat_boxes = self.gt.get(image, {}).get(category, [])
                if all(iou(box, g) < 0.3 for g in cat_boxes):
                    rows.append(self.vectors[pid])
                    labels.append(-1.0)
                    ids.append(pid)
        return TrainSet(np.stack(rows), np.asarray(labels), ids)


def _collect_patches(
    manifest: DatasetManifest, pipe: PipelineParams, bank: _FeatureBank, seed: int
):
    source = grid_proposal_source(pipe.scales, pipe.aspect_ratios, pipe.stride_fraction)
    patches = sample_patches(manifest, pipe.negatives_per_image, source, seed=seed)
    bank.add_manifest_gt(manifest)
    bank.add_patches(manifest, patches.positives, "pos")
    bank.add_patches(manifest, patches.negatives, "neg")


def _mining_candidates(
    manifest: DatasetManifest,
    category: str,
    pipe: PipelineParams,
    featurizer: HogFeaturizer,
) -> dict[str, FeatureVector]:
    """Every negative-eligible grid proposal on the training images."""
    out: dict[str, FeatureVector] = {}
    for entry in manifest.entries:
        path = str(manifest.resolve(entry))
        img = read_image(path)
        h, w = img.shape[:2]
        gt_boxes = [g.bbox for g in entry.boxes if g.category == category]
        for box in grid_proposals(w, h, pipe.scales, pipe.aspect_ratios, pipe.stride_fraction):
            if all(iou(box, g) < 0.3 for g in gt_boxes):
                out[patch_id(path, category, box, "neg")] = featurizer.extract(img, box)
    return out


def train_models(
    manifests: list[DatasetManifest],
    categories: list[str],
    pipe: PipelineParams,
    seed: int,
) -> dict[str, LinearModel]:
    """Train one model per category from the union of the manifests' patches."""
    featurizer = HogFeaturizer(pipe.hog)
    bank = _FeatureBank(featurizer)
    for mi, manifest in enumerate(manifests):
        _collect_patches(manifest, pipe, bank, seed=derive_seed(seed, "patches", mi))
    models: dict[str, LinearModel] = {}
    for category in categories:
        data = bank.trainset(category)
        model = train_svm(
            data,
            C=pipe.C,
            tol=pipe.tol,
            max_epochs=pipe.max_epochs,
            seed=derive_seed(seed, "svm", category),
            category=category,
            space_id=featurizer.space_id,
        )
        if pipe.mining_rounds > 0:
            candidates: dict[str, FeatureVector] = {}
            for manifest in manifests:
                candidates.update(_mining_candidates(manifest, category, pipe, featurizer))
            model = mine_hard_negatives(
                model,
                data,
                candidates,
                rounds=pipe.mining_rounds,
                cap_per_round=pipe.mining_cap,
                seed=derive_seed(seed, "mine", category),
            )
        models[category] = model
    return models


def detect_manifest(
    manifest: DatasetManifest,
    models: dict[str, LinearModel],
    pipe: PipelineParams,
    feature_cache: dict | None = None,
) -> list[Detection]:
    """Run detection over every image of a manifest.

    ``feature_cache`` maps resolved image path to (boxes, vectors); the test
    set is shared across ablation cells, so featurizing it once pays off.
    """
    featurizer = HogFeaturizer(pipe.hog)
    cache = feature_cache if feature_cache is not None else {}
    out: list[Detection] = []
    for entry in manifest.entries:
        path = str(manifest.resolve(entry))
        if path not in cache:
            img = read_image(path)
            h, w = img.shape[:2]
            boxes = sorted(
                grid_proposals(w, h, pipe.scales, pipe.aspect_ratios, pipe.stride_fraction),
                key=lambda b: b.astuple(),
            )
            cache[path] = (boxes, [featurizer.extract(img, b) for b in boxes])
        boxes, vectors = cache[path]
        out.extend(
            score_proposals(
                boxes,
                vectors,
                models,
                nms_threshold=pipe.nms_threshold,
                score_floor=pipe.score_floor,
                image_path=entry.image,
            )
        )
    return out


# --- cells and runs -------------------------------------------------------------

def _safe_label(label: str) -> str:
    return label.replace(",", "+").replace(" ", "").replace("/", "_")


@dataclass
class _Cell:
    label: str
    spec: DatasetSpec | None  # virtual training spec; None for real-only cells
    extra_manifests: list[Path] = field(default_factory=list)


def _resolved_config(plan: ExperimentPlan, cell: _Cell) -> dict[str, str]:
    """Flat, fully-resolved key=value view of one cell's configuration."""
    p = plan.pipeline
    out = {
        "plan.name": plan.name,
        "plan.kind": plan.kind,
        "plan.seed": str(plan.seed),
        "cell.label": cell.label,
        "test.manifest": str(plan.test_manifest or "<virtual>"),
        "test.images_per_category": str(plan.test_images_per_category),
        "test.seed": str(plan.test_seed),
        "test.cue": plan.test_cue_label,
        "features.space_id": p.hog.space_id,
        "train.C": repr(p.C),
        "train.tol": repr(p.tol),
        "train.max_epochs": str(p.max_epochs),
        "train.negatives_per_image": str(p.negatives_per_image),
        "train.mining_rounds": str(p.mining_rounds),
        "train.sources": ",".join(
            (["virtual"] if cell.spec else []) + [m.name for m in cell.extra_manifests]
        ),
        "detect.scales": ",".join(repr(s) for s in p.scales),
        "detect.aspect_ratios": ",".join(repr(r) for r in p.aspect_ratios),
        "detect.stride_fraction": repr(p.stride_fraction),
        "detect.nms_threshold": repr(p.nms_threshold),
        "detect.score_floor": repr(p.score_floor),
    }
    spec = cell.spec
    if spec is not None:
        out.update(
            {
                "dataset.categories": ",".join(spec.categories),
                "dataset.images_per_category": str(spec.images_per_category),
                "dataset.model_fraction": repr(spec.models_per_category_fraction),
                "dataset.views": ",".join(spec.views_enabled),
                "dataset.cue": spec.cue.label,
                "dataset.image_size": f"{spec.cue.image_size[0]}x{spec.cue.image_size[1]}",
                "dataset.perturb_range_deg": repr(spec.cue.perturb_range_deg),
                "dataset.fill_fraction": repr(spec.cue.fill_fraction),
                "dataset.seed": str(spec.global_seed),
                # images per view documents how the constant total is split
                "dataset.images_per_view": repr(
                    spec.images_per_category / len(spec.views_enabled)
                ),
            }
        )
    return out


def _write_resolved(path: Path, resolved: dict[str, str]):
    cp = configparser.ConfigParser()
    cp["resolved"] = dict(sorted(resolved.items()))
    with open(path, "w") as fh:
        cp.write(fh)


def _assert_isolation(resolved: list[dict[str, str]], allowed: set[str]):
    """All cells must agree on every key outside the declared knob."""
    if len(resolved) < 2:
        return
    base = resolved[0]
    for other in resolved[1:]:
        for key in set(base) | set(other):
            if key in allowed or key == "cell.label" or key.startswith("cell."):
                continue
            if base.get(key) != other.get(key):
                raise ConfigError(
                    f"ablation isolation violated: {key} differs across cells "
                    f"({base.get(key)!r} vs {other.get(key)!r})"
                )


def _build_test_manifest(plan: ExperimentPlan, pools: Pools, out_dir: Path, threads: int) -> DatasetManifest:
    if plan.test_manifest is not None:
        return load_manifest(plan.test_manifest)
    cue = CueConfig.from_label(
        plan.test_cue_label,
        perturb_range_deg=plan.dataset.cue.perturb_range_deg,
        image_size=plan.dataset.cue.image_size,
        fill_fraction=plan.dataset.cue.fill_fraction,
    )
    spec = replace(
        plan.dataset,
        images_per_category=plan.test_images_per_category,
        cue=cue,
        global_seed=derive_seed(plan.test_seed, "test"),
    )
    manifest = build_virtual_dataset(spec, pools, out_dir / "test", threads=threads)
    save_manifest(out_dir / "test" / "manifest.json", manifest)
    return manifest


def _cells_for(plan: ExperimentPlan) -> list[_Cell]:
    base = plan.dataset
    if plan.kind == "cue_matrix":
        cells = []
        for label in plan.cue_labels:
            cue = CueConfig.from_label(
                label,
                view=base.cue.view,
                perturb_range_deg=base.cue.perturb_range_deg,
                image_size=base.cue.image_size,
                fill_fraction=base.cue.fill_fraction,
            )
            cells.append(_Cell(label, replace(base, cue=cue)))
        return cells
    if plan.kind == "view_ablation":
        return [
            _Cell(",".join(views), replace(base, views_enabled=views))
            for views in plan.view_sets
        ]
    if plan.kind == "shape_ablation":
        return [
            _Cell(f"frac-{fraction}", replace(base, models_per_category_fraction=fraction))
            for fraction in plan.fractions
        ]
    if plan.kind == "size_curve":
        return [
            _Cell(str(size), replace(base, images_per_category=max(1, size // len(base.categories))))
            for size in sorted(plan.sizes)
        ]
    if plan.kind == "fewshot":
        cells = []
        for k in plan.k_values:
            if k == 0:
                cells.append(_Cell("V", base))
                continue
            cells.append(_Cell(f"R{k}", None, extra_manifests=[Path(f"R{k}")]))
            cells.append(_Cell(f"R{k}+V", base, extra_manifests=[Path(f"R{k}")]))
        return cells
    raise ConfigError(f"unhandled plan kind {plan.kind!r}")


def run_plan(plan: ExperimentPlan, out_dir, threads: int = 1, parallel_cells: bool = False) -> ResultTable:
    """Run every cell of the plan and return the comparison table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pools = validate_assets(plan)
    test_manifest = _build_test_manifest(plan, pools, out_dir, threads)

    fewshot_manifests: dict[str, DatasetManifest] = {}
    if plan.kind == "fewshot":
        real = load_manifest(plan.real_manifest)
        for k in sorted(set(plan.k_values)):
            if k > 0:
                sub = subsample_fewshot(real, k, seed=derive_seed(plan.seed, "fewshot"))
                fewshot_manifests[f"R{k}"] = sub
                save_manifest(out_dir / f"R{k}.manifest.json", sub)

    cells = _cells_for(plan)
    resolved_list = []
    feature_cache: dict = {}

    def run_cell(cell: _Cell) -> tuple[str, EvalReport]:
        cell_dir = out_dir / "cells" / _safe_label(cell.label)
        cell_dir.mkdir(parents=True, exist_ok=True)
        resolved = _resolved_config(plan, cell)
        _write_resolved(cell_dir / "resolved.ini", resolved)
        resolved_list.append(resolved)

        manifests = []
        if cell.spec is not None:
            train_manifest = build_virtual_dataset(cell.spec, pools, cell_dir / "train", threads=threads)
            save_manifest(cell_dir / "train" / "manifest.json", train_manifest)
            manifests.append(train_manifest)
        for ref in cell.extra_manifests:
            manifests.append(fewshot_manifests[ref.name])

        models = train_models(
            manifests,
            list(plan.dataset.categories),
            plan.pipeline,
            seed=derive_seed(plan.seed, "train"),
        )
        model_dir = cell_dir / "models"
        model_dir.mkdir(exist_ok=True)
        for category, model in sorted(models.items()):
            save_model(model_dir / f"{category}.json", model)

        dets = detect_manifest(test_manifest, models, plan.pipeline, feature_cache)
        from .detect import save_detections_csv

        save_detections_csv(cell_dir / "detections.csv", dets)
        report = evaluate_detections(dets, test_manifest.gt_by_category())
        write_report_csv(cell_dir / "report.csv", report)
        write_report_json(cell_dir / "report.json", report)
        return cell.label, report

    if parallel_cells and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=min(4, len(cells))) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(cell) for cell in cells]

    allowed = {
        "cue_matrix": {"dataset.cue"},
        "view_ablation": {"dataset.views", "dataset.images_per_view"},
        "shape_ablation": {"dataset.model_fraction"},
        "size_curve": {"dataset.images_per_category", "dataset.images_per_view"},
        "fewshot": {"train.sources", "dataset.categories", "dataset.images_per_category",
                    "dataset.model_fraction", "dataset.views", "dataset.cue",
                    "dataset.image_size", "dataset.perturb_range_deg",
                    "dataset.fill_fraction", "dataset.seed", "dataset.images_per_view"},
    }[plan.kind]
    _assert_isolation(resolved_list, allowed)

    table = ResultTable(plan.name, list(plan.dataset.categories), rows)
    emit_report(table, out_dir, "csv")
    emit_report(table, out_dir, "markdown")
    return table


# shorthand runners mirroring the ablation protocols

def run_cue_matrix(plan: ExperimentPlan, out_dir, threads: int = 1) -> ResultTable:
    if plan.kind != "cue_matrix":
        raise ConfigError("plan kind must be cue_matrix")
    return run_plan(plan, out_dir, threads)


def run_view_ablation(plan: ExperimentPlan, out_dir, threads: int = 1) -> ResultTable:
    if plan.kind != "view_ablation":
        raise ConfigError("plan kind must be view_ablation")
    return run_plan(plan, out_dir, threads)


def run_shape_ablation(plan: ExperimentPlan, out_dir, threads: int = 1) -> ResultTable:
    if plan.kind != "shape_ablation":
        raise ConfigError("plan kind must be shape_ablation")
    return run_plan(plan, out_dir, threads)


def run_fewshot(plan: ExperimentPlan, out_dir, threads: int = 1) -> ResultTable:
    if plan.kind != "fewshot":
        raise ConfigError("plan kind must be fewshot")
    return run_plan(plan, out_dir, threads)


def run_size_curve(plan: ExperimentPlan, out_dir, threads: int = 1) -> ResultTable:
    if plan.kind != "size_curve":
        raise ConfigError("plan kind must be size_curve")
    return run_plan(plan, out_dir, threads)


# --- reporting -------------------------------------------------------------------

def _format_cells(table: ResultTable) -> tuple[list[str], list[list[str]]]:
    header = ["cell", *table.categories, "mAP"]
    rows = []
    for label, report in table.rows:
        row = [label]
        for category in table.categories:
            c = report.per_category.get(category)
            row.append(f"{c.ap:.4f}" if c else "")
        row.append(f"{report.mean_ap:.4f}")
        rows.append(row)
    return header, rows


def emit_report(table: ResultTable, out_dir, fmt: str = "csv") -> Path:
    """Write the comparison table; markdown mirrors the CSV values exactly."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header, rows = _format_cells(table)
    if fmt == "csv":
        import csv as _csv

        path = out_dir / "report.csv"
        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        return path
    if fmt == "markdown":
        path = out_dir / "report.md"
        lines = [
            "| " + " | ".join(header) + " |",
            "| " + " | ".join("---" for _ in header) + " |",
        ]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        path.write_text("\n".join(lines) + "\n")
        return path
    raise ConfigError(f"unknown report format {fmt!r}")
