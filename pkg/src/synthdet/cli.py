"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 asset error, 4 runtime
error.
"""

import argparse
import sys
from pathlib import Path

from .errors import AssetError, ConfigError, SynthdetError, EXIT_RUNTIME


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    parser.add_argument("--out-dir", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument(
        "--format", choices=("csv", "markdown", "both"), default="both",
        help="report format for experiment tables",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthdet",
        description="Render synthetic training images from CAD models, train "
        "linear detectors, and evaluate them VOC-style.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one model under a cue configuration")
    _add_common(p)
    p.add_argument("--model", type=Path, required=True, help="OBJ file")
    p.add_argument("--cue", default="RR-RR", help="cell label, e.g. RR-RR or W-UG")
    p.add_argument("--view", default="front", choices=("front", "side", "intra"))
    p.add_argument("--bg", type=Path, help="background image (required unless bg is white)")
    p.add_argument("--texture", type=Path, help="texture image (required for real texture)")
    p.add_argument("--size", default="256x256", help="output WxH")
    p.add_argument("--fill", type=float, default=0.7, help="object fill fraction")
    p.add_argument("--perturb", type=float, default=0.0, help="pose perturbation range (deg)")
    p.add_argument("--out", type=Path, required=True, help="output image (.ppm or .png)")

    p = sub.add_parser("make-toys", help="write a procedural toy asset pool")
    _add_common(p)
    p.add_argument("--categories", type=int, default=3)
    p.add_argument("--models-per-category", type=int, default=4)
    p.add_argument("--backgrounds", type=int, default=6)
    p.add_argument("--textures", type=int, default=4)

    p = sub.add_parser("gen-dataset", help="render a virtual training dataset")
    _add_common(p)
    p.add_argument("--pools", type=Path, required=True, help="asset pool root")
    p.add_argument("--categories", required=True, help="comma-separated category list")
    p.add_argument("--images-per-category", type=int, default=100)
    p.add_argument("--cue", default="RR-RR")
    p.add_argument("--views", default="front,side,intra")
    p.add_argument("--size", default="256x256")
    p.add_argument("--fill", type=float, default=0.7)
    p.add_argument("--perturb", type=float, default=15.0)
    p.add_argument("--model-fraction", type=float, default=1.0)

    p = sub.add_parser("extract-features", help="HOG features for a manifest's patches")
    _add_common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--negatives-per-image", type=int, default=6)
    p.add_argument("--scales", default="48,64,88,116")
    p.add_argument("--out", type=Path, required=True, help="output .feat file")

    p = sub.add_parser("import-features", help="validate/convert an external feature table")
    _add_common(p)
    p.add_argument("--file", type=Path, required=True)
    p.add_argument("--l2", action="store_true", help="L2-normalize every vector")
    p.add_argument("--out", type=Path, help="rewrite the (possibly normalized) table here")

    p = sub.add_parser("train", help="train per-category SVMs from a feature file")
    _add_common(p)
    p.add_argument("--features", type=Path, required=True, help=".feat file with pos/neg patch ids")
    p.add_argument("--C", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-epochs", type=int, default=1000)

    p = sub.add_parser("detect", help="run detection over a manifest")
    _add_common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True, help="directory of model JSON files")
    p.add_argument("--proposals", type=Path, help="external proposals CSV (default: grid)")
    p.add_argument("--scales", default="48,64,88,116")
    p.add_argument("--nms", type=float, default=0.3)
    p.add_argument("--score-floor", type=float, default=-1.0)
    p.add_argument("--out", type=Path, required=True, help="detections CSV")

    p = sub.add_parser("eval", help="score detections against a manifest")
    _add_common(p)
    p.add_argument("--detections", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out", type=Path, required=True, help="report CSV (JSON written beside)")

    p = sub.add_parser("experiment", help="run an ablation plan")
    _add_common(p)
    p.add_argument("plan", type=Path, help="INI plan file")
    p.add_argument("--parallel-cells", action="store_true")

    return parser


def _cmd_render(args) -> int:
    from .image import read_image, write_image
    from .mesh import ViewPreset, parse_obj
    from .render import CueConfig, render

    width, height = (int(v) for v in args.size.lower().split("x"))
    cue = CueConfig.from_label(
        args.cue,
        view=ViewPreset.named(args.view),
        perturb_range_deg=args.perturb,
        image_size=(width, height),
        fill_fraction=args.fill,
    )
    mesh = parse_obj(args.model.read_text(), name=args.model.stem)
    bg = read_image(args.bg) if args.bg else None
    texture = read_image(args.texture) if args.texture else None
    result = render(mesh, cue, bg=bg, texture=texture, seed=args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_image(args.out, result.rgb)
    print(f"wrote {args.out} bbox={result.bbox.astuple()}")
    return 0


def _cmd_make_toys(args) -> int:
    from .toydata import make_pool

    categories = make_pool(
        args.out_dir,
        n_categories=args.categories,
        models_per_category=args.models_per_category,
        n_backgrounds=args.backgrounds,
        n_textures=args.textures,
        seed=args.seed,
    )
    print(f"wrote toy pool with categories: {', '.join(categories)}")
    return 0


def _cmd_gen_dataset(args) -> int:
    from .dataset import DatasetSpec, build_virtual_dataset, load_pools, save_manifest
    from .render import CueConfig

    width, height = (int(v) for v in args.size.lower().split("x"))
    categories = tuple(c.strip() for c in args.categories.split(",") if c.strip())
    cue = CueConfig.from_label(
        args.cue,
        perturb_range_deg=args.perturb,
        image_size=(width, height),
        fill_fraction=args.fill,
    )
    spec = DatasetSpec(
        categories=categories,
        images_per_category=args.images_per_category,
        models_per_category_fraction=args.model_fraction,
        views_enabled=tuple(v.strip() for v in args.views.split(",") if v.strip()),
        cue=cue,
        global_seed=args.seed,
    )
    pools = load_pools(args.pools, categories=list(categories))
    manifest = build_virtual_dataset(spec, pools, args.out_dir, threads=args.threads)
    save_manifest(args.out_dir / "manifest.json", manifest)
    print(f"rendered {len(manifest)} images into {args.out_dir}")
    return 0


def _cmd_extract_features(args) -> int:
    from .dataset import grid_proposal_source, load_manifest, sample_patches
    from .features import HogFeaturizer, export_features, patch_id
    from .image import read_image

    manifest = load_manifest(args.manifest)
    scales = [float(s) for s in args.scales.split(",")]
    patches = sample_patches(
        manifest,
        args.negatives_per_image,
        grid_proposal_source(scales),
        seed=args.seed,
    )
    featurizer = HogFeaturizer()
    table = {}
    cache = {}
    for group, tag in ((patches.positives, "pos"), (patches.negatives, "neg")):
        for patch in group:
            resolved = str((manifest.root / patch.image) if manifest.root else patch.image)
            if resolved not in cache:
                cache[resolved] = read_image(resolved)
            pid = patch_id(patch.image, patch.category, patch.bbox, tag)
            table[pid] = featurizer.extract(cache[resolved], patch.bbox)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    export_features(args.out, table)
    print(f"wrote {len(table)} feature vectors ({featurizer.space_id}) to {args.out}")
    return 0


def _cmd_import_features(args) -> int:
    from .features import export_features, import_features, l2_normalize

    table = import_features(args.file)
    first = next(iter(table.values()))
    print(f"{args.file}: {len(table)} vectors, dim {len(first)}, space {first.space_id!r}")
    if args.l2:
        table = {pid: l2_normalize(vec) for pid, vec in table.items()}
    if args.out:
        export_features(args.out, table)
        print(f"wrote {args.out}")
    return 0


def _cmd_train(args) -> int:
    import numpy as np

    from .detector import TrainSet, save_model, train_svm
    from .features import import_features, split_patch_id

    table = import_features(args.features)
    space_id = next(iter(table.values())).space_id
    by_category: dict[str, dict[str, list]] = {}
    for pid, vec in table.items():
        _, category, _, tag = split_patch_id(pid)
        slot = by_category.setdefault(category, {"pos": [], "neg": []})
        slot[tag].append((pid, vec.values))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for category in sorted(by_category):
        pos = by_category[category]["pos"]
        neg = by_category[category]["neg"]
        # positives of the other categories also serve as negatives
        for other, slot in by_category.items():
            if other != category:
                neg = neg + slot["pos"]
        rows = [v for _, v in pos] + [v for _, v in neg]
        labels = [1.0] * len(pos) + [-1.0] * len(neg)
        ids = [p for p, _ in pos] + [p for p, _ in neg]
        data = TrainSet(np.stack(rows), np.asarray(labels), ids)
        model = train_svm(
            data, C=args.C, tol=args.tol, max_epochs=args.max_epochs,
            seed=args.seed, category=category, space_id=space_id,
        )
        out = args.out_dir / f"{category}.json"
        save_model(out, model)
        print(f"{category}: n={len(labels)} objective={model.train['objective']:.6f} -> {out}")
    return 0


def _cmd_detect(args) -> int:
    from .dataset import load_manifest
    from .detect import detect_image, load_proposals_csv, save_detections_csv
    from .detector import load_model
    from .features import HogFeaturizer
    from .image import read_image

    manifest = load_manifest(args.manifest)
    models = {}
    for model_path in sorted(args.models.glob("*.json")):
        model = load_model(model_path)
        models[model.category] = model
    if not models:
        raise AssetError(f"no model files under {args.models}")
    external = load_proposals_csv(args.proposals) if args.proposals else None
    scales = [float(s) for s in args.scales.split(",")]
    featurizer = HogFeaturizer()
    all_dets = []
    from .detect import grid_proposals

    for entry in manifest.entries:
        img = read_image(manifest.resolve(entry))
        h, w = img.shape[:2]
        proposals = (
            external.get(entry.image, [])
            if external is not None
            else grid_proposals(w, h, scales)
        )
        all_dets.extend(
            detect_image(
                img, models, featurizer, proposals,
                nms_threshold=args.nms, score_floor=args.score_floor,
                image_path=entry.image,
            )
        )
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_detections_csv(args.out, all_dets)
    print(f"wrote {len(all_dets)} detections to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    from .dataset import load_manifest
    from .detect import load_detections_csv
    from .evaluation import evaluate_detections, write_report_csv, write_report_json

    manifest = load_manifest(args.manifest)
    dets = load_detections_csv(args.detections)
    report = evaluate_detections(dets, manifest.gt_by_category(), iou_threshold=args.iou)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_report_csv(args.out, report)
    write_report_json(args.out.with_suffix(".json"), report)
    for category in sorted(report.per_category):
        print(f"{category}: AP={report.per_category[category].ap:.4f}")
    print(f"mAP={report.mean_ap:.4f}")
    return 0


def _cmd_experiment(args) -> int:
    from .experiment import emit_report, parse_plan, run_plan

    plan = parse_plan(args.plan)
    table = run_plan(plan, args.out_dir, threads=args.threads, parallel_cells=args.parallel_cells)
    if args.format in ("csv", "both"):
        emit_report(table, args.out_dir, "csv")
    if args.format in ("markdown", "both"):
        emit_report(table, args.out_dir, "markdown")
    for label, report in table.rows:
        print(f"{label}: mAP={report.mean_ap:.4f}")
    return 0


_COMMANDS = {
    "render": _cmd_render,
    "make-toys": _cmd_make_toys,
    "gen-dataset": _cmd_gen_dataset,
    "extract-features": _cmd_extract_features,
    "import-features": _cmd_import_features,
    "train": _cmd_train,
    "detect": _cmd_detect,
    "eval": _cmd_eval,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.exit_code
    except AssetError as exc:
        print(f"asset error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SynthdetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
