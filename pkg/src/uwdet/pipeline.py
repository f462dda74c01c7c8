"""Run orchestration: ingestion, the postprocess stage chain, evaluation,
rendering, benchmarking, and the ablation sweep.

Every postprocess run writes a manifest sufficient to reproduce it: the
resolved config echo and its hash, the seed, per-stage record counts,
refinement iteration counts, demo-stage checksums, and the output file hash.
Wall-clock timings are recorded under a separate key that is excluded from
the manifest's content hash, so two identical runs produce identical
content-hashed artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from statistics import median

import numpy as np

from . import blocks
from .anchors import generate_grid
from .boxes import iou_matrix
from .config import ConfigError, PipelineConfig
from .evaluation import evaluate_detections, interpolated_pr_curve, IOU_THRESHOLDS
from .ingest import InputError, load_annotations
from .postprocess import (
    Detection,
    detections_to_jsonl,
    diou_nms,
    iterative_refine,
    read_detections,
    wbf,
    write_detections,
)
from .preprocess import LabeledImage, denoise, mosaic, read_image, segment_water_boundary, write_image, write_pgm
from .render import render_overlay, render_svg

__all__ = [
    "StageError",
    "run_postprocess",
    "evaluate",
    "ingest",
    "render_detections",
    "bench",
    "ablate",
    "ABLATION_LADDER",
]

MANIFEST_NAME = "manifest.json"
DETECTIONS_NAME = "detections.jsonl"

# cumulative Table-style ladder over the pipeline's toggleable stages,
# starting from the screening-only baseline
ABLATION_LADDER = (
    ("baseline", ()),
    ("csp2", ("csp2_demo",)),
    ("csp2_se", ("csp2_demo", "se_demo")),
    ("csp2_se_anchors", ("csp2_demo", "se_demo", "multiscale_anchors")),
    ("csp2_se_anchors_wbf", ("csp2_demo", "se_demo", "multiscale_anchors", "wbf")),
    (
        "full",
        ("csp2_demo", "se_demo", "multiscale_anchors", "wbf", "iterative_refinement"),
    ),
)


class StageError(Exception):
    """A pipeline stage failed; the message names the stage."""


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _require_output_dir(config: PipelineConfig, output_dir) -> str:
    out = output_dir or config.paths.get("output_dir")
    if not out:
        raise ConfigError("no output directory: set paths.output_dir or pass --output")
    os.makedirs(out, exist_ok=True)
    return str(out)


def _load_predictions(config: PipelineConfig, predictions_path) -> dict:
    path = predictions_path or config.paths.get("predictions")
    if not path:
        raise ConfigError("no predictions file: set paths.predictions or pass --input")
    if not os.path.exists(path):
        raise InputError(f"predictions file not found: {path}")
    try:
        return read_detections(path)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _list_image_files(images_dir):
    exts = (".png", ".ppm", ".pgm")
    try:
        names = sorted(os.listdir(images_dir))
    except OSError as exc:
        raise InputError(f"cannot list images directory {images_dir}: {exc}") from exc
    return [os.path.join(images_dir, n) for n in names if n.lower().endswith(exts)]


def _image_stages(config: PipelineConfig, out_dir: str, manifest: dict, timings: dict) -> None:
    flags = config.flags
    if not (flags["denoise"] or flags["segmentation"] or flags["mosaic"]):
        return
    images_dir = config.paths.get("images")
    if not images_dir:
        raise ConfigError("image stages enabled but paths.images is not set")
    files = _list_image_files(images_dir)
    artifacts = {}

    if flags["denoise"]:
        t0 = time.perf_counter()
        dn_dir = os.path.join(out_dir, "denoised")
        os.makedirs(dn_dir, exist_ok=True)
        written = []
        for path in files:
            img = denoise(read_image(path), window=3)
            dst = os.path.join(dn_dir, os.path.basename(path))
            write_image(dst, img)
            written.append(os.path.basename(path))
        artifacts["denoise"] = {"count": len(written), "files": written}
        timings["denoise"] = time.perf_counter() - t0

    if flags["segmentation"]:
        t0 = time.perf_counter()
        mask_dir = os.path.join(out_dir, "masks")
        os.makedirs(mask_dir, exist_ok=True)
        thresholds = {}
        for path in files:
            mask, thresh = segment_water_boundary(read_image(path))
            stem = os.path.splitext(os.path.basename(path))[0]
            write_pgm(os.path.join(mask_dir, stem + ".pgm"), mask * 255)
            thresholds[os.path.basename(path)] = thresh
        artifacts["segmentation"] = {"thresholds": thresholds}
        timings["segmentation"] = time.perf_counter() - t0

    if flags["mosaic"]:
        t0 = time.perf_counter()
        if len(files) < 4:
            raise StageError("stage 'mosaic' failed: needs at least 4 images")
        items = [LabeledImage(image=read_image(p)) for p in files[:4]]
        canvas = mosaic(items, 640, 640, seed=config.seed)
        write_image(os.path.join(out_dir, "mosaic.png"), canvas.image)
        artifacts["mosaic"] = {
            "inputs": [os.path.basename(p) for p in files[:4]],
            "canvas_sha256": hashlib.sha256(canvas.image.tobytes()).hexdigest(),
        }
        timings["mosaic"] = time.perf_counter() - t0

    manifest["image_artifacts"] = artifacts


def _demo_stages(config: PipelineConfig, per_image: dict, manifest: dict, timings: dict) -> None:
    demos = {}
    rng = np.random.default_rng(config.seed)

    if config.flags["se_demo"]:
        t0 = time.perf_counter()
        x = rng.normal(size=(1, 8, 16, 16))
        params = blocks.SEParams.random(8, 4, rng)
        out = blocks.se_block(x, params)
        demos["se"] = {
            "output_sha256": hashlib.sha256(out.tobytes()).hexdigest(),
            "output_mean": float(out.mean()),
        }
        timings["se_demo"] = time.perf_counter() - t0

    if config.flags["csp2_demo"]:
        t0 = time.perf_counter()
        x = rng.normal(size=(1, 8, 16, 16))
        params = blocks.Csp2Params.random(8, rng)
        out = blocks.csp2_block(x, params)
        demos["csp2"] = {
            "output_shape": list(out.shape),
            "output_sha256": hashlib.sha256(out.tobytes()).hexdigest(),
        }
        timings["csp2_demo"] = time.perf_counter() - t0

    if config.flags["multiscale_anchors"]:
        t0 = time.perf_counter()
        grid = generate_grid(config.anchor_spec, 640, 640, config.anchor_stride)
        all_boxes = [d.box for dets in per_image.values() for d in dets]
        if all_boxes:
            best = iou_matrix(np.array(all_boxes), grid.anchors).max(axis=1)
            coverage = {
                "detections": len(all_boxes),
                "mean_best_anchor_iou": float(best.mean()),
                "frac_best_iou_ge_05": float((best >= 0.5).mean()),
            }
        else:
            coverage = {"detections": 0}
        demos["multiscale_anchors"] = {
            "num_anchors": len(grid),
            "grid": [grid.grid_w, grid.grid_h],
            **coverage,
        }
        timings["multiscale_anchors"] = time.perf_counter() - t0

    if demos:
        manifest["demos"] = demos


def run_postprocess(config: PipelineConfig, predictions_path=None, output_dir=None):
    """Apply the enabled stage chain and write detections plus a manifest.

    Content stages run in fixed order: diou_nms, then wbf, then iterative
    refinement.  With every flag off the parsed detections pass through
    unchanged.  Returns ``(per_image, manifest, detections_path)``.
    """
    out_dir = _require_output_dir(config, output_dir)
    per_image = _load_predictions(config, predictions_path)
    input_count = sum(len(v) for v in per_image.values())

    manifest = {
        "schema_version": 1,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "input_records": input_count,
    }
    timings: dict = {}

    _image_stages(config, out_dir, manifest, timings)
    _demo_stages(config, per_image, manifest, timings)

    stages = []
    refine_iterations = {}

    def run_stage(name, enabled, fn):
        nonlocal per_image
        record = {"name": name, "enabled": bool(enabled)}
        if enabled:
            t0 = time.perf_counter()
            try:
                per_image = {iid: fn(iid, dets) for iid, dets in per_image.items()}
            except Exception as exc:
                raise StageError(f"stage {name!r} failed: {exc}") from exc
            timings[name] = time.perf_counter() - t0
            record["output_records"] = sum(len(v) for v in per_image.values())
        stages.append(record)

    run_stage(
        "diou_nms",
        config.flags["diou_nms"],
        lambda iid, dets: diou_nms(dets, config.refine.nms_diou_thresh),
    )
    run_stage(
        "wbf",
        config.flags["wbf"],
        lambda iid, dets: wbf([dets], config.refine.wbf_iou_thresh),
    )

    def _refine(iid, dets):
        refined, iters = iterative_refine(dets, config.refine)
        refine_iterations[iid] = iters
        return refined

    run_stage("iterative_refinement", config.flags["iterative_refinement"], _refine)

    manifest["stages"] = stages
    if refine_iterations:
        manifest["refine_iterations"] = refine_iterations
        if max(refine_iterations.values()) > config.refine.max_iterations:
            raise StageError("stage 'iterative_refinement' failed: iteration cap exceeded")

    out_path = os.path.join(out_dir, DETECTIONS_NAME)
    payload = detections_to_jsonl(per_image)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(payload)
    manifest["output_records"] = sum(len(v) for v in per_image.values())
    manifest["output_file"] = DETECTIONS_NAME
    manifest["output_sha256"] = _sha256_text(payload)
    manifest["content_hash"] = _sha256_text(_canonical(manifest))
    manifest["timings_seconds"] = timings  # excluded from the content hash

    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return per_image, manifest, out_path


def evaluate(config: PipelineConfig, predictions_path=None, output_dir=None, fmt=None):
    """Seven-column report plus per-threshold and PR-curve files."""
    out_dir = _require_output_dir(config, output_dir)
    gt_path = config.paths.get("annotations")
    if not gt_path:
        raise ConfigError("no annotations file: set paths.annotations")
    gts = load_annotations(gt_path, fmt=fmt or config.annotation_format)
    per_image = _load_predictions(config, predictions_path)

    report = evaluate_detections(per_image, gts)
    doc = {"config_hash": config.config_hash(), **report.to_dict()}
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)

    lines = ["metric            value", "-" * 24]
    for name in ("ap", "ap50", "ap75", "ar", "ar_small", "ar_medium", "ar_large"):
        lines.append(f"{name:<14} {getattr(report, name):>9.4f}")
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    with open(os.path.join(out_dir, "ap_per_threshold.csv"), "w", encoding="utf-8") as fh:
        fh.write("iou_threshold,ap\n")
        for t, ap in zip(IOU_THRESHOLDS, report.per_threshold_ap):
            fh.write(f"{t:.2f},{ap:.6f}\n")

    recall, precision = interpolated_pr_curve(per_image, gts, thresh=0.5)
    with open(os.path.join(out_dir, "pr_curve_50.csv"), "w", encoding="utf-8") as fh:
        fh.write("recall,precision\n")
        for r, p in zip(recall, precision):
            fh.write(f"{r:.2f},{p:.6f}\n")
    return report


def ingest(config: PipelineConfig, input_path=None, fmt=None, output_dir=None) -> dict:
    """Normalize annotations and write them as corner-form JSON."""
    out_dir = _require_output_dir(config, output_dir)
    path = input_path or config.paths.get("annotations")
    if not path:
        raise ConfigError("no annotations file: set paths.annotations or pass --input")
    gts = load_annotations(path, fmt=fmt or config.annotation_format)
    doc = {
        iid: [
            {
                "x_min": float(b[0]), "y_min": float(b[1]),
                "x_max": float(b[2]), "y_max": float(b[3]),
                "class_id": int(lab),
            }
            for b, lab in zip(boxes, labels)
        ]
        for iid, (boxes, labels) in gts.items()
    }
    out_path = os.path.join(out_dir, "annotations_normalized.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return {
        "images": len(doc),
        "boxes": sum(len(v) for v in doc.values()),
        "output": out_path,
    }


def _find_image_file(images_dir: str, image_id: str):
    for candidate in (image_id, image_id + ".png", image_id + ".ppm", image_id + ".pgm"):
        path = os.path.join(images_dir, candidate)
        if os.path.exists(path):
            return path
    return None


def render_detections(config: PipelineConfig, predictions_path=None, output_dir=None) -> dict:
    """Write an annotated raster (PNG) and an SVG per image with detections."""
    out_dir = _require_output_dir(config, output_dir)
    per_image = _load_predictions(config, predictions_path)
    images_dir = config.paths.get("images")
    if not images_dir:
        raise ConfigError("rendering needs paths.images")
    rendered = []
    for image_id in sorted(per_image):
        dets = per_image[image_id]
        src = _find_image_file(images_dir, image_id)
        if src is None:
            raise InputError(f"no image file for id {image_id!r} under {images_dir}")
        img = read_image(src)
        overlay = render_overlay(img, dets)
        stem = os.path.splitext(os.path.basename(src))[0]
        write_image(os.path.join(out_dir, stem + "_overlay.png"), overlay)
        svg = render_svg(img.shape[1], img.shape[0], dets)
        with open(os.path.join(out_dir, stem + "_overlay.svg"), "w", encoding="utf-8") as fh:
            fh.write(svg)
        rendered.append(image_id)
    return {"rendered": rendered, "output_dir": out_dir}


def _synthetic_cloud(n: int, seed: int):
    """Jittered detections around n/8 object centers on a 1000px canvas."""
    rng = np.random.default_rng(seed)
    n_obj = max(1, n // 8)
    centers = rng.uniform(50, 950, (n_obj, 2))
    sizes = rng.uniform(15, 60, (n_obj, 2))
    dets = []
    for i in range(n):
        cx, cy = centers[i % n_obj]
        w, h = sizes[i % n_obj] * rng.uniform(0.9, 1.1, 2)
        jx, jy = rng.normal(0, 3, 2)
        dets.append(
            Detection(
                box=(cx + jx - w / 2, cy + jy - h / 2, cx + jx + w / 2, cy + jy + h / 2),
                score=float(rng.uniform(0.05, 1.0)),
            )
        )
    return dets


def bench(config: PipelineConfig, sizes=(100, 1000, 10000), repeats=5, output_dir=None):
    """Median wall time per stage over synthetic detection clouds."""
    rows = []
    for n in sizes:
        cloud = _synthetic_cloud(int(n), seed=config.seed + int(n))
        stage_fns = {
            "diou_nms": lambda: diou_nms(cloud, config.refine.nms_diou_thresh),
            "wbf": lambda: wbf([cloud], config.refine.wbf_iou_thresh),
            "iterative_refine": lambda: iterative_refine(cloud, config.refine),
        }
        for name, fn in stage_fns.items():
            samples = []
            for _ in range(max(5, repeats)):
                t0 = time.perf_counter()
                fn()
                samples.append(time.perf_counter() - t0)
            rows.append({"stage": name, "n": int(n), "median_seconds": median(samples)})
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        with open(os.path.join(output_dir, "bench.json"), "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return rows


def ablate(config: PipelineConfig, predictions_path=None, output_dir=None):
    """Run the cumulative flag ladder; one postprocess + evaluate per combo."""
    out_dir = _require_output_dir(config, output_dir)
    summaries = []
    for name, extra_flags in ABLATION_LADDER:
        flags = {flag: False for flag in ("wbf", "iterative_refinement", "se_demo",
                                          "csp2_demo", "multiscale_anchors")}
        flags["diou_nms"] = True  # screening baseline present in every combo
        for flag in extra_flags:
            flags[flag] = True
        combo_cfg = config.with_overrides(flags=flags)
        combo_dir = os.path.join(out_dir, name)
        _, manifest, det_path = run_postprocess(
            combo_cfg, predictions_path=predictions_path, output_dir=combo_dir
        )
        report = evaluate(combo_cfg, predictions_path=det_path, output_dir=combo_dir)
        summaries.append(
            {
                "combo": name,
                "flags": {k: v for k, v in combo_cfg.flags.items() if v},
                "output_records": manifest["output_records"],
                "report": report.to_dict(),
            }
        )
    with open(os.path.join(out_dir, "ablation_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summaries, fh, indent=2, sort_keys=True)
    return summaries
