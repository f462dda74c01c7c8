"""Deterministic synthetic detection dataset shared across test modules.

Ten images on a 640x480 canvas; every image carries ground truth in all
three size buckets (small < 32^2, medium, large >= 96^2), and predictions
are built as jittered copies of most ground truth plus planted duplicates,
false positives, and misses.
"""

from __future__ import annotations

import json

import numpy as np

from uwdet.postprocess import Detection, write_detections

CANVAS_W, CANVAS_H = 640, 480


def synthetic_dataset(seed=202, n_images=10, perfect=False):
    """Returns (gts_by_image, preds_by_image).

    ``gts_by_image``: {image_id: (boxes (N,4), labels (N,))}
    ``preds_by_image``: {image_id: [Detection, ...]}
    With ``perfect=True`` the predictions are the ground truth at score 1.
    """
    rng = np.random.default_rng(seed)
    gts, preds = {}, {}
    for i in range(n_images):
        image_id = f"img_{i:03d}"
        boxes = []
        # one box per size bucket, plus up to two extra of random size
        sides = [rng.uniform(8, 28), rng.uniform(40, 90), rng.uniform(100, 170)]
        for _ in range(int(rng.integers(0, 3))):
            sides.append(rng.uniform(10, 150))
        for s in sides:
            ar = rng.uniform(0.6, 1.6)
            w, h = s * np.sqrt(ar), s / np.sqrt(ar)
            cx = rng.uniform(w / 2 + 1, CANVAS_W - w / 2 - 1)
            cy = rng.uniform(h / 2 + 1, CANVAS_H - h / 2 - 1)
            boxes.append([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2])
        boxes = np.array(boxes)
        gts[image_id] = (boxes, np.zeros(len(boxes), dtype=np.int64))

        dets = []
        if perfect:
            dets = [Detection(box=b, score=1.0, class_id=0) for b in boxes]
        else:
            for b in boxes:
                if rng.random() < 0.85:  # detected, with jitter
                    w, h = b[2] - b[0], b[3] - b[1]
                    off = rng.normal(0, 0.04, 4) * np.array([w, h, w, h])
                    dets.append(Detection(box=b + off, score=float(rng.uniform(0.45, 0.99))))
                    if rng.random() < 0.3:  # duplicate detection
                        off2 = rng.normal(0, 0.1, 4) * np.array([w, h, w, h])
                        dets.append(Detection(box=b + off2, score=float(rng.uniform(0.2, 0.6))))
            for _ in range(int(rng.integers(0, 3))):  # false positives
                s = rng.uniform(15, 120)
                cx = rng.uniform(s, CANVAS_W - s)
                cy = rng.uniform(s, CANVAS_H - s)
                dets.append(
                    Detection(
                        box=(cx - s / 2, cy - s / 2, cx + s / 2, cy + s / 2),
                        score=float(rng.uniform(0.05, 0.7)),
                    )
                )
        preds[image_id] = dets
    return gts, preds


def write_coco_gt(path, gts_by_image) -> None:
    images = [{"id": iid, "width": CANVAS_W, "height": CANVAS_H} for iid in gts_by_image]
    annotations = []
    k = 1
    for iid, (boxes, labels) in gts_by_image.items():
        for b, lab in zip(boxes, labels):
            annotations.append(
                {
                    "id": k,
                    "image_id": iid,
                    "bbox": [float(b[0]), float(b[1]), float(b[2] - b[0]), float(b[3] - b[1])],
                    "category_id": int(lab),
                    "area": float((b[2] - b[0]) * (b[3] - b[1])),
                }
            )
            k += 1
    doc = {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 0, "name": "starfish"}],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def write_csv_gt(path, gts_by_image) -> None:
    lines = ["image_id,annotations"]
    for iid, (boxes, _) in gts_by_image.items():
        objs = [
            {
                "x": float(b[0]),
                "y": float(b[1]),
                "width": float(b[2] - b[0]),
                "height": float(b[3] - b[1]),
            }
            for b in boxes
        ]
        payload = json.dumps(objs).replace('"', '""')
        lines.append(f'{iid},"{payload}"')
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_fixture_files(directory, seed=202, n_images=10, perfect=False):
    """Write gt (JSON + CSV) and prediction files; returns their paths."""
    gts, preds = synthetic_dataset(seed=seed, n_images=n_images, perfect=perfect)
    gt_json = str(directory / "gt_coco.json")
    gt_csv = str(directory / "gt_boxes.csv")
    pred_path = str(directory / "preds.jsonl")
    write_coco_gt(gt_json, gts)
    write_csv_gt(gt_csv, gts)
    write_detections(pred_path, preds)
    return gt_json, gt_csv, pred_path, gts, preds


def as_oracle_structs(gts_by_image, preds_by_image):
    """Convert to the plain-list structures the brute-force oracle expects."""
    o_gts = {iid: [tuple(b) for b in boxes] for iid, (boxes, _) in gts_by_image.items()}
    o_preds = {
        iid: [(tuple(d.box), d.score) for d in dets] for iid, dets in preds_by_image.items()
    }
    return o_gts, o_preds
