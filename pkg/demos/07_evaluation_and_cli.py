"""
COCO-style evaluation and the command-line pipeline
===================================================

Builds a small annotated dataset with noisy predictions, scores it with the
seven-column report, then drives the CLI end to end: postprocess, evaluate,
and the six-combo ablation sweep.

Artifacts are written to demo_output/eval/.
"""

import json
import os

import numpy as np

from uwdet import full_report
from uwdet.cli import main
from uwdet.postprocess import Detection, write_detections

OUT = os.path.join("demo_output", "eval")
os.makedirs(OUT, exist_ok=True)
rng = np.random.default_rng(31)

# six images; each gets a small, a medium, and a large object
images, annotations, preds = [], [], {}
ann_id = 1
for i in range(6):
    iid = f"frame_{i:02d}"
    images.append({"id": iid, "width": 640, "height": 480})
    preds[iid] = []
    for side in (20.0, 64.0, 150.0):
        x = rng.uniform(5, 630 - side)
        y = rng.uniform(5, 470 - side)
        annotations.append({
            "id": ann_id, "image_id": iid,
            "bbox": [float(x), float(y), side, side], "category_id": 0,
        })
        ann_id += 1
        if rng.random() < 0.85:  # jittered detection
            dx, dy = rng.normal(0, side * 0.05, 2)
            preds[iid].append(Detection(
                box=(x + dx, y + dy, x + dx + side, y + dy + side),
                score=float(rng.uniform(0.5, 1.0)),
            ))
    if rng.random() < 0.5:  # a false positive now and then
        preds[iid].append(Detection(box=(5, 5, 60, 60), score=float(rng.uniform(0.1, 0.5))))

gt_path = os.path.join(OUT, "gt.json")
pred_path = os.path.join(OUT, "preds.jsonl")
with open(gt_path, "w") as fh:
    json.dump({"images": images, "annotations": annotations,
               "categories": [{"id": 0, "name": "starfish"}]}, fh)
write_detections(pred_path, preds)

report = full_report(pred_path, gt_path)
print("seven-column report on the noisy predictions:")
for name in ("ap", "ap50", "ap75", "ar", "ar_small", "ar_medium", "ar_large"):
    print(f"  {name:<10} {getattr(report, name):.4f}")

# the same flow through the CLI: config file, postprocess, evaluate, ablate
cfg_path = os.path.join(OUT, "config.json")
with open(cfg_path, "w") as fh:
    json.dump({
        "schema_version": 1,
        "refine": {"max_iterations": 50},
        "paths": {"annotations": "gt.json", "predictions": "preds.jsonl",
                  "output_dir": "run"},
        "seed": 1,
    }, fh)

print("\n$ uwdet postprocess --config", cfg_path)
assert main(["postprocess", "--config", cfg_path]) == 0
print("\n$ uwdet evaluate --config", cfg_path, "--input", os.path.join(OUT, "run", "detections.jsonl"))
assert main(["evaluate", "--config", cfg_path,
             "--input", os.path.join(OUT, "run", "detections.jsonl")]) == 0
print("\n$ uwdet ablate --config", cfg_path)
assert main(["ablate", "--config", cfg_path]) == 0
print("\nartifacts under", os.path.join(OUT, "run") + os.sep,
      "(manifest.json, report.json, ablation_summary.json, ...)")
