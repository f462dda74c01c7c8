"""
Screening and fusion: DIoU-NMS, weighted boxes fusion, iterative refinement
===========================================================================

A cloud of overlapping detections around two objects collapses step by step:
suppression drops dominated boxes, fusion averages the survivors of each
cluster, and the refinement loop alternates the two until nothing moves.
"""

import numpy as np

from uwdet import Detection, RefineConfig, diou_nms, iterative_refine, wbf

rng = np.random.default_rng(21)


def jittered(center, size, n, score_lo=0.4):
    out = []
    for _ in range(n):
        cx, cy = center + rng.normal(0, 2.0, 2)
        w, h = size * rng.uniform(0.9, 1.1, 2)
        out.append(Detection(box=(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2),
                             score=float(rng.uniform(score_lo, 1.0))))
    return out


cloud = jittered(np.array([60.0, 60.0]), 30.0, 7) + jittered(np.array([160.0, 90.0]), 40.0, 5)
low = Detection(box=(200.0, 20.0, 230.0, 45.0), score=0.08)  # stray low-confidence box
cloud.append(low)
print(f"input cloud: {len(cloud)} detections around two objects (plus one stray)")

kept = diou_nms(cloud, thresh=0.45)
print(f"diou_nms @0.45 keeps {len(kept)}:")
for d in kept:
    print(f"  box={np.round(d.box, 1)} score={d.score:.2f}")

fused = wbf([cloud], iou_thresh=0.55)
print(f"\nwbf @0.55 fuses the raw cloud into {len(fused)} boxes:")
for d in fused:
    print(f"  box={np.round(d.box, 1)} score={d.score:.2f}")

cfg = RefineConfig(score_floor=0.1)
refined, iterations = iterative_refine(cloud, cfg)
print(f"\niterative_refine: stable after {iterations} iteration(s), "
      f"{len(refined)} boxes, score floor dropped the stray:")
for d in refined:
    print(f"  box={np.round(d.box, 1)} score={d.score:.2f}")
