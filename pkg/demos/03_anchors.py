"""
Twelve-shape anchor family and target assignment
================================================

Four base areas crossed with three aspect ratios give twelve anchor shapes;
tiling them over a stride grid and matching against ground truth shows the
threshold bands and the force-match guarantee.
"""

import numpy as np

from uwdet import AnchorSpec, anchor_shapes, assign_targets, generate_grid
from uwdet.anchors import IGNORE, NEGATIVE

spec = AnchorSpec()
shapes = anchor_shapes(spec)
print("the 12 anchor shapes (width x height), area-major:")
k = 0
for area in spec.base_areas:
    row = []
    for ratio in spec.aspect_ratios:
        w, h = shapes[k]
        row.append(f"{w:6.1f}x{h:<6.1f}")
        k += 1
    print(f"  area {int(area):>6}: " + "  ".join(row))

grid = generate_grid(spec, image_w=256, image_h=256, stride=32)
print()
print(f"grid: {grid.grid_w}x{grid.grid_h} cells at stride {grid.stride} "
      f"-> {len(grid)} anchors")

# two well-sized targets and one tiny one that no anchor reaches at 0.5 IoU
gts = np.array([
    [30.0, 30.0, 95.0, 95.0],
    [140.0, 60.0, 205.0, 190.0],
    [10.0, 200.0, 18.0, 208.0],   # 8x8: relies on the force-match
])
labels = assign_targets(grid, gts, pos_thresh=0.5, neg_thresh=0.4)
print()
print("assignment at pos=0.5 / neg=0.4:")
print("  positives:", int(np.count_nonzero(labels >= 0)))
print("  ignored  :", int(np.count_nonzero(labels == IGNORE)))
print("  negatives:", int(np.count_nonzero(labels == NEGATIVE)))
for g in range(len(gts)):
    n = int(np.count_nonzero(labels == g))
    print(f"  gt {g} ({gts[g][2]-gts[g][0]:.0f}x{gts[g][3]-gts[g][1]:.0f} px): "
          f"{n} positive anchor(s)")
