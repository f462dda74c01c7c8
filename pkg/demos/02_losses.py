"""
Box regression loss with a background-contrast term
====================================================

The total objective is ciou_loss + sigma * raiou.  The raiou term samples
boxes of the ground truth's size at random centers outside it and rewards
predictions that look UNLIKE those background crops.
"""

import numpy as np

from uwdet import LossConfig, ciou_loss, combined_loss, combined_loss_gradient, raiou
from uwdet.anchors import sample_background_boxes

FRAME = (100.0, 100.0)
gt = np.array([40.0, 40.0, 60.0, 60.0])
pred = np.array([37.0, 44.0, 59.0, 63.0])

# what the sampler produces: same-size boxes, centers outside the target
bg = sample_background_boxes(gt, *FRAME, 5, seed=3)
print("five background crops for gt", gt, "(width/height preserved):")
for b in bg:
    print(f"  [{b[0]:7.2f} {b[1]:7.2f} {b[2]:7.2f} {b[3]:7.2f}]  "
          f"size {b[2]-b[0]:.0f}x{b[3]-b[1]:.0f}")

# sweep sigma: the total is affine in sigma with slope raiou
print()
print(f"{'sigma':>6} {'l_ciou':>9} {'l_raiou':>9} {'total':>9}")
for sigma in (0.0, 0.25, 0.5, 0.75, 1.0):
    cfg = LossConfig(sigma=sigma, num_background_samples=8, rng_seed=42)
    out = combined_loss(pred, gt, cfg, FRAME)
    print(f"{sigma:>6.2f} {out.l_ciou:>9.4f} {out.l_raiou:>9.4f} {out.total:>9.4f}")

cfg = LossConfig(sigma=0.5, num_background_samples=8, rng_seed=42)
print()
print("slope check: total(1.0) - total(0.0) =",
      round(combined_loss(pred, gt, LossConfig(sigma=1.0, rng_seed=42), FRAME).total
            - ciou_loss(pred, gt), 6),
      "== raiou =", round(raiou(pred, gt, cfg, FRAME), 6))

# a few steps of plain gradient descent pull the prediction onto the target
print()
print("gradient descent on the combined loss:")
cur = pred.copy()
for it in range(6):
    total = combined_loss(cur, gt, cfg, FRAME).total
    print(f"  step {it}: total={total:.4f}  box={np.round(cur, 2)}")
    cur = cur - 20.0 * combined_loss_gradient(cur, gt, cfg, FRAME)
