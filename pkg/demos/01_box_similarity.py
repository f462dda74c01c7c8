"""
The IoU similarity family and its gradients
===========================================

Walks the four overlap measures on a shrinking pair of boxes and checks the
analytic CIoU gradient against central finite differences.
"""

import numpy as np

from uwdet import boxes

gt = np.array([20.0, 20.0, 60.0, 60.0])

print("ground truth box:", gt)
print()
print(f"{'shift':>6} {'iou':>9} {'giou':>9} {'diou':>9} {'ciou':>9}")
for shift in (0, 5, 15, 30, 50, 80):
    pred = gt + np.array([shift, 0, shift, 0], dtype=float)
    print(
        f"{shift:>6} {boxes.iou(pred, gt):>9.4f} {boxes.giou(pred, gt):>9.4f} "
        f"{boxes.diou(pred, gt):>9.4f} {boxes.ciou(pred, gt):>9.4f}"
    )

# the ordering law holds pointwise: ciou <= diou <= iou, because each
# variant subtracts one more nonnegative penalty
print()
print("ordering on 5 random pairs (ciou <= diou <= iou):")
rng = np.random.default_rng(0)
for _ in range(5):
    a = rng.uniform(0, 50, 2)
    b = rng.uniform(10, 60, 2)
    pa = np.array([a[0], a[1], a[0] + 30, a[1] + 20])
    pb = np.array([b[0], b[1], b[0] + 25, b[1] + 35])
    print(f"  {boxes.ciou(pa, pb):+.4f} <= {boxes.diou(pa, pb):+.4f} <= {boxes.iou(pa, pb):+.4f}")

# gradients: nudging the prediction along the gradient must increase ciou
pred = np.array([30.0, 25.0, 75.0, 70.0])
grad = boxes.ciou_gradient(pred, gt)
step = 1e-3
better = boxes.ciou(pred + step * grad, gt)
print()
print("gradient ascent check:")
print("  ciou before:", round(float(boxes.ciou(pred, gt)), 6))
print("  ciou after a small step along the gradient:", round(float(better), 6))

# agreement with finite differences
numeric = np.zeros(4)
for k in range(4):
    up, down = pred.copy(), pred.copy()
    up[k] += 1e-5
    down[k] -= 1e-5
    numeric[k] = (boxes.ciou(up, gt) - boxes.ciou(down, gt)) / 2e-5
print("  analytic :", np.round(grad, 6))
print("  numeric  :", np.round(numeric, 6))
