"""
Block forward passes: channel attention, cascaded CSP, dilated convolution
==========================================================================

Desk-scale feature maps through the three architectural mechanisms, with
the built-in finite-difference harness confirming every input gradient.
"""

import numpy as np

from uwdet import blocks

rng = np.random.default_rng(7)

# squeeze-excitation: each channel gets a data-dependent gate in (0, 1)
x = rng.normal(size=(1, 8, 12, 12))
se = blocks.SEParams.random(8, 4, rng)
out = blocks.se_block(x, se)
gates = blocks.global_avg_pool(out)[0] / np.where(
    blocks.global_avg_pool(x)[0] == 0, 1, blocks.global_avg_pool(x)[0]
)
print("se_block: input (1,8,12,12) -> output", out.shape)
print("  per-channel gates:", np.round(gates, 3))

# dilated convolution: same parameter count, bigger receptive field
conv = blocks.ConvParams.random(4, 8, 3, rng, dilation=2, padding=2)
y = blocks.dilated_conv2d(x, conv)
print()
print(f"dilated_conv2d: k=3 d=2 -> effective extent {conv.effective_extent}, "
      f"output {y.shape}")

# two-stage cascaded CSP: c channels in, c + c/2 out, spatial size kept
csp = blocks.Csp2Params.random(8, rng)
z = blocks.csp2_block(x, csp)
print()
print("csp2_block: input (1,8,12,12) -> output", z.shape,
      "(stage-2 concat plus the direct stage-1 deep branch)")

# every block ships with an exact input gradient; the harness probes each
# input element with central differences
print()
print("finite-difference gradient checks (max relative error):")
small = rng.normal(size=(1, 4, 4, 4))
se4 = blocks.SEParams.random(4, 2, rng)
err = blocks.finite_diff_check(
    lambda t: blocks.se_block(t, se4),
    lambda t, u: blocks.se_block_input_gradient(t, se4, u),
    small,
)
print(f"  se_block      : {err:.2e}")
conv4 = blocks.ConvParams.random(2, 4, 3, rng, dilation=2, padding=2)
err = blocks.finite_diff_check(
    lambda t: blocks.dilated_conv2d(t, conv4),
    lambda t, u: blocks.dilated_conv2d_input_gradient(t, conv4, u),
    small,
)
print(f"  dilated_conv2d: {err:.2e}  (linear map: exact up to float noise)")
csp4 = blocks.Csp2Params.random(4, rng)
err = blocks.finite_diff_check(
    lambda t: blocks.csp2_block(t, csp4),
    lambda t, u: blocks.csp2_block_input_gradient(t, csp4, u),
    small,
)
print(f"  csp2_block    : {err:.2e}")
