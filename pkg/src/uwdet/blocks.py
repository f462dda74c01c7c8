"""Dense-tensor forward passes for the three architectural mechanisms.

Feature maps are float64 arrays of shape (n, c, h, w), row-major.  The
blocks here are desk-scale reference implementations built directly on
numpy array arithmetic, not on a deep-learning framework:

* ``se_block``: squeeze (global average pool), excitation (two-layer
  bottleneck with a plain rectifier inside and a sigmoid gate), scale
  (channel-wise rescaling of the input).
* ``dilated_conv2d``: cross-correlation with spaced taps, enlarging the
  receptive field to ``k + (k-1)(dilation-1)`` without extra parameters.
* ``csp2_block``: two cascaded cross-stage-partial stages; each stage sends
  half its channels through a pointwise + spatial convolution pair and
  concatenates, and the first stage's deep-branch output is additionally
  concatenated into the final output directly, with no transition
  convolution in between.

Every block has an exact input-gradient companion so a scalar
sum-of-outputs can be checked against central finite differences.
Convolutional sub-paths use a leaky rectifier with slope 0.1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SEParams",
    "ConvParams",
    "Csp2Params",
    "global_avg_pool",
    "se_block",
    "se_block_input_gradient",
    "dilated_conv2d",
    "dilated_conv2d_input_gradient",
    "csp2_block",
    "csp2_block_input_gradient",
    "finite_diff_check",
    "save_params",
    "load_params",
]

LEAKY_SLOPE = 0.1


def _as_feature_map(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ValueError(f"feature maps are (n, c, h, w); got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("feature map values must be finite")
    return np.ascontiguousarray(x)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _leaky(t: np.ndarray) -> np.ndarray:
    return np.where(t > 0.0, t, LEAKY_SLOPE * t)


def _leaky_grad(t: np.ndarray) -> np.ndarray:
    return np.where(t > 0.0, 1.0, LEAKY_SLOPE)


# ---------------------------------------------------------------------------
# squeeze-excitation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SEParams:
    """Bottleneck weights: w1 is (c/r, c), w2 is (c, c/r)."""

    reduction_ratio: int
    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        if self.reduction_ratio < 1:
            raise ValueError("reduction_ratio must be >= 1")
        if w1.ndim != 2 or w2.ndim != 2:
            raise ValueError("w1 and w2 must be matrices")
        c = w1.shape[1]
        if c % self.reduction_ratio != 0:
            raise ValueError("channel count must be divisible by reduction_ratio")
        cr = c // self.reduction_ratio
        if w1.shape != (cr, c) or w2.shape != (c, cr):
            raise ValueError(
                f"expected w1 ({cr}, {c}) and w2 ({c}, {cr}); got {w1.shape}, {w2.shape}"
            )
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)

    @property
    def channels(self) -> int:
        return self.w1.shape[1]

    @classmethod
    def random(cls, channels: int, reduction_ratio: int, rng: np.random.Generator) -> "SEParams":
        cr = channels // reduction_ratio
        return cls(
            reduction_ratio=reduction_ratio,
            w1=rng.uniform(-0.5, 0.5, (cr, channels)),
            w2=rng.uniform(-0.5, 0.5, (channels, cr)),
        )


def global_avg_pool(x) -> np.ndarray:
    """Squeeze stage: per-sample, per-channel spatial mean, shape (n, c)."""
    return _as_feature_map(x).mean(axis=(2, 3))


def _se_gate(x: np.ndarray, p: SEParams):
    z = x.mean(axis=(2, 3))
    a = z @ p.w1.T
    e = np.maximum(a, 0.0)
    gate = _sigmoid(e @ p.w2.T)
    return gate, a


def se_block(x, p: SEParams) -> np.ndarray:
    """Channel attention: rescale each channel by its learned gate in (0, 1)."""
    x = _as_feature_map(x)
    if x.shape[1] != p.channels:
        raise ValueError(f"params expect {p.channels} channels, input has {x.shape[1]}")
    gate, _ = _se_gate(x, p)
    return x * gate[:, :, None, None]


def se_block_input_gradient(x, p: SEParams, upstream) -> np.ndarray:
    """d(sum(upstream * se_block(x))) / dx, exact.

    The gate depends on x through the pooled means, so the gradient carries
    both the direct rescaling term and the chain through the bottleneck.
    """
    x = _as_feature_map(x)
    g = np.asarray(upstream, dtype=np.float64)
    gate, a = _se_gate(x, p)
    n, c, h, w = x.shape

    direct = g * gate[:, :, None, None]
    pooled = (g * x).sum(axis=(2, 3))          # (n, c): dL/dgate
    sp = gate * (1.0 - gate)
    q = (pooled * sp) @ p.w2                   # (n, c/r)
    q *= (a > 0.0)
    dz = q @ p.w1                              # (n, c)
    return direct + dz[:, :, None, None] / (h * w)


# ---------------------------------------------------------------------------
# dilated convolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvParams:
    """Cross-correlation weights (c_out, c_in, k, k) with odd square kernels."""

    kernel: np.ndarray
    dilation: int = 1
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=np.float64)
        if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3]:
            raise ValueError("kernel must be (c_out, c_in, k, k)")
        if kernel.shape[2] % 2 == 0:
            raise ValueError("kernel size must be odd")
        if self.dilation < 1 or self.stride < 1 or self.padding < 0:
            raise ValueError("dilation/stride must be >= 1 and padding >= 0")
        object.__setattr__(self, "kernel", kernel)

    @property
    def c_out(self) -> int:
        return self.kernel.shape[0]

    @property
    def c_in(self) -> int:
        return self.kernel.shape[1]

    @property
    def k(self) -> int:
        return self.kernel.shape[2]

    @property
    def effective_extent(self) -> int:
        return self.k + (self.k - 1) * (self.dilation - 1)

    @classmethod
    def random(cls, c_out, c_in, k, rng, dilation=1, stride=1, padding=0) -> "ConvParams":
        return cls(
            kernel=rng.uniform(-0.5, 0.5, (c_out, c_in, k, k)),
            dilation=dilation,
            stride=stride,
            padding=padding,
        )


def _conv_out_size(size: int, p: ConvParams) -> int:
    return (size + 2 * p.padding - p.effective_extent) // p.stride + 1


def dilated_conv2d(x, p: ConvParams) -> np.ndarray:
    """Cross-correlation with dilated taps.

    Output spatial size is ``floor((s + 2*pad - extent)/stride) + 1`` per
    axis with ``extent = k + (k-1)(dilation-1)``.
    """
    x = _as_feature_map(x)
    n, c, h, w = x.shape
    if c != p.c_in:
        raise ValueError(f"kernel expects {p.c_in} input channels, got {c}")
    ho, wo = _conv_out_size(h, p), _conv_out_size(w, p)
    if ho < 1 or wo < 1:
        raise ValueError("spatial dims too small for the effective kernel extent")
    xp = np.pad(x, ((0, 0), (0, 0), (p.padding, p.padding), (p.padding, p.padding)))
    out = np.zeros((n, p.c_out, ho, wo))
    s, d = p.stride, p.dilation
    for u in range(p.k):
        for v in range(p.k):
            tap = xp[:, :, u * d : u * d + s * (ho - 1) + 1 : s,
                     v * d : v * d + s * (wo - 1) + 1 : s]
            out += np.einsum("nchw,oc->nohw", tap, p.kernel[:, :, u, v])
    return out


def dilated_conv2d_input_gradient(x, p: ConvParams, upstream) -> np.ndarray:
    """d(sum(upstream * conv(x))) / dx: scatter the taps back."""
    x = _as_feature_map(x)
    g = np.asarray(upstream, dtype=np.float64)
    n, c, h, w = x.shape
    ho, wo = g.shape[2], g.shape[3]
    gxp = np.zeros((n, c, h + 2 * p.padding, w + 2 * p.padding))
    s, d = p.stride, p.dilation
    for u in range(p.k):
        for v in range(p.k):
            gxp[:, :, u * d : u * d + s * (ho - 1) + 1 : s,
                v * d : v * d + s * (wo - 1) + 1 : s] += np.einsum(
                "nohw,oc->nchw", g, p.kernel[:, :, u, v]
            )
    if p.padding:
        return gxp[:, :, p.padding : p.padding + h, p.padding : p.padding + w]
    return gxp


# ---------------------------------------------------------------------------
# two-stage cascaded CSP
# ---------------------------------------------------------------------------

def _check_same_size(conv: ConvParams, half: int, name: str) -> None:
    if conv.c_in != half or conv.c_out != half:
        raise ValueError(f"{name} must map {half} -> {half} channels")
    if conv.stride != 1 or 2 * conv.padding != (conv.k - 1) * conv.dilation:
        raise ValueError(f"{name} must preserve spatial size (stride 1, symmetric padding)")


@dataclass(frozen=True)
class Csp2Params:
    """Per-stage deep-branch convolutions: pointwise then same-padded spatial."""

    stage1_pointwise: ConvParams
    stage1_spatial: ConvParams
    stage2_pointwise: ConvParams
    stage2_spatial: ConvParams

    def __post_init__(self):
        half = self.stage1_pointwise.c_in
        for name in ("stage1_pointwise", "stage1_spatial", "stage2_pointwise", "stage2_spatial"):
            _check_same_size(getattr(self, name), half, name)

    @property
    def channels(self) -> int:
        return 2 * self.stage1_pointwise.c_in

    @classmethod
    def random(cls, channels: int, rng: np.random.Generator) -> "Csp2Params":
        if channels % 2 != 0:
            raise ValueError("channel count must be even")
        half = channels // 2
        return cls(
            stage1_pointwise=ConvParams.random(half, half, 1, rng),
            stage1_spatial=ConvParams.random(half, half, 3, rng, padding=1),
            stage2_pointwise=ConvParams.random(half, half, 1, rng),
            stage2_spatial=ConvParams.random(half, half, 3, rng, padding=1),
        )


def _csp_deep_path(deep, pointwise, spatial):
    pre = dilated_conv2d(deep, pointwise)
    return dilated_conv2d(_leaky(pre), spatial), pre


def csp2_block(x, params: Csp2Params) -> np.ndarray:
    """Two cascaded cross-stage-partial stages with a direct deep connection.

    Stage one splits channels into a shallow half and a deep half, routes the
    deep half through its convolution pair, and concatenates.  Stage two
    repeats on that result.  The stage-one deep output is concatenated into
    the final output as-is, so c channels in yields c + c/2 channels out.
    """
    x = _as_feature_map(x)
    c = x.shape[1]
    if c != params.channels:
        raise ValueError(f"params expect {params.channels} channels, input has {c}")
    half = c // 2
    shallow1, deep1 = x[:, :half], x[:, half:]
    p1, _ = _csp_deep_path(deep1, params.stage1_pointwise, params.stage1_spatial)
    y1 = np.concatenate([shallow1, p1], axis=1)
    shallow2, deep2 = y1[:, :half], y1[:, half:]
    p2, _ = _csp_deep_path(deep2, params.stage2_pointwise, params.stage2_spatial)
    return np.concatenate([shallow2, p2, p1], axis=1)


def csp2_block_input_gradient(x, params: Csp2Params, upstream) -> np.ndarray:
    """d(sum(upstream * csp2_block(x))) / dx via reverse traversal."""
    x = _as_feature_map(x)
    g = np.asarray(upstream, dtype=np.float64)
    c = x.shape[1]
    half = c // 2
    deep1 = x[:, half:]

    # recompute forward intermediates
    p1, pre1 = _csp_deep_path(deep1, params.stage1_pointwise, params.stage1_spatial)
    _, pre2 = _csp_deep_path(p1, params.stage2_pointwise, params.stage2_spatial)

    g_shallow2 = g[:, :half]
    g_p2 = g[:, half : 2 * half]
    g_p1 = g[:, 2 * half :].copy()

    # stage 2 deep path: conv(spatial) o leaky o conv(pointwise), input p1
    t = dilated_conv2d_input_gradient(_leaky(pre2), params.stage2_spatial, g_p2)
    t *= _leaky_grad(pre2)
    g_p1 += dilated_conv2d_input_gradient(p1, params.stage2_pointwise, t)

    # stage 1 deep path, input deep1
    t = dilated_conv2d_input_gradient(_leaky(pre1), params.stage1_spatial, g_p1)
    t *= _leaky_grad(pre1)
    g_deep1 = dilated_conv2d_input_gradient(deep1, params.stage1_pointwise, t)

    return np.concatenate([g_shallow2, g_deep1], axis=1)


# ---------------------------------------------------------------------------
# verification and parameter serialization
# ---------------------------------------------------------------------------

def finite_diff_check(forward, input_gradient, x, step=1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``forward(x)`` maps a feature map to a feature map; ``input_gradient(x,
    upstream)`` must return the exact gradient of ``sum(forward(x))`` when
    given an all-ones upstream.  Every input element is probed.
    """
    if not 1e-6 <= step <= 1e-3:
        raise ValueError("step must lie in [1e-6, 1e-3]")
    x = _as_feature_map(x)
    analytic = input_gradient(x, np.ones_like(forward(x)))
    worst = 0.0
    flat = x.ravel()
    for i in range(flat.size):
        xp, xm = flat.copy(), flat.copy()
        xp[i] += step
        xm[i] -= step
        fd = (forward(xp.reshape(x.shape)).sum() - forward(xm.reshape(x.shape)).sum()) / (2 * step)
        a = analytic.flat[i]
        err = abs(a - fd) / max(abs(a), abs(fd), 1e-6)
        worst = max(worst, err)
    return worst


def _array_to_obj(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": np.ascontiguousarray(a).ravel().tolist()}


def _obj_to_array(obj: dict) -> np.ndarray:
    return np.array(obj["data"], dtype=np.float64).reshape(obj["shape"])


def _conv_to_obj(p: ConvParams) -> dict:
    return {
        "kind": "conv",
        "dilation": p.dilation,
        "stride": p.stride,
        "padding": p.padding,
        "kernel": _array_to_obj(p.kernel),
    }


def _conv_from_obj(obj: dict) -> ConvParams:
    return ConvParams(
        kernel=_obj_to_array(obj["kernel"]),
        dilation=obj["dilation"],
        stride=obj["stride"],
        padding=obj["padding"],
    )


def save_params(params, path) -> None:
    """Serialize block parameters as JSON: shape headers + row-major values."""
    if isinstance(params, SEParams):
        obj = {
            "kind": "se",
            "reduction_ratio": params.reduction_ratio,
            "w1": _array_to_obj(params.w1),
            "w2": _array_to_obj(params.w2),
        }
    elif isinstance(params, ConvParams):
        obj = _conv_to_obj(params)
    elif isinstance(params, Csp2Params):
        obj = {
            "kind": "csp2",
            "stage1_pointwise": _conv_to_obj(params.stage1_pointwise),
            "stage1_spatial": _conv_to_obj(params.stage1_spatial),
            "stage2_pointwise": _conv_to_obj(params.stage2_pointwise),
            "stage2_spatial": _conv_to_obj(params.stage2_spatial),
        }
    else:
        raise TypeError(f"unsupported parameter object: {type(params).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_params(path):
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    kind = obj.get("kind")
    if kind == "se":
        return SEParams(
            reduction_ratio=obj["reduction_ratio"],
            w1=_obj_to_array(obj["w1"]),
            w2=_obj_to_array(obj["w2"]),
        )
    if kind == "conv":
        return _conv_from_obj(obj)
    if kind == "csp2":
        return Csp2Params(
            stage1_pointwise=_conv_from_obj(obj["stage1_pointwise"]),
            stage1_spatial=_conv_from_obj(obj["stage1_spatial"]),
            stage2_pointwise=_conv_from_obj(obj["stage2_pointwise"]),
            stage2_spatial=_conv_from_obj(obj["stage2_spatial"]),
        )
    raise ValueError(f"unknown parameter kind: {kind!r}")
