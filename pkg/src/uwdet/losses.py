"""Box-regression training objective with a random-background similarity term.

The total objective is ``l_ciou + sigma * l_raiou + l_cls + l_conf``:

* ``ciou_loss`` is the usual ``1 - ciou(pred, gt)`` regression loss.
* ``raiou`` penalizes resemblance to the background: sample k boxes with the
  ground truth's size whose centers fall outside it, and return the negated
  mean CIoU between the prediction and those samples.  "Opposite value" is
  arithmetic negation, which stays bounded and differentiable.
* ``cls_conf_loss`` is the mean binary cross-entropy with logits used by the
  one-stage baseline for class and objectness heads.

Background samples are a deterministic function of (gt, frame, seed), never
of the prediction, so they are constants under differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchors import sample_background_boxes
from .boxes import ciou, ciou_gradient

__all__ = [
    "LossConfig",
    "LossBreakdown",
    "ciou_loss",
    "ciou_loss_gradient",
    "raiou",
    "combined_loss",
    "combined_loss_gradient",
    "cls_conf_loss",
]


@dataclass(frozen=True)
class LossConfig:
    sigma: float = 0.5
    num_background_samples: int = 8
    rng_seed: int = 0
    beta_mode: object = "standard_v"  # "standard_v" or a fixed nonnegative float

    def __post_init__(self):
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError("sigma must lie in [0, 1]")
        if self.num_background_samples < 1:
            raise ValueError("num_background_samples must be >= 1")
        if self.beta_mode != "standard_v":
            beta = float(self.beta_mode)
            if beta < 0.0:
                raise ValueError("fixed beta must be nonnegative")
            object.__setattr__(self, "beta_mode", beta)

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        return cls(
            sigma=float(d.get("sigma", 0.5)),
            num_background_samples=int(d.get("num_background_samples", 8)),
            rng_seed=int(d.get("rng_seed", 0)),
            beta_mode=d.get("beta_mode", "standard_v"),
        )

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "num_background_samples": self.num_background_samples,
            "rng_seed": self.rng_seed,
            "beta_mode": self.beta_mode,
        }


@dataclass(frozen=True)
class LossBreakdown:
    l_ciou: float
    l_raiou: float
    l_cls: float
    l_conf: float
    total: float


def ciou_loss(pred, gt, beta_mode="standard_v") -> float:
    """``1 - ciou(pred, gt)``; zero for a perfect regression."""
    return 1.0 - float(ciou(pred, gt, beta=beta_mode))


def ciou_loss_gradient(pred, gt, beta_mode="standard_v") -> np.ndarray:
    return -ciou_gradient(pred, gt, beta=beta_mode)


def _background_boxes(gt, cfg: LossConfig, frame) -> np.ndarray:
    frame_w, frame_h = float(frame[0]), float(frame[1])
    return sample_background_boxes(gt, frame_w, frame_h, cfg.num_background_samples, cfg.rng_seed)


def raiou(pred, gt, cfg: LossConfig, frame) -> float:
    """Negated mean CIoU between pred and sampled same-size background boxes.

    ``frame`` is the (width, height) of the image the ground truth lives in.
    Deterministic in ``cfg.rng_seed``.  Lies in [-1, 2) because CIoU lies in
    (-2, 1].
    """
    bg = _background_boxes(gt, cfg, frame)
    sims = [float(ciou(pred, box, beta=cfg.beta_mode)) for box in bg]
    return -float(np.mean(sims))


def combined_loss(
    pred,
    gt,
    cfg: LossConfig,
    frame,
    cls_logits=None,
    cls_targets=None,
    conf_logits=None,
    conf_targets=None,
) -> LossBreakdown:
    """Full breakdown; box-only mode (no logits) fills l_cls = l_conf = 0."""
    l_ciou = ciou_loss(pred, gt, beta_mode=cfg.beta_mode)
    l_raiou = raiou(pred, gt, cfg, frame)
    l_cls = 0.0 if cls_logits is None else cls_conf_loss(cls_logits, cls_targets)
    l_conf = 0.0 if conf_logits is None else cls_conf_loss(conf_logits, conf_targets)
    total = l_ciou + cfg.sigma * l_raiou + l_cls + l_conf
    return LossBreakdown(l_ciou=l_ciou, l_raiou=l_raiou, l_cls=l_cls, l_conf=l_conf, total=total)


def combined_loss_gradient(pred, gt, cfg: LossConfig, frame) -> np.ndarray:
    """Analytic gradient of the combined total w.r.t. pred's coordinates.

    Background samples are held fixed (they do not depend on pred), so the
    gradient is the CIoU-loss gradient minus sigma times the mean CIoU
    gradient toward each background box.
    """
    grad = ciou_loss_gradient(pred, gt, beta_mode=cfg.beta_mode)
    if cfg.sigma != 0.0:
        bg = _background_boxes(gt, cfg, frame)
        bg_grads = [ciou_gradient(pred, box, beta=cfg.beta_mode) for box in bg]
        grad = grad - cfg.sigma * np.mean(bg_grads, axis=0)
    return grad


def cls_conf_loss(pred_logits, targets) -> float:
    """Mean binary cross-entropy with logits.

    Computed in the numerically stable form
    ``max(x, 0) - x*t + log(1 + exp(-|x|))``.
    """
    x = np.asarray(pred_logits, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if x.shape != t.shape:
        raise ValueError(f"length mismatch: {x.shape} logits vs {t.shape} targets")
    if x.size == 0:
        raise ValueError("need at least one logit")
    per = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    return float(np.mean(per))
