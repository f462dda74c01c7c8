"""uwdet: detection-pipeline numerics for underwater imagery.

A numpy library covering the trainable-free parts of a one-stage detection
pipeline: the IoU/GIoU/DIoU/CIoU similarity family with analytic gradients,
a background-contrast box loss, a twelve-shape anchor scheme, reference
forward passes for attention/cross-stage-partial/dilated-convolution blocks,
underwater image preprocessing, box screening and fusion, and COCO-style
evaluation, plus a small CLI binding it all together.
"""

from .boxes import box_area, ciou, ciou_gradient, cxcywh_to_xyxy, diou, giou, iou, xyxy_to_cxcywh
from .losses import LossBreakdown, LossConfig, ciou_loss, cls_conf_loss, combined_loss, combined_loss_gradient, raiou
from .anchors import AnchorGrid, AnchorSpec, anchor_shapes, assign_targets, generate_grid, sample_background_boxes
from .blocks import ConvParams, Csp2Params, SEParams, csp2_block, dilated_conv2d, finite_diff_check, global_avg_pool, se_block
from .preprocess import LabeledImage, denoise, letterbox, mosaic, segment_water_boundary
from .postprocess import Detection, RefineConfig, diou_nms, iterative_refine, wbf
from .evaluation import EvalReport, average_precision, average_recall, evaluate_detections, full_report, match
from .ingest import InputError, load_annotations
from .config import ConfigError, PipelineConfig

__version__ = "0.1.0"

__all__ = [
    "box_area", "iou", "giou", "diou", "ciou", "ciou_gradient",
    "cxcywh_to_xyxy", "xyxy_to_cxcywh",
    "LossConfig", "LossBreakdown", "ciou_loss", "raiou", "combined_loss",
    "combined_loss_gradient", "cls_conf_loss",
    "AnchorSpec", "AnchorGrid", "anchor_shapes", "generate_grid",
    "assign_targets", "sample_background_boxes",
    "SEParams", "ConvParams", "Csp2Params", "global_avg_pool", "se_block",
    "dilated_conv2d", "csp2_block", "finite_diff_check",
    "LabeledImage", "denoise", "segment_water_boundary", "letterbox", "mosaic",
    "Detection", "RefineConfig", "diou_nms", "wbf", "iterative_refine",
    "EvalReport", "match", "average_precision", "average_recall",
    "evaluate_detections", "full_report",
    "InputError", "load_annotations",
    "ConfigError", "PipelineConfig",
    "__version__",
]
