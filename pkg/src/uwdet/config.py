"""Pipeline configuration: a versioned JSON document with per-stage enable
flags mirroring the ablation toggles, nested loss/anchor/refinement configs,
and input/output paths.

Relative paths are resolved against the config file's directory.  The
canonical JSON form (sorted keys, compact separators) is what gets hashed
into run manifests, so identical configs always hash identically.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .anchors import AnchorSpec
from .losses import LossConfig
from .postprocess import RefineConfig

__all__ = [
    "ConfigError",
    "PipelineConfig",
    "FLAG_NAMES",
    "DEFAULT_FLAGS",
    "parse_flag_overrides",
]


class ConfigError(Exception):
    """Invalid pipeline configuration."""


# preprocessing and block-demo stages are off by default; detection-content
# stages default on
FLAG_NAMES = (
    "denoise",
    "segmentation",
    "mosaic",
    "se_demo",
    "csp2_demo",
    "multiscale_anchors",
    "diou_nms",
    "wbf",
    "iterative_refinement",
)

DEFAULT_FLAGS = {
    "denoise": False,
    "segmentation": False,
    "mosaic": False,
    "se_demo": False,
    "csp2_demo": False,
    "multiscale_anchors": False,
    "diou_nms": True,
    "wbf": True,
    "iterative_refinement": True,
}

_PATH_KEYS = ("annotations", "predictions", "images", "output_dir")

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    flags: dict = field(default_factory=lambda: dict(DEFAULT_FLAGS))
    loss: LossConfig = field(default_factory=LossConfig)
    anchor_spec: AnchorSpec = field(default_factory=AnchorSpec)
    anchor_stride: int = 32
    refine: RefineConfig = field(default_factory=RefineConfig)
    paths: dict = field(default_factory=dict)
    annotation_format: str = "auto"
    seed: int = 0

    def __post_init__(self):
        flags = dict(DEFAULT_FLAGS)
        for name, value in self.flags.items():
            if name not in FLAG_NAMES:
                raise ConfigError(f"unknown flag {name!r}; known flags: {', '.join(FLAG_NAMES)}")
            if not isinstance(value, bool):
                raise ConfigError(f"flag {name!r} must be a boolean")
            flags[name] = value
        object.__setattr__(self, "flags", flags)
        if self.anchor_stride < 1:
            raise ConfigError("anchor_stride must be positive")
        if self.annotation_format not in ("auto", "coco_json", "csv_jsonboxes"):
            raise ConfigError(f"unknown annotation format {self.annotation_format!r}")
        paths = {k: self.paths.get(k) for k in _PATH_KEYS}
        extra = set(self.paths) - set(_PATH_KEYS)
        if extra:
            raise ConfigError(f"unknown path keys: {sorted(extra)}")
        object.__setattr__(self, "paths", paths)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str = ".") -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        version = doc.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
        known = {
            "schema_version", "flags", "loss", "anchors", "anchor_stride",
            "refine", "paths", "annotation_format", "seed",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            loss = LossConfig.from_dict(doc.get("loss", {}))
            spec = AnchorSpec.from_dict(doc.get("anchors", {}))
            refine = RefineConfig.from_dict(doc.get("refine", {}))
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        paths = {}
        for key, value in (doc.get("paths", {}) or {}).items():
            if value is not None:
                paths[key] = os.path.normpath(os.path.join(base_dir, str(value)))
            else:
                paths[key] = None
        return cls(
            flags=doc.get("flags", {}),
            loss=loss,
            anchor_spec=spec,
            anchor_stride=int(doc.get("anchor_stride", 32)),
            refine=refine,
            paths=paths,
            annotation_format=doc.get("annotation_format", "auto"),
            seed=int(doc.get("seed", 0)),
        )

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, base_dir=os.path.dirname(os.path.abspath(str(path))))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "flags": dict(self.flags),
            "loss": self.loss.to_dict(),
            "anchors": self.anchor_spec.to_dict(),
            "anchor_stride": self.anchor_stride,
            "refine": self.refine.to_dict(),
            "paths": dict(self.paths),
            "annotation_format": self.annotation_format,
            "seed": self.seed,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def with_overrides(self, flags=None, seed=None, paths=None) -> "PipelineConfig":
        new_flags = dict(self.flags)
        if flags:
            for name, value in flags.items():
                if name not in FLAG_NAMES:
                    raise ConfigError(f"unknown flag {name!r}")
                new_flags[name] = bool(value)
        new_paths = dict(self.paths)
        if paths:
            new_paths.update(paths)
        return PipelineConfig(
            flags=new_flags,
            loss=self.loss if seed is None else LossConfig(
                sigma=self.loss.sigma,
                num_background_samples=self.loss.num_background_samples,
                rng_seed=int(seed),
                beta_mode=self.loss.beta_mode,
            ),
            anchor_spec=self.anchor_spec,
            anchor_stride=self.anchor_stride,
            refine=self.refine,
            paths=new_paths,
            annotation_format=self.annotation_format,
            seed=self.seed if seed is None else int(seed),
        )


def parse_flag_overrides(text: str) -> dict:
    """Parse the CLI ``--flags`` value: ``name=true,name2=false``."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" in item:
            name, _, raw = item.partition("=")
            raw = raw.strip().lower()
            if raw in ("true", "1", "on", "yes"):
                value = True
            elif raw in ("false", "0", "off", "no"):
                value = False
            else:
                raise ConfigError(f"flag override {item!r}: value must be true/false")
        else:
            name, value = item, True
        name = name.strip()
        if name not in FLAG_NAMES:
            raise ConfigError(f"unknown flag {name!r} in --flags")
        out[name] = value
    return out
