"""Command-line entry point.

Verbs: ingest, postprocess, evaluate, render, bench, ablate.  Exit codes:
0 success, 1 input error, 2 configuration error, 3 internal failure.
"""

from __future__ import annotations

import argparse
import sys
import traceback

from .config import ConfigError, PipelineConfig, parse_flag_overrides
from .ingest import InputError
from . import pipeline

__all__ = ["build_parser", "main", "entry"]

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uwdet",
        description="Detection-pipeline numerics: screening, fusion, refinement, and evaluation.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_common(p, needs_input=False):
        p.add_argument("--config", required=True, help="pipeline config JSON")
        p.add_argument("--input", default=None, help="input file override" + (" (required)" if needs_input else ""))
        p.add_argument("--output", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--flags", default=None, help="comma list of flag overrides, e.g. wbf=false,denoise=true")

    p = sub.add_parser("ingest", help="normalize annotations to corner-form JSON")
    add_common(p)
    p.add_argument("--format", default=None, choices=["auto", "coco_json", "csv_jsonboxes"])

    p = sub.add_parser("postprocess", help="run the enabled stage chain over detections")
    add_common(p)

    p = sub.add_parser("evaluate", help="seven-column detection metrics")
    add_common(p)
    p.add_argument("--format", default=None, choices=["auto", "coco_json", "csv_jsonboxes"])

    p = sub.add_parser("render", help="draw detection overlays (PNG + SVG)")
    add_common(p)

    p = sub.add_parser("bench", help="time the stages over synthetic workloads")
    add_common(p)
    p.add_argument("--sizes", default="100,1000,10000", help="comma list of cloud sizes")

    p = sub.add_parser("ablate", help="run the cumulative flag ladder and emit reports")
    add_common(p)
    return parser


def _load_config(args) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config)
    overrides = parse_flag_overrides(args.flags) if getattr(args, "flags", None) else None
    if overrides or args.seed is not None:
        config = config.with_overrides(flags=overrides, seed=args.seed)
    return config


def _dispatch(args) -> None:
    config = _load_config(args)
    if args.verb == "ingest":
        stats = pipeline.ingest(
            config, input_path=args.input, fmt=getattr(args, "format", None),
            output_dir=args.output,
        )
        print(f"ingested {stats['boxes']} boxes over {stats['images']} images -> {stats['output']}")
    elif args.verb == "postprocess":
        per_image, manifest, out_path = pipeline.run_postprocess(
            config, predictions_path=args.input, output_dir=args.output
        )
        print(
            f"postprocess: {manifest['input_records']} -> {manifest['output_records']} "
            f"detections ({out_path})"
        )
    elif args.verb == "evaluate":
        report = pipeline.evaluate(
            config, predictions_path=args.input, output_dir=args.output,
            fmt=getattr(args, "format", None),
        )
        for name in ("ap", "ap50", "ap75", "ar", "ar_small", "ar_medium", "ar_large"):
            print(f"{name:<10} {getattr(report, name):.4f}")
    elif args.verb == "render":
        stats = pipeline.render_detections(
            config, predictions_path=args.input, output_dir=args.output
        )
        print(f"rendered {len(stats['rendered'])} images -> {stats['output_dir']}")
    elif args.verb == "bench":
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
        rows = pipeline.bench(config, sizes=sizes, output_dir=args.output)
        print(f"{'stage':<18} {'n':>8} {'median_s':>12}")
        for row in rows:
            print(f"{row['stage']:<18} {row['n']:>8} {row['median_seconds']:>12.6f}")
    elif args.verb == "ablate":
        summaries = pipeline.ablate(config, predictions_path=args.input, output_dir=args.output)
        print(f"{'combo':<24} {'dets':>6} {'ap':>8} {'ap50':>8} {'ar':>8}")
        for s in summaries:
            r = s["report"]
            print(
                f"{s['combo']:<24} {s['output_records']:>6} "
                f"{r['ap']:>8.4f} {r['ap50']:>8.4f} {r['ar']:>8.4f}"
            )
    else:  # pragma: no cover - argparse enforces the verb set
        raise ConfigError(f"unknown verb {args.verb!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _dispatch(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except pipeline.StageError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
