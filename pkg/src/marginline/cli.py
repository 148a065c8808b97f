"""Command line front end.

Exit codes: 0 success, 1 data/validation error, 2 usage error,
3 internal failure. Errors are also emitted as one-line JSON on stderr
so that batch drivers can parse them.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import pipeline as pl
from .errors import MarginlineError
from .manifest import load_manifest
from .synthetic import generate_benchmark


def _add_common(parser):
    parser.add_argument("--manifest", required=True, help="manifest JSON or dataset directory")
    parser.add_argument("--run-dir", required=True, help="artifact directory")
    parser.add_argument("--config", help="pipeline config JSON")


def _build_config(args):
    config = (
        pl.PipelineConfig.from_json(args.config)
        if getattr(args, "config", None)
        else pl.PipelineConfig()
    )
    overrides = {
        "target_faces": "target_faces",
        "folds": "folds",
        "epochs": "epochs",
        "scale": "width_scale",
        "augment": "augment_per_die",
        "ensemble": "ensemble",
        "smoothness": "smoothness",
        "sigma": "dihedral_sigma",
        "samples": "n_samples",
        "threshold_um": "threshold_um",
        "seed": "seed",
    }
    for arg_name, field in overrides.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            setattr(config, field, value)
    config.validate()
    return config


def build_parser():
    parser = argparse.ArgumentParser(
        prog="marginline",
        description="Margin line extraction pipeline for dental die scans",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic die benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--seed", type=int, default=7)

    p = sub.add_parser("preprocess", help="register and decimate the dies")
    _add_common(p)
    p.add_argument("--target-faces", dest="target_faces", type=int)

    p = sub.add_parser("label", help="transfer crown-bottom labels onto dies")
    _add_common(p)

    p = sub.add_parser("featurize", help="cache per-case feature matrices")
    _add_common(p)
    p.add_argument("--augment", type=int, help="augmented copies per training die")

    p = sub.add_parser("train", help="train the k-fold segmentation ensemble")
    _add_common(p)
    p.add_argument("--folds", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--scale", type=float, help="network width scale")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("predict", help="run the ensemble on the dataset")
    _add_common(p)
    p.add_argument(
        "--ensemble",
        help="max_probability, democracy, or fold-K for a single model",
    )
    p.add_argument("--folds", type=int)

    p = sub.add_parser("refine", help="graph-cut label refinement")
    _add_common(p)
    p.add_argument("--smoothness", type=float, help="pairwise weight")
    p.add_argument("--sigma", type=float, help="dihedral falloff")

    p = sub.add_parser("extract", help="fit and sample the margin lines")
    _add_common(p)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("evaluate", help="score predictions against truth")
    _add_common(p)
    p.add_argument("--threshold-um", dest="threshold_um", type=float)

    p = sub.add_parser("pipeline", help="run every stage in order")
    _add_common(p)
    p.add_argument("--target-faces", dest="target_faces", type=int)
    p.add_argument("--augment", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--scale", type=float)
    p.add_argument("--ensemble")
    p.add_argument("--smoothness", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--threshold-um", dest="threshold_um", type=float)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("report", help="print the evaluation summary")
    p.add_argument("--run-dir", required=True)
    return parser


_STAGE_OF = {
    "preprocess": pl.stage_preprocess,
    "label": pl.stage_labels,
    "featurize": pl.stage_features,
    "train": pl.stage_train,
    "predict": pl.stage_predict,
    "refine": pl.stage_refine,
    "extract": pl.stage_extract,
    "evaluate": pl.stage_evaluate,
}


def _run(args):
    if args.command == "synth":
        path = generate_benchmark(args.out, n_cases=args.cases, seed=args.seed)
        print(f"wrote {args.cases} cases; manifest at {path}")
        return 0
    if args.command == "report":
        report = Path(args.run_dir) / "evaluation" / "report.json"
        if not report.exists():
            raise MarginlineError(f"no evaluation report at {report}")
        summary = json.loads(report.read_text())["summary"]
        for key in sorted(summary):
            print(f"{key}: {summary[key]}")
        return 0

    manifest = load_manifest(args.manifest)
    config = _build_config(args)
    run_dir = Path(args.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    if args.command == "pipeline":
        out = pl.run_pipeline(manifest, config, run_dir)
    else:
        config.save(run_dir / "config.json")
        out = _STAGE_OF[args.command](manifest, config, run_dir)
    print(f"{args.command}: artifacts in {out}")
    return 0


def _error_json(kind, message):
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return _run(args)
    except (MarginlineError, ValueError, FileNotFoundError) as exc:
        _error_json(type(exc).__name__, str(exc))
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        _error_json(type(exc).__name__, str(exc))
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
