"""Command line interface.

Subcommands mirror the experiment stages: `prep` builds the feature CSV,
`train` grid-searches and fits the classifier, `classify`/`detect-crop`
apply it to single images, `sweep` replicates the crop-detection tables,
`beta-trend` dumps per-resolution beta curves for plotting.

Exit codes: 0 success, 2 precondition/input failure, 1 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import traceback
from pathlib import Path

from .classifier import load_model, model_to_json, save_model
from .detector import detect_crop
from .errors import PipelineError
from .features import read_feature_table
from .harness import (
    ExperimentConfig,
    emit_beta_trend,
    list_corpus_images,
    load_config,
    prepare_source_planes,
    run_crop_sweep,
    run_dataset_build,
    run_training,
    write_grid_report,
    write_split_file,
)
from .imagery import load_image, to_luminance, write_pgm
from .transform import block_dct

log = logging.getLogger(__name__)


def _resolve_config(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.config:
        return load_config(args.config, overrides)
    return dataclasses.replace(ExperimentConfig(), **overrides)


def _load_plane(path):
    return to_luminance(load_image(path))


def _dump_block(plane, spec: str) -> None:
    """Write one DCT block as text: `--dump-block ROW,COL,PATH`."""
    try:
        row_s, col_s, out_path = spec.split(",", 2)
        row, col = int(row_s), int(col_s)
    except ValueError:
        raise PipelineError(f"--dump-block expects ROW,COL,PATH, got '{spec}'")
    coeffs = block_dct(plane)
    if not (0 <= row < coeffs.shape[0] and 0 <= col < coeffs.shape[1]):
        raise PipelineError(
            f"block ({row}, {col}) outside the {coeffs.shape[0]}x{coeffs.shape[1]} block grid"
        )
    lines = [" ".join(f"{v:.6f}" for v in r) for r in coeffs[row, col]]
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_prep(args) -> int:
    config = _resolve_config(args)
    if args.corpus:
        config = dataclasses.replace(config, corpus_dir=args.corpus)
    if args.sides:
        config = dataclasses.replace(config, ladder_sides=tuple(args.sides))
    if not config.corpus_dir:
        raise PipelineError("no corpus directory given (use --corpus or the config file)")
    table = run_dataset_build(config, out_csv=args.out)
    print(f"wrote {len(table)} records to {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = _resolve_config(args)
    table = read_feature_table(args.features)
    result = run_training(table, config)
    save_model(result.model, args.model)
    report_dir = Path(args.report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    (report_dir / "confusion_matrix.csv").write_text(result.confusion.to_csv_text(), encoding="utf-8")
    (report_dir / "confusion_matrix.txt").write_text(result.confusion.to_text(), encoding="utf-8")
    write_grid_report(result.cv_report, report_dir / "grid_search.csv")
    write_split_file(result, report_dir / "split.json")
    if args.export_json:
        Path(args.export_json).write_text(model_to_json(result.model), encoding="utf-8")
    print(result.confusion.to_text(), end="")
    print(f"chosen hyperparameters: C={result.params.c:g} gamma={result.params.gamma:g}")
    print(f"model written to {args.model}")
    return 0


def _cmd_classify(args) -> int:
    model = load_model(args.model)
    plane = _load_plane(args.image)
    if args.dump_plane:
        write_pgm(plane, args.dump_plane)
    if args.dump_block:
        _dump_block(plane, args.dump_block)
    verdict = detect_crop(model, plane, image_id=Path(args.image).name)
    print(f"{Path(args.image).name}: predicted source resolution {verdict.predicted}")
    return 0


def _cmd_detect_crop(args) -> int:
    model = load_model(args.model)
    plane = _load_plane(args.image)
    verdict = detect_crop(model, plane, image_id=Path(args.image).name)
    print(verdict.to_json_line())
    return 0


def _cmd_sweep(args) -> int:
    config = _resolve_config(args)
    model = load_model(args.model)
    paths = list_corpus_images(args.corpus)
    if not paths:
        raise PipelineError(f"corpus directory '{args.corpus}' contains no images")
    planes = prepare_source_planes(paths, args.source_side, jobs=config.jobs)
    crop_sizes = args.crop_sizes or list(config.crop_sizes)
    report = run_crop_sweep(model, planes, args.source_side, crop_sizes)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"sweep_{args.source_side}"
    (out_dir / f"{stem}.csv").write_text(report.to_csv_text(), encoding="utf-8")
    (out_dir / f"{stem}.txt").write_text(report.to_text(), encoding="utf-8")
    print(report.to_text(), end="")
    return 0


def _cmd_beta_trend(args) -> int:
    config = _resolve_config(args)
    sides = tuple(args.sides) if args.sides else config.ladder_sides
    img = load_image(args.image)
    emit_beta_trend(img, sides, args.out)
    print(f"wrote beta trend for {len(sides)} resolutions to {args.out}")
    return 0


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dctcrop",
        description="Resolution classification and crop detection from DCT beta statistics.",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    parser.add_argument("--config", default=None, help="TOML config file mirroring ExperimentConfig")
    parser.add_argument("--jobs", type=int, default=None, help="parallel workers for per-image stages")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", help="build the labeled beta feature CSV from a corpus")
    p.add_argument("--corpus", default=None, help="directory of source images")
    p.add_argument("--out", default="features.csv", help="output feature CSV path")
    p.add_argument("--sides", type=_int_list, default=None, help="ladder sides, e.g. 128,256,512")
    p.set_defaults(func=_cmd_prep)

    p = sub.add_parser("train", help="grid-search, fit, and score the classifier")
    p.add_argument("--features", required=True, help="feature CSV from `prep`")
    p.add_argument("--model", default="model.csvm", help="output model file")
    p.add_argument("--report-dir", default=".", help="where to write confusion/grid/split reports")
    p.add_argument("--export-json", default=None, help="also write a human-readable model mirror")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("classify", help="predict the source resolution of one image")
    p.add_argument("image")
    p.add_argument("--model", required=True)
    p.add_argument("--dump-plane", default=None, help="debug: write the analyzed plane as PGM")
    p.add_argument("--dump-block", default=None, metavar="ROW,COL,PATH", help="debug: dump one DCT block as text")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("detect-crop", help="emit a JSON crop verdict for one image")
    p.add_argument("image")
    p.add_argument("--model", required=True)
    p.set_defaults(func=_cmd_detect_crop)

    p = sub.add_parser("sweep", help="crop-detection sweep over held-out images")
    p.add_argument("--corpus", required=True, help="directory of held-out images")
    p.add_argument("--model", required=True)
    p.add_argument("--source-side", type=int, default=2048)
    p.add_argument("--crop-sizes", type=_int_list, default=None, help="e.g. 1024,512,256,128")
    p.add_argument("--out-dir", default=".", help="where to write the sweep reports")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("beta-trend", help="dump per-resolution beta values for one image")
    p.add_argument("image")
    p.add_argument("--out", default="beta_trend.csv")
    p.add_argument("--sides", type=_int_list, default=None)
    p.set_defaults(func=_cmd_beta_trend)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PipelineError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
