"""Experiment orchestration: dataset build, training run, crop sweeps.

Everything here is reproducible by construction: corpus files are
visited in sorted order, all shuffles derive from the config seed, and
reports are rendered with fixed formatting, so identical inputs yield
byte-identical outputs. Parallel workers only ever compute per-image
results that are reassembled in canonical order.
"""

from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from random import Random

import numpy as np

from .classifier import (
    DEFAULT_C_GRID,
    DEFAULT_GAMMA_GRID,
    SvmHyperParams,
    SvmModel,
    grid_search,
    predict_batch,
    train_multiclass,
)
from .detector import classify_resolution
from .errors import ConfigError, PipelineError
from .features import (
    FeatureRecord,
    FeatureTable,
    RESOLUTION_SIDES,
    build_resolution_ladder,
    extract_beta_vector,
    write_feature_table,
)
from .imagery import CropSpec, aligned_crop, bicubic_resize, center_crop_square, load_image, to_luminance

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".tif", ".tiff"}

#: Separator between source file name and ladder side in record ids.
ID_SEPARATOR = "@"


def source_key(image_id: str) -> str:
    """The part of a record id that names its source image."""
    return image_id.rsplit(ID_SEPARATOR, 1)[0]


@dataclass(frozen=True)
class ExperimentConfig:
    corpus_dir: str = ""
    ladder_sides: tuple[int, ...] = RESOLUTION_SIDES
    split_fraction: float = 0.2
    crop_sizes: tuple[int, ...] = (1024, 512, 256, 128)
    seed: int = 0
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    gamma_grid: tuple[float, ...] = DEFAULT_GAMMA_GRID
    folds: int = 3
    tolerance: float = 1e-3
    max_passes: int = 1000
    jobs: int = 1

    def __post_init__(self):
        if not (0 < self.split_fraction < 1):
            raise ConfigError("split_fraction must lie in (0, 1)")
        for side in self.ladder_sides:
            if side not in RESOLUTION_SIDES:
                raise ConfigError(f"ladder side {side} is not a resolution class {RESOLUTION_SIDES}")
        if len(self.ladder_sides) < 2:
            raise ConfigError("need at least 2 ladder sides to train a classifier")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if any(s < 8 for s in self.crop_sizes):
            raise ConfigError("crop sizes below 8 cannot contain a DCT block")


_LIST_KEYS = {"ladder_sides", "crop_sizes", "c_grid", "gamma_grid"}
_INT_KEYS = {"seed", "folds", "max_passes", "jobs"}
_FLOAT_KEYS = {"split_fraction", "tolerance"}


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a TOML key/value file mirroring ExperimentConfig."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"no such config file: '{path}'")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config '{path}': {exc}")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s) in '{path}': {', '.join(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        if key in _LIST_KEYS:
            if not isinstance(value, list):
                raise ConfigError(f"config key '{key}' must be a list")
            caster = float if key in ("c_grid", "gamma_grid") else int
            kwargs[key] = tuple(caster(v) for v in value)
        elif key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        else:
            kwargs[key] = str(value)
    if overrides:
        kwargs.update(overrides)
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config '{path}': {exc}")


# ---------------------------------------------------------------------------
# Dataset build.
# ---------------------------------------------------------------------------


def list_corpus_images(corpus_dir) -> list[Path]:
    root = Path(corpus_dir)
    if not root.is_dir():
        raise PipelineError(f"corpus directory '{corpus_dir}' does not exist")
    return sorted(p for p in root.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)


def _extract_for_image(args):
    """Worker: one source image -> [(side, betas)] or a skip reason."""
    path_str, sides = args
    img = load_image(path_str)
    square = center_crop_square(img)
    if square.shape[0] < max(sides):
        return ("skip", f"side {square.shape[0]} < max ladder side {max(sides)}")
    ladder = build_resolution_ladder(square, sides)
    return ("ok", [(side, extract_beta_vector(ladder[side])) for side in sides])


def run_dataset_build(config: ExperimentConfig, out_csv=None) -> FeatureTable:
    """Build the labeled beta dataset for every usable corpus image.

    Undersized images are skipped with a logged reason. One record per
    (image, ladder side); record ids are '<filename>@<side>'.
    """
    paths = list_corpus_images(config.corpus_dir)
    if not paths:
        raise PipelineError(f"corpus directory '{config.corpus_dir}' contains no images")
    tasks = [(str(p), tuple(config.ladder_sides)) for p in paths]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_extract_for_image, tasks))
    else:
        results = [_extract_for_image(t) for t in tasks]
    records = []
    usable = 0
    for path, (status, payload) in zip(paths, results):
        if status == "skip":
            log.warning("skipping %s: %s", path.name, payload)
            continue
        usable += 1
        for side, betas in payload:
            records.append(
                FeatureRecord(
                    image_id=f"{path.name}{ID_SEPARATOR}{side}", label=side, features=betas
                )
            )
    if usable == 0:
        raise PipelineError(
            f"no usable images in '{config.corpus_dir}': all are smaller than "
            f"{max(config.ladder_sides)} after the square crop"
        )
    table = FeatureTable(tuple(records))
    if out_csv is not None:
        write_feature_table(table, out_csv)
    return table


# ---------------------------------------------------------------------------
# Split and training.
# ---------------------------------------------------------------------------


def split_by_source(table: FeatureTable, fraction: float, seed: int):
    """Split records so all rungs of one source image stay on one side.

    Returns (train_table, test_table, train_sources, test_sources).
    """
    sources = sorted({source_key(r.image_id) for r in table})
    if len(sources) < 2:
        raise PipelineError("need at least 2 source images to split train/test")
    rng = Random(seed)
    shuffled = sources[:]
    rng.shuffle(shuffled)
    n_test = max(1, round(len(sources) * fraction))
    if n_test >= len(sources):
        n_test = len(sources) - 1
    test_sources = set(shuffled[:n_test])
    train_idx = [i for i, r in enumerate(table.records) if source_key(r.image_id) not in test_sources]
    test_idx = [i for i, r in enumerate(table.records) if source_key(r.image_id) in test_sources]
    return (
        table.subset(train_idx),
        table.subset(test_idx),
        sorted(set(sources) - test_sources),
        sorted(test_sources),
    )


class ConfusionMatrix:
    """Rows = real class, columns = predicted class, counts."""

    def __init__(self, classes, counts):
        self.classes = tuple(int(c) for c in classes)
        self.counts = np.asarray(counts, dtype=np.int64)
        if self.counts.shape != (len(self.classes), len(self.classes)):
            raise ValueError("counts must be square over the class list")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @classmethod
    def from_predictions(cls, classes, real, predicted) -> "ConfusionMatrix":
        classes = tuple(int(c) for c in classes)
        index = {c: k for k, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for r, p in zip(real, predicted):
            counts[index[int(r)], index[int(p)]] += 1
        return cls(classes, counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.counts.sum()) if self.counts.sum() else 0.0

    def row_percentages(self) -> np.ndarray:
        sums = self.counts.sum(axis=1, keepdims=True)
        safe = np.where(sums > 0, sums, 1)
        return 100.0 * self.counts / safe

    def diagonal_inversions(self) -> list[tuple[int, int]]:
        """Adjacent class pairs (small, large) where the smaller class's
        diagonal percentage exceeds the larger's, breaking the expected
        growth of accuracy with resolution."""
        pct = self.row_percentages()
        out = []
        for k in range(len(self.classes) - 1):
            if pct[k, k] > pct[k + 1, k + 1]:
                out.append((self.classes[k], self.classes[k + 1]))
        return out

    def to_csv_text(self) -> str:
        lines = ["real_class," + ",".join(f"pred_{c}" for c in self.classes)]
        for k, c in enumerate(self.classes):
            lines.append(f"{c}," + ",".join(str(int(v)) for v in self.counts[k]))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        pct = self.row_percentages()
        width = 9
        header = "real\\pred".ljust(width) + "".join(str(c).rjust(width) for c in self.classes)
        lines = [header]
        for k, c in enumerate(self.classes):
            row = str(c).ljust(width) + "".join(f"{pct[k, m]:8.2f}%" for m in range(len(self.classes)))
            lines.append(row)
        lines.append(f"overall accuracy: {100.0 * self.accuracy():.2f}% ({self.total} records)")
        for small, large in self.diagonal_inversions():
            lines.append(
                f"note: accuracy for class {small} exceeds class {large}, "
                f"breaking the growth-with-resolution trend"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TrainingResult:
    model: SvmModel
    confusion: ConfusionMatrix
    params: SvmHyperParams
    cv_report: list
    train_sources: list
    test_sources: list


def run_training(table: FeatureTable, config: ExperimentConfig) -> TrainingResult:
    """Grid-search on the train split, fit the final model, score the test split."""
    class_sides = table.class_sides()
    if len(class_sides) < 2:
        raise PipelineError("feature table holds fewer than 2 classes")
    train, test, train_sources, test_sources = split_by_source(
        table, config.split_fraction, config.seed
    )
    for part, name in ((train, "train"), (test, "test")):
        missing = set(class_sides) - set(part.class_sides())
        if missing:
            raise PipelineError(f"class(es) {sorted(missing)} absent from the {name} split")
    params, report = grid_search(
        train,
        c_grid=config.c_grid,
        gamma_grid=config.gamma_grid,
        folds=config.folds,
        seed=config.seed,
        tolerance=config.tolerance,
        max_passes=config.max_passes,
    )
    metadata = {
        "chosen": {"c": params.c, "gamma": params.gamma},
        "grid_report": report,
        "cv_folds": config.folds,
        "seed": config.seed,
        "train_sources": len(train_sources),
        "test_sources": len(test_sources),
        "trained_at": "",
    }
    model = train_multiclass(train, params, metadata=metadata)
    predictions = predict_batch(model, test.matrix())
    confusion = ConfusionMatrix.from_predictions(class_sides, test.labels(), predictions)
    return TrainingResult(
        model=model,
        confusion=confusion,
        params=params,
        cv_report=report,
        train_sources=train_sources,
        test_sources=test_sources,
    )


# ---------------------------------------------------------------------------
# Crop sweep.
# ---------------------------------------------------------------------------


def aligned_center_offset(source_side: int, crop_side: int) -> int:
    """Center offset floored to a multiple of 8, honoring grid alignment."""
    return ((source_side - crop_side) // 2) // 8 * 8


class CropSweepReport:
    """Per-crop-size predicted-class breakdown and crop-detection rate."""

    def __init__(self, source_side, classes, crop_sizes, counts):
        self.source_side = int(source_side)
        self.classes = tuple(int(c) for c in classes)
        self.crop_sizes = tuple(int(s) for s in crop_sizes)
        self.counts = np.asarray(counts, dtype=np.int64)
        if self.counts.shape != (len(self.crop_sizes), len(self.classes)):
            raise ValueError("counts shape must be (#crop sizes, #classes)")

    def row_total(self, row: int) -> int:
        return int(self.counts[row].sum())

    def percentages(self) -> np.ndarray:
        sums = self.counts.sum(axis=1, keepdims=True)
        safe = np.where(sums > 0, sums, 1)
        return 100.0 * self.counts / safe

    def detection_rate(self, row: int) -> float:
        """Fraction of predictions strictly above the row's crop size."""
        crop = self.crop_sizes[row]
        above = [k for k, c in enumerate(self.classes) if c > crop]
        total = self.row_total(row)
        if total == 0:
            return 0.0
        return float(self.counts[row, above].sum() / total)

    def to_csv_text(self) -> str:
        header = (
            "source_side,crop_size,n_images,"
            + ",".join(f"pct_{c}" for c in self.classes)
            + ",detection_pct"
        )
        lines = [header]
        pct = self.percentages()
        for row, size in enumerate(self.crop_sizes):
            cells = ",".join(f"{pct[row, k]:.2f}" for k in range(len(self.classes)))
            lines.append(
                f"{self.source_side},{size},{self.row_total(row)},{cells},"
                f"{100.0 * self.detection_rate(row):.2f}"
            )
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = 9
        header = "crop".ljust(width) + "".join(str(c).rjust(width) for c in self.classes)
        header += "detected".rjust(width + 1)
        lines = [f"crops from {self.source_side}x{self.source_side} sources", header]
        pct = self.percentages()
        for row, size in enumerate(self.crop_sizes):
            line = str(size).ljust(width)
            line += "".join(f"{pct[row, k]:8.2f}%" for k in range(len(self.classes)))
            line += f"{100.0 * self.detection_rate(row):9.2f}%"
            lines.append(line)
        return "\n".join(lines) + "\n"


def run_crop_sweep(model: SvmModel, planes: dict, source_side: int, crop_sizes) -> CropSweepReport:
    """Classify centered grid-aligned crops of held-out source planes.

    `planes` maps image ids to source_side x source_side luminance
    planes that took no part in training.
    """
    crop_sizes = sorted({int(s) for s in crop_sizes}, reverse=True)
    if not planes:
        raise PipelineError("crop sweep needs at least one held-out source plane")
    for size in crop_sizes:
        if size > source_side:
            raise PipelineError(f"crop size {size} exceeds source side {source_side}")
    counts = np.zeros((len(crop_sizes), len(model.classes)), dtype=np.int64)
    class_index = {c: k for k, c in enumerate(model.classes)}
    for image_id in sorted(planes):
        plane = np.asarray(planes[image_id], dtype=np.float64)
        if plane.shape != (source_side, source_side):
            raise PipelineError(
                f"plane '{image_id}' is {plane.shape[1]}x{plane.shape[0]}, "
                f"expected {source_side}x{source_side}"
            )
        for row, size in enumerate(crop_sizes):
            offset = aligned_center_offset(source_side, size)
            crop = aligned_crop(plane, CropSpec(top=offset, left=offset, side=size))
            predicted = classify_resolution(model, crop)
            counts[row, class_index[predicted]] += 1
    return CropSweepReport(source_side, model.classes, crop_sizes, counts)


def _sweep_plane_for_image(args):
    """Worker: decode + crop + resize one corpus image to a sweep source plane."""
    path_str, source_side = args
    img = load_image(path_str)
    square = center_crop_square(img)
    if square.shape[0] < source_side:
        return ("skip", f"side {square.shape[0]} < source side {source_side}")
    return ("ok", to_luminance(bicubic_resize(square, source_side)))


def prepare_source_planes(paths, source_side: int, jobs: int = 1) -> dict:
    """Run the dataset pipeline down to the source_side luminance plane."""
    tasks = [(str(p), int(source_side)) for p in paths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_plane_for_image, tasks))
    else:
        results = [_sweep_plane_for_image(t) for t in tasks]
    planes = {}
    for path, (status, payload) in zip(paths, results):
        if status == "skip":
            log.warning("skipping %s: %s", Path(path).name, payload)
            continue
        planes[Path(path).name] = payload
    if not planes:
        raise PipelineError(f"no corpus image can provide a {source_side}-pixel source plane")
    return planes


# ---------------------------------------------------------------------------
# Beta trend emission.
# ---------------------------------------------------------------------------


def emit_beta_trend(img, ladder_sides, out_path) -> None:
    """Write (side, ac_position, beta) rows for one image's ladder."""
    square = center_crop_square(img)
    ladder = build_resolution_ladder(square, ladder_sides)
    lines = ["side,ac_position,beta"]
    for side in sorted(ladder):
        betas = extract_beta_vector(ladder[side])
        for pos, beta in enumerate(betas, start=1):
            lines.append(f"{side},{pos},{beta:.12g}")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_split_file(result: TrainingResult, path) -> None:
    doc = {
        "train_sources": result.train_sources,
        "test_sources": result.test_sources,
        "chosen": {"c": result.params.c, "gamma": result.params.gamma},
    }
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_grid_report(cv_report, path) -> None:
    lines = ["c,gamma,cv_accuracy"]
    for cell in cv_report:
        lines.append(f"{cell['c']:g},{cell['gamma']:g},{cell['cv_accuracy']:.6f}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
