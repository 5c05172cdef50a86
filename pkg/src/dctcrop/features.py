"""Per-image beta feature vectors and the labeled feature dataset.

One image yields 63 Laplacian scale parameters: the DCT coefficient at
each AC position, pooled across all 8x8 blocks of the luminance plane,
is fitted to a Laplacian and only its beta survives. The vector is laid
out in JPEG zigzag order (positions 1..63, DC excluded), so its length
never depends on the image size.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError
from .imagery import bicubic_resize, to_luminance, _ensure_rgb
from .laplace import fit_laplace
from .transform import AC_FLAT_INDICES, block_dct

#: The five source-resolution classes the classifier distinguishes.
RESOLUTION_SIDES: tuple[int, ...] = (128, 256, 512, 1024, 2048)

N_FEATURES = 63

_CSV_HEADER = ["image_id", "label"] + [f"beta_{k:02d}" for k in range(1, N_FEATURES + 1)]


def extract_beta_vector(plane) -> np.ndarray:
    """Fit one beta per AC position across all blocks of a plane.

    Returns the 63 scale parameters in zigzag order. Needs a plane of at
    least 16x16 so every position has a handful of samples.
    """
    arr = np.asarray(plane, dtype=np.float64)
    if arr.ndim != 2 or min(arr.shape) < 16:
        raise ValueError(f"plane must be at least 16x16, got {arr.shape}")
    coeffs = block_dct(arr)
    flat = coeffs.reshape(-1, 64)
    betas = np.empty(N_FEATURES, dtype=np.float64)
    for k, idx in enumerate(AC_FLAT_INDICES):
        betas[k] = fit_laplace(flat[:, idx]).beta
    return betas


def build_resolution_ladder(img, sides) -> dict[int, np.ndarray]:
    """Resize a square RGB image to each requested side and take luminance.

    The pipeline order is crop -> resize -> luminance; callers pass an
    already square image (center_crop_square upstream).
    """
    rgb = _ensure_rgb(img)
    if rgb.shape[0] != rgb.shape[1]:
        raise ValueError("ladder input must be square; run center_crop_square first")
    source_side = rgb.shape[0]
    sides = [int(s) for s in sides]
    for side in sides:
        if side < 1 or side > source_side:
            raise ValueError(f"ladder side {side} exceeds source side {source_side}")
    return {side: to_luminance(bicubic_resize(rgb, side)) for side in sides}


def _check_label(label: int) -> int:
    label = int(label)
    if label not in RESOLUTION_SIDES:
        raise ValueError(f"label {label} is not one of the resolution classes {RESOLUTION_SIDES}")
    return label


@dataclass(frozen=True)
class FeatureRecord:
    """One labeled beta vector; image_id is unique within a table."""

    image_id: str
    label: int
    features: np.ndarray

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        _check_label(self.label)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} features, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)) or np.any(feats < 0):
            raise ValueError("beta features must be finite and non-negative")
        object.__setattr__(self, "features", feats)


@dataclass(frozen=True)
class FeatureTable:
    """Ordered collection of FeatureRecords, canonically sorted."""

    records: tuple[FeatureRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ordered = tuple(sorted(self.records, key=lambda r: (r.image_id, r.label)))
        ids = [r.image_id for r in ordered]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate image_id(s): {', '.join(dupes)}")
        object.__setattr__(self, "records", ordered)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def class_sides(self) -> tuple[int, ...]:
        return tuple(sorted({r.label for r in self.records}))

    def matrix(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, N_FEATURES), dtype=np.float64)
        return np.stack([r.features for r in self.records])

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def subset(self, indices) -> "FeatureTable":
        return FeatureTable(tuple(self.records[i] for i in indices))


def write_feature_table(table: FeatureTable, path) -> None:
    """Write the canonical CSV: header, one row per record, 12-digit betas."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_HEADER)
    for rec in table:
        writer.writerow([rec.image_id, rec.label] + [f"{b:.12g}" for b in rec.features])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_feature_table(path) -> FeatureTable:
    """Parse a feature CSV, validating the schema hard."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"'{path}' is empty: missing header")
        if header != _CSV_HEADER:
            missing = [col for col in _CSV_HEADER if col not in header]
            extra = [col for col in header if col not in _CSV_HEADER]
            detail = []
            if missing:
                detail.append(f"missing column(s) {', '.join(missing)}")
            if extra:
                detail.append(f"unexpected column(s) {', '.join(extra)}")
            if not detail:
                detail.append("columns out of order")
            raise SchemaError(f"'{path}' has a bad header: {'; '.join(detail)}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(_CSV_HEADER):
                raise SchemaError(
                    f"'{path}' line {lineno}: expected {len(_CSV_HEADER)} columns, got {len(row)}"
                )
            image_id = row[0]
            try:
                label = _check_label(int(row[1]))
            except ValueError as exc:
                raise SchemaError(f"'{path}' line {lineno}: bad label: {exc}")
            try:
                betas = np.array([float(v) for v in row[2:]], dtype=np.float64)
            except ValueError:
                raise SchemaError(f"'{path}' line {lineno}: non-numeric beta value")
            if not np.all(np.isfinite(betas)) or np.any(betas < 0):
                raise SchemaError(f"'{path}' line {lineno}: beta values must be finite and >= 0")
            records.append(FeatureRecord(image_id=image_id, label=label, features=betas))
    try:
        return FeatureTable(tuple(records))
    except ValueError as exc:
        raise SchemaError(f"'{path}': {exc}")
