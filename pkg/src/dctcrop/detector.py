"""Crop detection: classify the source resolution, compare to actual size.

The decision rule is strict: an image is flagged as cropped exactly when
the predicted class side is numerically greater than its actual side.
Equality means "consistent with native resolution". Non-class actual
sizes compare numerically, so crops like 750x750 are handled unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .classifier import SvmModel, predict_multiclass, predict_with_votes
from .features import extract_beta_vector


@dataclass(frozen=True)
class CropVerdict:
    image_id: str
    actual_side: int
    predicted: int
    cropped: bool
    votes: dict
    non_square: bool = False

    def to_json_line(self) -> str:
        doc = {
            "image_id": self.image_id,
            "actual_side": self.actual_side,
            "predicted": self.predicted,
            "cropped": self.cropped,
            "votes": {str(side): self.votes[side] for side in sorted(self.votes)},
        }
        if self.non_square:
            doc["non_square"] = True
        return json.dumps(doc, separators=(", ", ": "))


def classify_resolution(model: SvmModel, plane) -> int:
    """Predict the source-resolution class of a luminance plane as-is."""
    betas = extract_beta_vector(plane)
    return predict_multiclass(model, betas)


def detect_crop(model: SvmModel, plane, image_id: str = "") -> CropVerdict:
    """Apply the crop rule: cropped iff predicted side > actual side.

    For non-square planes the actual side is min(width, height) and the
    verdict is flagged; the classifier still sees the full plane.
    """
    arr = np.asarray(plane)
    if arr.ndim != 2:
        raise ValueError("detect_crop expects a 2-D luminance plane")
    h, w = arr.shape
    actual = int(min(h, w))
    predicted, votes = predict_with_votes(model, extract_beta_vector(arr))
    return CropVerdict(
        image_id=image_id,
        actual_side=actual,
        predicted=int(predicted),
        cropped=predicted > actual,
        votes=votes,
        non_square=(h != w),
    )
