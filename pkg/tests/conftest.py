import numpy as np
import pytest
from PIL import Image

from dctcrop.classifier import BinarySvm, FeatureScaler, SvmHyperParams, SvmModel
from dctcrop.features import RESOLUTION_SIDES, FeatureRecord, FeatureTable

from synth import make_synthetic_plane


def constant_binary(value: float, dim: int = 63) -> BinarySvm:
    """A machine whose decision value is `value` for every input."""
    return BinarySvm(
        support_vectors=np.zeros((1, dim)),
        dual_coefs=np.zeros(1),
        bias=float(value),
        hyperparams=SvmHyperParams(c=100.0, gamma=0.1),
        support_indices=np.zeros(1, dtype=np.intp),
        n_train=2,
    )


def rigged_model(decisions: dict) -> SvmModel:
    """Five-class model with pinned decision values per class pair."""
    binaries = []
    for i in range(5):
        for j in range(i + 1, 5):
            binaries.append((i, j, constant_binary(decisions[(i, j)])))
    scaler = FeatureScaler(means=np.zeros(63), std_devs=np.ones(63))
    return SvmModel(classes=RESOLUTION_SIDES, scaler=scaler, binaries=tuple(binaries))


def model_predicting(side: int) -> SvmModel:
    """A rigged model that predicts `side` for every input."""
    target = RESOLUTION_SIDES.index(side)
    decisions = {}
    for i in range(5):
        for j in range(i + 1, 5):
            if i == target:
                decisions[(i, j)] = +1.0
            elif j == target:
                decisions[(i, j)] = -1.0
            else:
                decisions[(i, j)] = +0.25  # smaller side of the pair
    return rigged_model(decisions)


def make_blob_table(n_per_class: int = 20, seed: int = 0, spread: float = 0.3) -> FeatureTable:
    """Cleanly separable 5-class feature table with beta-like features.

    Every dimension carries class signal (a per-class spectral profile),
    so the clusters stay separated after z-scaling and under an RBF
    kernel at moderate gamma.
    """
    rng = np.random.default_rng(seed)
    dims = np.arange(63)
    records = []
    for k, side in enumerate(RESOLUTION_SIDES):
        center = 8.0 + 2.0 * np.sin(2.0 * np.pi * dims * (k + 1) / 63.0) + 1.2 * k
        for i in range(n_per_class):
            feats = np.clip(center + rng.normal(scale=spread, size=63), 0.0, None)
            records.append(
                FeatureRecord(image_id=f"blob_{side}_{i:03d}@{side}", label=side, features=feats)
            )
    return FeatureTable(tuple(records))


@pytest.fixture
def blob_table():
    return make_blob_table()


def textured_plane(side: int, seed: int = 0) -> np.ndarray:
    """Small deterministic plane with mixed-frequency content in [0, 255]."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:side, 0:side].astype(np.float64)
    plane = (
        128.0
        + 40.0 * np.sin(2 * np.pi * x / 37.0) * np.cos(2 * np.pi * y / 23.0)
        + 25.0 * np.sin(2 * np.pi * (x + y) / 11.0)
        + rng.normal(scale=6.0, size=(side, side))
    )
    return np.clip(plane, 0.0, 255.0)


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    """Ten small PNG images big enough for a {128, 256} ladder."""
    root = tmp_path_factory.mktemp("mini_corpus")
    rng = np.random.default_rng(99)
    for k in range(10):
        h, w = (300, 340) if k % 3 == 0 else (300, 300)
        plane = make_synthetic_plane(h, w, rng)
        Image.fromarray(plane, mode="L").save(root / f"img_{k:02d}.png", compress_level=1)
    return root
