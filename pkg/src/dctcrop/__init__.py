"""Resolution classification and crop detection from DCT beta statistics.

The pipeline: decode -> square center crop -> bicubic ladder -> BT.601
luminance -> 8x8 block DCT -> per-AC-position Laplacian beta fit -> 63-dim
feature vector -> one-vs-one RBF SVM -> crop verdict (cropped iff the
predicted source resolution exceeds the actual side).
"""

from .classifier import (
    BinarySvm,
    FeatureScaler,
    SvmHyperParams,
    SvmModel,
    apply_scaler,
    fit_scaler,
    grid_search,
    load_model,
    predict_multiclass,
    rbf_kernel,
    save_model,
    train_binary,
    train_multiclass,
)
from .detector import CropVerdict, classify_resolution, detect_crop
from .errors import (
    ConfigError,
    ConvergenceError,
    CropError,
    ImageDecodeError,
    ModelFormatError,
    PipelineError,
    SchemaError,
)
from .features import (
    FeatureRecord,
    FeatureTable,
    RESOLUTION_SIDES,
    build_resolution_ladder,
    extract_beta_vector,
    read_feature_table,
    write_feature_table,
)
from .harness import (
    ConfusionMatrix,
    CropSweepReport,
    ExperimentConfig,
    run_crop_sweep,
    run_dataset_build,
    run_training,
)
from .imagery import (
    CropSpec,
    aligned_crop,
    bicubic_resize,
    center_crop_square,
    load_image,
    to_luminance,
)
from .laplace import LaplaceFit, fit_laplace, laplace_log_likelihood
from .transform import DctBlock, block_decompose, dct_1d, dct_2d_block, idct_1d

__version__ = "0.1.0"
