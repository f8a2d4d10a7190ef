"""sarbench: benchmarking toolkit for anomaly detection on SAR-like imagery.

Submodules:
  core        image types, normalization, randomness contract
  ingest      dataset directory loading and validation
  synthesize  speckled synthetic chips with exact ground truth
  normalgen   k-means scrubbing of targets into normal data
  features    multi-scale patch feature extraction
  models      Gaussian-field (Mahalanobis) and PCA-residual scoring
  evaluate    image/pixel metric suite and run aggregation
  visualize   heatmaps and result panels
  bench       config-driven benchmark runner and reports
  cli         the ``bench`` command line tool
"""

try:
    from importlib.metadata import PackageNotFoundError, version

    __version__ = version("sarbench")
except PackageNotFoundError:  # running from a source tree without install
    __version__ = "0.0.0"

from .core import (
    ConfigError,
    DecodeError,
    DegenerateInputError,
    Label,
    LayoutError,
    MetricUndefinedError,
    SampleRecord,
    SarBenchError,
    ValidationError,
    derive_seed,
    invert_image,
    make_rng,
    normalize_image,
)
from .evaluate import MetricsReport, RunAggregate, ScoredSet
from .features import FeatureConfig, FeatureMap, extract_features, select_channels
from .ingest import DatasetSplit, load_dataset, validate_layout
from .models import (
    AnomalyMap,
    GaussianField,
    PcaModel,
    dfm_fit,
    dfm_score,
    image_score,
    padim_fit,
    padim_score,
    postprocess_map,
)
from .normalgen import (
    BackgroundStats,
    KMeansResult,
    NormalGenConfig,
    ShadowRule,
    generate_normal_chip,
    kmeans_1d,
)
from .synthesize import SceneConfig, ShadowSpec, SynthSample, TargetSpec, gen_dataset, gen_scene

__all__ = [
    "__version__",
    "SarBenchError",
    "ValidationError",
    "LayoutError",
    "DecodeError",
    "ConfigError",
    "DegenerateInputError",
    "MetricUndefinedError",
    "Label",
    "SampleRecord",
    "make_rng",
    "derive_seed",
    "normalize_image",
    "invert_image",
    "DatasetSplit",
    "load_dataset",
    "validate_layout",
    "SceneConfig",
    "TargetSpec",
    "ShadowSpec",
    "SynthSample",
    "gen_scene",
    "gen_dataset",
    "NormalGenConfig",
    "ShadowRule",
    "KMeansResult",
    "BackgroundStats",
    "kmeans_1d",
    "generate_normal_chip",
    "FeatureConfig",
    "FeatureMap",
    "extract_features",
    "select_channels",
    "GaussianField",
    "PcaModel",
    "AnomalyMap",
    "padim_fit",
    "padim_score",
    "dfm_fit",
    "dfm_score",
    "postprocess_map",
    "image_score",
    "ScoredSet",
    "MetricsReport",
    "RunAggregate",
]
