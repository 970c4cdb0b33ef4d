"""Memory-bank anomaly detection for windowed time-series embeddings."""

from .config import RunConfig, derive_seed, resolve_config
from .embedding import (
    EmbeddingConfig,
    EmbeddingMatrix,
    EmbeddingProvider,
    SyntheticProvider,
    embed,
    get_provider,
)
from .errors import (
    BadMagicError,
    ChecksumMismatchError,
    ConfigError,
    CovarianceSingularError,
    DimensionMismatchError,
    EmptyBankError,
    EmptyRegionError,
    MissingArtifactError,
    NoDefinedScoresError,
    TrepError,
    TsmemError,
)
from .evaluation import (
    DatasetResult,
    EvalConfig,
    Report,
    aggregate,
    alpha_quantile,
    evaluate_dataset,
    sweep,
    top1,
)
from .ingest import (
    TimeSeriesRecord,
    Window,
    WindowSpec,
    generate_windows,
    parse_ucr_file,
    window_count,
    write_ucr_file,
)
from .membank import (
    AdaptationEvent,
    MemoryBank,
    NoveltyModel,
    build_bank,
    fit_novelty,
    kcenter_coreset,
    nearest_neighbor,
    nearest_rank_percentile,
    training_nn_distances,
    ttamb_insert,
)
from .pipeline import (
    cmd_build_memory,
    cmd_eval,
    cmd_score,
    cmd_sweep,
    run_eval,
    score_dataset,
)
from .scoring import (
    CovarianceModel,
    DistanceSpec,
    ScoreSeries,
    distance_density,
    distance_euclidean,
    distance_mahalanobis,
    fit_covariance,
    score_stream,
)
from .synth import generate_record, generate_suite, write_suite
from .trep import read_sidecar, read_trep, trep_filename, write_trep

__version__ = "0.1.0"

__all__ = [
    "AdaptationEvent",
    "BadMagicError",
    "ChecksumMismatchError",
    "ConfigError",
    "CovarianceModel",
    "CovarianceSingularError",
    "DatasetResult",
    "DimensionMismatchError",
    "DistanceSpec",
    "EmbeddingConfig",
    "EmbeddingMatrix",
    "EmbeddingProvider",
    "EmptyBankError",
    "EmptyRegionError",
    "EvalConfig",
    "MemoryBank",
    "MissingArtifactError",
    "NoDefinedScoresError",
    "NoveltyModel",
    "Report",
    "RunConfig",
    "ScoreSeries",
    "SyntheticProvider",
    "TimeSeriesRecord",
    "TrepError",
    "TsmemError",
    "Window",
    "WindowSpec",
    "aggregate",
    "alpha_quantile",
    "build_bank",
    "cmd_build_memory",
    "cmd_eval",
    "cmd_score",
    "cmd_sweep",
    "derive_seed",
    "distance_density",
    "distance_euclidean",
    "distance_mahalanobis",
    "embed",
    "evaluate_dataset",
    "fit_covariance",
    "fit_novelty",
    "generate_record",
    "generate_suite",
    "generate_windows",
    "get_provider",
    "kcenter_coreset",
    "nearest_neighbor",
    "nearest_rank_percentile",
    "parse_ucr_file",
    "read_sidecar",
    "read_trep",
    "resolve_config",
    "run_eval",
    "score_dataset",
    "score_stream",
    "sweep",
    "top1",
    "training_nn_distances",
    "trep_filename",
    "ttamb_insert",
    "window_count",
    "write_suite",
    "write_trep",
    "write_ucr_file",
]
