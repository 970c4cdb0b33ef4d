"""trep-exporter: frozen-encoder patch embeddings written as TREP containers."""

from .errors import (
    DatasetFormatError,
    EmptyRegionError,
    ExporterError,
    ModelLoadError,
    ShapeMismatchError,
)
from .export import ExportJob, ExportResult, run_export
from .model import DEFAULT_MODEL_ID, StubEncoder, load_model
from .trepfile import container_name, stored_checksum, write_container
from .ucr import Dataset, parse_dataset, reference_times, window_starts

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DatasetFormatError",
    "DEFAULT_MODEL_ID",
    "EmptyRegionError",
    "ExportJob",
    "ExportResult",
    "ExporterError",
    "ModelLoadError",
    "ShapeMismatchError",
    "StubEncoder",
    "container_name",
    "load_model",
    "parse_dataset",
    "reference_times",
    "run_export",
    "stored_checksum",
    "window_starts",
    "write_container",
]
