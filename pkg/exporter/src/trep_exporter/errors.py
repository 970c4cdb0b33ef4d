"""Exporter error hierarchy."""


class ExporterError(Exception):
    """Base class for everything this package raises on purpose."""


class DatasetFormatError(ExporterError):
    """The dataset file does not follow the name_trainEnd_begin_end.txt convention."""


class EmptyRegionError(ExporterError):
    """The requested region holds no complete window."""


class ModelLoadError(ExporterError):
    """The encoder weights could not be loaded."""


class ShapeMismatchError(ExporterError):
    """Model output does not have the (batch, patches, d_model) shape."""
