"""Dataset files under the UCR anomaly-archive naming convention.

A file ``<name>_<train_end>_<begin>_<end>.txt`` holds one float per line.
The window enumeration here mirrors the consuming engine: training windows
lie fully inside ``[0, train_end)``; test windows are those whose reference
time falls at or after ``train_end`` while the window still fits in the
series. The reference time of a window starting at ``s`` with reference
patch ``p`` is ``s + p * patch_length - 1``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetFormatError, EmptyRegionError

_STEM = re.compile(r"^(?P<name>.+)_(?P<train_end>\d+)_(?P<begin>\d+)_(?P<end>\d+)$")

REGIONS = ("train", "test")


@dataclass(frozen=True)
class Dataset:
    name: str
    values: np.ndarray
    train_end: int
    anomaly_begin: int
    anomaly_end: int

    @property
    def length(self) -> int:
        return len(self.values)


def parse_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    match = _STEM.match(path.stem)
    if match is None:
        raise DatasetFormatError(
            f"{path.name}: expected <name>_<train_end>_<begin>_<end>.txt"
        )
    try:
        values = np.array(
            [float(tok) for tok in path.read_text().split()], dtype=np.float64
        )
    except ValueError as exc:
        raise DatasetFormatError(f"{path.name}: non-numeric value ({exc})") from None
    train_end = int(match["train_end"])
    begin, end = int(match["begin"]), int(match["end"])
    if not values.size or not np.all(np.isfinite(values)):
        raise DatasetFormatError(f"{path.name}: empty or non-finite series")
    if not (0 < train_end <= begin <= end < len(values)):
        raise DatasetFormatError(
            f"{path.name}: inconsistent markers train_end={train_end} "
            f"anomaly=[{begin},{end}] length={len(values)}"
        )
    return Dataset(
        name=match["name"], values=values, train_end=train_end,
        anomaly_begin=begin, anomaly_end=end,
    )


def window_starts(
    dataset: Dataset, window_length: int, reference_patch: int,
    patch_length: int, region: str,
) -> np.ndarray:
    """Start indices of stride-1 windows for one region, ascending."""
    if region not in REGIONS:
        raise ValueError(f"region must be one of {REGIONS}, got {region!r}")
    offset = reference_patch * patch_length - 1
    if region == "train":
        last = dataset.train_end - window_length
        starts = np.arange(0, last + 1, dtype=np.int64)
    else:
        first = max(0, dataset.train_end - offset)
        last = dataset.length - window_length
        starts = np.arange(first, last + 1, dtype=np.int64)
        starts = starts[starts + offset >= dataset.train_end]
    if starts.size == 0:
        raise EmptyRegionError(
            f"{dataset.name}: no complete window of length {window_length} "
            f"in the {region} region"
        )
    return starts


def reference_times(starts: np.ndarray, reference_patch: int, patch_length: int) -> np.ndarray:
    return starts + reference_patch * patch_length - 1
