"""UCR-style series parsing and sliding-window generation.

A dataset is a single text file of whitespace-separated reals whose filename
encodes the train/test split and the labeled anomaly interval:

    <name>_<train_end>_<anomaly_begin>_<anomaly_end>.txt

Time steps are 0-based. ``train_end`` is the exclusive end of the training
region; the anomaly interval is inclusive on both ends and must lie inside
the test region.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import (
    EmptyRegionError,
    MalformedFilenameError,
    NonNumericValueError,
    RecordInvariantError,
)

Region = Literal["train", "test"]

_STEM_RE = re.compile(r"^(?P<name>.+)_(?P<train_end>\d+)_(?P<a>\d+)_(?P<b>\d+)$")


@dataclass(frozen=True, eq=False)
class TimeSeriesRecord:
    """One univariate series with its split point and labeled anomaly."""

    name: str
    values: np.ndarray
    train_end: int
    anomaly_begin: int
    anomaly_end: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise RecordInvariantError(f"{self.name}: values must be 1-D")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise NonNumericValueError(
                f"{self.name}: non-finite value at position {bad}"
            )
        t = len(values)
        if not 0 < self.train_end < t:
            raise RecordInvariantError(
                f"{self.name}: train_end={self.train_end} outside (0, {t})"
            )
        if not self.train_end <= self.anomaly_begin <= self.anomaly_end < t:
            raise RecordInvariantError(
                f"{self.name}: anomaly [{self.anomaly_begin}, {self.anomaly_end}] "
                f"must satisfy train_end <= begin <= end < {t}"
            )

    @property
    def length(self) -> int:
        return len(self.values)

    def labels(self) -> np.ndarray:
        """Per-step binary labels: 1 inside the anomaly interval."""
        y = np.zeros(self.length, dtype=np.int8)
        y[self.anomaly_begin : self.anomaly_end + 1] = 1
        return y


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window geometry and the scored reference patch.

    The window is cut into ``window_length / patch_length`` non-overlapping
    patches, indexed 1-based. ``reference_patch`` selects which patch's
    representation is scored; its reference time step is the last time step
    covered by that patch.
    """

    window_length: int = 512
    stride: int = 1
    patch_length: int = 8
    reference_patch: int = 64

    def __post_init__(self):
        if self.window_length <= 0 or self.stride <= 0 or self.patch_length <= 0:
            raise ValueError("window_length, stride and patch_length must be positive")
        if self.window_length % self.patch_length != 0:
            raise ValueError(
                f"window_length {self.window_length} is not a multiple of "
                f"patch_length {self.patch_length}"
            )
        if not 1 <= self.reference_patch <= self.num_patches:
            raise ValueError(
                f"reference_patch {self.reference_patch} outside [1, {self.num_patches}]"
            )

    @property
    def num_patches(self) -> int:
        return self.window_length // self.patch_length

    @property
    def reference_offset(self) -> int:
        """Offset of the reference time step from the window start."""
        return self.reference_patch * self.patch_length - 1

    @classmethod
    def from_preset(
        cls,
        preset: str,
        window_length: int = 512,
        stride: int = 1,
        patch_length: int = 8,
    ) -> "WindowSpec":
        """Resolve a named reference position: 'center' or 'last'."""
        n = window_length // patch_length
        if preset == "center":
            patch = max(1, n // 2)
        elif preset == "last":
            patch = n
        else:
            raise ValueError(f"unknown reference-patch preset {preset!r}")
        return cls(window_length, stride, patch_length, patch)


@dataclass(frozen=True, eq=False)
class Window:
    """One placed window: raw values plus the time step its score refers to."""

    reference_time: int
    window_start: int
    values: np.ndarray


def parse_ucr_file(path: str | Path) -> TimeSeriesRecord:
    """Parse one dataset file, reading split and labels from the filename.

    Raises:
        MalformedFilenameError: fewer than three trailing integer fields.
        NonNumericValueError: a body token is not a finite real.
        RecordInvariantError: the decoded fields violate the layout invariants.
    """
    path = Path(path)
    match = _STEM_RE.match(path.stem)
    if match is None:
        raise MalformedFilenameError(
            f"{path.name}: expected '<name>_<train_end>_<a>_<b>{path.suffix}'"
        )
    tokens = path.read_text().split()
    values = np.empty(len(tokens), dtype=np.float64)
    for i, token in enumerate(tokens):
        try:
            values[i] = float(token)
        except ValueError:
            raise NonNumericValueError(
                f"{path.name}: token {token!r} at position {i} is not a number"
            ) from None
    return TimeSeriesRecord(
        name=match["name"],
        values=values,
        train_end=int(match["train_end"]),
        anomaly_begin=int(match["a"]),
        anomaly_end=int(match["b"]),
    )


def write_ucr_file(record: TimeSeriesRecord, directory: str | Path) -> Path:
    """Serialize a record back to the filename-labeled text format."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / (
        f"{record.name}_{record.train_end}_"
        f"{record.anomaly_begin}_{record.anomaly_end}.txt"
    )
    path.write_text("\n".join(repr(v) for v in record.values.tolist()) + "\n")
    return path


def record_manifest(record: TimeSeriesRecord, source: str | Path = "") -> dict:
    """Bookkeeping summary of a record (no values)."""
    return {
        "name": record.name,
        "length": record.length,
        "train_end": record.train_end,
        "anomaly_begin": record.anomaly_begin,
        "anomaly_end": record.anomaly_end,
        "source": str(source),
    }


def write_manifest(records: list[tuple[TimeSeriesRecord, str]], path: str | Path) -> None:
    entries = [record_manifest(rec, src) for rec, src in records]
    Path(path).write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n")


def generate_windows(
    record: TimeSeriesRecord, spec: WindowSpec, region: Region
) -> list[Window]:
    """Enumerate windows for one region, ordered by ascending reference time.

    Train windows lie fully inside ``[0, train_end)``. Test windows are those
    whose reference time falls in the test region; their left extent may reach
    back into the training region, which is required to score the first test
    steps at all. Test steps too close to the series end to host a full
    window simply get no entry (callers treat them as undefined).
    """
    length = spec.window_length
    offset = spec.reference_offset
    if region == "train":
        if record.train_end < length:
            raise EmptyRegionError(
                f"{record.name}: train region of {record.train_end} steps is "
                f"shorter than window length {length}"
            )
        first, last = 0, record.train_end - length
    elif region == "test":
        if record.length < length:
            raise EmptyRegionError(
                f"{record.name}: test series of {record.length} steps is "
                f"shorter than window length {length}"
            )
        first = max(0, record.train_end - offset)
        last = record.length - length
    else:
        raise ValueError(f"unknown region {region!r}")

    windows = []
    for start in range(first, last + 1, spec.stride):
        windows.append(
            Window(
                reference_time=start + offset,
                window_start=start,
                values=record.values[start : start + length],
            )
        )
    return windows


def window_count(record: TimeSeriesRecord, spec: WindowSpec, region: Region) -> int:
    """Number of windows generate_windows would emit, without materializing."""
    if region == "train":
        span = record.train_end - spec.window_length + 1
    else:
        first = max(0, record.train_end - spec.reference_offset)
        span = record.length - spec.window_length + 1 - first
    if span <= 0:
        return 0
    return int(math.ceil(span / spec.stride))
