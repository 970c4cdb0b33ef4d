"""The export job: windows in, one TREP container per (layer, patch) out."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import ExporterError, ShapeMismatchError
from .model import (
    CAPTURE_POINT,
    DEFAULT_MODEL_ID,
    LAYER_INDEXING,
    load_model,
)
from .trepfile import container_name, write_container
from .ucr import REGIONS, parse_dataset, reference_times, window_starts


@dataclass(frozen=True)
class ExportJob:
    dataset: Path
    out_dir: Path
    layers: tuple[int, ...]
    patches: tuple[int, ...]
    region: str = "train"
    window_length: int = 512
    patch_length: int = 8
    model_id: str = DEFAULT_MODEL_ID
    batch: int = 64

    def __post_init__(self):
        object.__setattr__(self, "dataset", Path(self.dataset))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "layers", tuple(int(v) for v in self.layers))
        object.__setattr__(self, "patches", tuple(int(v) for v in self.patches))
        if self.region not in REGIONS:
            raise ValueError(f"region must be one of {REGIONS}, got {self.region!r}")
        if not self.layers or not self.patches:
            raise ValueError("need at least one layer and one patch")
        if len(set(self.layers)) != len(self.layers):
            raise ValueError(f"duplicate layer in {self.layers}")
        if len(set(self.patches)) != len(self.patches):
            raise ValueError(f"duplicate patch in {self.patches}")
        if any(v < 1 for v in self.layers):
            raise ValueError("layer indices are 1-based and must be >= 1")
        if self.window_length < 1 or self.patch_length < 1:
            raise ValueError("window and patch lengths must be positive")
        if self.window_length % self.patch_length:
            raise ValueError(
                f"window length {self.window_length} is not a multiple of "
                f"patch length {self.patch_length}"
            )
        n = self.window_length // self.patch_length
        bad = [p for p in self.patches if not 1 <= p <= n]
        if bad:
            raise ValueError(f"patches {bad} outside 1..{n}")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")

    @property
    def num_patches(self) -> int:
        return self.window_length // self.patch_length


@dataclass(frozen=True)
class ExportedFile:
    path: Path
    rows: int


@dataclass
class ExportResult:
    files: list[ExportedFile] = field(default_factory=list)

    @property
    def paths(self) -> list[Path]:
        return [f.path for f in self.files]


def run_export(job: ExportJob) -> ExportResult:
    """Run the frozen encoder over every window and write the containers.

    The window set depends on the reference patch in the test region (the
    first scoreable step is pinned to train_end, and the usable tail
    differs), so starts are enumerated per patch and the model runs once
    over their union. Windows go through in fixed-size batches so memory
    stays bounded; all requested layers are captured from the same forward
    pass.
    """
    dataset = parse_dataset(job.dataset)
    encoder = load_model(job.model_id)
    if any(layer > encoder.depth for layer in job.layers):
        raise ExporterError(
            f"layers {job.layers} exceed model depth {encoder.depth}"
        )
    if encoder.patch_length is not None and encoder.patch_length != job.patch_length:
        raise ExporterError(
            f"model {job.model_id!r} patches at {encoder.patch_length}, "
            f"job asked for {job.patch_length}"
        )
    if encoder.expected_length is not None and encoder.expected_length != job.window_length:
        raise ExporterError(
            f"model {job.model_id!r} expects input length {encoder.expected_length}, "
            f"job asked for {job.window_length}"
        )

    starts_by_patch = {
        patch: window_starts(
            dataset, job.window_length, patch, job.patch_length, job.region
        )
        for patch in job.patches
    }
    union = np.unique(np.concatenate(list(starts_by_patch.values())))
    values = dataset.values.astype(np.float32)
    collected: dict[tuple[int, int], list[np.ndarray]] = {
        (layer, patch): [] for layer in job.layers for patch in job.patches
    }
    n = job.num_patches
    for lo in range(0, len(union), job.batch):
        chunk = union[lo : lo + job.batch]
        stacked = np.stack([values[s : s + job.window_length] for s in chunk])
        captured = encoder.encode_layers(torch.from_numpy(stacked), job.layers)
        for layer in job.layers:
            hidden = captured[layer]
            if tuple(hidden.shape) != (len(chunk), n, encoder.d_model):
                raise ShapeMismatchError(
                    f"layer {layer}: model returned {tuple(hidden.shape)}, "
                    f"expected {(len(chunk), n, encoder.d_model)}"
                )
            block = hidden.numpy()
            if not np.all(np.isfinite(block)):
                raise ExporterError(f"layer {layer}: non-finite activations")
            for patch in job.patches:
                keep = np.isin(chunk, starts_by_patch[patch])
                if keep.any():
                    collected[(layer, patch)].append(block[keep, patch - 1, :].copy())

    result = ExportResult()
    for (layer, patch), pieces in collected.items():
        matrix = np.concatenate(pieces, axis=0)
        starts = starts_by_patch[patch]
        if matrix.shape[0] != len(starts):
            raise ShapeMismatchError(
                f"layer {layer} patch {patch}: collected {matrix.shape[0]} rows "
                f"for {len(starts)} windows"
            )
        times = reference_times(starts, patch, job.patch_length)
        meta = {
            "provider_id": job.model_id,
            "dataset": dataset.name,
            "layer": layer,
            "d_model": encoder.d_model,
            "window_spec": {
                "window_length": job.window_length,
                "stride": 1,
                "patch_length": job.patch_length,
                "reference_patch": patch,
            },
            "region": job.region,
            "rows": len(starts),
            "model": {
                "id": job.model_id,
                "depth": encoder.depth,
                "hidden_state": CAPTURE_POINT,
                "layer_indexing": LAYER_INDEXING,
            },
        }
        path = Path(job.out_dir) / container_name(dataset.name, layer, patch, job.region)
        write_container(
            path, matrix, times, layer=layer, reference_patch=patch, meta=meta
        )
        result.files.append(ExportedFile(path=path, rows=len(starts)))
    result.files.sort(key=lambda f: f.path)
    return result
