"""Embedding provider contract and the deterministic synthetic provider.

A provider turns windows into fixed-size vectors, one row per window. Real
model output arrives through TREP files produced by an external exporter;
the synthetic provider here exists so the whole pipeline can be exercised
and tested without any model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmbeddingInvariantError,
    ProviderUnavailableError,
)
from .ingest import Window, WindowSpec


@dataclass(frozen=True)
class EmbeddingConfig:
    """Which representation to extract and its dimensionality."""

    spec: WindowSpec
    layer: int = 16
    d_model: int = 1024
    provider_id: str = ""

    def __post_init__(self):
        if self.d_model <= 0:
            raise ValueError("d_model must be positive")
        if self.layer < 1:
            raise ValueError("layer index must be >= 1")


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """Rows of per-window vectors aligned to strictly increasing time steps.

    Stored as float32, matching the wire format, so an in-memory matrix and
    one round-tripped through a TREP file are bit-identical.
    """

    data: np.ndarray
    reference_times: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        times = np.asarray(self.reference_times, dtype=np.int64)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "reference_times", times)
        if data.ndim != 2:
            raise EmbeddingInvariantError("data must be a 2-D matrix")
        if len(times) != data.shape[0]:
            raise EmbeddingInvariantError(
                f"{data.shape[0]} rows but {len(times)} reference times"
            )
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise EmbeddingInvariantError("reference times must be strictly increasing")
        if data.size and not np.all(np.isfinite(data)):
            raise EmbeddingInvariantError("embedding matrix contains NaN/Inf")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Anything that can embed a batch of windows. Must be read-only safe."""

    provider_id: str

    def embed_many(
        self, windows: Sequence[Window], config: EmbeddingConfig
    ) -> np.ndarray: ...


class SyntheticProvider:
    """Deterministic stand-in embedder used for tests and synthetic suites.

    Per window: z-normalize the raw values (epsilon-guarded), slice out the
    reference patch, then push it through a fixed seed-derived linear map
    followed by tanh. Scale and shift of the raw window cancel out, so the
    embedding reacts to local shape only.
    """

    EPS = 1e-8

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.provider_id = f"synthetic-v1-seed{self.seed}"
        self._maps: dict[tuple[int, int], np.ndarray] = {}

    def _map(self, patch_length: int, d_model: int) -> np.ndarray:
        key = (patch_length, d_model)
        if key not in self._maps:
            rng = np.random.default_rng(self.seed)
            self._maps[key] = rng.standard_normal((patch_length, d_model)) / np.sqrt(
                patch_length
            )
        return self._maps[key]

    def embed_many(
        self, windows: Sequence[Window], config: EmbeddingConfig
    ) -> np.ndarray:
        spec = config.spec
        weights = self._map(spec.patch_length, config.d_model)
        if not windows:
            return np.empty((0, config.d_model), dtype=np.float64)
        stacked = np.stack([w.values for w in windows]).astype(np.float64)
        mean = stacked.mean(axis=1, keepdims=True)
        std = stacked.std(axis=1, keepdims=True)
        normed = (stacked - mean) / (std + self.EPS)
        lo = (spec.reference_patch - 1) * spec.patch_length
        patches = normed[:, lo : lo + spec.patch_length]
        # einsum (unoptimized) accumulates each output cell in a fixed order,
        # so a window embeds to the same bits whatever batch it rides in.
        return np.tanh(np.einsum("wp,pd->wd", patches, weights))


def synthetic_embed(window: Window, config: EmbeddingConfig, seed: int) -> np.ndarray:
    """Embed a single window with the synthetic provider."""
    return SyntheticProvider(seed).embed_many([window], config)[0]


def embed(
    provider: EmbeddingProvider,
    windows: Sequence[Window],
    config: EmbeddingConfig,
) -> EmbeddingMatrix:
    """Run a provider over windows, preserving order, one row per window."""
    for w in windows:
        if len(w.values) != config.spec.window_length:
            raise DimensionMismatchError(
                f"window at t={w.reference_time} has {len(w.values)} values, "
                f"spec says {config.spec.window_length}"
            )
    rows = provider.embed_many(windows, config)
    rows = np.asarray(rows)
    if rows.shape != (len(windows), config.d_model):
        raise DimensionMismatchError(
            f"provider {provider.provider_id!r} returned shape {rows.shape}, "
            f"expected {(len(windows), config.d_model)}"
        )
    times = np.array([w.reference_time for w in windows], dtype=np.int64)
    return EmbeddingMatrix(data=rows, reference_times=times)


def get_provider(source: str) -> EmbeddingProvider:
    """Resolve a provider from a source string like ``synthetic:7``."""
    kind, _, arg = source.partition(":")
    if kind == "synthetic":
        return SyntheticProvider(int(arg) if arg else 0)
    raise ProviderUnavailableError(f"no embedding provider for source {source!r}")
