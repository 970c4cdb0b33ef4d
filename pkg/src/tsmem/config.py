"""Run configuration: a flat key=value file, CLI overrides, seed derivation.

The file format is deliberately plain text with one key per line so that
experiment configs diff cleanly. Every key has a fixed type; unknown keys
are rejected rather than ignored, which catches typos before a long run.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .errors import ConfigError
from .ingest import WindowSpec

_MASK63 = (1 << 63) - 1

SOURCES = ("synthetic", "trep")

#: key -> short description, used in error messages and docs
SCHEMA: dict[str, str] = {
    "data": "dataset file, directory, or glob",
    "out": "output directory",
    "source": "embedding source: synthetic | trep",
    "synthetic_seed": "seed for the synthetic embedding map",
    "trep_dir": "directory of precomputed embedding files (source=trep)",
    "layer": "encoder layer the embeddings come from",
    "d_model": "embedding width",
    "window_length": "sliding window length L",
    "patch_length": "patch length P",
    "stride": "window stride",
    "reference_patch": "patch index 1..N, or preset center | last",
    "coreset_size": "memory bank cap: positive int or unbounded",
    "seed": "master seed; per-dataset seeds derive from it",
    "distance": "euclidean | mahalanobis | density",
    "density_b": "neighborhood size for the density distance",
    "ridge_lambda": "covariance ridge scale for mahalanobis",
    "ttamb": "test-time adaptation: on | off",
    "novelty_percentile": "training-distance percentile for the novelty gate",
    "capacity_limit": "max adapted bank size: positive int or none",
    "delta": "evaluation tolerance around the labeled interval",
    "alphas": "comma-separated alpha-quantile levels, e.g. 0.03,0.10",
    "workers": "dataset-level parallelism",
}

DEFAULTS: dict[str, str] = {
    "data": "",
    "out": "out",
    "source": "synthetic",
    "synthetic_seed": "7",
    "trep_dir": "",
    "layer": "16",
    "d_model": "1024",
    "window_length": "512",
    "patch_length": "8",
    "stride": "1",
    "reference_patch": "center",
    "coreset_size": "unbounded",
    "seed": "0",
    "distance": "euclidean",
    "density_b": "5",
    "ridge_lambda": "0.001",
    "ttamb": "off",
    "novelty_percentile": "80",
    "capacity_limit": "none",
    "delta": "100",
    "alphas": "0.03,0.10",
    "workers": "1",
}


def derive_seed(master: int, name: str) -> int:
    """Stable per-dataset seed: master XOR the head of sha256(name)."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return (master ^ int.from_bytes(digest[:8], "big")) & _MASK63


def _parse_int(key: str, raw: str, minimum: int) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if value < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {value}")
    return value


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _parse_alphas(raw: str) -> dict[str, float]:
    alphas: dict[str, float] = {}
    for part in raw.split(","):
        label = part.strip()
        if not label:
            raise ConfigError(f"alphas: empty entry in {raw!r}")
        value = _parse_float("alphas", label)
        if not 0 < value <= 1:
            raise ConfigError(f"alphas: {label} outside (0, 1]")
        if label in alphas:
            raise ConfigError(f"alphas: duplicate level {label}")
        alphas[label] = value
    return alphas


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run settings (presets expanded, strings typed)."""

    data: str
    out: str
    source: str
    synthetic_seed: int
    trep_dir: str
    layer: int
    d_model: int
    window_length: int
    patch_length: int
    stride: int
    reference_patch: int
    coreset_size: Optional[int]
    seed: int
    distance: str
    density_b: int
    ridge_lambda: float
    ttamb: bool
    novelty_percentile: float
    capacity_limit: Optional[int]
    delta: int
    alphas: Mapping[str, float] = field(default_factory=dict)
    workers: int = 1

    def window_spec(self) -> WindowSpec:
        return WindowSpec(
            window_length=self.window_length,
            stride=self.stride,
            patch_length=self.patch_length,
            reference_patch=self.reference_patch,
        )

    def provider_spec(self) -> str:
        return f"synthetic:{self.synthetic_seed}"

    def echo(self) -> dict[str, object]:
        """The resolved configuration as plain JSON-ready values."""
        return {
            "data": self.data,
            "out": self.out,
            "source": self.source,
            "synthetic_seed": self.synthetic_seed,
            "trep_dir": self.trep_dir,
            "layer": self.layer,
            "d_model": self.d_model,
            "window_length": self.window_length,
            "patch_length": self.patch_length,
            "stride": self.stride,
            "reference_patch": self.reference_patch,
            "coreset_size": self.coreset_size,
            "seed": self.seed,
            "distance": self.distance,
            "density_b": self.density_b,
            "ridge_lambda": self.ridge_lambda,
            "ttamb": self.ttamb,
            "novelty_percentile": self.novelty_percentile,
            "capacity_limit": self.capacity_limit,
            "delta": self.delta,
            "alphas": dict(self.alphas),
            "workers": self.workers,
        }


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Raw key=value pairs from one config document."""
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{origin}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in SCHEMA:
            known = ", ".join(sorted(SCHEMA))
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r} (known: {known})")
        if key in pairs:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def resolve_config(
    path: Optional[str | Path] = None,
    overrides: Optional[list[str]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Layer defaults <- file <- --set overrides <- environment, then type."""
    pairs = dict(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        pairs.update(parse_config_text(path.read_text(), origin=str(path)))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            known = ", ".join(sorted(SCHEMA))
            raise ConfigError(f"--set: unknown key {key!r} (known: {known})")
        pairs[key] = value.strip()
    env = os.environ if env is None else env
    if env.get("TSMEM_WORKERS"):
        pairs["workers"] = env["TSMEM_WORKERS"]
    if env.get("TSMEM_OUT_DIR"):
        pairs["out"] = env["TSMEM_OUT_DIR"]
    return _typed(pairs)


def _typed(pairs: dict[str, str]) -> RunConfig:
    source = pairs["source"]
    if source not in SOURCES:
        raise ConfigError(f"source: expected one of {SOURCES}, got {source!r}")
    distance = pairs["distance"]
    if distance not in ("euclidean", "mahalanobis", "density"):
        raise ConfigError(f"distance: unknown kind {distance!r}")
    ttamb_raw = pairs["ttamb"]
    if ttamb_raw not in ("on", "off"):
        raise ConfigError(f"ttamb: expected on or off, got {ttamb_raw!r}")

    window_length = _parse_int("window_length", pairs["window_length"], 1)
    patch_length = _parse_int("patch_length", pairs["patch_length"], 1)
    stride = _parse_int("stride", pairs["stride"], 1)

    ref_raw = pairs["reference_patch"]
    if ref_raw in ("center", "last"):
        spec = WindowSpec.from_preset(
            ref_raw,
            window_length=window_length,
            stride=stride,
            patch_length=patch_length,
        )
        reference_patch = spec.reference_patch
    else:
        reference_patch = _parse_int("reference_patch", ref_raw, 1)

    coreset_raw = pairs["coreset_size"]
    coreset_size = (
        None if coreset_raw == "unbounded" else _parse_int("coreset_size", coreset_raw, 1)
    )
    capacity_raw = pairs["capacity_limit"]
    capacity_limit = (
        None if capacity_raw == "none" else _parse_int("capacity_limit", capacity_raw, 1)
    )

    novelty_q = _parse_float("novelty_percentile", pairs["novelty_percentile"])
    if not 0 < novelty_q <= 100:
        raise ConfigError(f"novelty_percentile: {novelty_q} outside (0, 100]")
    ridge_lambda = _parse_float("ridge_lambda", pairs["ridge_lambda"])
    if ridge_lambda < 0:
        raise ConfigError("ridge_lambda: must be >= 0")

    return RunConfig(
        data=pairs["data"],
        out=pairs["out"],
        source=source,
        synthetic_seed=_parse_int("synthetic_seed", pairs["synthetic_seed"], 0),
        trep_dir=pairs["trep_dir"],
        layer=_parse_int("layer", pairs["layer"], 1),
        d_model=_parse_int("d_model", pairs["d_model"], 1),
        window_length=window_length,
        patch_length=patch_length,
        stride=stride,
        reference_patch=reference_patch,
        coreset_size=coreset_size,
        seed=_parse_int("seed", pairs["seed"], 0),
        distance=distance,
        density_b=_parse_int("density_b", pairs["density_b"], 2),
        ridge_lambda=ridge_lambda,
        ttamb=ttamb_raw == "on",
        novelty_percentile=novelty_q,
        capacity_limit=capacity_limit,
        delta=_parse_int("delta", pairs["delta"], 0),
        alphas=_parse_alphas(pairs["alphas"]),
        workers=_parse_int("workers", pairs["workers"], 1),
    )
