"""Synthetic labeled series for exercising the full pipeline.

Each series is a noisy sine with one injected anomaly in the test region,
either a short additive spike or a sustained distortion of the waveform.
Generation is fully determined by (seed, index), so suites are
reproducible across runs and machines.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ingest import TimeSeriesRecord, write_manifest, write_ucr_file

ANOMALY_KINDS = ("spike", "shape")


def generate_record(
    index: int,
    seed: int = 0,
    length: int = 4000,
    train_end: int = 2000,
) -> TimeSeriesRecord:
    """One synthetic series; the anomaly kind alternates with the index."""
    rng = np.random.default_rng([seed, index])
    kind = ANOMALY_KINDS[index % len(ANOMALY_KINDS)]

    period = rng.uniform(40.0, 80.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(length, dtype=np.float64)
    values = np.sin(2.0 * np.pi * t / period + phase)
    values += 0.1 * np.sin(2.0 * np.pi * t / (period * 7.3))

    margin = 400
    if kind == "spike":
        width = int(rng.integers(2, 7))
        a = int(rng.integers(train_end + margin, length - margin - width))
        b = a + width - 1
        magnitude = rng.uniform(6.0, 10.0) * (1 if rng.random() < 0.5 else -1)
        values[a : b + 1] += magnitude
    else:
        duration = int(rng.integers(80, 140))
        a = int(rng.integers(train_end + margin, length - margin - duration))
        b = a + duration - 1
        seg = t[a : b + 1]
        values[a : b + 1] = 1.3 * np.sin(2.0 * np.pi * seg / (period / 2.0) + phase)

    values += 0.03 * rng.standard_normal(length)
    return TimeSeriesRecord(
        name=f"synth{index:03d}-{kind}",
        values=values,
        train_end=train_end,
        anomaly_begin=a,
        anomaly_end=b,
    )


def generate_suite(
    count: int = 20,
    seed: int = 0,
    length: int = 4000,
    train_end: int = 2000,
) -> list[TimeSeriesRecord]:
    if count < 1:
        raise ValueError("count must be >= 1")
    return [generate_record(i, seed, length, train_end) for i in range(count)]


def write_suite(
    directory: str | Path,
    count: int = 20,
    seed: int = 0,
    length: int = 4000,
    train_end: int = 2000,
) -> list[Path]:
    """Write the suite as one labeled text file per series plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = generate_suite(count, seed, length, train_end)
    paths = [write_ucr_file(rec, directory) for rec in records]
    write_manifest(
        [(rec, str(p.name)) for rec, p in zip(records, paths)],
        directory / "manifest.json",
    )
    return paths
