"""End-to-end runs: data discovery, bank building, scoring, evaluation.

Artifacts are deterministic functions of (config, inputs): reports carry
no timestamps, floats are serialized via repr, datasets are processed in
name order, and per-dataset seeds derive from the master seed, so a
parallel run produces byte-identical outputs to a serial one.
"""

from __future__ import annotations

import glob as globlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig, derive_seed
from .embedding import EmbeddingConfig, EmbeddingMatrix, embed, get_provider
from .errors import ConfigError, MissingArtifactError, TsmemError
from .evaluation import (
    DatasetResult,
    EvalConfig,
    Report,
    SweepPoint,
    aggregate,
    evaluate_dataset,
    write_sweep_csv,
)
from .ingest import TimeSeriesRecord, generate_windows, parse_ucr_file
from .membank import (
    MemoryBank,
    NoveltyModel,
    bank_from_matrix,
    build_bank,
    fit_novelty,
    kcenter_coreset,
)
from .scoring import DistanceSpec, ScoreSeries, score_stream
from .trep import read_sidecar, read_trep, sidecar_path, trep_filename, write_trep


def discover_records(config: RunConfig) -> list[TimeSeriesRecord]:
    """Labeled records from a file, a directory of .txt files, or a glob."""
    if not config.data:
        raise ConfigError("no data path configured (set data=...)")
    path = Path(config.data)
    if path.is_file():
        files = [path]
    elif path.is_dir():
        files = sorted(path.glob("*.txt"))
    else:
        files = sorted(Path(p) for p in globlib.glob(config.data))
    if not files:
        raise ConfigError(f"no dataset files match {config.data!r}")
    records = [parse_ucr_file(f) for f in files]
    records.sort(key=lambda r: r.name)
    names = [r.name for r in records]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ConfigError(f"duplicate dataset names: {', '.join(dupes)}")
    return records


def _trep_path(config: RunConfig, dataset: str, region: str) -> Path:
    return Path(config.trep_dir) / trep_filename(
        dataset, config.layer, config.reference_patch, region
    )


def check_trep_inputs(
    config: RunConfig, records: list[TimeSeriesRecord], regions: tuple[str, ...]
) -> None:
    """Fail fast, naming every absent embedding file rather than the first."""
    missing = []
    for record in records:
        for region in regions:
            p = _trep_path(config, record.name, region)
            if not p.is_file():
                missing.append(str(p))
    if missing:
        raise MissingArtifactError(missing)


def _region_embeddings(
    config: RunConfig, record: TimeSeriesRecord, region: str
) -> EmbeddingMatrix:
    if config.source == "trep":
        matrix, _ = read_trep(_trep_path(config, record.name, region))
        return matrix
    provider = get_provider(config.provider_spec())
    emb_config = EmbeddingConfig(
        spec=config.window_spec(),
        layer=config.layer,
        d_model=config.d_model,
        provider_id=provider.provider_id,
    )
    windows = generate_windows(record, config.window_spec(), region)
    return embed(provider, windows, emb_config)


@dataclass(frozen=True)
class BankArtifact:
    bank: MemoryBank
    novelty: NoveltyModel
    original_rows: int

    @property
    def reduction_ratio(self) -> float:
        return 1.0 - self.bank.size / self.original_rows


def build_bank_for(config: RunConfig, record: TimeSeriesRecord) -> BankArtifact:
    """Train-region embeddings -> compressed bank -> novelty threshold."""
    train = _region_embeddings(config, record, "train")
    bank = build_bank(train, capacity_limit=config.capacity_limit)
    original = bank.size
    if config.coreset_size is not None:
        seed = derive_seed(config.seed, record.name)
        bank = kcenter_coreset(bank, config.coreset_size, seed)
    novelty = fit_novelty(bank, train, config.novelty_percentile)
    return BankArtifact(bank=bank, novelty=novelty, original_rows=original)


def score_dataset(
    config: RunConfig, record: TimeSeriesRecord, artifact: Optional[BankArtifact] = None
) -> tuple[ScoreSeries, dict]:
    """Score the test region; returns the series plus bookkeeping stats."""
    if artifact is None:
        artifact = build_bank_for(config, record)
    # Compression stats describe the bank as built; adaptation grows it later.
    bank_size = artifact.bank.size
    reduction = artifact.reduction_ratio
    test = _region_embeddings(config, record, "test")
    dist = DistanceSpec(
        kind=config.distance, b=config.density_b, ridge_lambda=config.ridge_lambda
    )
    novelty = artifact.novelty if config.ttamb else None
    scores = score_stream(artifact.bank, novelty, test, dist)
    insertions = sum(ev.inserted for ev in artifact.bank.adaptation_log)
    stats = {
        "bank_size": bank_size,
        "original_rows": artifact.original_rows,
        "reduction_ratio": reduction,
        "novelty_threshold": artifact.novelty.threshold,
        "insertion_count": int(insertions),
        "scored_steps": len(scores.scores),
    }
    return scores, stats


def _eval_one(args: tuple[RunConfig, TimeSeriesRecord]) -> tuple[str, object]:
    """Worker body; returns a tagged result so one bad dataset can't stop a run."""
    config, record = args
    try:
        scores, stats = score_dataset(config, record)
        result = evaluate_dataset(
            record.name,
            scores,
            record,
            EvalConfig(delta=config.delta, alphas=dict(config.alphas)),
            reduction_ratio=stats["reduction_ratio"],
            insertion_count=stats["insertion_count"],
        )
        return ("ok", result)
    except (TsmemError, ValueError) as exc:
        return ("err", f"{record.name}: {exc}")


def run_eval(config: RunConfig, records: Optional[list[TimeSeriesRecord]] = None) -> Report:
    """Evaluate every dataset, collecting failures instead of aborting."""
    if records is None:
        records = discover_records(config)
    if config.source == "trep":
        check_trep_inputs(config, records, ("train", "test"))
    jobs = [(config, rec) for rec in records]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_eval_one, jobs))
    else:
        outcomes = [_eval_one(job) for job in jobs]

    results: list[DatasetResult] = []
    failed: list[str] = []
    for tag, payload in outcomes:
        if tag == "ok":
            results.append(payload)
        else:
            failed.append(payload)
    if not results:
        raise TsmemError(
            "every dataset failed: " + "; ".join(failed)
        )
    return aggregate(results, config_echo=config.echo(), failed=sorted(failed))


def cmd_build_memory(config: RunConfig) -> list[Path]:
    """Build and persist one bank artifact per dataset."""
    records = discover_records(config)
    if config.source == "trep":
        check_trep_inputs(config, records, ("train",))
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for record in records:
        artifact = build_bank_for(config, record)
        bank = artifact.bank
        matrix = EmbeddingMatrix(
            data=bank.matrix.astype(np.float32),
            reference_times=np.arange(bank.size, dtype=np.int64),
        )
        emb_config = EmbeddingConfig(
            spec=config.window_spec(),
            layer=config.layer,
            d_model=bank.dim,
            provider_id="bank",
        )
        path = out / trep_filename(
            record.name, config.layer, config.reference_patch, "bank"
        )
        write_trep(
            matrix,
            emb_config,
            path,
            dataset=record.name,
            extra={
                "kind": "memory-bank",
                "provenance": list(bank.provenance),
                "source_indices": [
                    -1 if s is None else int(s) for s in bank.source_indices
                ],
                "novelty": {
                    "percentile": artifact.novelty.percentile,
                    "threshold": artifact.novelty.threshold,
                },
                "coreset": {
                    "original_rows": artifact.original_rows,
                    "bank_size": bank.size,
                    "reduction_ratio": artifact.reduction_ratio,
                },
                "seed": config.seed,
            },
        )
        written.append(path)
    return written


def load_bank_artifact(path: str | Path, capacity_limit: Optional[int]) -> BankArtifact:
    """Rehydrate a persisted bank plus its novelty threshold."""
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError([str(path)])
    matrix, _ = read_trep(path)
    meta = read_sidecar(path) or {}
    rows = matrix.rows
    provenance = meta.get("provenance") or ["train"] * rows
    raw_sources = meta.get("source_indices")
    sources = (
        [None if s == -1 else int(s) for s in raw_sources]
        if raw_sources
        else [None] * rows
    )
    bank = bank_from_matrix(
        matrix.data.astype(np.float64),
        provenance=provenance,
        source_indices=sources,
        capacity_limit=capacity_limit,
    )
    novelty_info = meta.get("novelty")
    if not novelty_info or "threshold" not in novelty_info:
        raise TsmemError(
            f"{path}: sidecar carries no novelty threshold; "
            "rebuild the bank with build-memory"
        )
    novelty = NoveltyModel(
        threshold=float(novelty_info["threshold"]),
        percentile=float(novelty_info.get("percentile", 80.0)),
    )
    coreset_info = meta.get("coreset", {})
    original = int(coreset_info.get("original_rows", bank.size))
    return BankArtifact(bank=bank, novelty=novelty, original_rows=original)


def cmd_score(config: RunConfig) -> tuple[list[Path], Path]:
    """Score each dataset against its persisted bank; emit CSVs + a report."""
    records = discover_records(config)
    out = Path(config.out)
    bank_paths = {
        rec.name: out
        / trep_filename(rec.name, config.layer, config.reference_patch, "bank")
        for rec in records
    }
    missing = [str(p) for p in bank_paths.values() if not p.is_file()]
    if config.source == "trep":
        for rec in records:
            p = _trep_path(config, rec.name, "test")
            if not p.is_file():
                missing.append(str(p))
    if missing:
        raise MissingArtifactError(missing)

    csv_paths = []
    per_dataset = {}
    for record in records:
        artifact = load_bank_artifact(bank_paths[record.name], config.capacity_limit)
        scores, stats = score_dataset(config, record, artifact)
        csv_path = out / (
            f"{record.name}__L{config.layer}__p{config.reference_patch}__scores.csv"
        )
        scores.write_csv(csv_path)
        csv_paths.append(csv_path)
        per_dataset[record.name] = stats
    report_path = out / "score_report.json"
    report_path.write_text(
        json.dumps(
            {"config_echo": config.echo(), "per_dataset": per_dataset},
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return csv_paths, report_path


def cmd_eval(config: RunConfig) -> tuple[Report, Path]:
    report = run_eval(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    report.write_json(path)
    return report, path


SWEEP_FIELD = {
    "layer": "layer",
    "reference_patch": "reference_patch",
    "coreset_size": "coreset_size",
    "distance": "distance",
}


def cmd_sweep(config: RunConfig, axis: str, values: list[object]) -> list[SweepPoint]:
    """Run the evaluation once per axis value; persist per-value reports + CSV."""
    if axis not in SWEEP_FIELD:
        raise ConfigError(f"unknown sweep axis {axis!r} (known: {sorted(SWEEP_FIELD)})")
    if not values:
        raise ConfigError("sweep needs at least one value")
    records = discover_records(config)
    points = []
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    for value in values:
        point_config = replace(config, **{SWEEP_FIELD[axis]: value})
        report = run_eval(point_config, records)
        tag = "unbounded" if value is None else str(value)
        report.write_json(out / f"report_{axis}_{tag}.json")
        points.append(SweepPoint(value=tag, report=report))
    write_sweep_csv(points, axis, out / f"sweep_{axis}.csv")
    return points
