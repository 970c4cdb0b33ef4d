"""Threshold-free evaluation of score series against labeled intervals.

Two complementary views: Top-1 asks whether the single highest-scoring
time step lands inside the (padded) anomaly interval; the alpha-quantile
counters ask whether *any* of the top ceil(alpha * n) steps does. Neither
requires picking an operating threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .errors import NoDefinedScoresError
from .ingest import TimeSeriesRecord
from .scoring import ScoreSeries

DEFAULT_ALPHAS: dict[str, float] = {"0.03": 0.03, "0.10": 0.10}


@dataclass(frozen=True)
class EvalConfig:
    delta: int = 100
    alphas: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_ALPHAS)
    )

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        for label, alpha in self.alphas.items():
            if not 0 < alpha <= 1:
                raise ValueError(f"alpha {label!r}={alpha} outside (0, 1]")


def _ranked_times(scores: ScoreSeries) -> list[int]:
    """Times sorted by score descending, earlier time winning ties."""
    if not scores.scores:
        raise NoDefinedScoresError("score series has no entries")
    return sorted(scores.scores, key=lambda t: (-scores.scores[t], t))


def _in_interval(t: int, record: TimeSeriesRecord, delta: int) -> bool:
    return record.anomaly_begin - delta <= t <= record.anomaly_end + delta


def top1(
    scores: ScoreSeries, record: TimeSeriesRecord, delta: int = 100
) -> tuple[int, bool]:
    """The argmax time step and whether it falls in the padded interval."""
    t_star = _ranked_times(scores)[0]
    return t_star, _in_interval(t_star, record, delta)


def alpha_quantile(
    scores: ScoreSeries,
    record: TimeSeriesRecord,
    alpha: float,
    delta: int = 100,
) -> bool:
    """Whether any of the top ceil(alpha * n) scored steps hits the interval."""
    ranked = _ranked_times(scores)
    k = max(1, math.ceil(alpha * len(ranked)))
    return any(_in_interval(t, record, delta) for t in ranked[:k])


@dataclass(frozen=True)
class DatasetResult:
    name: str
    top1_time: int
    top1_hit: bool
    alpha_hits: Mapping[str, bool]
    reduction_ratio: float
    scored_steps: int
    insertion_count: int = 0


def evaluate_dataset(
    name: str,
    scores: ScoreSeries,
    record: TimeSeriesRecord,
    config: EvalConfig,
    reduction_ratio: float = 0.0,
    insertion_count: int = 0,
) -> DatasetResult:
    t_star, hit = top1(scores, record, config.delta)
    alpha_hits = {
        label: alpha_quantile(scores, record, alpha, config.delta)
        for label, alpha in config.alphas.items()
    }
    return DatasetResult(
        name=name,
        top1_time=t_star,
        top1_hit=hit,
        alpha_hits=alpha_hits,
        reduction_ratio=reduction_ratio,
        scored_steps=len(scores.scores),
        insertion_count=insertion_count,
    )


@dataclass(frozen=True)
class Report:
    top1_accuracy_pct: float
    per_dataset: Sequence[DatasetResult]
    alpha_counts: Mapping[str, int]
    mean_reduction_ratio: float
    config_echo: Mapping[str, object]
    failed: Sequence[str] = ()

    def to_dict(self) -> dict:
        return {
            "top1_accuracy_pct": self.top1_accuracy_pct,
            "per_dataset": [
                {
                    "name": r.name,
                    "top1_time": r.top1_time,
                    "top1_hit": r.top1_hit,
                    "alpha_hits": dict(r.alpha_hits),
                    "reduction_ratio": r.reduction_ratio,
                    "scored_steps": r.scored_steps,
                    "insertion_count": r.insertion_count,
                }
                for r in self.per_dataset
            ],
            "alpha_counts": dict(self.alpha_counts),
            "mean_reduction_ratio": self.mean_reduction_ratio,
            "config_echo": dict(self.config_echo),
            "failed": list(self.failed),
        }

    def write_json(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def table(self) -> str:
        """Fixed-width summary for terminal output."""
        width = max([len(r.name) for r in self.per_dataset] + [len("dataset")])
        lines = [
            f"{'dataset':<{width}}  {'top1_time':>9}  {'hit':>3}  "
            f"{'reduction':>9}"
        ]
        for r in self.per_dataset:
            lines.append(
                f"{r.name:<{width}}  {r.top1_time:>9}  "
                f"{'yes' if r.top1_hit else 'no':>3}  "
                f"{r.reduction_ratio:>9.3f}"
            )
        lines.append("")
        lines.append(
            f"top-1 accuracy: {self.top1_accuracy_pct:.1f}% "
            f"({sum(r.top1_hit for r in self.per_dataset)}/{len(self.per_dataset)})"
        )
        for label in self.alpha_counts:
            lines.append(
                f"alpha {label}: {self.alpha_counts[label]}/{len(self.per_dataset)}"
            )
        if self.failed:
            lines.append(f"failed datasets: {', '.join(self.failed)}")
        return "\n".join(lines)


def aggregate(
    results: Sequence[DatasetResult],
    config_echo: Mapping[str, object],
    failed: Sequence[str] = (),
) -> Report:
    if not results:
        raise NoDefinedScoresError("no dataset results to aggregate")
    n = len(results)
    hits = sum(r.top1_hit for r in results)
    labels: list[str] = list(results[0].alpha_hits)
    alpha_counts = {
        label: sum(r.alpha_hits.get(label, False) for r in results)
        for label in labels
    }
    return Report(
        top1_accuracy_pct=100.0 * hits / n,
        per_dataset=tuple(sorted(results, key=lambda r: r.name)),
        alpha_counts=alpha_counts,
        mean_reduction_ratio=sum(r.reduction_ratio for r in results) / n,
        config_echo=dict(config_echo),
        failed=tuple(failed),
    )


SWEEP_AXES = ("layer", "reference_patch", "coreset_size", "distance")


@dataclass(frozen=True)
class SweepPoint:
    value: object
    report: Report


def sweep(
    axis: str,
    values: Sequence[object],
    run_eval: Callable[[str, object], Report],
) -> list[SweepPoint]:
    """Re-run an evaluation while varying one configuration axis.

    ``run_eval`` receives the axis name and one value and returns the full
    report for that setting; points come back in input order so callers can
    compare accuracy across the axis.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    if not values:
        raise ValueError("sweep needs at least one value")
    return [SweepPoint(value=v, report=run_eval(axis, v)) for v in values]


def write_sweep_csv(points: Sequence[SweepPoint], axis: str, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{axis},top1_accuracy_pct,mean_reduction_ratio"]
    for p in points:
        lines.append(
            f"{p.value},{p.report.top1_accuracy_pct!r},"
            f"{p.report.mean_reduction_ratio!r}"
        )
    path.write_text("\n".join(lines) + "\n")
