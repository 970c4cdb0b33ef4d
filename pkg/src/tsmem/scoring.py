"""Distance functions and per-step anomaly scoring against a memory bank.

The nearest neighbor is always the Euclidean one; the configured distance
then measures how far the query sits from that item (straight-line,
covariance-aware, or reweighted by local neighborhood density).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .embedding import EmbeddingMatrix
from .errors import (
    CovarianceSingularError,
    DimensionMismatchError,
    EmptyBankError,
)
from .membank import MemoryBank, NoveltyModel, nearest_neighbor, ttamb_insert

DISTANCE_KINDS = ("euclidean", "mahalanobis", "density")


@dataclass(frozen=True)
class DistanceSpec:
    kind: str = "euclidean"
    b: int = 5                  # neighborhood size, density only
    ridge_lambda: float = 1e-3  # covariance regularizer, mahalanobis only

    def __post_init__(self):
        if self.kind not in DISTANCE_KINDS:
            raise ValueError(f"unknown distance kind {self.kind!r}")
        if self.kind == "density" and self.b < 2:
            raise ValueError("density distance requires b >= 2")
        if self.kind == "mahalanobis" and self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be >= 0")


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Regularized bank covariance with a cached Cholesky solve handle."""

    sigma: np.ndarray
    factor: tuple
    ridge: float

    def solve(self, v: np.ndarray) -> np.ndarray:
        return cho_solve(self.factor, v)


@dataclass(eq=False)
class ScoreSeries:
    """Per-time-step scores; steps with no valid window simply have no entry."""

    scores: dict[int, float] = field(default_factory=dict)
    threshold: Optional[float] = None

    def __post_init__(self):
        for t, s in self.scores.items():
            if not math.isfinite(s) or s < 0:
                raise ValueError(f"score at t={t} must be finite and >= 0, got {s}")

    def times(self) -> list[int]:
        return sorted(self.scores)

    def apply_threshold(self, theta: float) -> dict[int, int]:
        """Predicted labels: 1 where the score exceeds theta."""
        return {t: int(s > theta) for t, s in self.scores.items()}

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["reference_time,score"]
        lines += [f"{t},{self.scores[t]!r}" for t in self.times()]
        path.write_text("\n".join(lines) + "\n")


def fit_covariance(bank: MemoryBank, ridge_lambda: float = 1e-3) -> CovarianceModel:
    """Sample covariance of the bank plus a trace-scaled ridge.

    The ridge is ``ridge_lambda * trace(S) / d`` so it tracks the data's
    scale; a zero-variance bank falls back to an absolute ridge of
    ``ridge_lambda`` to keep the matrix invertible.
    """
    if bank.size < 2:
        raise CovarianceSingularError(
            f"covariance needs at least 2 bank items, have {bank.size}; "
            "score with kind='euclidean' or store more training windows"
        )
    sample = np.atleast_2d(np.cov(bank.matrix, rowvar=False, ddof=1))
    if not np.all(np.isfinite(sample)):
        raise CovarianceSingularError("bank covariance has non-finite entries")
    scale = float(np.trace(sample)) / bank.dim
    ridge = ridge_lambda * scale if scale > 0 else ridge_lambda
    sigma = sample + ridge * np.eye(bank.dim)
    asymmetry = float(np.max(np.abs(sigma - sigma.T))) if bank.dim > 1 else 0.0
    if asymmetry > 1e-9:
        raise CovarianceSingularError(f"covariance asymmetric by {asymmetry:.2e}")
    try:
        factor = cho_factor(sigma, lower=True)
    except np.linalg.LinAlgError as exc:
        raise CovarianceSingularError(
            f"covariance is not positive definite ({exc}); "
            f"raise ridge_lambda above {ridge_lambda}"
        ) from None
    return CovarianceModel(sigma=sigma, factor=factor, ridge=ridge)


def distance_euclidean(r: np.ndarray, m: np.ndarray) -> float:
    r = np.asarray(r, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if r.shape != m.shape:
        raise DimensionMismatchError(f"shapes {r.shape} and {m.shape} differ")
    d = r - m
    return float(math.sqrt(d @ d))


def distance_mahalanobis(
    r: np.ndarray, m: np.ndarray, cov: CovarianceModel
) -> float:
    r = np.asarray(r, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if r.shape != m.shape:
        raise DimensionMismatchError(f"shapes {r.shape} and {m.shape} differ")
    d = r - m
    val = float(d @ cov.solve(d))
    return math.sqrt(max(val, 0.0))


def _density_score(
    r: np.ndarray,
    bank: MemoryBank,
    b: int,
    nn_idx: int,
    nn_dist: float,
    include_anchor: bool,
    max_subtraction: bool,
) -> float:
    points = bank.matrix
    anchor = points[nn_idx]
    diffs = points - anchor
    to_anchor = np.einsum("ij,ij->i", diffs, diffs)
    order = [i for i in np.argsort(to_anchor, kind="stable") if i != nn_idx]
    if include_anchor:
        neighborhood = [nn_idx] + order[: b - 1]
    else:
        if b > bank.size - 1:
            raise ValueError(
                f"b={b} with anchor excluded needs at least {b + 1} bank items"
            )
        neighborhood = order[:b]

    scale = math.sqrt(bank.dim)
    qd = r - points[neighborhood]
    scaled = np.sqrt(np.einsum("ij,ij->i", qd, qd)) / scale
    scaled_nn = nn_dist / scale
    shift = max(float(scaled.max()), scaled_nn) if max_subtraction else 0.0
    weight = 1.0 - math.exp(scaled_nn - shift) / float(
        np.exp(scaled - shift).sum()
    )
    return weight * nn_dist


def distance_density(
    r: np.ndarray,
    bank: MemoryBank,
    b: int = 5,
    *,
    include_anchor: bool = True,
    max_subtraction: bool = True,
) -> float:
    """Density-reweighted NN distance.

    The NN distance is damped by how crowded the neighbor's surroundings
    are: with the query's softmax mass concentrated on the nearest item,
    the weight drops toward 1 - 1/b; queries far from a sparse neighborhood
    keep nearly their full distance. Distances entering the exponentials
    are tempered by 1/sqrt(dim) and max-shifted for numerical stability
    (``max_subtraction`` exists only so tests can check the shift is a
    no-op on well-conditioned inputs). ``include_anchor`` keeps the nearest
    item inside its own neighborhood, which bounds the weight in [0, 1);
    the exclusive variant is available for experimentation.
    """
    if bank.size < 1:
        raise EmptyBankError("density distance on an empty bank")
    if b < 2:
        raise ValueError("density distance requires b >= 2")
    if b > bank.size:
        raise ValueError(f"b={b} exceeds bank size {bank.size}")
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (bank.dim,):
        raise DimensionMismatchError(f"query shape {r.shape}, bank dim {bank.dim}")
    nn_idx, nn_dist = nearest_neighbor(bank, r)
    return _density_score(
        r, bank, b, nn_idx, nn_dist, include_anchor, max_subtraction
    )


def score_stream(
    bank: MemoryBank,
    novelty: Optional[NoveltyModel],
    embeddings: EmbeddingMatrix,
    dist: DistanceSpec,
) -> ScoreSeries:
    """Score rows in time order, optionally adapting the bank as we go.

    Each row is scored against the bank as it stands, *then* offered to the
    novelty gate, so a row can never match itself. The covariance for the
    mahalanobis kind is fitted once on the initial bank and kept fixed
    across insertions.
    """
    if bank.size < 1:
        raise EmptyBankError("score_stream needs a non-empty bank")
    if embeddings.rows < 1:
        raise ValueError("score_stream needs at least one embedding row")
    if embeddings.dim != bank.dim:
        raise DimensionMismatchError(
            f"embedding dim {embeddings.dim} != bank dim {bank.dim}"
        )
    cov = fit_covariance(bank, dist.ridge_lambda) if dist.kind == "mahalanobis" else None
    if dist.kind == "density" and dist.b > bank.size:
        raise ValueError(f"b={dist.b} exceeds bank size {bank.size}")

    scores: dict[int, float] = {}
    rows = embeddings.data.astype(np.float64)
    for row, t in zip(rows, embeddings.reference_times):
        nn_idx, nn_dist = nearest_neighbor(bank, row)
        if dist.kind == "euclidean":
            score = nn_dist
        elif dist.kind == "mahalanobis":
            score = distance_mahalanobis(row, bank.matrix[nn_idx], cov)
        else:
            score = _density_score(
                row, bank, dist.b, nn_idx, nn_dist,
                include_anchor=True, max_subtraction=True,
            )
        scores[int(t)] = score
        if novelty is not None:
            ttamb_insert(bank, novelty, row, nn_dist)
    return ScoreSeries(scores=scores)
