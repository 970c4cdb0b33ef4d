"""Memory bank: storage, k-Center compression, exact NN, novelty gating.

The bank is a growable matrix of reference vectors. Compression keeps a
size-bounded subset chosen greedily to cover the originals; queries are
exact linear scans (any accelerated index must match them); test-time
insertions are gated by a novelty threshold fitted on training distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .embedding import EmbeddingMatrix
from .errors import DimensionMismatchError, EmptyBankError

PROVENANCE_TRAIN = "train"
PROVENANCE_ADAPTED = "adapted"


@dataclass(frozen=True)
class NoveltyModel:
    """Insertion gate: candidates must beat this NN distance to be stored."""

    threshold: float
    percentile: float = 80.0

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("novelty threshold must be >= 0")
        if not 0 < self.percentile <= 100:
            raise ValueError("percentile must be in (0, 100]")


@dataclass(frozen=True)
class AdaptationEvent:
    """One gating decision made during streamed scoring."""

    nn_distance: float
    threshold: float
    inserted: bool
    blocked_by_capacity: bool = False


class MemoryBank:
    """Ordered store of d-dimensional vectors with per-item provenance.

    ``source_indices`` remembers, for items that came from a training
    matrix, which row they were; this is what lets the novelty fit skip
    an item's match against itself.
    """

    def __init__(self, dim: int, capacity_limit: Optional[int] = None):
        if dim <= 0:
            raise ValueError("dim must be positive")
        if capacity_limit is not None and capacity_limit < 1:
            raise ValueError("capacity_limit must be >= 1 when set")
        self._dim = dim
        self._buf = np.empty((64, dim), dtype=np.float64)
        self._size = 0
        self.capacity_limit = capacity_limit
        self.provenance: list[str] = []
        self.source_indices: list[Optional[int]] = []
        self.capacity_events = 0
        self.adaptation_log: list[AdaptationEvent] = []

    @property
    def size(self) -> int:
        return self._size

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def matrix(self) -> np.ndarray:
        """View of the live items, shape (size, dim). Do not mutate."""
        return self._buf[: self._size]

    def append(
        self,
        vector: np.ndarray,
        provenance: str,
        source_index: Optional[int] = None,
    ) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self._dim,):
            raise DimensionMismatchError(
                f"vector of shape {vector.shape}, bank dim is {self._dim}"
            )
        if self._size == len(self._buf):
            grown = np.empty((2 * len(self._buf), self._dim), dtype=np.float64)
            grown[: self._size] = self._buf
            self._buf = grown
        self._buf[self._size] = vector
        self._size += 1
        self.provenance.append(provenance)
        self.source_indices.append(source_index)


def build_bank(
    train_embeddings: EmbeddingMatrix, capacity_limit: Optional[int] = None
) -> MemoryBank:
    """Store every training row, insertion order preserved."""
    if train_embeddings.rows < 1:
        raise EmptyBankError("cannot build a memory bank from zero rows")
    bank = MemoryBank(train_embeddings.dim, capacity_limit=capacity_limit)
    for i, row in enumerate(train_embeddings.data):
        bank.append(row, PROVENANCE_TRAIN, source_index=i)
    return bank


def bank_from_matrix(
    matrix: np.ndarray,
    provenance: Sequence[str],
    source_indices: Sequence[Optional[int]],
    capacity_limit: Optional[int] = None,
) -> MemoryBank:
    """Reconstruct a bank from serialized parts."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise EmptyBankError("bank matrix must be non-empty and 2-D")
    bank = MemoryBank(matrix.shape[1], capacity_limit=capacity_limit)
    for row, prov, src in zip(matrix, provenance, source_indices):
        bank.append(row, prov, source_index=src)
    return bank


def kcenter_coreset(bank: MemoryBank, max_size: int, seed: int) -> MemoryBank:
    """Greedy k-Center subset of at most ``max_size`` items.

    Starts from a seed-chosen item, then repeatedly adds the item farthest
    from the current selection (Euclidean; ties to the lowest original
    index). Per-item distances to the selection are maintained
    incrementally, so the whole run is O(n * max_size). Under budget, the
    bank is returned untouched.
    """
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    if bank.size <= max_size:
        return bank

    points = bank.matrix
    rng = np.random.default_rng(seed)
    first = int(rng.integers(bank.size))
    selected = [first]
    # Squared distances order identically to Euclidean and avoid n*k sqrts.
    diffs = points - points[first]
    min_sq = np.einsum("ij,ij->i", diffs, diffs)
    while len(selected) < max_size:
        nxt = int(np.argmax(min_sq))
        selected.append(nxt)
        diffs = points - points[nxt]
        np.minimum(min_sq, np.einsum("ij,ij->i", diffs, diffs), out=min_sq)

    selected.sort()
    reduced = MemoryBank(bank.dim, capacity_limit=bank.capacity_limit)
    for i in selected:
        reduced.append(points[i], bank.provenance[i], bank.source_indices[i])
    return reduced


def nearest_neighbor(bank: MemoryBank, query: np.ndarray) -> tuple[int, float]:
    """Exact nearest neighbor: (index, Euclidean distance), ties to lowest index."""
    if bank.size < 1:
        raise EmptyBankError("nearest_neighbor on an empty bank")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (bank.dim,):
        raise DimensionMismatchError(
            f"query of shape {query.shape}, bank dim is {bank.dim}"
        )
    diffs = bank.matrix - query
    sq = np.einsum("ij,ij->i", diffs, diffs)
    idx = int(np.argmin(sq))
    return idx, float(math.sqrt(sq[idx]))


def training_nn_distances(
    bank: MemoryBank, train_embeddings: EmbeddingMatrix
) -> np.ndarray:
    """NN distance of each training row to the bank, skipping self-matches.

    A training row that is itself a bank item would otherwise report
    distance zero, which collapses the novelty threshold whenever the bank
    is uncompressed; such rows use their nearest *other* item instead. The
    degenerate single-item bank containing exactly that row keeps 0.
    """
    if bank.size < 1:
        raise EmptyBankError("novelty fit needs a non-empty bank")
    if train_embeddings.rows < 1:
        raise ValueError("novelty fit needs at least one training row")
    if train_embeddings.dim != bank.dim:
        raise DimensionMismatchError(
            f"training dim {train_embeddings.dim} != bank dim {bank.dim}"
        )
    source = np.array(
        [-1 if s is None else s for s in bank.source_indices], dtype=np.int64
    )
    rows = train_embeddings.data.astype(np.float64)
    out = np.empty(len(rows), dtype=np.float64)
    for i, row in enumerate(rows):
        diffs = bank.matrix - row
        sq = np.einsum("ij,ij->i", diffs, diffs)
        mask = source == i
        if mask.any():
            if mask.all():
                out[i] = 0.0
                continue
            sq = sq[~mask]
        out[i] = math.sqrt(float(sq.min()))
    return out


def nearest_rank_percentile(values: np.ndarray, q: float) -> float:
    """Order-statistic percentile: element ceil(q/100 * n) of the sorted values."""
    if not 0 < q <= 100:
        raise ValueError("q must be in (0, 100]")
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    if len(ordered) == 0:
        raise ValueError("percentile of an empty set")
    rank = math.ceil(q / 100.0 * len(ordered))
    return float(ordered[rank - 1])


def fit_novelty(
    bank: MemoryBank, train_embeddings: EmbeddingMatrix, q: float = 80.0
) -> NoveltyModel:
    """Novelty threshold = q-th nearest-rank percentile of training NN distances."""
    distances = training_nn_distances(bank, train_embeddings)
    return NoveltyModel(threshold=nearest_rank_percentile(distances, q), percentile=q)


def ttamb_insert(
    bank: MemoryBank,
    novelty: NoveltyModel,
    candidate: np.ndarray,
    nn_distance: float,
) -> bool:
    """Gate a test-time candidate by its pre-insertion NN distance.

    Strictly-greater wins; a candidate exactly at the threshold is
    redundant. A full bank (capacity_limit reached) rejects the insert and
    counts a capacity event. Every call is recorded in the adaptation log.
    """
    candidate = np.asarray(candidate, dtype=np.float64)
    if candidate.shape != (bank.dim,):
        raise DimensionMismatchError(
            f"candidate of shape {candidate.shape}, bank dim is {bank.dim}"
        )
    if nn_distance > novelty.threshold:
        if bank.capacity_limit is not None and bank.size >= bank.capacity_limit:
            bank.capacity_events += 1
            bank.adaptation_log.append(
                AdaptationEvent(nn_distance, novelty.threshold, False, True)
            )
            return False
        bank.append(candidate, PROVENANCE_ADAPTED)
        bank.adaptation_log.append(
            AdaptationEvent(nn_distance, novelty.threshold, True)
        )
        return True
    bank.adaptation_log.append(
        AdaptationEvent(nn_distance, novelty.threshold, False)
    )
    return False
