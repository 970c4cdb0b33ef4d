"""Distance functions, covariance fitting, and streamed scoring."""

from __future__ import annotations

import math

import numpy as np
import pytest

from tsmem.embedding import EmbeddingMatrix
from tsmem.errors import (
    CovarianceSingularError,
    DimensionMismatchError,
)
from tsmem.membank import (
    MemoryBank,
    NoveltyModel,
    bank_from_matrix,
    build_bank,
    nearest_neighbor,
)
from tsmem.scoring import (
    DistanceSpec,
    ScoreSeries,
    distance_density,
    distance_euclidean,
    distance_mahalanobis,
    fit_covariance,
    score_stream,
)

def matrix_of(rows, times=None) -> EmbeddingMatrix:
    rows = np.asarray(rows, dtype=np.float64)
    if times is None:
        times = np.arange(len(rows), dtype=np.int64)
    return EmbeddingMatrix(data=rows, reference_times=times)


def identity_cov_bank(n: int, d: int, rng: np.random.Generator) -> MemoryBank:
    """A bank whose sample covariance (ddof=1) is the identity.

    Centered rows C with C.T @ C = (n-1) I and zero column sums give
    cov = I exactly; such C falls out of a QR factorization whose first
    column is pinned to the all-ones vector.
    """
    assert n >= d + 1
    m = np.concatenate(
        [np.ones((n, 1)), rng.standard_normal((n, d))], axis=1
    )
    q, _ = np.linalg.qr(m)
    centered = math.sqrt(n - 1) * q[:, 1 : d + 1]
    points = centered + rng.standard_normal(d)
    # feed float64 rows directly; EmbeddingMatrix would quantize to float32
    # and spoil the exact construction
    return bank_from_matrix(points, ["train"] * n, [None] * n)


class TestDistanceSpec:
    def test_kinds(self):
        for kind in ("euclidean", "mahalanobis", "density"):
            DistanceSpec(kind=kind)
        with pytest.raises(ValueError):
            DistanceSpec(kind="cosine")

    def test_density_needs_b(self):
        with pytest.raises(ValueError):
            DistanceSpec(kind="density", b=1)


class TestEuclidean:
    def test_basic(self):
        assert distance_euclidean([0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)

    def test_shape_check(self):
        with pytest.raises(DimensionMismatchError):
            distance_euclidean(np.ones(2), np.ones(3))


class TestCovariance:
    def test_needs_two_items(self):
        bank = build_bank(matrix_of([[1.0, 2.0]]))
        with pytest.raises(CovarianceSingularError, match="euclidean"):
            fit_covariance(bank)

    def test_identity_sample_covariance(self):
        rng = np.random.default_rng(0)
        bank = identity_cov_bank(8, 3, rng)
        cov = fit_covariance(bank, ridge_lambda=0.0)
        np.testing.assert_allclose(cov.sigma, np.eye(3), atol=1e-12)

    def test_trace_scaled_ridge(self):
        rng = np.random.default_rng(1)
        points = rng.standard_normal((20, 4)) * 3.0
        bank = build_bank(matrix_of(points))
        lam = 0.01
        cov = fit_covariance(bank, ridge_lambda=lam)
        sample = np.cov(bank.matrix, rowvar=False, ddof=1)
        expected_ridge = lam * np.trace(sample) / 4
        np.testing.assert_allclose(
            cov.sigma, sample + expected_ridge * np.eye(4), atol=1e-12
        )

    def test_identical_items_fall_back_to_absolute_ridge(self):
        bank = build_bank(matrix_of([[2.0, 2.0]] * 5))
        lam = 0.5
        cov = fit_covariance(bank, ridge_lambda=lam)
        np.testing.assert_allclose(cov.sigma, lam * np.eye(2), atol=1e-15)
        # and mahalanobis under lam*I is euclidean / sqrt(lam)
        r, m = np.array([3.0, 2.0]), np.array([2.0, 2.0])
        d = distance_mahalanobis(r, m, cov)
        assert d == pytest.approx(1.0 / math.sqrt(lam), abs=1e-9)


class TestMahalanobis:
    def test_equals_euclidean_under_identity(self):
        rng = np.random.default_rng(2)
        for _ in range(40):
            d = int(rng.integers(1, 5))
            bank = identity_cov_bank(d + 1 + int(rng.integers(0, 8)), d, rng)
            cov = fit_covariance(bank, ridge_lambda=0.0)
            r = rng.standard_normal(d)
            m = rng.standard_normal(d)
            assert distance_mahalanobis(r, m, cov) == pytest.approx(
                distance_euclidean(r, m), abs=1e-9
            )

    def test_whitening_known_case(self):
        # Σ = diag(4, 1): a unit step along the first axis counts half.
        rows = [[2.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
        bank = build_bank(matrix_of(rows))
        sample = np.cov(bank.matrix, rowvar=False, ddof=1)
        np.testing.assert_allclose(sample, np.diag([8 / 3, 2 / 3]), atol=1e-12)
        cov = fit_covariance(bank, ridge_lambda=0.0)
        m = np.zeros(2)
        along_x = distance_mahalanobis(np.array([1.0, 0.0]), m, cov)
        along_y = distance_mahalanobis(np.array([0.0, 1.0]), m, cov)
        assert along_x == pytest.approx(1 / math.sqrt(8 / 3), abs=1e-12)
        assert along_y == pytest.approx(1 / math.sqrt(2 / 3), abs=1e-12)


class TestDensity:
    def test_worked_one_dimensional_example(self):
        # bank {0, 1}, query 0.25, b=2: the nearest item is 0 at distance
        # 0.25; softmax over scaled distances {0.25, 0.75} leaves weight
        # 1 - e^{-0.5}/(e^{-0.5} + 1) ~= 0.62246 and score ~= 0.15561.
        bank = build_bank(matrix_of([[0.0], [1.0]]))
        score = distance_density(np.array([0.25]), bank, b=2)
        weight = 1.0 - math.exp(-0.5) / (math.exp(-0.5) + 1.0)
        assert weight == pytest.approx(0.6224593, abs=1e-6)
        assert score == pytest.approx(weight * 0.25, abs=1e-12)

    def test_equidistant_neighbors_give_uniform_weight(self):
        rng = np.random.default_rng(3)
        for b in (2, 3, 5, 8):
            angles = np.sort(rng.uniform(0, 2 * np.pi, size=b))
            rho = float(rng.uniform(0.5, 3.0))
            points = rho * np.stack([np.cos(angles), np.sin(angles)], axis=1)
            bank = bank_from_matrix(points, ["train"] * b, [None] * b)
            score = distance_density(np.zeros(2), bank, b=b)
            assert score == pytest.approx((1.0 - 1.0 / b) * rho, abs=1e-9)

    def test_never_exceeds_nn_distance(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            n = int(rng.integers(2, 20))
            d = int(rng.integers(1, 6))
            b = int(rng.integers(2, n + 1))
            bank = build_bank(matrix_of(rng.standard_normal((n, d))))
            r = rng.standard_normal(d) * float(rng.uniform(0.1, 5.0))
            _, nn_dist = nearest_neighbor(bank, r)
            score = distance_density(r, bank, b=b)
            assert 0.0 <= score <= nn_dist + 1e-12

    def test_max_subtraction_is_a_numerical_no_op(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            bank = build_bank(matrix_of(rng.standard_normal((10, 3))))
            r = rng.standard_normal(3)
            with_shift = distance_density(r, bank, b=4, max_subtraction=True)
            without = distance_density(r, bank, b=4, max_subtraction=False)
            assert with_shift == pytest.approx(without, abs=1e-12)

    def test_anchor_exclusion_changes_weight(self):
        bank = build_bank(matrix_of([[0.0], [1.0], [2.0]]))
        inclusive = distance_density(np.array([0.1]), bank, b=2, include_anchor=True)
        exclusive = distance_density(np.array([0.1]), bank, b=2, include_anchor=False)
        assert inclusive != pytest.approx(exclusive)

    def test_b_larger_than_bank(self):
        bank = build_bank(matrix_of([[0.0], [1.0]]))
        with pytest.raises(ValueError):
            distance_density(np.array([0.5]), bank, b=3)

    def test_matches_independent_reimplementation(self):
        # Recompute the whole formula from its definition: anchor = the
        # query's nearest item, neighborhood = anchor plus its b-1 nearest
        # others (ties to the lower index), softmax over 1/sqrt(d) scaled
        # distances from the query, weight = 1 - anchor's share.
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = int(rng.integers(3, 15))
            d = int(rng.integers(1, 5))
            b = int(rng.integers(2, n + 1))
            points = rng.standard_normal((n, d))
            r = rng.standard_normal(d)

            dists = [math.dist(r, p) for p in points]
            star = min(range(n), key=lambda i: (dists[i], i))
            to_anchor = [math.dist(points[star], p) for p in points]
            others = sorted(
                (i for i in range(n) if i != star),
                key=lambda i: (to_anchor[i], i),
            )
            hood = [star] + others[: b - 1]
            scaled = [dists[i] / math.sqrt(d) for i in hood]
            shift = max(scaled)
            total = sum(math.exp(s - shift) for s in scaled)
            weight = 1.0 - math.exp(scaled[0] - shift) / total
            expected = weight * dists[star]

            bank = bank_from_matrix(points, ["train"] * n, [None] * n)
            assert distance_density(r, bank, b=b) == pytest.approx(
                expected, abs=1e-9
            )


class TestScoreSeries:
    def test_rejects_bad_scores(self):
        with pytest.raises(ValueError):
            ScoreSeries(scores={3: -0.5})
        with pytest.raises(ValueError):
            ScoreSeries(scores={3: float("nan")})

    def test_threshold_labels(self):
        s = ScoreSeries(scores={1: 0.2, 2: 0.9, 3: 0.5})
        assert s.apply_threshold(0.5) == {1: 0, 2: 1, 3: 0}

    def test_csv_format(self, tmp_path):
        s = ScoreSeries(scores={11: 0.5, 10: 0.25})
        path = tmp_path / "nested" / "s.csv"
        s.write_csv(path)
        assert path.read_text() == "reference_time,score\n10,0.25\n11,0.5\n"


class TestScoreStream:
    def test_euclidean_stream_is_nn_distance(self):
        bank = build_bank(matrix_of([[0.0], [10.0]]))
        test = matrix_of([[1.0], [4.0], [12.0]], times=[20, 21, 22])
        series = score_stream(bank, None, test, DistanceSpec(kind="euclidean"))
        assert series.scores == {20: 1.0, 21: 4.0, 22: 2.0}
        assert bank.adaptation_log == []

    def test_score_recorded_before_insertion(self):
        bank = build_bank(matrix_of([[0.0]]))
        novelty = NoveltyModel(threshold=0.5)
        test = matrix_of([[2.0], [2.0]], times=[5, 6])
        series = score_stream(bank, novelty, test, DistanceSpec(kind="euclidean"))
        # the first row scores against the original bank, then joins it,
        # so the identical second row scores zero
        assert series.scores[5] == pytest.approx(2.0)
        assert series.scores[6] == pytest.approx(0.0)
        assert bank.size == 2
        assert [e.inserted for e in bank.adaptation_log] == [True, False]

    def test_gate_respects_threshold(self):
        bank = build_bank(matrix_of([[0.0]]))
        novelty = NoveltyModel(threshold=3.0)
        test = matrix_of([[2.0], [3.0], [3.5]], times=[1, 2, 3])
        score_stream(bank, novelty, test, DistanceSpec(kind="euclidean"))
        # distances: 2.0 (<=tau), 3.0 (==tau), 3.5 (>tau)
        assert [e.inserted for e in bank.adaptation_log] == [False, False, True]

    def test_mahalanobis_covariance_fixed_at_start(self):
        rng = np.random.default_rng(6)
        points = rng.standard_normal((12, 2))
        test_rows = rng.standard_normal((6, 2)) * 4
        bank1 = build_bank(matrix_of(points))
        spec = DistanceSpec(kind="mahalanobis", ridge_lambda=1e-3)
        adapted = score_stream(
            bank1,
            NoveltyModel(threshold=0.1),
            matrix_of(test_rows),
            spec,
        )
        assert bank1.size > 12  # something was inserted
        # same stream against a frozen bank: the first score must agree,
        # because the covariance never refits mid-stream
        bank2 = build_bank(matrix_of(points))
        frozen = score_stream(bank2, None, matrix_of(test_rows[:1]), spec)
        assert frozen.scores[0] == pytest.approx(adapted.scores[0], abs=1e-12)

    def test_density_stream_matches_pointwise_function(self):
        rng = np.random.default_rng(7)
        points = rng.standard_normal((9, 3))
        bank = build_bank(matrix_of(points))
        test = matrix_of(rng.standard_normal((5, 3)))
        series = score_stream(bank, None, test, DistanceSpec(kind="density", b=4))
        fresh = build_bank(matrix_of(points))
        for t, row in zip(test.reference_times, test.data.astype(np.float64)):
            assert series.scores[int(t)] == pytest.approx(
                distance_density(row, fresh, b=4), abs=1e-12
            )

    def test_dim_mismatch(self):
        bank = build_bank(matrix_of([[0.0, 0.0]]))
        test = matrix_of([[1.0]])
        with pytest.raises(DimensionMismatchError):
            score_stream(bank, None, test, DistanceSpec(kind="euclidean"))
