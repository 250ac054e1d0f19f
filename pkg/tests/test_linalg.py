import numpy as np
import pytest

from graphbandit.linalg import (
    inv_rank_one_update,
    pca_fit,
    rank_one_update,
    rbf_weight,
    solve_spd,
)


def random_spd(rng, d, scale=1.0):
    A = rng.standard_normal((d, d))
    return np.eye(d) + scale * (A @ A.T) / d


def gauss_solve(A, b):
    """Independent oracle: Gaussian elimination with partial pivoting."""
    A = [list(map(float, row)) for row in A]
    b = list(map(float, b))
    n = len(b)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(A[r][col]))
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(col + 1, n):
            f = A[r][col] / A[col][col]
            for c in range(col, n):
                A[r][c] -= f * A[col][c]
            b[r] -= f * b[col]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        s = b[r] - sum(A[r][c] * x[c] for c in range(r + 1, n))
        x[r] = s / A[r][r]
    return np.array(x)


def leading_minor_dets(M):
    """Determinants of all leading principal minors, by cofactor expansion."""

    def det(a):
        n = len(a)
        if n == 1:
            return a[0][0]
        total = 0.0
        for j in range(n):
            sub = [row[:j] + row[j + 1 :] for row in a[1:]]
            total += ((-1) ** j) * a[0][j] * det(sub)
        return total

    rows = [list(map(float, r)) for r in M]
    return [det([row[: k + 1] for row in rows[: k + 1]]) for k in range(len(rows))]


class TestRankOneUpdate:
    def test_identity_plus_e1(self):
        out = rank_one_update(np.eye(2), np.array([1.0, 0.0]))
        assert np.array_equal(out, np.array([[2.0, 0.0], [0.0, 1.0]]))

    def test_identity_plus_ones(self):
        out = rank_one_update(np.eye(2), np.array([1.0, 1.0]))
        assert np.array_equal(out, np.array([[2.0, 1.0], [1.0, 2.0]]))

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(7)
        M = random_spd(rng, 25)
        x = rng.standard_normal(25)
        out = rank_one_update(M, x)
        oracle = np.empty((25, 25))
        for i in range(25):
            for j in range(25):
                oracle[i, j] = M[i, j] + x[i] * x[j]
        assert np.allclose(out, oracle, rtol=0, atol=0)

    def test_does_not_mutate_input(self):
        M = np.eye(3)
        rank_one_update(M, np.ones(3))
        assert np.array_equal(M, np.eye(3))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            rank_one_update(np.eye(3), np.ones(2))

    def test_preserves_positive_definiteness_small(self):
        # checked by explicit leading-minor determinants at d <= 5
        rng = np.random.default_rng(11)
        for d in (2, 3, 4, 5):
            M = random_spd(rng, d)
            out = rank_one_update(M, rng.standard_normal(d))
            assert all(m > 0 for m in leading_minor_dets(out))


class TestSolveSpd:
    def test_identity_system(self):
        assert np.array_equal(solve_spd(np.eye(2), np.array([3.0, -1.0])), [3.0, -1.0])

    def test_scaled_identity(self):
        out = solve_spd(2.0 * np.eye(2), np.array([2.0, 4.0]))
        assert np.allclose(out, [1.0, 2.0], rtol=0, atol=1e-15)

    def test_matches_elimination_oracle(self):
        rng = np.random.default_rng(3)
        M = random_spd(rng, 12, scale=3.0)
        b = rng.standard_normal(12)
        assert np.allclose(solve_spd(M, b), gauss_solve(M, b), atol=1e-8)

    def test_residual_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            M = random_spd(rng, 25, scale=5.0)
            b = rng.standard_normal(25)
            u = solve_spd(M, b)
            res = np.abs(M @ u - b).max()
            assert res <= 1e-8 * (1.0 + np.abs(b).max())

    def test_rejects_non_spd(self):
        with pytest.raises(ValueError, match="positive definite"):
            solve_spd(-np.eye(3), np.ones(3))

    def test_rejects_asymmetric(self):
        M = np.array([[2.0, 1.0], [0.0, 2.0]])
        with pytest.raises(ValueError, match="symmetric"):
            solve_spd(M, np.ones(2))


class TestInvRankOneUpdate:
    def test_identity_plus_e1(self):
        out = inv_rank_one_update(np.eye(2), np.array([1.0, 0.0]))
        assert np.allclose(out, np.diag([0.5, 1.0]), atol=1e-15)

    def test_zero_vector_is_noop(self):
        out = inv_rank_one_update(np.eye(4), np.zeros(4))
        assert np.array_equal(out, np.eye(4))

    def test_long_sequence_matches_direct_inversion(self):
        # 10,000 sequential rank-one updates at d=25 against a direct
        # inversion oracle of the accumulated matrix
        rng = np.random.default_rng(42)
        d = 25
        M = np.eye(d)
        Minv = np.eye(d)
        for _ in range(10_000):
            x = rng.standard_normal(d) / np.sqrt(d)
            M = M + np.outer(x, x)
            Minv = inv_rank_one_update(Minv, x)
        assert np.abs(Minv - np.linalg.inv(M)).max() <= 1e-6

    def test_incremental_path_agrees_with_direct_solve(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            M = random_spd(rng, 8)
            x = rng.standard_normal(8)
            b = rng.standard_normal(8)
            direct = solve_spd(rank_one_update(M, x), b)
            incremental = inv_rank_one_update(np.linalg.inv(M), x) @ b
            assert np.abs(direct - incremental).max() <= 1e-8


class TestPcaFit:
    def test_rank_one_line(self):
        rng = np.random.default_rng(1)
        direction = np.array([1.0, -2.0, 2.0]) / 3.0
        rows = np.outer(rng.standard_normal(50), direction)
        res = pca_fit(rows, 1)
        cos = abs(float(res.components[0] @ direction))
        assert cos >= 1.0 - 1e-8

    def test_full_rank_reconstruction_lossless(self):
        rng = np.random.default_rng(2)
        rows = rng.standard_normal((40, 2))
        res = pca_fit(rows, 2)
        centered = rows - res.mean
        recon = centered @ res.components.T @ res.components
        assert np.abs(recon - centered).max() <= 1e-8

    def test_explained_variance_matches_eigh_oracle(self):
        rng = np.random.default_rng(3)
        rows = rng.standard_normal((100, 10)) @ np.diag(np.linspace(0.2, 3.0, 10))
        res = pca_fit(rows, 3)
        centered = rows - rows.mean(axis=0)
        cov = centered.T @ centered / (rows.shape[0] - 1)
        eigvals = np.linalg.eigvalsh(cov)[::-1]
        assert np.abs(res.explained_variance - eigvals[:3]).max() <= 1e-8

    def test_basis_orthonormal(self):
        rng = np.random.default_rng(4)
        res = pca_fit(rng.standard_normal((60, 12)), 5)
        gram = res.components @ res.components.T
        assert np.abs(gram - np.eye(5)).max() <= 1e-8

    def test_eigenvalue_order_non_increasing(self):
        rng = np.random.default_rng(5)
        res = pca_fit(rng.standard_normal((80, 8)), 8)
        assert np.all(np.diff(res.explained_variance) <= 1e-12)

    def test_sign_rule_deterministic(self):
        rng = np.random.default_rng(6)
        rows = rng.standard_normal((30, 6))
        a = pca_fit(rows, 4)
        b = pca_fit(rows.copy(), 4)
        assert np.array_equal(a.components, b.components)
        for row in a.components:
            assert row[np.argmax(np.abs(row))] > 0

    def test_rank_deficient_error_reports_rank(self):
        rows = np.outer(np.arange(10.0), np.array([1.0, 2.0, 3.0]))
        with pytest.raises(ValueError, match="rank 1"):
            pca_fit(rows, 2)

    def test_transform_round_trip(self):
        rng = np.random.default_rng(8)
        rows = rng.standard_normal((20, 5))
        res = pca_fit(rows, 5)
        back = res.inverse_transform(res.transform(rows))
        assert np.abs(back - rows).max() <= 1e-8


class TestRbfWeight:
    def test_zero_distance(self):
        u = np.array([0.3, -1.2, 4.0])
        assert rbf_weight(u, u.copy(), 2.0) == 1.0

    def test_characteristic_distance(self):
        # ||u-v||^2 = 2 sigma^2  ->  exp(-1)
        u = np.zeros(2)
        v = np.array([2.0, 0.0])
        sigma = np.sqrt(2.0)
        assert abs(rbf_weight(u, v, sigma) - np.exp(-1.0)) <= 1e-12

    def test_matches_independent_distance_oracle(self):
        import math

        rng = np.random.default_rng(10)
        u = rng.standard_normal(25)
        v = rng.standard_normal(25)
        sq = math.fsum((float(a) - float(b)) ** 2 for a, b in zip(u, v))
        expected = math.exp(-sq / 2.0)
        assert abs(rbf_weight(u, v, 1.0) - expected) <= 1e-12

    def test_symmetric_and_decreasing(self):
        rng = np.random.default_rng(12)
        u = rng.standard_normal(4)
        steps = [u + t * np.ones(4) for t in (0.1, 0.5, 1.0, 2.0)]
        weights = [rbf_weight(u, v, 1.5) for v in steps]
        assert all(rbf_weight(v, u, 1.5) == w for v, w in zip(steps, weights))
        assert all(a > b for a, b in zip(weights, weights[1:]))

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError, match="sigma"):
            rbf_weight(np.zeros(2), np.ones(2), 0.0)
        with pytest.raises(ValueError, match="sigma"):
            rbf_weight(np.zeros(2), np.ones(2), -1.0)
