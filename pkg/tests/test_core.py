import numpy as np
import pytest

from pivlasso.core import (
    Dataset,
    SVD_MAX_SIDE,
    Truth,
    as_matrix,
    block_soft_threshold,
    load_matrix_csv,
    matrix_from_json,
    matrix_to_json,
    norm_l21,
    norm_l2inf,
    norm_nuclear,
    save_matrix_csv,
    svd,
)


def rng(key):
    return np.random.Generator(np.random.Philox(key=key))


class TestNorms:
    def test_l21_zero(self):
        assert norm_l21(np.zeros((3, 4))) == 0.0

    def test_l21_single_row(self):
        assert norm_l21([[3.0, 4.0]]) == pytest.approx(5.0)

    def test_l21_two_unit_rows(self):
        assert norm_l21([[1.0, 0.0], [0.0, 1.0]]) == pytest.approx(2.0)

    def test_l2inf_zero(self):
        assert norm_l2inf(np.zeros((2, 2))) == 0.0

    def test_l2inf_max_of_rows(self):
        assert norm_l2inf([[3.0, 4.0], [1.0, 0.0]]) == pytest.approx(5.0)

    def test_l2inf_identity(self):
        assert norm_l2inf(np.eye(2)) == pytest.approx(1.0)

    def test_nuclear_diag(self):
        assert norm_nuclear(np.diag([2.0, 3.0])) == pytest.approx(5.0)

    def test_nuclear_rank_one(self):
        u = np.array([1.0, 2.0, 2.0]) / 3.0
        v = np.array([0.6, 0.8])
        assert norm_nuclear(np.outer(u, v)) == pytest.approx(1.0)

    def test_nuclear_matches_eigen_oracle(self):
        # sum of singular values = trace of (M^T M)^{1/2}
        for key in range(5):
            M = rng(key).standard_normal((3, 3))
            w = np.linalg.eigvalsh(M.T @ M)
            assert norm_nuclear(M) == pytest.approx(np.sqrt(np.clip(w, 0, None)).sum(), abs=1e-8)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            norm_l21(np.array([[np.nan, 1.0]]))
        with pytest.raises(ValueError, match="non-finite"):
            norm_l2inf(np.array([[np.inf, 1.0]]))

    def test_norm_axioms_on_random_triples(self):
        # triangle inequality and absolute homogeneity to 1e-12 relative
        for key in range(30):
            g = rng(key)
            A = g.standard_normal((4, 3))
            B = g.standard_normal((4, 3))
            c = float(g.uniform(-3, 3))
            for norm in (norm_l21, norm_l2inf):
                lhs = norm(A + B)
                rhs = norm(A) + norm(B)
                assert lhs <= rhs * (1 + 1e-12)
                assert norm(c * A) == pytest.approx(abs(c) * norm(A), rel=1e-12)

    def test_norm_ordering(self):
        # nuclear >= frobenius >= l2inf
        for key in range(20):
            M = rng(key).standard_normal((5, 4))
            fro = float(np.linalg.norm(M))
            assert norm_nuclear(M) >= fro - 1e-12
            assert fro >= norm_l2inf(M) - 1e-12


class TestBlockSoftThreshold:
    def test_zero_vector(self):
        assert np.array_equal(block_soft_threshold(np.zeros(3), 1.0), np.zeros(3))

    def test_identity_at_zero_threshold(self):
        v = np.array([3.0, 4.0])
        assert np.allclose(block_soft_threshold(v, 0.0), v)

    def test_hand_computed_shrinkage(self):
        out = block_soft_threshold(np.array([3.0, 4.0]), 2.0)
        assert np.allclose(out, [1.8, 2.4])

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            block_soft_threshold(np.ones(2), -0.5)

    def test_shrinks_norm_by_exactly_t(self):
        for key in range(30):
            g = rng(key)
            v = g.standard_normal(4)
            t = float(g.uniform(0, 3))
            out = block_soft_threshold(v, t)
            expected = max(0.0, np.linalg.norm(v) - t)
            assert np.linalg.norm(out) == pytest.approx(expected, abs=1e-12)


class TestSvd:
    def test_identity(self):
        f = svd(np.eye(3))
        assert np.allclose(f.singular_values, 1.0)

    def test_diagonal(self):
        f = svd(np.diag([5.0, 2.0]))
        assert np.allclose(f.singular_values, [5.0, 2.0])

    def test_reconstruction(self):
        M = rng(0).standard_normal((4, 6))
        f = svd(M)
        assert np.linalg.norm(f.reconstruct() - M) <= 1e-10 * max(1.0, np.linalg.norm(M))

    def test_orthonormal_factors(self):
        M = rng(1).standard_normal((5, 3))
        f = svd(M)
        assert np.abs(f.U.T @ f.U - np.eye(3)).max() <= 1e-10
        assert np.abs(f.V.T @ f.V - np.eye(3)).max() <= 1e-10

    def test_nonincreasing_singular_values(self):
        f = svd(rng(2).standard_normal((6, 6)))
        assert np.all(np.diff(f.singular_values) <= 0)

    def test_sign_convention(self):
        M = rng(3).standard_normal((5, 4))
        f = svd(M)
        for k in range(4):
            col = f.U[:, k]
            nz = np.nonzero(col)[0]
            assert col[nz[0]] >= 0

    def test_bit_identical_repeat(self):
        M = rng(4).standard_normal((7, 5))
        a = svd(M).singular_values
        b = svd(M.copy()).singular_values
        assert np.array_equal(a, b)

    def test_side_limit(self):
        with pytest.raises(ValueError, match=str(SVD_MAX_SIDE)):
            svd(np.zeros((SVD_MAX_SIDE + 1, SVD_MAX_SIDE + 1)))


class TestDataset:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="rows"):
            Dataset(X=np.ones((3, 2)), Y=np.ones((4, 1)))

    def test_sqrt_n_normalization_enforced(self):
        X = np.ones((4, 2))  # column norms are 2 = sqrt(4): valid
        Dataset(X=X, Y=np.ones((4, 1)), normalization="sqrt_n")
        with pytest.raises(ValueError, match="column"):
            Dataset(X=2 * X, Y=np.ones((4, 1)), normalization="sqrt_n")

    def test_truth_support_must_match(self):
        X = np.ones((3, 2))
        B = np.array([[1.0], [0.0]])
        with pytest.raises(ValueError, match="support"):
            Dataset(X=X, Y=np.ones((3, 1)),
                    truth=Truth(B_star=B, sigma_star=1.0, support_star=frozenset({1})))

    def test_truth_accepted(self):
        X = np.ones((3, 2))
        B = np.array([[1.0], [0.0]])
        d = Dataset(X=X, Y=np.ones((3, 1)),
                    truth=Truth(B_star=B, sigma_star=0.5, support_star=frozenset({0})))
        assert d.n == 3 and d.p == 2 and d.q == 1


class TestSerialization:
    def test_csv_roundtrip(self, tmp_path):
        M = rng(5).standard_normal((4, 3))
        path = tmp_path / "m.csv"
        save_matrix_csv(M, path)
        assert np.array_equal(load_matrix_csv(path), M)

    def test_csv_format(self, tmp_path):
        path = tmp_path / "m.csv"
        save_matrix_csv(np.array([[1.5, -2.0]]), path)
        text = path.read_text()
        assert text == "1.5,-2.0\n"

    def test_json_roundtrip(self):
        M = rng(6).standard_normal((2, 5))
        env = matrix_to_json(M)
        assert env["rows"] == 2 and env["cols"] == 5
        assert np.array_equal(matrix_from_json(env), M)

    def test_json_size_check(self):
        with pytest.raises(ValueError, match="entries"):
            matrix_from_json({"rows": 2, "cols": 2, "data": [1.0, 2.0]})


def test_as_matrix_shape_checks():
    with pytest.raises(ValueError, match="2-d"):
        as_matrix(np.zeros(3))
    with pytest.raises(ValueError, match="at least one"):
        as_matrix(np.zeros((0, 2)))
