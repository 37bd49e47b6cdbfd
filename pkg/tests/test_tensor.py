import numpy as np
import pytest

from chaoslstm.errors import DomainError, NumericError, RangeError, ShapeError
from chaoslstm.tensor import (
    contract,
    matricize,
    p_norm,
    schatten_p_norm,
    svd,
    tensor_product,
    unmatricize,
)


class TestMatricize:
    def test_cut_shapes(self):
        t = np.arange(8.0).reshape(2, 2, 2)
        assert matricize(t, 1).shape == (2, 4)
        t = np.arange(24.0).reshape(2, 3, 4)
        assert matricize(t, 2).shape == (6, 4)

    def test_identity_on_matrix(self):
        m = np.arange(4.0).reshape(2, 2)
        assert np.array_equal(matricize(m, 1), m)

    def test_data_order_unchanged(self):
        t = np.arange(24.0).reshape(2, 3, 4)
        for cut in (1, 2):
            assert np.array_equal(matricize(t, cut).ravel(), t.ravel())

    def test_roundtrip_all_cuts(self):
        rng = np.random.default_rng(0)
        t = rng.standard_normal((2, 3, 2, 4))
        for cut in range(1, t.ndim):
            assert np.array_equal(unmatricize(matricize(t, cut), t.shape), t)

    def test_cut_out_of_range(self):
        t = np.zeros((2, 2))
        with pytest.raises(RangeError):
            matricize(t, 0)
        with pytest.raises(RangeError):
            matricize(t, 2)


class TestContract:
    def test_matrix_vector(self):
        rng = np.random.default_rng(1)
        m = rng.standard_normal((2, 3))
        v = rng.standard_normal(3)
        out = contract(m, [1], v, [0])
        np.testing.assert_allclose(out, m @ v)

    def test_identity_case(self):
        v = np.array([1.0, -2.0, 3.0])
        out = contract(np.eye(3), [1], v, [0])
        np.testing.assert_allclose(out, v)

    def test_frobenius_inner_product(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((2, 2))
        out = contract(a, [0, 1], a, [0, 1])
        # independent oracle: elementwise brute-force sum
        expected = sum(a[i, j] * a[i, j] for i in range(2) for j in range(2))
        np.testing.assert_allclose(out, expected, rtol=1e-14)

    def test_bilinearity(self):
        rng = np.random.default_rng(3)
        a, b = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
        c = rng.standard_normal((4, 2))
        alpha = 0.37
        lhs = contract(alpha * a + b, [1], c, [0])
        rhs = alpha * contract(a, [1], c, [0]) + contract(b, [1], c, [0])
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_extent_mismatch(self):
        with pytest.raises(ShapeError):
            contract(np.zeros((2, 3)), [1], np.zeros(4), [0])

    def test_duplicate_axes_rejected(self):
        with pytest.raises(ShapeError):
            contract(np.zeros((2, 2)), [0, 0], np.zeros((2, 2)), [0, 1])


class TestTensorProduct:
    def test_basis_vectors(self):
        e = np.array([1.0, 0.0])
        out = tensor_product(e, e)
        expected = np.zeros((2, 2))
        expected[0, 0] = 1.0
        assert np.array_equal(out, expected)

    def test_scalar_scaling(self):
        v = np.array([1.0, -2.0, 0.5])
        out = tensor_product(np.array(2.0), v)
        np.testing.assert_allclose(out, 2 * v)

    def test_hand_values(self):
        out = tensor_product(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
        np.testing.assert_allclose(out, [[3.0, 4.0], [6.0, 8.0]])

    def test_rank_one_after_matricization(self):
        rng = np.random.default_rng(4)
        a, b = rng.standard_normal((2, 3)), rng.standard_normal(4)
        s = svd(matricize(tensor_product(a, b), 2)).singular_values
        assert s[1] / s[0] < 1e-12


class TestSvd:
    def test_diagonal(self):
        res = svd(np.diag([3.0, 1.0]))
        np.testing.assert_allclose(res.singular_values, [3.0, 1.0])

    def test_zero_matrix(self):
        res = svd(np.zeros((2, 2)))
        np.testing.assert_allclose(res.singular_values, [0.0, 0.0])

    def test_permutation(self):
        res = svd(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(res.singular_values, [1.0, 1.0])

    def test_reconstruction_and_orthonormality(self):
        rng = np.random.default_rng(5)
        for shape in [(4, 7), (16, 16), (64, 64), (64, 33)]:
            m = rng.standard_normal(shape)
            res = svd(m)
            rel = np.linalg.norm(res.reconstruct() - m) / np.linalg.norm(m)
            assert rel < 1e-10
            k = min(shape)
            np.testing.assert_allclose(res.u.T @ res.u, np.eye(k), atol=1e-10)
            np.testing.assert_allclose(res.vt @ res.vt.T, np.eye(k), atol=1e-10)
            assert np.all(np.diff(res.singular_values) <= 1e-12)

    def test_sign_convention_deterministic(self):
        rng = np.random.default_rng(6)
        m = rng.standard_normal((5, 5))
        r1, r2 = svd(m), svd(m.copy())
        assert np.array_equal(r1.u, r2.u)
        for j in range(5):
            col = r1.u[:, j]
            nz = np.nonzero(col)[0]
            assert col[nz[0]] >= 0

    def test_non_finite_rejected(self):
        m = np.zeros((2, 2))
        m[0, 0] = np.nan
        with pytest.raises(NumericError):
            svd(m)


class TestNorms:
    def test_schatten_trace_norm(self):
        assert schatten_p_norm(np.diag([3.0, 4.0]), 1) == pytest.approx(7.0)

    def test_schatten_frobenius(self):
        assert schatten_p_norm(np.diag([3.0, 4.0]), 2) == pytest.approx(5.0)

    def test_elementwise(self):
        assert p_norm(np.array([1.0, -1.0, 1.0, -1.0]), 2) == pytest.approx(2.0)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            p_norm(np.ones(3), 0.5)
        with pytest.raises(DomainError):
            schatten_p_norm(np.eye(2), 0.99)
