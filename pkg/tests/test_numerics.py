"""Tests for graded dense linear algebra."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geometry.clifford import rescale_c0, spinor_rep
from geometry.errors import DimensionMismatch, NotHermitian
from geometry.numerics import (
    CheckReport,
    GradedMatrix,
    direct_sum,
    graded_tensor,
    herm_eig,
    shift_matrix,
    supercommutator,
    toeplitz_matrix,
)


def _mask(n_even, n_odd):
    return np.array([False] * n_even + [True] * n_odd)


def _homogeneous(rng, mask, parity):
    n = mask.shape[0]
    data = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    same = mask[:, None] == mask[None, :]
    keep = same if parity == 0 else ~same
    return GradedMatrix(np.where(keep, data, 0.0), mask)


def _random_mask(rng, size):
    mask = rng.integers(0, 2, size=size).astype(bool)
    mask[0], mask[-1] = False, True
    return mask


class TestGradedMatrix:
    def test_rejects_non_square(self):
        with pytest.raises(DimensionMismatch):
            GradedMatrix(np.zeros((2, 3)), [False, True])

    def test_rejects_mask_length(self):
        with pytest.raises(DimensionMismatch):
            GradedMatrix(np.eye(3), [False, True])

    def test_data_is_read_only(self):
        a = GradedMatrix(np.eye(2), [False, True])
        with pytest.raises(ValueError):
            a.data[0, 0] = 5.0

    def test_parity_detection(self):
        rng = np.random.default_rng(1)
        mask = _mask(2, 2)
        assert _homogeneous(rng, mask, 0).parity() == 0
        assert _homogeneous(rng, mask, 1).parity() == 1
        mixed = GradedMatrix(rng.normal(size=(4, 4)), mask)
        assert mixed.parity() is None

    def test_even_plus_odd_recovers_matrix(self):
        rng = np.random.default_rng(2)
        a = GradedMatrix(rng.normal(size=(5, 5)), _random_mask(rng, 5))
        assert np.allclose((a.even_part() + a.odd_part()).data, a.data)

    def test_mixing_graded_spaces_raises(self):
        a = GradedMatrix(np.eye(2), [False, True])
        b = GradedMatrix(np.eye(2), [False, False])
        with pytest.raises(DimensionMismatch):
            a @ b

    def test_direct_sum_concatenates_masks(self):
        a = GradedMatrix(np.eye(2), [False, True])
        b = GradedMatrix(2 * np.eye(1), [True])
        s = direct_sum([a, b])
        assert s.dim == 3
        assert list(s.parity_mask) == [False, True, True]
        assert s.data[2, 2] == 2


class TestHermEig:
    def test_identity(self):
        spec = herm_eig(GradedMatrix.identity(_mask(2, 2)))
        assert np.allclose(spec.eigenvalues, [1.0])
        assert list(spec.multiplicities) == [4]

    def test_diagonal(self):
        spec = herm_eig(GradedMatrix(np.diag([-1.0, 0.0, 2.0]), _mask(2, 1)))
        assert np.allclose(spec.eigenvalues, [-1.0, 0.0, 2.0])
        assert list(spec.multiplicities) == [1, 1, 1]

    def test_matches_characteristic_polynomial(self):
        """Random Hermitian 6x6 against an independent root solve."""
        rng = np.random.default_rng(7)
        z = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        q, _ = np.linalg.qr(z)
        values = np.array([-3.0, -1.5, -0.2, 0.7, 1.9, 3.4])
        a = q @ np.diag(values) @ q.conj().T
        a = 0.5 * (a + a.conj().T)
        spec = herm_eig(GradedMatrix(a, _mask(3, 3)))
        roots = np.sort(np.real(np.roots(np.poly(a))))
        assert np.allclose(spec.eigenvalues, roots, atol=1e-9)
        assert np.allclose(spec.eigenvalues, values, atol=1e-9)

    def test_eigenpairs(self):
        rng = np.random.default_rng(3)
        z = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        a = GradedMatrix(z + z.conj().T, _random_mask(rng, 8))
        spec = herm_eig(a)
        for lam, v in zip(spec.raw, spec.vectors.T):
            assert np.linalg.norm(a.data @ v - lam * v) <= 1e-9 * a.norm()

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitian):
            herm_eig(GradedMatrix(np.array([[0.0, 1.0], [0.0, 0.0]]), _mask(1, 1)))

    def test_rejects_non_square(self):
        with pytest.raises(DimensionMismatch):
            herm_eig(np.zeros((2, 3)))

    @settings(max_examples=25, derandomize=True, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(1, 9))
    def test_trace_identity(self, seed, n):
        rng = np.random.default_rng(seed)
        z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        a = GradedMatrix(z + z.conj().T, np.zeros(n, dtype=bool))
        spec = herm_eig(a)
        assert spec.dim == n
        assert np.all(np.diff(spec.eigenvalues) > 0)
        total = float(np.sum(spec.eigenvalues * spec.multiplicities))
        assert abs(total - np.trace(a.data).real) <= 1e-9 * n * max(1.0, a.norm())


class TestGradedTensor:
    def test_even_even_is_kron(self):
        rng = np.random.default_rng(4)
        a = _homogeneous(rng, _mask(1, 2), 0)
        b = _homogeneous(rng, _mask(2, 1), 0)
        assert np.allclose(graded_tensor(a, b).data, np.kron(a.data, b.data))

    def test_odd_factors_anticommute(self):
        rng = np.random.default_rng(5)
        mask = _mask(1, 1)
        a, b = _homogeneous(rng, mask, 1), _homogeneous(rng, mask, 1)
        one = GradedMatrix.identity(mask)
        left, right = graded_tensor(a, one), graded_tensor(one, b)
        assert np.linalg.norm(left.data @ right.data + right.data @ left.data) <= 1e-12

    def test_parity_mask_is_xor(self):
        t = graded_tensor(GradedMatrix.identity(_mask(1, 1)), GradedMatrix.identity(_mask(1, 1)))
        assert list(t.parity_mask) == [False, True, True, False]

    def test_two_cl2_give_cl4(self):
        cl2 = spinor_rep(2)
        one = GradedMatrix.identity(cl2.parity_mask)
        gens = [graded_tensor(e, one) for e in cl2.generators] + [graded_tensor(one, e) for e in cl2.generators]
        eye = np.eye(4)
        for i in range(4):
            for j in range(4):
                a, b = gens[i].data, gens[j].data
                target = -2.0 * eye if i == j else 0.0 * eye
                assert np.linalg.norm(a @ b + b @ a - target) <= 1e-12

    @settings(max_examples=20, derandomize=True, deadline=None)
    @given(seed=st.integers(0, 10_000), parities=st.tuples(*[st.integers(0, 1)] * 3))
    def test_associative(self, seed, parities):
        rng = np.random.default_rng(seed)
        factors = [
            _homogeneous(rng, _random_mask(rng, int(rng.integers(2, 5))), p) for p in parities
        ]
        a, b, c = factors
        left = graded_tensor(graded_tensor(a, b), c)
        right = graded_tensor(a, graded_tensor(b, c))
        assert np.array_equal(left.parity_mask, right.parity_mask)
        assert np.linalg.norm(left.data - right.data) <= 1e-12 * max(1.0, np.linalg.norm(left.data))


class TestSupercommutator:
    def test_even_is_commutator(self):
        rng = np.random.default_rng(6)
        mask = _mask(2, 2)
        a = _homogeneous(rng, mask, 0)
        b = GradedMatrix(rng.normal(size=(4, 4)), mask)
        assert np.allclose(supercommutator(a, b).data, a.data @ b.data - b.data @ a.data)

    def test_odd_odd_is_anticommutator(self):
        rng = np.random.default_rng(8)
        mask = _mask(2, 2)
        a, b = _homogeneous(rng, mask, 1), _homogeneous(rng, mask, 1)
        assert np.allclose(supercommutator(a, b).data, a.data @ b.data + b.data @ a.data)

    def test_clifford_generator_with_itself(self):
        model = rescale_c0(np.diag([3.0, 2.0]), spinor_rep(2))
        c1 = model.generators[0]
        assert np.allclose(supercommutator(c1, c1).data, -6.0 * np.eye(2), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            supercommutator(GradedMatrix.identity(_mask(1, 1)), GradedMatrix.identity(_mask(2, 1)))

    @settings(max_examples=30, derandomize=True, deadline=None)
    @given(seed=st.integers(0, 10_000), parities=st.tuples(*[st.integers(0, 1)] * 3))
    def test_super_jacobi(self, seed, parities):
        rng = np.random.default_rng(seed)
        mask = _random_mask(rng, 4)
        a, b, c = (_homogeneous(rng, mask, p) for p in parities)
        pa, pb = parities[0], parities[1]
        lhs = supercommutator(a, supercommutator(b, c))
        rhs = supercommutator(supercommutator(a, b), c) + (-1) ** (pa * pb) * supercommutator(b, supercommutator(a, c))
        scale = max(1.0, a.norm() * b.norm() * c.norm())
        assert np.linalg.norm(lhs.data - rhs.data) <= 1e-10 * scale


class TestCheckReport:
    def test_collects_and_reports(self):
        report = CheckReport()
        report.add("small", 1e-12, 1e-9)
        report.add("large", 1e-3, 1e-9)
        assert not report.passed
        assert [o.name for o in report.failures()] == ["large"]
        assert report.max_residual == pytest.approx(1e-3)

    def test_nan_residual_fails(self):
        report = CheckReport()
        assert not report.add("nan", float("nan"), 1.0).passed


class TestBandedBuilders:
    def test_shift_moves_basis_vectors(self):
        S = shift_matrix(5)
        e = np.eye(5)
        assert np.array_equal(S @ e[1], e[2])
        assert not S[:, -1].any()

    def test_negative_step_is_adjoint(self):
        assert np.array_equal(shift_matrix(6, -2), shift_matrix(6, 2).T)

    def test_toeplitz_is_banded(self):
        T = toeplitz_matrix({0: 2.0, 1: 0.5j}, radius=3)
        assert T.shape == (7, 7)
        assert np.allclose(np.diag(T), 2.0)
        assert np.allclose(np.diag(T, -1), 0.5j)
        assert not np.diag(T, 1).any()

    def test_toeplitz_agrees_with_shift_powers(self):
        coeffs = {-1: 0.3, 0: 1.0, 2: -0.7}
        expected = sum(c * shift_matrix(9, p) for p, c in coeffs.items())
        assert np.allclose(toeplitz_matrix(coeffs, radius=4), expected)
