"""Tests for triple instances: vertical and horizontal Dirac operators, curvature, index."""

import math

import numpy as np
import pytest

from geometry.errors import (
    InvalidRemainder,
    MissingVerticalGeometry,
    NotHermitian,
    NotPositiveDefinite,
    RelationViolated,
    TruncationExceeded,
)
from geometry.numerics import GradedMatrix, opnorm
from geometry.triple import (
    TripleInstance,
    canonical_remainder,
    canonical_remainder_terms,
    curvature_checks,
    factorization_check,
    graded_index,
    horizontal_dirac,
    is_geodesic,
    kernel_split,
    mean_curvature,
    mean_curvature_and_shape,
    moment_map,
    restricted_norm,
    shape_operator,
    spectral_gap,
    su2_group_triple,
    supercentre_residuals,
    umbilic_residual,
    vertical_dirac,
    vertical_dirac_check,
    warped_circle_triple,
    weak_anticommutation_constant,
    weak_anticommutation_margin,
)


@pytest.fixture(scope="module")
def warped():
    return warped_circle_triple(K=4, L=20, ell_coeffs=(1.0, 0.2), interior_radius=6)


@pytest.fixture(scope="module")
def warped_Z(warped):
    return canonical_remainder(warped)


@pytest.fixture(scope="module")
def su2_triple():
    return su2_group_triple(1)


class TestConstruction:
    def test_rejects_non_hermitian(self):
        mask = [False, True]
        D = GradedMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]), mask)
        with pytest.raises(NotHermitian):
            TripleInstance("bad", D)

    def test_rejects_even_operator(self):
        D = GradedMatrix(np.diag([1.0, -1.0]), [False, True])
        with pytest.raises(RelationViolated):
            TripleInstance("bad", D)

    def test_missing_vertical_geometry(self):
        D = GradedMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), [False, True])
        t = TripleInstance("plain", D)
        with pytest.raises(MissingVerticalGeometry):
            vertical_dirac(t)

    def test_non_positive_length(self):
        with pytest.raises(NotPositiveDefinite):
            warped_circle_triple(K=1, L=4, ell_coeffs=(0.1, 0.5), interior_radius=2)

    def test_interior_inside_window(self):
        with pytest.raises(TruncationExceeded):
            warped_circle_triple(K=1, L=4, interior_radius=5)


class TestWarpedCircle:
    def test_vertical_dirac_derivations(self, warped):
        report = vertical_dirac_check(warped, tol=1e-9)
        assert report.passed, report.failures()

    def test_moment_map_is_multiplication(self, warped):
        mu = moment_map(warped, [1.0])
        # mu(d/dtheta) commutes with the fibre action
        assert restricted_norm(mu @ warped.dU[0] - warped.dU[0] @ mu, warped.interior) <= 1e-9

    def test_canonical_remainder_vanishes_inside(self, warped, warped_Z):
        assert restricted_norm(warped_Z, warped.interior) <= 1e-9

    def test_metric_term_is_half_mean_curvature(self, warped):
        terms = canonical_remainder_terms(warped)
        kappa = mean_curvature(warped)
        assert restricted_norm(terms["metric"] - kappa * 0.5, warped.interior) <= 1e-9
        assert opnorm(terms["cubic"]) == 0.0

    def test_mean_curvature_is_log_length_derivative(self, warped, warped_Z):
        report = curvature_checks(warped, warped_Z)
        assert report.passed, report.failures()
        assert restricted_norm(mean_curvature(warped), warped.interior) > 1e-3

    def test_umbilic_and_not_geodesic(self, warped, warped_Z):
        assert umbilic_residual(warped, warped_Z) <= 1e-8
        assert not is_geodesic(warped, warped_Z)
        T = shape_operator(warped, warped_Z)
        assert restricted_norm(T[0], warped.interior) > 1e-3

    def test_mean_curvature_and_shape_pair(self, warped, warped_Z):
        kappa, T = mean_curvature_and_shape(warped, warped_Z)
        assert len(T) == 1
        assert opnorm(kappa - mean_curvature(warped)) == 0.0
        assert opnorm(T[0] - shape_operator(warped, warped_Z)[0]) == 0.0

    def test_supercentre(self, warped):
        report = supercentre_residuals(warped)
        assert report.passed, report.failures()

    def test_factorises_without_anticommuting(self, warped, warped_Z):
        report = factorization_check(warped, warped_Z)
        assert report.passed
        assert all(not o.name.startswith("(iv)") for o in report.outcomes)

    def test_weak_anticommutation(self, warped, warped_Z):
        D_h = horizontal_dirac(warped, warped_Z)
        D_v = vertical_dirac(warped)
        anti = D_v @ D_h + D_h @ D_v
        assert restricted_norm(anti, warped.interior) > 1e-3
        C = weak_anticommutation_constant(warped, warped_Z, eps=0.5)
        assert np.isfinite(C)
        assert weak_anticommutation_margin(warped, warped_Z, 0.5, C) >= -1e-8

    def test_remainder_must_be_odd(self, warped):
        with pytest.raises(InvalidRemainder):
            horizontal_dirac(warped, GradedMatrix.identity(warped.parity_mask))

    def test_spectator_circle_is_flat(self):
        plain = warped_circle_triple(K=2, L=8, interior_radius=3)
        spect = warped_circle_triple(K=2, L=8, interior_radius=3, spectator_radius=1)
        nb, inner = 5, 2 * 17
        kp = mean_curvature(plain).data.reshape(nb, inner, nb, inner)
        expected = np.einsum("arbs,mn->amrbns", kp, np.eye(3)).reshape(spect.H_dim, spect.H_dim)
        assert np.allclose(mean_curvature(spect).data, expected, atol=1e-10)
        report = vertical_dirac_check(spect, tol=1e-9)
        assert report.passed, report.failures()
        assert spect.weights.shape == (spect.H_dim, 2)
        assert int(spect.interior.sum()) == 3 * int(plain.interior.sum())


class TestSU2Group:
    def test_vertical_dirac_is_d(self, su2_triple):
        assert opnorm(vertical_dirac(su2_triple) - su2_triple.D) <= 1e-10

    def test_moment_map_vanishes(self, su2_triple):
        for i in range(3):
            X = np.eye(3)[i]
            assert opnorm(moment_map(su2_triple, X)) <= 1e-9

    def test_horizontal_is_minus_cubic_remainder(self, su2_triple):
        Z = canonical_remainder(su2_triple)
        terms = canonical_remainder_terms(su2_triple)
        assert opnorm(Z - terms["cubic"]) <= 1e-9
        assert Z.hermitian_defect() <= 1e-10
        assert opnorm(Z) > 0.1
        D_h = horizontal_dirac(su2_triple, Z)
        assert opnorm(D_h + Z) <= 1e-9

    def test_clifford_equivariance(self, su2_triple):
        report = supercentre_residuals(su2_triple, tol=1e-10)
        assert report.passed, report.failures()

    def test_kernel_is_empty(self, su2_triple):
        assert spectral_gap(su2_triple) > 1.0
        assert kernel_split(su2_triple) == (0, 0)
        assert graded_index(su2_triple) == 0


class TestIndex:
    def test_zero_operator_counts_grading(self):
        D = GradedMatrix.zeros([False, False, True])
        t = TripleInstance("zero", D)
        assert kernel_split(t) == (2, 1)
        assert graded_index(t) == 1

    def test_invertible_block_has_no_kernel(self):
        D = GradedMatrix(np.array([[0.0, 2.0], [2.0, 0.0]]), [False, True])
        t = TripleInstance("gap", D)
        assert kernel_split(t) == (0, 0)
        assert spectral_gap(t) == pytest.approx(2.0)

    def test_commutator_norms(self):
        D = GradedMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), [False, True])
        a = GradedMatrix(np.diag([1.0, 0.0]), [False, True])
        t = TripleInstance("one", D, {"a": a})
        assert t.commutator_norms()["a"] == pytest.approx(1.0)
        assert math.isfinite(t.commutator_norms()["a"])
