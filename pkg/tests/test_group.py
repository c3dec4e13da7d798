"""Tests for torus and SU(2) harmonic analysis."""

import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg

from geometry.errors import (
    DimensionMismatch,
    NotPositiveDefinite,
    RelationViolated,
    TruncationExceeded,
    UnknownIrrep,
    UnlabelledSpace,
)
from geometry.group import (
    SU2_KAPPA,
    GModule,
    brute_force_casimir,
    casimir_eigenvalue,
    casimir_operator,
    casimir_spectrum,
    check_vertical_metric,
    circle,
    du_norm_check,
    kostant_square_value,
    label_isotypic,
    log_volume_derivative,
    orbit_volume,
    peter_weyl_project,
    regular_module,
    rho_plus_norm,
    spin_matrices,
    su2,
    torus,
    torus_module,
)
from geometry.numerics import GradedMatrix


class TestStructure:
    @pytest.mark.parametrize("j", [Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(3)])
    def test_spin_matrices(self, j):
        jx, jy, jz = spin_matrices(j)
        assert np.allclose(jx @ jy - jy @ jx, 1j * jz)
        total = jx @ jx + jy @ jy + jz @ jz
        assert np.allclose(total, float(j * (j + 1)) * np.eye(int(2 * j) + 1))

    def test_su2_kappa_gives_unit_volume(self):
        radius = 2.0 / SU2_KAPPA
        assert 2 * math.pi**2 * radius**3 == pytest.approx(1.0)

    def test_su2_jacobi_and_invariance(self):
        g = su2(2)
        assert g.jacobi_residual() <= 1e-12 * SU2_KAPPA**2
        assert g.ad_invariance_residual() <= 1e-12 * SU2_KAPPA
        assert np.allclose(g.structure, -np.transpose(g.structure, (1, 0, 2)))

    def test_torus_is_abelian(self):
        g = torus(3, 2)
        assert not g.structure.any()
        assert g.ad_invariance_residual(np.diag([1.0, 2.0, 3.0])) == 0.0

    @pytest.mark.parametrize("j", ["0", "1/2", "1", "3/2", "2"])
    def test_irrep_brackets(self, j):
        g = su2(2)
        data = g.irrep(j)
        f = g.structure
        for a in range(3):
            assert np.allclose(data.dU[a].conj().T, -data.dU[a])
            for b in range(3):
                lhs = data.dU[a] @ data.dU[b] - data.dU[b] @ data.dU[a]
                rhs = sum(f[a, b, k] * data.dU[k] for k in range(3))
                assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(1.0, SU2_KAPPA**2 * float(Fraction(j)))

    def test_highest_weight_is_a_weight(self):
        g = su2(2)
        data = g.irrep(Fraction(3, 2))
        # dU(eps_3) = i lambda(eps_3) on some vector
        eig = np.linalg.eigvals(data.dU[2] / 1j)
        assert np.min(np.abs(eig - data.highest_weight[2])) <= 1e-12


class TestCasimirEigenvalue:
    @pytest.mark.parametrize("n", [0, 1, -2, 5])
    def test_circle(self, n):
        ell = 0.9
        value = casimir_eigenvalue(circle(8), n, np.array([[4 * math.pi**2 / ell**2]]))
        assert value == pytest.approx(4 * math.pi**2 * n**2 / ell**2)

    def test_trivial_is_zero(self):
        assert casimir_eigenvalue(su2(2), 0, 3.0 * np.eye(3)) == 0.0
        assert casimir_eigenvalue(torus(2, 3), (0, 0), np.diag([2.0, 5.0])) == 0.0

    @pytest.mark.parametrize("j", ["1/2", "1", "3/2", "2"])
    @pytest.mark.parametrize("r", [1.0, 0.3])
    def test_su2_matches_brute_force(self, j, r):
        g = su2(2)
        value = casimir_eigenvalue(g, j, r * np.eye(3))
        assert value == pytest.approx(brute_force_casimir(g, j, r * np.eye(3)), rel=1e-10)
        assert value > 0.0

    def test_torus_matches_brute_force(self):
        g = torus(2, 3)
        rho = np.array([[2.0, 0.3], [0.3, 1.0]])
        for n in [(1, 0), (2, -3), (-1, 1)]:
            assert casimir_eigenvalue(g, n, rho) == pytest.approx(brute_force_casimir(g, n, rho), rel=1e-12)

    def test_monotone_in_metric(self):
        g = torus(2, 2)
        rng = np.random.default_rng(3)
        a = rng.normal(size=(2, 2))
        rho1 = a @ a.T + np.eye(2)
        rho2 = rho1 + np.outer([1.0, 0.4], [1.0, 0.4])
        for n in g.labels():
            assert casimir_eigenvalue(g, n, rho1) <= casimir_eigenvalue(g, n, rho2) + 1e-12
        s = su2(2)
        for j in s.labels():
            assert casimir_eigenvalue(s, j, 0.5 * np.eye(3)) <= casimir_eigenvalue(s, j, 2.0 * np.eye(3))

    def test_torus_increasing_along_rays(self):
        g = torus(2, 6)
        rho = np.array([[1.5, 0.2], [0.2, 0.7]])
        values = [casimir_eigenvalue(g, (t, -2 * t), rho) for t in range(4)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_kostant_square_closed_form(self):
        g = su2(2)
        for j in g.labels():
            expected = SU2_KAPPA**2 * (float(j) + 0.5) ** 2
            assert kostant_square_value(g, j, np.eye(3)) == pytest.approx(expected)
        assert rho_plus_norm(g, np.eye(3)) == pytest.approx(SU2_KAPPA / 2)

    def test_unknown_labels(self):
        with pytest.raises(UnknownIrrep):
            casimir_eigenvalue(su2(2), "1/3", np.eye(3))
        with pytest.raises(UnknownIrrep):
            casimir_eigenvalue(su2(2), -1, np.eye(3))
        with pytest.raises(UnknownIrrep):
            casimir_eigenvalue(torus(2, 2), (1,), np.eye(2))

    def test_outside_truncation(self):
        with pytest.raises(TruncationExceeded):
            casimir_eigenvalue(su2(2), "5/2", np.eye(3))
        with pytest.raises(TruncationExceeded):
            casimir_eigenvalue(circle(3), 4, np.eye(1))


class TestVerticalMetric:
    def test_torus_accepts_any_spd(self):
        rho = np.array([[2.0, 0.5], [0.5, 1.0]])
        np.testing.assert_allclose(check_vertical_metric(torus(2, 1), rho), rho)

    def test_su2_needs_ad_invariance(self):
        check_vertical_metric(su2(1), 3.0 * np.eye(3))
        with pytest.raises(RelationViolated):
            check_vertical_metric(su2(1), np.diag([1.0, 2.0, 1.0]))

    def test_rejects_indefinite_and_wrong_shape(self):
        with pytest.raises(NotPositiveDefinite):
            check_vertical_metric(torus(2, 1), np.diag([1.0, -1.0]))
        with pytest.raises(DimensionMismatch):
            check_vertical_metric(torus(2, 1), np.eye(3))


class TestNormEstimate:
    def test_zero_vector(self):
        assert du_norm_check(su2(2), 1, np.eye(3), [0.0, 0.0, 0.0]) == (0.0, 0.0)

    def test_circle(self):
        ell, n, x = 0.6, 3, 1.3
        lhs, rhs = du_norm_check(circle(4), n, np.array([[4 * math.pi**2 / ell**2]]), [x])
        assert lhs == pytest.approx(abs(n * x))
        # coordinate |X| times ell / (2 pi); ||rho^{-T}|| relative to <d/dtheta, d/dtheta> = 1/(4 pi^2) is ell^2
        expected = math.sqrt(1 + 4 * math.pi**2 * n**2 / ell**2) * ell * abs(x) / (2 * math.pi)
        assert rhs == pytest.approx(expected)
        assert lhs <= rhs

    def test_su2_spin_one(self):
        lhs, rhs = du_norm_check(su2(2), 1, np.eye(3), [1.0, 0.0, 0.0])
        assert lhs == pytest.approx(SU2_KAPPA)
        assert lhs <= rhs

    def test_random_torus_vectors(self):
        rng = np.random.default_rng(9)
        g = torus(2, 4)
        rho = np.array([[3.0, -0.4], [-0.4, 0.5]])
        for n in [(1, 1), (4, -2), (0, 3)]:
            lhs, rhs = du_norm_check(g, n, rho, rng.normal(size=2))
            assert lhs <= rhs + 1e-10


class TestPeterWeyl:
    def test_torus_resolution(self):
        module = torus_module(circle(16), spinor_dim=2)
        blocks = {lab: peter_weyl_project(module, lab).data for lab in module.label_set()}
        total = sum(blocks.values())
        assert np.linalg.norm(total - np.eye(module.dim)) <= 1e-10
        for a, Pa in blocks.items():
            assert np.linalg.norm(Pa @ Pa - Pa) <= 1e-10
            assert np.linalg.norm(Pa - Pa.conj().T) <= 1e-10
            for b, Pb in blocks.items():
                if a != b:
                    assert np.linalg.norm(Pa @ Pb) <= 1e-10

    def test_torus_projection_is_indicator(self):
        module = torus_module(torus(2, 2))
        P = peter_weyl_project(module, (1, -2)).data
        index = module.labels.index((1, -2))
        expected = np.zeros_like(P)
        expected[index, index] = 1.0
        assert np.array_equal(P, expected)

    def test_su2_regular_module(self):
        g = su2(3)
        module = regular_module(g, spinor_dim=4)
        blocks = {lab: peter_weyl_project(module, lab).data for lab in module.label_set()}
        assert np.linalg.norm(sum(blocks.values()) - np.eye(module.dim)) <= 1e-10
        for j, P in blocks.items():
            assert round(np.trace(P).real) == (2 * j + 1) ** 2 * 4
            for u in module.dU:
                assert np.linalg.norm(P @ u.data - u.data @ P) <= 1e-10
            for k, Q in blocks.items():
                if k != j:
                    assert np.linalg.norm(P @ Q) <= 1e-10

    def test_unlabelled_space(self):
        module = torus_module(circle(2))
        bare = GModule(module.group, module.dU)
        with pytest.raises(UnlabelledSpace):
            peter_weyl_project(bare, 0)

    def test_label_errors(self):
        module = regular_module(su2(1))
        with pytest.raises(UnknownIrrep):
            peter_weyl_project(module, "2/3")
        with pytest.raises(TruncationExceeded):
            peter_weyl_project(module, 2)

    def test_label_isotypic_torus(self):
        """Relabelling a scrambled module reproduces the Fourier projections."""
        module = torus_module(torus(2, 1), spinor_dim=2, spinor_mask=[False, True])
        rng = np.random.default_rng(4)
        even = np.flatnonzero(~module.parity_mask)
        perm = np.arange(module.dim)
        perm[even] = rng.permutation(even)
        dU = tuple(GradedMatrix(u.data[np.ix_(perm, perm)], module.parity_mask) for u in module.dU)
        scrambled = label_isotypic(GModule(module.group, dU))
        original = GModule(module.group, dU, tuple(module.labels[p] for p in perm))
        for lab in module.label_set():
            assert np.linalg.norm(
                peter_weyl_project(scrambled, lab).data - peter_weyl_project(original, lab).data
            ) <= 1e-10

    def test_label_isotypic_su2_tensor(self):
        """V_j (x) V_1/2 splits into spins j +- 1/2."""
        g = su2(1)
        base = regular_module(g)
        half = g.irrep("1/2").dU
        total = tuple(
            GradedMatrix(np.kron(u.data, np.eye(2)) + np.kron(np.eye(base.dim), h), np.zeros(2 * base.dim, dtype=bool))
            for u, h in zip(base.dU, half)
        )
        labelled = label_isotypic(GModule(g, total), group=g.with_truncation(Fraction(3, 2)))
        assert set(labelled.label_set()) == {Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(0)}
        C = casimir_operator([u.data for u in total], np.eye(3))
        for lab in labelled.label_set():
            P = peter_weyl_project(labelled, lab).data
            omega = casimir_eigenvalue(labelled.group, lab, np.eye(3))
            assert np.linalg.norm(C @ P - omega * P) <= 1e-9 * max(1.0, omega)

    @pytest.mark.parametrize("scale", [1.0, 2.5])
    def test_casimir_spectrum_of_regular_module(self, scale):
        g = su2(Fraction(3, 2))
        module = regular_module(g)
        rho = scale * np.eye(3)
        spectrum = casimir_spectrum(module, rho)
        assert set(spectrum) == set(module.label_set())
        for lab, (value, rank) in spectrum.items():
            assert value == pytest.approx(casimir_eigenvalue(g, lab, rho), rel=1e-10, abs=1e-12)
            assert rank == (2 * lab + 1) ** 2

    def test_label_isotypic_rejects_out_of_range(self):
        g = su2(1)
        module = regular_module(g)
        with pytest.raises(UnknownIrrep):
            label_isotypic(GModule(g, module.dU), group=g.with_truncation(Fraction(1, 2)))


class TestOrbitVolume:
    def test_circle_volume_scales_with_length(self):
        vol = lambda ell: orbit_volume(np.array([[4 * math.pi**2 / ell**2]]))
        assert vol(2.0) / vol(1.0) == pytest.approx(2.0)

    def test_log_derivative_matches_finite_difference(self):
        rho = np.array([[2.0, 0.3], [0.3, 1.2]])
        d_rho = np.array([[0.1, -0.05], [-0.05, 0.2]])
        h = 1e-6
        fd = (math.log(orbit_volume(rho + h * d_rho)) - math.log(orbit_volume(rho - h * d_rho))) / (2 * h)
        assert log_volume_derivative(rho, d_rho) == pytest.approx(fd, rel=1e-6)
