"""Tests for crossed-product triples, cocycles, gauge data and frame connections."""

import math

import numpy as np
import pytest

from geometry.clifford import SIGMA_Y, spinor_rep
from geometry.crossprod import (
    SPINOR_UNITARY,
    BaseTriple,
    Cocycle,
    CrossedConfig,
    build_crossed_triple,
    coboundary,
    cocycle_checks,
    cocycle_growth,
    cocycle_norm,
    connection_checks,
    crossed_fibration,
    crossed_identities,
    equicontinuity,
    equivariance_check,
    fourier_frame,
    frame_connection,
    frame_difference,
    gauge_potential,
    gauge_unitary,
    identity_residual,
    irrational_torus,
    one_form_residual,
    perturbed_triple,
    standard_frame,
    torus_dirac,
    trivial_fibration,
    twisted_derivative,
    unitary_frame,
    validate_cocycle,
    z2_fibration,
    zero_cocycle,
)
from geometry.errors import (
    ActionNotCocycle,
    CocycleViolation,
    DimensionMismatch,
    ExpectationNotBimodular,
    NotAFrame,
    NotCommutant,
    NotUnitary,
    TruncationExceeded,
)
from geometry.numerics import GradedMatrix, herm_eig, opnorm
from geometry.triple import (
    canonical_remainder,
    factorization_check,
    graded_index,
    horizontal_dirac,
    is_geodesic,
    kernel_split,
    vertical_dirac,
    vertical_dirac_check,
    weak_anticommutation_constant,
    weak_anticommutation_margin,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _scalar_config(K=3):
    base = BaseTriple(GradedMatrix(np.zeros((1, 1)), [False]), {})
    return CrossedConfig(1, K, base, (np.eye(1),))


@pytest.fixture(scope="module")
def flat():
    return irrational_torus(theta=0.0, K=8, base_radius=4, margin=2)


@pytest.fixture(scope="module")
def rotated():
    return irrational_torus(theta=GOLDEN, K=8, base_radius=4, margin=2)


@pytest.fixture(scope="module")
def gauge_torus():
    return irrational_torus(theta=GOLDEN, K=8, base_radius=24, margin=12)


class TestCrossedTriple:
    def test_scalar_base_spectrum(self):
        t = build_crossed_triple(_scalar_config(3))
        spec = herm_eig(t.D)
        expected = 2 * math.pi * np.arange(-3, 4)
        assert np.allclose(spec.eigenvalues, expected, atol=1e-9)
        assert list(spec.multiplicities) == [2] * 7

    def test_scalar_base_factorises(self):
        t = build_crossed_triple(_scalar_config(3))
        report = factorization_check(t, GradedMatrix.zeros(t.parity_mask))
        assert report.passed

    @pytest.mark.parametrize("theta", [0.0, GOLDEN])
    def test_block_identities(self, theta):
        it = irrational_torus(theta=theta, K=8, base_radius=4, margin=2)
        t = build_crossed_triple(it.cfg)
        assert crossed_identities(it.cfg, t).passed

    @pytest.mark.parametrize("theta", [0.0, GOLDEN])
    def test_factorisation(self, theta):
        it = irrational_torus(theta=theta, K=8, base_radius=4, margin=2)
        t = build_crossed_triple(it.cfg)
        Z = GradedMatrix.zeros(t.parity_mask)
        assert is_geodesic(t, Z)
        report = factorization_check(t, Z, tol=1e-10)
        assert report.passed
        assert report["(iv) {D_v, D_h[Z]}"].residual <= 1e-10
        assert report["(iv) (D - Z)^2 = D_v^2 + D_h^2"].residual <= 1e-10

    def test_canonical_remainder_vanishes(self, rotated):
        t = build_crossed_triple(rotated.cfg)
        assert opnorm(canonical_remainder(t)) <= 1e-10

    def test_vertical_dirac_derivations(self, rotated):
        t = build_crossed_triple(rotated.cfg)
        assert vertical_dirac_check(t).passed

    def test_multigrading_anticommutes(self, rotated):
        t = build_crossed_triple(rotated.cfg)
        assert t.multigrade == 2
        for g in t.multigrading:
            assert opnorm(t.D @ g + g @ t.D) <= 1e-10

    def test_rotation_is_equicontinuous(self, rotated):
        sup = equicontinuity(rotated.cfg)
        # rotations commute with D0, so every k gives the k = 0 value
        assert sup["v"] == pytest.approx(2 * math.pi, rel=1e-12)

    def test_non_unitary_implementer(self, flat):
        cfg = CrossedConfig(1, 2, flat.cfg.base, (2.0 * np.eye(flat.cfg.base.dim),))
        with pytest.raises(ActionNotCocycle):
            build_crossed_triple(cfg)

    def test_dimension_limit(self):
        it = irrational_torus(theta=GOLDEN, K=32, base_radius=24, margin=12)
        with pytest.raises(TruncationExceeded):
            build_crossed_triple(it.cfg)


class TestCocycles:
    def test_closure_identity(self, gauge_torus):
        rng = np.random.default_rng(0)
        omega, _, upsilon, _ = gauge_torus.random_gauge_data(rng)
        assert identity_residual(omega) <= 1e-10
        assert identity_residual(upsilon) <= 1e-10

    def test_generator_values_are_one_forms(self, gauge_torus):
        rng = np.random.default_rng(1)
        omega, M, _, _ = gauge_torus.random_gauge_data(rng)
        assert one_form_residual(gauge_torus.cfg, omega((1,))) <= 1e-8
        assert one_form_residual(gauge_torus.cfg, M) <= 1e-8
        assert cocycle_checks(omega).passed

    def test_rejects_even_value(self, gauge_torus):
        size = gauge_torus.cfg.base.dim
        bad = Cocycle(gauge_torus.cfg, (np.eye(size, dtype=complex),))
        with pytest.raises(CocycleViolation):
            validate_cocycle(bad)

    def test_rejects_non_unitary_value(self, gauge_torus):
        size = gauge_torus.cfg.base.dim
        bad = Cocycle(gauge_torus.cfg, (2.0 * np.eye(size, dtype=complex),), unitary=True)
        with pytest.raises(NotUnitary):
            validate_cocycle(bad)

    def test_window_is_enforced(self, gauge_torus):
        with pytest.raises(TruncationExceeded):
            gauge_torus.s_cocycle(1.0)((9,))

    @pytest.mark.parametrize("seed", range(10))
    def test_growth_bound(self, gauge_torus, seed):
        omega, _, _, _ = gauge_torus.random_gauge_data(np.random.default_rng(100 + seed))
        C, excess = cocycle_growth(omega)
        assert excess <= 0.0
        assert math.isfinite(cocycle_norm(omega))

    @pytest.mark.parametrize("seed", range(5))
    def test_growth_bound_without_rotation(self, flat, seed):
        omega, _, _, _ = flat.random_gauge_data(np.random.default_rng(200 + seed))
        _, excess = cocycle_growth(omega)
        assert excess <= 0.0

    def test_homomorphism_cocycle(self, gauge_torus):
        omega = gauge_torus.s_cocycle(0.5)
        target = gauge_torus.toeplitz({0: 2 * math.pi * 0.5 * 3})
        assert np.linalg.norm(omega((3,)) - target) <= 1e-12
        assert cocycle_norm(omega) <= 0.5 * 2 * math.pi

    def test_coboundary_block_bound(self, gauge_torus):
        xi = gauge_torus.toeplitz({0: 0.3, 1: 0.2 + 0.1j, -1: 0.2 - 0.1j})
        omega = coboundary(gauge_torus.cfg, xi)
        validate_cocycle(omega)
        bound = 2 * np.linalg.norm(xi, 2)
        for k in gauge_torus.cfg.modes():
            direct = xi - gauge_torus.cfg.beta(k, xi)
            assert np.linalg.norm(omega(k) - direct) <= 1e-12
            assert np.linalg.norm(omega(k), 2) <= bound + 1e-12


class TestGauge:
    def test_trivial_data(self, rotated):
        cfg = rotated.cfg
        zero = np.zeros((cfg.base.dim,) * 2)
        F = gauge_potential(cfg, zero_cocycle(cfg), zero)
        assert opnorm(F) == 0.0
        U = gauge_unitary(cfg, zero_cocycle(cfg, unitary=True), np.eye(cfg.base.dim))
        assert opnorm(U - GradedMatrix.identity(U.parity_mask)) == 0.0
        residual = equivariance_check(cfg, zero_cocycle(cfg), zero, zero_cocycle(cfg, unitary=True), np.eye(cfg.base.dim))
        assert residual == 0.0

    def test_potential_is_isometric_on_blocks(self, rotated):
        cfg = rotated.cfg
        omega = rotated.s_cocycle(1.0)
        F = gauge_potential(cfg, omega, np.zeros((cfg.base.dim,) * 2))
        block = cfg.block_dim
        idx = cfg.modes().index((1,))
        piece = F.data[idx * block:(idx + 1) * block, idx * block:(idx + 1) * block]
        assert np.linalg.norm(piece, 2) == pytest.approx(np.linalg.norm(omega((1,)), 2))

    def test_rejects_non_commutant_potential(self, rotated):
        cfg = rotated.cfg
        size = 2 * rotated.base_radius + 1
        M = np.kron(SIGMA_Y, np.diag(np.linspace(-1.0, 1.0, size)))
        with pytest.raises(NotCommutant):
            gauge_potential(cfg, zero_cocycle(cfg), M)

    def test_perturbed_triple_factorises(self, rotated):
        rng = np.random.default_rng(7)
        omega, M, _, _ = rotated.random_gauge_data(rng, scale=0.2)
        t = perturbed_triple(rotated.cfg, omega, M)
        Z = canonical_remainder(t)
        assert opnorm(Z) <= 1e-10
        report = factorization_check(t, Z, tol=1e-10)
        assert report.passed

    @pytest.mark.parametrize("eps", [0.5, 1.0])
    def test_perturbed_weak_anticommutation(self, rotated, eps):
        omega, M, _, _ = rotated.random_gauge_data(np.random.default_rng(11), scale=0.2)
        t = perturbed_triple(rotated.cfg, omega, M)
        Z = canonical_remainder(t)
        D_v, D_h = vertical_dirac(t), horizontal_dirac(t, Z)
        # the potential supercommutes with c(g*) and commutes with dU
        assert opnorm(D_v @ D_h + D_h @ D_v) <= 1e-9
        assert opnorm(t.D - build_crossed_triple(rotated.cfg).D) > 1e-3
        C = weak_anticommutation_constant(t, Z, eps)
        assert 0.0 <= C <= 1e-8
        assert weak_anticommutation_margin(t, Z, eps, C) >= -1e-9

    @pytest.mark.parametrize("seed", range(20))
    def test_equivariance(self, gauge_torus, seed):
        omega, M, upsilon, w = gauge_torus.random_gauge_data(np.random.default_rng(seed))
        assert equivariance_check(gauge_torus.cfg, omega, M, upsilon, w) <= 1e-9

    def test_pure_gauge_equivariance(self, gauge_torus):
        cfg = gauge_torus.cfg
        zero = np.zeros((cfg.base.dim,) * 2)
        upsilon = gauge_torus.shift_cocycle(1)
        residual = equivariance_check(cfg, zero_cocycle(cfg), zero, upsilon, np.eye(cfg.base.dim))
        assert residual <= 1e-10


class TestIrrationalTorus:
    def test_spinor_unitary(self):
        W = SPINOR_UNITARY
        assert np.linalg.norm(W @ W.conj().T - np.eye(4)) <= 1e-14
        mask = np.logical_xor.outer([False, True], [False, True]).reshape(-1)
        same = mask[:, None] == mask[None, :]
        assert np.abs(np.where(same, 0.0, W)).max() == 0.0

    @pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
    def test_tau_shift(self, s):
        it = irrational_torus(theta=GOLDEN, K=8, base_radius=8, margin=0)
        assert it.tau_shift_residual(s) <= 1e-9

    @pytest.mark.parametrize("k", [1, 2])
    def test_integer_shift_is_gauge(self, k):
        it = irrational_torus(theta=GOLDEN, K=4, base_radius=12, margin=8)
        assert it.gauge_shift_residual(k) <= 1e-10

    def test_torus_dirac_kernel(self):
        t = torus_dirac(1j, K=4)
        assert kernel_split(t) == (1, 1)
        assert graded_index(t) == 0

    def test_doubled_torus_dirac_is_graded_tensor(self):
        t = torus_dirac(1j, K=2, doubled=True)
        assert kernel_split(t) == (2, 2)


class TestFrameConnection:
    @pytest.fixture(scope="class")
    def fib(self):
        return z2_fibration(points=5, seed=3)

    @pytest.fixture(scope="class")
    def elements(self, fib):
        f1 = fib.base_generators["f1"].data
        f2 = fib.base_generators["f2"].data
        return {
            "1": GradedMatrix.identity(fib.parity_mask),
            "f1": fib.element({"1": f1}),
            "f2": fib.element({"1": f2}),
            "u": fib.fibre_generators["u"],
            "f1 u": fib.element({"u": f1}),
            "f2 u": fib.element({"u": f1 @ f2}),
        }

    def test_leibniz_and_hermitian(self, fib, elements):
        conn = frame_connection(fib, standard_frame(fib), elements)
        report = connection_checks(conn, elements)
        assert report.passed, report.failures()

    def test_frame_independence(self, fib, elements):
        first = frame_connection(fib, standard_frame(fib), elements)
        second = frame_connection(fib, unitary_frame(fib, np.random.default_rng(11)), elements)
        assert frame_difference(first, second, elements) <= 1e-9
        assert connection_checks(second, elements).passed

    def test_strong_connection_recovers_derivation(self, fib, elements):
        conn = frame_connection(fib, standard_frame(fib), elements)
        for name, a in elements.items():
            assert opnorm(conn.table[name] - fib.nabla0(a)) <= 1e-10

    def test_trivial_module(self):
        fib = trivial_fibration(points=4, seed=2)
        a = fib.base_generators["f1"]
        conn = frame_connection(fib, standard_frame(fib), {"f1": a})
        expected = fib.T @ a - a @ fib.T
        assert opnorm(conn.table["f1"] - expected) <= 1e-12

    def test_incomplete_frame(self, fib, elements):
        with pytest.raises(NotAFrame):
            frame_connection(fib, standard_frame(fib)[:1], elements)

    def test_non_bimodular_expectation(self, fib, elements):
        rng = np.random.default_rng(5)
        Q, _ = np.linalg.qr(rng.normal(size=(fib.T.dim, fib.T.dim)))

        def twisted(w):
            return Q @ fib.expectation(w) @ Q.T

        with pytest.raises(ExpectationNotBimodular):
            frame_connection(fib, standard_frame(fib), elements, expectation=twisted)


class TestCrossedFibration:
    @pytest.fixture(scope="class")
    def torus(self):
        return irrational_torus(theta=GOLDEN, K=3, base_radius=6, margin=2)

    @pytest.fixture(scope="class")
    def potential(self, torus):
        return torus.toeplitz({0: 0.3, 1: 0.2 + 0.1j, -1: 0.2 - 0.1j})

    @pytest.fixture(scope="class")
    def setup(self, torus, potential):
        cfg = torus.cfg
        T = cfg.base.D0 + GradedMatrix(potential, cfg.base.parity_mask)
        fib = crossed_fibration(cfg, T)
        frame = fourier_frame(fib)
        v = cfg.base.generators["v"].data
        elements = {f"delta{k} v": frame[k] @ fib.lift(v) for k in range(4)}
        return fib, frame, elements, frame_connection(fib, frame, elements)

    def test_frame_spans_module(self, setup):
        fib, frame, _, _ = setup
        assert len(frame) == fib.rank == 7
        delta = fib.fibre_generators["delta"]
        assert opnorm(delta @ delta.adjoint() - GradedMatrix.identity(fib.parity_mask)) <= 1e-12

    def test_connection_is_twisted_derivative(self, torus, setup):
        fib, frame, elements, conn = setup
        v = torus.cfg.base.generators["v"].data
        T = fib.T.data
        for k in range(4):
            twisted = twisted_derivative(torus.cfg, T, v, (k,))
            expected = frame[k] @ fib.lift(twisted)
            assert opnorm(conn.table[f"delta{k} v"] - expected) <= 1e-9 * max(1.0, fib.T.norm())
        # the twist beta_k(T) - T is nonzero away from k = 0
        assert np.linalg.norm(twisted_derivative(torus.cfg, T, v, (2,)) - (T @ v - v @ T), 2) > 1e-3

    def test_leibniz_and_hermitian(self, setup):
        _, _, elements, conn = setup
        report = connection_checks(conn, elements)
        assert report.passed, report.failures()

    def test_matches_gauged_crossed_triple(self, torus, potential, setup):
        cfg = torus.cfg
        fib = setup[0]
        t = perturbed_triple(cfg, coboundary(cfg, -potential), potential)
        D_h = horizontal_dirac(t, GradedMatrix.zeros(t.parity_mask)).data
        vmask = spinor_rep(2).generators[0].parity_mask
        gamma = np.diag(np.where(vmask, -1.0, 1.0))
        v = cfg.base.generators["v"].data
        bd = cfg.block_dim
        zero = cfg.modes().index((0,))
        for k in range(1, 4):
            g = np.linalg.matrix_power(t.generators["u1"].data, k) @ t.generators["v"].data
            block = (D_h @ g - g @ D_h)[cfg.modes().index((k,)) * bd:, zero * bd:][:bd, :bd]
            expected = np.kron(gamma, twisted_derivative(cfg, fib.T.data, v, (k,)))
            assert np.linalg.norm(block - expected, 2) <= 1e-9 * max(1.0, fib.T.norm())

    def test_rank_two_action_rejected(self):
        base = BaseTriple(GradedMatrix(np.zeros((1, 1)), [False]), {})
        cfg = CrossedConfig(2, 1, base, (np.eye(1), np.eye(1)))
        with pytest.raises(DimensionMismatch):
            crossed_fibration(cfg)
