"""Crossed-product triples Z^m x| B with the dual T^m action and their gauge theory.

Given a base triple (B, H0, D0) and a Z^m action beta implemented by commuting
unitaries on H0, the crossed product acts on l^2({-K..K}^m) (x) V (x) H0 with
V the spinor module of Cl_m + (R^m)*. Basis order is Fourier mode first, then
V, then H0, so every T^m-invariant operator is block diagonal with one
(dim V * dim H0)-block per mode. Gauge potentials and gauge unitaries are
assembled from 1-cocycles on that window and checked block by block.

The module also carries the irrational-torus scenario with its explicit
spinor unitary W, the flat-torus Dirac truncations it is compared against,
and the frame formula for module connections over a finite fibration.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg

from geometry.clifford import SIGMA_X, SIGMA_Y, SIGMA_Z, spinor_rep
from geometry.deform import character
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
from geometry.group import torus, torus_module
from geometry.numerics import CheckReport, GradedMatrix, shift_matrix, supercommutator, toeplitz_matrix
from geometry.triple import BlockFactorisation, TripleInstance, VerticalGeometry, restricted_norm

logger = logging.getLogger(__name__)

MAX_DIMENSION = 5000

Mode = tuple[int, ...]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BaseTriple:
    """(B, H0, D0) with optional multigrading and an interior mask on H0."""

    D0: GradedMatrix
    generators: Mapping[str, GradedMatrix]
    multigrading: tuple[GradedMatrix, ...] = ()
    interior: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.D0.dim

    @property
    def parity_mask(self) -> np.ndarray:
        return self.D0.parity_mask


@dataclass(frozen=True, eq=False)
class CrossedConfig:
    """Rank m, Fourier radius K, base triple and implementers W_i of beta_{e_i} = Ad W_i."""

    m: int
    K: int
    base: BaseTriple
    implementers: tuple[np.ndarray, ...]
    _powers: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise DimensionMismatch(f"crossed-product rank must be >= 1, got {self.m}")
        if self.K < 1:
            raise TruncationExceeded(f"Fourier radius must be >= 1, got {self.K}")
        if len(self.implementers) != self.m:
            raise DimensionMismatch(f"{len(self.implementers)} implementers for rank {self.m}")
        for W in self.implementers:
            if W.shape != (self.base.dim, self.base.dim):
                raise DimensionMismatch(f"implementer of shape {W.shape} on H0 of dimension {self.base.dim}")

    def modes(self) -> list[Mode]:
        return [tuple(k) for k in itertools.product(range(-self.K, self.K + 1), repeat=self.m)]

    def in_window(self, k: Sequence[int]) -> bool:
        return max((abs(x) for x in k), default=0) <= self.K

    def implementer(self, k: Sequence[int]) -> np.ndarray:
        """W^k = prod_i W_i^{k_i}."""
        key = tuple(int(x) for x in k)
        if key not in self._powers:
            out = np.eye(self.base.dim, dtype=np.complex128)
            for W, e in zip(self.implementers, key):
                base = W if e >= 0 else W.conj().T
                out = out @ np.linalg.matrix_power(base, abs(e))
            self._powers[key] = out
        return self._powers[key]

    def beta(self, k: Sequence[int], X: np.ndarray) -> np.ndarray:
        Wk = self.implementer(k)
        return Wk @ X @ Wk.conj().T

    @property
    def spinor_dim(self) -> int:
        return 2**self.m

    @property
    def block_dim(self) -> int:
        return self.spinor_dim * self.base.dim

    @property
    def dim(self) -> int:
        return (2 * self.K + 1) ** self.m * self.block_dim


def _spinor_data(m: int) -> tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...], np.ndarray]:
    """(c0(eps^i), multigrading generators, parity mask) on V = S(Cl_2m)."""
    gens = spinor_rep(2 * m).generators
    c0 = tuple(g.data for g in gens[1::2])
    mu = tuple(g.data for g in gens[0::2])
    return c0, mu, gens[0].parity_mask


def _grading(mask: np.ndarray) -> np.ndarray:
    return np.diag(np.where(mask, -1.0, 1.0)).astype(np.complex128)


def equicontinuity(cfg: CrossedConfig) -> dict[str, float]:
    """sup_k ||[D0, beta_k(b)]|| over the stored window, per base generator."""
    D0 = cfg.base.D0.data
    out: dict[str, float] = {}
    for name, b in cfg.base.generators.items():
        worst = 0.0
        for k in cfg.modes():
            bk = cfg.beta(k, b.data)
            worst = max(worst, restricted_norm(D0 @ bk - bk @ D0, cfg.base.interior))
        out[name] = worst
    return out


def validate_action(cfg: CrossedConfig, tol: float = 1e-10) -> CheckReport:
    """Implementers unitary, even, mutually commuting and compatible with the base multigrading."""
    report = CheckReport()
    eye = np.eye(cfg.base.dim)
    same = cfg.base.parity_mask[:, None] == cfg.base.parity_mask[None, :]
    for i, W in enumerate(cfg.implementers):
        report.add(f"W{i + 1} unitary", float(np.linalg.norm(W @ W.conj().T - eye, 2)), tol)
        report.add(f"W{i + 1} even", float(np.linalg.norm(np.where(same, 0.0, W))), tol)
        for j, mu in enumerate(cfg.base.multigrading):
            report.add(f"[W{i + 1}, mu{j + 1}]", float(np.linalg.norm(W @ mu.data - mu.data @ W, 2)), tol)
    for i, j in itertools.combinations(range(cfg.m), 2):
        Wi, Wj = cfg.implementers[i], cfg.implementers[j]
        report.add(f"[W{i + 1}, W{j + 1}]", float(np.linalg.norm(Wi @ Wj - Wj @ Wi, 2)), tol)
    report.raise_on_failure(ActionNotCocycle)
    return report


# ---------------------------------------------------------------------------
# The crossed-product triple
# ---------------------------------------------------------------------------

def _translation(cfg: CrossedConfig, i: int) -> np.ndarray:
    """lambda_{e_i} on the mode window: e_k -> e_{k+e_i}, zero off the window."""
    modes = cfg.modes()
    index = {k: n for n, k in enumerate(modes)}
    S = np.zeros((len(modes), len(modes)))
    for k, n in index.items():
        target = tuple(x + (1 if a == i else 0) for a, x in enumerate(k))
        if target in index:
            S[index[target], n] = 1.0
    return S


def vertical_symbol(cfg: CrossedConfig, k: Sequence[int]) -> np.ndarray:
    """s(k) = -2 pi i sum_i k_i c0(eps^i) on V."""
    c0, _, _ = _spinor_data(cfg.m)
    return sum((-2j * math.pi * x * c for x, c in zip(k, c0)), np.zeros((cfg.spinor_dim,) * 2, dtype=np.complex128))


def dirac_block(cfg: CrossedConfig, k: Sequence[int], F: np.ndarray | None = None) -> np.ndarray:
    """Block k of D (+ F): s(k) (x) 1 + Gamma_V (x) (D0 + F)."""
    _, _, vmask = _spinor_data(cfg.m)
    X = cfg.base.D0.data if F is None else cfg.base.D0.data + F
    return np.kron(vertical_symbol(cfg, k), np.eye(cfg.base.dim)) + np.kron(_grading(vmask), X)


def _block_mask(cfg: CrossedConfig) -> np.ndarray:
    _, _, vmask = _spinor_data(cfg.m)
    return np.logical_xor.outer(vmask, cfg.base.parity_mask).reshape(-1)


def _check_dimension(cfg: CrossedConfig) -> None:
    if cfg.dim > MAX_DIMENSION:
        raise TruncationExceeded(f"crossed-product dimension {cfg.dim} exceeds {MAX_DIMENSION}")


def build_crossed_triple(cfg: CrossedConfig, F_blocks: Mapping[Mode, np.ndarray] | None = None,
                         name: str | None = None) -> TripleInstance:
    """The crossed-product triple, optionally with D0 replaced by D0 + F(k) on block k."""
    validate_action(cfg)
    _check_dimension(cfg)
    c0, mu, vmask = _spinor_data(cfg.m)
    modes = cfg.modes()
    n_modes = len(modes)
    I_modes = np.eye(n_modes)
    I_0 = np.eye(cfg.base.dim)
    group = torus(cfg.m, cfg.K)
    module = torus_module(group, spinor_dim=cfg.block_dim, spinor_mask=_block_mask(cfg))
    mask = module.parity_mask
    multigrade = cfg.m + len(cfg.base.multigrading)

    blocks = [dirac_block(cfg, k, None if F_blocks is None else F_blocks.get(k)) for k in modes]
    D = GradedMatrix(scipy.linalg.block_diag(*blocks), mask, multigrade)
    c_gen = tuple(GradedMatrix(-np.kron(I_modes, np.kron(c, I_0)), mask) for c in c0)
    multigrading = tuple(GradedMatrix(np.kron(I_modes, np.kron(g, I_0)), mask) for g in mu)
    multigrading += tuple(
        GradedMatrix(np.kron(I_modes, np.kron(_grading(vmask), g.data)), mask) for g in cfg.base.multigrading
    )

    I_V = np.eye(cfg.spinor_dim)
    generators: dict[str, GradedMatrix] = {}
    degrees: dict[str, Mode] = {}
    for i in range(cfg.m):
        generators[f"u{i + 1}"] = GradedMatrix(np.kron(_translation(cfg, i), np.eye(cfg.block_dim)), mask)
        degrees[f"u{i + 1}"] = tuple(1 if a == i else 0 for a in range(cfg.m))
    for bname, b in cfg.base.generators.items():
        rep = scipy.linalg.block_diag(*[np.kron(I_V, cfg.beta(tuple(-x for x in k), b.data)) for k in modes])
        generators[bname] = GradedMatrix(rep, mask)
        degrees[bname] = (0,) * cfg.m

    Gamma_V = _grading(vmask)
    connection = {}
    if F_blocks is not None:
        connection = {k: np.kron(Gamma_V, F_blocks[k] - F_blocks[(0,) * cfg.m]) for k in modes if k in F_blocks}
    fac = BlockFactorisation.from_labels(module.labels, (0,) * cfg.m, connection, degrees)
    interior = None
    if cfg.base.interior is not None:
        interior = np.tile(np.tile(np.asarray(cfg.base.interior, dtype=bool), cfg.spinor_dim), n_modes)
    weights = np.array(module.labels, dtype=int)
    fourier = {f"u{i + 1}": character(degrees[f"u{i + 1}"]) for i in range(cfg.m)}
    logger.debug("built crossed-product triple: rank %d, K %d, dim %d", cfg.m, cfg.K, D.dim)
    return TripleInstance(
        name or f"crossed_m{cfg.m}_K{cfg.K}", D, generators, module,
        VerticalGeometry.constant(np.eye(cfg.m), c_gen),
        multigrading=multigrading, weights=weights, fourier_generators=fourier,
        factorisation=fac, interior=interior,
    )


def crossed_identities(cfg: CrossedConfig, t: TripleInstance, tol: float = 1e-12) -> CheckReport:
    """D_v = Op(s (x) id), D_h[0] = id (x) D0 and T[0] = 0 for an unperturbed crossed triple."""
    from geometry.triple import horizontal_dirac, shape_operator, vertical_dirac

    modes = cfg.modes()
    n_modes = len(modes)
    _, _, vmask = _spinor_data(cfg.m)
    op_s = scipy.linalg.block_diag(*[np.kron(vertical_symbol(cfg, k), np.eye(cfg.base.dim)) for k in modes])
    id_D0 = np.kron(np.eye(n_modes), np.kron(_grading(vmask), cfg.base.D0.data))
    scale = tol * max(1.0, t.D.norm())
    zero = GradedMatrix.zeros(t.parity_mask)
    report = CheckReport()
    report.add("D_v = Op(s (x) id)", float(np.linalg.norm(vertical_dirac(t).data - op_s, 2)), scale)
    report.add("D_h[0] = id (x) D0", float(np.linalg.norm(horizontal_dirac(t, zero).data - id_D0, 2)), scale)
    for i, T in enumerate(shape_operator(t, zero)):
        report.add(f"T[0](e{i + 1}) = 0", T.norm(), scale)
    for j, g in enumerate(t.multigrading):
        report.add(f"{{D, mu{j + 1}}}", float(np.linalg.norm(t.D.data @ g.data + g.data @ t.D.data, 2)), scale)
    return report


# ---------------------------------------------------------------------------
# Cocycles
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Cocycle:
    """A 1-cocycle on the mode window, stored by its generator values.

    Additive cocycles satisfy omega(j + k) = omega(j) + beta_j(omega(k));
    unitary ones upsilon(j + k) = upsilon(j) beta_j(upsilon(k)). The closure
    over the window is built on first use and cached.
    """

    cfg: CrossedConfig
    generator_values: tuple[np.ndarray, ...]
    unitary: bool = False
    _values: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.generator_values) != self.cfg.m:
            raise DimensionMismatch(f"{len(self.generator_values)} generator values for rank {self.cfg.m}")
        for g in self.generator_values:
            if np.shape(g) != (self.cfg.base.dim, self.cfg.base.dim):
                raise DimensionMismatch(f"cocycle value of shape {np.shape(g)} on H0 of dimension {self.cfg.base.dim}")

    def _step_value(self, i: int, sign: int) -> np.ndarray:
        g = np.asarray(self.generator_values[i], dtype=np.complex128)
        if sign > 0:
            return g
        step = tuple(-1 if a == i else 0 for a in range(self.cfg.m))
        back = self.cfg.beta(step, g)
        return back.conj().T if self.unitary else -back

    def closure(self) -> dict[Mode, np.ndarray]:
        if self._values:
            return self._values
        cfg = self.cfg
        zero = (0,) * cfg.m
        start = np.eye(cfg.base.dim, dtype=np.complex128) if self.unitary else np.zeros((cfg.base.dim,) * 2, dtype=np.complex128)
        values: dict[Mode, np.ndarray] = {zero: start}
        queue = deque([zero])
        while queue:
            k = queue.popleft()
            for i, sign in itertools.product(range(cfg.m), (1, -1)):
                nxt = tuple(x + (sign if a == i else 0) for a, x in enumerate(k))
                if nxt in values or not cfg.in_window(nxt):
                    continue
                moved = cfg.beta(k, self._step_value(i, sign))
                values[nxt] = values[k] @ moved if self.unitary else values[k] + moved
                queue.append(nxt)
        self._values.update(values)
        return self._values

    def __call__(self, k: Sequence[int]) -> np.ndarray:
        key = tuple(int(x) for x in k)
        values = self.closure()
        if key not in values:
            raise TruncationExceeded(f"mode {key} outside the window |k| <= {self.cfg.K}")
        return values[key]


def identity_residual(omega: Cocycle, max_pairs: int = 400) -> float:
    """max over stored pairs of the cocycle-identity defect, on interior columns."""
    cfg = omega.cfg
    modes = cfg.modes()
    if len(modes) ** 2 <= max_pairs:
        seconds = modes
    else:
        seconds = [tuple(s if a == i else 0 for a in range(cfg.m)) for i in range(cfg.m) for s in (1, -1)]
    worst = 0.0
    for j in modes:
        for k in seconds:
            jk = tuple(a + b for a, b in zip(j, k))
            if not cfg.in_window(jk):
                continue
            moved = cfg.beta(j, omega(k))
            rhs = omega(j) @ moved if omega.unitary else omega(j) + moved
            worst = max(worst, restricted_norm(omega(jk) - rhs, cfg.base.interior))
    return worst


def _words(cfg: CrossedConfig, degree: int) -> list[np.ndarray]:
    letters = []
    for b in cfg.base.generators.values():
        letters.append(b.data)
        letters.append(b.data.conj().T)
    out: list[np.ndarray] = []
    for length in range(1, degree + 1):
        for word in itertools.product(letters, repeat=length):
            prod = np.eye(cfg.base.dim, dtype=np.complex128)
            for x in word:
                prod = prod @ x
            out.append(prod)
    return out


def one_form_residual(cfg: CrossedConfig, X: np.ndarray, degree: int = 2) -> float:
    """Relative least-squares distance of X from span{b [D0, b']} over words of length <= degree."""
    words = _words(cfg, degree)
    D0 = cfg.base.D0.data
    cols = slice(None) if cfg.base.interior is None else np.flatnonzero(cfg.base.interior)
    norm_X = float(np.linalg.norm(X[:, cols]))
    if norm_X == 0.0:
        return 0.0
    basis = []
    for bp in words:
        d = D0 @ bp - bp @ D0
        basis.append(d[:, cols].reshape(-1))
        for b in words:
            basis.append((b @ d)[:, cols].reshape(-1))
    if not basis:
        return 1.0
    A = np.stack(basis, axis=1)
    coef, *_ = np.linalg.lstsq(A, X[:, cols].reshape(-1), rcond=None)
    return float(np.linalg.norm(A @ coef - X[:, cols].reshape(-1))) / norm_X


def cocycle_checks(omega: Cocycle, tol: float = 1e-10) -> CheckReport:
    """Parity, symmetry or unitarity, commutant conditions, identity and one-form membership."""
    cfg = omega.cfg
    interior = cfg.base.interior
    same = cfg.base.parity_mask[:, None] == cfg.base.parity_mask[None, :]
    eye = np.eye(cfg.base.dim)
    report = CheckReport()
    for i, g in enumerate(omega.generator_values):
        g = np.asarray(g, dtype=np.complex128)
        scale = tol * max(1.0, float(np.linalg.norm(g, 2)))
        if omega.unitary:
            report.add(f"upsilon(e{i + 1}) unitary", restricted_norm(g @ g.conj().T - eye, interior), scale)
            report.add(f"upsilon(e{i + 1}) even", float(np.linalg.norm(np.where(same, 0.0, g))), scale)
        else:
            report.add(f"omega(e{i + 1}) odd", float(np.linalg.norm(np.where(same, g, 0.0))), scale)
            report.add(f"omega(e{i + 1}) = omega(e{i + 1})*", float(np.linalg.norm(g - g.conj().T, 2)), scale)
            report.add(f"omega(e{i + 1}) one-form", one_form_residual(cfg, g), 1e-8)
        for bname, b in cfg.base.generators.items():
            r = g @ b.data - b.data @ g
            report.add(f"[value(e{i + 1}), {bname}]", restricted_norm(r, interior), scale * max(1.0, b.norm()))
        for j, mu in enumerate(cfg.base.multigrading):
            sign = -1.0 if omega.unitary else 1.0
            r = g @ mu.data + sign * mu.data @ g
            report.add(f"[value(e{i + 1}), mu{j + 1}]", restricted_norm(r, interior), scale)
    norm = max((float(np.linalg.norm(g, 2)) for g in omega.generator_values), default=1.0)
    report.add("cocycle identity", identity_residual(omega), tol * max(1.0, norm) * (2 * cfg.K + 1))
    return report


def validate_cocycle(omega: Cocycle, tol: float = 1e-10) -> CheckReport:
    report = cocycle_checks(omega, tol)
    for o in report.failures():
        if "unitary" in o.name:
            raise NotUnitary(o.name, o.residual, o.tolerance)
    return report.raise_on_failure(CocycleViolation)


def cocycle_growth(omega: Cocycle) -> tuple[float, float]:
    """(C, max_k ||omega(k)|| - C ||k||_1) with C the largest generator norm.

    The bound carries the unit roundoff of accumulating ||k||_1 steps and of
    the spectral norm, so a non-positive excess is the inequality itself.
    """
    C = max(float(np.linalg.norm(g, 2)) for g in omega.generator_values)
    u = float(np.finfo(float).eps)
    dim = omega.cfg.base.dim

    def bound(k: Mode) -> float:
        n = sum(abs(x) for x in k)
        return C * n * (1.0 + (n + dim) * u)

    excess = max(float(np.linalg.norm(v, 2)) - bound(k) for k, v in omega.closure().items())
    return C, excess


def cocycle_norm(omega: Cocycle) -> float:
    """sup_k (4 pi^2 ||k||^2 + 1)^{-1/2} ||omega(k)||."""
    return max(
        float(np.linalg.norm(v, 2)) / math.sqrt(4 * math.pi**2 * sum(x * x for x in k) + 1.0)
        for k, v in omega.closure().items()
    )


def coboundary(cfg: CrossedConfig, xi: np.ndarray) -> Cocycle:
    """omega(k) = xi - beta_k(xi)."""
    xi = np.asarray(xi, dtype=np.complex128)
    values = tuple(xi - cfg.beta(tuple(1 if a == i else 0 for a in range(cfg.m)), xi) for i in range(cfg.m))
    return Cocycle(cfg, values)


def zero_cocycle(cfg: CrossedConfig, unitary: bool = False) -> Cocycle:
    value = np.eye(cfg.base.dim) if unitary else np.zeros((cfg.base.dim,) * 2)
    return Cocycle(cfg, tuple(value.astype(np.complex128) for _ in range(cfg.m)), unitary)


# ---------------------------------------------------------------------------
# Gauge potentials and gauge unitaries
# ---------------------------------------------------------------------------

def _validate_commutant(cfg: CrossedConfig, X: np.ndarray, label: str, odd: bool, tol: float = 1e-10) -> None:
    same = cfg.base.parity_mask[:, None] == cfg.base.parity_mask[None, :]
    interior = cfg.base.interior
    scale = tol * max(1.0, float(np.linalg.norm(X, 2)))
    report = CheckReport()
    if odd:
        report.add(f"{label} odd", float(np.linalg.norm(np.where(same, X, 0.0))), scale)
        report.add(f"{label} = {label}*", float(np.linalg.norm(X - X.conj().T, 2)), scale)
    else:
        report.add(f"{label} even", float(np.linalg.norm(np.where(same, 0.0, X))), scale)
    for bname, b in cfg.base.generators.items():
        report.add(f"[{label}, {bname}]", restricted_norm(X @ b.data - b.data @ X, interior), scale * max(1.0, b.norm()))
    for j, mu in enumerate(cfg.base.multigrading):
        sign = 1.0 if odd else -1.0
        report.add(f"[{label}, mu{j + 1}]", restricted_norm(X @ mu.data + sign * mu.data @ X, interior), scale)
    report.raise_on_failure(NotCommutant)


def gauge_blocks(cfg: CrossedConfig, omega: Cocycle, M: np.ndarray) -> dict[Mode, np.ndarray]:
    """omega(k) + M on H0 for every mode; the base part of F(omega, M) on block k."""
    validate_cocycle(omega)
    M = np.asarray(M, dtype=np.complex128)
    _validate_commutant(cfg, M, "M", odd=True)
    return {k: omega(k) + M for k in cfg.modes()}


def gauge_potential(cfg: CrossedConfig, omega: Cocycle, M: np.ndarray) -> GradedMatrix:
    """F(omega, M) = Op(id_V (x) (omega + M)) on the full crossed-product space."""
    _check_dimension(cfg)
    _, _, vmask = _spinor_data(cfg.m)
    blocks = gauge_blocks(cfg, omega, M)
    data = scipy.linalg.block_diag(*[np.kron(_grading(vmask), blocks[k]) for k in cfg.modes()])
    mask = np.tile(_block_mask(cfg), len(cfg.modes()))
    return GradedMatrix(data, mask, cfg.m + len(cfg.base.multigrading))


def perturbed_triple(cfg: CrossedConfig, omega: Cocycle, M: np.ndarray, name: str | None = None) -> TripleInstance:
    """The crossed-product triple with D replaced by D + F(omega, M)."""
    return build_crossed_triple(cfg, gauge_blocks(cfg, omega, M), name or f"gauge_m{cfg.m}_K{cfg.K}")


def unitary_blocks(cfg: CrossedConfig, upsilon: Cocycle, w: np.ndarray) -> dict[Mode, np.ndarray]:
    """w upsilon(k) on H0 for every mode."""
    if not upsilon.unitary:
        raise CocycleViolation("upsilon unitary-valued", float("nan"))
    validate_cocycle(upsilon)
    w = np.asarray(w, dtype=np.complex128)
    eye = np.eye(cfg.base.dim)
    r = restricted_norm(w @ w.conj().T - eye, cfg.base.interior)
    if r > 1e-10:
        raise NotUnitary("w w* = 1", r, 1e-10)
    _validate_commutant(cfg, w, "w", odd=False)
    return {k: w @ upsilon(k) for k in cfg.modes()}


def gauge_unitary(cfg: CrossedConfig, upsilon: Cocycle, w: np.ndarray) -> GradedMatrix:
    """U(upsilon, w) = Op(id_V (x) w upsilon)."""
    _check_dimension(cfg)
    blocks = unitary_blocks(cfg, upsilon, w)
    I_V = np.eye(cfg.spinor_dim)
    data = scipy.linalg.block_diag(*[np.kron(I_V, blocks[k]) for k in cfg.modes()])
    mask = np.tile(_block_mask(cfg), len(cfg.modes()))
    return GradedMatrix(data, mask, cfg.m + len(cfg.base.multigrading))


def equivariance_check(cfg: CrossedConfig, omega: Cocycle, M: np.ndarray, upsilon: Cocycle,
                       w: np.ndarray, tol: float = 1e-9) -> float:
    """Interior residual of U[D, U*] + U F(omega, M) U* = F(omega + upsilon[D0, upsilon*], w M w* + w[D0, w*]).

    Compared block by block on modes |k| < K and interior base columns.
    """
    F = gauge_blocks(cfg, omega, M)
    U = unitary_blocks(cfg, upsilon, w)
    _, _, vmask = _spinor_data(cfg.m)
    Gamma_V = _grading(vmask)
    I_V = np.eye(cfg.spinor_dim)
    D0 = cfg.base.D0.data
    M = np.asarray(M, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    cols = None
    if cfg.base.interior is not None:
        cols = np.tile(np.asarray(cfg.base.interior, dtype=bool), cfg.spinor_dim)
    wMw = w @ M @ w.conj().T + w @ (D0 @ w.conj().T - w.conj().T @ D0)
    worst = 0.0
    for k in cfg.modes():
        if max(abs(x) for x in k) >= cfg.K:
            continue
        D = dirac_block(cfg, k)
        Uk = np.kron(I_V, U[k])
        Uh = Uk.conj().T
        Fk = np.kron(Gamma_V, F[k])
        lhs = Uk @ (D @ Uh - Uh @ D) + Uk @ Fk @ Uh
        ups = upsilon(k)
        shifted = omega(k) + ups @ (D0 @ ups.conj().T - ups.conj().T @ D0)
        rhs = np.kron(Gamma_V, shifted + wMw)
        worst = max(worst, restricted_norm(lhs - rhs, cols))
    if worst > tol:
        logger.warning("gauge equivariance residual %.3e exceeds %.1e", worst, tol)
    return worst


# ---------------------------------------------------------------------------
# Irrational torus and flat-torus Dirac operators
# ---------------------------------------------------------------------------

SPINOR_UNITARY = (1j / math.sqrt(2.0)) * (np.kron(SIGMA_Z, np.eye(2)) + np.kron(SIGMA_Y, SIGMA_X))


def torus_dirac_block(tau: complex, k: int, radius: int, doubled: bool = False) -> np.ndarray:
    """Mode-k block of the flat-torus Dirac operator with modular parameter tau.

    On the mode (k, j) it is 2 pi (k sigma_x + (j + Re(tau) k) / Im(tau) sigma_y);
    ``doubled`` prefixes a graded C^2 factor, id (x)^ D.
    """
    if tau.imag <= 0:
        raise DimensionMismatch(f"modular parameter must have positive imaginary part, got {tau}")
    j = np.arange(-radius, radius + 1, dtype=float)
    size = 2 * radius + 1
    block = 2 * math.pi * (k * np.kron(SIGMA_X, np.eye(size)) + np.kron(SIGMA_Y, np.diag((j + tau.real * k) / tau.imag)))
    return np.kron(SIGMA_Z, block) if doubled else block


def torus_dirac(tau: complex = 1j, K: int = 8, base_radius: int | None = None, doubled: bool = False) -> TripleInstance:
    """Flat T^2 Dirac truncation on modes |k| <= K, |j| <= base_radius.

    Basis order (k, [C^2], spin, j); T^2 weights (k, j) per basis vector; the
    generators u and v translate k and j.
    """
    R = K if base_radius is None else base_radius
    size = 2 * R + 1
    n_k = 2 * K + 1
    spin_mask = np.repeat(np.array([False, True]), size)
    mask = np.logical_xor.outer(np.array([False, True]), spin_mask).reshape(-1) if doubled else spin_mask
    inner = mask.shape[0]
    D = GradedMatrix(scipy.linalg.block_diag(*[torus_dirac_block(tau, k, R, doubled) for k in range(-K, K + 1)]),
                     np.tile(mask, n_k))
    full_mask = D.parity_mask
    reps = inner // size
    generators = {
        "u": GradedMatrix(np.kron(shift_matrix(n_k), np.eye(inner)), full_mask),
        "v": GradedMatrix(np.kron(np.eye(n_k), np.kron(np.eye(reps), shift_matrix(size))), full_mask),
    }
    ks = np.repeat(np.arange(-K, K + 1), inner)
    js = np.tile(np.arange(-R, R + 1), n_k * reps)
    weights = np.stack([ks, js], axis=1)
    fourier = {"u": character((1, 0)), "v": character((0, 1))}
    label = "doubled_" if doubled else ""
    return TripleInstance(f"{label}torus_dirac_K{K}", D, generators, weights=weights, fourier_generators=fourier)


@dataclass(frozen=True, eq=False)
class IrrationalTorus:
    """Z acting on C(T) by rotation through theta; the crossed product is T^2_theta.

    H0 = C^2 (x) l^2(j), D0 = sigma_y (x) 2 pi j, multigrading i sigma_x and the
    rotation implemented by diag(exp(-2 pi i j theta)). W is the spinor unitary
    on V (x) C^2 carrying D + F(omega_s) onto id (x)^ D_{T^2, s+i}.
    """

    cfg: CrossedConfig
    theta: float
    margin: int

    @property
    def base_radius(self) -> int:
        return (self.cfg.base.dim // 2 - 1) // 2

    @property
    def W(self) -> np.ndarray:
        return SPINOR_UNITARY

    def block_W(self) -> np.ndarray:
        return np.kron(SPINOR_UNITARY, np.eye(2 * self.base_radius + 1))

    def toeplitz(self, coeffs: Mapping[int, complex]) -> np.ndarray:
        """sigma_y (x) multiplication by sum_p coeffs[p] e_p, the generic odd commutant element."""
        return np.kron(SIGMA_Y, toeplitz_matrix(coeffs, self.base_radius))

    def s_cocycle(self, s: float) -> Cocycle:
        """omega_s(n) = 2 pi s n sigma_y."""
        return Cocycle(self.cfg, (self.toeplitz({0: 2 * math.pi * s}),))

    def shift_cocycle(self, k: int) -> Cocycle:
        """upsilon_k(1) = exp(-2 pi i k t)."""
        return Cocycle(self.cfg, (np.kron(np.eye(2), shift_matrix(2 * self.base_radius + 1, -k)).astype(np.complex128),), True)

    def target_block(self, n: int, s: float) -> np.ndarray:
        return torus_dirac_block(complex(s, 1.0), n, self.base_radius, doubled=True)

    def tau_shift_residual(self, s: float) -> float:
        """max_n ||W (D + F(omega_s))_n W* - (id (x)^ D_{T^2, s+i})_n||."""
        omega = self.s_cocycle(s)
        Wb = self.block_W()
        worst = 0.0
        for k in self.cfg.modes():
            block = dirac_block(self.cfg, k, omega(k))
            worst = max(worst, float(np.linalg.norm(Wb @ block @ Wb.conj().T - self.target_block(k[0], s), 2)))
        return worst

    def gauge_shift_residual(self, k: int) -> float:
        """Conjugating D by U(upsilon_k, 1) gives W* (id (x)^ D_{T^2, k+i}) W, on columns kept by U."""
        upsilon = self.shift_cocycle(k)
        Wb = self.block_W()
        I_V = np.eye(self.cfg.spinor_dim)
        worst = 0.0
        for mode in self.cfg.modes():
            U = np.kron(I_V, upsilon(mode))
            cols = np.abs(np.diag(U @ U.conj().T) - 1.0) < 1e-12
            if not cols.any():
                continue
            conj = U @ dirac_block(self.cfg, mode) @ U.conj().T
            target = Wb.conj().T @ self.target_block(mode[0], float(k)) @ Wb
            worst = max(worst, restricted_norm(conj - target, cols))
        return worst

    def random_gauge_data(self, rng: np.random.Generator, scale: float = 0.3,
                          shift: int = 1) -> tuple[Cocycle, np.ndarray, Cocycle, np.ndarray]:
        """(omega, M, upsilon, w) with trigonometric coefficients of degree <= 2."""

        def real_poly() -> dict[int, complex]:
            c = {0: complex(rng.normal() * scale)}
            for p in (1, 2):
                z = complex(rng.normal(), rng.normal()) * scale / p
                c[p], c[-p] = z, z.conjugate()
            return c

        omega = Cocycle(self.cfg, (self.toeplitz(real_poly()),))
        M = self.toeplitz(real_poly())
        size = 2 * self.base_radius + 1
        q = int(rng.integers(-shift, shift + 1))
        phase = np.exp(1j * rng.uniform(0, 2 * math.pi))
        upsilon = Cocycle(self.cfg, (phase * np.kron(np.eye(2), shift_matrix(size, q)),), True)
        r = int(rng.integers(-shift, shift + 1))
        w = np.exp(1j * rng.uniform(0, 2 * math.pi)) * np.kron(np.eye(2), shift_matrix(size, r))
        return omega, M, upsilon, w


def irrational_torus(theta: float = (math.sqrt(5.0) - 1.0) / 2.0, K: int = 8,
                     base_radius: int = 24, margin: int = 12) -> IrrationalTorus:
    """T^2_theta as the crossed product of C(T) by rotation through theta."""
    if margin > base_radius:
        raise TruncationExceeded(f"margin {margin} exceeds base radius {base_radius}")
    size = 2 * base_radius + 1
    j = np.arange(-base_radius, base_radius + 1)
    mask = np.repeat(np.array([False, True]), size)
    D0 = GradedMatrix(np.kron(SIGMA_Y, np.diag(2 * math.pi * j.astype(float))), mask)
    v = GradedMatrix(np.kron(np.eye(2), shift_matrix(size)), mask)
    mu = GradedMatrix(np.kron(1j * SIGMA_X, np.eye(size)), mask)
    interior = np.tile(np.abs(j) <= base_radius - margin, 2)
    base = BaseTriple(D0, {"v": v}, (mu,), interior)
    W_theta = np.kron(np.eye(2), np.diag(np.exp(-2j * math.pi * theta * j)))
    return IrrationalTorus(CrossedConfig(1, K, base, (W_theta,)), float(theta), margin)


# ---------------------------------------------------------------------------
# Frame connections over a finite fibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Fibration:
    """B on H0 inside A on K = H0 (x) C^r.

    b acts as b (x) 1, the expectation averages the r diagonal fibre blocks
    and nabla0 is the graded commutator with T (x) 1.
    """

    T: GradedMatrix
    base_generators: Mapping[str, GradedMatrix]
    rank: int
    fibre_mask: np.ndarray
    fibre_generators: Mapping[str, GradedMatrix] = field(default_factory=dict)

    @property
    def parity_mask(self) -> np.ndarray:
        return np.logical_xor.outer(self.T.parity_mask, self.fibre_mask).reshape(-1)

    def lift(self, X0: np.ndarray) -> GradedMatrix:
        return GradedMatrix(np.kron(np.asarray(X0), np.eye(self.rank)), self.parity_mask)

    def expectation(self, omega: np.ndarray) -> np.ndarray:
        n = self.T.dim
        blocks = np.asarray(omega).reshape(n, self.rank, n, self.rank)
        return np.einsum("iaja->ij", blocks) / self.rank

    def nabla0(self, a: GradedMatrix) -> GradedMatrix:
        return supercommutator(self.lift(self.T.data), a)

    def element(self, parts: Mapping[str, np.ndarray]) -> GradedMatrix:
        """sum_g lift(x_g) g over fibre generators, with "1" for the identity."""
        out = np.zeros((self.T.dim * self.rank,) * 2, dtype=np.complex128)
        for gname, x in parts.items():
            g = np.eye(out.shape[0]) if gname == "1" else self.fibre_generators[gname].data
            out += self.lift(x).data @ g
        return GradedMatrix(out, self.parity_mask)


@dataclass(frozen=True, eq=False)
class FrameConnection:
    """nabla(a) = sum_i xi_i (x) E(xi_i* nabla0(a)), held in operator form sum_i xi_i lift(E(...))."""

    fibration: Fibration
    frame: tuple[GradedMatrix, ...]
    expectation: Callable[[np.ndarray], np.ndarray]
    table: Mapping[str, GradedMatrix]

    def components(self, a: GradedMatrix) -> list[np.ndarray]:
        d = self.fibration.nabla0(a).data
        return [self.expectation(xi.data.conj().T @ d) for xi in self.frame]

    def apply(self, a: GradedMatrix) -> GradedMatrix:
        fib = self.fibration
        out = np.zeros_like(a.data)
        for xi, w in zip(self.frame, self.components(a)):
            out += xi.data @ fib.lift(w).data
        return GradedMatrix(out, fib.parity_mask)


def _frame_residual(fib: Fibration, frame: Sequence[GradedMatrix], E: Callable, a: GradedMatrix) -> float:
    out = np.zeros_like(a.data)
    for xi in frame:
        out += xi.data @ fib.lift(E(xi.data.conj().T @ a.data)).data
    return float(np.linalg.norm(out - a.data, 2))


def frame_connection(fib: Fibration, frame: Sequence[GradedMatrix], elements: Mapping[str, GradedMatrix],
                     expectation: Callable[[np.ndarray], np.ndarray] | None = None,
                     tol: float = 1e-10) -> FrameConnection:
    """Connection table a -> sum_i xi_i (x) E(xi_i* nabla0(a)) for the given elements."""
    E = expectation or fib.expectation
    frame = tuple(frame)
    report = CheckReport()
    samples = [*elements.values(), *(fib.nabla0(a) for a in elements.values()), *frame]
    for bname, b in fib.base_generators.items():
        lb = fib.lift(b.data).data
        for s, w in enumerate(samples):
            scale = tol * max(1.0, w.norm()) * max(1.0, b.norm())
            left = E(lb @ w.data) - b.data @ E(w.data)
            right = E(w.data @ lb) - E(w.data) @ b.data
            report.add(f"E({bname} w{s}) = {bname} E(w{s})", float(np.linalg.norm(left, 2)), scale)
            report.add(f"E(w{s} {bname}) = E(w{s}) {bname}", float(np.linalg.norm(right, 2)), scale)
    for s, w in enumerate(samples):
        P = E(w.data.conj().T @ w.data)
        low = float(scipy.linalg.eigh(0.5 * (P + P.conj().T), eigvals_only=True)[0]) if P.size else 0.0
        report.add(f"E(w{s}* w{s}) >= 0", max(0.0, -low), tol * max(1.0, w.norm() ** 2))
    report.raise_on_failure(ExpectationNotBimodular)

    samples = [GradedMatrix.identity(fib.parity_mask), *fib.fibre_generators.values(), *elements.values()]
    worst = max(_frame_residual(fib, frame, E, a) / max(1.0, a.norm()) for a in samples)
    if worst > tol:
        raise NotAFrame("sum_i xi_i <xi_i, a> = a", worst, tol)

    partial = FrameConnection(fib, frame, E, {})
    table = {name: partial.apply(a) for name, a in elements.items()}
    return FrameConnection(fib, frame, E, table)


def connection_checks(conn: FrameConnection, elements: Mapping[str, GradedMatrix], tol: float = 1e-9) -> CheckReport:
    """Leibniz rule against base generators and the Hermitian property on element pairs."""
    fib = conn.fibration
    E = conn.expectation
    T = fib.T.data
    report = CheckReport()
    homogeneous = {name: a for name, a in elements.items() if a.parity() is not None}
    for name, a in homogeneous.items():
        sign = -1.0 if a.parity() == 1 else 1.0
        for bname, b in fib.base_generators.items():
            lb = fib.lift(b.data)
            lhs = conn.apply(a @ lb)
            rhs = conn.apply(a) @ lb + (a @ fib.lift(T @ b.data - b.data @ T)) * sign
            scale = tol * max(1.0, a.norm()) * max(1.0, b.norm()) * max(1.0, fib.T.norm())
            report.add(f"Leibniz {name}.{bname}", (lhs - rhs).norm(), scale)
    for (n1, a1), (n2, a2) in itertools.product(homogeneous.items(), repeat=2):
        g1 = a1 * (-1.0 if a1.parity() == 1 else 1.0)
        inner = E(a1.data.conj().T @ a2.data)
        lhs = T @ inner - inner @ T
        rhs = E(g1.data.conj().T @ conn.apply(a2).data) - E(conn.apply(g1).data.conj().T @ a2.data)
        scale = tol * max(1.0, a1.norm()) * max(1.0, a2.norm()) * max(1.0, fib.T.norm())
        report.add(f"Hermitian <{n1}, {n2}>", float(np.linalg.norm(lhs - rhs, 2)), scale)
    return report


def frame_difference(first: FrameConnection, second: FrameConnection, elements: Mapping[str, GradedMatrix]) -> float:
    return max((first.apply(a) - second.apply(a)).norm() for a in elements.values())


def z2_fibration(points: int = 6, seed: int = 0) -> Fibration:
    """Rank-2 fibration A = B + B u over functions on ``points`` points, with u odd.

    H0 = C^points (x) C^2 graded by sigma_z, T a random odd self-adjoint
    operator, u = Gamma_0 (x) sigma_x on K = H0 (x) C^2.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(points, points))
    Y = rng.normal(size=(points, points))
    mask0 = np.tile(np.array([False, True]), points)
    T = GradedMatrix(np.kron(X + X.T, SIGMA_X) + np.kron(Y + Y.T, SIGMA_Y), mask0)
    generators = {
        "f1": GradedMatrix(np.kron(np.diag(rng.normal(size=points)), np.eye(2)), mask0),
        "f2": GradedMatrix(np.kron(np.diag(np.cos(2 * math.pi * np.arange(points) / points)), np.eye(2)), mask0),
    }
    fibre_mask = np.array([False, True])
    K_mask = np.logical_xor.outer(mask0, fibre_mask).reshape(-1)
    u = GradedMatrix(np.kron(_grading(mask0), SIGMA_X), K_mask)
    return Fibration(T, generators, 2, fibre_mask, {"u": u})


def trivial_fibration(points: int = 6, seed: int = 0) -> Fibration:
    """A = B: rank one, the expectation is the identity and {1} is a frame."""
    z2 = z2_fibration(points, seed)
    return Fibration(z2.T, z2.base_generators, 1, np.array([False]))


def standard_frame(fib: Fibration) -> tuple[GradedMatrix, ...]:
    """{1} together with the fibre generators."""
    return (GradedMatrix.identity(fib.parity_mask), *fib.fibre_generators.values())


def unitary_frame(fib: Fibration, rng: np.random.Generator) -> tuple[GradedMatrix, ...]:
    """{alpha + beta u, -conj(beta) + conj(alpha) u} with |alpha|^2 + |beta|^2 = 1 pointwise."""
    n = fib.T.dim
    z = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    # constant on each base point so that alpha, beta lie in B
    points = n // 2
    alpha = np.repeat(z[:points, 0], 2)
    beta = np.repeat(z[:points, 1], 2)
    xi1 = fib.element({"1": np.diag(alpha), "u": np.diag(beta)})
    xi2 = fib.element({"1": -np.diag(beta.conj()), "u": np.diag(alpha.conj())})
    return xi1, xi2


def crossed_fibration(cfg: CrossedConfig, T: GradedMatrix | None = None, period: int | None = None) -> Fibration:
    """B x_beta Z truncated to Z/r on H0 (x) C^r, with delta = W* (x) (cyclic shift).

    b acts as b (x) 1, so delta_k b delta_k* = beta_{-k}(b); the expectation
    keeps the delta_0 coefficient. T defaults to D0.
    """
    if cfg.m != 1:
        raise DimensionMismatch(f"crossed fibration is built for Z actions, got rank {cfg.m}")
    r = 2 * cfg.K + 1 if period is None else int(period)
    if r < 1:
        raise DimensionMismatch(f"period must be positive, got {r}")
    T = cfg.base.D0 if T is None else T
    fibre_mask = np.zeros(r, dtype=bool)
    mask = np.logical_xor.outer(T.parity_mask, fibre_mask).reshape(-1)
    cyclic = np.roll(np.eye(r), 1, axis=0)
    delta = GradedMatrix(np.kron(cfg.implementer((1,)).conj().T, cyclic), mask)
    return Fibration(T, cfg.base.generators, r, fibre_mask, {"delta": delta})


def fourier_frame(fib: Fibration) -> tuple[GradedMatrix, ...]:
    """{delta_k : 0 <= k < r} for a crossed fibration."""
    delta = fib.fibre_generators["delta"]
    frame = [GradedMatrix.identity(fib.parity_mask)]
    for _ in range(fib.rank - 1):
        frame.append(frame[-1] @ delta)
    return tuple(frame)


def twisted_derivative(cfg: CrossedConfig, T: np.ndarray, b: np.ndarray, k: Sequence[int]) -> np.ndarray:
    """beta_k(T) b - b T = [T, b] + (beta_k(T) - T) b for even b."""
    return cfg.beta(k, T) @ b - b @ T


__all__ = [
    "BaseTriple", "Cocycle", "CrossedConfig", "Fibration", "FrameConnection", "IrrationalTorus",
    "MAX_DIMENSION", "SPINOR_UNITARY",
    "build_crossed_triple", "coboundary", "cocycle_checks", "cocycle_growth", "cocycle_norm",
    "connection_checks", "crossed_fibration", "crossed_identities", "dirac_block", "equicontinuity",
    "equivariance_check", "fourier_frame", "frame_connection", "frame_difference", "gauge_blocks", "gauge_potential",
    "gauge_unitary", "identity_residual", "irrational_torus", "one_form_residual", "perturbed_triple",
    "standard_frame", "torus_dirac", "torus_dirac_block", "trivial_fibration", "twisted_derivative",
    "unitary_blocks", "unitary_frame", "validate_action", "validate_cocycle", "vertical_symbol", "z2_fibration",
    "zero_cocycle",
]
