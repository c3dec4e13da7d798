"""Spectral-triple instances with vertical geometry.

A TripleInstance bundles a truncated Hilbert space, the represented algebra
generators, an odd self-adjoint D and optionally a torus or SU(2) action
with a vertical geometry (rho, c). From these the module derives the
vertical Dirac operator, the canonical remainder Z, the horizontal Dirac
operator D_h[Z] = D - D_v - Z, mean curvature and shape operator, and runs
the factorisation and index checks.

Identities involving truncated multiplication operators only hold away from
the edge of the Fourier window. Such triples carry an ``interior`` mask and
residuals are measured on those basis vectors (columns).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
import scipy.linalg

from geometry.clifford import SIGMA_X, SIGMA_Y, check_spd
from geometry.deform import character
from geometry.errors import (
    DimensionMismatch,
    InvalidRemainder,
    MissingVerticalGeometry,
    NotFactorisable,
    NotHermitian,
    NotPositiveDefinite,
    RelationViolated,
    TruncationExceeded,
)
from geometry.group import GModule, IrrepLabel, circle, regular_module, su2, torus_module
from geometry.numerics import (
    DEFAULT_TOL,
    CheckReport,
    GradedMatrix,
    commutator,
    kernel_projection,
    opnorm,
    shift_matrix,
    supercommutator,
    toeplitz_matrix,
)
from geometry.weil import coadjoint_matrix, represent_cubic_dirac, represent_weil

logger = logging.getLogger(__name__)


def restricted_norm(X: GradedMatrix | np.ndarray, interior: np.ndarray | None = None) -> float:
    """Operator norm of X on the span of the interior basis vectors."""
    data = X.data if isinstance(X, GradedMatrix) else np.asarray(X)
    if interior is not None:
        data = data[:, interior]
    if data.size == 0:
        return 0.0
    return float(np.linalg.norm(data, 2))


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VerticalGeometry:
    """Vertical metric and Clifford action on H.

    ``rho[i][j]`` is the operator <eps^i, rho eps^j> and ``rho_inv[i][j]`` the
    operator <eps_i, rho^{-T} eps_j>. For a constant metric both are scalar
    multiples of the identity and ``scalar`` holds the Gram matrix.
    """

    rho: tuple[tuple[GradedMatrix, ...], ...]
    rho_inv: tuple[tuple[GradedMatrix, ...], ...]
    c_gen: tuple[GradedMatrix, ...]
    ell: GradedMatrix | None = None
    scalar: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.c_gen)

    @classmethod
    def constant(cls, R: np.ndarray, c_gen: Sequence[GradedMatrix]) -> "VerticalGeometry":
        R = check_spd(R)
        m = len(c_gen)
        if R.shape != (m, m):
            raise DimensionMismatch(f"metric of shape {R.shape} for {m} Clifford generators")
        R_inv = np.linalg.inv(R)
        one = GradedMatrix.identity(c_gen[0].parity_mask)
        rho = tuple(tuple(one * float(R[i, j]) for j in range(m)) for i in range(m))
        rho_inv = tuple(tuple(one * float(R_inv[i, j]) for j in range(m)) for i in range(m))
        return cls(rho, rho_inv, tuple(c_gen), None, R)

    @classmethod
    def warped_circle(cls, ell: GradedMatrix, c: GradedMatrix,
                      ell_inv: GradedMatrix | None = None) -> "VerticalGeometry":
        """U(1) orbits of length ell: rho = 4 pi^2 ell^{-2} on d theta."""
        if ell_inv is None:
            inv = np.linalg.inv(ell.data)
            ell_inv = ell.like(0.5 * (inv + inv.conj().T))
        rho = (ell_inv @ ell_inv) * (4.0 * math.pi**2)
        rho_inv = (ell @ ell) * (1.0 / (4.0 * math.pi**2))
        return cls(((rho,),), ((rho_inv,),), (c,), ell, None)

    def clifford(self, lam: Sequence[float]) -> GradedMatrix:
        """c(lam) for a covector with constant coordinates."""
        out = GradedMatrix.zeros(self.c_gen[0].parity_mask)
        for x, c in zip(lam, self.c_gen):
            if x != 0.0:
                out = out + c * float(x)
        return out

    def flat_clifford(self, X: Sequence[float]) -> GradedMatrix:
        """c(X^flat) = X_i <eps_i, rho^{-T} eps_j> c(eps^j)."""
        out = GradedMatrix.zeros(self.c_gen[0].parity_mask)
        for i, x in enumerate(X):
            if x == 0.0:
                continue
            for j in range(self.m):
                out = out + (self.rho_inv[i][j] @ self.c_gen[j]) * float(x)
        return out


@dataclass(frozen=True, eq=False)
class BlockFactorisation:
    """H as a sum of Fourier blocks, each a copy of the invariant block H^G.

    ``blocks`` maps each label to the basis indices of its block, all listed
    in the same internal order. ``connection`` holds the correction on H^G
    carried by each block (zero when absent) and ``degrees`` the Fourier
    degree of each algebra generator.
    """

    blocks: Mapping[IrrepLabel, np.ndarray]
    invariant: IrrepLabel
    connection: Mapping[IrrepLabel, np.ndarray] = field(default_factory=dict)
    degrees: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def from_labels(cls, labels: Sequence[IrrepLabel], invariant: IrrepLabel,
                    connection: Mapping[IrrepLabel, np.ndarray] | None = None,
                    degrees: Mapping[str, tuple[int, ...]] | None = None) -> "BlockFactorisation":
        blocks: dict[IrrepLabel, list[int]] = {}
        for idx, lab in enumerate(labels):
            blocks.setdefault(lab, []).append(idx)
        sizes = [len(v) for v in blocks.values()]
        if max(sizes) != min(sizes):
            raise NotFactorisable("equal block sizes", float(max(sizes) - min(sizes)))
        if invariant not in blocks:
            raise NotFactorisable(f"invariant block {invariant}", float("nan"))
        return cls({k: np.array(v) for k, v in blocks.items()}, invariant,
                   dict(connection or {}), dict(degrees or {}))

    @property
    def block_dim(self) -> int:
        return int(len(self.blocks[self.invariant]))

    def multiplication_map(self, dim: int) -> np.ndarray:
        """M: (+)_k H^G -> H, block k sent onto its basis indices."""
        g = self.block_dim
        M = np.zeros((dim, len(self.blocks) * g))
        for b, idx in enumerate(self.blocks.values()):
            M[idx, b * g + np.arange(g)] = 1.0
        return M


@dataclass(frozen=True, eq=False)
class TripleInstance:
    """A truncated n-multigraded spectral triple with optional group data."""

    name: str
    D: GradedMatrix
    generators: Mapping[str, GradedMatrix] = field(default_factory=dict)
    module: GModule | None = None
    vertical: VerticalGeometry | None = None
    remainder: GradedMatrix | None = None
    multigrading: tuple[GradedMatrix, ...] = ()
    derivations: Mapping[str, tuple[GradedMatrix, ...]] = field(default_factory=dict)
    weights: np.ndarray | None = None
    fourier_generators: Mapping[str, Any] = field(default_factory=dict)
    factorisation: BlockFactorisation | None = None
    interior: np.ndarray | None = None

    def __post_init__(self) -> None:
        scale = max(1.0, self.D.norm())
        even = opnorm(self.D.even_part())
        if even > 1e-12 * scale:
            raise RelationViolated("D odd", even, 1e-12 * scale)
        defect = self.D.hermitian_defect()
        if defect > 1e-10 * scale:
            raise NotHermitian("D = D*", defect, 1e-10 * scale)
        if self.interior is not None:
            mask = np.asarray(self.interior, dtype=bool).reshape(-1)
            if mask.shape[0] != self.D.dim:
                raise DimensionMismatch(f"interior mask of length {mask.shape[0]} for dimension {self.D.dim}")
            mask.setflags(write=False)
            object.__setattr__(self, "interior", mask)
        if self.remainder is not None:
            validate_remainder(self, self.remainder, tol=1e-10).raise_on_failure(InvalidRemainder)

    @property
    def H_dim(self) -> int:
        return self.D.dim

    @property
    def parity_mask(self) -> np.ndarray:
        return self.D.parity_mask

    @property
    def multigrade(self) -> int:
        return self.D.multigrade

    @property
    def dU(self) -> tuple[GradedMatrix, ...]:
        return () if self.module is None else self.module.dU

    def commutator_norms(self) -> dict[str, float]:
        """||[D, a]|| per algebra generator."""
        return {name: opnorm(commutator(self.D, a)) for name, a in self.generators.items()}


def _require_vertical(t: TripleInstance) -> VerticalGeometry:
    if t.vertical is None:
        raise MissingVerticalGeometry(f"triple '{t.name}' has no vertical geometry")
    if t.module is None:
        raise MissingVerticalGeometry(f"triple '{t.name}' has no group action")
    return t.vertical


def _scalar_metric(v: VerticalGeometry) -> bool:
    return v.scalar is not None


# ---------------------------------------------------------------------------
# Vertical Dirac operator and moment map
# ---------------------------------------------------------------------------

def _cubic_term(t: TripleInstance, v: VerticalGeometry) -> GradedMatrix:
    """sum <eps_i, rho^{-T}[eps_j, eps_k]> c(eps^i) c(eps^j) c(eps^k)."""
    f = t.module.group.structure  # type: ignore[union-attr]
    c = [g.data for g in v.c_gen]
    out = np.zeros((t.H_dim, t.H_dim), dtype=np.complex128)
    for i, j, k in itertools.product(range(v.m), repeat=3):
        if not np.any(f[j, k]):
            continue
        coef = sum(f[j, k, l] * v.rho_inv[i][l].data for l in range(v.m) if f[j, k, l] != 0.0)
        out += coef @ (c[i] @ c[j] @ c[k])
    return t.D.like(out)


def vertical_dirac(t: TripleInstance) -> GradedMatrix:
    """D_v = c(eps^i) dU(eps_i) - 1/6 <eps_i, rho^{-T}[eps_j, eps_k]> c(eps^i eps^j eps^k)."""
    v = _require_vertical(t)
    data = sum((c.data @ u.data for c, u in zip(v.c_gen, t.dU)), np.zeros((t.H_dim, t.H_dim), dtype=np.complex128))
    return t.D.like(data) - _cubic_term(t, v) * (1.0 / 6.0)


def derivation(t: TripleInstance, name: str) -> tuple[GradedMatrix, ...]:
    """d alpha(eps_i)(a), from the stored table or as [dU(eps_i), a]."""
    if name in t.derivations:
        return tuple(t.derivations[name])
    a = t.generators[name]
    return tuple(commutator(u, a) for u in t.dU)


def vertical_dirac_check(t: TripleInstance, tol: float = DEFAULT_TOL) -> CheckReport:
    """D_v self-adjoint, invariant, and [D_v, a] = c(eps^i) d alpha(eps_i)(a) per generator."""
    v = _require_vertical(t)
    Dv = vertical_dirac(t)
    scale = tol * max(1.0, Dv.norm())
    report = CheckReport()
    report.add("D_v = D_v*", restricted_norm(Dv - Dv.H, t.interior), scale)
    for i, u in enumerate(t.dU):
        report.add(f"[D_v, dU(e{i + 1})]", restricted_norm(commutator(Dv, u), t.interior), scale * max(1.0, u.norm()))
    for name, a in t.generators.items():
        lhs = commutator(Dv, a)
        rhs = GradedMatrix.zeros(t.parity_mask)
        for c, da in zip(v.c_gen, derivation(t, name)):
            rhs = rhs + c @ da
        report.add(f"[D_v, {name}] = c d_alpha({name})", restricted_norm(lhs - rhs, t.interior), scale * max(1.0, a.norm()))
    return report


def moment_map(t: TripleInstance, X: Sequence[float], D: GradedMatrix | None = None) -> GradedMatrix:
    """mu(X) = -1/2 [D, c(X^flat)] - dU(X)."""
    v = _require_vertical(t)
    D = t.D if D is None else D
    dUX = GradedMatrix.zeros(t.parity_mask)
    for x, u in zip(X, t.dU):
        if x != 0.0:
            dUX = dUX + u * float(x)
    return supercommutator(D, v.flat_clifford(X)) * (-0.5) - dUX


# ---------------------------------------------------------------------------
# Remainders
# ---------------------------------------------------------------------------

def canonical_remainder_terms(t: TripleInstance) -> dict[str, GradedMatrix]:
    """The three summands of the canonical remainder, keyed by role."""
    v = _require_vertical(t)
    eye = np.eye(v.m)
    moment = GradedMatrix.zeros(t.parity_mask)
    for i in range(v.m):
        moment = moment + v.c_gen[i] @ moment_map(t, eye[i])
    metric = GradedMatrix.zeros(t.parity_mask)
    if not _scalar_metric(v):
        for i, j in itertools.product(range(v.m), repeat=2):
            metric = metric - (v.rho_inv[i][j] @ commutator(t.D, v.rho[i][j])) * 0.25
    cubic = _cubic_term(t, v) * (-1.0 / 12.0)
    return {"moment": moment, "metric": metric, "cubic": cubic}


def canonical_remainder(t: TripleInstance) -> GradedMatrix:
    """Z = c(eps^i) mu(eps_i) - 1/4 <eps_i, rho^{-T} eps_j> [D, <eps^i, rho eps^j>] - 1/12 (cubic term)."""
    terms = canonical_remainder_terms(t)
    return terms["moment"] + terms["metric"] + terms["cubic"]


def validate_remainder(t: TripleInstance, Z: GradedMatrix, tol: float = DEFAULT_TOL) -> CheckReport:
    """Parity, symmetry, invariance and metric supercommutation of a candidate remainder."""
    if Z.dim != t.H_dim:
        raise DimensionMismatch(f"remainder of dimension {Z.dim} on a space of dimension {t.H_dim}")
    scale = tol * max(1.0, Z.norm())
    report = CheckReport()
    report.add("Z odd", restricted_norm(Z.even_part(), t.interior), scale)
    report.add("Z = Z*", restricted_norm(Z - Z.H, t.interior), scale)
    for i, u in enumerate(t.dU):
        report.add(f"[Z, dU(e{i + 1})]", restricted_norm(commutator(Z, u), t.interior), scale * max(1.0, u.norm()))
    v = t.vertical
    if v is not None and not _scalar_metric(v):
        for i, j in itertools.product(range(v.m), repeat=2):
            r = restricted_norm(supercommutator(Z, v.rho[i][j]), t.interior)
            report.add(f"[Z, rho_{i + 1}{j + 1}]", r, scale * max(1.0, v.rho[i][j].norm()))
    return report


def horizontal_dirac(t: TripleInstance, Z: GradedMatrix, tol: float = DEFAULT_TOL) -> GradedMatrix:
    """D_h[Z] = D - D_v - Z for a valid remainder Z."""
    validate_remainder(t, Z, tol).raise_on_failure(InvalidRemainder)
    return t.D - vertical_dirac(t) - Z


# ---------------------------------------------------------------------------
# Mean curvature and shape operator
# ---------------------------------------------------------------------------

def mean_curvature(t: TripleInstance) -> GradedMatrix:
    """kappa = -1/2 <eps_i, rho^{-T} eps_j> [D, <eps^i, rho eps^j>]."""
    v = _require_vertical(t)
    kappa = GradedMatrix.zeros(t.parity_mask)
    if _scalar_metric(v):
        return kappa
    for i, j in itertools.product(range(v.m), repeat=2):
        kappa = kappa - (v.rho_inv[i][j] @ commutator(t.D, v.rho[i][j])) * 0.5
    return kappa


def shape_operator(t: TripleInstance, Z: GradedMatrix) -> tuple[GradedMatrix, ...]:
    """T[Z](eps_i) = [D_h[Z], c(eps_i^flat)] for the basis directions."""
    v = _require_vertical(t)
    Dh = horizontal_dirac(t, Z)
    eye = np.eye(v.m)
    return tuple(supercommutator(Dh, v.flat_clifford(eye[i])) for i in range(v.m))


def mean_curvature_and_shape(t: TripleInstance, Z: GradedMatrix) -> tuple[GradedMatrix, tuple[GradedMatrix, ...]]:
    return mean_curvature(t), shape_operator(t, Z)


def is_geodesic(t: TripleInstance, Z: GradedMatrix, tol: float = DEFAULT_TOL) -> bool:
    scale = tol * max(1.0, t.D.norm())
    return all(restricted_norm(T, t.interior) <= scale for T in shape_operator(t, Z))


def umbilic_residual(t: TripleInstance, Z: GradedMatrix) -> float:
    """max_j ||[D_h[Z], c(eps^j)] + (1/m) kappa c(eps^j)||."""
    v = _require_vertical(t)
    Dh = horizontal_dirac(t, Z)
    kappa = mean_curvature(t)
    worst = 0.0
    for c in v.c_gen:
        r = supercommutator(Dh, c) + (kappa @ c) * (1.0 / v.m)
        worst = max(worst, restricted_norm(r, t.interior))
    return worst


def curvature_checks(t: TripleInstance, Z: GradedMatrix, tol: float = DEFAULT_TOL) -> CheckReport:
    """Rebuild [D_h[Z], c(eps^j)] from T[Z]; compare kappa with Vol^{-1}[D, Vol] when a length is stored."""
    v = _require_vertical(t)
    Dh = horizontal_dirac(t, Z)
    T = shape_operator(t, Z)
    eye = np.eye(v.m)
    scale = tol * max(1.0, t.D.norm())
    report = CheckReport()
    for j in range(v.m):
        direct = supercommutator(Dh, v.c_gen[j])
        rebuilt = GradedMatrix.zeros(t.parity_mask)
        for i in range(v.m):
            rebuilt = rebuilt + commutator(Dh, v.rho[i][j]) @ v.flat_clifford(eye[i]) + v.rho[i][j] @ T[i]
        report.add(f"T[Z] reconstruction e^{j + 1}", restricted_norm(direct - rebuilt, t.interior), scale)
    if v.ell is not None:
        ell_inv = v.ell.like(np.linalg.inv(v.ell.data))
        volume_form = ell_inv @ commutator(t.D, v.ell)
        report.add("kappa = ell^-1 [D, ell]", restricted_norm(mean_curvature(t) - volume_form, t.interior), scale)
    return report


def supercentre_residuals(t: TripleInstance, tol: float = DEFAULT_TOL) -> CheckReport:
    """Clifford relations, equivariance of c and the supercentre conditions on the metric entries."""
    v = _require_vertical(t)
    group = t.module.group  # type: ignore[union-attr]
    scale = tol * max(1.0, max(abs(r.norm()) for row in v.rho for r in row))
    report = CheckReport()
    for i, j in itertools.combinations_with_replacement(range(v.m), 2):
        r = supercommutator(v.c_gen[i], v.c_gen[j]) + v.rho[i][j] * 2.0
        report.add(f"{{c(e^{i + 1}), c(e^{j + 1})}} + 2 rho_{i + 1}{j + 1}", restricted_norm(r, t.interior), scale)
    for a, u in enumerate(t.dU):
        L = coadjoint_matrix(group, a)
        for j in range(v.m):
            target = v.clifford(L[:, j])
            r = commutator(u, v.c_gen[j]) - target
            report.add(f"[dU(e{a + 1}), c(e^{j + 1})]", restricted_norm(r, t.interior), scale * max(1.0, group.kappa))
    if _scalar_metric(v):
        return report
    entries = [(f"rho_{i + 1}{j + 1}", v.rho[i][j]) for i in range(v.m) for j in range(v.m)]
    for name, r in entries:
        report.add(f"{name} = {name}*", restricted_norm(r - r.H, t.interior), scale)
        for k, c in enumerate(v.c_gen):
            report.add(f"[{name}, c(e^{k + 1})]", restricted_norm(commutator(r, c), t.interior), scale)
        for gname, a in t.generators.items():
            report.add(f"[{name}, {gname}]", restricted_norm(commutator(r, a), t.interior), scale * max(1.0, a.norm()))
    for (n1, r1), (n2, r2) in itertools.combinations(entries, 2):
        report.add(f"[{n1}, {n2}]", restricted_norm(commutator(r1, r2), t.interior), scale)
    return report


# ---------------------------------------------------------------------------
# Anticommutation and factorisation
# ---------------------------------------------------------------------------

def _interior_block(t: TripleInstance, X: np.ndarray) -> np.ndarray:
    if t.interior is None:
        return X
    idx = np.flatnonzero(t.interior)
    return X[np.ix_(idx, idx)]


def _anticommutation_pieces(t: TripleInstance, Z: GradedMatrix) -> tuple[np.ndarray, np.ndarray]:
    Dv = vertical_dirac(t).data
    Dh = horizontal_dirac(t, Z).data
    A = _interior_block(t, Dv @ Dh + Dh @ Dv)
    Dv2 = _interior_block(t, Dv @ Dv)
    return 0.5 * (A + A.conj().T), 0.5 * (Dv2 + Dv2.conj().T)


def weak_anticommutation_constant(t: TripleInstance, Z: GradedMatrix, eps: float) -> float:
    """Smallest C >= 0 with +-{D_v, D_h[Z]} <= eps D_v^2 + C."""
    A, Dv2 = _anticommutation_pieces(t, Z)
    top = max(
        float(scipy.linalg.eigh(A - eps * Dv2, eigvals_only=True)[-1]),
        float(scipy.linalg.eigh(-A - eps * Dv2, eigvals_only=True)[-1]),
    )
    return max(top, 0.0)


def weak_anticommutation_margin(t: TripleInstance, Z: GradedMatrix, eps: float, C: float) -> float:
    """Smallest eigenvalue of eps D_v^2 + C -+ {D_v, D_h[Z]}, over both signs."""
    A, Dv2 = _anticommutation_pieces(t, Z)
    eye = np.eye(A.shape[0])
    return min(
        float(scipy.linalg.eigh(eps * Dv2 + C * eye - A, eigvals_only=True)[0]),
        float(scipy.linalg.eigh(eps * Dv2 + C * eye + A, eigvals_only=True)[0]),
    )


def factorization_check(t: TripleInstance, Z: GradedMatrix, tol: float = 1e-10,
                        raise_on_failure: bool = True) -> CheckReport:
    """Multiplication-map factorisation of a torus-principal triple.

    (i) M unitary and intertwining the group action and generator degrees,
    (ii) M (D_v model) M* = D_v, (iii) M (1 (x)_nabla D^G) M* = D_h[Z] and,
    for geodesic Z, (iv) {D_v, D_h[Z]} = 0 and (D - Z)^2 = D_v^2 + D_h[Z]^2.
    """
    fac = t.factorisation
    if fac is None:
        raise NotFactorisable("block metadata", float("nan"))
    v = _require_vertical(t)
    group = t.module.group  # type: ignore[union-attr]
    if group.kind != "torus":
        raise NotFactorisable("torus block structure", float("nan"))
    n = t.H_dim
    M = fac.multiplication_map(n)
    g = fac.block_dim
    labels = list(fac.blocks)
    inv = fac.blocks[fac.invariant]
    eye_g = np.eye(g)
    D_norm = max(1.0, t.D.norm())
    report = CheckReport()

    report.add("(i) M*M = 1", float(np.linalg.norm(M.T @ M - np.eye(M.shape[1]), 2)), tol)
    report.add("(i) MM* = 1", float(np.linalg.norm(M @ M.T - np.eye(n), 2)), tol)
    weight = 2j * math.pi * group.coord_scale
    for i, u in enumerate(t.dU):
        model = scipy.linalg.block_diag(*[weight * lab[i] * eye_g for lab in labels])
        r = M @ model @ M.T - u.data
        report.add(f"(i) M dU_model(e{i + 1}) M* = dU(e{i + 1})", float(np.linalg.norm(r, 2)), tol * max(1.0, u.norm()))
    for name, q in fac.degrees.items():
        a = t.generators[name].data
        kept = np.zeros_like(a)
        for lab, idx in fac.blocks.items():
            target = tuple(x + y for x, y in zip(lab, q))
            if target in fac.blocks:
                rows = fac.blocks[target]
                kept[np.ix_(rows, idx)] = a[np.ix_(rows, idx)]
        report.add(f"(i) degree of {name}", restricted_norm(a - kept, t.interior), tol * max(1.0, opnorm(a)))

    Dv = vertical_dirac(t)
    c_G = [c.data[np.ix_(inv, inv)] for c in v.c_gen]
    dv_model = scipy.linalg.block_diag(
        *[sum((weight * lab[i] * c_G[i] for i in range(v.m)), np.zeros((g, g), dtype=np.complex128)) for lab in labels]
    )
    report.add("(ii) M D_v-model M* = D_v", float(np.linalg.norm(M @ dv_model @ M.T - Dv.data, 2)), tol * D_norm)

    Dh = horizontal_dirac(t, Z)
    DG = Dh.data[np.ix_(inv, inv)]
    dh_model = scipy.linalg.block_diag(*[DG + fac.connection.get(lab, 0.0) for lab in labels])
    report.add("(iii) M (1 (x) D^G) M* = D_h[Z]", restricted_norm(M @ dh_model @ M.T - Dh.data, t.interior), tol * D_norm)

    if is_geodesic(t, Z):
        anti = Dv.data @ Dh.data + Dh.data @ Dv.data
        report.add("(iv) {D_v, D_h[Z]}", restricted_norm(anti, t.interior), tol * D_norm**2)
        DZ = (t.D - Z).data
        sq = DZ @ DZ - Dv.data @ Dv.data - Dh.data @ Dh.data
        report.add("(iv) (D - Z)^2 = D_v^2 + D_h^2", restricted_norm(sq, t.interior), tol * D_norm**2)
    else:
        logger.debug("triple %s is not geodesic; skipping the anticommutation identities", t.name)
    if raise_on_failure:
        report.raise_on_failure(NotFactorisable)
    return report


# ---------------------------------------------------------------------------
# Index
# ---------------------------------------------------------------------------

def kernel_split(t: TripleInstance, tol: float = DEFAULT_TOL) -> tuple[int, int]:
    """(dim ker D on even vectors, dim ker D on odd vectors)."""
    K = kernel_projection(t.D, tol)
    if K.shape[1] == 0:
        return 0, 0
    signs = np.where(t.parity_mask, -1.0, 1.0)
    G = K.conj().T @ (signs[:, None] * K)
    w = scipy.linalg.eigh(0.5 * (G + G.conj().T), eigvals_only=True)
    return int(np.sum(w > 0.0)), int(np.sum(w < 0.0))


def graded_index(t: TripleInstance, tol: float = DEFAULT_TOL) -> int:
    even, odd = kernel_split(t, tol)
    return even - odd


def spectral_gap(t: TripleInstance) -> float:
    """Smallest |eigenvalue| of D."""
    w = scipy.linalg.eigh(0.5 * (t.D.data + t.D.data.conj().T), eigvals_only=True)
    return float(np.abs(w).min()) if w.size else 0.0


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def length_profile(ell_coeffs: Sequence[float], L: int) -> np.ndarray:
    """Toeplitz matrix of ell(x) = c_0 + sum_p c_p cos(2 pi p x) on base modes |k| <= L."""
    if len(ell_coeffs) - 1 > L:
        raise TruncationExceeded(f"length profile of degree {len(ell_coeffs) - 1} exceeds base window {L}")
    x = np.linspace(0.0, 1.0, 1024, endpoint=False)
    values = ell_coeffs[0] + sum(c * np.cos(2 * math.pi * p * x) for p, c in enumerate(ell_coeffs[1:], start=1))
    if float(np.min(values)) <= 0.0:
        raise NotPositiveDefinite(f"length profile has minimum {float(np.min(values)):.3e}")
    coeffs: dict[int, complex] = {0: ell_coeffs[0]}
    for p, c in enumerate(ell_coeffs[1:], start=1):
        coeffs[p] = coeffs[-p] = 0.5 * c
    return toeplitz_matrix(coeffs, L).real


def warped_circle_triple(K: int = 8, L: int = 20, ell_coeffs: Sequence[float] = (1.0, 0.2),
                         interior_radius: int = 6, spectator_radius: int = 0) -> TripleInstance:
    """Principal U(1)-bundle over a circle with fibre length ell(x).

    H = l^2(fibre n) (x) l^2(spectator m) (x) l^2(base k) (x) C^2 graded by
    sigma_z, with c(d theta) = 2 pi i ell^{-1} sigma_x, D_v = c(d theta) dU(d/d theta)
    and D_h = diag(2 pi k) sigma_y on the base. The spectator circle (modes
    |m| <= spectator_radius, trivial when 0) is a flat T^1 factor D does not
    see; its mode and the fibre mode are the torus weights used by deform_triple.
    """
    if interior_radius > L:
        raise TruncationExceeded(f"interior radius {interior_radius} exceeds base window {L}")
    if spectator_radius < 0:
        raise TruncationExceeded(f"spectator radius must be non-negative, got {spectator_radius}")
    ell_b = length_profile(ell_coeffs, L)
    inv = np.linalg.inv(ell_b)
    ell_inv_b = 0.5 * (inv + inv.T)
    nb, mb, kb = 2 * K + 1, 2 * spectator_radius + 1, 2 * L + 1
    I_n, I_m = np.eye(nb), np.eye(mb)
    spin_mask = np.tile(np.array([False, True]), kb * mb)
    group = circle(K)
    module = torus_module(group, spinor_dim=2 * kb * mb, spinor_mask=spin_mask)
    mask = module.parity_mask

    def on_base(X: np.ndarray) -> np.ndarray:
        return np.kron(I_n, np.kron(I_m, X))

    ell = GradedMatrix(on_base(np.kron(ell_b, np.eye(2))), mask)
    ell_inv = GradedMatrix(on_base(np.kron(ell_inv_b, np.eye(2))), mask)
    c = GradedMatrix(2j * math.pi * on_base(np.kron(ell_inv_b, SIGMA_X)), mask)
    base_modes = np.arange(-L, L + 1, dtype=float)
    D_h = on_base(np.kron(np.diag(2 * math.pi * base_modes), SIGMA_Y))
    D = GradedMatrix(c.data @ module.dU[0].data + D_h, mask)
    D = D.like(0.5 * (D.data + D.data.conj().T))

    generators = {
        "u": GradedMatrix(np.kron(shift_matrix(nb), np.eye(2 * kb * mb)), mask),
        "v": GradedMatrix(on_base(np.kron(shift_matrix(kb), np.eye(2))), mask),
    }
    degrees = {"u": (1,), "v": (0,)}
    fibre_index = np.array([lab[0] for lab in module.labels], dtype=int)
    base_index = np.tile(np.repeat(np.arange(-L, L + 1), 2), nb * mb)
    interior = np.abs(base_index) <= interior_radius
    if spectator_radius:
        generators["w"] = GradedMatrix(np.kron(I_n, np.kron(shift_matrix(mb), np.eye(2 * kb))), mask)
        degrees["w"] = (0,)
        spectator_index = np.tile(np.repeat(np.arange(-spectator_radius, spectator_radius + 1), 2 * kb), nb)
        weights = np.stack([fibre_index, spectator_index], axis=1)
        fourier = {"u": character((1, 0)), "w": character((0, 1))}
    else:
        weights = fibre_index.reshape(-1, 1)
        fourier = {"u": character((1,))}
    fac = BlockFactorisation.from_labels(module.labels, (0,), degrees=degrees)
    vertical = VerticalGeometry.warped_circle(ell, c, ell_inv)
    logger.debug("built warped circle triple: dim %d, interior %d", D.dim, int(interior.sum()))
    name = f"warped_u1_K{K}_L{L}" + (f"_S{spectator_radius}" if spectator_radius else "")
    return TripleInstance(
        name, D, generators, module, vertical,
        weights=weights, fourier_generators=fourier, factorisation=fac, interior=interior,
    )


def su2_group_triple(J: int | float = 2, rho: np.ndarray | None = None) -> TripleInstance:
    """SU(2) acting on the truncated L^2(SU(2)) (x) spinors with D the cubic Dirac operator."""
    group = su2(J)
    w = represent_weil(regular_module(group), np.eye(3) if rho is None else np.asarray(rho, dtype=float))
    D = represent_cubic_dirac(w)
    multigrading = () if w.multigrading is None else (w.multigrading,)
    D = GradedMatrix(0.5 * (D.data + D.data.conj().T), D.parity_mask, len(multigrading))
    vertical = VerticalGeometry.constant(w.rho, w.c_gen)
    return TripleInstance(f"su2_group_J{J}", D, {}, w.total, vertical, multigrading=multigrading)


__all__ = [
    "BlockFactorisation", "TripleInstance", "VerticalGeometry",
    "canonical_remainder", "canonical_remainder_terms", "curvature_checks", "derivation",
    "factorization_check", "graded_index", "horizontal_dirac", "is_geodesic", "kernel_split",
    "length_profile", "mean_curvature", "mean_curvature_and_shape", "moment_map",
    "restricted_norm", "shape_operator", "spectral_gap", "su2_group_triple",
    "supercentre_residuals", "umbilic_residual", "validate_remainder", "vertical_dirac",
    "vertical_dirac_check", "warped_circle_triple", "weak_anticommutation_constant",
    "weak_anticommutation_margin",
]
