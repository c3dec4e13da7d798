"""Harmonic analysis for tori T^m and SU(2) on truncated modules.

Conventions
-----------
* A vertical metric is the Gram matrix R of <., rho .> on g* (see clifford).
* Weights are read off from dU(H) = i lambda(H) on the Cartan subalgebra and
  stored as coordinate vectors on the dual basis eps^i.
* Torus irreps e_n(t) = exp(2 pi i <n, t>) give dU(eps_i) = 2 pi i s n_i where
  s is the coordinate scale of the model (1 for period-1 coordinates t,
  1/(2 pi) for the angle coordinate theta of ``circle``).
* SU(2) uses an orthonormal basis with [eps_1, eps_2] = kappa eps_3 (cyclic)
  and kappa = (16 pi^2)^(1/3), which gives SU(2) = S^3 of radius 2/kappa and
  unit volume.

The Casimir value of -R_ij dU(eps_i) dU(eps_j) on V_pi is
<lambda + 2 rho_+, R lambda>, where rho_+ is the half-sum of positive roots.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.linalg

from geometry.clifford import check_spd
from geometry.errors import (
    DimensionMismatch,
    RelationViolated,
    TruncationExceeded,
    UnknownIrrep,
    UnlabelledSpace,
)
from geometry.numerics import GradedMatrix

logger = logging.getLogger(__name__)

SU2_KAPPA: float = (16.0 * math.pi**2) ** (1.0 / 3.0)

IrrepLabel = Hashable


# ---------------------------------------------------------------------------
# Spin matrices
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def spin_matrices(j: Fraction) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hermitian (J_x, J_y, J_z) for spin j in the basis m = j, j-1, ..., -j."""
    d = int(2 * j) + 1
    m = np.array([float(j) - k for k in range(d)])
    jf = float(j)
    # raising operator: <m+1| J+ |m> sits one row above the diagonal
    up = np.sqrt(np.maximum(jf * (jf + 1) - m[1:] * (m[1:] + 1), 0.0))
    jplus = np.diag(up, k=1).astype(np.complex128)
    jminus = jplus.conj().T
    jx = 0.5 * (jplus + jminus)
    jy = -0.5j * (jplus - jminus)
    jz = np.diag(m).astype(np.complex128)
    for a in (jx, jy, jz):
        a.setflags(write=False)
    return jx, jy, jz


# ---------------------------------------------------------------------------
# Group models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IrrepData:
    label: IrrepLabel
    dimension: int
    highest_weight: np.ndarray
    dU: tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class GroupModel:
    """Structure data of T^m or SU(2) together with a truncation.

    ``structure[i, j, k]`` is f_ij^k with [eps_i, eps_j] = f_ij^k eps_k and
    ``inner`` is the Ad-invariant inner product on g in the basis eps_i.
    ``truncation`` is K (torus, ||n||_inf <= K) or J (SU(2), j <= J).
    """

    kind: str
    dim: int
    structure: np.ndarray
    inner: np.ndarray
    truncation: int | Fraction
    coord_scale: float = 1.0
    kappa: float = 0.0

    # -- labels ---------------------------------------------------------------

    def normalize_label(self, pi: object, check_truncation: bool = True) -> IrrepLabel:
        if self.kind == "torus":
            raw = (pi,) if isinstance(pi, (int, np.integer)) else pi
            try:
                label = tuple(int(x) for x in raw)  # type: ignore[union-attr]
                exact = all(float(x) == int(x) for x in raw)  # type: ignore[union-attr]
            except (TypeError, ValueError) as exc:
                raise UnknownIrrep(f"torus label must be an integer vector, got {pi!r}") from exc
            if len(label) != self.dim or not exact:
                raise UnknownIrrep(f"torus label must be an integer {self.dim}-vector, got {pi!r}")
            if check_truncation and max((abs(x) for x in label), default=0) > self.truncation:
                raise TruncationExceeded(f"label {label} outside |n|_inf <= {self.truncation}")
            return label
        try:
            j = Fraction(str(pi)) if not isinstance(pi, Fraction) else pi
        except (ValueError, ZeroDivisionError) as exc:
            raise UnknownIrrep(f"SU(2) label must be a half-integer spin, got {pi!r}") from exc
        if j < 0 or (2 * j).denominator != 1:
            raise UnknownIrrep(f"SU(2) label must be a non-negative half-integer, got {pi!r}")
        if check_truncation and j > self.truncation:
            raise TruncationExceeded(f"spin {j} above cutoff J = {self.truncation}")
        return j

    def labels(self) -> list[IrrepLabel]:
        """All labels inside the truncation, in module basis order."""
        if self.kind == "torus":
            K = int(self.truncation)
            return [tuple(n) for n in itertools.product(range(-K, K + 1), repeat=self.dim)]
        top = int(2 * Fraction(self.truncation))
        return [Fraction(k, 2) for k in range(top + 1)]

    def trivial_label(self) -> IrrepLabel:
        return (0,) * self.dim if self.kind == "torus" else Fraction(0)

    def with_truncation(self, truncation: int | Fraction) -> "GroupModel":
        return replace(self, truncation=truncation)

    # -- irreps ---------------------------------------------------------------

    def irrep(self, pi: object) -> IrrepData:
        label = self.normalize_label(pi)
        if self.kind == "torus":
            n = np.array(label, dtype=float)
            dU = tuple(np.array([[2j * math.pi * self.coord_scale * x]]) for x in n)
            return IrrepData(label, 1, self.weight(label), dU)
        jx, jy, jz = spin_matrices(label)
        dU = tuple(-1j * self.kappa * a for a in (jx, jy, jz))
        return IrrepData(label, int(2 * label) + 1, self.weight(label), dU)

    @property
    def irreps(self) -> list[IrrepData]:
        return [self.irrep(pi) for pi in self.labels()]

    def weight(self, label: IrrepLabel) -> np.ndarray:
        if self.kind == "torus":
            return 2.0 * math.pi * self.coord_scale * np.array(label, dtype=float)
        return np.array([0.0, 0.0, self.kappa * float(label)])

    @property
    def rho_plus(self) -> np.ndarray:
        """Half-sum of positive roots; zero for tori."""
        if self.kind == "torus":
            return np.zeros(self.dim)
        return np.array([0.0, 0.0, 0.5 * self.kappa])

    def ad(self, a: int) -> np.ndarray:
        """Matrix of ad(eps_a) on g: column j holds [eps_a, eps_j]."""
        return self.structure[a].T.copy()

    def default_metric(self) -> np.ndarray:
        """Dual Gram matrix of the model inner product."""
        return np.linalg.inv(self.inner)

    # -- structural checks ----------------------------------------------------

    def jacobi_residual(self) -> float:
        f = self.structure
        # sum over cyclic (i, j, k) of f_ij^l f_lk^p
        t = np.einsum("ijl,lkp->ijkp", f, f)
        cyc = t + np.transpose(t, (1, 2, 0, 3)) + np.transpose(t, (2, 0, 1, 3))
        return float(np.abs(cyc).max(initial=0.0))

    def ad_invariance_residual(self, R: np.ndarray | None = None) -> float:
        """max_a ||ad_a R + R ad_a^T|| for a form on g*; inner-product form on g when R is None."""
        worst = 0.0
        for a in range(self.dim):
            L = self.ad(a)
            if R is None:
                r = L.T @ self.inner + self.inner @ L
            else:
                r = L @ R + R @ L.T
            worst = max(worst, float(np.abs(r).max(initial=0.0)))
        return worst


def torus(m: int, K: int, inner: np.ndarray | None = None) -> GroupModel:
    """T^m = R^m / Z^m in period-1 coordinates."""
    if m < 1:
        raise DimensionMismatch(f"torus rank must be >= 1, got {m}")
    G = np.eye(m) if inner is None else check_spd(inner)
    return GroupModel("torus", m, np.zeros((m, m, m)), G, int(K))


def circle(K: int) -> GroupModel:
    """U(1) in the angle coordinate theta, <d/dtheta, d/dtheta> = 1/(4 pi^2)."""
    return GroupModel(
        "torus", 1, np.zeros((1, 1, 1)), np.array([[1.0 / (4.0 * math.pi**2)]]), int(K),
        coord_scale=1.0 / (2.0 * math.pi),
    )


def su2(J: int | float | Fraction) -> GroupModel:
    f = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        f[i, j, k] = SU2_KAPPA
        f[j, i, k] = -SU2_KAPPA
    return GroupModel("su2", 3, f, np.eye(3), Fraction(str(J)), kappa=SU2_KAPPA)


def check_vertical_metric(model: GroupModel, rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """SPD and Ad-invariant; returns the cleaned matrix."""
    R = check_spd(rho)
    if R.shape != (model.dim, model.dim):
        raise DimensionMismatch(f"metric of shape {R.shape} for a {model.dim}-dimensional group")
    residual = model.ad_invariance_residual(R)
    if residual > tol * max(1.0, float(np.abs(R).max())) * max(1.0, model.kappa):
        raise RelationViolated("Ad-invariance of rho", residual, tol)
    return R


# ---------------------------------------------------------------------------
# Casimir values and norm estimates
# ---------------------------------------------------------------------------

def casimir_eigenvalue(model: GroupModel, pi: object, rho: np.ndarray) -> float:
    """Omega_{pi,rho} = <lambda_pi + 2 rho_+, R lambda_pi>."""
    label = model.normalize_label(pi)
    R = check_vertical_metric(model, rho)
    lam = model.weight(label)
    return float((lam + 2.0 * model.rho_plus) @ R @ lam)


def kostant_square_value(model: GroupModel, pi: object, rho: np.ndarray) -> float:
    """<lambda_pi + rho_+, R (lambda_pi + rho_+)>, the square of the cubic Dirac element on V_pi."""
    label = model.normalize_label(pi)
    R = check_vertical_metric(model, rho)
    shifted = model.weight(label) + model.rho_plus
    return float(shifted @ R @ shifted)


def rho_plus_norm(model: GroupModel, rho: np.ndarray) -> float:
    R = check_vertical_metric(model, rho)
    return float(math.sqrt(model.rho_plus @ R @ model.rho_plus))


def casimir_operator(dU: Sequence[np.ndarray], R: np.ndarray) -> np.ndarray:
    """-sum_ij R_ij dU_i dU_j."""
    m = len(dU)
    dim = dU[0].shape[0]
    out = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(m):
        for j in range(m):
            if R[i, j] != 0.0:
                out -= R[i, j] * (dU[i] @ dU[j])
    return out


def brute_force_casimir(model: GroupModel, pi: object, rho: np.ndarray) -> float:
    """Diagonalise the represented Casimir on V_pi; it must be scalar there."""
    data = model.irrep(pi)
    R = check_vertical_metric(model, rho)
    w = scipy.linalg.eigh(casimir_operator(data.dU, R), eigvals_only=True)
    spread = float(w.max() - w.min())
    if spread > 1e-9 * max(1.0, abs(float(w.max()))):
        raise RelationViolated(f"Casimir is scalar on {data.label}", spread, 1e-9)
    return float(w.mean())


def du_norm_check(model: GroupModel, pi: object, rho: np.ndarray, X: Sequence[float]) -> tuple[float, float]:
    """(||dpi(X)||, (1 + Omega)^{1/2} ||R^{-1}||^{1/2} ||X||), norms taken against the model inner product."""
    data = model.irrep(pi)
    R = check_vertical_metric(model, rho)
    X = np.asarray(X, dtype=float)
    if X.shape != (model.dim,):
        raise DimensionMismatch(f"Lie algebra vector of shape {X.shape}")
    op = sum(x * u for x, u in zip(X, data.dU))
    lhs = float(np.linalg.norm(op, 2)) if np.any(X) else 0.0
    omega = casimir_eigenvalue(model, data.label, R)
    # largest eigenvalue of R^{-1} measured against the inner product on g
    rinv_norm = float(scipy.linalg.eigh(np.linalg.inv(R), model.inner, eigvals_only=True)[-1])
    x_norm = float(math.sqrt(max(X @ model.inner @ X, 0.0)))
    rhs = math.sqrt(1.0 + omega) * math.sqrt(rinv_norm) * x_norm
    if lhs > rhs + 1e-10:
        raise RelationViolated(f"norm estimate for dpi_{data.label}", lhs - rhs, 1e-10)
    return lhs, rhs


# ---------------------------------------------------------------------------
# Infinitesimal orbit volume
# ---------------------------------------------------------------------------

def orbit_volume(rho: np.ndarray) -> float:
    """Volume of an orbit under rho relative to rho = I: det(R)^{-1/2}."""
    R = check_spd(rho)
    return float(np.linalg.det(R) ** -0.5)


def log_volume_derivative(rho: np.ndarray, d_rho: np.ndarray) -> float:
    """d log Vol = -1/2 tr(R^{-1} dR)."""
    R = check_spd(rho)
    return float(-0.5 * np.trace(np.linalg.solve(R, np.asarray(d_rho, dtype=float))))


# ---------------------------------------------------------------------------
# Truncated G-modules
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GModule:
    """A truncated G-module: dU(eps_i) on H plus optional isotypic block labels.

    When ``labels`` is set, column c of ``frame`` (the identity when None)
    spans a vector of the isotypic block ``labels[c]``.
    """

    group: GroupModel
    dU: tuple[GradedMatrix, ...]
    labels: tuple[IrrepLabel, ...] | None = None
    frame: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.dU[0].dim

    @property
    def parity_mask(self) -> np.ndarray:
        return self.dU[0].parity_mask

    def label_set(self) -> list[IrrepLabel]:
        if self.labels is None:
            raise UnlabelledSpace("module has no isotypic block metadata")
        seen: dict[IrrepLabel, None] = {}
        for lab in self.labels:
            seen.setdefault(lab, None)
        return list(seen)

    def act(self, X: Sequence[float]) -> GradedMatrix:
        return self.dU[0].like(sum(x * u.data for x, u in zip(X, self.dU)))


def torus_module(model: GroupModel, K: int | None = None, spinor_dim: int = 1,
                 spinor_mask: Sequence[bool] | None = None) -> GModule:
    """l^2({-K..K}^m) (x) C^d with Fourier labels, lexicographic basis."""
    K = int(model.truncation if K is None else K)
    if K > model.truncation:
        raise TruncationExceeded(f"module radius {K} exceeds group truncation {model.truncation}")
    modes = np.array(list(itertools.product(range(-K, K + 1), repeat=model.dim)), dtype=float)
    smask = np.zeros(spinor_dim, dtype=bool) if spinor_mask is None else np.asarray(spinor_mask, dtype=bool)
    mask = np.tile(smask, len(modes))
    eye = np.eye(spinor_dim)
    dU = tuple(
        GradedMatrix(np.kron(np.diag(2j * math.pi * model.coord_scale * modes[:, i]), eye), mask)
        for i in range(model.dim)
    )
    labels = tuple(tuple(int(x) for x in n) for n in modes for _ in range(spinor_dim))
    return GModule(model, dU, labels)


def regular_module(model: GroupModel, J: int | float | Fraction | None = None, spinor_dim: int = 1) -> GModule:
    """(+)_{j <= J} V_j (x) C^{2j+1} (x) C^d, the truncated L^2(SU(2)) tensored with C^d."""
    if model.kind != "su2":
        raise UnknownIrrep("regular_module is built for SU(2); use torus_module for tori")
    J = model.truncation if J is None else Fraction(str(J))
    if J > model.truncation:
        raise TruncationExceeded(f"module cutoff {J} exceeds group truncation {model.truncation}")
    blocks: list[list[np.ndarray]] = [[] for _ in range(3)]
    labels: list[Fraction] = []
    for k in range(int(2 * J) + 1):
        j = Fraction(k, 2)
        data = model.irrep(j)
        mult = np.eye(data.dimension * spinor_dim)
        for i in range(3):
            blocks[i].append(np.kron(data.dU[i], mult))
        labels.extend([j] * (data.dimension**2 * spinor_dim))
    mask = np.zeros(len(labels), dtype=bool)
    dU = tuple(GradedMatrix(scipy.linalg.block_diag(*b), mask) for b in blocks)
    return GModule(model, dU, tuple(labels))


def label_isotypic(module: GModule, group: GroupModel | None = None, tol: float = 1e-8) -> GModule:
    """Find isotypic blocks of an unlabelled module by spectral analysis.

    Tori: joint diagonalisation of the commuting dU(eps_i). SU(2): the Casimir
    of the model inner product separates spins. Each parity sector is treated
    separately so the frame respects the grading.
    """
    group = group or module.group
    n = module.dim
    frame = np.zeros((n, n), dtype=np.complex128)
    labels: list[IrrepLabel] = [None] * n  # type: ignore[list-item]
    col = 0
    for parity in (False, True):
        idx = np.flatnonzero(module.parity_mask == parity)
        if idx.size == 0:
            continue
        ops = [u.data[np.ix_(idx, idx)] for u in module.dU]
        if group.kind == "torus":
            weights = 1.0 + np.sqrt(np.arange(2, group.dim + 2, dtype=float))
            trial = sum(-1j * w * op for w, op in zip(weights, ops))
            _, vecs = scipy.linalg.eigh(0.5 * (trial + trial.conj().T))
            found = []
            for v in vecs.T:
                n_vec = [float(np.real(-1j * v.conj() @ op @ v)) / (2 * math.pi * group.coord_scale) for op in ops]
                rounded = tuple(int(round(x)) for x in n_vec)
                if max(abs(x - r) for x, r in zip(n_vec, rounded)) > 1e-6:
                    raise UnknownIrrep(f"vector with non-integral torus weight {n_vec}")
                found.append(group.normalize_label(rounded))
        else:
            C = casimir_operator(ops, group.default_metric())
            w, vecs = scipy.linalg.eigh(0.5 * (C + C.conj().T))
            table = {lab: casimir_eigenvalue(group, lab, group.default_metric()) for lab in group.labels()}
            scale = max(1.0, max(table.values()))
            found = []
            for value in w:
                match = [lab for lab, om in table.items() if abs(om - value) <= tol * scale]
                if not match:
                    raise UnknownIrrep(f"Casimir eigenvalue {value:.6g} matches no spin up to {group.truncation}")
                found.append(match[0])
        for c, lab in enumerate(found):
            frame[idx, col] = vecs[:, c]
            labels[col] = lab
            col += 1
    return GModule(group, module.dU, tuple(labels), frame)


def peter_weyl_project(module: GModule, pi: object) -> GradedMatrix:
    """Orthogonal projection onto the pi-isotypic block, F_pi F_pi^*."""
    if module.labels is None:
        raise UnlabelledSpace("module has no isotypic block metadata")
    label = module.group.normalize_label(pi)
    cols = [c for c, lab in enumerate(module.labels) if lab == label]
    if module.frame is None:
        P = np.zeros((module.dim, module.dim), dtype=np.complex128)
        P[cols, cols] = 1.0
    else:
        F = module.frame[:, cols]
        P = F @ F.conj().T
    return GradedMatrix(P, module.parity_mask)


def isotypic_blocks(module: GModule) -> dict[IrrepLabel, GradedMatrix]:
    return {lab: peter_weyl_project(module, lab) for lab in module.label_set()}


def casimir_spectrum(module: GModule, rho: np.ndarray, tol: float = 1e-9) -> dict[IrrepLabel, tuple[float, int]]:
    """Per-label Casimir value from the represented operator, with block dimension."""
    R = check_vertical_metric(module.group, rho)
    C = casimir_operator([u.data for u in module.dU], R)
    out: dict[IrrepLabel, tuple[float, int]] = {}
    for lab, P in isotypic_blocks(module).items():
        rank = int(round(float(np.real(np.trace(P.data)))))
        value = float(np.real(np.trace(C @ P.data))) / max(rank, 1)
        out[lab] = (value, rank)
    return out


__all__ = [
    "GModule", "GroupModel", "IrrepData", "SU2_KAPPA",
    "brute_force_casimir", "casimir_eigenvalue", "casimir_operator", "casimir_spectrum",
    "check_vertical_metric", "circle", "du_norm_check", "isotypic_blocks",
    "kostant_square_value", "label_isotypic", "log_volume_derivative", "orbit_volume",
    "peter_weyl_project", "regular_module", "rho_plus_norm", "spin_matrices", "su2", "torus",
    "torus_module",
]
