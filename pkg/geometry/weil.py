"""The quantum Weil algebra W(g; rho) represented on M (x) S.

M is a truncated G-module and S the spinor module of Cl(g*; rho). The
Clifford generators act as c(eps^i) = 1 (x)^ c_rho(eps^i) and the group acts
diagonally, dU(X) = dU_M(X) (x) 1 + 1 (x) sigma(X), where sigma(X) is the
quadratic Clifford element implementing ad*(X) on c(g*). That makes every
c(beta) equivariant, so the cubic Dirac element is G-invariant.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from geometry.clifford import CliffordModel, vertical_clifford
from geometry.errors import RelationViolated
from geometry.group import (
    GModule,
    GroupModel,
    IrrepLabel,
    casimir_eigenvalue,
    casimir_operator,
    check_vertical_metric,
    kostant_square_value,
    label_isotypic,
    peter_weyl_project,
)
from geometry.numerics import (
    DEFAULT_TOL,
    CheckReport,
    GradedMatrix,
    Spectrum,
    anticommutator,
    commutator,
    graded_tensor,
    herm_eig,
    opnorm,
)

logger = logging.getLogger(__name__)


def coadjoint_matrix(group: GroupModel, a: int) -> np.ndarray:
    """ad*(eps_a) on g* in dual coordinates: column j holds ad*(eps_a) eps^j."""
    return -group.ad(a).T


def spin_lift(group: GroupModel, clifford: CliffordModel) -> tuple[GradedMatrix, ...]:
    """sigma(eps_a) = sum_kl W_kl c^k c^l with W = -1/4 ad*(eps_a) R^{-1}, antisymmetrised."""
    R_inv = np.linalg.inv(clifford.metric)
    out = []
    for a in range(group.dim):
        W = -0.25 * coadjoint_matrix(group, a) @ R_inv
        W = 0.5 * (W - W.T)
        data = np.zeros((clifford.dim, clifford.dim), dtype=np.complex128)
        for k, l in itertools.product(range(group.dim), repeat=2):
            if W[k, l] != 0.0:
                data += W[k, l] * (clifford.generators[k].data @ clifford.generators[l].data)
        out.append(GradedMatrix(data, clifford.parity_mask))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class RepresentedWeil:
    group: GroupModel
    rho: np.ndarray
    clifford: CliffordModel
    module: GModule
    dU_total: tuple[GradedMatrix, ...]
    c_gen: tuple[GradedMatrix, ...]
    total: GModule
    multigrading: GradedMatrix | None = None

    @property
    def H_dim(self) -> int:
        return self.c_gen[0].dim

    @property
    def parity_mask(self) -> np.ndarray:
        return self.c_gen[0].parity_mask

    def sharp_action(self, i: int) -> GradedMatrix:
        """dU((eps^i)^sharp) = sum_k R_ki dU(eps_k)."""
        u = self.dU_total
        return u[0].like(sum(self.rho[k, i] * u[k].data for k in range(self.group.dim)))

    def module_projection(self, label: IrrepLabel) -> GradedMatrix:
        """P^M_label (x) 1_S."""
        P = peter_weyl_project(self.module, label)
        one = GradedMatrix.identity(self.clifford.parity_mask)
        return graded_tensor(P, one)


def represent_weil(module: GModule, rho: np.ndarray) -> RepresentedWeil:
    """Assemble dU_total and c(eps^i) on module (x) spinors and label the total action."""
    group = module.group
    R = check_vertical_metric(group, rho)
    cl = vertical_clifford(R)
    one_M = GradedMatrix.identity(module.parity_mask)
    one_S = GradedMatrix.identity(cl.parity_mask)
    sigma = spin_lift(group, cl)
    c_gen = tuple(graded_tensor(one_M, g) for g in cl.generators)
    dU_total = tuple(graded_tensor(u, one_S) + graded_tensor(one_M, s) for u, s in zip(module.dU, sigma))
    multigrading = graded_tensor(one_M, cl.spare) if cl.spare is not None else None

    if group.kind == "torus" and module.labels is not None:
        # sigma vanishes for abelian groups, so module labels carry over
        frame = None if module.frame is None else np.kron(module.frame, np.eye(cl.dim))
        labels = tuple(lab for lab in module.labels for _ in range(cl.dim))
        total = GModule(group, dU_total, labels, frame)
    else:
        top = group.truncation + Fraction(1, 2) if group.kind == "su2" else group.truncation
        total = label_isotypic(GModule(group, dU_total), group=group.with_truncation(top))
    logger.debug("represented Weil algebra on dim %d", dU_total[0].dim)
    return RepresentedWeil(group, R, cl, module, dU_total, c_gen, total, multigrading)


# ---------------------------------------------------------------------------
# Casimir and cubic Dirac
# ---------------------------------------------------------------------------

def represent_casimir(w: RepresentedWeil) -> GradedMatrix:
    """c(Delta) = -<eps^i, rho eps^j> dU(eps_i) dU(eps_j)."""
    data = casimir_operator([u.data for u in w.dU_total], w.rho)
    return w.dU_total[0].like(0.5 * (data + data.conj().T))


def represent_cubic_dirac(w: RepresentedWeil) -> GradedMatrix:
    """c(eps^i) dU(eps_i) - 1/6 <eps_i, rho^{-T}[eps_j, eps_k]> c(eps^i eps^j eps^k)."""
    m = w.group.dim
    c = [g.data for g in w.c_gen]
    data = sum(c[i] @ w.dU_total[i].data for i in range(m))
    coeff = np.einsum("il,jkl->ijk", np.linalg.inv(w.rho), w.group.structure)
    for i, j, k in itertools.product(range(m), repeat=3):
        if coeff[i, j, k] != 0.0:
            data = data - (coeff[i, j, k] / 6.0) * (c[i] @ c[j] @ c[k])
    return w.c_gen[0].like(data)


def kostant_relations_check(w: RepresentedWeil, tol: float = DEFAULT_TOL,
                            raise_on_failure: bool = True) -> CheckReport:
    """Invariance, [D, c(beta)] = -2 dU(beta^sharp), and centrality of D^2, scaled by ||D||^2."""
    D = represent_cubic_dirac(w)
    D2 = D @ D
    scale = tol * max(1.0, D.norm() ** 2)
    report = CheckReport()
    for i in range(w.group.dim):
        report.add(f"[D, dU(e{i + 1})]", opnorm(commutator(D, w.dU_total[i])), scale)
    for i in range(w.group.dim):
        r = anticommutator(D, w.c_gen[i]) + 2.0 * w.sharp_action(i)
        report.add(f"[D, c(e^{i + 1})] + 2 dU(sharp e^{i + 1})", opnorm(r), scale)
    for i in range(w.group.dim):
        report.add(f"[D^2, c(e^{i + 1})]", opnorm(commutator(D2, w.c_gen[i])), scale)
    for i in range(w.group.dim):
        report.add(f"[D^2, dU(e{i + 1})]", opnorm(commutator(D2, w.dU_total[i])), scale)
    report.add("D = D*", D.hermitian_defect(), scale)
    if w.multigrading is not None:
        report.add("[D, multigrading]", opnorm(anticommutator(D, w.multigrading)), scale)
    if raise_on_failure:
        report.raise_on_failure(RelationViolated)
    return report


def equivariance_check(w: RepresentedWeil, tol: float = 1e-10) -> CheckReport:
    """[dU(eps_a), c(eps^j)] = c(ad*(eps_a) eps^j) and the Clifford relations on H."""
    report = CheckReport()
    scale = max(1.0, w.group.kappa) * max(1.0, float(np.abs(w.rho).max()))
    eye = np.eye(w.H_dim)
    for a in range(w.group.dim):
        L = coadjoint_matrix(w.group, a)
        for j in range(w.group.dim):
            target = sum(L[i, j] * w.c_gen[i].data for i in range(w.group.dim))
            r = commutator(w.dU_total[a], w.c_gen[j]).data - target
            report.add(f"[dU(e{a + 1}), c(e^{j + 1})]", float(np.linalg.norm(r, 2)), tol * scale)
    for i, j in itertools.combinations_with_replacement(range(w.group.dim), 2):
        r = anticommutator(w.c_gen[i], w.c_gen[j]).data + 2.0 * w.rho[i, j] * eye
        report.add(f"{{c(e^{i + 1}), c(e^{j + 1})}}", float(np.linalg.norm(r, 2)), tol * scale)
    return report


# ---------------------------------------------------------------------------
# Block values
# ---------------------------------------------------------------------------

def _block_frame(module: GModule, label: IrrepLabel, spinor_dim: int) -> np.ndarray:
    cols = [c for c, lab in enumerate(module.labels or ()) if lab == label]
    F = np.eye(module.dim)[:, cols] if module.frame is None else module.frame[:, cols]
    return np.kron(F, np.eye(spinor_dim))


def casimir_block_values(w: RepresentedWeil, tol: float = DEFAULT_TOL) -> dict[IrrepLabel, tuple[float, float]]:
    """label -> (block residual ||c(Delta) P - Omega P||, Omega) over the total isotypic blocks."""
    C = represent_casimir(w)
    out = {}
    for lab in w.total.label_set():
        P = peter_weyl_project(w.total, lab)
        omega = casimir_eigenvalue(w.total.group, lab, w.rho)
        out[lab] = (opnorm(C @ P - omega * P), omega)
    return out


def kostant_block_values(w: RepresentedWeil) -> dict[IrrepLabel, dict[str, float]]:
    """Per module block: eigenvalues of D^2 compressed to P^M (x) 1 against the closed form."""
    D = represent_cubic_dirac(w)
    D2 = (D @ D).data
    out: dict[IrrepLabel, dict[str, float]] = {}
    for lab in w.module.label_set():
        V = _block_frame(w.module, lab, w.clifford.dim)
        block = V.conj().T @ D2 @ V
        eig = scipy.linalg.eigh(0.5 * (block + block.conj().T), eigvals_only=True)
        leak = float(np.linalg.norm(D2 @ V - V @ block, 2))
        out[lab] = {
            "min": float(eig.min()),
            "max": float(eig.max()),
            "closed_form": kostant_square_value(w.group, lab, w.rho),
            "leak": leak,
            "multiplicity": int(eig.size),
        }
    return out


def first_order_ratio(w: RepresentedWeil) -> dict[IrrepLabel, float]:
    """||P (c(D)^2 - c(Delta)) P|| / (1 + Omega)^{1/2} per total isotypic block."""
    D = represent_cubic_dirac(w)
    diff = (D @ D - represent_casimir(w)).data
    out = {}
    for lab in w.total.label_set():
        P = peter_weyl_project(w.total, lab).data
        omega = casimir_eigenvalue(w.total.group, lab, w.rho)
        out[lab] = float(np.linalg.norm(P @ diff @ P, 2)) / float(np.sqrt(1.0 + omega))
    return out


def kostant_block_spectra(w: RepresentedWeil, tol: float = 1e-8) -> dict[IrrepLabel, Spectrum]:
    """Clustered spectrum of c(D)^2 compressed to each module block P^M (x) 1."""
    D = represent_cubic_dirac(w)
    D2 = (D @ D).data
    out = {}
    for lab in w.module.label_set():
        V = _block_frame(w.module, lab, w.clifford.dim)
        out[lab] = herm_eig(V.conj().T @ D2 @ V, tol=tol, vectors=False)
    return out
