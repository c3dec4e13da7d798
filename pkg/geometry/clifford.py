"""Complex Clifford algebras Cl_n and Cl(g*; rho) in explicit spinor matrices.

Generators satisfy c^i c^j + c^j c^i = -2 metric[i, j] and (c^i)* = -c^i.
Vertical metrics are always passed as the Gram matrix
R[i, j] = <eps^i, rho eps^j> on the dual basis of g.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np
import scipy.linalg

from geometry.errors import DimensionMismatch, NotPositiveDefinite
from geometry.numerics import GradedMatrix, graded_tensor

logger = logging.getLogger(__name__)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)

_SPD_TOL = 1e-12


# ---------------------------------------------------------------------------
# SPD helpers
# ---------------------------------------------------------------------------

def check_spd(rho: np.ndarray | Sequence[Sequence[float]] | float) -> np.ndarray:
    """Return rho as a float matrix, raising NotPositiveDefinite unless symmetric positive-definite."""
    R = np.atleast_2d(np.asarray(rho, dtype=float))
    if R.shape[0] != R.shape[1]:
        raise NotPositiveDefinite(f"metric must be square, got shape {R.shape}")
    scale = max(1.0, float(np.abs(R).max(initial=0.0)))
    if np.abs(R - R.T).max(initial=0.0) > _SPD_TOL * scale:
        raise NotPositiveDefinite("metric is not symmetric")
    low = float(scipy.linalg.eigh(R, eigvals_only=True)[0]) if R.size else 1.0
    if low <= 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue {low:.3e} is not positive")
    return 0.5 * (R + R.T)


def spd_power(rho: np.ndarray, power: float) -> np.ndarray:
    """rho**power through the symmetric eigendecomposition."""
    R = check_spd(rho)
    w, v = scipy.linalg.eigh(R)
    return (v * w**power) @ v.T


# ---------------------------------------------------------------------------
# CliffordModel
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CliffordModel:
    """n odd skew-adjoint generators on a spinor space, with their metric."""

    n: int
    generators: tuple[GradedMatrix, ...]
    metric: np.ndarray
    spare: GradedMatrix | None = None

    @property
    def parity_mask(self) -> np.ndarray:
        return self.generators[0].parity_mask

    @property
    def dim(self) -> int:
        return self.generators[0].dim

    def grading(self) -> GradedMatrix:
        g = self.generators[0]
        return g.like(g.grading())

    def apply(self, lam: Sequence[float] | np.ndarray) -> GradedMatrix:
        """c(lam) = sum_i lam_i c(eps^i)."""
        lam = np.asarray(lam)
        if lam.shape != (self.n,):
            raise DimensionMismatch(f"covector of length {lam.shape} for Cl_{self.n}")
        data = sum(l * g.data for l, g in zip(lam, self.generators))
        return self.generators[0].like(data)

    def monomial(self, subset: Sequence[int]) -> GradedMatrix:
        """Ordered product c^{i_1} ... c^{i_k}; the empty product is the identity."""
        mats = [self.generators[i].data for i in subset]
        data = reduce(np.matmul, mats, np.eye(self.dim, dtype=np.complex128))
        return self.generators[0].like(data)

    def chirality(self) -> GradedMatrix:
        """i^{k} e_1...e_{2k} over the full even generator set (spare included for odd n)."""
        gens = list(self.generators) + ([self.spare] if self.spare is not None else [])
        k = len(gens) // 2
        data = (1j) ** k * reduce(np.matmul, [g.data for g in gens])
        return self.generators[0].like(data)

    def relation_residual(self) -> float:
        """max_ij ||c^i c^j + c^j c^i + 2 metric_ij||."""
        eye = np.eye(self.dim)
        worst = 0.0
        for i, j in itertools.combinations_with_replacement(range(self.n), 2):
            a, b = self.generators[i].data, self.generators[j].data
            r = a @ b + b @ a + 2.0 * self.metric[i, j] * eye
            worst = max(worst, float(np.linalg.norm(r, 2)))
        return worst


def monomial_rank(model: CliffordModel) -> int:
    """Rank of the Gram matrix of all 2^n monomials under the trace pairing."""
    vecs = []
    for k in range(model.n + 1):
        for subset in itertools.combinations(range(model.n), k):
            vecs.append(model.monomial(subset).data.reshape(-1))
    V = np.array(vecs)
    gram = V.conj() @ V.T
    return int(np.linalg.matrix_rank(gram, tol=1e-10 * max(1.0, np.abs(gram).max())))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _even_generators(n: int) -> tuple[GradedMatrix, ...]:
    """Irreducible generators of Cl_n, n even, with grading = chirality."""
    cl2_mask = np.array([False, True])
    f1 = GradedMatrix(1j * SIGMA_X, cl2_mask)
    f2 = GradedMatrix(1j * SIGMA_Y, cl2_mask)
    if n == 2:
        return (f1, f2)
    lower = _even_generators(n - 2)
    one_lower = GradedMatrix.identity(lower[0].parity_mask)
    one_2 = GradedMatrix.identity(cl2_mask)
    return tuple(graded_tensor(e, one_2) for e in lower) + (
        graded_tensor(one_lower, f1),
        graded_tensor(one_lower, f2),
    )


def spinor_rep(n: int) -> CliffordModel:
    """Spinor model of Cl_n on C^(2^ceil(n/2)).

    Even n uses the recursive doubling Cl_{n+2} = Cl_n (x)^ Cl_2. Odd n keeps the
    first n generators of Cl_{n+1}; the last one is retained as ``spare`` and the
    generators carry multigrade 1.
    """
    if n < 1:
        raise DimensionMismatch(f"Clifford rank must be >= 1, got {n}")
    even_n = n + (n % 2)
    gens = _even_generators(even_n)
    if n == even_n:
        return CliffordModel(n, gens, np.eye(n))
    kept = tuple(GradedMatrix(g.data, g.parity_mask, 1) for g in gens[:n])
    spare = GradedMatrix(gens[n].data, gens[n].parity_mask, 1)
    return CliffordModel(n, kept, np.eye(n), spare)


def rescale_c0(rho: np.ndarray, base: CliffordModel) -> CliffordModel:
    """Generators for Cl(g*; rho): c_rho(eps^i) = sum_a (rho^{1/2})_{ai} e_a.

    base may already carry a metric as long as it commutes with rho; the new
    metric is rho^{1/2} metric rho^{1/2}.
    """
    R = check_spd(rho)
    if R.shape != (base.n, base.n):
        raise DimensionMismatch(f"metric of shape {R.shape} for Cl_{base.n}")
    if np.abs(R @ base.metric - base.metric @ R).max() > _SPD_TOL * max(1.0, np.abs(R).max()):
        raise NotPositiveDefinite("rescaling metric must commute with the base metric")
    S = spd_power(R, 0.5)
    gens = tuple(
        base.generators[0].like(sum(S[a, i] * base.generators[a].data for a in range(base.n)))
        for i in range(base.n)
    )
    return CliffordModel(base.n, gens, S @ base.metric @ S, base.spare)


def musical(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(sharp, flat): sharp maps g* -> g by R, flat maps g -> g* by R^{-1}."""
    R = check_spd(rho)
    return R.copy(), np.linalg.inv(R)


def vertical_clifford(rho: np.ndarray) -> CliffordModel:
    """spinor_rep(m) rescaled to the dual metric rho."""
    R = check_spd(rho)
    return rescale_c0(R, spinor_rep(R.shape[0]))
