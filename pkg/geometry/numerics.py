"""Graded dense complex linear algebra.

All operators in the package are GradedMatrix values: a dense complex
matrix together with the Z2-grading of the basis it acts on (True = odd
basis vector) and the Cl_n multigrading degree it respects. Values are
immutable; every operation returns a new matrix.

Tensor bases are ordered lexicographically with the left factor major and
the parity of a tensor basis vector is the xor of the factor parities.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from geometry.errors import DimensionMismatch, NotHermitian, ResidualError

logger = logging.getLogger(__name__)

DEFAULT_TOL: float = 1e-9


# ---------------------------------------------------------------------------
# GradedMatrix
# ---------------------------------------------------------------------------

def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GradedMatrix:
    """Dense square operator on a Z2-graded truncated Hilbert space."""

    data: np.ndarray
    parity_mask: np.ndarray
    multigrade: int = 0

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionMismatch(f"operator must be square, got shape {data.shape}")
        mask = np.asarray(self.parity_mask, dtype=bool).reshape(-1)
        if mask.shape[0] != data.shape[0]:
            raise DimensionMismatch(
                f"parity mask has length {mask.shape[0]} for dimension {data.shape[0]}"
            )
        if self.multigrade < 0:
            raise DimensionMismatch(f"multigrade must be >= 0, got {self.multigrade}")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "parity_mask", _frozen(mask))

    # -- constructors -------------------------------------------------------

    @classmethod
    def identity(cls, parity_mask: Sequence[bool] | np.ndarray, multigrade: int = 0) -> "GradedMatrix":
        mask = np.asarray(parity_mask, dtype=bool)
        return cls(np.eye(mask.shape[0]), mask, multigrade)

    @classmethod
    def zeros(cls, parity_mask: Sequence[bool] | np.ndarray, multigrade: int = 0) -> "GradedMatrix":
        mask = np.asarray(parity_mask, dtype=bool)
        return cls(np.zeros((mask.shape[0], mask.shape[0])), mask, multigrade)

    def like(self, data: np.ndarray) -> "GradedMatrix":
        """A new operator on the same graded space."""
        return GradedMatrix(data, self.parity_mask, self.multigrade)

    # -- structure ----------------------------------------------------------

    @property
    def dim(self) -> int:
        return int(self.data.shape[0])

    def grading(self) -> np.ndarray:
        """The grading operator diag(+1 even, -1 odd)."""
        return np.diag(np.where(self.parity_mask, -1.0, 1.0)).astype(np.complex128)

    def _same_parity(self) -> np.ndarray:
        return self.parity_mask[:, None] == self.parity_mask[None, :]

    def even_part(self) -> "GradedMatrix":
        return self.like(np.where(self._same_parity(), self.data, 0.0))

    def odd_part(self) -> "GradedMatrix":
        return self.like(np.where(self._same_parity(), 0.0, self.data))

    def parity(self, tol: float = 1e-12) -> int | None:
        """0 for homogeneous-even, 1 for homogeneous-odd, None otherwise."""
        scale = tol * max(1.0, self.norm())
        odd = np.linalg.norm(np.where(self._same_parity(), 0.0, self.data))
        even = np.linalg.norm(np.where(self._same_parity(), self.data, 0.0))
        if odd <= scale:
            return 0
        if even <= scale:
            return 1
        return None

    def norm(self) -> float:
        if self.dim == 0:
            return 0.0
        return float(np.linalg.norm(self.data, 2))

    def hermitian_defect(self) -> float:
        return float(np.linalg.norm(self.data - self.data.conj().T, 2)) if self.dim else 0.0

    def compress(self, index: np.ndarray | Sequence[int]) -> "GradedMatrix":
        """Restriction to the span of the given basis vectors."""
        idx = np.asarray(index)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return GradedMatrix(self.data[np.ix_(idx, idx)], self.parity_mask[idx], self.multigrade)

    # -- algebra ------------------------------------------------------------

    def _check_compatible(self, other: "GradedMatrix") -> None:
        if self.dim != other.dim or not np.array_equal(self.parity_mask, other.parity_mask):
            raise DimensionMismatch(
                f"operators act on different graded spaces (dims {self.dim} and {other.dim})"
            )

    def adjoint(self) -> "GradedMatrix":
        return self.like(self.data.conj().T)

    @property
    def H(self) -> "GradedMatrix":
        return self.adjoint()

    def __matmul__(self, other: "GradedMatrix") -> "GradedMatrix":
        self._check_compatible(other)
        return self.like(self.data @ other.data)

    def __add__(self, other: "GradedMatrix") -> "GradedMatrix":
        self._check_compatible(other)
        return self.like(self.data + other.data)

    def __sub__(self, other: "GradedMatrix") -> "GradedMatrix":
        self._check_compatible(other)
        return self.like(self.data - other.data)

    def __neg__(self) -> "GradedMatrix":
        return self.like(-self.data)

    def __mul__(self, scalar: complex) -> "GradedMatrix":
        return self.like(self.data * scalar)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"GradedMatrix(dim={self.dim}, odd={int(self.parity_mask.sum())}, multigrade={self.multigrade})"


def direct_sum(blocks: Iterable[GradedMatrix]) -> GradedMatrix:
    """Block-diagonal sum; masks concatenate in order."""
    blocks = list(blocks)
    if not blocks:
        return GradedMatrix(np.zeros((0, 0)), np.zeros(0, dtype=bool))
    data = scipy.linalg.block_diag(*[b.data for b in blocks])
    mask = np.concatenate([b.parity_mask for b in blocks])
    return GradedMatrix(data, mask, max(b.multigrade for b in blocks))


def shift_matrix(size: int, step: int = 1) -> np.ndarray:
    """Truncated translation e_k -> e_{k+step} on a window of the given size."""
    return np.eye(size, k=-step)


def toeplitz_matrix(coeffs: Mapping[int, complex], radius: int) -> np.ndarray:
    """Compression of multiplication by sum_p coeffs[p] e_p to modes |k| <= radius."""
    size = 2 * radius + 1
    out = np.zeros((size, size), dtype=np.complex128)
    for p, val in coeffs.items():
        out += val * np.eye(size, k=-p)
    return out


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    vectors: np.ndarray | None = None
    raw: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def dim(self) -> int:
        return int(self.multiplicities.sum())

    def rows(self) -> list[tuple[float, int]]:
        return [(float(v), int(m)) for v, m in zip(self.eigenvalues, self.multiplicities)]


def cluster(values: np.ndarray, gap: float) -> tuple[np.ndarray, np.ndarray]:
    """Group sorted reals whose neighbours are within gap; return means and counts."""
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        return values, np.zeros(0, dtype=int)
    breaks = np.flatnonzero(np.diff(values) > gap) + 1
    groups = np.split(values, breaks)
    return np.array([g.mean() for g in groups]), np.array([g.size for g in groups], dtype=int)


def herm_eig(A: GradedMatrix | np.ndarray, tol: float = DEFAULT_TOL, vectors: bool = True) -> Spectrum:
    """Hermitian eigendecomposition with eigenvalues clustered at tol*max(1, ||A||)."""
    data = A.data if isinstance(A, GradedMatrix) else np.asarray(A, dtype=np.complex128)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise DimensionMismatch(f"operator must be square, got shape {data.shape}")
    if data.shape[0] == 0:
        return Spectrum(np.zeros(0), np.zeros(0, dtype=int), np.zeros((0, 0)), np.zeros(0))
    scale = max(1.0, float(np.linalg.norm(data, 2)))
    defect = float(np.linalg.norm(data - data.conj().T, 2))
    if defect > tol * scale:
        raise NotHermitian("||A - A*||", defect, tol * scale)
    herm = 0.5 * (data + data.conj().T)
    if vectors:
        w, v = scipy.linalg.eigh(herm)
    else:
        w, v = scipy.linalg.eigh(herm, eigvals_only=True), None
    values, mults = cluster(w, tol * scale)
    return Spectrum(values, mults, v, np.asarray(w))


def kernel_projection(A: GradedMatrix, tol: float) -> np.ndarray:
    """Orthonormal basis (columns) of the eigenspace |lambda| <= tol."""
    spec = herm_eig(A, tol=max(tol, DEFAULT_TOL))
    return spec.vectors[:, np.abs(spec.raw) <= tol]


# ---------------------------------------------------------------------------
# Graded tensor products and supercommutators
# ---------------------------------------------------------------------------

def graded_tensor(A: GradedMatrix, B: GradedMatrix) -> GradedMatrix:
    """A (x)^ B with the Koszul sign (a (x) b)(x (x) y) = (-1)^{|b||x|} ax (x) by."""
    b_even, b_odd = B.even_part().data, B.odd_part().data
    data = np.kron(A.data, b_even) + np.kron(A.data @ A.grading(), b_odd)
    mask = np.logical_xor.outer(A.parity_mask, B.parity_mask).reshape(-1)
    return GradedMatrix(data, mask, A.multigrade + B.multigrade)


def supercommutator(A: GradedMatrix, B: GradedMatrix) -> GradedMatrix:
    """[A, B] = AB - (-1)^{|A||B|} BA, extended bilinearly over homogeneous parts."""
    A._check_compatible(B)
    # only the odd-odd pair picks up a sign, so the result is AB - BA + 2 B1 A1
    a1, b1 = A.odd_part().data, B.odd_part().data
    return A.like(A.data @ B.data - B.data @ A.data + 2.0 * (b1 @ a1))


def commutator(A: GradedMatrix, B: GradedMatrix) -> GradedMatrix:
    A._check_compatible(B)
    return A.like(A.data @ B.data - B.data @ A.data)


def anticommutator(A: GradedMatrix, B: GradedMatrix) -> GradedMatrix:
    A._check_compatible(B)
    return A.like(A.data @ B.data + B.data @ A.data)


def opnorm(a: GradedMatrix | np.ndarray) -> float:
    data = a.data if isinstance(a, GradedMatrix) else np.asarray(a)
    if data.size == 0:
        return 0.0
    return float(np.linalg.norm(data, 2))


# ---------------------------------------------------------------------------
# Residual bookkeeping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckOutcome:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual)) and self.residual <= self.tolerance


@dataclass
class CheckReport:
    """Ordered collection of named residual checks."""

    outcomes: list[CheckOutcome] = field(default_factory=list)

    def add(self, name: str, residual: float, tolerance: float) -> CheckOutcome:
        outcome = CheckOutcome(name, float(residual), float(tolerance))
        self.outcomes.append(outcome)
        if not outcome.passed:
            logger.debug("check %s failed: %.3e > %.1e", name, residual, tolerance)
        return outcome

    def extend(self, other: "CheckReport", prefix: str = "") -> None:
        for o in other.outcomes:
            self.outcomes.append(CheckOutcome(prefix + o.name, o.residual, o.tolerance))

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.outcomes)

    @property
    def max_residual(self) -> float:
        return max((o.residual for o in self.outcomes), default=0.0)

    def failures(self) -> list[CheckOutcome]:
        return [o for o in self.outcomes if not o.passed]

    def raise_on_failure(self, error: type[ResidualError]) -> "CheckReport":
        for o in self.outcomes:
            if not o.passed:
                raise error(o.name, o.residual, o.tolerance)
        return self

    def __getitem__(self, name: str) -> CheckOutcome:
        for o in self.outcomes:
            if o.name == name:
                return o
        raise KeyError(name)
