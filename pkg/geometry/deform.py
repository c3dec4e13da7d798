"""Theta-deformation of torus-equivariant triples.

Elements of the deformed algebra are finitely supported functions on Z^n
with matrix coefficients. With Theta a real n x n matrix the product is

    (f * g)(z) = sum_{x + y = z} f(x) g(y) exp(-2 pi i <x, Theta y>)

and f*(x) = exp(-2 pi i <x, Theta x>) f(-x)^*. On a triple whose Hilbert
space carries T^n weights, delta_x acts as

    L(delta_x) psi = exp(-2 pi i <x, Theta w>) pi(x) psi        (psi of weight w)

where pi(x) is the undeformed product of Fourier generators. D is left
untouched, so spectral data are the same for every Theta.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from geometry.errors import DimensionMismatch, NotInvariant, ShapeMismatch, WeightMetadataMissing
from geometry.numerics import GradedMatrix

logger = logging.getLogger(__name__)

Weight = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class FourierElement:
    """Finitely supported Z^n -> M_b(C)."""

    coeffs: Mapping[Weight, np.ndarray]
    rank: int
    block: int = 1

    def __post_init__(self) -> None:
        clean: dict[Weight, np.ndarray] = {}
        for x, c in self.coeffs.items():
            key = tuple(int(v) for v in x)
            if len(key) != self.rank:
                raise ShapeMismatch(f"weight {key} in an element of rank {self.rank}")
            arr = np.atleast_2d(np.asarray(c, dtype=np.complex128))
            if arr.shape != (self.block, self.block):
                raise ShapeMismatch(f"coefficient of shape {arr.shape} for block size {self.block}")
            clean[key] = arr
        object.__setattr__(self, "coeffs", clean)

    def support(self) -> list[Weight]:
        return sorted(self.coeffs)

    def radius(self) -> int:
        return max((max(abs(v) for v in x) for x in self.coeffs), default=0)

    def __add__(self, other: "FourierElement") -> "FourierElement":
        _check_shapes(self, other)
        out = dict(self.coeffs)
        for x, c in other.coeffs.items():
            out[x] = out[x] + c if x in out else c
        return FourierElement(out, self.rank, self.block)

    def __mul__(self, scalar: complex) -> "FourierElement":
        return FourierElement({x: scalar * c for x, c in self.coeffs.items()}, self.rank, self.block)

    __rmul__ = __mul__

    def adjoint(self) -> "FourierElement":
        """Undeformed involution f*(x) = f(-x)^*."""
        return FourierElement(
            {tuple(-v for v in x): c.conj().T for x, c in self.coeffs.items()}, self.rank, self.block
        )

    def to_matrix(self, radius: int) -> np.ndarray:
        """Convolution by f on l^2({-radius..radius}^n) (x) C^b, out-of-window targets dropped."""
        modes = list(itertools.product(range(-radius, radius + 1), repeat=self.rank))
        index = {z: i for i, z in enumerate(modes)}
        b = self.block
        out = np.zeros((len(modes) * b,) * 2, dtype=np.complex128)
        for x, c in self.coeffs.items():
            for z, col in index.items():
                row = index.get(tuple(p + q for p, q in zip(x, z)))
                if row is not None:
                    out[row * b:(row + 1) * b, col * b:(col + 1) * b] += c
        return out

    def distance(self, other: "FourierElement") -> float:
        """max_x ||f(x) - g(x)|| over the joint support."""
        _check_shapes(self, other)
        zero = np.zeros((self.block, self.block))
        keys = set(self.coeffs) | set(other.coeffs)
        return max(
            (float(np.linalg.norm(self.coeffs.get(x, zero) - other.coeffs.get(x, zero), 2)) for x in keys),
            default=0.0,
        )


def character(x: Sequence[int], block: int = 1) -> FourierElement:
    """delta_x (x) 1_b."""
    key = tuple(int(v) for v in x)
    return FourierElement({key: np.eye(block)}, len(key), block)


def random_fourier_element(rng: np.random.Generator, rank: int = 2, block: int = 1,
                           radius: int = 2, terms: int = 4) -> FourierElement:
    """Gaussian coefficients on up to ``terms`` weights drawn from {-radius..radius}^rank."""
    coeffs: dict[Weight, np.ndarray] = {}
    for _ in range(terms):
        x = tuple(int(v) for v in rng.integers(-radius, radius + 1, size=rank))
        coeffs[x] = rng.normal(size=(block, block)) + 1j * rng.normal(size=(block, block))
    return FourierElement(coeffs, rank, block)


def _check_shapes(f: FourierElement, g: FourierElement) -> None:
    if f.rank != g.rank or f.block != g.block:
        raise ShapeMismatch(f"elements of rank/block {f.rank}/{f.block} and {g.rank}/{g.block}")


def _theta(Theta: np.ndarray, rank: int) -> np.ndarray:
    Th = np.asarray(Theta, dtype=float)
    if Th.shape != (rank, rank):
        raise ShapeMismatch(f"Theta of shape {Th.shape} for rank {rank}")
    return Th


def _phase(x: Sequence[int], Theta: np.ndarray, y: Sequence[int]) -> complex:
    return complex(np.exp(-2j * math.pi * float(np.asarray(x) @ Theta @ np.asarray(y))))


def star_product(f: FourierElement, g: FourierElement, Theta: np.ndarray) -> FourierElement:
    _check_shapes(f, g)
    Th = _theta(Theta, f.rank)
    out: dict[Weight, np.ndarray] = {}
    for (x, a), (y, b) in itertools.product(f.coeffs.items(), g.coeffs.items()):
        z = tuple(p + q for p, q in zip(x, y))
        term = _phase(x, Th, y) * (a @ b)
        out[z] = out[z] + term if z in out else term
    return FourierElement(out, f.rank, f.block)


def star_involution(f: FourierElement, Theta: np.ndarray) -> FourierElement:
    Th = _theta(Theta, f.rank)
    out = {}
    for x, a in f.coeffs.items():
        neg = tuple(-v for v in x)
        out[neg] = _phase(neg, Th, neg) * a.conj().T
    return FourierElement(out, f.rank, f.block)


# ---------------------------------------------------------------------------
# Deformed representation
# ---------------------------------------------------------------------------

def _require_weights(t) -> np.ndarray:
    if t.weights is None or not t.fourier_generators:
        raise WeightMetadataMissing(f"triple '{t.name}' carries no T^n weights")
    w = np.asarray(t.weights, dtype=int)
    if w.ndim != 2 or w.shape[0] != t.H_dim:
        raise DimensionMismatch(f"weights of shape {w.shape} for dimension {t.H_dim}")
    return w


def _unit_generators(t, rank: int) -> list[np.ndarray]:
    """Generator matrices indexed by the unit weight they carry."""
    units: list[np.ndarray | None] = [None] * rank
    for name, f in t.fourier_generators.items():
        (x,) = f.support()
        if sum(abs(v) for v in x) != 1 or sum(x) != 1:
            continue
        units[x.index(1)] = t.generators[name].data
    missing = [i for i, u in enumerate(units) if u is None]
    if missing:
        raise WeightMetadataMissing(f"no Fourier generator of unit weight for directions {missing}")
    return units  # type: ignore[return-value]


def undeformed_action(t, x: Sequence[int]) -> np.ndarray:
    """pi(x) = prod_i g_i^{x_i}, negative powers through the adjoint."""
    w = _require_weights(t)
    units = _unit_generators(t, w.shape[1])
    out = np.eye(t.H_dim, dtype=np.complex128)
    for g, e in zip(units, x):
        step = g if e >= 0 else g.conj().T
        out = out @ np.linalg.matrix_power(step, abs(int(e)))
    return out


def weight_shift(t, Theta: np.ndarray, x: Sequence[int]) -> np.ndarray:
    """diag(exp(-2 pi i <x, Theta w>)) over the basis weights w."""
    w = _require_weights(t)
    Th = _theta(Theta, w.shape[1])
    return np.diag(np.exp(-2j * math.pi * (w @ (Th.T @ np.asarray(x, dtype=float)))))


def deformed_rep(t, Theta: np.ndarray, f: FourierElement) -> np.ndarray:
    """L(f) = sum_x pi(x) exp(-2 pi i <x, Theta w>) (x) f(x) on H (x) C^b."""
    w = _require_weights(t)
    if f.rank != w.shape[1]:
        raise ShapeMismatch(f"element of rank {f.rank} on a T^{w.shape[1]} triple")
    out = np.zeros((t.H_dim * f.block,) * 2, dtype=np.complex128)
    for x, c in f.coeffs.items():
        L = undeformed_action(t, x) @ weight_shift(t, Theta, x)
        out += c[0, 0] * L if f.block == 1 else np.kron(L, c)
    return out


def _off_weight_norm(w: np.ndarray, data: np.ndarray) -> float:
    same = np.all(w[:, None, :] == w[None, :, :], axis=2)
    return float(np.linalg.norm(np.where(same, 0.0, data)))


def invariance_residual(t) -> float:
    """||D - sum_w P_w D P_w||: the part of D moving weights."""
    return _off_weight_norm(_require_weights(t), t.D.data)


def deform_triple(t, Theta: np.ndarray, elements: Mapping[str, FourierElement] | None = None,
                  tol: float = 1e-10):
    """The Theta-deformed triple: same D, Fourier generators replaced by their deformed images.

    Generators outside fourier_generators must preserve the weights; they
    commute with the torus action and are carried over unchanged.
    """
    w = _require_weights(t)
    Th = _theta(Theta, w.shape[1])
    bound = tol * max(1.0, t.D.norm())
    r = invariance_residual(t)
    if r > bound:
        raise NotInvariant("D commutes with the T^n action", r, bound)
    mask = t.parity_mask
    generators = dict(t.generators)
    for name, g in t.generators.items():
        if name in t.fourier_generators:
            continue
        r = _off_weight_norm(w, g.data)
        if r > tol * max(1.0, g.norm()):
            raise NotInvariant(f"generator '{name}' commutes with the T^n action", r, tol * max(1.0, g.norm()))
    for name, f in t.fourier_generators.items():
        generators[name] = GradedMatrix(deformed_rep(t, Th, f), mask)
    for name, f in (elements or {}).items():
        if f.block != 1:
            raise ShapeMismatch(f"element '{name}' has block size {f.block}; deformed generators act on H")
        generators[name] = GradedMatrix(deformed_rep(t, Th, f), mask)
    logger.debug("deformed triple %s with ||Theta|| = %.3g", t.name, float(np.abs(Th).max()))
    return dataclasses.replace(t, name=f"{t.name}_deformed", generators=generators)


__all__ = [
    "FourierElement", "character", "deform_triple", "deformed_rep", "invariance_residual",
    "random_fourier_element", "star_involution", "star_product", "undeformed_action", "weight_shift",
]
