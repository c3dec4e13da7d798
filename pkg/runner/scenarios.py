"""Scenario builders and their check suites.

Each builder turns a validated scenario model into a CheckReport plus
labelled spectra. Core errors raised while building are wrapped in
ScenarioBuild; failing residuals stay in the report.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from framework.input_validator import parse_matrix
from geometry.crossprod import (
    build_crossed_triple,
    cocycle_growth,
    cocycle_norm,
    crossed_identities,
    equivariance_check as gauge_equivariance,
    irrational_torus,
    perturbed_triple,
    torus_dirac,
    validate_action,
)
from geometry.deform import (
    character,
    deform_triple,
    deformed_rep,
    invariance_residual,
    random_fourier_element,
    star_involution,
    star_product,
    undeformed_action,
)
from geometry.errors import BundleLabError, DimensionMismatch, ScenarioBuild, WeightMetadataMissing
from geometry.group import casimir_eigenvalue, casimir_spectrum, regular_module, rho_plus_norm, su2
from geometry.numerics import CheckReport, GradedMatrix, Spectrum, herm_eig, opnorm
from geometry.triple import (
    TripleInstance,
    canonical_remainder,
    canonical_remainder_terms,
    curvature_checks,
    factorization_check,
    graded_index,
    is_geodesic,
    kernel_split,
    mean_curvature,
    restricted_norm,
    spectral_gap,
    su2_group_triple,
    supercentre_residuals,
    umbilic_residual,
    vertical_dirac_check,
    warped_circle_triple,
    weak_anticommutation_constant,
    weak_anticommutation_margin,
)
from geometry.weil import (
    casimir_block_values,
    equivariance_check as clifford_equivariance,
    kostant_block_spectra,
    kostant_block_values,
    kostant_relations_check,
    represent_weil,
)
from runner.models import (
    CustomScenario,
    DeformT2Scenario,
    SU2GroupScenario,
    TorusCrossedScenario,
    WarpedU1Scenario,
)

logger = logging.getLogger(__name__)


@dataclass
class ScenarioOutcome:
    report: CheckReport
    spectra: list[tuple[str, Spectrum]] = field(default_factory=list)
    sizes: dict[str, int] = field(default_factory=dict)
    invariants: dict[str, Any] = field(default_factory=dict)


def block_label(label: object) -> str:
    if isinstance(label, tuple):
        return "k=" + ",".join(str(x) for x in label)
    if isinstance(label, Fraction):
        return f"j={label}"
    return str(label)


def block_spectra(D: GradedMatrix, labels: Sequence[object], tol: float) -> list[tuple[str, Spectrum]]:
    """Spectra of the diagonal blocks of D cut out by equal basis labels."""
    out = []
    index: dict[object, list[int]] = {}
    for i, lab in enumerate(labels):
        index.setdefault(lab, []).append(i)
    for lab in sorted(index):
        idx = index[lab]
        out.append((block_label(lab), herm_eig(D.data[np.ix_(idx, idx)], tol=tol, vectors=False)))
    return out


def rotation_theta(theta: float) -> np.ndarray:
    """Theta with u v = exp(-2 pi i theta) v u on the unit characters."""
    Th = np.zeros((2, 2))
    Th[1, 0] = -theta
    return Th


# ---------------------------------------------------------------------------
# torus_crossed
# ---------------------------------------------------------------------------

def build_torus_crossed(spec: TorusCrossedScenario, seed: int, tol: float) -> ScenarioOutcome:
    it = irrational_torus(spec.theta, spec.K, spec.base_radius, spec.margin)
    cfg = it.cfg
    report = CheckReport()
    report.extend(validate_action(cfg), "action: ")

    # the full triple is built on a narrower base window
    radius = spec.triple_base_radius
    small = irrational_torus(spec.theta, spec.K, radius, min(2, radius))
    t = build_crossed_triple(small.cfg, name=spec.name)
    zero = GradedMatrix.zeros(t.parity_mask)
    D_scale = max(1.0, t.D.norm())
    report.extend(crossed_identities(small.cfg, t), "crossed: ")
    report.extend(factorization_check(t, zero, tol=tol, raise_on_failure=False), "factorisation: ")
    report.add("canonical remainder Z = 0", opnorm(canonical_remainder(t)), tol * D_scale)

    block_scale = tol * max(1.0, cfg.base.D0.norm())
    for s in spec.tau_shifts:
        report.add(f"tau shift s={s:g}", it.tau_shift_residual(s), block_scale)
    for k in spec.gauge_shifts:
        report.add(f"integer shift k={k} is gauge", it.gauge_shift_residual(k), block_scale)

    for i in range(spec.equivariance_samples):
        data = it.random_gauge_data(np.random.default_rng([seed, i]))
        report.add(f"gauge equivariance sample {i}", gauge_equivariance(cfg, *data, tol=tol), tol)
    norms = []
    for i in range(spec.growth_samples):
        omega, _, _, _ = it.random_gauge_data(np.random.default_rng([seed, 1000 + i]))
        C, excess = cocycle_growth(omega)
        report.add(f"cocycle growth sample {i}", max(excess, 0.0), 0.0)
        norms.append(cocycle_norm(omega))

    # F supercommutes with c(g*) and commutes with dU, so {D_v, F} = 0 here
    omega, M, _, _ = small.random_gauge_data(np.random.default_rng([seed, 2000]), scale=0.2)
    gauged = perturbed_triple(small.cfg, omega, M, name=f"{spec.name}_gauged")
    Z_gauged = canonical_remainder(gauged)
    report.extend(factorization_check(gauged, Z_gauged, tol=tol, raise_on_failure=False), "gauged factorisation: ")
    constants: dict[str, float] = {}
    for eps in spec.weak_eps:
        C = weak_anticommutation_constant(gauged, Z_gauged, eps)
        margin = weak_anticommutation_margin(gauged, Z_gauged, eps, C)
        report.add(f"gauged weak anticommutation eps={eps:g}", max(-margin, 0.0), tol * max(1.0, gauged.D.norm()))
        constants[f"{eps:g}"] = C

    return ScenarioOutcome(
        report,
        block_spectra(t.D, t.module.labels, tol),
        sizes={"K": spec.K, "base_radius": spec.base_radius, "triple_base_radius": radius,
               "dim": t.H_dim, "block_dim": cfg.block_dim},
        invariants={"theta": spec.theta, "max_cocycle_norm": max(norms, default=0.0),
                    "gauged_weak_anticommutation_constant": constants},
    )


# ---------------------------------------------------------------------------
# warped_u1
# ---------------------------------------------------------------------------

def build_warped_u1(spec: WarpedU1Scenario, seed: int, tol: float) -> ScenarioOutcome:
    t = warped_circle_triple(spec.K, spec.L, tuple(spec.ell), spec.interior_radius, spec.spectator_radius)
    Z = canonical_remainder(t)
    terms = canonical_remainder_terms(t)
    kappa = mean_curvature(t)
    scale = tol * max(1.0, t.D.norm())
    report = CheckReport()
    report.extend(vertical_dirac_check(t, tol), "vertical: ")
    report.add("Z = Z* on interior", restricted_norm(Z - Z.adjoint(), t.interior), scale)
    report.add("Z = 0 on interior", restricted_norm(Z, t.interior), scale)
    report.add("metric term = kappa / 2", restricted_norm(terms["metric"] - kappa * 0.5, t.interior), scale)
    report.extend(curvature_checks(t, Z, tol), "curvature: ")
    report.add("umbilic", umbilic_residual(t, Z), scale)
    report.extend(supercentre_residuals(t, tol), "supercentre: ")
    report.extend(factorization_check(t, Z, tol=tol, raise_on_failure=False), "factorisation: ")

    constants: dict[str, float] = {}
    for eps in spec.weak_eps:
        C = weak_anticommutation_constant(t, Z, eps)
        margin = weak_anticommutation_margin(t, Z, eps, C)
        report.add(f"weak anticommutation eps={eps:g}", max(-margin, 0.0), scale)
        constants[f"{eps:g}"] = C

    # rank 2 carries the fibre and spectator weights, rank 1 the fibre alone
    rank = t.weights.shape[1]
    Th = rotation_theta(spec.deform_theta) if rank == 2 else np.array([[spec.deform_theta]])
    report.add("D preserves the torus weights", invariance_residual(t), scale)
    deformed = deform_triple(t, Th, tol=tol)
    report.add("kappa unchanged by deformation", opnorm(mean_curvature(deformed) - kappa), scale)
    report.add("Z unchanged by deformation", opnorm(canonical_remainder(deformed) - Z), scale)

    return ScenarioOutcome(
        report,
        block_spectra(t.D, t.module.labels, tol),
        sizes={"K": spec.K, "L": spec.L, "interior_radius": spec.interior_radius,
               "spectator_radius": spec.spectator_radius, "dim": t.H_dim},
        invariants={
            "mean_curvature_norm": restricted_norm(kappa, t.interior),
            "weak_anticommutation_constant": constants,
            "geodesic": is_geodesic(t, Z),
            "deform_theta": spec.deform_theta,
        },
    )


# ---------------------------------------------------------------------------
# su2_group
# ---------------------------------------------------------------------------

def build_su2_group(spec: SU2GroupScenario, seed: int, tol: float) -> ScenarioOutcome:
    rho = np.eye(3) if spec.rho is None else parse_matrix(spec.rho, "rho").real
    group = su2(spec.J)
    module = regular_module(group)
    w = represent_weil(module, rho)
    report = CheckReport()
    report.extend(kostant_relations_check(w, tol, raise_on_failure=False), "kostant: ")
    report.extend(clifford_equivariance(w, tol), "clifford: ")
    for lab, (residual, omega) in casimir_block_values(w, tol).items():
        report.add(f"casimir block j={lab}", residual, tol * max(1.0, omega))
    for lab, v in kostant_block_values(w).items():
        cf = v["closed_form"]
        report.add(f"kostant square j={lab}", max(abs(v["min"] - cf), abs(v["max"] - cf)), 1e-8 * max(1.0, cf))
        report.add(f"kostant block j={lab} invariant", v["leak"], tol * max(1.0, cf))
    casimir_values: dict[str, float] = {}
    for lab, (value, rank) in casimir_spectrum(module, rho, tol).items():
        omega = casimir_eigenvalue(group, lab, rho)
        report.add(f"casimir trace j={lab}", abs(value - omega), tol * max(1.0, omega))
        report.add(f"isotypic rank j={lab}", float(abs(rank - (2 * lab + 1) ** 2)), 0.0)
        casimir_values[block_label(lab)] = value

    t = su2_group_triple(spec.J, rho)
    rho_plus = rho_plus_norm(group, rho)
    gap = spectral_gap(t)
    report.add("spectral gap >= |rho_+|", max(rho_plus - gap, 0.0), 1e-9)
    even, odd = kernel_split(t)
    report.add("kernel of D is empty", float(even + odd), 0.0)

    return ScenarioOutcome(
        report,
        [(block_label(lab), spec_) for lab, spec_ in kostant_block_spectra(w).items()],
        sizes={"two_J": int(2 * spec.J), "dim": w.H_dim},
        invariants={"kappa": group.kappa, "rho_plus_norm": rho_plus, "spectral_gap": gap,
                    "graded_index": even - odd, "casimir_spectrum": casimir_values},
    )


# ---------------------------------------------------------------------------
# deform_t2
# ---------------------------------------------------------------------------

def _coeff_scale(f) -> float:
    return max(1.0, max((float(np.abs(c).max()) for c in f.coeffs.values()), default=1.0))


def build_deform_t2(spec: DeformT2Scenario, seed: int, tol: float) -> ScenarioOutcome:
    report = CheckReport()

    assoc = invol = 0.0
    for i in range(spec.samples):
        rng = np.random.default_rng([seed, i])
        A = rng.normal(size=(2, 2))
        f, g, h = (random_fourier_element(rng, block=2) for _ in range(3))
        left = star_product(star_product(f, g, A), h, A)
        assoc = max(assoc, left.distance(star_product(f, star_product(g, h, A), A)) / _coeff_scale(left))
        lhs = star_involution(star_product(f, g, A), A)
        rhs = star_product(star_involution(g, A), star_involution(f, A), A)
        invol = max(invol, lhs.distance(rhs) / _coeff_scale(lhs))
    report.add("star product associative", assoc, 1e-11)
    report.add("star involution anti-multiplicative", invol, 1e-11)

    Th = rotation_theta(spec.theta)
    phase = 0.0
    for x in ((1, 0), (0, 1), (2, -1)):
        for y in ((1, 0), (0, 1), (-1, 3)):
            prod = star_product(character(x), character(y), Th)
            (z,) = prod.support()
            expected = np.exp(-2j * math.pi * float(np.asarray(x) @ Th @ np.asarray(y)))
            phase = max(phase, abs(prod.coeffs[z][0, 0] - expected))
    report.add("character phase law", phase, 1e-14)

    torus = torus_dirac(complex(spec.s, 1.0), spec.K, spec.base_radius, doubled=True)
    deformed = deform_triple(torus, Th, tol=tol)
    zero = np.zeros((2, 2))
    reduction = max(
        float(np.abs(deformed_rep(torus, zero, character(x)) - undeformed_action(torus, x)).max())
        for x in ((1, 0), (0, 1), (1, 1))
    )
    report.add("Theta = 0 reduction", reduction, 1e-15)

    inner = np.all(np.abs(torus.weights) <= min(spec.K, spec.base_radius) - 2, axis=1)
    hom = 0.0
    for i in range(min(spec.samples, 5)):
        rng = np.random.default_rng([seed, 500 + i])
        f = random_fourier_element(rng, radius=1, terms=3)
        g = random_fourier_element(rng, radius=1, terms=3)
        lhs = deformed_rep(torus, Th, star_product(f, g, Th))
        rhs = deformed_rep(torus, Th, f) @ deformed_rep(torus, Th, g)
        hom = max(hom, restricted_norm(lhs - rhs, inner))
        adj = deformed_rep(torus, Th, star_involution(f, Th)) - deformed_rep(torus, Th, f).conj().T
        hom = max(hom, restricted_norm(adj, inner))
    report.add("deformed representation is a *-homomorphism", hom, 1e-10)

    U, V = deformed.generators["u"].data, deformed.generators["v"].data
    report.add("u v = e(-theta) v u", restricted_norm(U @ V - np.exp(-2j * math.pi * spec.theta) * V @ U, inner), 1e-12)
    before = herm_eig(torus.D, tol=tol, vectors=False).raw
    after = herm_eig(deformed.D, tol=tol, vectors=False).raw
    report.add("isospectral", float(np.abs(before - after).max(initial=0.0)), 0.0)

    it = irrational_torus(spec.theta, spec.K, spec.base_radius, min(2, spec.base_radius))
    crossed = perturbed_triple(it.cfg, it.s_cocycle(spec.s), np.zeros((it.cfg.base.dim,) * 2))
    W = np.kron(np.eye(len(it.cfg.modes())), it.block_W())
    scale = tol * max(1.0, torus.D.norm())
    report.add("crossed product D = deformed D",
               float(np.linalg.norm(W @ crossed.D.data @ W.conj().T - deformed.D.data, 2)), scale)
    for crossed_name, name in (("u1", "u"), ("v", "v")):
        g = W @ crossed.generators[crossed_name].data @ W.conj().T
        report.add(f"crossed product {crossed_name} = deformed {name}",
                   float(np.linalg.norm(g - deformed.generators[name].data, 2)), tol)

    k_labels = [(int(k),) for k in torus.weights[:, 0]]
    return ScenarioOutcome(
        report,
        block_spectra(deformed.D, k_labels, tol),
        sizes={"K": spec.K, "base_radius": spec.base_radius, "dim": torus.H_dim},
        invariants={"theta": spec.theta, "s": spec.s, "commutator_norms": deformed.commutator_norms()},
    )


# ---------------------------------------------------------------------------
# custom
# ---------------------------------------------------------------------------

def _custom_weights(raw: list[list[int]] | None, dim: int) -> np.ndarray | None:
    """Rectangular integer weights with one row per basis vector."""
    if raw is None:
        return None
    ranks = {len(row) for row in raw}
    if len(ranks) > 1:
        raise DimensionMismatch(f"weights rows have differing lengths {sorted(ranks)}")
    if len(raw) != dim or not ranks or ranks == {0}:
        raise DimensionMismatch(f"weights need {dim} non-empty rows, got {len(raw)}")
    return np.asarray(raw, dtype=int)


def build_custom(spec: CustomScenario, seed: int, tol: float) -> ScenarioOutcome:
    D = parse_matrix(spec.D, "D")
    mask = np.asarray(spec.parity, dtype=int).astype(bool)
    if mask.shape[0] != D.shape[0]:
        raise DimensionMismatch(f"parity of length {mask.shape[0]} for a {D.shape[0]}x{D.shape[0]} D")
    generators = {name: GradedMatrix(parse_matrix(raw, f"generators.{name}"), mask)
                  for name, raw in spec.generators.items()}
    weights = _custom_weights(spec.weights, D.shape[0])
    unknown = sorted(set(spec.fourier) - set(generators))
    if unknown:
        raise WeightMetadataMissing(f"Fourier weights given for unknown generators {unknown}")
    fourier = {name: character(x) for name, x in spec.fourier.items()}
    t = TripleInstance(spec.name, GradedMatrix(D, mask), generators, weights=weights, fourier_generators=fourier)

    scale = tol * max(1.0, t.D.norm())
    report = CheckReport()
    report.add("D = D*", t.D.hermitian_defect(), scale)
    norms = t.commutator_norms()
    even, odd = kernel_split(t, tol)
    invariants: dict[str, Any] = {"commutator_norms": norms, "kernel_split": [even, odd],
                                  "graded_index": graded_index(t, tol)}
    if spec.theta is not None:
        report.add("D preserves the torus weights", invariance_residual(t), scale)
        deformed = deform_triple(t, np.asarray(spec.theta, dtype=float), tol=tol)
        for name, n in deformed.commutator_norms().items():
            report.add(f"||[D, {name}]|| unchanged by deformation", abs(n - norms[name]), scale * max(1.0, norms[name]))
        invariants["deformed_commutator_norms"] = deformed.commutator_norms()
    # D is Hermitian only up to the construction tolerance; the check above reports the defect
    spectrum = herm_eig(0.5 * (t.D.data + t.D.data.conj().T), tol=tol, vectors=False)
    return ScenarioOutcome(report, [("D", spectrum)],
                           sizes={"dim": t.H_dim}, invariants=invariants)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

ScenarioBuilder = Callable[[Any, int, float], ScenarioOutcome]

SCENARIO_BUILDERS: dict[str, ScenarioBuilder] = {
    "torus_crossed": build_torus_crossed,
    "warped_u1": build_warped_u1,
    "su2_group": build_su2_group,
    "deform_t2": build_deform_t2,
    "custom": build_custom,
}


def run_scenario(spec, seed: int, tol: float) -> ScenarioOutcome:
    """Build and check one scenario; core errors become ScenarioBuild."""
    builder = SCENARIO_BUILDERS[spec.kind]
    logger.debug("running scenario %s (%s) at tol %.1e", spec.name, spec.kind, tol)
    try:
        return builder(spec, seed, tol)
    except (BundleLabError, np.linalg.LinAlgError) as exc:
        if isinstance(exc, ScenarioBuild):
            raise
        raise ScenarioBuild(spec.name, exc) from exc
