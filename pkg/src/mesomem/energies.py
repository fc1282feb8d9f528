"""Single-curve mesoscale membrane energies and family sums.

All integrals use the periodic trapezoid rule on the curve's uniform
arclength nodes (mean of nodal values times length), which is spectrally
accurate for smooth periodic integrands.  Field derivatives use the curve's
4th-order periodic stencil.

Index convention: m1 is always the phase-0 total mass (integral of
(1-chi)*M) and m2 the phase-1 total mass.  Phase purity per ray holds
structurally because chi is a node attribute, so the per-phase mass fields
(1-chi)*M and chi*M never overlap.

With that purity the primitive energy (length plus weighted per-phase ray
transport plus the mass-gradient term) equals the reduced assembled energy
2*lam*m1 + 2*m2 + eps^2*(separation + bending) pointwise; the suite checks
the two-sided identity while the one-sided bound is also asserted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import Configuration, mesh_polygons, perp
from .errors import TransversalityError
from .kernel import ModelParams, derive_constants

__all__ = [
    "MassPair",
    "phase_masses",
    "reduced_distance_density",
    "reduced_distance",
    "separation_energy",
    "bending_energy",
    "reduced_full_energy",
    "primitive_energy",
    "rescaled_energy",
    "FamilyReport",
    "family_energy",
]


@dataclass(frozen=True)
class MassPair:
    """Total lipid mass per phase: m1 for phase 0, m2 for phase 1."""

    m1: float
    m2: float

    @property
    def total(self) -> float:
        return self.m1 + self.m2

    def as_array(self) -> np.ndarray:
        return np.array([self.m1, self.m2])


def _quad(curve, values) -> float:
    """Periodic trapezoid rule = mean * length on uniform nodes."""
    return float(np.sum(values)) * curve.ds


def phase_masses(Z: Configuration) -> MassPair:
    """Per-phase total masses (integral of (1-chi)*M and chi*M)."""
    chi = Z.chi.astype(float)
    return MassPair(
        m1=_quad(Z.curve, (1.0 - chi) * Z.mass),
        m2=_quad(Z.curve, chi * Z.mass),
    )


def reduced_distance_density(align, turn_sq, mass, eps):
    """Pointwise ray-transport density M^2/A + eps^2 |theta'|^2 M^4 / (4 A^5)."""
    align = np.asarray(align, dtype=float)
    mass = np.asarray(mass, dtype=float)
    return mass**2 / align + eps**2 * np.asarray(turn_sq) * mass**4 / (4.0 * align**5)


def reduced_distance(curve, theta, mass, eps) -> float:
    """Ray-transport cost of a mass field along the curve.

    Requires transversality nu.theta > 0 at every node; theta' comes from
    the curve's difference stencil.
    """
    theta = np.asarray(theta, dtype=float)
    align = np.sum(curve.normal * theta, axis=1)
    if np.any(align <= 0):
        node = int(np.argmin(align))
        raise TransversalityError(node, float(align[node]))
    tp = curve.deriv(theta)
    turn_sq = np.sum(tp * tp, axis=1)
    return _quad(curve, reduced_distance_density(align, turn_sq, mass, eps))


def separation_energy(Z: Configuration, params: ModelParams) -> float:
    """Phase-separation part: well term plus (sigma/2)|M'|^2 along the curve."""
    d = derive_constants(params)
    a = np.where(Z.chi == 1, d.a1, d.a0)
    mp = Z.curve.deriv(Z.mass)
    density = (1.0 - a * Z.mass) ** 2 / params.eps**2 + 0.5 * params.sigma * mp**2
    return _quad(Z.curve, density)


def bending_energy(Z: Configuration, params: ModelParams) -> float:
    """Bending part: misalignment term plus the ray-rotation term."""
    d = derive_constants(params)
    a = np.where(Z.chi == 1, d.a1, d.a0)
    A = Z.align
    tp_sq = np.sum(Z.theta_prime**2, axis=1)
    density = ((1.0 - A) / A) * (a * Z.mass) ** 2 / params.eps**2 \
        + a**2 * tp_sq * Z.mass**4 / (4.0 * A**5)
    return _quad(Z.curve, density)


def reduced_full_energy(Z: Configuration, params: ModelParams) -> float:
    """Assembled energy 2*lam*m1 + 2*m2 + eps^2*(separation + bending)."""
    d = derive_constants(params)
    masses = phase_masses(Z)
    return (2.0 * d.lam * masses.m1 + 2.0 * masses.m2
            + params.eps**2 * (separation_energy(Z, params) + bending_energy(Z, params)))


def primitive_energy(Z: Configuration, params: ModelParams) -> float:
    """Length + lam^2 * transport(phase-0 mass) + transport(phase-1 mass)
    + (sigma/2) * eps^2 * integral of |M'|^2."""
    d = derive_constants(params)
    chi = Z.chi.astype(float)
    m1_field = (1.0 - chi) * Z.mass
    m2_field = chi * Z.mass
    mp = Z.curve.deriv(Z.mass)
    grad_term = 0.5 * params.sigma * params.eps**2 * _quad(Z.curve, mp**2)
    return (Z.curve.length
            + d.lam**2 * reduced_distance(Z.curve, Z.theta, m1_field, params.eps)
            + reduced_distance(Z.curve, Z.theta, m2_field, params.eps)
            + grad_term)


def rescaled_energy(Z: Configuration, params: ModelParams) -> float:
    """Separation plus bending energy (the eps^-2-rescaled excess)."""
    return separation_energy(Z, params) + bending_energy(Z, params)


@dataclass
class OverlapResult:
    ok: bool
    checked: bool = True
    witness: tuple | None = None   # (config index a, config index b, point)
    reason: str | None = None


@dataclass
class FamilyReport:
    total: float
    separation_total: float
    bending_total: float
    masses: MassPair
    mass_residual: tuple[float, float] | None
    overlap: OverlapResult


def family_energy(Zs, params: ModelParams, targets: MassPair | None = None,
                  overlap_resolution: int = 24) -> FamilyReport:
    """Sum of assembled energies over a family plus constraint checks.

    Reports the separation/bending split, total per-phase masses with
    residuals against the targets (when given), and a sampled pairwise
    disjointness check of the ray-map images.  Violations are reported,
    never raised.
    """
    Zs = list(Zs)
    if not Zs:
        raise ValueError("family must contain at least one configuration")
    total = sum(reduced_full_energy(Z, params) for Z in Zs)
    sep = sum(separation_energy(Z, params) for Z in Zs)
    bend = sum(bending_energy(Z, params) for Z in Zs)
    m = np.zeros(2)
    for Z in Zs:
        m += phase_masses(Z).as_array()
    masses = MassPair(m1=float(m[0]), m2=float(m[1]))
    residual = None
    if targets is not None:
        residual = (masses.m1 - targets.m1, masses.m2 - targets.m2)

    overlap = _family_overlap(Zs, params.eps, overlap_resolution)
    return FamilyReport(total=total, separation_total=sep, bending_total=bend,
                        masses=masses, mass_residual=residual, overlap=overlap)


def _family_overlap(Zs, eps, resolution) -> OverlapResult:
    from shapely.strtree import STRtree

    meshes = []
    for i, Z in enumerate(Zs):
        built, overrun = mesh_polygons(Z, eps, resolution)
        if built is None:
            return OverlapResult(ok=False, reason="ray-overrun",
                                 witness=(i, i, None))
        meshes.append(built[0])
    if len(meshes) < 2:
        return OverlapResult(ok=True)
    for i in range(len(meshes)):
        tree = STRtree(meshes[i])
        for j in range(i + 1, len(meshes)):
            for poly in meshes[j]:
                for k in tree.query(poly):
                    cand = meshes[i][int(k)]
                    inter = poly.intersection(cand)
                    if inter.area > 1e-12 * min(poly.area, cand.area):
                        pt = inter.representative_point()
                        return OverlapResult(ok=False, reason="overlap",
                                             witness=(i, j, (pt.x, pt.y)))
    return OverlapResult(ok=True)
