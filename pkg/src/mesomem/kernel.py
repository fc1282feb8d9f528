"""Closed-form scalar kernel of the two-phase membrane model.

Everything here is a pointwise formula: the model parameters (c, sigma, eps)
with their derived constants, the eps-dependent two-well potential, the phase
threshold that equalizes the wells, the antiderivative transform H used for
total-variation lower bounds, and the optimal one-dimensional transition
profile together with its equipartition identity.

Conventions
-----------
* Phase 0 carries the well bottom 1/lambda, phase 1 the well bottom 1.
* The threshold is strict: mass exactly at the threshold maps to phase 0.
* c = 0 is admitted; the model then degenerates to a single well at 1 and
  the transition profile is identically 1.
* The closed forms for the threshold, H and the profile assume sigma = 1;
  sigma is kept as a parameter for the curve energies.

All functions accept scalars or numpy arrays and are stateless, hence safe
for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

SQRT2 = math.sqrt(2.0)
SQRT8 = math.sqrt(8.0)

__all__ = [
    "ModelParams",
    "DerivedConstants",
    "derive_constants",
    "well_potential",
    "threshold_phase",
    "antiderivative_H",
    "optimal_profile",
    "equipartition_residual",
    "transition_energy",
    "line_tension_limit",
]


@dataclass(frozen=True)
class ModelParams:
    """Model constants.

    c      : line-tension strength, >= 0.
    eps    : length-scale parameter, > 0; requires c*sqrt(eps) < 1.
    sigma  : weight of the mass-gradient term in curve energies, > 0
             (default 1; the scalar closed forms below are for sigma = 1).
    """

    c: float
    eps: float
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.c >= 0.0):
            raise ParameterError(f"c must be >= 0, got {self.c}")
        if not (self.eps > 0.0):
            raise ParameterError(f"eps must be > 0, got {self.eps}")
        if not (self.sigma > 0.0):
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")
        if self.c * math.sqrt(self.eps) >= 1.0:
            raise ParameterError(
                f"c*sqrt(eps) = {self.c * math.sqrt(self.eps):.6g} must be < 1"
            )

    @property
    def croot(self) -> float:
        """The combination c*sqrt(eps) that controls the well asymmetry."""
        return self.c * math.sqrt(self.eps)


@dataclass(frozen=True)
class DerivedConstants:
    """Constants derived from ModelParams.

    lam    : weight of the phase-0 distance term, 1/(1 - c*sqrt(eps)).
    a0, a1 : well coefficients for phase 0 (= lam) and phase 1 (= 1); the
             well of phase k vanishes at mass 1/a_k.
    a_star : strict phase threshold 2/(lam+1); the two well values agree
             there, (1 - a0*a_star)^2 = (1 - a1*a_star)^2.
    """

    lam: float
    a0: float
    a1: float
    a_star: float


def derive_constants(params: ModelParams) -> DerivedConstants:
    """Evaluate lambda and the threshold from the model parameters.

    a_star is computed as 2/(lam+1); the algebraically equivalent form
    1 - c*sqrt(eps)/(2 - c*sqrt(eps)) is used only as a cross-check in the
    test-suite because it is more prone to cancellation.
    """
    k = params.croot
    lam = 1.0 / (1.0 - k)
    a_star = 2.0 / (lam + 1.0)
    return DerivedConstants(lam=lam, a0=lam, a1=1.0, a_star=a_star)


def _maybe_scalar(arr, *inputs):
    if all(np.isscalar(x) or np.ndim(x) == 0 for x in inputs):
        return float(arr)
    return arr


def well_potential(mass, chi, params: ModelParams):
    """Two-well energy density (1 - a(chi)*M)^2 / eps^2.

    Vanishes exactly at M = 1/a(chi), i.e. at 1 for phase 1 and at
    1/lambda for phase 0.
    """
    d = derive_constants(params)
    a = np.where(np.asarray(chi) == 1, d.a1, d.a0)
    m = np.asarray(mass, dtype=float)
    out = (1.0 - a * m) ** 2 / params.eps**2
    return _maybe_scalar(out, mass, chi)


def threshold_phase(mass, derived: DerivedConstants):
    """Optimal phase for a given mass: 1 iff M > a_star (strict).

    Mass exactly equal to a_star is assigned phase 0.
    """
    m = np.asarray(mass, dtype=float)
    out = (m > derived.a_star).astype(np.int8)
    if np.isscalar(mass) or np.ndim(mass) == 0:
        return int(out)
    return out


def transition_energy(params: ModelParams) -> float:
    """Energy of one full 1D transition between the wells: c^2/(sqrt(2)(2-c*sqrt(eps))).

    Equals H(1) - H(1/lambda) and converges to the line-tension constant
    c^2/sqrt(8) as eps -> 0.
    """
    return params.c**2 / (SQRT2 * (2.0 - params.croot))


def line_tension_limit(c: float) -> float:
    """Limit line-tension coefficient c^2/sqrt(8)."""
    return c**2 / SQRT8


def antiderivative_H(t, params: ModelParams):
    """Antiderivative of sqrt(2)/eps * |1 - a(phase(t)) t|, normalized to H(1/lambda) = 0.

    Piecewise closed form, continuous and nondecreasing on the real line:

        t <  1/lam          : -(1 - lam t)^2 / (sqrt(2) lam eps)
        1/lam <= t <= a_star: +(1 - lam t)^2 / (sqrt(2) lam eps)
        a_star <  t <= 1    : T - (1 - t)^2 / (sqrt(2) eps)
        t >  1              : T + (t - 1)^2 / (sqrt(2) eps)

    with T = transition_energy(params).  In particular H(1) = T.
    """
    d = derive_constants(params)
    eps = params.eps
    lam = d.lam
    inv_lam = 1.0 - params.croot
    T = transition_energy(params)
    tt = np.asarray(t, dtype=float)

    lower = (1.0 - lam * tt) ** 2 / (SQRT2 * lam * eps)
    upper = (1.0 - tt) ** 2 / (SQRT2 * eps)
    out = np.select(
        [tt < inv_lam, tt <= d.a_star, tt <= 1.0],
        [-lower, lower, T - upper],
        default=T + upper,
    )
    return _maybe_scalar(out, t)


# Beyond this many multiples of eps the profile is numerically at its far
# field (relative deviation < 1e-26, far below every tolerance in use).
_FAR_FIELD_FACTOR = 60.0


def optimal_profile(r, params: ModelParams):
    """Optimal transition profile q and its derivative q' at signed distance r.

    q is strictly increasing and C^1 with q(0) = a_star and far fields
    q(-inf) = 1/lambda, q(+inf) = 1.  It satisfies the equipartition
    identity q'(r) = sqrt(2)/eps * |1 - a(phase(q(r))) q(r)| everywhere.
    For |r| > 60*eps the exact exponentials are clamped to the far-field
    constants (resp. slope 0) to avoid useless underflow.

    Returns (q, q_slope), scalars or arrays matching r.
    """
    eps = params.eps
    k = params.croot
    base = 1.0 - k  # 1/lambda in cancellation-free form
    denom = 2.0 - k
    amp_left = base * k / denom
    amp_right = k / denom
    rate_left = SQRT2 / (eps * base)
    rate_right = SQRT2 / eps
    peak_slope = params.c * SQRT2 / (math.sqrt(eps) * denom)

    rr = np.asarray(r, dtype=float)
    left = rr <= 0.0
    # clip keeps exp() well-defined; the far-field mask overrides the values
    e_left = np.exp(np.clip(rate_left * rr, -745.0, 0.0))
    e_right = np.exp(np.clip(-rate_right * rr, -745.0, 0.0))

    q = np.where(left, base + amp_left * e_left, 1.0 - amp_right * e_right)
    slope = peak_slope * np.where(left, e_left, e_right)

    far_left = rr < -_FAR_FIELD_FACTOR * eps
    far_right = rr > _FAR_FIELD_FACTOR * eps
    q = np.where(far_left, base, np.where(far_right, 1.0, q))
    slope = np.where(far_left | far_right, 0.0, slope)

    if np.isscalar(r) or np.ndim(r) == 0:
        return float(q), float(slope)
    return q, slope


def equipartition_residual(r, params: ModelParams):
    """|sqrt(2)/eps * |1 - a(phase(q)) q| - q'| along the profile.

    Analytically zero; evaluated numerically it measures floating-point
    consistency of the profile branches with the well and the threshold.
    """
    d = derive_constants(params)
    q, slope = optimal_profile(r, params)
    a = np.where(np.asarray(threshold_phase(q, d)) == 1, d.a1, d.a0)
    lhs = SQRT2 / params.eps * np.abs(1.0 - a * np.asarray(q))
    out = np.abs(lhs - slope)
    return _maybe_scalar(out, r)
