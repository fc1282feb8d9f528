"""Mesoscale two-phase membrane energies and their sharp-interface limits.

The package provides:

* a closed-form scalar kernel (two-well potential, phase threshold,
  optimal transition profile) in :mod:`mesomem.kernel`;
* the diffuse phase-separation energy on uniform grids with gradient,
  thresholded reduction, face-counting perimeter and total-variation
  diagnostics in :mod:`mesomem.grid`;
* convex fixed-phase minimization, alternating minimization and eps
  sweeps in :mod:`mesomem.minimize`;
* discrete closed planar curves, the mass ray map and membrane
  configurations in :mod:`mesomem.curves`;
* the single-curve membrane energies and family sums in
  :mod:`mesomem.energies`;
* the constructive recovery sequences converging to an elastica plus
  line-tension limit in :mod:`mesomem.recovery`;
* a CLI (``mesomem``) emitting CSV/JSON reports with SVG figures.
"""

from .errors import (
    CurveError,
    GridMismatchError,
    ImmersionError,
    MesomemError,
    NumericalError,
    ParameterError,
    RayOverrunError,
    RecoveryError,
    TransversalityError,
)
from .kernel import (
    DerivedConstants,
    ModelParams,
    antiderivative_H,
    derive_constants,
    equipartition_residual,
    line_tension_limit,
    optimal_profile,
    threshold_phase,
    transition_energy,
    well_potential,
)
from .grid import (
    Grid,
    GridField,
    PhaseMap,
    discrete_perimeter,
    grid_energy,
    grid_energy_gradient,
    limit_energy,
    load_field,
    load_phase,
    reduced_energy,
    save_field,
    save_phase,
    threshold_map,
    tv_of_H,
)
from .minimize import (
    Disk,
    HalfSpace,
    MinimizeOptions,
    SweepRecord,
    SweepReport,
    epsilon_sweep,
    minimize_alternating,
    minimize_fixed_phase,
    profile_field,
)
from .curves import (
    Configuration,
    EmbeddingResult,
    PeriodicCurve,
    embedding_check,
    load_configuration,
    load_curve,
    ray_map,
    ray_mass,
    ray_offset,
    resample_arclength,
    save_configuration,
    save_curve,
)
from .energies import (
    FamilyReport,
    MassPair,
    bending_energy,
    family_energy,
    phase_masses,
    primitive_energy,
    reduced_distance,
    reduced_full_energy,
    rescaled_energy,
    separation_energy,
)
from .recovery import (
    PerturbationFields,
    PhaseCurve,
    RecoveryRecord,
    RecoveryReport,
    build_bumps,
    build_recovery,
    jacobian_at_zero,
    limit_energy_curve,
    limsup_report,
    mass_deficit,
    offjump_well_tail,
    solve_mass_constraint,
)

__version__ = "0.1.0"
