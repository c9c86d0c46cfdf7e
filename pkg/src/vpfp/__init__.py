"""Phase-space simulation and decay-rate certification toolkit.

A numpy/scipy library for a kinetic Fokker-Planck system with self-consistent
electrostatic field on a truncated 1-D x 1-D phase space: equilibrium
computation, linearized/nonlinear time integration, Lyapunov and entropy
functionals, and numerically certified exponential decay rates.
"""

from .certificate import (
    CertificateReport,
    ConstantsReport,
    certify_rate,
    duhamel_constants,
    estimate_constants,
    estimate_semigroup_constants,
    full_certificate,
    hypo_admissible,
    smallness_thresholds,
    spectral_gap,
)
from .errors import ConfigError, InfeasibleCertificate, NumericalError
from .evolution import (
    EvolutionConfig,
    Trajectory,
    apply_K,
    cfl_limit,
    evolve,
    nonlinear_term,
    picard_short_time,
    project_mean_zero,
)
from .functionals import (
    FunctionalSet,
    LyapunovSpec,
    ckp_check,
    dissipation_rhs_norm,
    dissipation_rhs_sp,
    e_functional,
    norm_squared,
    relative_entropy_H,
    s_p_functional,
)
from .grid import (
    Field,
    PhaseGrid,
    XField,
    build_grid,
    field_from_csv,
    field_to_csv,
    fractional_x_norm,
    grad_x,
    grad_v,
    integrate,
    weighted_norm_sq,
)
from .poisson import PoissonField, field_from_h, solve_poisson
from .potential import ConfinementReport, PhysParams, Potential, make_potential, verify_A2, verify_confinement
from .probes import (
    TimeSeries,
    default_decay_datum,
    default_rough_datum,
    default_smooth_datum,
    fit_exponential_rate,
    fit_loglog_slope,
    run_decay_probe,
    run_hypo_probe,
)
from .steady_state import SteadyState, assemble_equilibrium, maxwellian, solve_pbe

__version__ = "0.1.0"

__all__ = [
    "PhaseGrid",
    "Field",
    "XField",
    "build_grid",
    "integrate",
    "grad_x",
    "grad_v",
    "weighted_norm_sq",
    "fractional_x_norm",
    "field_to_csv",
    "field_from_csv",
    "PhysParams",
    "Potential",
    "make_potential",
    "verify_A2",
    "verify_confinement",
    "ConfinementReport",
    "PoissonField",
    "solve_poisson",
    "field_from_h",
    "SteadyState",
    "maxwellian",
    "solve_pbe",
    "assemble_equilibrium",
    "EvolutionConfig",
    "Trajectory",
    "evolve",
    "cfl_limit",
    "apply_K",
    "nonlinear_term",
    "picard_short_time",
    "project_mean_zero",
    "LyapunovSpec",
    "FunctionalSet",
    "norm_squared",
    "s_p_functional",
    "e_functional",
    "dissipation_rhs_sp",
    "dissipation_rhs_norm",
    "relative_entropy_H",
    "ckp_check",
    "ConstantsReport",
    "CertificateReport",
    "estimate_constants",
    "certify_rate",
    "spectral_gap",
    "duhamel_constants",
    "estimate_semigroup_constants",
    "smallness_thresholds",
    "hypo_admissible",
    "full_certificate",
    "TimeSeries",
    "fit_exponential_rate",
    "fit_loglog_slope",
    "run_decay_probe",
    "run_hypo_probe",
    "default_decay_datum",
    "default_rough_datum",
    "default_smooth_datum",
    "ConfigError",
    "InfeasibleCertificate",
    "NumericalError",
    "__version__",
]
