"""Penalization toolkit for semiclassical Schrodinger equations concentrating on spheres."""
__version__ = "0.1.0"

from .potentials import (
    G0_1, G0_2, G0_3, Ginf_1, Ginf_2, Ginf_3,
    GrowthClass,
    GrowthCondition,
    RadialPotential,
    kelvin_transform_field,
    kelvin_transform_potentials,
    mirror_growth_class,
    validate_growth,
)
from .nonlinearity import (
    Nonlinearity,
    PenalizationParams,
    PenalizedNonlinearity,
    hardy_weight,
    quadratic_form_positivity,
    validate_f,
)
from .limit import GroundState, LimitProblem, SolverError, ground_energy, solve_limit
from .auxiliary import AnnulusLambda, AuxPotential, find_min, validate_lambda
from .penalized import (
    DiscreteSolution,
    PenalizedProblem,
    RadialGrid,
    SolverOptions,
    certify_original,
    residual,
    solve,
)
from .barriers import DecayEnvelope, PeakBarrier, envelope_eval, solve_outer_barrier
from .asymptotics import (
    ConcentrationReport,
    SweepConfig,
    concentration_check,
    energy_scaling_check,
    run_sweep,
)
