"""Compound Poisson approximation error bounds for point counts in
stationary renewal and finite-state Markov renewal point processes, with
Monte Carlo and exact lattice verification."""

from .bounds import (
    BoundReport,
    EmbeddedMoments,
    embedded_moments_limit,
    mrpp_bound,
    renewal_bound,
)
from .compound_poisson import (
    CompoundPoissonSpec,
    SteinConstant,
    build_spec,
    h1_bound,
    pmf,
    pmf_vector,
    tv_distance,
)
from .distributions import (
    Erlang,
    Exponential,
    GridConfig,
    HyperExponential,
    InterarrivalDistribution,
    LatticeGeometric,
    LatticePmf,
    NumericDensity,
    ReferenceMeasure,
    Uniform,
    Weibull,
    moments,
    rn_derivative_f,
    sample_interarrival,
    tail_inf_f,
)
from .memoryless import (
    Decomposition,
    MemorylessProfile,
    build_profile,
    joint_sampler,
    optimize_gamma,
)
from .mrpp import (
    EmbeddedModel,
    MrppModel,
    Trajectory,
    build_embedding,
    count_in_window,
    default_mu,
    restrict,
    simulate,
    state_profiles,
    validate_model,
)
from .validation import (
    SimulationResult,
    bootstrap_tv,
    dominance_check,
    empirical_distribution,
    exact_lattice_distribution,
    memoryless_conditional_test,
    restriction_equivalence_test,
)

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "CompoundPoissonSpec",
    "Decomposition",
    "EmbeddedModel",
    "EmbeddedMoments",
    "Erlang",
    "Exponential",
    "GridConfig",
    "HyperExponential",
    "InterarrivalDistribution",
    "LatticeGeometric",
    "LatticePmf",
    "MemorylessProfile",
    "MrppModel",
    "NumericDensity",
    "ReferenceMeasure",
    "SimulationResult",
    "SteinConstant",
    "Trajectory",
    "Uniform",
    "Weibull",
    "bootstrap_tv",
    "build_embedding",
    "build_profile",
    "build_spec",
    "count_in_window",
    "default_mu",
    "dominance_check",
    "embedded_moments_limit",
    "empirical_distribution",
    "exact_lattice_distribution",
    "h1_bound",
    "joint_sampler",
    "memoryless_conditional_test",
    "moments",
    "mrpp_bound",
    "optimize_gamma",
    "pmf",
    "pmf_vector",
    "renewal_bound",
    "restrict",
    "restriction_equivalence_test",
    "rn_derivative_f",
    "sample_interarrival",
    "simulate",
    "state_profiles",
    "tail_inf_f",
    "tv_distance",
    "validate_model",
]
