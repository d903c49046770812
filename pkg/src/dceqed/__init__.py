"""Photon generation in a modulated cavity coupled to two two-level atoms.

Analytic resonance catalog with closed-form regime solutions, an exact
Schrodinger-equation integrator on the truncated Fock space to validate
them, observables/health diagnostics, and a CSV-producing run harness.
"""

__version__ = "0.1.0"

from .model import (
    AmplitudeTable,
    BasisIndex,
    ModelParams,
    OperatorSet,
    StateVector,
    build_basis,
    build_operators,
    init_state,
)
from .evolve import (
    EvolverOptions,
    EvolverError,
    NormDriftError,
    Trajectory,
    TruncationOverflowError,
    evolve,
    hamiltonian_at,
    rotating_generator_at,
    to_interaction_amplitudes,
    to_interaction_frame,
    to_lab_frame,
)
from .observables import (
    ObservableRecord,
    excitation_probabilities,
    health_diagnostics,
    mean_photon,
    quadrature_variances,
    record_from_state,
)
from .regimes import (
    CatalogResult,
    RegimeDescriptor,
    RegimeId,
    SpectralQuantities,
    dispersive_effective_hamiltonian,
    dispersive_observables,
    dispersive_state,
    double_excitation_probability,
    double_weak_effective_hamiltonian,
    equal_coupling_flow,
    mixed_regime_observables,
    reconstruct_state_from_flow,
    resonance_catalog,
    second_atom_dispersive_amplitudes,
    spectral_quantities,
    squeezed_vacuum_fock,
    two_photon_amplitudes,
)
from .config import RunSpec, SweepSpec, parse_config, serialize_config
from .harness import list_resonances, run, sweep

__all__ = [
    "AmplitudeTable", "BasisIndex", "ModelParams", "OperatorSet", "StateVector",
    "build_basis", "build_operators", "init_state",
    "EvolverOptions", "EvolverError", "NormDriftError", "Trajectory",
    "TruncationOverflowError", "evolve", "hamiltonian_at",
    "rotating_generator_at", "to_interaction_amplitudes",
    "to_interaction_frame", "to_lab_frame",
    "ObservableRecord", "excitation_probabilities", "health_diagnostics",
    "mean_photon", "quadrature_variances", "record_from_state",
    "CatalogResult", "RegimeDescriptor", "RegimeId", "SpectralQuantities",
    "dispersive_effective_hamiltonian", "dispersive_observables",
    "dispersive_state", "double_excitation_probability",
    "double_weak_effective_hamiltonian", "equal_coupling_flow",
    "mixed_regime_observables", "reconstruct_state_from_flow",
    "resonance_catalog", "second_atom_dispersive_amplitudes",
    "spectral_quantities", "squeezed_vacuum_fock", "two_photon_amplitudes",
    "RunSpec", "SweepSpec", "parse_config", "serialize_config",
    "list_resonances", "run", "sweep",
]
