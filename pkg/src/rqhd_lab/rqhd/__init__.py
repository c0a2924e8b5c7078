"""Relativistic quantum hydrodynamics: residuals, reformulation, Picard solver, monitor."""

from .equivalence import EquivalenceResult, compare_kg_picard
from .identities import identity_report
from .monitor import WellposednessEstimates, energy_estimate_ratio, monitor_estimates
from .picard import IterationReport, auto_window, h1_sup_diff, picard_iterate, picard_solve, to_hydro
from .reform import (
    CauchyData,
    ReformHistory,
    ReformState,
    SourceTriple,
    assemble_sources,
    cauchy_from_hydro,
    reformulate,
    source_terms,
    unreformulate,
)
from .residuals import (
    conserved_charge,
    continuity_terms,
    momentum_terms,
    quantum_stress_divergence,
    relativistic_term,
    residual_continuity,
    residual_momentum,
    residual_norms,
)
from .wave import linear_wave_solve

__all__ = [
    "CauchyData", "EquivalenceResult", "IterationReport", "ReformHistory", "ReformState",
    "SourceTriple", "WellposednessEstimates", "assemble_sources", "auto_window", "cauchy_from_hydro",
    "compare_kg_picard", "conserved_charge", "continuity_terms", "energy_estimate_ratio", "h1_sup_diff", "identity_report", "linear_wave_solve",
    "momentum_terms", "monitor_estimates", "picard_iterate", "picard_solve",
    "quantum_stress_divergence", "reformulate", "relativistic_term", "residual_continuity",
    "residual_momentum", "residual_norms", "source_terms", "to_hydro", "unreformulate",
]
