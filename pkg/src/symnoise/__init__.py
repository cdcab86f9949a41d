"""Symmetry-resolved noise analysis for small quantum systems.

Monte Carlo propagation under synthesized classical noise alongside a
second-order cumulant (filter-function) prediction, both expressed in a
generator basis adapted to a conserved quantity.
"""

from .basis import (AmbiguousClusteringWarning, Label, QBasis, SectorSpectrum, block_populations, build_qbasis,
                    centralizer_dims, classify_operator, qbasis_from_json, qbasis_to_json, sector_decompose)
from .fff import (ControlMatrix, CumulantSuperoperator, assemble_cumulant, coherence_params, control_matrix,
                  distance_and_bounds, filter_functions, predict_average_state, steady_state, structure_check)
from .noise import NoiseModel, NyquistError, PsdSpec, autocorrelation, correlation_length, sample_trajectory
from .propagation import Schedule, SymmetryViolation, ensemble_average, ideal_propagate
from .scenarios import (ConfigError, ScenarioConfig, TfimConfig, build_dephasing, build_j_squared, build_tfim,
                        run_scenario)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousClusteringWarning", "Label", "QBasis", "SectorSpectrum", "block_populations", "build_qbasis",
    "centralizer_dims", "classify_operator", "qbasis_from_json", "qbasis_to_json", "sector_decompose",
    "ControlMatrix", "CumulantSuperoperator", "assemble_cumulant", "coherence_params", "control_matrix",
    "distance_and_bounds", "filter_functions", "predict_average_state", "steady_state", "structure_check",
    "NoiseModel", "NyquistError", "PsdSpec", "autocorrelation", "correlation_length", "sample_trajectory",
    "Schedule", "SymmetryViolation", "ensemble_average", "ideal_propagate",
    "ConfigError", "ScenarioConfig", "TfimConfig", "build_dephasing", "build_j_squared", "build_tfim",
    "run_scenario",
]
