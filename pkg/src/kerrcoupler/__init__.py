"""Steering and entanglement analysis for the driven Kerr nonlinear coupler.

The package models two coherently pumped, evanescently coupled Kerr
cavities in a doubled phase-space representation, computes classical
steady states, validates them against stochastic ensemble simulations,
builds linearized fluctuation spectra with input-output normalization,
and evaluates Reid-type steering products and the combined-quadrature
inseparability criterion over frequency and quadrature angle.
"""

from .criteria import (ASYMMETRIC_1_STEERS_2, ASYMMETRIC_2_STEERS_1,
                       NO_STEERING, SYMMETRIC, SteeringReport,
                       SteeringValues, default_omega_grid,
                       default_theta_grid, epr_products, evaluate_grid,
                       inferred_variance, minimize_report)
from .errors import (ConfigError, CouplerError, DivergenceDetected,
                     EmptyGrid, NonConvergence, NonHermitianResidual,
                     NumericalError, SingularJacobian, SingularSystem,
                     TrajectoryDivergence, UnphysicalCovariance,
                     UnstablePoint, WindowTooShort)
from .model import (CouplerParams, DiffusionMatrix, DriftMatrix,
                    PhaseSpacePoint, deterministic_drift, diffusion_matrix,
                    drift_matrix, jacobian, noise_amplitudes)
from .pipeline import AnalysisResult, analyze
from .positive_p import (EnsembleConfig, MomentSeries, SteadyMoments,
                         compare_to_steady, simulate_ensemble,
                         steady_moment_estimate)
from .spectra import (LinearizedModel, OutputCovariance, SpectralMatrix,
                      linearize, output_covariance, quadrature_projection,
                      spectral_integral, spectral_matrix, static_covariance)
from .steady_state import (SteadyStateResult, newton_refine,
                           relax_to_steady_state, stability_spectrum)

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult", "ASYMMETRIC_1_STEERS_2", "ASYMMETRIC_2_STEERS_1",
    "ConfigError", "CouplerError", "CouplerParams", "DiffusionMatrix",
    "DivergenceDetected", "DriftMatrix", "EmptyGrid", "EnsembleConfig",
    "LinearizedModel", "MomentSeries", "NO_STEERING", "NonConvergence",
    "NonHermitianResidual", "NumericalError", "OutputCovariance",
    "PhaseSpacePoint", "SingularJacobian", "SingularSystem",
    "SpectralMatrix", "SteadyMoments", "SteadyStateResult",
    "SteeringReport", "SteeringValues", "SYMMETRIC",
    "TrajectoryDivergence", "UnphysicalCovariance", "UnstablePoint",
    "WindowTooShort", "analyze", "compare_to_steady",
    "default_omega_grid", "default_theta_grid", "deterministic_drift",
    "diffusion_matrix", "drift_matrix", "epr_products", "evaluate_grid",
    "inferred_variance", "jacobian", "linearize", "minimize_report",
    "newton_refine", "noise_amplitudes", "output_covariance",
    "quadrature_projection", "relax_to_steady_state", "simulate_ensemble",
    "spectral_integral", "spectral_matrix", "stability_spectrum",
    "static_covariance", "steady_moment_estimate",
]
