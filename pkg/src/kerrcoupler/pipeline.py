"""End-to-end single-regime analysis: steady state, linearization, report."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .criteria import SteeringReport, minimize_report
from .model import CouplerParams, PhaseSpacePoint
from .spectra import LinearizedModel, linearize
from .steady_state import SteadyStateResult, relax_to_steady_state


@dataclass(frozen=True)
class AnalysisResult:
    steady: SteadyStateResult
    model: LinearizedModel
    report: SteeringReport


def analyze(params: CouplerParams,
            omega_grid: Optional[Sequence[float]] = None,
            theta_grid: Optional[Sequence[float]] = None,
            initial: Optional[PhaseSpacePoint] = None,
            step: Optional[float] = None,
            max_time: Optional[float] = None) -> AnalysisResult:
    """Relax to the steady state, linearize, and minimize the criteria.

    Raises the underlying errors unchanged: NonConvergence or
    DivergenceDetected from the relaxation, UnstablePoint from the
    linearization.
    """
    steady = relax_to_steady_state(params, initial=initial, step=step,
                                   max_time=max_time)
    model = linearize(params, steady.point)
    report = minimize_report(model, omega_grid=omega_grid,
                             theta_grid=theta_grid)
    return AnalysisResult(steady=steady, model=model, report=report)
