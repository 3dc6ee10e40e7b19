"""Two-parameter scans of the steering report over a cell grid.

Each cell overrides the baseline constants with its two axis values, then
runs the full pipeline: relax to the steady state from the empty cavity,
linearize, minimize the criteria. Cells whose fixed point cannot be
certified are first-class data with status ``unstable`` (fixed point found
but fluctuations grow) or ``nonconverged`` (no fixed point reached); they
never abort the sweep.

The relaxation runs vectorized across all cells with stability-limited
steps, handing each cell to Newton polishing, so a sweep cell lands on
the same machine-precision fixed point as a standalone run of that cell.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .config import GridConfig, SweepSpec
from .criteria import default_omega_grid, default_theta_grid, minimize_report
from .errors import NonHermitianResidual, UnstablePoint
from .model import CouplerParams
from .spectra import linearize

STATUS_OK = "ok"
STATUS_UNSTABLE = "unstable"
STATUS_NONCONVERGED = "nonconverged"

_COMPLEX_FIELDS = ("eps1", "eps2")


@dataclass
class SweepGrid:
    """Sweep results; arrays are indexed [axis1, axis2]."""

    spec: SweepSpec
    axis1_values: np.ndarray
    axis2_values: np.ndarray
    min_epr_12: np.ndarray
    min_epr_21: np.ndarray
    min_duan_simon: np.ndarray
    classification: np.ndarray
    status: np.ndarray

    def observable_values(self) -> np.ndarray:
        """The requested observable; strings for the classification."""
        name = self.spec.observable
        if name == "classification":
            return self.classification
        return {
            "min_epr_12": self.min_epr_12,
            "min_epr_21": self.min_epr_21,
            "min_duan_simon": self.min_duan_simon,
        }[name]


def cell_params(spec: SweepSpec, value1: float, value2: float) -> CouplerParams:
    """Baseline constants with the two axis values substituted."""
    overrides = {}
    for name, value in ((spec.axis1.name, value1), (spec.axis2.name, value2)):
        overrides[name] = complex(value) if name in _COMPLEX_FIELDS \
            else float(value)
    return replace(spec.fixed, **overrides)


def run_sweep(spec: SweepSpec, grids: Optional[GridConfig] = None,
              threads: int = 1) -> SweepGrid:
    """Evaluate the steering report over the full cell grid."""
    from .steady_state import relax_batch

    if grids is None:
        grids = GridConfig()
    v1 = spec.axis_values(spec.axis1)
    v2 = spec.axis_values(spec.axis2)
    n1, n2 = len(v1), len(v2)
    cells = [cell_params(spec, a, b) for a in v1 for b in v2]
    steadies = relax_batch(cells)

    theta_grid = default_theta_grid(grids.theta_points)

    shape = (n1, n2)
    min12 = np.full(shape, np.nan)
    min21 = np.full(shape, np.nan)
    minds = np.full(shape, np.nan)
    classification = np.full(shape, "", dtype=object)
    status = np.full(shape, STATUS_NONCONVERGED, dtype=object)

    def evaluate(flat_index: int):
        i, j = divmod(flat_index, n2)
        steady = steadies[flat_index]
        params = cells[flat_index]
        if isinstance(steady, str):
            return i, j, STATUS_NONCONVERGED, None
        if not steady.stable:
            return i, j, STATUS_UNSTABLE, None
        try:
            model = linearize(params, steady.point)
            omega_grid = default_omega_grid(
                params, omega_max=grids.omega_max,
                n_points=grids.omega_points,
                include_negative=grids.include_negative)
            report = minimize_report(model, omega_grid=omega_grid,
                                     theta_grid=theta_grid)
        except (UnstablePoint, NonHermitianResidual):
            return i, j, STATUS_UNSTABLE, None
        return i, j, STATUS_OK, report

    indices = range(n1 * n2)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, indices))
    else:
        results = [evaluate(k) for k in indices]

    for i, j, stat, report in results:
        status[i, j] = stat
        if report is not None:
            min12[i, j] = report.min_epr_12
            min21[i, j] = report.min_epr_21
            minds[i, j] = report.min_duan_simon_scaled
            classification[i, j] = report.classification

    return SweepGrid(spec=spec, axis1_values=v1, axis2_values=v2,
                     min_epr_12=min12, min_epr_21=min21,
                     min_duan_simon=minds, classification=classification,
                     status=status)
