"""Steering and inseparability criteria on output spectral covariances.

For each direction the product of inferred quadrature variances is formed
from the real output covariance,

    Vinf(X_i) = V(X_i) - V(X_i, X_j)^2 / V(X_j),

and a value of epr_ij = Vinf(X_i) Vinf(Y_i) below one demonstrates that
party j steers party i with Gaussian measurements (epr_12 is the mode-1
product, with mode 2 the steering party). The scaled inseparability
correlation is the better sign choice of

    [V(X1 -+ X2) + V(Y1 +- Y2)] / 4,

below one for an inseparable state. Reports minimize both quantities over
a frequency/angle grid with golden-section refinement around the grid
minima.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyGrid, UnphysicalCovariance
from .model import (DiffusionMatrix, DriftMatrix, canonical_swapped,
                    swap_matrix_labels)
from .spectra import (LinearizedModel, OutputCovariance,
                      output_covariance_grid, output_scaling,
                      quadrature_rotation)

NO_STEERING = "no_steering"
SYMMETRIC = "symmetric"
ASYMMETRIC_2_STEERS_1 = "asymmetric_2_steers_1"
ASYMMETRIC_1_STEERS_2 = "asymmetric_1_steers_2"

_MIRROR = {
    NO_STEERING: NO_STEERING,
    SYMMETRIC: SYMMETRIC,
    ASYMMETRIC_2_STEERS_1: ASYMMETRIC_1_STEERS_2,
    ASYMMETRIC_1_STEERS_2: ASYMMETRIC_2_STEERS_1,
}

DIVISION_GUARD = 1e-12
DEFAULT_OMEGA_POINTS = 400
DEFAULT_THETA_POINTS = 180
REFINE_XTOL = 1e-4
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SteeringValues:
    """Criteria values at one (frequency, angle) sample."""

    omega: float
    theta: float
    epr_12: float
    epr_21: float
    duan_simon_scaled: float


@dataclass(frozen=True)
class SteeringReport:
    """Grid-minimized criteria with locations and the regime class."""

    min_epr_12: float
    argmin_epr_12: Tuple[float, float]
    min_epr_21: float
    argmin_epr_21: Tuple[float, float]
    min_duan_simon_scaled: float
    argmin_duan_simon: Tuple[float, float]
    classification: str


def default_omega_grid(params, omega_max: Optional[float] = None,
                       n_points: int = DEFAULT_OMEGA_POINTS,
                       include_negative: bool = False) -> np.ndarray:
    """Frequencies [0, 20 max(gamma)] (mirrored to negative on request)."""
    if omega_max is None:
        omega_max = 20.0 * max(params.gamma1, params.gamma2)
    grid = np.linspace(0.0, float(omega_max), int(n_points))
    if include_negative:
        grid = np.concatenate([-grid[:0:-1], grid])
    return grid


def default_theta_grid(n_points: int = DEFAULT_THETA_POINTS) -> np.ndarray:
    """Angles covering [0, pi); the criteria are pi-periodic."""
    return np.linspace(0.0, np.pi, int(n_points), endpoint=False)


def inferred_variance(v, target_x_index: int, target_y_index: int,
                      partner_x_index: int, partner_y_index: int
                      ) -> Tuple[float, float]:
    """Inferred variances of one mode's X and Y given the partner mode.

    ``v`` is an OutputCovariance or a raw 4x4 real symmetric matrix in the
    (X1, Y1, X2, Y2) basis. A partner variance below the division guard
    with negligible covariance contributes nothing (nothing to infer from);
    with sizable covariance it is impossible for a physical state.

    Raises
    ------
    UnphysicalCovariance
        If a partner variance vanishes while its covariance does not.
    """
    m = v.v if isinstance(v, OutputCovariance) else np.asarray(v)

    def _one(ti: int, pi: int) -> float:
        var_t = float(m[ti, ti])
        var_p = float(m[pi, pi])
        cov = float(m[ti, pi])
        if var_p < DIVISION_GUARD:
            if abs(cov) > DIVISION_GUARD:
                raise UnphysicalCovariance(
                    f"covariance {cov:.3e} with vanishing partner variance "
                    f"{var_p:.3e} violates Cauchy-Schwarz")
            return var_t
        return var_t - cov * cov / var_p

    return (_one(target_x_index, partner_x_index),
            _one(target_y_index, partner_y_index))


def duan_simon_scaled(v) -> float:
    """Best sign choice of the combined-quadrature criterion over 4."""
    m = v.v if isinstance(v, OutputCovariance) else np.asarray(v)
    base = m[0, 0] + m[2, 2] + m[1, 1] + m[3, 3]
    plus = base - 2.0 * m[0, 2] + 2.0 * m[1, 3]
    minus = base + 2.0 * m[0, 2] - 2.0 * m[1, 3]
    return min(plus, minus) / 4.0


def epr_products(v: OutputCovariance) -> SteeringValues:
    """All three criteria evaluated on one output covariance."""
    vinf_x1, vinf_y1 = inferred_variance(v, 0, 1, 2, 3)
    vinf_x2, vinf_y2 = inferred_variance(v, 2, 3, 0, 1)
    return SteeringValues(
        omega=v.omega,
        theta=v.theta,
        epr_12=max(vinf_x1 * vinf_y1, 0.0),
        epr_21=max(vinf_x2 * vinf_y2, 0.0),
        duan_simon_scaled=duan_simon_scaled(v),
    )


def _criteria_arrays(v: np.ndarray):
    """Vectorized criteria on covariance grids of shape (..., 4, 4)."""
    vx1 = v[..., 0, 0]
    vy1 = v[..., 1, 1]
    vx2 = v[..., 2, 2]
    vy2 = v[..., 3, 3]
    cxx = v[..., 0, 2]
    cyy = v[..., 1, 3]
    for var, cov in ((vx2, cxx), (vy2, cyy), (vx1, cxx), (vy1, cyy)):
        tiny = var < DIVISION_GUARD
        if np.any(tiny & (np.abs(cov) > DIVISION_GUARD)):
            raise UnphysicalCovariance(
                "covariance with vanishing partner variance on grid")

    def _inf(var_t, var_p, cov):
        sub = np.where(var_p < DIVISION_GUARD, 0.0,
                       cov * cov / np.where(var_p < DIVISION_GUARD, 1.0,
                                            var_p))
        return var_t - sub

    epr12 = np.maximum(_inf(vx1, vx2, cxx) * _inf(vy1, vy2, cyy), 0.0)
    epr21 = np.maximum(_inf(vx2, vx1, cxx) * _inf(vy2, vy1, cyy), 0.0)
    base = vx1 + vx2 + vy1 + vy2
    duan = np.minimum(base - 2.0 * cxx + 2.0 * cyy,
                      base + 2.0 * cxx - 2.0 * cyy) / 4.0
    return epr12, epr21, duan


def evaluate_grid(model: LinearizedModel, omega_grid: np.ndarray,
                  theta_grid: np.ndarray):
    """epr_12, epr_21 and scaled inseparability arrays over a grid.

    Shapes are (len(omega_grid), len(theta_grid)).
    """
    v = output_covariance_grid(model, omega_grid, theta_grid)
    return _criteria_arrays(v)


_EYE4 = np.eye(4)


def _criteria_point(a: np.ndarray, d: np.ndarray, ell: np.ndarray,
                    omega: float, theta: float):
    """Criteria values at one point without the dataclass plumbing.

    Same arithmetic as the public path; used by the refinement loop where
    call overhead dominates.
    """
    x = np.linalg.solve(a + 1j * omega * _EYE4, d)
    s = np.linalg.solve(a - 1j * omega * _EYE4, x.T).T
    q = quadrature_rotation(theta)
    t = q @ s @ q.T
    sym = 0.5 * (t + t.T)
    resid = float(np.abs(sym.imag).max())
    if resid > 1e-8 * (1.0 + float(np.abs(t).max())):
        from .errors import NonHermitianResidual
        raise NonHermitianResidual(
            f"imaginary residual {resid:.3e} during refinement")
    v = _EYE4 + 2.0 * (ell[:, None] * sym.real * ell[None, :])
    return _criteria_arrays(v)


def _golden_min(fun: Callable[[float], float], lo: float, hi: float,
                xtol: float) -> Tuple[float, float]:
    """Golden-section minimum of ``fun`` on [lo, hi]; returns (x, f(x))."""
    a, b = float(lo), float(hi)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    while (b - a) > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
        x, f = (c, fc) if fc <= fd else (d, fd)
        if f < best_f:
            best_x, best_f = x, f
    return best_x, best_f


def _classify(min_12: float, min_21: float) -> str:
    steer_12 = min_12 < 1.0
    steer_21 = min_21 < 1.0
    if steer_12 and steer_21:
        return SYMMETRIC
    if steer_12:
        return ASYMMETRIC_2_STEERS_1
    if steer_21:
        return ASYMMETRIC_1_STEERS_2
    return NO_STEERING


def minimize_report(model: LinearizedModel,
                    omega_grid: Optional[Sequence[float]] = None,
                    theta_grid: Optional[Sequence[float]] = None,
                    refine_xtol: float = REFINE_XTOL) -> SteeringReport:
    """Minimize the criteria over a grid and classify the regime.

    The grid minima are tightened by one-dimensional golden-section passes
    in frequency then angle around each argmin; refinement can only lower
    the reported values. Ties break toward the smallest frequency, then
    the smallest angle. Internally the computation runs in a canonical
    mode labeling so that relabeling the modes exchanges the two steering
    minima exactly and mirrors the classification.
    """
    if omega_grid is None:
        omega_grid = default_omega_grid(model.params)
    if theta_grid is None:
        theta_grid = default_theta_grid()
    omega_grid = np.asarray(omega_grid, dtype=float)
    theta_grid = np.asarray(theta_grid, dtype=float)
    if omega_grid.size == 0 or theta_grid.size == 0:
        raise EmptyGrid("omega and theta grids must be nonempty")
    if np.any(theta_grid < 0.0) or np.any(theta_grid >= np.pi):
        raise ValueError("theta grid must lie within [0, pi)")

    swapped = canonical_swapped(model.params)
    if swapped:
        params_c = model.params.swapped()
        a_c = swap_matrix_labels(model.a.a)
        d_c = swap_matrix_labels(model.d.d)
    else:
        params_c = model.params
        a_c = model.a.a
        d_c = model.d.d
    model_c = LinearizedModel(params=params_c, steady=model.steady,
                              a=DriftMatrix(a=a_c), d=DiffusionMatrix(d=d_c))

    epr12, epr21, duan = evaluate_grid(model_c, omega_grid, theta_grid)

    ell_c = output_scaling(params_c)
    kinds = {"epr_12": 0, "epr_21": 1, "duan_simon_scaled": 2}

    def scalar(kind: str, omega: float, theta: float) -> float:
        values = _criteria_point(a_c, d_c, ell_c, omega, theta)
        return float(values[kinds[kind]])

    def refine(grid_vals: np.ndarray, kind: str):
        flat = int(np.argmin(grid_vals))
        i, j = np.unravel_index(flat, grid_vals.shape)
        best = float(grid_vals[i, j])
        best_w = float(omega_grid[i])
        best_t = float(theta_grid[j])
        # frequency pass around the winning column
        lo = omega_grid[max(i - 1, 0)]
        hi = omega_grid[min(i + 1, len(omega_grid) - 1)]
        if hi > lo:
            x, f = _golden_min(lambda w: scalar(kind, w, best_t), lo, hi,
                               refine_xtol)
            if f < best:
                best, best_w = f, x
        # angle pass at the refined frequency
        tlo = theta_grid[max(j - 1, 0)]
        thi = theta_grid[min(j + 1, len(theta_grid) - 1)]
        if thi > tlo:
            x, f = _golden_min(lambda t: scalar(kind, best_w, t), tlo, thi,
                               refine_xtol)
            if f < best:
                best, best_t = f, x
        return best, (best_w, best_t)

    min12, arg12 = refine(epr12, "epr_12")
    min21, arg21 = refine(epr21, "epr_21")
    minds, argds = refine(duan, "duan_simon_scaled")

    if swapped:
        min12, min21 = min21, min12
        arg12, arg21 = arg21, arg12

    return SteeringReport(
        min_epr_12=min12, argmin_epr_12=arg12,
        min_epr_21=min21, argmin_epr_21=arg21,
        min_duan_simon_scaled=minds, argmin_duan_simon=argds,
        classification=_classify(min12, min21),
    )
