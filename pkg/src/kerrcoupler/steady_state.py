"""Classical steady states of the coupler and their linear stability.

The noise-free equations of motion are relaxed with classic fourth-order
Runge-Kutta from a caller-supplied initial point (the empty cavity by
default, the physical turn-on condition), then polished with Newton
iteration using the analytic Jacobian. Stability is certified from the
Jacobian spectrum: stable means every eigenvalue has negative real part.

A vectorized batch relaxer is provided for parameter sweeps; it takes
stability-limited rather than accuracy-limited steps because only the
fixed point matters, and hands over to batched Newton early. Single-point
calls default to conservative accuracy-limited settings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DivergenceDetected, NonConvergence, SingularJacobian
from .model import (MODE_SWAP, CouplerParams, PhaseSpacePoint,
                    _drift_scalar, canonical_swapped, jacobian,
                    jacobian_array)

DEFAULT_RK4_TOL = 1e-8
DEFAULT_NEWTON_TOL = 1e-10
DEFAULT_OVERFLOW_GUARD = 1e12


def default_step(params: CouplerParams) -> float:
    """Accuracy-limited default step, resolving the fastest loss rate."""
    return 1e-3 / max(params.gamma1, params.gamma2)


def default_max_time(params: CouplerParams) -> float:
    """Default relaxation horizon, generous for the slowest loss rate."""
    return 50.0 / min(params.gamma1, params.gamma2)


def _norm4(f1, f1p, f2, f2p) -> float:
    # mode-grouped sum keeps the value invariant under label exchange
    return math.sqrt((abs(f1) ** 2 + abs(f1p) ** 2)
                     + (abs(f2) ** 2 + abs(f2p) ** 2))


@dataclass(frozen=True)
class SteadyStateResult:
    """A certified fixed point of the noise-free dynamics.

    ``eigenvalues`` is the Jacobian spectrum sorted by ascending real part
    (ties by imaginary part); ``stable`` is true when all real parts are
    negative. ``residual_norm`` is the drift norm at the returned point.
    """

    point: PhaseSpacePoint
    residual_norm: float
    eigenvalues: np.ndarray
    stable: bool


def stability_spectrum(params: CouplerParams,
                       point: PhaseSpacePoint) -> np.ndarray:
    """Eigenvalues of the drift Jacobian at ``point``, sorted."""
    eig = np.linalg.eigvals(jacobian(params, point))
    order = np.lexsort((eig.imag, eig.real))
    return eig[order]


def newton_refine(params: CouplerParams, guess: PhaseSpacePoint,
                  tol: float = DEFAULT_NEWTON_TOL, max_iters: int = 50,
                  polish_iters: int = 1) -> PhaseSpacePoint:
    """Polish a near-fixed-point with Newton iteration on the drift.

    Stops when the drift norm falls below ``tol * (1 + |alpha|)``, then runs
    ``polish_iters`` extra steps so every call path lands on the same
    machine-precision fixed point regardless of how it got near it.

    Raises
    ------
    SingularJacobian
        If a Newton linear solve fails.
    NonConvergence
        If the tolerance is not reached within ``max_iters``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    # solve in the canonical mode labeling so relabeled systems reproduce
    # bitwise-identical iterates (LU pivoting is otherwise order-sensitive)
    perm = list(MODE_SWAP) if canonical_swapped(params) else [0, 1, 2, 3]
    state = guess.to_array()
    polish_left = None
    for _ in range(max_iters + polish_iters):
        f = np.array(_drift_scalar(params, *state))
        resid = _norm4(*f)
        scale = 1.0 + _norm4(*state)
        if polish_left is None and resid <= tol * scale:
            polish_left = polish_iters
        if polish_left is not None and polish_left == 0:
            break
        m = jacobian_array(params, state)
        try:
            delta = np.linalg.solve(m[np.ix_(perm, perm)], -f[perm])
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(
                f"Newton solve failed at residual {resid:.3e}") from exc
        if not np.isfinite(delta).all():
            raise SingularJacobian("Newton step is not finite")
        state = state.copy()
        state[perm] += delta
        if polish_left is not None:
            polish_left -= 1
    else:
        f = np.array(_drift_scalar(params, *state))
        if _norm4(*f) > tol * (1.0 + _norm4(*state)):
            raise NonConvergence(
                f"Newton did not reach tolerance {tol:.1e} in "
                f"{max_iters} iterations")
    return PhaseSpacePoint.from_array(state)


def relax_to_steady_state(params: CouplerParams,
                          initial: Optional[PhaseSpacePoint] = None,
                          step: Optional[float] = None,
                          tol: float = DEFAULT_RK4_TOL,
                          max_time: Optional[float] = None,
                          overflow_guard: float = DEFAULT_OVERFLOW_GUARD,
                          newton_tol: float = DEFAULT_NEWTON_TOL,
                          newton_max_iters: int = 50,
                          newton_polish: bool = True) -> SteadyStateResult:
    """Relax the noise-free equations to a fixed point and certify it.

    Classic RK4 integration runs from ``initial`` (the origin by default)
    until the drift norm drops below ``tol * (1 + |alpha|)``; Newton then
    polishes the point to ``newton_tol`` (skipped when ``newton_polish``
    is false, exposing the raw integration endpoint). The returned result
    carries the Jacobian spectrum and the stability flag.

    Raises
    ------
    NonConvergence
        If ``max_time`` elapses with the residual above threshold.
    DivergenceDetected
        If the trajectory norm exceeds ``overflow_guard`` (runaway regime).
    """
    if step is None:
        step = default_step(params)
    if max_time is None:
        max_time = default_max_time(params)
    if step <= 0 or tol <= 0 or max_time <= 0:
        raise ValueError("step, tol and max_time must be positive")
    if initial is None:
        initial = PhaseSpacePoint.origin()

    a1, a1p, a2, a2p = (initial.a1, initial.a1p, initial.a2, initial.a2p)
    h = step
    n_steps = int(math.ceil(max_time / h))
    converged = False
    for _ in range(n_steps):
        k1 = _drift_scalar(params, a1, a1p, a2, a2p)
        if _norm4(*k1) <= tol * (1.0 + _norm4(a1, a1p, a2, a2p)):
            converged = True
            break
        k2 = _drift_scalar(params, a1 + 0.5 * h * k1[0], a1p + 0.5 * h * k1[1],
                           a2 + 0.5 * h * k1[2], a2p + 0.5 * h * k1[3])
        k3 = _drift_scalar(params, a1 + 0.5 * h * k2[0], a1p + 0.5 * h * k2[1],
                           a2 + 0.5 * h * k2[2], a2p + 0.5 * h * k2[3])
        k4 = _drift_scalar(params, a1 + h * k3[0], a1p + h * k3[1],
                           a2 + h * k3[2], a2p + h * k3[3])
        a1 += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        a1p += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        a2 += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        a2p += h / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        norm = _norm4(a1, a1p, a2, a2p)
        if not math.isfinite(norm) or norm > overflow_guard:
            raise DivergenceDetected(
                f"trajectory norm exceeded {overflow_guard:.1e}; the regime "
                f"appears unstable or runaway")
    else:
        k1 = _drift_scalar(params, a1, a1p, a2, a2p)
        converged = _norm4(*k1) <= tol * (1.0 + _norm4(a1, a1p, a2, a2p))
    if not converged:
        raise NonConvergence(
            f"relaxation residual still above tolerance after t={max_time:g}")

    point = PhaseSpacePoint(a1, a1p, a2, a2p)
    if newton_polish:
        point = newton_refine(params, point, tol=newton_tol,
                              max_iters=newton_max_iters)
    f = deterministic_residual(params, point)
    eig = stability_spectrum(params, point)
    return SteadyStateResult(point=point, residual_norm=f,
                             eigenvalues=eig,
                             stable=bool((eig.real < 0).all()))


def deterministic_residual(params: CouplerParams,
                           point: PhaseSpacePoint) -> float:
    """Drift norm at a point (grouped by mode for label symmetry)."""
    return _norm4(*_drift_scalar(params, point.a1, point.a1p,
                                 point.a2, point.a2p))


def linear_steady_state(params: CouplerParams) -> PhaseSpacePoint:
    """Closed-form fixed point of the chi=0 system (2x2 linear solve)."""
    lhs = np.array([
        [params.gamma1 + 1j * params.delta1, 1j * params.coupling_j],
        [1j * params.coupling_j, params.gamma2 + 1j * params.delta2],
    ])
    rhs = np.array([params.eps1, params.eps2])
    a1, a2 = np.linalg.solve(lhs, rhs)
    return PhaseSpacePoint.on_manifold(a1, a2)


# -- batched relaxation for sweeps ------------------------------------------

def _kerr_rate_estimate(eps_mag: float, gamma: float, chi: float) -> float:
    """A-priori bound on the Kerr frequency shift of one driven mode.

    The intensity is bounded by the smaller of the linear response
    (eps/gamma)^2 and the Kerr self-limited scale (eps^2 / 4 chi^2)^(1/3)
    where the nonlinear detuning dominates; a margin covers transient
    overshoot from the empty cavity.
    """
    chi = abs(chi)
    if chi == 0.0 or eps_mag == 0.0:
        return 0.0
    n_lin = (eps_mag / gamma) ** 2
    n_kerr = (eps_mag ** 2 / (4.0 * chi ** 2)) ** (1.0 / 3.0)
    return 8.0 * chi * min(n_lin, n_kerr)


def _stability_step(p: CouplerParams) -> float:
    """Stability-limited RK4 step for one parameter set.

    The eigenvalue magnitude is bounded by the losses, detunings, coupling
    and the Kerr shift estimate; RK4 remains contractive for |lambda| h
    below ~2.8, so a unit target leaves a wide margin while converging in
    a few hundred steps. Divergent cells are retried with smaller steps.
    """
    pump = math.sqrt(abs(p.eps1) ** 2 + abs(p.eps2) ** 2)
    kerr = max(_kerr_rate_estimate(pump, p.gamma1, p.chi1),
               _kerr_rate_estimate(pump, p.gamma2, p.chi2))
    lam = (max(p.gamma1, p.gamma2) + max(abs(p.delta1), abs(p.delta2))
           + abs(p.coupling_j) + kerr + 1.0)
    return 1.0 / lam


def _field_arrays(params_list: Sequence[CouplerParams]) -> dict:
    return {
        "g1": np.array([p.gamma1 for p in params_list]),
        "g2": np.array([p.gamma2 for p in params_list]),
        "d1": np.array([p.delta1 for p in params_list]),
        "d2": np.array([p.delta2 for p in params_list]),
        "e1": np.array([p.eps1 for p in params_list]),
        "e2": np.array([p.eps2 for p in params_list]),
        "c1": np.array([p.chi1 for p in params_list]),
        "c2": np.array([p.chi2 for p in params_list]),
        "J": np.array([p.coupling_j for p in params_list]),
    }


def _fbatch(fields: dict, states: np.ndarray) -> np.ndarray:
    a1 = states[:, 0]
    a1p = states[:, 1]
    a2 = states[:, 2]
    a2p = states[:, 3]
    f1 = (fields["e1"] - (fields["g1"] + 1j * fields["d1"]) * a1
          - 2j * fields["c1"] * a1p * a1 * a1 - 1j * fields["J"] * a2)
    f1p = (np.conj(fields["e1"]) - (fields["g1"] - 1j * fields["d1"]) * a1p
           + 2j * fields["c1"] * a1p * a1p * a1 + 1j * fields["J"] * a2p)
    f2 = (fields["e2"] - (fields["g2"] + 1j * fields["d2"]) * a2
          - 2j * fields["c2"] * a2p * a2 * a2 - 1j * fields["J"] * a1)
    f2p = (np.conj(fields["e2"]) - (fields["g2"] - 1j * fields["d2"]) * a2p
           + 2j * fields["c2"] * a2p * a2p * a2 + 1j * fields["J"] * a1p)
    return np.stack([f1, f1p, f2, f2p], axis=1)


def _grouped_norm(values: np.ndarray) -> np.ndarray:
    return np.sqrt((np.abs(values[:, 0]) ** 2 + np.abs(values[:, 1]) ** 2)
                   + (np.abs(values[:, 2]) ** 2 + np.abs(values[:, 3]) ** 2))


def _relax_batch_once(params_list: Sequence[CouplerParams], tol: float,
                      max_time: float, overflow_guard: float,
                      step_scale: float, check_every: int):
    """One vectorized relaxation pass; returns (endpoints, status) arrays.

    status per cell: 0 converged, 1 diverged, 2 timed out. The active set
    is compacted as cells finish so late stragglers iterate cheaply.
    """
    n = len(params_list)
    steps = np.array([_stability_step(p) * step_scale for p in params_list])
    fields = _field_arrays(params_list)
    endpoints = np.zeros((n, 4), dtype=complex)
    status = np.full(n, 2, dtype=np.int8)

    index = np.arange(n)
    states = np.zeros((n, 4), dtype=complex)
    t = np.zeros(n)
    while index.size:
        h = steps[index][:, None]
        for _ in range(check_every):
            k1 = _fbatch(fields, states)
            k2 = _fbatch(fields, states + 0.5 * h * k1)
            k3 = _fbatch(fields, states + 0.5 * h * k2)
            k4 = _fbatch(fields, states + h * k3)
            states = states + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + check_every * steps[index]
        resid = _grouped_norm(_fbatch(fields, states))
        norm = _grouped_norm(states)
        diverged = ~np.isfinite(norm) | (norm > overflow_guard)
        done = ~diverged & (resid <= tol * (1.0 + norm))
        timed_out = ~diverged & ~done & (t >= max_time)
        finished = diverged | done | timed_out
        if finished.any():
            idx = index[finished]
            endpoints[idx] = np.where(diverged[finished, None], 0.0,
                                      states[finished])
            status[idx] = np.where(diverged[finished], 1,
                                   np.where(done[finished], 0, 2))
            keep = ~finished
            index = index[keep]
            states = states[keep]
            t = t[keep]
            fields = {k: v[keep] for k, v in fields.items()}
    return endpoints, status


def relax_batch(params_list: Sequence[CouplerParams],
                tol: float = 1e-5,
                max_time: Optional[float] = None,
                newton_tol: float = DEFAULT_NEWTON_TOL,
                overflow_guard: float = DEFAULT_OVERFLOW_GUARD,
                check_every: int = 64,
                retries: int = 2):
    """Relax many parameter sets at once from the origin.

    Returns a list with one entry per input: a ``SteadyStateResult`` on
    success, or the string ``"nonconverged"`` for cells that ran out of
    time or diverged. The RK4 stage takes stability-limited steps and
    stops at a loose residual; Newton then polishes to ``newton_tol`` so
    each fixed point matches the single-point solver to machine precision.
    Cells that blow up under the estimated step are retried with
    progressively smaller steps before being declared nonconverged.
    """
    n = len(params_list)
    if n == 0:
        return []
    if max_time is None:
        max_time = max(default_max_time(p) for p in params_list)

    endpoints = np.zeros((n, 4), dtype=complex)
    status = np.full(n, 2, dtype=np.int8)
    pending = list(range(n))
    scale = 1.0
    for _ in range(retries + 1):
        subset = [params_list[i] for i in pending]
        ends, stat = _relax_batch_once(subset, tol, max_time,
                                       overflow_guard, scale, check_every)
        retry_next = []
        for k, i in enumerate(pending):
            endpoints[i] = ends[k]
            status[i] = stat[k]
            if stat[k] == 1:
                retry_next.append(i)
        pending = retry_next
        if not pending:
            break
        scale *= 0.125

    results: list = []
    for i, p in enumerate(params_list):
        if status[i] != 0:
            results.append("nonconverged")
            continue
        try:
            point = newton_refine(
                p, PhaseSpacePoint.from_array(endpoints[i]), tol=newton_tol)
        except (SingularJacobian, NonConvergence):
            results.append("nonconverged")
            continue
        eig = stability_spectrum(p, point)
        results.append(SteadyStateResult(
            point=point,
            residual_norm=deterministic_residual(p, point),
            eigenvalues=eig,
            stable=bool((eig.real < 0).all())))
    return results
