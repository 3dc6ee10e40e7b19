"""Stochastic phase-space ensemble integration of the full coupler SDEs.

Each trajectory follows the doubled phase-space equations with four
independent real Gaussian noises per step; ensemble averages estimate
normally-ordered moments. The default stepper treats the drift with a
semi-implicit midpoint iteration (robust for stiff Kerr systems) and the
noise term with an Euler increment evaluated at the start of the step,
which keeps the scheme consistent with the Ito form of the equations.
Plain Euler-Maruyama is available for convergence cross-checks.

Reproducibility: every trajectory draws from its own counter-keyed Philox
stream derived from (seed, trajectory index), and partial sums are merged
in fixed chunk order, so results are bit-identical for any thread count
or chunking.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import TrajectoryDivergence, WindowTooShort
from .model import CouplerParams, PhaseSpacePoint, drift_array, noise_diagonal

_CHUNK_TRAJ = 1024          # fixed: part of the reproducibility contract
_BLOCK_STEPS = 256
_UNRELIABLE_FRACTION = 1e-3
_FATAL_FRACTION = 0.5


@dataclass(frozen=True)
class EnsembleConfig:
    """Ensemble size, time stepping and seeding for one simulation."""

    n_traj: int
    dt: float
    t_final: float
    seed: int
    record_stride: int = 1
    overflow_guard: Optional[float] = None
    midpoint_iters: int = 3
    stepper: str = "semi_implicit"

    def __post_init__(self):
        if self.n_traj < 2:
            raise ValueError("n_traj must be at least 2")
        if self.dt <= 0 or self.t_final <= 0:
            raise ValueError("dt and t_final must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.stepper not in ("semi_implicit", "euler"):
            raise ValueError(f"unknown stepper {self.stepper!r}")


@dataclass
class MomentSeries:
    """Ensemble moment estimates on the recorded time grid.

    ``n1`` and ``n2`` are averages of a1+ a1 and a2+ a2 (photon-number
    estimators); their imaginary parts are statistical and shrink with the
    ensemble. Standard errors follow the complex-scatter convention
    se = sqrt(sum |z - mean|^2 / ((n - 1) n)).
    """

    times: np.ndarray
    mean_a1: np.ndarray
    mean_a2: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    se_a1: np.ndarray
    se_a2: np.ndarray
    se_n1: np.ndarray
    se_n2: np.ndarray
    n_traj: int
    diverged_count: int = 0
    diverged_fraction: float = 0.0
    unreliable: bool = False
    diverged_events: List[Tuple[int, float]] = field(default_factory=list)
    final_states: Optional[np.ndarray] = None
    final_alive: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SteadyMoments:
    """Window-averaged stationary moments with conservative errors."""

    mean_a1: complex
    se_a1: float
    mean_a2: complex
    se_a2: float
    n1: complex
    se_n1: float
    n2: complex
    se_n2: float


def default_overflow_guard(params: CouplerParams) -> float:
    """Guard scaled to the linear-cavity amplitude estimate."""
    pump = math.sqrt(abs(params.eps1) ** 2 + abs(params.eps2) ** 2)
    scale = pump / min(params.gamma1, params.gamma2)
    return 1e6 * (1.0 + scale)


def _trajectory_generators(seed: int, start: int, count: int):
    keys = np.uint64(seed)
    return [np.random.Generator(np.random.Philox(
        key=np.array([keys, np.uint64(start + i)], dtype=np.uint64)))
        for i in range(count)]


def _run_chunk(params: CouplerParams, cfg: EnsembleConfig, start: int,
               count: int, n_steps: int, record_steps: np.ndarray,
               guard: float):
    """Integrate one chunk of trajectories; return partial moment sums."""
    gens = _trajectory_generators(cfg.seed, start, count)
    states = np.zeros((count, 4), dtype=complex)
    alive = np.ones(count, dtype=bool)
    events: list = []
    n_rec = len(record_steps)
    sums = np.zeros((n_rec, 4), dtype=complex)
    sums_abs2 = np.zeros((n_rec, 4))
    counts = np.zeros(n_rec, dtype=np.int64)
    firsts = np.zeros((n_rec, 4), dtype=complex)
    uniform = np.zeros((n_rec, 4), dtype=bool)
    dt = cfg.dt
    sq = math.sqrt(dt)
    semi = cfg.stepper == "semi_implicit"

    def record(step_index: int, pos: int) -> int:
        while pos < n_rec and record_steps[pos] == step_index:
            quants = np.stack([
                states[:, 0], states[:, 2],
                states[:, 1] * states[:, 0], states[:, 3] * states[:, 2],
            ], axis=1)
            live = alive[:, None]
            sums[pos] = np.where(live, quants, 0.0).sum(axis=0)
            sums_abs2[pos] = np.where(live, np.abs(quants) ** 2,
                                      0.0).sum(axis=0)
            counts[pos] = int(alive.sum())
            if alive.any():
                live_vals = quants[alive]
                firsts[pos] = live_vals[0]
                # identical trajectories (zero noise) get exact statistics
                uniform[pos] = (live_vals == live_vals[0:1]).all(axis=0)
            pos += 1
        return pos

    rec_pos = record(0, 0)
    step = 0
    while step < n_steps:
        block = min(_BLOCK_STEPS, n_steps - step)
        noise = np.empty((count, block, 4))
        for i, g in enumerate(gens):
            noise[i] = g.standard_normal((block, 4))
        for k in range(block):
            bn = noise_diagonal(params, states) * noise[:, k, :] * sq
            if semi:
                mid = states
                for _ in range(cfg.midpoint_iters):
                    mid = (states + 0.5 * dt * drift_array(params, mid)
                           + 0.5 * bn)
                states = states + dt * drift_array(params, mid) + bn
            else:
                states = states + dt * drift_array(params, states) + bn
            norms = np.sqrt(
                (np.abs(states[:, 0]) ** 2 + np.abs(states[:, 1]) ** 2)
                + (np.abs(states[:, 2]) ** 2 + np.abs(states[:, 3]) ** 2))
            bad = alive & (~np.isfinite(norms) | (norms > guard))
            if bad.any():
                t_now = (step + k + 1) * dt
                for idx in np.nonzero(bad)[0]:
                    if len(events) < 1000:
                        events.append((start + int(idx), t_now))
                alive = alive & ~bad
                states[bad] = 0.0
            rec_pos = record(step + k + 1, rec_pos)
        step += block
    return (sums, sums_abs2, counts, firsts, uniform, events, states, alive)


def simulate_ensemble(params: CouplerParams, cfg: EnsembleConfig,
                      threads: int = 1) -> MomentSeries:
    """Integrate the ensemble and return moment estimates over time.

    Parameters
    ----------
    params : CouplerParams
        System constants; all trajectories start from the empty cavity.
    cfg : EnsembleConfig
        Ensemble size, step, horizon and seed. The guard defaults to 1e6
        times the linear amplitude scale of the pumps.
    threads : int
        Worker threads across trajectory chunks. Any value produces
        bit-identical results.

    Raises
    ------
    TrajectoryDivergence
        If the ensemble essentially collapses (more than half of the
        trajectories escape the guard). Smaller escape fractions are
        reported on the result and flag it unreliable above 0.1%.
    """
    fastest = max(params.gamma1, params.gamma2)
    if cfg.dt >= 1.0 / (10.0 * fastest):
        warnings.warn(
            f"dt={cfg.dt:g} does not resolve the fastest rate "
            f"{fastest:g}; recommend dt < {1.0 / (10.0 * fastest):g}",
            stacklevel=2)
    guard = cfg.overflow_guard
    if guard is None:
        guard = default_overflow_guard(params)

    n_steps = int(round(cfg.t_final / cfg.dt))
    record_steps = np.arange(0, n_steps + 1, cfg.record_stride)
    chunk_bounds = [(s, min(_CHUNK_TRAJ, cfg.n_traj - s))
                    for s in range(0, cfg.n_traj, _CHUNK_TRAJ)]

    def job(bound):
        start, count = bound
        return _run_chunk(params, cfg, start, count, n_steps, record_steps,
                          guard)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, chunk_bounds))
    else:
        parts = [job(b) for b in chunk_bounds]

    n_rec = len(record_steps)
    sums = np.zeros((n_rec, 4), dtype=complex)
    sums_abs2 = np.zeros((n_rec, 4))
    counts = np.zeros(n_rec, dtype=np.int64)
    uniform_all = np.ones((n_rec, 4), dtype=bool)
    first_ref = None
    events: list = []
    final_states = np.zeros((cfg.n_traj, 4), dtype=complex)
    final_alive = np.zeros(cfg.n_traj, dtype=bool)
    for (start, count), part in zip(chunk_bounds, parts):
        s, s2, c, fr, uni, ev, fs, fa = part
        sums += s
        sums_abs2 += s2
        counts += c
        if first_ref is None:
            first_ref = fr
        else:
            uniform_all &= fr == first_ref
        uniform_all &= uni
        events.extend(ev)
        final_states[start:start + count] = fs
        final_alive[start:start + count] = fa

    diverged = cfg.n_traj - int(final_alive.sum())
    fraction = diverged / cfg.n_traj
    if fraction > _FATAL_FRACTION:
        raise TrajectoryDivergence(
            f"{diverged} of {cfg.n_traj} trajectories escaped the guard "
            f"{guard:.2e}; first events: {events[:5]}",
            events=events, fraction=fraction)

    safe = np.maximum(counts, 1)[:, None].astype(float)
    means = sums / safe
    var = (sums_abs2 - np.abs(sums) ** 2 / safe) \
        / np.maximum(counts - 1, 1)[:, None]
    se = np.sqrt(np.maximum(var, 0.0) / safe)
    if first_ref is not None:
        # ensembles of identical trajectories have zero spread exactly
        means = np.where(uniform_all, first_ref, means)
        se = np.where(uniform_all, 0.0, se)

    return MomentSeries(
        times=record_steps * cfg.dt,
        mean_a1=means[:, 0], mean_a2=means[:, 1],
        n1=means[:, 2], n2=means[:, 3],
        se_a1=se[:, 0], se_a2=se[:, 1],
        se_n1=se[:, 2], se_n2=se[:, 3],
        n_traj=cfg.n_traj,
        diverged_count=diverged,
        diverged_fraction=fraction,
        unreliable=fraction > _UNRELIABLE_FRACTION,
        diverged_events=events,
        final_states=final_states,
        final_alive=final_alive,
    )


def deterministic_trajectory(params: CouplerParams,
                             cfg: EnsembleConfig) -> np.ndarray:
    """Single noise-free path using the ensemble stepper and grid.

    Returns states of shape (n_recorded, 4); useful as the exact reference
    for the zero-nonlinearity ensemble, whose noise vanishes identically.
    """
    n_steps = int(round(cfg.t_final / cfg.dt))
    record_steps = np.arange(0, n_steps + 1, cfg.record_stride)
    state = np.zeros((1, 4), dtype=complex)
    out = np.zeros((len(record_steps), 4), dtype=complex)
    pos = 0
    if record_steps[pos] == 0:
        out[pos] = state[0]
        pos += 1
    dt = cfg.dt
    semi = cfg.stepper == "semi_implicit"
    for k in range(1, n_steps + 1):
        if semi:
            mid = state
            for _ in range(cfg.midpoint_iters):
                mid = state + 0.5 * dt * drift_array(params, mid)
            state = state + dt * drift_array(params, mid)
        else:
            state = state + dt * drift_array(params, state)
        if pos < len(record_steps) and record_steps[pos] == k:
            out[pos] = state[0]
            pos += 1
    return out


def steady_moment_estimate(series: MomentSeries,
                           window_fraction: float = 0.25) -> SteadyMoments:
    """Average the stationary tail of a moment series.

    The error of each moment is the larger of the mean ensemble standard
    error in the window and the scatter of the windowed values, a
    deliberately conservative combination (window samples are correlated).

    Raises
    ------
    WindowTooShort
        If fewer than 10 recorded points fall inside the window.
    """
    if not 0.0 < window_fraction < 1.0:
        raise ValueError("window_fraction must be inside (0, 1)")
    n = len(series.times)
    start = int(math.floor(n * (1.0 - window_fraction)))
    if n - start < 10:
        raise WindowTooShort(
            f"window holds {n - start} points; at least 10 required")

    def est(values: np.ndarray, errors: np.ndarray):
        window = values[start:]
        mean = complex(window.mean())
        scatter = float(np.sqrt(np.mean(np.abs(window - mean) ** 2)))
        return mean, max(float(errors[start:].mean()), scatter)

    m1, e1 = est(series.mean_a1, series.se_a1)
    m2, e2 = est(series.mean_a2, series.se_a2)
    n1, en1 = est(series.n1, series.se_n1)
    n2, en2 = est(series.n2, series.se_n2)
    return SteadyMoments(mean_a1=m1, se_a1=e1, mean_a2=m2, se_a2=e2,
                         n1=n1, se_n1=en1, n2=n2, se_n2=en2)


def compare_to_steady(moments: SteadyMoments,
                      steady: PhaseSpacePoint) -> dict:
    """Z-scores of the stationary moments against a deterministic point."""
    refs = {
        "a1": steady.a1,
        "a2": steady.a2,
        "n1": steady.a1p * steady.a1,
        "n2": steady.a2p * steady.a2,
    }
    ests = {
        "a1": (moments.mean_a1, moments.se_a1),
        "a2": (moments.mean_a2, moments.se_a2),
        "n1": (moments.n1, moments.se_n1),
        "n2": (moments.n2, moments.se_n2),
    }
    out = {}
    for key, ref in refs.items():
        est, se = ests[key]
        diff = abs(est - ref)
        out[key] = {
            "reference": ref,
            "estimate": est,
            "abs_difference": diff,
            "standard_error": se,
            "z": diff / se if se > 0 else (0.0 if diff == 0 else math.inf),
        }
    return out
