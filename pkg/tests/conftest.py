"""Shared fixtures: the reference asymmetric regime and random regimes."""

from __future__ import annotations

import numpy as np
import pytest

from kerrcoupler import (CouplerParams, linearize, relax_to_steady_state)


def reference_params() -> CouplerParams:
    """The strongly asymmetric regime used throughout the suite."""
    j = 5.0
    d1 = 0.001 * j
    return CouplerParams(gamma1=1.0, gamma2=36.0, delta1=d1, delta2=200 * d1,
                         eps1=1e3, eps2=80e3, chi1=1e-8, chi2=1e-7,
                         coupling_j=j)


def draw_params(rng: np.random.Generator, chi_scale: float = 1e-3
                ) -> CouplerParams:
    """Random mildly nonlinear parameter set with O(1) rates."""
    mag1 = rng.uniform(2.0, 30.0)
    mag2 = rng.uniform(2.0, 30.0)
    ph1, ph2 = rng.uniform(0.0, 2.0 * np.pi, 2)
    return CouplerParams(
        gamma1=rng.uniform(0.5, 3.0),
        gamma2=rng.uniform(0.5, 3.0),
        delta1=rng.uniform(-2.0, 2.0),
        delta2=rng.uniform(-2.0, 2.0),
        eps1=mag1 * np.exp(1j * ph1),
        eps2=mag2 * np.exp(1j * ph2),
        chi1=chi_scale * rng.uniform(0.1, 1.0),
        chi2=chi_scale * rng.uniform(0.1, 1.0),
        coupling_j=rng.uniform(0.0, 3.0),
    )


def draw_stable_regime(rng: np.random.Generator, chi_scale: float = 1e-3):
    """Rejection-sample a regime with a certified stable fixed point."""
    for _ in range(50):
        params = draw_params(rng, chi_scale)
        try:
            steady = relax_to_steady_state(params)
        except Exception:
            continue
        if steady.stable:
            return params, steady
    raise RuntimeError("no stable regime found in 50 draws")


@pytest.fixture(scope="session")
def fig2_params() -> CouplerParams:
    return reference_params()


@pytest.fixture(scope="session")
def fig2_steady(fig2_params):
    """Steady state of the reference regime at default solver settings."""
    return relax_to_steady_state(fig2_params)


@pytest.fixture(scope="session")
def fig2_model(fig2_params, fig2_steady):
    return linearize(fig2_params, fig2_steady.point)
