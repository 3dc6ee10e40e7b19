"""Phase-space model of the driven Kerr nonlinear coupler.

Two single-mode cavities containing Kerr media, coherently pumped and
evanescently coupled, are described by four c-number amplitudes
(a1, a1+, a2, a2+) that double the classical phase space: a1+ is an
independent variable that averages to conj(a1) over the ensemble, so
moments of the amplitudes reproduce normally-ordered operator moments.

All rates are dimensionless (loss rate of cavity 1 sets the time scale)
and the basis ordering (mode1, mode1+, mode2, mode2+) is fixed globally.

This module supplies the equations of motion: the deterministic drift,
its Jacobian, the fluctuation drift matrix A (sign convention
d(da) = -A da dt + B dW), and the diagonal diffusion matrix D = B B^T
whose entries come from the Kerr terms alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# basis permutation that exchanges the mode-1 and mode-2 blocks
MODE_SWAP = (2, 3, 0, 1)


def _require_finite(name: str, value: complex) -> None:
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class CouplerParams:
    """Physical constants of one coupler instance.

    Parameters
    ----------
    gamma1, gamma2 : float
        Cavity amplitude loss rates, strictly positive.
    delta1, delta2 : float
        Cavity detunings from the pump (any real value).
    eps1, eps2 : complex
        Coherent pump amplitudes.
    chi1, chi2 : float
        Kerr nonlinear strengths.
    coupling_j : float
        Evanescent coupling strength between the two guided modes.
    """

    gamma1: float
    gamma2: float
    delta1: float
    delta2: float
    eps1: complex
    eps2: complex
    chi1: float
    chi2: float
    coupling_j: float

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "delta1", "delta2", "chi1", "chi2",
                     "coupling_j"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be a finite real, got {value!r}")
        if self.gamma1 <= 0:
            raise ValueError(f"gamma1 must be positive, got {self.gamma1!r}")
        if self.gamma2 <= 0:
            raise ValueError(f"gamma2 must be positive, got {self.gamma2!r}")
        object.__setattr__(self, "eps1", complex(self.eps1))
        object.__setattr__(self, "eps2", complex(self.eps2))
        _require_finite("eps1", self.eps1)
        _require_finite("eps2", self.eps2)

    def swapped(self) -> "CouplerParams":
        """Return the same system with the mode labels exchanged."""
        return replace(
            self,
            gamma1=self.gamma2, gamma2=self.gamma1,
            delta1=self.delta2, delta2=self.delta1,
            eps1=self.eps2, eps2=self.eps1,
            chi1=self.chi2, chi2=self.chi1,
        )

    def mode_sort_key(self, mode: int) -> tuple:
        """Ordering key of a mode's constants, used for canonical labeling."""
        if mode == 1:
            return (self.gamma1, self.delta1, self.eps1.real, self.eps1.imag,
                    self.chi1)
        return (self.gamma2, self.delta2, self.eps2.real, self.eps2.imag,
                self.chi2)

    def gamma_diag(self) -> np.ndarray:
        """Loss rates along the phase-space basis, (g1, g1, g2, g2)."""
        return np.array([self.gamma1, self.gamma1, self.gamma2, self.gamma2])


@dataclass(frozen=True)
class PhaseSpacePoint:
    """One point of the doubled phase space (a1, a1+, a2, a2+).

    On the classical manifold a1+ = conj(a1) and a2+ = conj(a2); stochastic
    trajectories leave that manifold, deterministic ones do not.
    """

    a1: complex
    a1p: complex
    a2: complex
    a2p: complex

    def __post_init__(self):
        for name in ("a1", "a1p", "a2", "a2p"):
            object.__setattr__(self, name, complex(getattr(self, name)))
            _require_finite(name, getattr(self, name))

    @classmethod
    def origin(cls) -> "PhaseSpacePoint":
        return cls(0j, 0j, 0j, 0j)

    @classmethod
    def on_manifold(cls, a1: complex, a2: complex) -> "PhaseSpacePoint":
        """Classical point with the conjugate amplitudes filled in."""
        a1 = complex(a1)
        a2 = complex(a2)
        return cls(a1, a1.conjugate(), a2, a2.conjugate())

    @classmethod
    def from_array(cls, values) -> "PhaseSpacePoint":
        a1, a1p, a2, a2p = (complex(v) for v in values)
        return cls(a1, a1p, a2, a2p)

    def to_array(self) -> np.ndarray:
        return np.array([self.a1, self.a1p, self.a2, self.a2p])

    def swapped(self) -> "PhaseSpacePoint":
        return PhaseSpacePoint(self.a2, self.a2p, self.a1, self.a1p)

    def norm(self) -> float:
        return math.sqrt(
            (abs(self.a1) ** 2 + abs(self.a1p) ** 2)
            + (abs(self.a2) ** 2 + abs(self.a2p) ** 2))

    def conjugate_defect(self) -> float:
        """Distance from the classical manifold, relative to the amplitude."""
        d = max(abs(self.a1p - self.a1.conjugate()),
                abs(self.a2p - self.a2.conjugate()))
        return d / (1.0 + self.norm())


@dataclass(frozen=True)
class DriftMatrix:
    """Fluctuation drift matrix A, with d(da) = -A da dt + B dW."""

    a: np.ndarray


@dataclass(frozen=True)
class DiffusionMatrix:
    """Diagonal diffusion matrix D = B B^T of the fluctuations."""

    d: np.ndarray


def _drift_scalar(p: CouplerParams, a1, a1p, a2, a2p):
    """Deterministic drift on plain complex scalars (hot path for RK4)."""
    f1 = (p.eps1 - (p.gamma1 + 1j * p.delta1) * a1
          - 2j * p.chi1 * a1p * a1 * a1 - 1j * p.coupling_j * a2)
    f1p = (p.eps1.conjugate() - (p.gamma1 - 1j * p.delta1) * a1p
           + 2j * p.chi1 * a1p * a1p * a1 + 1j * p.coupling_j * a2p)
    f2 = (p.eps2 - (p.gamma2 + 1j * p.delta2) * a2
          - 2j * p.chi2 * a2p * a2 * a2 - 1j * p.coupling_j * a1)
    f2p = (p.eps2.conjugate() - (p.gamma2 - 1j * p.delta2) * a2p
           + 2j * p.chi2 * a2p * a2p * a2 + 1j * p.coupling_j * a1p)
    return f1, f1p, f2, f2p


def deterministic_drift(params: CouplerParams,
                        point: PhaseSpacePoint) -> np.ndarray:
    """Noise-free equations of motion at one phase-space point.

    Returns the length-4 complex vector (f1, f1+, f2, f2+) with

        f1  = eps1 - (gamma1 + i delta1) a1 - 2i chi1 a1+ a1^2 - i J a2
        f1+ = eps1* - (gamma1 - i delta1) a1+ + 2i chi1 a1+^2 a1 + i J a2+

    and the mode-2 components obtained by exchanging the labels 1 and 2.
    """
    return np.array(_drift_scalar(params, point.a1, point.a1p,
                                  point.a2, point.a2p))


def drift_array(params: CouplerParams, states: np.ndarray) -> np.ndarray:
    """Vectorized drift for an array of states with shape (..., 4)."""
    a1 = states[..., 0]
    a1p = states[..., 1]
    a2 = states[..., 2]
    a2p = states[..., 3]
    p = params
    f1 = (p.eps1 - (p.gamma1 + 1j * p.delta1) * a1
          - 2j * p.chi1 * a1p * a1 * a1 - 1j * p.coupling_j * a2)
    f1p = (p.eps1.conjugate() - (p.gamma1 - 1j * p.delta1) * a1p
           + 2j * p.chi1 * a1p * a1p * a1 + 1j * p.coupling_j * a2p)
    f2 = (p.eps2 - (p.gamma2 + 1j * p.delta2) * a2
          - 2j * p.chi2 * a2p * a2 * a2 - 1j * p.coupling_j * a1)
    f2p = (p.eps2.conjugate() - (p.gamma2 - 1j * p.delta2) * a2p
           + 2j * p.chi2 * a2p * a2p * a2 + 1j * p.coupling_j * a1p)
    return np.stack([f1, f1p, f2, f2p], axis=-1)


def jacobian(params: CouplerParams, point: PhaseSpacePoint) -> np.ndarray:
    """Complex Jacobian M of the drift, a 4x4 matrix.

    The drift is polynomial in the four amplitudes (no conjugations), so M
    is the plain holomorphic derivative and Newton steps may be taken in
    complex arithmetic.
    """
    return jacobian_array(params, point.to_array())


def jacobian_array(params: CouplerParams, states: np.ndarray) -> np.ndarray:
    """Vectorized Jacobian for states of shape (..., 4), output (..., 4, 4)."""
    a1 = states[..., 0]
    a1p = states[..., 1]
    a2 = states[..., 2]
    a2p = states[..., 3]
    p = params
    out = np.zeros(states.shape[:-1] + (4, 4), dtype=complex)
    out[..., 0, 0] = -(p.gamma1 + 1j * p.delta1) - 4j * p.chi1 * a1p * a1
    out[..., 0, 1] = -2j * p.chi1 * a1 * a1
    out[..., 0, 2] = -1j * p.coupling_j
    out[..., 1, 0] = 2j * p.chi1 * a1p * a1p
    out[..., 1, 1] = -(p.gamma1 - 1j * p.delta1) + 4j * p.chi1 * a1p * a1
    out[..., 1, 3] = 1j * p.coupling_j
    out[..., 2, 0] = -1j * p.coupling_j
    out[..., 2, 2] = -(p.gamma2 + 1j * p.delta2) - 4j * p.chi2 * a2p * a2
    out[..., 2, 3] = -2j * p.chi2 * a2 * a2
    out[..., 3, 1] = 1j * p.coupling_j
    out[..., 3, 2] = 2j * p.chi2 * a2p * a2p
    out[..., 3, 3] = -(p.gamma2 - 1j * p.delta2) + 4j * p.chi2 * a2p * a2
    return out


def drift_matrix(params: CouplerParams, point: PhaseSpacePoint) -> DriftMatrix:
    """Fluctuation drift matrix A = -M at the expansion point."""
    return DriftMatrix(a=-jacobian(params, point))


def diffusion_diagonal(params: CouplerParams, states: np.ndarray) -> np.ndarray:
    """Diagonal of D for states of shape (..., 4); Kerr terms only."""
    a1 = states[..., 0]
    a1p = states[..., 1]
    a2 = states[..., 2]
    a2p = states[..., 3]
    return np.stack([
        -2j * params.chi1 * a1 * a1,
        +2j * params.chi1 * a1p * a1p,
        -2j * params.chi2 * a2 * a2,
        +2j * params.chi2 * a2p * a2p,
    ], axis=-1)


def diffusion_matrix(params: CouplerParams,
                     point: PhaseSpacePoint) -> DiffusionMatrix:
    """Diagonal diffusion matrix D at the expansion point.

    Entries are (-2i chi1 a1^2, +2i chi1 a1+^2, -2i chi2 a2^2,
    +2i chi2 a2+^2); both modes carry the same structure.
    """
    return DiffusionMatrix(d=np.diag(diffusion_diagonal(params,
                                                        point.to_array())))


def noise_diagonal(params: CouplerParams, states: np.ndarray) -> np.ndarray:
    """Diagonal of the noise amplitude matrix B, principal square roots."""
    return np.sqrt(diffusion_diagonal(params, states))


def noise_amplitudes(params: CouplerParams,
                     point: PhaseSpacePoint) -> np.ndarray:
    """Noise amplitude matrix B with B B^T = D.

    B is diagonal; each entry is the principal complex square root of the
    matching diffusion entry, so B B^T reproduces D exactly up to floating
    point. Any branch would satisfy B B^T = D; the principal one is chosen
    for determinism.
    """
    return np.diag(noise_diagonal(params, point.to_array()))


def canonical_swapped(params: CouplerParams) -> bool:
    """True when the canonical (sorted) mode labeling reverses this one.

    Heavy linear algebra is run in the canonical labeling so that relabeled
    inputs produce bitwise-identical numbers with the outputs mapped back.
    """
    return params.mode_sort_key(1) > params.mode_sort_key(2)


def swap_matrix_labels(m: np.ndarray) -> np.ndarray:
    """Apply the mode exchange permutation to both axes of a 4x4 matrix."""
    idx = list(MODE_SWAP)
    return m[np.ix_(idx, idx)]
