"""Linearized fluctuation spectra and output quadrature covariances.

Around a stable fixed point the fluctuations form a multivariate
Ornstein-Uhlenbeck process d(da) = -A da dt + B dW. The stationary
spectral matrix is

    S(w) = (A + i w I)^-1 D (A^T - i w I)^-1,      D = B B^T,

normalized so that the frequency integral with measure dw / (2 pi)
equals the stationary covariance C solving A C + C A^T = D. Projection
onto rotated quadratures X_i = a_i e^{-i theta} + a_i+ e^{i theta} and
Y_i = X_i at theta + pi/2 gives real symmetric spectra; the standard
single-ended input-output map then produces measurable output spectra
with shot noise normalized to one:

    V(w, theta) = I + 2 L Sq L,   L = diag(sqrt g1, sqrt g1,
                                           sqrt g2, sqrt g2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import solve_sylvester

from .errors import NonHermitianResidual, SingularSystem, UnstablePoint
from .model import (CouplerParams, DiffusionMatrix, DriftMatrix,
                    PhaseSpacePoint, diffusion_matrix, drift_matrix)

IMAG_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class LinearizedModel:
    """Fluctuation model at a stable steady state: params, point, A and D."""

    params: CouplerParams
    steady: PhaseSpacePoint
    a: DriftMatrix
    d: DiffusionMatrix

    def fluctuation_eigenvalues(self) -> np.ndarray:
        """Spectrum of -A (the Jacobian); all real parts are negative."""
        eig = np.linalg.eigvals(-self.a.a)
        order = np.lexsort((eig.imag, eig.real))
        return eig[order]


@dataclass(frozen=True)
class SpectralMatrix:
    """Intracavity spectral matrix S at one frequency."""

    omega: float
    s: np.ndarray


@dataclass(frozen=True)
class OutputCovariance:
    """Real symmetric output spectral covariance in the (X1, Y1, X2, Y2)
    basis at one frequency and quadrature angle; vacuum gives the identity.
    """

    omega: float
    theta: float
    v: np.ndarray


def linearize(params: CouplerParams, steady: PhaseSpacePoint) -> LinearizedModel:
    """Bundle drift and diffusion matrices at a steady state.

    Raises
    ------
    UnstablePoint
        If any fluctuation eigenvalue has a nonnegative real part, in which
        case no stationary spectrum exists.
    """
    a = drift_matrix(params, steady)
    d = diffusion_matrix(params, steady)
    eig = np.linalg.eigvals(-a.a)
    max_re = float(eig.real.max())
    if max_re >= 0.0:
        raise UnstablePoint(
            f"fluctuations grow: max eigenvalue real part {max_re:.3e} >= 0")
    return LinearizedModel(params=params, steady=steady, a=a, d=d)


def spectral_matrices(a: np.ndarray, d: np.ndarray,
                      omegas: np.ndarray) -> np.ndarray:
    """S(w) for an array of frequencies; shape (len(omegas), 4, 4).

    Both factors are applied with linear solves rather than explicit
    inversion; the right factor uses the transpose identity
    S (A^T - i w I) = X  =>  (A - i w I) S^T = X^T.
    """
    omegas = np.asarray(omegas, dtype=float)
    eye = np.eye(4)
    left = a[None, :, :] + 1j * omegas[:, None, None] * eye
    right = a[None, :, :] - 1j * omegas[:, None, None] * eye
    try:
        x = np.linalg.solve(left, np.broadcast_to(d, left.shape))
        st = np.linalg.solve(right, np.transpose(x, (0, 2, 1)))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("spectral solve failed") from exc
    return np.transpose(st, (0, 2, 1))


def spectral_matrix(model: LinearizedModel, omega: float) -> SpectralMatrix:
    """Intracavity spectral matrix at a single frequency."""
    s = spectral_matrices(model.a.a, model.d.d, np.array([float(omega)]))[0]
    return SpectralMatrix(omega=float(omega), s=s)


def static_covariance(model: LinearizedModel) -> np.ndarray:
    """Stationary covariance C solving A C + C A^T = D.

    Solved with a Schur-based Sylvester routine; independent of the
    frequency-domain path, which it serves as an oracle for.
    """
    try:
        return solve_sylvester(model.a.a, model.a.a.T, model.d.d)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem("Lyapunov solve degenerated") from exc


def spectral_integral(model: LinearizedModel, rtol: float = 1e-4,
                      start_nodes: int = 256, max_nodes: int = 8192) -> np.ndarray:
    """Frequency integral of S(w) with measure dw / (2 pi).

    The infinite axis is mapped through w = s tan(u) and integrated with
    Gauss-Legendre nodes, doubling the node count until successive values
    agree entrywise to ``rtol``. The mapped grid always extends far beyond
    50 times the fastest decay rate, so no tail is truncated.
    """
    eig = model.fluctuation_eigenvalues()
    re = np.abs(eig.real)
    scale = float(np.sqrt(re.min() * np.abs(eig).max()))
    prev = None
    n = start_nodes
    while n <= max_nodes:
        u, wts = leggauss(n)
        u = u * (np.pi / 2.0)
        wts = wts * (np.pi / 2.0)
        omegas = scale * np.tan(u)
        jac = scale / np.cos(u) ** 2
        s = spectral_matrices(model.a.a, model.d.d, omegas)
        total = np.einsum('w,wij->ij', wts * jac, s) / (2.0 * np.pi)
        if prev is not None:
            ref = np.abs(prev).max()
            if ref == 0.0 or np.abs(total - prev).max() <= rtol * ref:
                return total
        prev = total
        n *= 2
    return prev


def quadrature_rotation(theta: float) -> np.ndarray:
    """Map (da1, da1+, da2, da2+) to quadratures (X1, Y1, X2, Y2)."""
    em = np.exp(-1j * theta)
    ep = np.conj(em)
    q = np.zeros((4, 4), dtype=complex)
    q[0, 0] = em
    q[0, 1] = ep
    q[1, 0] = -1j * em
    q[1, 1] = 1j * ep
    q[2, 2] = em
    q[2, 3] = ep
    q[3, 2] = -1j * em
    q[3, 3] = 1j * ep
    return q


def quadrature_projection(s: SpectralMatrix, theta: float) -> np.ndarray:
    """Real symmetric quadrature spectral matrix at angle ``theta``.

    Computes T = Q S Q^T, symmetrizes, and returns the real part. For a
    steady state on the classical manifold the symmetrized matrix is real
    identically; a residual imaginary part flags upstream inconsistency.

    Raises
    ------
    NonHermitianResidual
        If the discarded imaginary part exceeds 1e-8 * (1 + |T|).
    """
    q = quadrature_rotation(theta)
    t = q @ s.s @ q.T
    sym = 0.5 * (t + t.T)
    resid = float(np.abs(sym.imag).max())
    bound = IMAG_RESIDUAL_TOL * (1.0 + float(np.abs(t).max()))
    if resid > bound:
        raise NonHermitianResidual(
            f"imaginary residual {resid:.3e} exceeds {bound:.3e}; "
            f"is the expansion point on the classical manifold?")
    return sym.real


def output_scaling(params: CouplerParams) -> np.ndarray:
    """Mirror coupling weights L = diag(sqrt g1, sqrt g1, sqrt g2, sqrt g2)."""
    return np.sqrt(params.gamma_diag())


def output_covariance(model: LinearizedModel, omega: float,
                      theta: float) -> OutputCovariance:
    """Measurable output spectral covariance at one frequency and angle.

    Single-ended cavities with all loss through the output mirror:
    V = I + 2 L Sq L, so vacuum inputs give exactly the identity and the
    Heisenberg product V(X_i) V(Y_i) >= 1 holds in every physical regime.
    """
    sq = quadrature_projection(spectral_matrix(model, omega), theta)
    ell = output_scaling(model.params)
    v = np.eye(4) + 2.0 * (ell[:, None] * sq * ell[None, :])
    return OutputCovariance(omega=float(omega), theta=float(theta), v=v)


def output_covariance_grid(model: LinearizedModel, omegas: np.ndarray,
                           thetas: np.ndarray) -> np.ndarray:
    """Output covariances on a frequency/angle grid.

    Returns an array of shape (len(omegas), len(thetas), 4, 4). The same
    imaginary-residual guard as the scalar path is applied across the whole
    grid at once.
    """
    omegas = np.asarray(omegas, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    s = spectral_matrices(model.a.a, model.d.d, omegas)
    q = np.stack([quadrature_rotation(th) for th in thetas])
    t = np.einsum('tij,wjk,tlk->wtil', q, s, q, optimize=True)
    sym = 0.5 * (t + np.transpose(t, (0, 1, 3, 2)))
    resid = float(np.abs(sym.imag).max())
    bound = IMAG_RESIDUAL_TOL * (1.0 + float(np.abs(t).max()))
    if resid > bound:
        raise NonHermitianResidual(
            f"imaginary residual {resid:.3e} exceeds {bound:.3e} on grid")
    ell = output_scaling(model.params)
    return np.eye(4) + 2.0 * (ell[:, None] * sym.real * ell[None, :])
