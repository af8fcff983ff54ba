"""Open quadratic systems with linear Lindblad operators: the exact chord-space solution.

All matrices here are free of hbar; it only enters the Gaussian exponents of
states (see :mod:`lindchord.states`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .symplectic import (
    DimensionError,
    matrix_exponential,
    standard_symplectic_form,
    symmetrize,
    wedge,
)


class IntegratorError(RuntimeError):
    """Adaptive integration could not meet its tolerance."""


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """Quadratic form H(x) = x.Hx / 2 on a 2N-dimensional phase space."""

    H: np.ndarray

    def __post_init__(self):
        H = symmetrize(self.H, "H")
        if H.shape[0] % 2:
            raise DimensionError("Hamiltonian matrix must have even dimension")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def N(self) -> int:
        return self.H.shape[0] // 2


@dataclass(frozen=True)
class LindbladVector:
    """Linear Lindblad symbol L(x) = (l_re + i l_im) . x."""

    l_re: np.ndarray
    l_im: np.ndarray

    def __post_init__(self):
        re = np.array(self.l_re, dtype=float).ravel()
        im = np.array(self.l_im, dtype=float).ravel()
        if re.shape != im.shape:
            raise DimensionError("real and imaginary Lindblad parts differ in length")
        if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
            raise ValueError("Lindblad vector has non-finite entries")
        re.setflags(write=False)
        im.setflags(write=False)
        object.__setattr__(self, "l_re", re)
        object.__setattr__(self, "l_im", im)

    @classmethod
    def from_complex(cls, l) -> "LindbladVector":
        l = np.asarray(l, dtype=complex)
        return cls(l.real, l.imag)

    @property
    def complex(self) -> np.ndarray:
        return self.l_re + 1j * self.l_im


@dataclass(frozen=True)
class OpenSystem:
    hamiltonian: QuadraticHamiltonian
    channels: tuple = ()
    hbar: float = 1.0

    def __post_init__(self):
        if not isinstance(self.hamiltonian, QuadraticHamiltonian):
            object.__setattr__(self, "hamiltonian", QuadraticHamiltonian(self.hamiltonian))
        chans = tuple(c if isinstance(c, LindbladVector) else LindbladVector(*c) for c in self.channels)
        n = self.hamiltonian.H.shape[0]
        for c in chans:
            if c.l_re.shape[0] != n:
                raise DimensionError(f"Lindblad vector length {c.l_re.shape[0]} does not match 2N={n}")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        object.__setattr__(self, "channels", chans)

    @classmethod
    def from_matrices(cls, H, channels: Sequence = (), hbar: float = 1.0) -> "OpenSystem":
        return cls(QuadraticHamiltonian(np.asarray(H, dtype=float)), tuple(channels), hbar)

    @property
    def N(self) -> int:
        return self.hamiltonian.N

    @property
    def H(self) -> np.ndarray:
        return self.hamiltonian.H

    @property
    def J(self) -> np.ndarray:
        return standard_symplectic_form(self.N)


def dissipation_matrix(system: OpenSystem) -> np.ndarray:
    """Gamma = J sum_j (l''_j l'_j^T - l'_j l''_j^T)."""
    n = 2 * system.N
    S = np.zeros((n, n))
    for c in system.channels:
        S += np.outer(c.l_im, c.l_re) - np.outer(c.l_re, c.l_im)
    return system.J @ S


def dissipation_coefficient(system: OpenSystem) -> float:
    """gamma = sum_j l''_j ^ l'_j, half the trace of Gamma."""
    return float(sum(wedge(c.l_im, c.l_re) for c in system.channels))


def diffusion_matrix(system: OpenSystem) -> np.ndarray:
    """D = sum_j (l'_j l'_j^T + l''_j l''_j^T), the source term of M(t)."""
    n = 2 * system.N
    D = np.zeros((n, n))
    for c in system.channels:
        D += np.outer(c.l_re, c.l_re) + np.outer(c.l_im, c.l_im)
    return D


def propagation_matrix(system: OpenSystem) -> np.ndarray:
    """Generator JH + Gamma of the chord evolution matrix."""
    return system.J @ system.H + dissipation_matrix(system)


def _check_time(t) -> float:
    t = float(t)
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    return t


def chord_evolution_matrix(system: OpenSystem, t: float) -> np.ndarray:
    """R_Gamma(t) = exp[(JH + Gamma) t]."""
    t = _check_time(t)
    return matrix_exponential(propagation_matrix(system) * t)


def centre_evolution_matrix(system: OpenSystem, t: float) -> np.ndarray:
    """exp[(JH - Gamma) t]: contracting flow of the mean position."""
    t = _check_time(t)
    return matrix_exponential((system.J @ system.H - dissipation_matrix(system)) * t)


@dataclass(frozen=True)
class DecoherenceMatrices:
    t: float
    M: np.ndarray
    M_tilde: np.ndarray
    M_J: np.ndarray
    R: np.ndarray


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _quadrature_M(A: np.ndarray, D: np.ndarray, t: float, tol: float = 1e-12,
                  max_depth: int = 40) -> np.ndarray:
    """Adaptive Gauss-Legendre integral of R(-s)^T D R(-s) over s in [0, t]."""

    def integrand(s):
        R = matrix_exponential(-A * s)
        return R.T @ D @ R

    def panel(a, b):
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        acc = np.zeros_like(D)
        for x, w in zip(_GL_NODES, _GL_WEIGHTS):
            acc += w * integrand(mid + half * x)
        return half * acc

    total = np.zeros_like(D)
    stack = [(0.0, t, panel(0.0, t), 0)]
    while stack:
        a, b, whole, depth = stack.pop()
        m = 0.5 * (a + b)
        left, right = panel(a, m), panel(m, b)
        err = np.max(np.abs(left + right - whole))
        # share of the absolute budget proportional to panel length
        if err <= tol * max(1.0, np.max(np.abs(whole))) * (b - a) / t or depth >= max_depth:
            if depth >= max_depth and err > tol * max(1.0, np.max(np.abs(whole))):
                raise IntegratorError("quadrature for M(t) did not converge")
            total += left + right
        else:
            stack.append((m, b, right, depth + 1))
            stack.append((a, m, left, depth + 1))
    return total


def _lyapunov_ode_M(A: np.ndarray, D: np.ndarray, t: float, tol: float = 1e-14) -> np.ndarray:
    """Integrate dM/dt = D - A^T M - M A from M(0) = 0 with RK4 and step doubling."""

    def f(M):
        return D - A.T @ M - M @ A

    def rk4(M, h):
        k1 = f(M)
        k2 = f(M + 0.5 * h * k1)
        k3 = f(M + 0.5 * h * k2)
        k4 = f(M + h * k3)
        return M + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    M = np.zeros_like(D)
    if t == 0:
        return M
    scale = np.max(np.abs(A), initial=0.0) + 1.0
    h = min(t, 0.1 / scale)
    h_min = t * 1e-12
    s = 0.0
    while s < t:
        h = min(h, t - s)
        full = rk4(M, h)
        half = rk4(rk4(M, 0.5 * h), 0.5 * h)
        err = np.max(np.abs(full - half)) / 15.0
        bound = tol * max(1.0, np.max(np.abs(half)))
        if err <= bound:
            s += h
            M = half + (half - full) / 15.0
            grow = 2.0 if err == 0 else min(2.0, 0.9 * (bound / err) ** 0.2)
            h *= max(grow, 1.0)
        else:
            h *= max(0.2, 0.9 * (bound / err) ** 0.2)
            if h < h_min:
                raise IntegratorError(f"step size underflow at t={s:.6g}")
    return M


def decoherence_matrix(system: OpenSystem, t: float, method: str = "lyapunov_ode") -> DecoherenceMatrices:
    """M(t) = int_0^t R(t'-t)^T D R(t'-t) dt' together with M-tilde, M_J and R(t)."""
    t = _check_time(t)
    if t < 0:
        raise ValueError("decoherence matrix needs t >= 0")
    A = propagation_matrix(system)
    D = diffusion_matrix(system)
    if t == 0 or not np.any(D):
        M = np.zeros_like(D)
    elif method == "quadrature":
        M = _quadrature_M(A, D, t)
    elif method == "lyapunov_ode":
        M = _lyapunov_ode_M(A, D, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    M = 0.5 * (M + M.T)
    R = matrix_exponential(A * t)
    J = system.J
    Mt = R.T @ M @ R
    return DecoherenceMatrices(t=t, M=M, M_tilde=0.5 * (Mt + Mt.T), M_J=-J @ M @ J, R=R)


@dataclass(frozen=True)
class Divergent:
    """Marker for quantities that have no finite limit."""

    reason: str
    eigenvalues: tuple = field(default=())

    def __bool__(self):
        return False


def equilibrium_decoherence_matrix(system: OpenSystem):
    """M(infinity) solving A^T M + M A = D, or :class:`Divergent`.

    The Lyapunov equation is handed to scipy's Bartels-Stewart solver and the
    residual is checked afterwards.
    """
    A = propagation_matrix(system)
    ev = np.linalg.eigvals(A)
    bad = tuple(ev[ev.real <= 1e-12])
    if bad:
        return Divergent("propagation matrix has eigenvalues with non-positive real part", bad)
    D = diffusion_matrix(system)
    M = scipy.linalg.solve_continuous_lyapunov(A.T, D)
    M = 0.5 * (M + M.T)
    resid = np.max(np.abs(A.T @ M + M @ A - D), initial=0.0)
    if resid > 1e-10 * max(1.0, np.max(np.abs(D)), np.max(np.abs(M))):
        return Divergent(f"Lyapunov residual {resid:.3e} above 1e-10")
    return M


@dataclass(frozen=True)
class VolumeReport:
    det_chord: float
    det_centre: float
    expected_chord: float
    expected_centre: float
    transpose_residual: float
    max_deviation: float


def verify_volume_identity(system: OpenSystem, t: float) -> VolumeReport:
    """Compare det R(t) with e^{2 gamma t} and check -J R(t)^T J = exp[-(JH - Gamma) t]."""
    t = _check_time(t)
    g = dissipation_coefficient(system)
    R = chord_evolution_matrix(system, t)
    C = centre_evolution_matrix(system, t)
    dR, dC = np.linalg.det(R), np.linalg.det(C)
    eR, eC = np.exp(2 * g * t), np.exp(-2 * g * t)
    J = system.J
    other = centre_evolution_matrix(system, -t)
    resid = np.max(np.abs(-J @ R.T @ J - other)) / max(1.0, np.max(np.abs(other)))
    dev = max(abs(dR - eR) / eR, abs(dC - eC) / eC)
    return VolumeReport(float(dR), float(dC), float(eR), float(eC), float(resid), float(dev))


def random_open_system(rng: np.random.Generator, N: int, h_norm: float = 2.0, l_norm: float = 2.0,
                       channels: int = 1, hbar: float = 1.0) -> OpenSystem:
    """Random test system with spectral norm of H uniform in [0, h_norm] and each |l| uniform in [0, l_norm]."""
    A = rng.normal(size=(2 * N, 2 * N))
    H = A + A.T
    H *= rng.uniform(0, h_norm) / np.linalg.norm(H, 2)
    chans = []
    for _ in range(channels):
        l = rng.normal(size=2 * N) + 1j * rng.normal(size=2 * N)
        l *= rng.uniform(0, l_norm) / np.linalg.norm(l)
        chans.append(LindbladVector.from_complex(l))
    return OpenSystem.from_matrices(H, chans, hbar)
