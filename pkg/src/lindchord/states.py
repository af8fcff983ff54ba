"""Closed-form chord and Wigner functions of the form polynomial x Gaussian.

A state is ``f(u) = c0 * P(T u + t0) * exp(-u.Qu / (2 hbar) + v.u / hbar)``
with ``u = xi`` (chord) or ``u = x`` (Wigner). The polynomial lives in its own
frame ``w = T u + t0``: linear substitutions and Fourier transforms update
``T`` and ``t0`` instead of re-expanding ``P``, which would cancel badly once
the evolution matrices are far from orthogonal. The representation is closed
under the exact open-system evolution and under the symplectic Fourier
transform.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import comb, factorial
from typing import Sequence

import numpy as np

from .lindblad import (
    Divergent,
    OpenSystem,
    chord_evolution_matrix,
    decoherence_matrix,
    equilibrium_decoherence_matrix,
)
from .polynomial import Poly
from .symplectic import DimensionError, is_symplectic, standard_symplectic_form

D_MAX = 16

CHORD = "chord"
WIGNER = "wigner"


class NotIntegrableError(ValueError):
    """The Gaussian exponent does not decay in every direction."""


@dataclass(frozen=True)
class GaussianPolynomialState:
    rep: str
    N: int
    hbar: float
    Q: np.ndarray
    v: np.ndarray
    c0: complex
    poly: Poly
    T: np.ndarray = None
    t0: np.ndarray = None

    def __post_init__(self):
        if self.rep not in (CHORD, WIGNER):
            raise ValueError(f"rep must be 'chord' or 'wigner', got {self.rep!r}")
        n = 2 * self.N
        Q = np.array(self.Q, dtype=complex)
        v = np.array(self.v, dtype=complex).ravel()
        m = self.poly.nvars
        T = np.eye(n, dtype=complex) if self.T is None else np.array(self.T, dtype=complex)
        t0 = np.zeros(m, dtype=complex) if self.t0 is None else np.array(self.t0, dtype=complex).ravel()
        if Q.shape != (n, n) or v.shape != (n,) or T.shape != (m, n) or t0.shape != (m,):
            raise DimensionError("state components do not match 2N")
        Q = 0.5 * (Q + Q.T)
        for a in (Q, v, T, t0):
            a.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "t0", t0)
        object.__setattr__(self, "c0", complex(self.c0))

    @property
    def dim(self) -> int:
        return 2 * self.N

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.dim:
            raise DimensionError(f"points need {self.dim} coordinates")
        quad = np.einsum("...i,ij,...j->...", u, self.Q, u)
        lin = u @ self.v
        return self.c0 * self.poly(u @ self.T.T + self.t0) * np.exp((-0.5 * quad + lin) / self.hbar)

    def _plain_frame(self) -> bool:
        return self.T.shape[0] == self.T.shape[1] and np.array_equal(self.T, np.eye(self.dim)) \
            and not np.any(self.t0)

    def expanded_poly(self) -> Poly:
        """The polynomial factor as a polynomial in u itself."""
        if self._plain_frame():
            return self.poly
        return self.poly.substitute_affine(self.T, self.t0)

    def is_integrable(self) -> bool:
        return bool(np.linalg.eigvalsh(self.Q.real)[0] > 0)

    def conj(self) -> "GaussianPolynomialState":
        """The function u -> conj(f(u)) for real u."""
        return replace(self, Q=self.Q.conj(), v=self.v.conj(), c0=np.conj(self.c0), poly=self.poly.conj(),
                       T=self.T.conj(), t0=self.t0.conj())

    def __mul__(self, other: "GaussianPolynomialState") -> "GaussianPolynomialState":
        if other.rep != self.rep or other.N != self.N or other.hbar != self.hbar:
            raise ValueError("can only multiply functions on the same space")
        base = replace(self, Q=self.Q + other.Q, v=self.v + other.v, c0=self.c0 * other.c0)
        if self.T.shape == other.T.shape and np.array_equal(self.T, other.T) and np.array_equal(self.t0, other.t0):
            return replace(base, poly=self.poly * other.poly)
        m1, m2 = self.poly.nvars, other.poly.nvars
        m = m1 + m2
        poly = self.poly.embed(m, range(m1)) * other.poly.embed(m, range(m1, m))
        return replace(base, poly=poly, T=np.vstack([self.T, other.T]), t0=np.concatenate([self.t0, other.t0]))

    def scaled(self, a: complex) -> "GaussianPolynomialState":
        return replace(self, c0=self.c0 * a)

    def linear_substitute(self, L) -> "GaussianPolynomialState":
        """The function k -> f(L k) for a square matrix L."""
        L = np.asarray(L)
        return replace(self, Q=L.T @ self.Q @ L, v=L.T @ self.v, T=self.T @ L)

    def restrict(self, keep: Sequence[int]) -> "GaussianPolynomialState":
        """Section at u_i = 0 for coordinates not in ``keep`` (given in new order)."""
        keep = list(keep)
        if len(keep) % 2:
            raise DimensionError("kept coordinates must be an even number")
        Q = self.Q[np.ix_(keep, keep)]
        if self._plain_frame():
            return GaussianPolynomialState(self.rep, len(keep) // 2, self.hbar, Q, self.v[keep], self.c0,
                                           self.poly.restrict(keep))
        return GaussianPolynomialState(self.rep, len(keep) // 2, self.hbar, Q, self.v[keep], self.c0,
                                       self.poly, self.T[:, keep], self.t0)

    def integral(self) -> complex:
        """Closed-form integral of the function over all of R^{2N}."""
        return (2 * np.pi * self.hbar) ** self.N * _fourier(self, at_origin=True)

    def hermiticity_defect(self, points) -> float:
        """max |f(-u) - conj f(u)| on sample points."""
        points = np.asarray(points, dtype=float)
        return float(np.max(np.abs(self(-points) - np.conj(self(points)))))


def _mode_positions(N_total: int, offset: int, N_sub: int):
    return [offset + j for j in range(N_sub)] + [N_total + offset + j for j in range(N_sub)]


def product_state(factors: Sequence[GaussianPolynomialState]) -> GaussianPolynomialState:
    """Tensor product; factor k occupies the modes following those of factors < k."""
    if not factors:
        raise ValueError("product of no states")
    rep, hbar = factors[0].rep, factors[0].hbar
    if any(f.rep != rep or f.hbar != hbar for f in factors):
        raise ValueError("factors must share representation and hbar")
    N = sum(f.N for f in factors)
    n = 2 * N
    Q = np.zeros((n, n), dtype=complex)
    v = np.zeros(n, dtype=complex)
    plain = all(f._plain_frame() for f in factors)
    m = n if plain else sum(f.poly.nvars for f in factors)
    T = np.zeros((m, n), dtype=complex)
    t0 = np.zeros(m, dtype=complex)
    poly = Poly.constant(m)
    c0 = 1.0 + 0j
    off = row = 0
    for f in factors:
        pos = _mode_positions(N, off, f.N)
        Q[np.ix_(pos, pos)] = f.Q
        v[pos] = f.v
        rows = pos if plain else list(range(row, row + f.poly.nvars))
        T[np.ix_(rows, pos)] = f.T
        t0[rows] = f.t0
        poly = poly * f.poly.embed(m, rows)
        c0 *= f.c0
        off += f.N
        row += f.poly.nvars
    if plain:
        return GaussianPolynomialState(rep, N, hbar, Q, v, c0, poly)
    return GaussianPolynomialState(rep, N, hbar, Q, v, c0, poly, T, t0)


def coherent_state(N: int, eta=None, S=None, hbar: float = 1.0) -> GaussianPolynomialState:
    """Wigner function (pi hbar)^-N exp[-(x - eta).S^T S (x - eta) / hbar]."""
    n = 2 * N
    eta = np.zeros(n) if eta is None else np.asarray(eta, dtype=float)
    S = np.eye(n) if S is None else np.asarray(S, dtype=float)
    if eta.shape != (n,) or S.shape != (n, n):
        raise DimensionError("eta / S do not match N")
    if not is_symplectic(S, 1e-8):
        raise ValueError("S is not symplectic")
    K = S.T @ S
    c0 = (np.pi * hbar) ** (-N) * np.exp(-(eta @ K @ eta) / hbar)
    return GaussianPolynomialState(WIGNER, N, hbar, 2 * K, 2 * K @ eta, c0, Poly.constant(n))


def _laguerre_coeffs(n: int):
    return [(-1) ** k * comb(n, k) / factorial(k) for k in range(n + 1)]


def fock_state(N: int, occupations: Sequence[int], hbar: float = 1.0, m_omega=1.0,
               max_degree: int = D_MAX) -> GaussianPolynomialState:
    """Chord function of a Fock product state.

    Mode j contributes (2 pi hbar)^-1 exp(-r^2 / 4 hbar) L_n(r^2 / 2 hbar) with
    r^2 = xi_p^2 / s + s xi_q^2 and s = m omega.
    """
    occ = [int(k) for k in occupations]
    if len(occ) != N or any(k < 0 for k in occ):
        raise ValueError("need one non-negative occupation per mode")
    if 2 * sum(occ) > max_degree:
        raise ValueError(f"total polynomial degree {2 * sum(occ)} exceeds D_max={max_degree}")
    s = np.broadcast_to(np.asarray(m_omega, dtype=float), (N,))
    n = 2 * N
    Q = np.diag(np.concatenate([0.5 / s, 0.5 * s])).astype(complex)
    poly = Poly.constant(n)
    for j, k in enumerate(occ):
        if k == 0:
            continue
        r2 = Poly(n, {tuple(2 if i == j else 0 for i in range(n)): 1.0 / (2 * hbar * s[j]),
                      tuple(2 if i == N + j else 0 for i in range(n)): s[j] / (2 * hbar)})
        lag = Poly(n)
        for d, a in enumerate(_laguerre_coeffs(k)):
            lag = lag + r2.pow(d) * a
        poly = poly * lag
    return GaussianPolynomialState(CHORD, N, hbar, Q, np.zeros(n), (2 * np.pi * hbar) ** (-N), poly)


def thermal_state(N: int, nbar, m=1.0, omega=1.0, hbar: float = 1.0) -> GaussianPolynomialState:
    """Chord function (2 pi hbar)^-N exp[-(2 nbar + 1)(xi_p^2 / m omega + m omega xi_q^2) / 4 hbar]."""
    nbar = np.broadcast_to(np.asarray(nbar, dtype=float), (N,))
    if np.any(nbar < 0):
        raise ValueError("nbar must be non-negative")
    s = np.broadcast_to(np.asarray(m, dtype=float) * np.asarray(omega, dtype=float), (N,))
    w = 2 * nbar + 1
    Q = np.diag(np.concatenate([0.5 * w / s, 0.5 * w * s]))
    n = 2 * N
    return GaussianPolynomialState(CHORD, N, hbar, Q, np.zeros(n), (2 * np.pi * hbar) ** (-N), Poly.constant(n))


def nbar_from_beta(beta: float, omega: float, hbar: float = 1.0) -> float:
    """Bose occupation 1 / (e^{beta hbar omega} - 1)."""
    return 1.0 / np.expm1(beta * hbar * omega)


def _check_compatible(system: OpenSystem, state: GaussianPolynomialState):
    if state.N != system.N:
        raise DimensionError(f"state has {state.N} modes, system has {system.N}")
    if state.hbar != system.hbar:
        raise ValueError("state and system use different hbar")


def evolve_chord(system: OpenSystem, state: GaussianPolynomialState, t: float,
                 method: str = "lyapunov_ode") -> GaussianPolynomialState:
    """chi(xi, t) = chi(R(-t) xi, 0) exp[-xi.M(t) xi / 2 hbar]."""
    if state.rep != CHORD:
        raise ValueError("evolve_chord needs a chord-representation state")
    _check_compatible(system, state)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return state
    R = chord_evolution_matrix(system, -t)
    M = decoherence_matrix(system, t, method=method).M
    moved = state.linear_substitute(R)
    return replace(moved, Q=moved.Q + M)


def evolve_wigner(system: OpenSystem, state: GaussianPolynomialState, t: float,
                  method: str = "lyapunov_ode") -> GaussianPolynomialState:
    if state.rep != WIGNER:
        raise ValueError("evolve_wigner needs a Wigner-representation state")
    return symplectic_fourier(evolve_chord(system, symplectic_fourier(state), t, method))


def asymptotic_chord(system: OpenSystem):
    """Equilibrium chord Gaussian, or a :class:`Divergent` marker."""
    M = equilibrium_decoherence_matrix(system)
    if isinstance(M, Divergent):
        return M
    n = 2 * system.N
    return GaussianPolynomialState(CHORD, system.N, system.hbar, M, np.zeros(n),
                                   (2 * np.pi * system.hbar) ** (-system.N), Poly.constant(n))


def _sqrt_det_inv(A: np.ndarray) -> complex:
    """det(A)^(-1/2) on the branch continuous from real positive A (Re A > 0)."""
    ev = np.linalg.eigvals(A)
    return complex(np.prod(1.0 / np.sqrt(ev.astype(complex))))


def _fourier(state: GaussianPolynomialState, at_origin: bool = False):
    """(2 pi hbar)^-N int f(u) exp[(i/hbar) s.Ju] du as a state in s, or its value at s = 0.

    With A = Q / hbar, b = (v + i J^T s) / hbar and D = T d/db,
    int P(T u + t0) e^{-u.Au/2 + b.u} du = P(D + t0) Z(b) for the Gaussian
    integral Z(b) = (2 pi)^N det(A)^(-1/2) exp(b.A^-1 b / 2). Acting on Z, D
    behaves like a Gaussian moment operator with covariance G = T A^-1 T^T, so
    the result is Z(b) (exp(d.G d / 2) P)(T A^-1 b + t0): the polynomial is
    smoothed in its own frame and never re-expanded.
    """
    if not state.is_integrable():
        raise NotIntegrableError("real part of the exponent matrix is not positive definite")
    N, hbar = state.N, state.hbar
    J = standard_symplectic_form(N)
    A = state.Q / hbar
    TAinv = np.linalg.solve(A, state.T.T).T  # T A^-1, A symmetric
    G = TAinv @ state.T.T
    R = state.poly.gaussian_smooth(0.5 * (G + G.T)).prune()
    b0 = state.v / hbar
    y0 = TAinv @ b0 + state.t0
    pref = state.c0 * _sqrt_det_inv(state.Q) * np.exp(0.5 * b0 @ np.linalg.solve(A, b0))
    if at_origin:
        return pref * complex(R(y0))
    B = 1j * J.T / hbar
    AinvB = np.linalg.solve(A, B)
    newQ = -hbar * (B.T @ AinvB)
    newv = hbar * (AinvB.T @ b0)
    rep = WIGNER if state.rep == CHORD else CHORD
    return GaussianPolynomialState(rep, N, hbar, newQ, newv, pref, R, TAinv @ B, y0)


def symplectic_fourier(state: GaussianPolynomialState) -> GaussianPolynomialState:
    """Exact chord <-> Wigner transform with kernel exp[(i/hbar) s.Ju] / (2 pi hbar)^N.

    The same kernel serves both directions, so applying the transform twice
    returns the original function.
    """
    return _fourier(state)


def wigner_is_real(state: GaussianPolynomialState, points, rtol: float = 1e-10) -> bool:
    vals = state(points)
    return bool(np.max(np.abs(vals.imag)) <= rtol * max(np.max(np.abs(vals.real)), 1e-300))


from .grid import GridSpec, PhaseSpaceGrid, default_grid_spec, grid_fourier, sample_grid  # noqa: E402,F401
