"""Quantities extracted from evolving states: moments, positivity thresholds, Husimi and P functions, reductions."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import GridSpec, PhaseSpaceGrid, sample_grid
from .lindblad import (
    Divergent,
    OpenSystem,
    decoherence_matrix,
    dissipation_matrix,
    equilibrium_decoherence_matrix,
)
from .polynomial import Poly, exp_series, multi_factorial
from .states import (
    CHORD,
    WIGNER,
    GaussianPolynomialState,
    coherent_state,
    symplectic_fourier,
)
from .symplectic import (
    IndefiniteMatrixError,
    is_symplectic,
    standard_symplectic_form,
    williamson_frequencies,
)


# moments ---------------------------------------------------------------

def _as_chord(state: GaussianPolynomialState) -> GaussianPolynomialState:
    return state if state.rep == CHORD else symplectic_fourier(state)


def parse_multi_index(alpha, N: int) -> tuple:
    """Accept an exponent tuple of length 2N or a string such as 'q1^2*p2'."""
    if isinstance(alpha, str):
        e = [0] * (2 * N)
        text = alpha.replace(" ", "")
        if text in ("", "1"):
            return tuple(e)
        for factor in text.split("*"):
            name, sep, power = factor.partition("^")
            if len(name) < 2 or name[0] not in "pq" or not name[1:].isdigit() or (sep and not power.isdigit()):
                raise ValueError(f"bad moment factor {factor!r}")
            k = int(name[1:]) - 1
            if not 0 <= k < N:
                raise ValueError(f"mode index out of range in {factor!r}")
            e[k + (N if name[0] == "q" else 0)] += int(power) if power else 1
        return tuple(e)
    e = tuple(int(a) for a in alpha)
    if len(e) != 2 * N or any(a < 0 for a in e):
        raise ValueError("multi-index must have 2N non-negative entries")
    return e


def moments(state: GaussianPolynomialState, alpha, max_degree: int = 16) -> complex:
    """Weyl-ordered moment <x^alpha> from derivatives of the chord function at the origin.

    The classical characteristic function <exp(i k.x)> equals
    (2 pi hbar)^N chi(hbar J k); its Taylor coefficients give the moments.
    """
    chi = _as_chord(state)
    N, hbar = chi.N, chi.hbar
    e = parse_multi_index(alpha, N)
    deg = sum(e)
    if deg > max_degree:
        raise ValueError(f"moment degree {deg} exceeds {max_degree}")
    J = standard_symplectic_form(N)
    phi = chi.linear_substitute(hbar * J)
    n = 2 * N
    quad = Poly(n)
    for i in range(n):
        for j in range(n):
            if phi.Q[i, j] != 0:
                idx = [0] * n
                idx[i] += 1
                idx[j] += 1
                quad = quad + Poly(n, {tuple(idx): -0.5 * phi.Q[i, j] / hbar})
    lin = Poly.linear(phi.v / hbar)
    series = exp_series(lin, quad, deg) * phi.expanded_poly().truncate(deg)
    coef = series.coefficient(e)
    val = (2 * np.pi * hbar) ** N * phi.c0 * coef * multi_factorial(e) * (-1j) ** deg
    return complex(val)


@dataclass(frozen=True)
class CovarianceReport:
    mean: np.ndarray
    K: np.ndarray
    uncertainty: float


def covariance(state: GaussianPolynomialState) -> CovarianceReport:
    """Mean and symmetrized covariance K_ij = <(x_i x_j + x_j x_i)/2> - <x_i><x_j>."""
    chi = _as_chord(state)
    n = chi.dim
    mean = np.zeros(n)
    for i in range(n):
        e = [0] * n
        e[i] = 1
        mean[i] = moments(chi, e).real
    K = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            e = [0] * n
            e[i] += 1
            e[j] += 1
            K[i, j] = K[j, i] = moments(chi, e).real - mean[i] * mean[j]
    return CovarianceReport(mean, K, float(np.sqrt(max(np.linalg.det(K), 0.0))))


def chord_exponent_from_covariance(K, hbar: float = 1.0) -> np.ndarray:
    """Chord exponent matrix Q = J^T K J / hbar of a Gaussian with covariance K."""
    K = np.asarray(K)
    J = standard_symplectic_form(K.shape[0] // 2)
    return J.T @ K @ J / hbar


# purity -----------------------------------------------------------------

def purity_and_linear_entropy(state: GaussianPolynomialState) -> tuple:
    """Purity (2 pi hbar)^N int |chi|^2 d xi, and E_l = 1 - purity."""
    chi = _as_chord(state)
    pur = (2 * np.pi * chi.hbar) ** chi.N * (chi * chi.conj()).integral()
    pur = float(pur.real)
    return pur, 1.0 - pur


# reductions -------------------------------------------------------------

def reduce(state: GaussianPolynomialState, keep: Sequence[int]) -> GaussianPolynomialState:
    """Reduced chord function of the modes in ``keep`` (0-based, ascending)."""
    chi = _as_chord(state)
    N = chi.N
    keep = sorted(set(int(k) for k in keep))
    if not keep or len(keep) == N or keep[0] < 0 or keep[-1] >= N:
        raise ValueError("keep must be a non-empty proper subset of the modes")
    idx = keep + [N + k for k in keep]
    red = chi.restrict(idx)
    return red.scaled((2 * np.pi * chi.hbar) ** (N - len(keep)))


def reduced_wigner(state: GaussianPolynomialState, keep: Sequence[int], spec: GridSpec) -> PhaseSpaceGrid:
    return sample_grid(symplectic_fourier(reduce(state, keep)), spec)


# positivity -------------------------------------------------------------

@dataclass(frozen=True)
class PositivityReport:
    t_minus: Optional[float]
    t_plus: Optional[float]
    t_p_estimate: Optional[float]
    threshold: float
    omega_minus: Callable[[float], float]
    omega_plus: Callable[[float], float]


def _bisect(f, a, b, rtol=1e-10):
    """Root of f on [a, b] assuming f(a) < 0 <= f(b)."""
    while b - a > rtol * b:
        m = 0.5 * (a + b)
        if f(m) < 0:
            a = m
        else:
            b = m
    return b


def _first_crossing(f, t0, t_max, rtol=1e-10):
    """Smallest t in (0, t_max] where f changes from negative to >= 0, searched geometrically."""
    if f(t0) >= 0:
        return _bisect(f, 0.0, t0, rtol) if t0 > 0 else 0.0
    a = t0
    while a < t_max:
        b = min(2 * a, t_max)
        if f(b) >= 0:
            return _bisect(f, a, b, rtol)
        a = b
    return None


def positivity_bounds(system: OpenSystem, t_max: float, threshold: float = 2.0,
                      method: str = "lyapunov_ode") -> PositivityReport:
    """Times where the extreme Williamson frequencies of M-tilde(t), or their geometric mean, reach ``threshold``.

    ``threshold = 2`` follows the convention that M-tilde enters as
    exp(-xi.M-tilde xi / 2 hbar); for a single damped mode it gives
    t = ln(5)/gamma. The smallest smoothing that makes every Husimi-type
    convolution positive instead corresponds to ``threshold = 0.5``.
    """
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    N = system.N

    def freqs(t):
        if t == 0:
            return np.zeros(N)
        Mt = decoherence_matrix(system, t, method).M_tilde
        return williamson_frequencies(Mt, allow_semidefinite=True)

    def w_minus(t):
        return float(freqs(t)[0])

    def w_plus(t):
        return float(freqs(t)[-1])

    def log_det_gap(t):
        w = freqs(t)
        if np.any(w <= 0):
            return -np.inf
        return float(np.sum(np.log(w)) - N * np.log(threshold))

    scale = np.linalg.norm(system.H, 2) + abs(np.trace(dissipation_matrix(system)))
    t0 = min(system.hbar / scale if scale > 0 else 1.0, t_max)
    t_minus = _first_crossing(lambda t: w_plus(t) - threshold, t0, t_max)
    t_plus = _first_crossing(lambda t: w_minus(t) - threshold, t0, t_max)
    t_p = _first_crossing(log_det_gap, t0, t_max)
    return PositivityReport(t_minus, t_plus, t_p, threshold, w_minus, w_plus)


# Husimi -----------------------------------------------------------------

def husimi(state: GaussianPolynomialState, eta) -> float:
    """Q(eta) = int W(x) W_eta(x) dx with W_eta the vacuum-width coherent state at eta.

    This equals <eta|rho|eta> / (2 pi hbar)^N.
    """
    W = state if state.rep == WIGNER else symplectic_fourier(state)
    window = coherent_state(W.N, np.asarray(eta, dtype=float), hbar=W.hbar)
    val = (W * window).integral()
    return float(val.real)


# P representation -------------------------------------------------------

def _p_threshold_matrix(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if not is_symplectic(S, 1e-8):
        raise ValueError("S is not symplectic")
    J = standard_symplectic_form(S.shape[0] // 2)
    X = np.linalg.inv(-J @ S.T @ S @ J)
    return 0.5 * (X + X.T)


@dataclass(frozen=True)
class PCharacteristic:
    kind: str  # "function", "delta" or "divergent"
    state: Optional[GaussianPolynomialState]
    min_eigenvalue: float


def p_characteristic(state: GaussianPolynomialState, S=None) -> PCharacteristic:
    """chi_P = chi exp[+xi.X xi / 4 hbar], X = (-J S^T S J)^-1, classified by the decay of its exponent."""
    chi = _as_chord(state)
    S = np.eye(chi.dim) if S is None else S
    X = _p_threshold_matrix(S)
    newQ = chi.Q - 0.5 * X
    chiP = replace(chi, Q=newQ)
    lam = float(np.linalg.eigvalsh(newQ.real)[0])
    scale = max(1.0, np.max(np.abs(chi.Q)))
    if lam > 1e-12 * scale:
        return PCharacteristic("function", chiP, lam)
    if np.max(np.abs(newQ)) <= 1e-12 * scale and chi.poly.is_constant():
        return PCharacteristic("delta", chiP, lam)
    return PCharacteristic("divergent", None, lam)


def p_positivity_onset(system: OpenSystem, S=None, t_max: float = 100.0,
                       method: str = "lyapunov_ode") -> Optional[float]:
    """Least t with M(t) - X/2 positive semidefinite, X = (-J S^T S J)^-1.

    None if not reached by t_max, or if the equilibrium only touches the threshold.
    """
    S = np.eye(2 * system.N) if S is None else S
    X = _p_threshold_matrix(S)

    def gap(t):
        if t == 0:
            return float(np.linalg.eigvalsh(-0.5 * X)[0])
        M = decoherence_matrix(system, t, method).M
        return float(np.linalg.eigvalsh(M - 0.5 * X)[0])

    # a threshold met only in the t -> infinity limit is not an onset
    M_inf = equilibrium_decoherence_matrix(system)
    if not isinstance(M_inf, Divergent):
        gap_inf = float(np.linalg.eigvalsh(M_inf - 0.5 * X)[0])
        if gap_inf <= 1e-10 * max(1.0, np.max(np.abs(X))):
            return None
    scale = np.linalg.norm(system.H, 2) + abs(np.trace(dissipation_matrix(system)))
    t0 = min(system.hbar / scale if scale > 0 else 1.0, t_max)
    return _first_crossing(gap, t0, t_max)


def p_function_bound_holds(chiP: GaussianPolynomialState, points) -> bool:
    """Check |chi_P(xi)| < chi_P(0) on sample points away from the origin."""
    points = np.asarray(points, dtype=float)
    vals = np.abs(chiP(points))
    at0 = abs(chiP(np.zeros(chiP.dim)))
    nz = np.linalg.norm(points, axis=-1) > 0
    return bool(np.all(vals[nz] < at0))


__all__ = [
    "CovarianceReport",
    "PositivityReport",
    "PCharacteristic",
    "IndefiniteMatrixError",
    "moments",
    "covariance",
    "chord_exponent_from_covariance",
    "purity_and_linear_entropy",
    "reduce",
    "reduced_wigner",
    "positivity_bounds",
    "husimi",
    "p_characteristic",
    "p_positivity_onset",
    "p_function_bound_holds",
    "parse_multi_index",
]
