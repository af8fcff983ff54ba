"""Example systems: a dissipative coupled pair, the triatomic reduction, chains and cubic networks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .lindblad import (
    Divergent,
    LindbladVector,
    OpenSystem,
    dissipation_matrix,
    equilibrium_decoherence_matrix,
    propagation_matrix,
)
from .symplectic import is_symplectic, standard_symplectic_form


class DegeneratePerturbationError(ValueError):
    """Non-degenerate perturbation formulas were asked for at a degeneracy."""


class RootTrackingError(RuntimeError):
    """A root branch could not be followed continuously."""


# ---------------------------------------------------------------------------
# helpers

def interleave_permutation(N: int) -> np.ndarray:
    """Index array mapping site-interleaved order (p1, q1, p2, q2, ...) to block order.

    ``M_block[np.ix_(P, P)]`` is the same matrix written site by site.
    """
    P = np.empty(2 * N, dtype=int)
    P[0::2] = np.arange(N)
    P[1::2] = N + np.arange(N)
    return P


def _pair_spectra(a: np.ndarray, b: np.ndarray):
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    order = np.argsort(r)
    return r[order], c[order], cost[r[order], c[order]]


@dataclass(frozen=True)
class SpectrumReport:
    exact: Optional[np.ndarray]
    perturbative: Optional[np.ndarray]
    labels: Optional[list]
    max_defect: Optional[float]
    eigenvectors: Optional[np.ndarray] = None

    @classmethod
    def build(cls, exact, perturbative, labels, eigenvectors=None):
        if exact is not None and perturbative is not None:
            r, c, d = _pair_spectra(np.asarray(perturbative), np.asarray(exact))
            exact = np.asarray(exact)[c]
            return cls(exact, np.asarray(perturbative), labels, float(np.max(d)), eigenvectors)
        return cls(None if exact is None else np.asarray(exact),
                   None if perturbative is None else np.asarray(perturbative), labels, None, eigenvectors)


# ---------------------------------------------------------------------------
# coupled pair

@dataclass(frozen=True)
class CoupledPairParams:
    """Two modes with H = w1 (p1^2+q1^2)/2 + w2 (p2^2+q2^2)/2 + c p1 p2, damped through a_1.

    ``normalization`` selects the channel amplitude: ``"literal"`` uses
    sqrt(gamma/2) a_1, whose dissipation matrix carries gamma/4 on mode 1;
    ``"matrix"`` uses sqrt(2 gamma) a_1 so that the diagonal entry equals gamma.
    """

    omega1: float
    omega2: float
    c: float = 0.0
    gamma: float = 0.0
    normalization: str = "literal"
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.omega1 > 0 and self.omega2 > 0):
            raise ValueError("frequencies must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.normalization not in ("literal", "matrix"):
            raise ValueError("normalization must be 'literal' or 'matrix'")

    @property
    def amplitude(self) -> float:
        return np.sqrt(self.gamma / 2) if self.normalization == "literal" else np.sqrt(2 * self.gamma)

    @property
    def gamma_entry(self) -> float:
        """Diagonal entry of the dissipation matrix on mode 1."""
        return self.amplitude ** 2 / 2


def coupled_pair(params: CoupledPairParams) -> OpenSystem:
    w1, w2, c = params.omega1, params.omega2, params.c
    H = np.diag([w1, w2, w1, w2]).astype(float)
    H[0, 1] = H[1, 0] = c
    channels = []
    if params.gamma > 0:
        a = params.amplitude / np.sqrt(2)
        # a_1 = (q1 + i p1)/sqrt(2)
        channels.append(LindbladVector([0, 0, a, 0], [a, 0, 0, 0]))
    return OpenSystem.from_matrices(H, channels, params.hbar)


@dataclass(frozen=True)
class EigenmodeReport:
    lambda0: dict
    V0: dict
    V1: dict
    rho: tuple
    phi: tuple
    varrho: tuple
    varphi: tuple
    gamma_entry: float


def first_order_eigenmodes(params: CoupledPairParams) -> EigenmodeReport:
    """Uncoupled eigenpairs of JH + Gamma and their first-order corrections in c.

    The corrections solve (A0 - lambda) V1 = -B V0, where B is the c-derivative
    of the propagation matrix. With g the mode-1 damping entry,
    lambda_1 = g + i w1 and w2^2 + lambda_1^2 = rho_1 e^{i phi_1};
    mu = g - i w2 and w1^2 + mu^2 = -rho_2 e^{i phi_2}. The auxiliary phases
    are reported both ways: ``phi`` uses the quadrant-correct atan2 and
    ``varphi`` the single-branch arctangents.
    """
    w1, w2, g = params.omega1, params.omega2, params.gamma_entry
    if w1 == w2 and g == 0:
        raise DegeneratePerturbationError("omega1 == omega2 with no damping is degenerate")
    if params.c / min(w1, w2) > 0.3:
        warnings.warn("coupling is not small compared with the frequencies", RuntimeWarning)
    s2 = np.sqrt(2.0)
    lam1 = g + 1j * w1
    lam2 = 1j * w2
    z1 = w2 ** 2 + lam1 ** 2
    mu = g - 1j * w2
    z2 = -(w1 ** 2 + mu ** 2)
    rho1 = np.sqrt((w2 ** 2 - w1 ** 2 + g ** 2) ** 2 + (2 * w1 * g) ** 2)
    rho2 = np.sqrt((w2 ** 2 - w1 ** 2 - g ** 2) ** 2 + (2 * w2 * g) ** 2)
    phi1 = np.arctan2(2 * w1 * g, w2 ** 2 - w1 ** 2 + g ** 2)
    phi2 = np.arctan2(2 * w2 * g, w2 ** 2 - w1 ** 2 - g ** 2)
    varrho1 = np.sqrt(w1 ** 2 + g ** 2)
    varrho2 = np.sqrt(w2 ** 2 + g ** 2)
    varphi1 = np.arctan(w1 / g) if g else np.pi / 2
    varphi2 = -np.arctan(w2 / g) if g else -np.pi / 2
    V0p1 = np.array([1j, 0, 1, 0]) / s2
    V0p2 = np.array([0, 1j, 0, 1]) / s2
    V1p1 = np.array([0, -1j * w2 / (s2 * z1), 0, 1j * lam1 / (s2 * z1)])
    V1p2 = np.array([-1j * w1 / (s2 * (-z2)), 0, -1j * mu / (s2 * (-z2)), 0])
    lambda0 = {"1+": lam1, "1-": np.conj(lam1), "2+": lam2, "2-": np.conj(lam2)}
    V0 = {"1+": V0p1, "1-": V0p1.conj(), "2+": V0p2, "2-": V0p2.conj()}
    V1 = {"1+": V1p1, "1-": V1p1.conj(), "2+": V1p2, "2-": V1p2.conj()}
    return EigenmodeReport(lambda0, V0, V1, (rho1, rho2), (phi1, phi2), (varrho1, varrho2),
                           (varphi1, varphi2), g)


def eigenvector_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Angle between complex lines spanned by u and v."""
    c = abs(np.vdot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(min(1.0, c)))


# ---------------------------------------------------------------------------
# triatomic molecule

@dataclass(frozen=True)
class TriatomicParams:
    """Linear molecule: central mass m, end masses m_plus and m_minus, springs k."""

    m: float
    m_plus: float
    m_minus: float
    k: float

    def __post_init__(self):
        if min(self.m, self.m_plus, self.m_minus, self.k) <= 0:
            raise ValueError("masses and spring constant must be positive")

    @classmethod
    def co2_16_18(cls, omega0: float = 2.015e14) -> "TriatomicParams":
        """12C with 18O and 16O ends, masses in atomic units; k set to give ``omega0``."""
        M = 12.0 + 18.0 + 16.0
        return cls(12.0, 18.0, 16.0, M * omega0 ** 2)

    @property
    def M(self) -> float:
        return self.m + self.m_plus + self.m_minus

    @property
    def mu_plus(self) -> float:
        return self.m_plus / self.M

    @property
    def mu_minus(self) -> float:
        return self.m_minus / self.M

    @property
    def omega0(self) -> float:
        return float(np.sqrt(self.k / self.M))

    @property
    def a(self) -> float:
        up, um = self.mu_plus, self.mu_minus
        return (up - up ** 2) + (um - um ** 2) - 2 * up * um

    @property
    def b(self) -> float:
        up, um = self.mu_plus, self.mu_minus
        return (up - up ** 2) - (um - um ** 2) + 2 * up * um

    @property
    def epsilon(self) -> float:
        up, um = self.mu_plus, self.mu_minus
        return up - up ** 2 - um + um ** 2


@dataclass(frozen=True)
class TriatomicReduction:
    H2: np.ndarray
    scaling: np.ndarray
    H_scaled: np.ndarray
    pair: CoupledPairParams
    a: float
    b: float
    epsilon: float
    omega0: float
    c_from_h2: float


def triatomic_reduce(params: TriatomicParams, gamma: float = 0.0,
                     normalization: str = "literal") -> TriatomicReduction:
    """Coupled Hamiltonian of the stretching modes and its normal-form scaling.

    ``H2`` is the matrix of p1^2/2a + p2^2/2b - eps p1 p2/(ab) + w0^2 (q1^2 + q2^2)
    in (p1, p2, q1, q2) order. The symplectic scaling p_i -> s_i p_i,
    q_i -> q_i / s_i with s_i^2 = sqrt(2 a_i) w0 equalizes the p and q
    coefficients; ``H_scaled`` is the transformed matrix and ``c_from_h2`` its
    momentum-coupling entry. The pair parameters use the closed forms
    w1 = sqrt(2/a) w0, w2 = sqrt(2/b) w0, c = 2 sqrt(2) w0 eps / (ab)^(3/4).
    """
    a, b, eps, w0 = params.a, params.b, params.epsilon, params.omega0
    if a <= 0 or b <= 0:
        raise ValueError("mass combination gives non-positive a or b")
    H2 = np.array([
        [1 / a, -eps / (a * b), 0, 0],
        [-eps / (a * b), 1 / b, 0, 0],
        [0, 0, 2 * w0 ** 2, 0],
        [0, 0, 0, 2 * w0 ** 2],
    ])
    s = np.sqrt(np.sqrt(2 * np.array([a, b])) * w0)
    S = np.diag(np.concatenate([s, 1 / s]))
    if not is_symplectic(S, 1e-12):
        raise RuntimeError("scaling map is not symplectic")
    Hs = S.T @ H2 @ S
    w1 = np.sqrt(2 / a) * w0
    w2 = np.sqrt(2 / b) * w0
    c = 2 * np.sqrt(2) * w0 * eps / (a * b) ** 0.75
    pair = CoupledPairParams(w1, w2, c, gamma, normalization)
    return TriatomicReduction(H2, S, Hs, pair, a, b, eps, w0, float(Hs[0, 1]))


# ---------------------------------------------------------------------------
# chain

@dataclass(frozen=True)
class ChainParams:
    N_sites: int
    m: float = 1.0
    omega: float = 1.0
    alpha: float = 0.1
    gamma: float = 0.0
    nbar: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.N_sites < 2:
            raise ValueError("a chain needs at least two sites")
        if not abs(self.alpha) < self.omega:
            raise ValueError("|alpha| must be smaller than omega")
        if self.gamma < 0 or self.nbar < 0:
            raise ValueError("gamma and nbar must be non-negative")


def thermal_site_channels(N: int, site: int, m: float, omega: float, gamma: float, nbar: float) -> list:
    """Emission and absorption channels on one site, block (p, q) ordering."""
    mw = m * omega
    chans = []

    def vec(P, Qv):
        v = np.zeros(2 * N)
        v[site], v[N + site] = P, Qv
        return v

    if gamma * (nbar + 1) > 0:
        chans.append(LindbladVector(vec(0, np.sqrt(mw * gamma * (nbar + 1) / 2)),
                                    vec(np.sqrt(gamma * (nbar + 1) / (2 * mw)), 0)))
    if gamma * nbar > 0:
        chans.append(LindbladVector(vec(0, np.sqrt(mw * gamma * nbar / 2)),
                                    vec(-np.sqrt(gamma * nbar / (2 * mw)), 0)))
    return chans


def damped_oscillator(omega: float = 1.0, gamma: float = 0.1, nbar: float = 0.0, m: float = 1.0,
                      hbar: float = 1.0) -> OpenSystem:
    """Single mode H = p^2/2m + m w^2 q^2/2 with the thermal emission/absorption pair."""
    H = np.diag([1 / m, m * omega ** 2])
    return OpenSystem.from_matrices(H, thermal_site_channels(1, 0, m, omega, gamma, nbar), hbar)


def _chain_hamiltonian(N: int, m: float, omega: float, alpha: float) -> np.ndarray:
    H = np.zeros((2 * N, 2 * N))
    mw = m * omega
    for n in range(N):
        H[n, n] = 1 / m
        H[N + n, N + n] = m * omega ** 2
    for n in range(N - 1):
        H[n, n + 1] = H[n + 1, n] = alpha / (2 * mw)
        H[N + n, N + n + 1] = H[N + n + 1, N + n] = mw * alpha / 2
    return H


def chain_system(params: ChainParams) -> OpenSystem:
    """Nearest-neighbour chain, thermal channels on site 1 (block ordering)."""
    N = params.N_sites
    H = _chain_hamiltonian(N, params.m, params.omega, params.alpha)
    chans = thermal_site_channels(N, 0, params.m, params.omega, params.gamma, params.nbar)
    return OpenSystem.from_matrices(H, chans, params.hbar)


def chain_first_order(N: int, omega: float, alpha: float, gamma: float):
    """mu_k+- = +-i (w + alpha cos(k pi/(N+1))) + gamma sin^2(k pi/(N+1)) / (N+1)."""
    k = np.arange(1, N + 1)
    th = k * np.pi / (N + 1)
    re = gamma * np.sin(th) ** 2 / (N + 1)
    im = omega + alpha * np.cos(th)
    mu = np.concatenate([re + 1j * im, re - 1j * im])
    labels = [f"{kk}+" for kk in k] + [f"{kk}-" for kk in k]
    return mu, labels


def chain_spectrum(params: ChainParams, order: str = "both") -> SpectrumReport:
    if order not in ("exact", "first_order", "both"):
        raise ValueError("order must be 'exact', 'first_order' or 'both'")
    if params.gamma / abs(params.alpha) > 0.2 and order != "exact":
        warnings.warn("gamma/alpha above 0.2: first-order spectrum is unreliable", RuntimeWarning)
    exact = pert = labels = None
    if order in ("exact", "both"):
        exact = np.linalg.eigvals(propagation_matrix(chain_system(params)))
    if order in ("first_order", "both"):
        pert, labels = chain_first_order(params.N_sites, params.omega, params.alpha, params.gamma)
    return SpectrumReport.build(exact, pert, labels)


def chain_modes(N_sites: int) -> np.ndarray:
    """Columns V_k(n) = sqrt(2/(N+1)) sin(n k pi/(N+1)), n, k = 1..N."""
    n = np.arange(1, N_sites + 1)
    return np.sqrt(2 / (N_sites + 1)) * np.sin(np.outer(n, n) * np.pi / (N_sites + 1))


@dataclass(frozen=True)
class ToeplitzReport:
    exact: np.ndarray
    first_order: np.ndarray
    defect: float
    roots: np.ndarray


def toeplitz_root_equation(N_sites: int, sigma: complex, ramp_steps: int = 16) -> ToeplitzReport:
    """Spectrum of the tridiagonal matrix with corner entry sigma from r^{2N+2} - s r^{2N+1} + s r - 1 = 0.

    Roots are followed from sigma = 0 along a straight ramp by nearest
    neighbour matching; the branches starting at exp(i k pi/(N+1)),
    k = 1..N, give lambda_k = r + 1/r.
    """
    N = int(N_sites)
    if N < 2:
        raise ValueError("need N >= 2")
    if not abs(sigma) < 1:
        raise ValueError("|sigma| must be below 1")
    deg = 2 * N + 2
    r = np.exp(1j * np.pi * np.arange(deg) / (N + 1))
    for step in range(1, ramp_steps + 1):
        s = sigma * step / ramp_steps
        coeffs = np.zeros(deg + 1, dtype=complex)
        coeffs[0], coeffs[1], coeffs[-2], coeffs[-1] = 1, -s, s, -1
        new = np.roots(coeffs)
        rows, cols, dist = _pair_spectra(r, new)
        sep = np.min(np.abs(r[:, None] - r[None, :]) + np.eye(deg) * 10)
        if np.max(dist) > 0.5 * sep:
            raise RootTrackingError(f"root jump {np.max(dist):.3e} exceeds half the separation {sep:.3e}")
        r = new[cols]
    phys = r[1:N + 1]
    lam = phys + 1 / phys
    k = np.arange(1, N + 1)
    th = k * np.pi / (N + 1)
    lam1 = 2 * np.cos(th) + 2 * sigma * np.sin(th) ** 2 / (N + 1)
    return ToeplitzReport(lam, lam1, float(np.max(np.abs(lam - lam1))), phys)


def toeplitz_matrix(N_sites: int, sigma: complex) -> np.ndarray:
    A = np.diag(np.ones(N_sites - 1), 1) + np.diag(np.ones(N_sites - 1), -1)
    A = A.astype(complex)
    A[0, 0] = sigma
    return A


@dataclass(frozen=True)
class ChainEquilibriumReport:
    M_inf: np.ndarray
    site_block: np.ndarray
    thermal_block: np.ndarray
    width_rel_error: float
    mode_rel_error: float
    sigma_N: float


def sigma_N(N: int, site: int, alpha: float, gamma: float) -> float:
    """Double sum over modes for the width factor of site ``site`` (1-based)."""
    k = np.arange(1, N + 1)
    th = k * np.pi / (N + 1)
    s, c = np.sin(th), np.cos(th)
    sn = np.sin(site * th)
    s2 = s ** 2
    num = np.outer(s * sn, s * sn) * (s2[:, None] + s2[None, :])
    den = ((s2[:, None] + s2[None, :]) / (N + 1)) ** 2 + 4 * alpha ** 2 / gamma ** 2 * (c[:, None] - c[None, :]) ** 2
    return float(4 / (N + 1) ** 3 * np.sum(num / den))


def chain_equilibrium_checks(params: ChainParams, site: int) -> ChainEquilibriumReport:
    """Equilibrium of the chain compared with the thermal chord Gaussian.

    ``site`` is 1-based. The thermal target has exponent matrix
    (2 nbar + 1)/2 diag(1/(m w), m w) on each site.
    """
    N = params.N_sites
    if not 1 <= site <= N:
        raise ValueError("site out of range")
    M = equilibrium_decoherence_matrix(chain_system(params))
    if isinstance(M, Divergent):
        raise ValueError(f"no equilibrium: {M.reason}")
    mw = params.m * params.omega
    target = 0.5 * (2 * params.nbar + 1) * np.diag([1 / mw, mw])
    idx = [site - 1, N + site - 1]
    block = M[np.ix_(idx, idx)]
    width_err = float(np.max(np.abs(block - target)) / np.max(np.abs(target)))
    V = chain_modes(N)
    mode_err = 0.0
    for k in range(N):
        for comp in (0, 1):
            xi = np.zeros(2 * N)
            xi[comp * N:(comp + 1) * N] = V[:, k]
            got = xi @ M @ xi
            want = target[comp, comp]
            mode_err = max(mode_err, abs(got - want) / want)
    sig = sigma_N(N, site, params.alpha, params.gamma) if params.gamma > 0 else float("nan")
    return ChainEquilibriumReport(M, block, target, width_err, float(mode_err), sig)


# ---------------------------------------------------------------------------
# cubic network

CUBIC_EXACT_MAX_SIDE = 6


def cubic_network_system(N_side: int, omega: float, alpha: float, gamma: float, faces: str = "low",
                         m: float = 1.0, hbar: float = 1.0) -> OpenSystem:
    """Cubic lattice with nearest-neighbour hopping alpha/2 and zero-temperature damping on faces.

    ``faces="low"`` damps the three faces with a coordinate equal to 1, one
    channel per site and face; ``faces="both"`` also damps the three opposite faces.
    """
    if N_side > CUBIC_EXACT_MAX_SIDE:
        raise MemoryError(f"exact cubic network limited to side {CUBIC_EXACT_MAX_SIDE}")
    n = N_side
    Ns = n ** 3
    idx = lambda i, j, k: (i * n + j) * n + k  # noqa: E731
    H = np.zeros((2 * Ns, 2 * Ns))
    mw = m * omega
    for i in range(n):
        for j in range(n):
            for k in range(n):
                s = idx(i, j, k)
                H[s, s] = 1 / m
                H[Ns + s, Ns + s] = m * omega ** 2
                for di, dj, dk in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
                    a, b, c = i + di, j + dj, k + dk
                    if a < n and b < n and c < n:
                        t = idx(a, b, c)
                        H[s, t] = H[t, s] = alpha / (2 * mw)
                        H[Ns + s, Ns + t] = H[Ns + t, Ns + s] = mw * alpha / 2
    ends = (0,) if faces == "low" else (0, n - 1)
    if faces not in ("low", "both"):
        raise ValueError("faces must be 'low' or 'both'")
    chans = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                hits = sum(c in ends for c in (i, j, k)) if faces == "low" else \
                    sum((c == 0) + (c == n - 1) for c in (i, j, k))
                for _ in range(hits):
                    chans += thermal_site_channels(Ns, idx(i, j, k), m, omega, gamma, 0.0)
    return OpenSystem.from_matrices(H, chans, hbar)


def cubic_first_order(N_side: int, omega: float, alpha: float, gamma: float, faces: str = "low"):
    n = N_side
    th = np.arange(1, n + 1) * np.pi / (n + 1)
    per_face = 1 if faces == "low" else 2
    re, im, labels = [], [], []
    for a in range(n):
        for b in range(n):
            for c in range(n):
                re.append(per_face * gamma / (n + 1) * (np.sin(th[a]) ** 2 + np.sin(th[b]) ** 2 + np.sin(th[c]) ** 2))
                im.append(omega + alpha * (np.cos(th[a]) + np.cos(th[b]) + np.cos(th[c])))
                labels.append((a + 1, b + 1, c + 1))
    re, im = np.array(re), np.array(im)
    mu = np.concatenate([re + 1j * im, re - 1j * im])
    labels = [lab + ("+",) for lab in labels] + [lab + ("-",) for lab in labels]
    return mu, labels


def cubic_network_spectrum(N_side: int, omega: float, alpha: float, gamma: float, faces: str = "low",
                           exact: Optional[bool] = None) -> SpectrumReport:
    """First-order spectrum of the cubic network; exact eigenvalues too when N_side <= 6."""
    if N_side < 2:
        raise ValueError("need N_side >= 2")
    pert, labels = cubic_first_order(N_side, omega, alpha, gamma, faces)
    if exact is None:
        exact = N_side <= CUBIC_EXACT_MAX_SIDE
    ex = None
    if exact:
        ex = np.linalg.eigvals(propagation_matrix(cubic_network_system(N_side, omega, alpha, gamma, faces)))
    return SpectrumReport.build(ex, pert, labels)


def cubic_modes(N_side: int) -> np.ndarray:
    """Tensor-product mode vectors; column (a, b, c) flattened in the lattice index order."""
    V = chain_modes(N_side)
    return np.einsum("ia,jb,kc->ijkabc", V, V, V).reshape(N_side ** 3, N_side ** 3)

