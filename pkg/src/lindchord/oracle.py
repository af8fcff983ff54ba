"""Brute-force reference: the Lindblad master equation in a truncated Fock basis.

Everything here works with dense operators and shares no state algebra with
:mod:`lindchord.states`. The dissipator is

    sum_j kappa (2 L rho L^+ - L^+ L rho - rho L^+ L),    kappa = 1 / (2 hbar),

where ``L = (l' + i l'') . x`` is built from position and momentum matrices.
The rate constant was fixed by comparing the damped-oscillator mean and
variance with the chord-space solution (see ``tests/test_oracle.py``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce as _fold
from itertools import permutations
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .lindblad import OpenSystem
from .symplectic import matrix_exponential

KAPPA_HBAR = 0.5  # kappa * hbar


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class FockTruncation:
    cutoffs: tuple
    m_omega: tuple = ()
    cap: int = 4096

    def __post_init__(self):
        cut = tuple(int(d) for d in self.cutoffs)
        if any(d < 2 for d in cut):
            raise ValueError("each mode needs at least two levels")
        s = tuple(float(x) for x in self.m_omega) if self.m_omega else (1.0,) * len(cut)
        if len(s) != len(cut):
            raise ValueError("one m*omega scale per mode")
        if int(np.prod(cut)) > self.cap:
            raise OracleError(f"total dimension {int(np.prod(cut))} exceeds cap {self.cap}")
        object.__setattr__(self, "cutoffs", cut)
        object.__setattr__(self, "m_omega", s)

    @classmethod
    def uniform(cls, N: int, cutoff: int, **kw) -> "FockTruncation":
        return cls((cutoff,) * N, **kw)

    @property
    def N(self) -> int:
        return len(self.cutoffs)

    @property
    def dim(self) -> int:
        return int(np.prod(self.cutoffs))


def _annihilation(d: int):
    return sp.diags(np.sqrt(np.arange(1, d)), 1, shape=(d, d), format="csr", dtype=complex)


def _embed(op, k: int, cutoffs):
    mats = [op if j == k else sp.identity(d, dtype=complex, format="csr") for j, d in enumerate(cutoffs)]
    return _fold(lambda a, b: sp.kron(a, b, format="csr"), mats)


def ladder_operators(trunc: FockTruncation) -> list:
    return [_embed(_annihilation(d), k, trunc.cutoffs) for k, d in enumerate(trunc.cutoffs)]


def phase_space_operators(trunc: FockTruncation, hbar: float = 1.0) -> list:
    """Sparse matrices for (p_1..p_N, q_1..q_N): q = sqrt(hbar/2s)(a + a^+), p = i sqrt(hbar s/2)(a^+ - a)."""
    a = ladder_operators(trunc)
    ps, qs = [], []
    for ak, s in zip(a, trunc.m_omega):
        ad = ak.conj().T.tocsr()
        qs.append(np.sqrt(hbar / (2 * s)) * (ak + ad))
        ps.append(1j * np.sqrt(hbar * s / 2) * (ad - ak))
    return ps + qs


@dataclass(frozen=True)
class Operators:
    H: np.ndarray
    L: tuple
    x: tuple


def build_operators(system: OpenSystem, trunc: FockTruncation) -> Operators:
    """Weyl-symmetrized H = sum_ij H_ij (x_i x_j + x_j x_i)/4 and L_j = l_j . x."""
    if trunc.N != system.N:
        raise OracleError("truncation and system have different numbers of modes")
    x = phase_space_operators(trunc, system.hbar)
    n = 2 * system.N
    Hop = sp.csr_matrix((trunc.dim, trunc.dim), dtype=complex)
    for i in range(n):
        for j in range(n):
            if system.H[i, j] != 0:
                Hop = Hop + 0.25 * system.H[i, j] * (x[i] @ x[j] + x[j] @ x[i])
    Ls = []
    for c in system.channels:
        l = c.complex
        L = sp.csr_matrix((trunc.dim, trunc.dim), dtype=complex)
        for i in range(n):
            if l[i] != 0:
                L = L + l[i] * x[i]
        Ls.append(L.tocsr())
    Hop = (0.5 * (Hop + Hop.conj().T)).tocsr()
    return Operators(Hop, tuple(Ls), tuple(x))


def fock_density(trunc: FockTruncation, occupations: Sequence[int]) -> np.ndarray:
    idx = 0
    for k, (n, d) in enumerate(zip(occupations, trunc.cutoffs)):
        if not 0 <= n < d:
            raise OracleError(f"occupation {n} does not fit cutoff {d}")
        idx = idx * d + n
    rho = np.zeros((trunc.dim, trunc.dim), dtype=complex)
    rho[idx, idx] = 1.0
    return rho


def coherent_density(trunc: FockTruncation, alphas: Sequence[complex]) -> np.ndarray:
    """Product of coherent states a|alpha> = alpha|alpha>, renormalized after truncation."""
    vecs = []
    for alpha, d in zip(alphas, trunc.cutoffs):
        n = np.arange(d)
        logfact = np.cumsum(np.log(np.maximum(n, 1)))
        amp = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * logfact) * np.power(complex(alpha), n)
        vecs.append(amp)
    psi = _fold(np.kron, vecs)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def thermal_density(trunc: FockTruncation, nbar: Sequence[float]) -> np.ndarray:
    diags = []
    for nb, d in zip(nbar, trunc.cutoffs):
        if nb == 0:
            p = np.zeros(d)
            p[0] = 1.0
        else:
            r = nb / (nb + 1)
            p = r ** np.arange(d) / (nb + 1)
        diags.append(p / p.sum())
    return np.diag(_fold(np.kron, diags)).astype(complex)


def _liouvillian(ops: Operators, hbar: float, kappa_hbar: float = KAPPA_HBAR):
    """Liouvillian as one sparse matrix acting on row-major vec(rho)."""
    kappa = kappa_hbar / hbar
    Heff = ops.H.copy()
    for L in ops.L:
        Heff = Heff - 1j * hbar * kappa * (L.conj().T @ L)
    A = (-1j / hbar * Heff).tocsr()
    eye = sp.identity(A.shape[0], dtype=complex, format="csr")
    # vec(X rho Y) = (X kron Y^T) vec(rho) for row-major vec
    S = sp.kron(A, eye) + sp.kron(eye, A.conj())
    for L in ops.L:
        S = S + 2 * kappa * sp.kron(L, L.conj())
    return S.tocsr()


def _reachable(S, v0: np.ndarray) -> np.ndarray:
    """Indices of vec(rho) that can become nonzero when starting from the support of v0.

    Entries outside this set are never written by the exact flow nor by any
    RK stage, so integrating on the subset is exact.
    """
    G = (abs(S) > 0).astype(np.int8).tocsr()
    mask = np.abs(v0) > 0
    while True:
        new = mask | ((G @ mask.astype(np.int8)) > 0)
        if np.array_equal(new, mask):
            return np.flatnonzero(mask)
        mask = new


def _rk4_run(S, v: np.ndarray, t: float, steps: int, marks=()):
    """Fixed-step RK4 for dv/dt = S v; returns copies of v after the step counts in ``marks``."""
    h = t / steps
    v = v.copy()
    snaps = {}
    for k in range(steps):
        k1 = S @ v
        acc = k1.copy()
        k2 = S @ (v + (0.5 * h) * k1)
        acc += 2 * k2
        k3 = S @ (v + (0.5 * h) * k2)
        acc += 2 * k3
        acc += S @ (v + h * k3)
        v += (h / 6.0) * acc
        if (k + 1) in marks:
            snaps[k + 1] = v.copy()
    return snaps


def expectation(rho: np.ndarray, op) -> complex:
    """tr(rho op) for sparse or dense op."""
    if sp.issparse(op):
        return complex(op.multiply(rho.T).sum())
    return complex(np.trace(rho @ op))


def _observables(rho, x):
    vals = [np.trace(rho).real]
    vals += [expectation(rho, xi).real for xi in x]
    for i in range(len(x)):
        for j in range(i, len(x)):
            vals.append(expectation(rho, x[i] @ x[j] + x[j] @ x[i]).real / 2)
    return np.array(vals)


def integrate(system: OpenSystem, trunc: FockTruncation, rho0: np.ndarray, times, dt: float = 0.05,
              tol: float = 1e-8, max_halvings: int = 8, kappa_hbar: float = KAPPA_HBAR) -> list:
    """Density matrices at the given times (ascending, >= 0) by fixed-step RK4.

    The step is halved until first and second moments at every requested time
    change by less than ``tol`` between successive refinements.
    ``kappa_hbar`` overrides the dissipator rate (used only by the calibration).
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.diff(times) < 0) or np.any(times < 0):
        raise ValueError("times must be non-negative and ascending")
    rho0 = np.asarray(rho0, dtype=complex)
    if abs(np.trace(rho0) - 1) > 1e-10 or np.max(np.abs(rho0 - rho0.conj().T)) > 1e-10:
        raise OracleError("initial density matrix must be Hermitian with unit trace")
    ops = build_operators(system, trunc)
    S = _liouvillian(ops, system.hbar, kappa_hbar)
    d = trunc.dim
    v0 = rho0.ravel()
    idx = _reachable(S, v0)
    S_sub = S[idx][:, idx].tocsr()
    w0 = v0[idx].copy()

    def unpack(w):
        v = np.zeros(d * d, dtype=complex)
        v[idx] = w
        r = v.reshape(d, d)
        return 0.5 * (r + r.conj().T)

    t_end = float(times[-1]) if times.size else 0.0
    if t_end == 0:
        return [rho0.copy() for _ in times]
    prev = None
    h = dt
    for _ in range(max_halvings + 1):
        steps = int(np.ceil(t_end / h))
        h_eff = t_end / steps
        ks = [int(round(t / h_eff)) for t in times]
        if any(abs(k * h_eff - t) > 1e-12 * max(1.0, t_end) for k, t in zip(ks, times)):
            # requested time not on the step lattice: refine until it is
            h /= 2
            continue
        snaps = _rk4_run(S_sub, w0, t_end, steps, set(ks))
        out = [rho0.copy() if k == 0 else unpack(snaps[k]) for k in ks]
        obs = np.array([_observables(r, ops.x) for r in out])
        if prev is not None and np.max(np.abs(obs - prev)) < tol:
            for r in out:
                drift = abs(np.trace(r).real - 1)
                if drift > 1e-5:
                    raise OracleError(f"trace drift {drift:.2e}: cutoff too small or step failure")
            return out
        prev = obs
        h /= 2
    raise OracleError("step halving did not converge")


def extract_chord(rho: np.ndarray, trunc: FockTruncation, xi, hbar: float = 1.0, pad: int = 24) -> complex:
    """chi(xi) = (2 pi hbar)^-N tr[rho exp(-(i/hbar)(xi_p.q - xi_q.p))].

    The displacement is exponentiated in a space padded by ``pad`` levels per
    mode and cropped back, which keeps truncation error out of the matrix
    elements within the reliable window.
    """
    xi = np.asarray(xi, dtype=float)
    N = trunc.N
    big = FockTruncation(tuple(d + pad for d in trunc.cutoffs), trunc.m_omega, cap=10 ** 9)
    D = np.array([[1.0 + 0j]])
    for k in range(N):
        single = FockTruncation((big.cutoffs[k],), (trunc.m_omega[k],), cap=10 ** 9)
        p, q = phase_space_operators(single, hbar)
        gen = (-(1j / hbar) * (xi[k] * q - xi[N + k] * p)).toarray()
        Dk = matrix_exponential(gen)[: trunc.cutoffs[k], : trunc.cutoffs[k]]
        D = np.kron(D, Dk)
    return complex(np.trace(rho @ D) / (2 * np.pi * hbar) ** N)


def weyl_product(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Average of the operator product over all orderings of the factors."""
    perms = sorted(set(permutations(range(len(ops)))))
    acc = None
    for pm in perms:
        term = _fold(lambda a, b: a @ b, [ops[i] for i in pm])
        acc = term if acc is None else acc + term
    return acc / len(perms)


def extract_moments(rho: np.ndarray, trunc: FockTruncation, alpha, hbar: float = 1.0) -> float:
    """tr[rho x^alpha] with the product Weyl-symmetrized."""
    x = phase_space_operators(trunc, hbar)
    factors = []
    for i, k in enumerate(alpha):
        factors += [x[i]] * int(k)
    if not factors:
        return float(np.trace(rho).real)
    return float(expectation(rho, weyl_product(factors)).real)


def purity(rho: np.ndarray) -> float:
    return float(np.trace(rho @ rho).real)


def partial_trace(rho: np.ndarray, trunc: FockTruncation, keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of the modes in ``keep``."""
    N = trunc.N
    dims = trunc.cutoffs
    r = rho.reshape(dims + dims)
    keep = sorted(keep)
    drop = [k for k in range(N) if k not in keep]
    # trace out the last dropped axis first so indices stay valid
    cur_N = N
    axes = list(range(N))
    for k in sorted(drop, reverse=True):
        pos = axes.index(k)
        r = np.trace(r, axis1=pos, axis2=pos + cur_N)
        axes.pop(pos)
        cur_N -= 1
    d = int(np.prod([dims[k] for k in keep]))
    return r.reshape(d, d)
