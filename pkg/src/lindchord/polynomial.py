"""Sparse multivariate polynomials with complex coefficients.

Terms are stored as ``{exponent tuple: coefficient}``. Only the operations the
Gaussian-polynomial calculus needs are provided.
"""

from __future__ import annotations

from itertools import product as _iproduct
from math import factorial
from typing import Dict, Tuple

import numpy as np

Exponent = Tuple[int, ...]


class Poly:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Dict[Exponent, complex] | None = None):
        self.nvars = int(nvars)
        self.terms: Dict[Exponent, complex] = {}
        if terms:
            for e, c in terms.items():
                e = tuple(int(k) for k in e)
                if len(e) != self.nvars:
                    raise ValueError(f"exponent {e} does not have {self.nvars} entries")
                if c != 0:
                    self.terms[e] = self.terms.get(e, 0) + complex(c)

    # constructors --------------------------------------------------------
    @classmethod
    def constant(cls, nvars: int, c=1.0) -> "Poly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, i: int, c=1.0) -> "Poly":
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): c})

    @classmethod
    def linear(cls, coeffs, const=0.0) -> "Poly":
        coeffs = np.asarray(coeffs)
        n = coeffs.shape[0]
        out = cls.constant(n, const)
        for i, a in enumerate(coeffs):
            if a != 0:
                out.terms[tuple(1 if j == i else 0 for j in range(n))] = complex(a)
        return out

    # algebra -------------------------------------------------------------
    def copy(self) -> "Poly":
        p = Poly(self.nvars)
        p.terms = dict(self.terms)
        return p

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def constant_term(self) -> complex:
        return self.terms.get((0,) * self.nvars, 0j)

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(self.nvars, other)
        out = self.copy()
        for e, c in other.terms.items():
            out.terms[e] = out.terms.get(e, 0) + c
        return out._drop_zeros()

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, Poly) else -other)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            c = complex(other)
            if c == 0:
                return Poly(self.nvars)
            out = Poly(self.nvars)
            out.terms = {e: v * c for e, v in self.terms.items()}
            return out
        if other.nvars != self.nvars:
            raise ValueError("polynomials live in different numbers of variables")
        out: Dict[Exponent, complex] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        p = Poly(self.nvars)
        p.terms = out
        return p._drop_zeros()

    __rmul__ = __mul__

    def _drop_zeros(self) -> "Poly":
        self.terms = {e: c for e, c in self.terms.items() if c != 0}
        return self

    def conj(self) -> "Poly":
        out = Poly(self.nvars)
        out.terms = {e: np.conj(c) for e, c in self.terms.items()}
        return out

    def prune(self, rtol: float = 1e-15) -> "Poly":
        """Drop terms with |c| <= rtol * max|c| (cancellation residue)."""
        if not self.terms:
            return self.copy()
        big = max(abs(c) for c in self.terms.values())
        out = Poly(self.nvars)
        out.terms = {e: c for e, c in self.terms.items() if abs(c) > rtol * big}
        return out

    def pow(self, k: int) -> "Poly":
        out = Poly.constant(self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def derivative(self, i: int) -> "Poly":
        out = Poly(self.nvars)
        for e, c in self.terms.items():
            if e[i]:
                f = list(e)
                f[i] -= 1
                out.terms[tuple(f)] = out.terms.get(tuple(f), 0) + c * e[i]
        return out

    def truncate(self, max_degree: int) -> "Poly":
        out = Poly(self.nvars)
        out.terms = {e: c for e, c in self.terms.items() if sum(e) <= max_degree}
        return out

    def substitute_affine(self, B, b0=None) -> "Poly":
        """Return the polynomial u -> P(B u + b0), where B is (nvars, new_nvars)."""
        B = np.asarray(B)
        if B.shape[0] != self.nvars:
            raise ValueError("substitution matrix has wrong number of rows")
        m = B.shape[1]
        b0 = np.zeros(self.nvars) if b0 is None else np.asarray(b0)
        lin = [Poly.linear(B[i], b0[i]) for i in range(self.nvars)]
        powers = [dict() for _ in range(self.nvars)]

        def power(i, k):
            if k not in powers[i]:
                powers[i][k] = Poly.constant(m) if k == 0 else power(i, k - 1) * lin[i]
            return powers[i][k]

        out = Poly(m)
        for e, c in self.terms.items():
            term = Poly.constant(m, c)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            out = out + term
        return out

    def restrict(self, keep) -> "Poly":
        """Set the variables not in ``keep`` to zero; the result uses variables ``keep`` in order."""
        keep = list(keep)
        drop = [i for i in range(self.nvars) if i not in keep]
        out = Poly(len(keep))
        for e, c in self.terms.items():
            if all(e[i] == 0 for i in drop):
                f = tuple(e[i] for i in keep)
                out.terms[f] = out.terms.get(f, 0) + c
        return out._drop_zeros()

    def embed(self, nvars: int, positions) -> "Poly":
        """Inverse of :meth:`restrict`: variable i is renamed to positions[i] of nvars."""
        out = Poly(nvars)
        for e, c in self.terms.items():
            f = [0] * nvars
            for i, k in enumerate(e):
                f[positions[i]] = k
            out.terms[tuple(f)] = c
        return out

    def gaussian_smooth(self, G) -> "Poly":
        """exp(d.G d / 2) applied to the polynomial, for a symmetric (nvars, nvars) matrix G."""
        G = np.asarray(G)
        if G.shape != (self.nvars, self.nvars):
            raise ValueError("smoothing matrix has wrong shape")
        out = self.copy()
        term = self
        k = 0
        while term.terms:
            k += 1
            nxt: Dict[Exponent, complex] = {}
            for e, c in term.terms.items():
                live = [i for i, x in enumerate(e) if x]
                for i in live:
                    for j in live:
                        if j < i or (i == j and e[i] < 2) or G[i, j] == 0:
                            continue
                        f = list(e)
                        f[i] -= 1
                        f[j] -= 1
                        # off-diagonal pairs appear twice in d.G d
                        w = e[i] * (e[i] - 1) if i == j else 2 * e[i] * e[j]
                        f = tuple(f)
                        nxt[f] = nxt.get(f, 0) + 0.5 * w * G[i, j] * c
            term = Poly(self.nvars)
            term.terms = {e: c / k for e, c in nxt.items() if c != 0}
            out = out + term
        return out

    def coefficient(self, e) -> complex:
        return self.terms.get(tuple(e), 0j)

    def __call__(self, u):
        """Evaluate at points u of shape (..., nvars)."""
        u = np.asarray(u)
        if u.shape[-1] != self.nvars:
            raise ValueError(f"points have {u.shape[-1]} coordinates, polynomial has {self.nvars}")
        out = np.zeros(u.shape[:-1], dtype=complex)
        if not self.terms:
            return out
        maxdeg = [max(e[i] for e in self.terms) for i in range(self.nvars)]
        pw = [[np.ones(u.shape[:-1])] for _ in range(self.nvars)]
        for i in range(self.nvars):
            for _ in range(maxdeg[i]):
                pw[i].append(pw[i][-1] * u[..., i])
        for e, c in self.terms.items():
            term = np.full(u.shape[:-1], c, dtype=complex)
            for i, k in enumerate(e):
                if k:
                    term = term * pw[i][k]
            out += term
        return out

    def __repr__(self):
        return f"Poly({self.nvars}, {self.terms!r})"


def multi_indices(nvars: int, max_degree: int):
    """All exponent tuples of total degree <= max_degree, graded then lexicographic."""
    out = []
    for e in _iproduct(range(max_degree + 1), repeat=nvars):
        if sum(e) <= max_degree:
            out.append(e)
    out.sort(key=lambda e: (sum(e), tuple(-k for k in e)))
    return out


def exp_series(linear_part: "Poly", quadratic_part: "Poly", max_degree: int) -> "Poly":
    """Taylor polynomial of exp(g) to total degree max_degree, g = linear + quadratic (no constant)."""
    g = linear_part + quadratic_part
    if abs(g.constant_term()) > 0:
        raise ValueError("exponent must vanish at the origin")
    out = Poly.constant(g.nvars)
    term = Poly.constant(g.nvars)
    for k in range(1, max_degree + 1):
        term = (term * g).truncate(max_degree) * (1.0 / k)
        if not term.terms:
            break
        out = out + term
    return out


def multi_factorial(e) -> int:
    out = 1
    for k in e:
        out *= factorial(k)
    return out
