"""Uniform phase-space grids, their discrete symplectic Fourier transform and the PSGRID01 file format.

Axis k has ``count`` points ``center - half_width + j * delta`` with
``delta = 2 half_width / count``, so the centre is sampled exactly at
``j = count / 2``. Axes follow the phase-space ordering (p_1..p_N, q_1..q_N)
and values are stored row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAGIC = b"PSGRID01"
REP_TAGS = {"chord": 0, "wigner": 1}


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    centers: tuple
    half_widths: tuple
    counts: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.centers)
        h = tuple(float(x) for x in self.half_widths)
        n = tuple(int(x) for x in self.counts)
        if not (len(c) == len(h) == len(n)) or len(c) % 2:
            raise GridError("grid needs an even number of axes with matching centre/width/count")
        for k in n:
            if k < 8 or k & (k - 1):
                raise GridError(f"axis point counts must be powers of two >= 8, got {k}")
        if any(not w > 0 for w in h):
            raise GridError("half-widths must be positive")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "half_widths", h)
        object.__setattr__(self, "counts", n)

    @classmethod
    def uniform(cls, N: int, half_width: float, count: int, center=0.0) -> "GridSpec":
        c = np.broadcast_to(np.asarray(center, dtype=float), (2 * N,))
        return cls(tuple(c), (half_width,) * (2 * N), (count,) * (2 * N))

    @property
    def N(self) -> int:
        return len(self.counts) // 2

    @property
    def spacings(self) -> tuple:
        return tuple(2 * h / n for h, n in zip(self.half_widths, self.counts))

    def axes(self) -> list:
        return [c - h + np.arange(n) * (2 * h / n) for c, h, n in zip(self.centers, self.half_widths, self.counts)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))


@dataclass(frozen=True)
class PhaseSpaceGrid:
    spec: GridSpec
    values: np.ndarray
    rep: str

    def __post_init__(self):
        if self.rep not in REP_TAGS:
            raise GridError(f"unknown representation {self.rep!r}")
        vals = np.asarray(self.values)
        if vals.shape != self.spec.counts:
            raise GridError(f"values shape {vals.shape} does not match grid {self.spec.counts}")
        vals = vals.astype(float if self.rep == "wigner" else complex)
        object.__setattr__(self, "values", vals)

    @property
    def N(self) -> int:
        return self.spec.N

    def integral(self) -> complex:
        return self.values.sum() * self.spec.cell_volume


def default_grid_spec(K, hbar: float = 1.0, count: int = 64, sigmas: float = 6.0) -> GridSpec:
    """Box of +-sigmas * sqrt(hbar * largest Williamson frequency of K) on every axis."""
    from .symplectic import williamson_frequencies

    w = williamson_frequencies(np.asarray(K, dtype=float) / hbar, allow_semidefinite=True)
    half = sigmas * np.sqrt(hbar * max(w[-1], 1e-300))
    N = np.asarray(K).shape[0] // 2
    return GridSpec.uniform(N, half, count)


def sample_grid(state, spec: GridSpec, rtol_imag: float = 1e-10) -> PhaseSpaceGrid:
    """Evaluate a closed-form state on the grid; Wigner values must be real."""
    if spec.N != state.N:
        raise GridError(f"grid has {spec.N} modes, state has {state.N}")
    vals = state(spec.points())
    if state.rep == "wigner":
        scale = max(np.max(np.abs(vals.real)), 1e-300)
        if np.max(np.abs(vals.imag)) > rtol_imag * scale:
            raise GridError("Wigner function has a non-negligible imaginary part")
        vals = vals.real
    return PhaseSpaceGrid(spec, vals, state.rep)


def _axis_transform(g: np.ndarray, axis: int, sign: int, center_in: float, delta: float, hbar: float):
    """sum_j g_j exp(i sign s_m u_j / hbar) delta on the centred output axis s_m = (m - n/2) ds."""
    n = g.shape[axis]
    if sign < 0:
        G = np.fft.fft(g, axis=axis)
    else:
        G = np.fft.ifft(g, axis=axis) * n
    G = np.fft.fftshift(G, axes=axis)
    mprime = np.arange(n) - n // 2
    ds = 2 * np.pi * hbar / (n * delta)
    s = mprime * ds
    phase = ((-1.0) ** mprime) * np.exp(1j * sign * s * center_in / hbar) * delta
    shape = [1] * g.ndim
    shape[axis] = n
    return G * phase.reshape(shape), ds


def grid_fourier(grid: PhaseSpaceGrid, hbar: float = 1.0) -> PhaseSpaceGrid:
    """Discrete version of F(s) = (2 pi hbar)^-N int f(u) exp[(i/hbar) s.Ju] du.

    Since s.Ju = s_q.u_p - s_p.u_q, output axis p_i comes from input axis q_i
    (kernel sign -) and output axis q_i from input axis p_i (sign +). The
    output box is centred at the origin with spacing 2 pi hbar / (n delta).
    """
    spec = grid.spec
    N = spec.N
    vals = grid.values.astype(complex)
    deltas = spec.spacings
    ds = [0.0] * (2 * N)
    for i in range(N):
        vals, ds[N + i] = _axis_transform(vals, i, +1, spec.centers[i], deltas[i], hbar)
        vals, ds[i] = _axis_transform(vals, N + i, -1, spec.centers[N + i], deltas[N + i], hbar)
    perm = list(range(N, 2 * N)) + list(range(N))
    vals = np.transpose(vals, perm) * (2 * np.pi * hbar) ** (-N)
    counts = tuple(spec.counts[k] for k in perm)
    # after the permutation, output axis k came from input axis perm[k]
    out_ds = [None] * (2 * N)
    for i in range(N):
        out_ds[i] = ds[i]
        out_ds[N + i] = ds[N + i]
    half = tuple(0.5 * n * d for n, d in zip(counts, out_ds))
    out_spec = GridSpec((0.0,) * (2 * N), half, counts)
    rep = "wigner" if grid.rep == "chord" else "chord"
    if rep == "wigner":
        vals = vals.real
    return PhaseSpaceGrid(out_spec, vals, rep)


def write_psgrid(path, grid: PhaseSpaceGrid) -> None:
    """Write the PSGRID01 binary layout (little-endian throughout)."""
    spec = grid.spec
    parts = [MAGIC, struct.pack("<I", spec.N)]
    for c, h, n in zip(spec.centers, spec.half_widths, spec.counts):
        parts.append(struct.pack("<ddI", c, h, n))
    parts.append(struct.pack("<B", REP_TAGS[grid.rep]))
    if grid.rep == "chord":
        parts.append(np.ascontiguousarray(grid.values, dtype="<c16").tobytes())
    else:
        parts.append(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_psgrid(path) -> PhaseSpaceGrid:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise GridError("not a PSGRID01 file")
    (N,) = struct.unpack_from("<I", data, 8)
    off = 12
    centers, halves, counts = [], [], []
    for _ in range(2 * N):
        c, h, n = struct.unpack_from("<ddI", data, off)
        off += struct.calcsize("<ddI")
        centers.append(c)
        halves.append(h)
        counts.append(n)
    (tag,) = struct.unpack_from("<B", data, off)
    off += 1
    rep = {v: k for k, v in REP_TAGS.items()}.get(tag)
    if rep is None:
        raise GridError(f"unknown representation tag {tag}")
    dtype = "<c16" if rep == "chord" else "<f8"
    vals = np.frombuffer(data, dtype=dtype, offset=off).reshape(counts)
    return PhaseSpaceGrid(GridSpec(tuple(centers), tuple(halves), tuple(counts)), vals.copy(), rep)


def marginal(grid: PhaseSpaceGrid, keep_modes: Sequence[int]) -> PhaseSpaceGrid:
    """Integrate a Wigner grid over the modes not in ``keep_modes``."""
    N = grid.N
    keep_modes = list(keep_modes)
    drop = [k for k in range(N) if k not in keep_modes]
    axes_drop = drop + [N + k for k in drop]
    d = grid.spec.spacings
    vals = grid.values.sum(axis=tuple(axes_drop)) * np.prod([d[a] for a in axes_drop])
    keep_axes = keep_modes + [N + k for k in keep_modes]
    spec = grid.spec
    sub = GridSpec(tuple(spec.centers[a] for a in keep_axes), tuple(spec.half_widths[a] for a in keep_axes),
                   tuple(spec.counts[a] for a in keep_axes))
    if sorted(keep_modes) != keep_modes:
        raise GridError("keep_modes must be ascending")
    return PhaseSpaceGrid(sub, vals, grid.rep)
