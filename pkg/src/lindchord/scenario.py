"""Scenario files: flat ``key = value`` text with dotted sections and ``#`` comments.

A scenario names a system, an initial state, a list of times and the outputs
to produce. ``sweep.<key> = v1, v2, ...`` repeats the run once per value of a
single key. Parse and validation failures raise :class:`ScenarioError`
carrying the offending line number and field path.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lindblad import LindbladVector, OpenSystem
from .states import CHORD, coherent_state, fock_state, product_state, symplectic_fourier, thermal_state
from .systems import (
    ChainParams,
    CoupledPairParams,
    TriatomicParams,
    chain_system,
    coupled_pair,
    cubic_network_system,
    damped_oscillator,
    triatomic_reduce,
)

SYSTEM_KINDS = ("coupled_pair", "chain", "cubic", "damped_oscillator", "triatomic", "custom_matrices")
STATE_KINDS = ("fock", "coherent", "thermal", "product")


class ScenarioError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(key)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


@dataclass
class Entries:
    """Raw key/value pairs with their line numbers; tracks which keys were consumed."""

    values: dict
    lines: dict
    used: set = field(default_factory=set)

    def has(self, key: str) -> bool:
        return key in self.values

    def raw(self, key: str, default=None):
        if key not in self.values:
            return default
        self.used.add(key)
        return self.values[key]

    def fail(self, key: str, message: str):
        raise ScenarioError(message, self.lines.get(key), key)

    def text(self, key: str, default=None, choices=None) -> Optional[str]:
        v = self.raw(key, default)
        if v is None:
            return None
        if choices is not None and v not in choices:
            self.fail(key, f"expected one of {', '.join(choices)}, got {v!r}")
        return v

    def number(self, key: str, default=None) -> Optional[float]:
        v = self.raw(key)
        if v is None:
            if default is None:
                self.fail(key, "required field missing")
            return default
        try:
            x = float(v)
        except ValueError:
            self.fail(key, f"not a number: {v!r}")
        if not np.isfinite(x):
            self.fail(key, "must be finite")
        return x

    def integer(self, key: str, default=None) -> Optional[int]:
        v = self.raw(key)
        if v is None:
            if default is None:
                self.fail(key, "required field missing")
            return default
        try:
            return int(v)
        except ValueError:
            self.fail(key, f"not an integer: {v!r}")

    def flag(self, key: str, default: bool = False) -> bool:
        v = self.raw(key)
        if v is None:
            return default
        if v.lower() in ("true", "yes", "1", "on"):
            return True
        if v.lower() in ("false", "no", "0", "off"):
            return False
        self.fail(key, f"not a boolean: {v!r}")

    def numbers(self, key: str, default=None) -> Optional[list]:
        v = self.raw(key)
        if v is None:
            return default
        try:
            return [float(x) for x in v.split(",") if x.strip()]
        except ValueError:
            self.fail(key, f"not a comma-separated number list: {v!r}")

    def words(self, key: str, default=None) -> Optional[list]:
        v = self.raw(key)
        if v is None:
            return default
        return [w.strip() for w in v.split(",") if w.strip()]

    def matrix(self, key: str) -> np.ndarray:
        v = self.raw(key)
        if v is None:
            self.fail(key, "required field missing")
        try:
            rows = [[float(x) for x in r.split(",")] for r in v.split(";") if r.strip()]
            return np.array(rows, dtype=float)
        except ValueError:
            self.fail(key, f"not a matrix (rows separated by ';'): {v!r}")

    def subsets(self, key: str, N: int) -> list:
        """'1; 2; 1,2' -> [[0], [1], [0, 1]] (1-based in the file)."""
        v = self.raw(key)
        if v is None:
            return []
        out = []
        for part in v.split(";"):
            try:
                modes = sorted({int(x) - 1 for x in part.split(",") if x.strip()})
            except ValueError:
                self.fail(key, f"not a mode list: {part!r}")
            if not modes or modes[0] < 0 or modes[-1] >= N:
                self.fail(key, f"mode indices must lie in 1..{N}")
            out.append(modes)
        return out


def parse_text(text: str) -> Entries:
    values, lines = {}, {}
    for n, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ScenarioError("expected 'key = value'", n)
        if any(not part.replace("_", "").isalnum() for part in key.split(".")):
            raise ScenarioError("malformed key", n, key)
        if key in values:
            raise ScenarioError(f"duplicate key (first on line {lines[key]})", n, key)
        values[key] = value
        lines[key] = n
    return Entries(values, lines)


@dataclass(frozen=True)
class Outputs:
    moments: tuple = ()
    purity: bool = False
    entropy: tuple = ()
    reduced_wigner: tuple = ()
    wigner: bool = False
    chord: bool = False
    spectrum: Optional[str] = None
    positivity: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str
    label: str
    system: OpenSystem
    system_kind: str
    system_params: dict
    state: object
    state_desc: dict
    times: tuple
    grid_count: int
    grid_half_width: Optional[float]
    outputs: Outputs
    positivity_t_max: float
    positivity_threshold: float
    oracle_compare: bool
    oracle_cutoff: int
    source_hash: str


def _build_system(e: Entries):
    kind = e.text("system.kind", choices=SYSTEM_KINDS)
    if kind is None:
        e.fail("system.kind", "required field missing")
    hbar = e.number("hbar", 1.0)
    if not hbar > 0:
        e.fail("hbar", "must be positive")
    try:
        if kind == "coupled_pair":
            p = CoupledPairParams(e.number("system.omega1"), e.number("system.omega2"),
                                  e.number("system.c", 0.0), e.number("system.gamma", 0.0),
                                  e.text("system.normalization", "literal", ("literal", "matrix")), hbar)
            return kind, coupled_pair(p), {"m_omega": (1.0, 1.0)}
        if kind == "triatomic":
            tp = TriatomicParams(e.number("system.m"), e.number("system.m_plus"),
                                 e.number("system.m_minus"), e.number("system.k"))
            red = triatomic_reduce(tp, e.number("system.gamma", 0.0),
                                   e.text("system.normalization", "literal", ("literal", "matrix")))
            pair = red.pair
            p = CoupledPairParams(pair.omega1, pair.omega2, pair.c, pair.gamma, pair.normalization, hbar)
            return kind, coupled_pair(p), {"m_omega": (1.0, 1.0), "reduction": red}
        if kind == "chain":
            p = ChainParams(e.integer("system.n_sites"), e.number("system.m", 1.0), e.number("system.omega", 1.0),
                            e.number("system.alpha"), e.number("system.gamma", 0.0), e.number("system.nbar", 0.0),
                            hbar)
            return kind, chain_system(p), {"params": p, "m_omega": (p.m * p.omega,) * p.N_sites}
        if kind == "cubic":
            n = e.integer("system.n_side")
            omega, alpha, gamma = e.number("system.omega", 1.0), e.number("system.alpha"), e.number("system.gamma", 0.0)
            faces = e.text("system.faces", "low", ("low", "both"))
            sys_ = cubic_network_system(n, omega, alpha, gamma, faces, hbar=hbar)
            return kind, sys_, {"n_side": n, "omega": omega, "alpha": alpha, "gamma": gamma, "faces": faces,
                                "m_omega": (omega,) * n ** 3}
        if kind == "damped_oscillator":
            m, omega = e.number("system.m", 1.0), e.number("system.omega", 1.0)
            sys_ = damped_oscillator(omega, e.number("system.gamma"), e.number("system.nbar", 0.0), m, hbar)
            return kind, sys_, {"m_omega": (m * omega,)}
        H = e.matrix("system.H")
        chans = []
        k = 1
        while e.has(f"system.channel{k}.re") or e.has(f"system.channel{k}.im"):
            n2 = H.shape[0]
            re = e.numbers(f"system.channel{k}.re", [0.0] * n2)
            im = e.numbers(f"system.channel{k}.im", [0.0] * n2)
            chans.append(LindbladVector(re, im))
            k += 1
        sys_ = OpenSystem.from_matrices(H, chans, hbar)
        return kind, sys_, {"m_omega": (1.0,) * sys_.N}
    except ScenarioError:
        raise
    except (ValueError, MemoryError) as exc:
        raise ScenarioError(str(exc), e.lines.get("system.kind"), "system") from exc


def _mode_state(e: Entries, prefix: str, N: int, hbar: float, m_omega):
    """State on N modes from ``<prefix>.fock``, ``.coherent`` or ``.thermal``."""
    present = [k for k in ("fock", "coherent", "thermal") if e.has(f"{prefix}.{k}")]
    if len(present) != 1:
        e.fail(prefix, "give exactly one of fock, coherent, thermal")
    kind = present[0]
    key = f"{prefix}.{kind}"
    vals = e.numbers(key)
    if kind != "coherent" and len(vals) == 1:
        vals = vals * N
    if kind == "fock":
        if len(vals) != N or any(v < 0 or v != int(v) for v in vals):
            e.fail(key, f"need {N} non-negative integer occupations")
        return fock_state(N, [int(v) for v in vals], hbar, m_omega), {"kind": kind, "occupations": [int(v) for v in vals]}
    if kind == "coherent":
        if len(vals) != 2 * N:
            e.fail(key, f"need {2 * N} centre coordinates (p..., q...)")
        s = np.sqrt(np.asarray(m_omega, dtype=float))
        S = np.diag(np.concatenate([1 / s, s]))
        return coherent_state(N, np.array(vals), S, hbar), {"kind": kind, "eta": vals}
    if len(vals) != N or any(v < 0 for v in vals):
        e.fail(key, f"need {N} non-negative occupations")
    mw = np.asarray(m_omega, dtype=float)
    return thermal_state(N, vals, m=mw, omega=1.0, hbar=hbar), {"kind": kind, "nbar": vals}


def _build_state(e: Entries, system: OpenSystem, m_omega):
    N, hbar = system.N, system.hbar
    kind = e.text("state.kind", choices=STATE_KINDS)
    if kind is None:
        e.fail("state.kind", "required field missing")
    try:
        if kind != "product":
            if not e.has(f"state.{kind}"):
                e.fail(f"state.{kind}", "required field missing")
            return _mode_state(e, "state", N, hbar, m_omega)
        factors, descs = [], []
        for k in range(1, N + 1):
            st, d = _mode_state(e, f"state.mode{k}", 1, hbar, [m_omega[k - 1]])
            factors.append(st)
            descs.append(d)
        if len({f.rep for f in factors}) > 1:
            factors = [f if f.rep == CHORD else symplectic_fourier(f) for f in factors]
        return product_state(factors), {"kind": "product", "modes": descs}
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc), e.lines.get("state.kind"), "state") from exc


def _times(e: Entries) -> tuple:
    if e.has("times") and e.has("times.start"):
        e.fail("times", "give either times or times.start/stop/count")
    if e.has("times"):
        t = e.numbers("times")
        key = "times"
    else:
        start, stop, count = e.number("times.start", 0.0), e.number("times.stop"), e.integer("times.count")
        if count < 1:
            e.fail("times.count", "must be at least 1")
        t = list(np.linspace(start, stop, count))
        key = "times.stop"
    if not t:
        e.fail(key, "empty time list")
    if any(x < 0 for x in t) or any(b < a for a, b in zip(t, t[1:])):
        e.fail(key, "times must be non-negative and ascending")
    return tuple(float(x) for x in t)


def _build(e: Entries, name: str, label: str, source_hash: str) -> Scenario:
    kind, system, extra = _build_system(e)
    state, desc = _build_state(e, system, extra["m_omega"])
    times = _times(e)
    N = system.N
    moments = tuple(e.words("outputs.moments", []))
    from .analysis import parse_multi_index

    for m in moments:
        try:
            parse_multi_index(m, N)
        except ValueError as exc:
            e.fail("outputs.moments", str(exc))
    spectrum = e.text("outputs.spectrum", None, ("exact", "first_order", "both"))
    outputs = Outputs(
        moments=moments,
        purity=e.flag("outputs.purity"),
        entropy=tuple(tuple(s) for s in e.subsets("outputs.entropy", N)),
        reduced_wigner=tuple(tuple(s) for s in e.subsets("outputs.reduced_wigner", N)),
        wigner=e.flag("outputs.wigner"),
        chord=e.flag("outputs.chord"),
        spectrum=spectrum,
        positivity=e.flag("outputs.positivity"),
    )
    for subset in outputs.entropy + outputs.reduced_wigner:
        if len(subset) == N:
            e.fail("outputs", "reduced subsets must be proper subsets of the modes")
    count = e.integer("grid.count", 64)
    if count < 8 or count & (count - 1):
        e.fail("grid.count", "must be a power of two >= 8")
    half = e.number("grid.half_width", 0.0) or None
    t_max = e.number("positivity.t_max", 100.0)
    if not t_max > 0:
        e.fail("positivity.t_max", "must be positive")
    cutoff = e.integer("oracle.cutoff", 16)
    if cutoff < 2:
        e.fail("oracle.cutoff", "must be at least 2")
    sc = Scenario(
        name=name, label=label, system=system, system_kind=kind, system_params=extra, state=state,
        state_desc=desc, times=times, grid_count=count, grid_half_width=half, outputs=outputs,
        positivity_t_max=t_max, positivity_threshold=e.number("positivity.threshold", 2.0),
        oracle_compare=e.flag("oracle.compare"), oracle_cutoff=cutoff, source_hash=source_hash,
    )
    unused = sorted(set(e.values) - e.used - {"name"} - {k for k in e.values if k.startswith("sweep.")})
    if unused:
        e.fail(unused[0], "unknown field")
    return sc


def load_text(text: str, default_name: str = "scenario") -> list:
    """All runs described by a scenario file (one per sweep value)."""
    source_hash = hashlib.sha256(text.encode()).hexdigest()
    base = parse_text(text)
    name = base.values.get("name", default_name)
    sweeps = [k for k in base.values if k.startswith("sweep.")]
    if len(sweeps) > 1:
        raise ScenarioError("at most one sweep key is supported", base.lines[sweeps[1]], sweeps[1])
    if not sweeps:
        return [_build(base, name, name, source_hash)]
    skey = sweeps[0]
    target = skey[len("sweep."):]
    values = [v.strip() for v in base.values[skey].split(",") if v.strip()]
    if not values:
        raise ScenarioError("empty sweep", base.lines[skey], skey)
    runs = []
    for i, v in enumerate(values):
        e = Entries(dict(base.values), dict(base.lines))
        e.values[target] = v
        e.lines.setdefault(target, base.lines[skey])
        runs.append(_build(e, name, f"{name}_{target.split('.')[-1]}{i}", source_hash))
    return runs


def load(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stem = str(path).replace("\\", "/").rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return load_text(text, stem)
