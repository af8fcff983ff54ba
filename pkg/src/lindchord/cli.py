"""Command-line front end: ``lindchord <command> --scenario FILE --out DIR``.

Exit codes: 0 success, 1 a selftest check failed, 2 scenario parse or
validation error, 3 numeric failure (the stage is named), 4 output I/O error.
Every flag can also be given through an environment variable with the
``LINDCHORD_`` prefix (``LINDCHORD_OUT``, ``LINDCHORD_THREADS``, ...);
flags on the command line take precedence.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from functools import reduce as _fold
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    covariance,
    moments,
    parse_multi_index,
    positivity_bounds,
    purity_and_linear_entropy,
    reduce,
)
from .grid import GridError, GridSpec, default_grid_spec, sample_grid, write_psgrid
from .lindblad import (
    IntegratorError,
    centre_evolution_matrix,
    decoherence_matrix,
    dissipation_matrix,
    propagation_matrix,
    random_open_system,
    verify_volume_identity,
)
from .oracle import (
    KAPPA_HBAR,
    FockTruncation,
    OracleError,
    coherent_density,
    extract_moments,
    fock_density,
    integrate,
    phase_space_operators,
    purity,
    thermal_density,
)
from .scenario import Scenario, ScenarioError, load
from .states import NotIntegrableError, evolve_chord, symplectic_fourier
from .symplectic import IndefiniteMatrixError
from .systems import SpectrumReport, chain_spectrum, cubic_network_spectrum, damped_oscillator

ENV_PREFIX = "LINDCHORD_"
COMMANDS = ("run", "evolve", "spectrum", "positivity", "reduce", "oracle-compare", "selftest")
PROFILES = {
    # oracle step-halving tolerance, M(t) cross-method check
    "strict": {"oracle_tol": 1e-8, "cross_check": True},
    "fast": {"oracle_tol": 1e-6, "cross_check": False},
}
NUMERIC_ERRORS = (ArithmeticError, np.linalg.LinAlgError, IntegratorError, OracleError, NotIntegrableError,
                  IndefiniteMatrixError, GridError, ValueError)


class NumericFailure(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"numeric failure in stage '{stage}': {exc}")
        self.stage = stage


@contextmanager
def stage(name: str):
    try:
        yield
    except OSError:
        raise
    except NUMERIC_ERRORS as exc:
        raise NumericFailure(name, exc) from exc


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# output helpers

class Writer:
    """Collects output files in one directory; the manifest lists each file with its digest."""

    def __init__(self, out_dir: Path, scenario_hash: str, scenario_name: str):
        self.dir = Path(out_dir)
        self.hash = scenario_hash
        self.name = scenario_name
        self.files = []

    def header(self, label: str) -> list:
        return [f"# lindchord {__version__}", f"# scenario {self.name} sha256 {self.hash}", f"# run {label}"]

    def table(self, filename: str, label: str, columns: list, rows: list) -> Path:
        lines = self.header(label) + ["\t".join(columns)]
        for row in rows:
            lines.append("\t".join(v if isinstance(v, str) else fmt(v) for v in row))
        path = self.dir / filename
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        self.files.append(path)
        return path

    def grid(self, filename: str, grid) -> Path:
        path = self.dir / filename
        write_psgrid(path, grid)
        self.files.append(path)
        return path

    def manifest(self) -> Path:
        # the grid layout has no room for a header, so the manifest carries it
        lines = [f"# lindchord {__version__}", f"# scenario {self.name} sha256 {self.hash}", "file\tsha256"]
        for p in sorted(set(self.files)):
            lines.append(f"{p.name}\t{hashlib.sha256(p.read_bytes()).hexdigest()}")
        path = self.dir / "manifest.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def _mode_tag(modes) -> str:
    return "".join(str(k + 1) for k in modes)


# ---------------------------------------------------------------------------
# stages

def _evolved(sc: Scenario, threads: int) -> list:
    with stage("evolve"):
        def one(t):
            return evolve_chord(sc.system, sc.state, t)

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                return list(pool.map(one, sc.times))
        return [one(t) for t in sc.times]


def _grid_spec(sc: Scenario, chi, modes=None, chord: bool = False) -> GridSpec:
    n = len(modes) if modes is not None else chi.N
    if sc.grid_half_width:
        return GridSpec.uniform(n, sc.grid_half_width, sc.grid_count)
    # the chord Gaussian exp(-xi.Q xi / 2 hbar) has covariance hbar Q^-1
    K = chi.hbar * np.linalg.inv(chi.Q.real) if chord else covariance(chi).K
    if modes is not None:
        idx = list(modes) + [chi.N + k for k in modes]
        K = K[np.ix_(idx, idx)]
    return default_grid_spec(K, chi.hbar, sc.grid_count)


def write_timeseries(sc: Scenario, w: Writer, states: list, with_entropy: bool = True):
    out = sc.outputs
    cols = ["t"] + [f"<{m}>" for m in out.moments]
    if out.purity:
        cols += ["purity", "E_l"]
    subsets = out.entropy if with_entropy else ()
    cols += [f"E_l[{_mode_tag(s)}]" for s in subsets]
    if len(cols) == 1:
        return None
    rows = []
    with stage("moments"):
        for t, chi in zip(sc.times, states):
            row = [t] + [moments(chi, parse_multi_index(m, chi.N)).real for m in out.moments]
            if out.purity:
                row += list(purity_and_linear_entropy(chi))
            for s in subsets:
                row.append(purity_and_linear_entropy(reduce(chi, s))[1])
            rows.append(row)
    return w.table(f"{sc.label}_timeseries.tsv", sc.label, cols, rows)


def write_grids(sc: Scenario, w: Writer, states: list, full: bool = True, reduced: bool = True):
    out = sc.outputs
    with stage("grids"):
        for i, chi in enumerate(states):
            if full and out.chord:
                w.grid(f"{sc.label}_chord_t{i}.psgrid", sample_grid(chi, _grid_spec(sc, chi, chord=True)))
            if full and out.wigner:
                W = symplectic_fourier(chi)
                w.grid(f"{sc.label}_wigner_t{i}.psgrid", sample_grid(W, _grid_spec(sc, chi)))
            if reduced:
                for modes in out.reduced_wigner:
                    Wr = symplectic_fourier(reduce(chi, modes))
                    w.grid(f"{sc.label}_reduced{_mode_tag(modes)}_t{i}.psgrid",
                           sample_grid(Wr, _grid_spec(sc, chi, modes)))


def spectrum_report(sc: Scenario, order: str) -> SpectrumReport:
    kind, p = sc.system_kind, sc.system_params
    with stage("spectrum"):
        if kind == "chain":
            return chain_spectrum(p["params"], order)
        if kind == "cubic":
            rep = cubic_network_spectrum(p["n_side"], p["omega"], p["alpha"], p["gamma"], p["faces"],
                                         exact=order != "first_order")
            if order == "exact":
                return SpectrumReport.build(rep.exact, None, None)
            return rep
        exact = np.linalg.eigvals(propagation_matrix(sc.system)) if order != "first_order" else None
        if kind in ("coupled_pair", "triatomic"):
            H = sc.system.H
            w1, w2 = H[0, 0], H[1, 1]
            g = dissipation_matrix(sc.system)[0, 0]
            pert = np.array([g + 1j * w1, g - 1j * w1, 1j * w2, -1j * w2])
            labels = ["1+", "1-", "2+", "2-"]
            return SpectrumReport.build(exact, pert if order != "exact" else None, labels)
        if order == "first_order":
            raise ValueError(f"no perturbative spectrum for system kind {kind!r}")
        return SpectrumReport.build(exact, None, None)


def write_spectrum(sc: Scenario, w: Writer, order: str):
    rep = spectrum_report(sc, order)
    rows = []
    if rep.perturbative is not None:
        labels = ["".join(str(x) for x in lab) if isinstance(lab, tuple) else str(lab) for lab in rep.labels]
        for i, mu in enumerate(rep.perturbative):
            row = [labels[i], mu.real, mu.imag]
            if rep.exact is not None:
                lam = rep.exact[i]
                row += [lam.real, lam.imag, abs(lam - mu)]
            rows.append(row)
        cols = ["label", "first_order_re", "first_order_im"]
        if rep.exact is not None:
            cols += ["exact_re", "exact_im", "defect"]
    else:
        ex = sorted(rep.exact, key=lambda z: (round(z.imag, 12), round(z.real, 12)))
        rows = [[str(i + 1), z.real, z.imag] for i, z in enumerate(ex)]
        cols = ["index", "exact_re", "exact_im"]
    w.table(f"{sc.label}_spectrum.tsv", sc.label, cols, rows)
    return rep


def write_positivity(sc: Scenario, w: Writer, profile: dict):
    with stage("positivity"):
        if profile["cross_check"]:
            t = sc.positivity_t_max
            a = decoherence_matrix(sc.system, t, "lyapunov_ode").M
            b = decoherence_matrix(sc.system, t, "quadrature").M
            dev = float(np.max(np.abs(a - b)))
            if dev > 1e-8 * max(1.0, float(np.max(np.abs(a)))):
                raise ArithmeticError(f"M(t) methods disagree by {dev:.3e}")
        rep = positivity_bounds(sc.system, sc.positivity_t_max, sc.positivity_threshold)

    def col(x):
        return "absent" if x is None else x

    w.table(f"{sc.label}_positivity.tsv", sc.label, ["threshold", "t_minus", "t_p", "t_plus"],
            [[rep.threshold, col(rep.t_minus), col(rep.t_p_estimate), col(rep.t_plus)]])
    return rep


def _single_density(desc: dict, d: int, s: float, hbar: float) -> np.ndarray:
    tr = FockTruncation((d,), (s,))
    if desc["kind"] == "fock":
        return fock_density(tr, desc["occupations"])
    if desc["kind"] == "thermal":
        return thermal_density(tr, desc["nbar"])
    p, q = desc["eta"]
    alpha = q * np.sqrt(s / (2 * hbar)) + 1j * p / np.sqrt(2 * hbar * s)
    return coherent_density(tr, [alpha])


def oracle_density(sc: Scenario, trunc: FockTruncation) -> np.ndarray:
    """Initial density matrix in the truncated basis (product over modes)."""
    N, hbar, d = sc.system.N, sc.system.hbar, sc.state_desc
    if d["kind"] == "product":
        per_mode = d["modes"]
    elif d["kind"] == "fock":
        per_mode = [{"kind": "fock", "occupations": [n]} for n in d["occupations"]]
    elif d["kind"] == "thermal":
        per_mode = [{"kind": "thermal", "nbar": [n]} for n in d["nbar"]]
    else:
        eta = d["eta"]
        per_mode = [{"kind": "coherent", "eta": [eta[k], eta[N + k]]} for k in range(N)]
    mats = [_single_density(m, trunc.cutoffs[k], trunc.m_omega[k], hbar) for k, m in enumerate(per_mode)]
    return _fold(np.kron, mats)


def oracle_compare(sc: Scenario, w: Writer, profile: dict, states: list) -> float:
    """Max deviation of first/second moments and purity between the exact solution and the oracle."""
    N = sc.system.N
    with stage("oracle"):
        trunc = FockTruncation.uniform(N, sc.oracle_cutoff, m_omega=sc.system_params["m_omega"])
        rhos = integrate(sc.system, trunc, oracle_density(sc, trunc), sc.times, tol=profile["oracle_tol"])
    alphas = []
    for i in range(2 * N):
        e = [0] * (2 * N)
        e[i] = 1
        alphas.append(tuple(e))
    for i in range(2 * N):
        for j in range(i, 2 * N):
            e = [0] * (2 * N)
            e[i] += 1
            e[j] += 1
            alphas.append(tuple(e))
    rows, worst = [], 0.0
    with stage("oracle-compare"):
        for t, chi, rho in zip(sc.times, states, rhos):
            dev_m = max(abs(moments(chi, a).real - extract_moments(rho, trunc, a, sc.system.hbar)) for a in alphas)
            dev_p = abs(purity_and_linear_entropy(chi)[0] - purity(rho))
            worst = max(worst, dev_m, dev_p)
            rows.append([t, dev_m, dev_p])
    w.table(f"{sc.label}_oracle.tsv", sc.label, ["t", "max_moment_dev", "purity_dev"], rows)
    return worst


# ---------------------------------------------------------------------------
# selftest

def selftest() -> list:
    """Calibration and invariant checks; returns (name, passed, detail) triples."""
    results = []
    gamma = 0.2
    sys1 = damped_oscillator(1.0, gamma)

    # rate calibration: <x(t)> from the oracle against the centre map
    trunc = FockTruncation((24,))
    rho0 = coherent_density(trunc, [1.0 + 0.5j])
    x = phase_space_operators(trunc)
    t = 2.0
    rho_t = integrate(sys1, trunc, rho0, [t])[0]
    mean0 = np.array([np.trace(rho0 @ xi.toarray()).real for xi in x])
    mean_t = np.array([np.trace(rho_t @ xi.toarray()).real for xi in x])
    dev = float(np.max(np.abs(mean_t - centre_evolution_matrix(sys1, t) @ mean0)))
    results.append((f"rate calibration (kappa*hbar={KAPPA_HBAR})", dev < 1e-6, f"mean deviation {dev:.2e}"))

    M = decoherence_matrix(sys1, t).M
    dev = float(np.max(np.abs(M - 0.5 * (1 - np.exp(-gamma * t)) * np.eye(2))))
    results.append(("damped oscillator M(t) closed form", dev < 1e-10, f"deviation {dev:.2e}"))

    tp = positivity_bounds(sys1, 50.0).t_p_estimate
    rel = abs(tp - np.log(5) / gamma) / (np.log(5) / gamma)
    results.append(("positivity time ln5/gamma", rel < 1e-8, f"relative error {rel:.2e}"))

    rng = np.random.default_rng(7)
    worst_vol, worst_m = 0.0, 0.0
    for k in range(10):
        s = random_open_system(rng, 1 + k % 3, channels=1 + k % 2)
        worst_vol = max(worst_vol, verify_volume_identity(s, 3.0).max_deviation)
        a = decoherence_matrix(s, 3.0, "lyapunov_ode").M
        b = decoherence_matrix(s, 3.0, "quadrature").M
        worst_m = max(worst_m, float(np.max(np.abs(a - b))))
    results.append(("volume and transpose identities", worst_vol < 1e-8, f"max deviation {worst_vol:.2e}"))
    results.append(("M(t) quadrature vs Lyapunov ODE", worst_m < 1e-8, f"max deviation {worst_m:.2e}"))
    return results


# ---------------------------------------------------------------------------
# entry point

def _resolve_scenario(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    shipped = resources.files("lindchord") / "scenarios" / (path if path.endswith(".scn") else path + ".scn")
    if shipped.is_file():
        return Path(str(shipped))
    return p


def shipped_scenarios() -> list:
    root = resources.files("lindchord") / "scenarios"
    return sorted(Path(str(f)) for f in root.iterdir() if f.name.endswith(".scn"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lindchord", description="Exact Gaussian-polynomial open-system evolution.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--scenario", help="scenario file, or the name of a shipped scenario")
    ap.add_argument("--out", help="output directory (default: current directory)")
    ap.add_argument("--threads", type=int, help="worker threads for independent time points")
    ap.add_argument("--tolerance-profile", choices=sorted(PROFILES), help="strict (default) or fast")
    ap.add_argument("--order", choices=("exact", "first_order", "both"), help="spectrum order override")
    ap.add_argument("--version", action="version", version=f"lindchord {__version__}")
    return ap


def _option(args, name: str, default):
    v = getattr(args, name.replace("-", "_"))
    if v is not None:
        return v
    env = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    return env if env is not None else default


def run_command(command: str, scenario_path: str, out_dir: str, threads: int = 1, profile: str = "strict",
                order=None, echo=print) -> int:
    prof = PROFILES[profile]
    path = _resolve_scenario(scenario_path)
    try:
        runs = load(path)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc.strerror or exc}") from exc
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    w = Writer(out, runs[0].source_hash, runs[0].name)
    for sc in runs:
        o = sc.outputs
        needs_states = command in ("run", "evolve", "reduce", "oracle-compare")
        states = _evolved(sc, threads) if needs_states else None
        if command in ("run", "evolve"):
            write_timeseries(sc, w, states)
            write_grids(sc, w, states)
        if command == "reduce":
            write_timeseries(sc, w, states)
            write_grids(sc, w, states, full=False)
        if command == "spectrum" or (command == "run" and o.spectrum):
            od = order or o.spectrum or "both"
            rep = write_spectrum(sc, w, od)
            if command == "spectrum":
                echo(f"{sc.label}: spectrum ({od})")
                if rep.perturbative is not None and rep.exact is not None:
                    for lab, mu, lam in zip(rep.labels, rep.perturbative, rep.exact):
                        echo(f"  {lab}\t{mu.real:.10g}{mu.imag:+.10g}i\t{lam.real:.10g}{lam.imag:+.10g}i")
                    echo(f"  max defect {rep.max_defect:.6e}")
                else:
                    for z in (rep.exact if rep.exact is not None else rep.perturbative):
                        echo(f"  {z.real:.10g}{z.imag:+.10g}i")
        if command == "positivity" or (command == "run" and o.positivity):
            rep = write_positivity(sc, w, prof)
            if command == "positivity":
                def show(x):
                    return "absent" if x is None else f"{x:.12g}"
                echo(f"{sc.label}: t_minus = {show(rep.t_minus)}  t_p = {show(rep.t_p_estimate)}  "
                     f"t_plus = {show(rep.t_plus)}")
        if command == "oracle-compare" or (command == "run" and sc.oracle_compare):
            worst = oracle_compare(sc, w, prof, states)
            echo(f"{sc.label}: max moment deviation {worst:.3e}")
    w.manifest()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        try:
            results = selftest()
        except NUMERIC_ERRORS as exc:
            print(f"numeric failure in stage 'selftest': {exc}", file=sys.stderr)
            return 3
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return 0 if all(ok for _, ok, _ in results) else 1
    scenario = _option(args, "scenario", None)
    if scenario is None:
        print("error: --scenario is required", file=sys.stderr)
        return 2
    try:
        threads = int(_option(args, "threads", 1))
    except ValueError:
        print("error: threads must be an integer", file=sys.stderr)
        return 2
    profile = _option(args, "tolerance-profile", "strict")
    if profile not in PROFILES:
        print(f"error: unknown tolerance profile {profile!r}", file=sys.stderr)
        return 2
    try:
        return run_command(args.command, scenario, _option(args, "out", "."), max(1, threads), profile,
                           args.order)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(str(exc), file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
