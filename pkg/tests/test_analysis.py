import numpy as np
import pytest

from lindchord import oracle as orc
from lindchord.analysis import (
    chord_exponent_from_covariance,
    covariance,
    husimi,
    moments,
    p_characteristic,
    p_function_bound_holds,
    p_positivity_onset,
    parse_multi_index,
    positivity_bounds,
    purity_and_linear_entropy,
    reduce,
)
from lindchord.grid import GridSpec, sample_grid
from lindchord.lindblad import (
    LindbladVector,
    OpenSystem,
    centre_evolution_matrix,
    decoherence_matrix,
    random_open_system,
)
from lindchord.states import (
    coherent_state,
    evolve_chord,
    evolve_wigner,
    fock_state,
    product_state,
    symplectic_fourier,
    thermal_state,
)
from lindchord.symplectic import matrix_exponential, standard_symplectic_form, williamson_frequencies
from lindchord.systems import CoupledPairParams, coupled_pair, damped_oscillator


def test_parse_multi_index():
    assert parse_multi_index("q1^2*p2", 2) == (0, 1, 2, 0)
    assert parse_multi_index("1", 1) == (0, 0)
    assert parse_multi_index((1, 0), 1) == (1, 0)
    for bad in ("x1", "q3", "q1^"):
        with pytest.raises(ValueError):
            parse_multi_index(bad, 2)
    with pytest.raises(ValueError):
        parse_multi_index((1, 0, 0), 1)


@pytest.mark.parametrize("hbar", [1.0, 0.3])
def test_basic_moments(hbar):
    vac = fock_state(1, [0], hbar)
    assert abs(moments(vac, "q1")) < 1e-15 and abs(moments(vac, "p1")) < 1e-15
    assert moments(vac, "q1^2").real == pytest.approx(hbar / 2)
    assert moments(fock_state(1, [1], hbar), "q1^2").real == pytest.approx(1.5 * hbar)
    eta = np.array([0.4, -1.2])
    coh = symplectic_fourier(coherent_state(1, eta, hbar=hbar))
    assert moments(coh, "p1").real == pytest.approx(eta[0])
    assert moments(coh, "q1").real == pytest.approx(eta[1])
    with pytest.raises(ValueError):
        moments(vac, (17, 0))


def test_moments_vs_oracle():
    trunc = orc.FockTruncation.uniform(1, 20)
    rho = orc.fock_density(trunc, [2])
    chi = fock_state(1, [2])
    for alpha in ("q1^2", "p1^2", "q1*p1", "q1^4", "q1^2*p1^2"):
        e = parse_multi_index(alpha, 1)
        assert abs(moments(chi, alpha).real - orc.extract_moments(rho, trunc, e)) < 1e-8


def test_moments_vs_grid_integrals():
    chi = evolve_chord(damped_oscillator(1.0, 0.2), fock_state(1, [1]), 1.5)
    spec = GridSpec.uniform(1, 8.0, 128)
    W = sample_grid(symplectic_fourier(chi), spec)
    X = spec.points()
    for e in ((2, 0), (0, 2), (1, 1), (0, 4), (1, 0)):
        grid_val = np.sum(W.values * X[..., 0] ** e[0] * X[..., 1] ** e[1]) * spec.cell_volume
        assert abs(moments(chi, e).real - grid_val) < 1e-6


def test_covariance_examples():
    rep = covariance(fock_state(2, [0, 0], hbar=0.5))
    np.testing.assert_allclose(rep.K, 0.25 * np.eye(4), atol=1e-14)
    assert rep.uncertainty == pytest.approx(0.25 ** 2)
    m, om, nbar = 2.0, 1.5, 0.7
    th = covariance(thermal_state(1, nbar, m, om))
    np.testing.assert_allclose(th.K, 0.5 * (2 * nbar + 1) * np.diag([m * om, 1 / (m * om)]), atol=1e-13)
    S = matrix_exponential(standard_symplectic_form(1) @ np.array([[0.3, 0.5], [0.5, -0.4]]))
    sq = covariance(symplectic_fourier(coherent_state(1, [0.2, 0.1], S)))
    assert sq.uncertainty == pytest.approx(0.5, rel=1e-8)
    np.testing.assert_allclose(chord_exponent_from_covariance(sq.K),
                               symplectic_fourier(coherent_state(1, [0.2, 0.1], S)).Q.real, atol=1e-12)


def test_robertson_schrodinger_on_evolved_states(rng):
    for _ in range(5):
        s = random_open_system(rng, 2, channels=2)
        chi = evolve_chord(s, fock_state(2, [1, 0]), rng.uniform(0, 3))
        assert covariance(chi).uncertainty >= 0.25 - 1e-10


def test_purity_examples():
    for state in (fock_state(2, [1, 2]), product_state([fock_state(1, [1]),
                                                        symplectic_fourier(coherent_state(1, [1.0, 0.5]))])):
        pur, el = purity_and_linear_entropy(state)
        assert pur == pytest.approx(1, abs=1e-10) and el == pytest.approx(0, abs=1e-10)
    deph = OpenSystem.from_matrices(np.eye(2), [LindbladVector([0.3, 0.2], [0.0, 0.0])])
    last = 1.0
    for t in (0.5, 1.0, 2.0, 4.0):
        p = purity_and_linear_entropy(evolve_chord(deph, fock_state(1, [1]), t))[0]
        assert p < last
        last = p


def test_reduced_purities_agree_for_pure_state():
    s = coupled_pair(CoupledPairParams(1.0, 1.3, 0.5, 0.0))
    chi = evolve_chord(s, fock_state(2, [0, 1]), 2.0)
    assert purity_and_linear_entropy(chi)[0] == pytest.approx(1, abs=1e-10)
    p1 = purity_and_linear_entropy(reduce(chi, [0]))[0]
    p2 = purity_and_linear_entropy(reduce(chi, [1]))[0]
    assert p1 < 0.99
    assert p1 == pytest.approx(p2, abs=1e-8)


def test_reduce_product_and_validation(rng):
    a, b = fock_state(1, [0]), fock_state(1, [1])
    prod = product_state([a, b])
    red = reduce(prod, [1])
    x = rng.normal(size=(10, 2))
    np.testing.assert_allclose(red(x), b(x), atol=1e-15)
    assert red(np.zeros(2)) == pytest.approx(1 / (2 * np.pi))
    for bad in ([], [0, 1], [2]):
        with pytest.raises(ValueError):
            reduce(prod, bad)


def test_reduce_commutes_with_uncoupled_evolution(rng):
    s2 = coupled_pair(CoupledPairParams(1.0, 1.4, 0.0, 0.3))
    s1 = OpenSystem.from_matrices(s2.H[np.ix_([0, 2], [0, 2])],
                                  [LindbladVector(c.l_re[[0, 2]], c.l_im[[0, 2]]) for c in s2.channels])
    chi = fock_state(2, [1, 1])
    lhs = reduce(evolve_chord(s2, chi, 2.5), [0])
    rhs = evolve_chord(s1, fock_state(1, [1]), 2.5)
    x = rng.normal(size=(20, 2))
    np.testing.assert_allclose(lhs(x), rhs(x), atol=1e-8)


def test_positivity_damped_oscillator():
    g = 0.3
    rep = positivity_bounds(damped_oscillator(1.0, g), 50.0)
    for t in (rep.t_minus, rep.t_plus, rep.t_p_estimate):
        assert t == pytest.approx(np.log(5) / g, rel=1e-8)
    with pytest.raises(ValueError):
        positivity_bounds(damped_oscillator(1.0, g), 0.0)


def test_positivity_dephasing_t_plus_absent():
    deph = OpenSystem.from_matrices(np.zeros((2, 2)), [LindbladVector([0.5, 0.0], [0.0, 0.0])])
    rep = positivity_bounds(deph, 30.0)
    assert rep.t_plus is None
    assert rep.omega_minus(5.0) == pytest.approx(0, abs=1e-8)


def test_positivity_ordering(rng):
    found = 0
    for _ in range(16):
        s = random_open_system(rng, 2, h_norm=1.0, channels=2)
        rep = positivity_bounds(s, 10.0, method="quadrature")
        if None in (rep.t_minus, rep.t_p_estimate, rep.t_plus):
            continue
        found += 1
        assert rep.t_minus <= rep.t_p_estimate * (1 + 1e-9)
        assert rep.t_p_estimate <= rep.t_plus * (1 + 1e-9)
    assert found >= 3


def test_williamson_frequencies_of_M_tilde_grow(rng):
    s = random_open_system(rng, 2, channels=2)
    prev = np.zeros(2)
    for t in np.linspace(0.2, 4, 12):
        w = williamson_frequencies(decoherence_matrix(s, t).M_tilde, allow_semidefinite=True)
        assert np.all(w >= prev - 1e-10)
        prev = w


def test_hudson_guard(rng):
    s = random_open_system(rng, 1, channels=1)
    S = matrix_exponential(standard_symplectic_form(1) @ np.diag([0.4, -0.2]))
    W = coherent_state(1, [0.5, 0.5], S)
    X = GridSpec.uniform(1, 6.0, 64).points()
    for t in (0.5, 2.0, 5.0):
        assert np.min(evolve_wigner(s, W, t)(X).real) >= -1e-12


def test_husimi():
    assert husimi(coherent_state(1), [0.0, 0.0]) == pytest.approx(1 / (2 * np.pi))
    W1 = symplectic_fourier(fock_state(1, [1]))
    assert abs(husimi(W1, [0.0, 0.0])) < 1e-15
    eta = np.array([0.7, -0.4])
    Wc = coherent_state(1, eta)
    centre = husimi(Wc, eta)
    for d in ([0.1, 0], [0, -0.2], [0.3, 0.3]):
        assert husimi(Wc, eta + np.array(d)) < centre
    # oracle: Q(eta) = <eta|rho|eta> / (2 pi hbar)
    trunc = orc.FockTruncation.uniform(1, 24)
    rho = orc.fock_density(trunc, [1])
    for p, q in ([0.5, 0.2], [-1.0, 0.8]):
        alpha = (q + 1j * p) / np.sqrt(2)
        ket = orc.coherent_density(trunc, [alpha])
        assert husimi(W1, [p, q]) == pytest.approx(np.real(np.trace(rho @ ket)) / (2 * np.pi), abs=1e-10)
    s = damped_oscillator(1.0, 0.2)
    for t in (0.5, 3.0):
        Wt = evolve_wigner(s, W1, t)
        assert min(husimi(Wt, e) for e in ([0, 0], [0.3, -0.2], [2.0, 1.0])) >= -1e-12


def test_p_characteristic_kinds():
    coh = p_characteristic(symplectic_fourier(coherent_state(1, [0.3, 0.1])))
    assert coh.kind == "delta"
    assert p_characteristic(fock_state(1, [1])).kind == "divergent"
    th = p_characteristic(thermal_state(1, 0.8))
    assert th.kind == "function"
    # P of a thermal state is a Gaussian with covariance nbar hbar per quadrature
    np.testing.assert_allclose(th.state.Q.real, 0.8 * np.eye(2), atol=1e-12)
    with pytest.raises(ValueError):
        p_characteristic(thermal_state(1, 0.8), np.diag([2.0, 1.0]))


def test_p_onset_zero_temperature_absent():
    assert p_positivity_onset(damped_oscillator(1.0, 0.2), t_max=200.0) is None


def test_p_onset_closed_form_and_squeezing():
    g, nbar = 0.2, 0.5
    s = damped_oscillator(1.0, g, nbar)
    onset = p_positivity_onset(s)
    assert onset == pytest.approx(np.log((2 * nbar + 1) / (2 * nbar)) / g, rel=1e-9)
    prev = onset
    for w in (1.1, 1.25, 1.4):
        t = p_positivity_onset(s, np.diag([np.sqrt(w), 1 / np.sqrt(w)]))
        assert t > prev
        prev = t


def test_p_bound_after_onset(rng):
    s = damped_oscillator(1.0, 0.2, 0.5)
    onset = p_positivity_onset(s)
    pts = rng.normal(size=(2000, 2)) * 3
    late = p_characteristic(evolve_chord(s, fock_state(1, [1]), 1.2 * onset))
    assert late.kind == "function" and p_function_bound_holds(late.state, pts)
    # before onset chi_P still decays but the P function takes negative values
    early = p_characteristic(evolve_chord(s, fock_state(1, [1]), 0.5 * onset))
    assert early.kind == "function" and not p_function_bound_holds(early.state, pts)


def test_centre_map_moves_mean(rng):
    s = random_open_system(rng, 1, channels=1)
    eta = np.array([1.0, -0.5])
    chi = evolve_chord(s, symplectic_fourier(coherent_state(1, eta)), 1.2)
    np.testing.assert_allclose(covariance(chi).mean, centre_evolution_matrix(s, 1.2) @ eta, atol=1e-10)
