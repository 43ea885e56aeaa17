import numpy as np
import pytest

from circlelab.circle import Arc
from circlelab.maps import MobiusMap, Word, make_generator, rotation
from circlelab.measure import (
    GridMeasure,
    MeasureGapError,
    asymptotic_entropy,
    boundary_entropy,
    dirac_convergence_probe,
    entropy_gap_report,
    estimate_stationary_measure,
    lyapunov_exponent,
    rn_derivative,
    stationarity_residual,
)
from circlelab.walk import make_step_distribution

GOLDEN = 0.6180339887498949
HYP = MobiusMap([[0.5, 0], [0, 2]])


def rotations_mu(theta=GOLDEN):
    return make_step_distribution([rotation(theta), rotation(-theta)], [0.5, 0.5], symmetric=True)


# -- GridMeasure --------------------------------------------------------------

def test_grid_measure_validation():
    with pytest.raises(ValueError):
        GridMeasure([0.0, 0.5, 0.9])          # endpoint not pinned
    with pytest.raises(ValueError):
        GridMeasure([0.0, 0.6, 0.4, 1.0])     # not monotone
    nu = GridMeasure.lebesgue(256)
    assert not nu.atom_warning
    assert abs(nu.max_cell_mass - 1 / 256) < 1e-15


def test_interval_mass_wraparound():
    nu = GridMeasure.lebesgue(512)
    assert abs(nu.interval_mass(0.9, 0.1) - 0.2) < 1e-12
    assert abs(nu.arc_mass(Arc(0.95, 0.3)) - 0.3) < 1e-12


def test_quantile_inverts_cdf():
    rng = np.random.default_rng(0)
    cdf = np.concatenate([[0], np.sort(rng.random(510)), [1]])
    nu = GridMeasure(cdf)
    u = rng.random(1000)
    x = nu.quantile(u)
    assert np.max(np.abs(nu.cdf_at(x) - u)) < 1e-9


def test_pushforward_by_rotation():
    nu = GridMeasure.lebesgue(512)
    out = nu.pushforward(rotation(0.37))
    assert np.max(np.abs(out.cdf - nu.cdf)) < 1e-12


# -- stationary measure -------------------------------------------------------

def test_stationary_rotations_is_lebesgue():
    nu = estimate_stationary_measure(rotations_mu(), grid_size=1024, seed=1)
    assert np.max(np.abs(nu.cdf - np.arange(1025) / 1024)) <= 1.0 / 1024
    assert nu.info.residual <= 1.0 / 1024
    assert not nu.atom_warning


def test_stationary_dirac_for_single_hyperbolic():
    mu = make_step_distribution([HYP], [1.0])
    nu = estimate_stationary_measure(mu, grid_size=512, tol=1e-3, seed=1)
    assert nu.atom_warning                      # Dirac mass at the attracting point
    # all mass concentrates at x = 0 (split across the wrap is legitimate)
    assert nu.interval_mass(0.99, 0.01) > 0.999
    assert nu.interval_mass(0.4, 0.6) < 1e-6


def test_stationary_sanov_two_methods_agree(sanov_mu):
    nu_t = estimate_stationary_measure(sanov_mu, grid_size=2048, seed=3)
    assert nu_t.info.residual <= 1e-3
    nu_mc = estimate_stationary_measure(
        sanov_mu, method="monte_carlo", grid_size=2048,
        mc_samples=60_000, mc_steps=200, seed=3,
    )
    ks = float(np.max(np.abs(nu_t.cdf - nu_mc.cdf)))
    assert ks <= 2.0 * (1.0 / 2048 + 1.36 / np.sqrt(60_000))


def test_stationarity_residual_function(sanov_mu):
    nu = estimate_stationary_measure(sanov_mu, grid_size=1024, seed=3)
    assert stationarity_residual(sanov_mu, nu) <= 1e-6
    leb = GridMeasure.lebesgue(1024)
    assert stationarity_residual(sanov_mu, leb) > 0.01


# -- Lyapunov -----------------------------------------------------------------

def test_lyapunov_dirac_hyperbolic():
    mu = make_step_distribution([HYP], [1.0])
    nu = estimate_stationary_measure(mu, grid_size=2048, seed=1)
    est = lyapunov_exponent(mu, nu, n_steps=200, trajectories=8, integral_samples=4000, seed=2)
    assert abs(est.value - np.log(0.25)) < 5e-3
    assert abs(est.integral - np.log(0.25)) < 5e-3


def test_lyapunov_rotations_zero():
    mu = rotations_mu()
    nu = estimate_stationary_measure(mu, grid_size=1024, seed=1)
    est = lyapunov_exponent(mu, nu, n_steps=500, trajectories=8, integral_samples=4000, seed=2)
    assert abs(est.value) < 1e-12 and abs(est.integral) < 1e-12


def test_lyapunov_sanov_negative(sanov_mu):
    nu = estimate_stationary_measure(sanov_mu, grid_size=2048, seed=3)
    est = lyapunov_exponent(sanov_mu, nu, n_steps=2000, trajectories=32, integral_samples=20_000, seed=5)
    assert est.value < -0.1
    assert est.agreement_sigma <= 3.0


# -- Radon-Nikodym windows ----------------------------------------------------

def test_rn_identity_is_one():
    nu = GridMeasure.lebesgue(1024)
    g = MobiusMap(np.eye(2))
    assert abs(rn_derivative(g, nu, 0.3, 8) - 1.0) < 1e-12


def test_rn_lebesgue_mobius_matches_derivative():
    nu = GridMeasure.lebesgue(8192)
    delta = 8 / 8192
    for x in (0.13, 0.48, 0.77):
        rn = rn_derivative(HYP, nu, x, 8)
        d1 = float(HYP.jet(x).d1)
        assert abs(rn - d1) <= 10 * delta * max(1.0, d1)


def test_rn_two_step_chain(sanov_mu):
    # log RN of l_2 = step log at x plus step log at l_1(x), up to O(delta)
    nu = estimate_stationary_measure(sanov_mu, grid_size=8192, seed=3)
    g1, g2 = sanov_mu.atoms[0], sanov_mu.atoms[2]
    l2 = Word((g1, g2))  # g2 o g1
    x = float(nu.quantile(0.37))
    lhs = np.log(rn_derivative(l2, nu, x, 8))
    rhs = np.log(rn_derivative(g1, nu, x, 8)) + np.log(rn_derivative(g2, nu, float(g1.apply(x)), 8))
    assert abs(lhs - rhs) < 0.1


def test_rn_measure_gap_error(sanov_mu):
    nu = estimate_stationary_measure(sanov_mu, grid_size=8192, seed=3)
    # the window far from the support of a Dirac-like zone: use a synthetic gap
    cdf = np.concatenate([np.linspace(0, 0.5, 1025), np.full(2047, 0.5), np.linspace(0.5, 1, 1025)])
    gap_nu = GridMeasure(cdf)   # nu-null gap over (1/4, 3/4)
    with pytest.raises(MeasureGapError):
        rn_derivative(MobiusMap(np.eye(2)), gap_nu, 0.5, 4)


def test_boundary_entropy_rotations_zero():
    mu = rotations_mu()
    nu = estimate_stationary_measure(mu, grid_size=1024, seed=1)
    be = boundary_entropy(mu, nu, samples=4000, seed=2)
    assert abs(be.value) < 1e-10
    assert be.gap_fraction == 0.0


def test_boundary_entropy_invariant_measure_zero():
    # mu = {g, g^{-1}} with nu g-invariant: RN is 1 and h_nu vanishes
    conj = MobiusMap([[1.0, 0.3], [0.1, (1 + 0.3 * 0.1)]])
    g = Word((conj.inverse(), rotation(GOLDEN), conj)).as_mobius()
    mu = make_step_distribution([g, g.inverse()], [0.5, 0.5], symmetric=True)
    nu = GridMeasure.lebesgue(4096).pushforward(conj)
    be = boundary_entropy(mu, nu, samples=20_000, seed=4)
    assert abs(be.value) < 2e-2


# -- asymptotic entropy and the gap report -------------------------------------

def test_asymptotic_entropy_deterministic_walk():
    g = MobiusMap([[2, 1], [1, 1]])
    mu = make_step_distribution([g], [1.0])
    ae = asymptotic_entropy(mu, 8, sbm_samples=100, seed=1)
    assert ae.value == 0.0
    assert ae.sbm_mean == 0.0


def test_asymptotic_entropy_free_group_closed_form(sanov_mu):
    ae = asymptotic_entropy(sanov_mu, 12, sbm_samples=1000, seed=1)
    assert abs(ae.value - 0.5 * np.log(3)) < 0.02
    assert ae.sbm_consistent


def test_asymptotic_entropy_horizon_stability(sanov_mu):
    # estimates at n_max = 12 and n_max = 14 agree to 0.01
    a12 = asymptotic_entropy(sanov_mu, 12, sbm_samples=500, seed=1)
    a14 = asymptotic_entropy(sanov_mu, 14, sbm_samples=500, seed=1)
    assert abs(a14.value - a12.value) <= 0.01


def test_lazy_walk_entropy_inequality(sanov_atoms):
    atoms = [MobiusMap(np.eye(2))] + list(sanov_atoms)
    mu = make_step_distribution(atoms, [0.2] * 5)
    ae = asymptotic_entropy(mu, 10, sbm_samples=500, seed=1)
    assert 0.0 < ae.value < 0.5 * np.log(3)
    nu = estimate_stationary_measure(mu, grid_size=2048, seed=2)
    be = boundary_entropy(mu, nu, samples=20_000, seed=2)
    assert be.value <= ae.value + 2 * np.hypot(be.stderr, 0.02)


def test_counting_bound_from_table(sanov_mu):
    # smallest event set with mass >= 1/2 obeys log|E_n|/n >= h - 0.05
    from circlelab.convolve import convolve_exact

    n = 12
    s = convolve_exact(sanov_mu, n)
    masses = np.sort(s.table.masses)[::-1]
    k = int(np.searchsorted(np.cumsum(masses), 0.5) + 1)
    assert np.log(k) / n >= 0.5 * np.log(3) - 0.05


def test_entropy_gap_rotations_undefined():
    rep = entropy_gap_report(rotations_mu(), n_max=10, grid_size=1024,
                             samples=4000, seed=3, quantized=True)
    assert rep.ratio_undefined
    assert abs(rep.h_boundary) < 1e-8
    assert rep.h_asymptotic < 0.05
    assert rep.inequality_ok


# -- weak-convergence probe -----------------------------------------------------

def test_dirac_probe_single_hyperbolic_rate():
    mu = make_step_distribution([HYP], [1.0])
    nu = GridMeasure.lebesgue(4096)
    curve = dirac_convergence_probe(mu, nu, horizon=12, trials=2, seed=1)
    w = curve.median_width
    assert np.all(w[1:] <= w[:-1] + 1e-12)
    # contraction at rate alpha = 1/4 while the arc still resolves on the grid
    valid = np.nonzero(w > 20.0 / 4096)[0]
    ratios = w[valid[4:]] / w[valid[4:] - 1]
    assert len(ratios) >= 3
    assert np.all((ratios > 0.15) & (ratios < 0.45))


def test_dirac_probe_rotations_flat():
    mu = rotations_mu()
    nu = GridMeasure.lebesgue(1024)
    curve = dirac_convergence_probe(mu, nu, horizon=10, trials=3, seed=1)
    assert np.all(curve.median_width >= 0.98)


def test_dirac_probe_sanov_contracts(sanov_mu):
    nu = estimate_stationary_measure(sanov_mu, grid_size=2048, seed=3)
    curve = dirac_convergence_probe(sanov_mu, nu, horizon=30, trials=6, seed=2)
    assert curve.median_width[-1] <= 1e-3
