import numpy as np
import pytest

from circlelab.circle import Arc
from circlelab.maps import MobiusMap, Word, rotation
from circlelab.measure import estimate_stationary_measure, lyapunov_exponent
from circlelab.nearid import (
    DistortionWindowError,
    EndgameViolation,
    NearIdentityReport,
    ck_distance_to_identity,
    endgame_estimates,
    kappa_m_solve,
    search_near_identity_pairs,
)
from circlelab.walk import make_step_distribution


def dense_l(alpha=0.85):
    s = np.sqrt(alpha)
    return MobiusMap([[s, 0.0], [0.0, 1.0 / s]])


@pytest.fixture(scope="module")
def dense_setup():
    # weakly hyperbolic l plus an irrational rotation; weights lean on the
    # rotation so kappa_m stays solvable down to m = 5
    l = dense_l()
    R = rotation(np.sqrt(2) - 1)
    mu = make_step_distribution([l, l.inverse(), R, R.inverse()], [0.3, 0.3, 0.2, 0.2],
                                symmetric=True, names=["l", "l'", "r", "r'"])
    nu = estimate_stationary_measure(mu, grid_size=2048, seed=2)
    lam = lyapunov_exponent(mu, nu, n_steps=3000, trajectories=32,
                            integral_samples=20_000, seed=3).value
    return mu, l, nu, lam


# -- kappa_m solver ------------------------------------------------------------

def test_kappa_small_gap_asymptotics():
    k = kappa_m_solve(1e-6, tau=1.0)
    assert abs(k - 1e-6) < 1e-9


def test_kappa_boundary_rejected():
    with pytest.raises(DistortionWindowError):
        kappa_m_solve(np.exp(-1.0), tau=1.0)


def test_kappa_root_matches_bisection_oracle():
    gap, tau = 0.1, 1.0
    lo, hi = 1e-12, 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid * np.exp(-mid) < gap:
            lo = mid
        else:
            hi = mid
    k = kappa_m_solve(gap, tau)
    assert abs(k - 0.5 * (lo + hi)) < 1e-10
    assert abs(k * np.exp(-k) - gap) <= 1e-12


def test_kappa_returns_smaller_root():
    # below the maximizer 1/tau, where kappa^{1/tau} e^{-kappa} increases
    for tau, gap in ((1.0, 0.2), (0.5, 0.3), (0.5, 0.5)):
        k = kappa_m_solve(gap, tau)
        assert 0 < k < 1.0 / tau


def test_kappa_residual_precision():
    for gap in (1e-4, 0.01, 0.3):
        k = kappa_m_solve(gap, 1.0)
        assert abs(k * np.exp(-k) - gap) <= 1e-12


# -- ck distance ----------------------------------------------------------------

def test_ck_identity_word():
    w = Word(())
    assert ck_distance_to_identity(w, Arc(0.1, 0.2), 3) == 0.0


def test_ck_cancelling_word():
    g = MobiusMap([[1, 2], [0, 1]])
    w = Word((g, rotation(0.3), rotation(0.3).inverse(), g.inverse()))
    assert ck_distance_to_identity(w, Arc(0.1, 0.2), 3) < 1e-9


def test_ck_small_rotation_exact():
    w = Word((rotation(1e-4),))
    assert abs(ck_distance_to_identity(w, Arc(0.3, 0.1), 1) - 1e-4) < 1e-12


# -- the search -------------------------------------------------------------------

def test_search_dense_finds_pairs(dense_setup):
    mu, l, nu, lam = dense_setup
    reports, misses = search_near_identity_pairs(
        mu, l, eta=0.02, m_range=range(5, 13), nu=nu, lam=lam, h_nu=0.05,
        samples=8192, seed=7)
    found_m = {r.m for r in reports}
    assert found_m == set(range(5, 13)), f"misses: {[(x.m, x.reason) for x in misses]}"
    for r in reports:
        assert r.pair_keys[0] != r.pair_keys[1]
        assert r.derivative_gap <= 1.0 / r.m + 1e-12
        assert r.kappa_g_measured <= r.kappa_m * (1 + 1e-6)
        assert r.kappa_h_measured <= r.kappa_m * (1 + 1e-6)
        assert r.ck_distances[0] > 0


def test_search_sanov_discrete_no_near_identity(sanov_mu, sanov_atoms):
    nu = estimate_stationary_measure(sanov_mu, grid_size=2048, seed=3)
    l = Word((sanov_atoms[2], sanov_atoms[0])).as_mobius()   # hyperbolic A B
    reports, misses = search_near_identity_pairs(
        sanov_mu, l, eta=0.05, m_range=range(5, 9), nu=nu, lam=-0.64, h_nu=0.55,
        samples=3000, seed=11)
    for r in reports:
        assert r.ck_distances[0] > 1e-3
    assert len(reports) + len(misses) == 4


def test_search_degenerate_singleton(dense_setup):
    mu, l, nu, lam = dense_setup
    reports, misses = search_near_identity_pairs(
        mu, l, eta=0.02, m_range=[1], nu=nu, lam=lam, h_nu=0.05,
        samples=1, seed=1)
    assert reports == []
    assert len(misses) == 1


# -- endgame ---------------------------------------------------------------------

def test_endgame_on_dense_pair(dense_setup):
    mu, l, nu, lam = dense_setup
    reports, _ = search_near_identity_pairs(
        mu, l, eta=0.02, m_range=[10], nu=nu, lam=lam, h_nu=0.05,
        samples=8192, seed=7)
    assert reports
    rep = endgame_estimates(reports[0])
    assert rep.sandwich_ok
    assert rep.overlap_fraction_g >= reports[0].c_m
    assert rep.sup_log_phi_prime <= rep.log_phi_bound
    assert rep.ls_formula_error <= 1e-9
    assert not rep.ratio_check_skipped


def test_endgame_identical_pair_trivial(dense_setup):
    mu, l, nu, lam = dense_setup
    reports, _ = search_near_identity_pairs(
        mu, l, eta=0.02, m_range=[8], nu=nu, lam=lam, h_nu=0.05,
        samples=8192, seed=7)
    r = reports[0]
    twin = NearIdentityReport(
        m=r.m, walk_length=r.walk_length, pair_keys=(r.pair_keys[0], r.pair_keys[0]),
        kappa_m=r.kappa_m, c_m=r.c_m, ck_distances=(0, 0, 0),
        bucket_count=r.bucket_count, bucket_occupancy=r.bucket_occupancy,
        derivative_gap=0.0, kappa_g_measured=r.kappa_g_measured,
        kappa_h_measured=r.kappa_g_measured,
        g_word=r.g_word, h_word=r.g_word, chart=r.chart, eta=r.eta)
    rep = endgame_estimates(twin)
    assert rep.sup_log_phi_prime < 1e-9
    assert rep.overlap_fraction_g > 0.99


def test_endgame_condition2_violation_skips_ratio_check(dense_setup):
    mu, l, nu, lam = dense_setup
    reports, _ = search_near_identity_pairs(
        mu, l, eta=0.02, m_range=[8], nu=nu, lam=lam, h_nu=0.05,
        samples=8192, seed=7)
    r = reports[0]
    # replace h by h o l^3: the fixed-point derivatives now differ by
    # 3 |log alpha| >> 1/m, a tenfold condition-2 violation
    h_bad = Word((l,) * 3 + r.h_word.factors)
    bad = NearIdentityReport(
        m=r.m, walk_length=r.walk_length, pair_keys=r.pair_keys,
        kappa_m=r.kappa_m, c_m=r.c_m, ck_distances=r.ck_distances,
        bucket_count=r.bucket_count, bucket_occupancy=r.bucket_occupancy,
        derivative_gap=3 * abs(np.log(0.85)), kappa_g_measured=r.kappa_g_measured,
        kappa_h_measured=r.kappa_h_measured,
        g_word=r.g_word, h_word=h_bad, chart=r.chart, eta=r.eta)
    rep = endgame_estimates(bad, condition2_violated=True)
    assert rep.ratio_check_skipped
    assert rep.sandwich_ok
