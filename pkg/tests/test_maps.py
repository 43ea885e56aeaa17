import numpy as np
import pytest
from conftest import fd_jet

from circlelab.circle import Arc, circle_dist
from circlelab.maps import (
    ConjugatedMap,
    LiftedMap,
    MobiusMap,
    TrigConjugacy,
    Word,
    affine_distortion,
    distortion_over_points,
    eval_jet3,
    holder_seminorm,
    linearizing_chart,
    make_generator,
    rho_lower_bound,
    rotation,
    sup_abs_L,
)

HYP = MobiusMap([[0.5, 0.0], [0.0, 2.0]])


def rand_mobius_word(rng, k, allow_rotation=True):
    gens = [MobiusMap([[1, 2], [0, 1]]), MobiusMap([[1, 0], [2, 1]])]
    if allow_rotation:
        gens.append(rotation(np.sqrt(2) - 1))
    return Word([gens[i] if s > 0 else gens[i].inverse()
                 for i, s in zip(rng.integers(0, len(gens), k), rng.choice([-1, 1], k))])


# -- make_generator ----------------------------------------------------------

def test_identity_generator_jet():
    g = make_generator([[1, 0], [0, 1]])
    xs = np.linspace(0, 0.99, 7)
    j = g.jet(xs)
    assert np.allclose(j.value, xs) and np.allclose(j.d1, 1) and np.allclose(j.d2, 0) and np.allclose(j.d3, 0)


def test_hyperbolic_generator_derivative_at_fixed_point():
    # diag(1/2, 2) acts as t -> t/4 in the affine chart; multiplier 1/4 at x = 0
    g = make_generator([[0.5, 0], [0, 2]])
    j = g.jet(0.0)
    assert abs(j.value - 0.0) < 1e-15
    assert abs(j.d1 - 0.25) < 1e-14


def test_rotation_generator_is_isometry():
    theta = 0.2718
    g = rotation(theta)
    xs = np.linspace(0, 0.95, 11)
    j = g.jet(xs)
    assert np.allclose(circle_dist(j.value, (xs + theta) % 1.0), 0, atol=1e-14)
    assert np.allclose(j.d1, 1, atol=1e-14)
    assert np.allclose(j.d2, 0, atol=1e-12)
    assert np.allclose(j.d3, 0, atol=1e-11)


def test_make_generator_rejects_bad_input():
    with pytest.raises(ValueError):
        make_generator([[1, 1], [1, 1]])            # singular
    with pytest.raises(ValueError):
        make_generator([[0, 1], [1, 0]])            # orientation-reversing
    with pytest.raises(ValueError):
        make_generator([[1, 0], [0, 1]], conjugator=[[0.0, 0.4]])  # lift not monotone


# -- eval_jet3 ---------------------------------------------------------------

def test_word_inverse_cancellation():
    rng = np.random.default_rng(3)
    w = rand_mobius_word(rng, 10)
    ww = Word(w.factors + w.inverse().factors)
    xs = rng.random(5)
    j = ww.jet(xs)
    assert np.max(circle_dist(j.value, xs)) < 1e-9
    assert np.max(np.abs(j.d1 - 1)) < 1e-9
    assert np.max(np.abs(j.d2)) < 1e-8
    assert np.max(np.abs(j.d3)) < 1e-7


def test_jets_match_finite_differences():
    rng = np.random.default_rng(17)
    for _ in range(12):
        w = rand_mobius_word(rng, int(rng.integers(1, 6)))
        x = float(rng.random())
        j = w.jet(x)
        f1, f2, f3 = fd_jet(w, x)
        assert abs(f1 - j.d1) <= 1e-5 * max(1.0, abs(j.d1))
        assert abs(f2 - j.d2) <= 1e-5 * max(1.0, abs(j.d2), abs(j.d1))
        assert abs(f3 - j.d3) <= 1e-4 * max(10.0, abs(j.d3))


def test_jets_match_finite_differences_length_10():
    rng = np.random.default_rng(29)
    for _ in range(5):
        w = rand_mobius_word(rng, 10)
        x = float(rng.random())
        j = w.jet(x)
        f1, f2, f3 = fd_jet(w, x, h1=1e-5, h3=1e-3)
        scale = max(1.0, abs(j.d1))
        assert abs(f1 - j.d1) <= 1e-5 * scale
        assert abs(f2 - j.d2) <= 1e-4 * max(1.0, abs(j.d2))
        assert abs(f3 - j.d3) <= 1e-3 * max(1.0, abs(j.d3))


# -- conjugated generators ---------------------------------------------------

def test_conjugated_generator_roundtrip_and_jets():
    conj = [[0.01, -0.02], [0.005, 0.003]]
    g = make_generator([[1, 2], [0, 1]], conjugator=conj)
    assert isinstance(g, ConjugatedMap)
    rng = np.random.default_rng(7)
    xs = rng.random(9)
    back = g.inverse().apply(g.apply(xs))
    assert np.max(circle_dist(back, xs)) < 1e-10
    x = 0.4321
    j = g.jet(x)
    f1, f2, f3 = fd_jet(g, x)
    assert abs(f1 - j.d1) <= 1e-5 * max(1.0, abs(j.d1))
    assert abs(f2 - j.d2) <= 1e-4 * max(1.0, abs(j.d2))
    assert abs(f3 - j.d3) <= 1e-3 * max(1.0, abs(j.d3))


def test_trig_conjugacy_inverse_jet():
    c = TrigConjugacy([[0.03, 0.01]])
    ci = c.inverse()
    x = 0.27
    j = ci.jet(x)
    f1, f2, f3 = fd_jet(ci, x)
    assert abs(f1 - j.d1) < 1e-6
    assert abs(f2 - j.d2) < 1e-4
    assert abs(f3 - j.d3) < 1e-2 * max(1.0, abs(j.d3))


# -- lifted maps -------------------------------------------------------------

def test_lifted_map_roundtrip_and_commutation():
    base = MobiusMap([[1, 2], [0, 1]])
    for k in (2, 3):
        for j in range(k):
            g = LiftedMap(base, k, j)
            xs = np.linspace(0.01, 0.99, 23)
            back = g.inverse().apply(g.apply(xs))
            assert np.max(circle_dist(back, xs)) < 1e-10
            # commutes with rotation by 1/k
            lhs = g.apply((xs + 1.0 / k) % 1.0)
            rhs = (g.apply(xs) + 1.0 / k) % 1.0
            assert np.max(circle_dist(lhs, rhs)) < 1e-12


def test_lifted_map_jets():
    g = LiftedMap(MobiusMap([[1, 0], [2, 1]]), 2, 1)
    x = 0.355
    j = g.jet(x)
    f1, f2, f3 = fd_jet(g, x)
    assert abs(f1 - j.d1) <= 1e-5 * max(1.0, abs(j.d1))
    assert abs(f2 - j.d2) <= 1e-4 * max(1.0, abs(j.d2))
    assert abs(f3 - j.d3) <= 1e-3 * max(1.0, abs(j.d3))


# -- affine distortion -------------------------------------------------------

def test_distortion_of_rotation_vanishes():
    assert affine_distortion(rotation(0.37), Arc(0.2, 0.4), 256) < 1e-12


def test_distortion_symmetry_on_matched_grids():
    g = HYP
    arc = Arc(0.1, 0.1)
    pts = arc.grid(512)
    image_pts = g.apply(pts)
    k1 = distortion_over_points(g, pts)
    k2 = distortion_over_points(g.inverse(), image_pts)
    assert abs(k1 - k2) < 1e-9


def test_distortion_dense_grid_oracle():
    arc = Arc(0.1, 0.1)
    k_coarse = affine_distortion(HYP, arc, 1000)
    k_dense = affine_distortion(HYP, arc, 100_000)
    assert abs(k_coarse - k_dense) < 1e-6


def test_distortion_monotone_under_nested_refinement():
    rng = np.random.default_rng(31)
    w = rand_mobius_word(rng, 4)
    arc = Arc(0.33, 0.21)
    vals = [affine_distortion(w, arc, n) for n in (17, 33, 65, 129)]  # nested grids
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    assert vals[0] >= 0


def test_distortion_subadditivity():
    rng = np.random.default_rng(41)
    for _ in range(10):
        u = rand_mobius_word(rng, 3)
        v = rand_mobius_word(rng, 3)
        arc = Arc(float(rng.random()), 0.05 + 0.1 * float(rng.random()))
        image = Arc.from_endpoints(float(v.apply(arc.left)), float(v.apply(arc.right)))
        k_uv = affine_distortion(Word(v.factors + u.factors), arc, 257)
        k_u = affine_distortion(u, image, 257)
        k_v = affine_distortion(v, arc, 257)
        assert k_uv <= k_u + k_v + 1e-6


def test_degenerate_arc_rejected():
    with pytest.raises(ValueError):
        Arc(0.3, 0.0)
    with pytest.raises(ValueError):
        affine_distortion(HYP, Arc(0.3, 0.2), 1)


# -- Holder seminorm ---------------------------------------------------------

def test_holder_rotation_zero():
    assert holder_seminorm(rotation(0.123), 0.5, 512) < 1e-9


def test_holder_tau1_matches_sup_L():
    val = holder_seminorm(HYP, 1.0, 4096)
    supL = sup_abs_L(HYP, 4096)
    assert abs(val - supL) <= 0.01 * supL


def test_holder_grid_stability():
    v_coarse = holder_seminorm(HYP, 0.5, 1000)
    v_dense = holder_seminorm(HYP, 0.5, 100_000)
    assert abs(v_coarse - v_dense) <= 0.05 * v_dense


# -- linearizing chart -------------------------------------------------------

def test_chart_diagonal_case():
    ch = linearizing_chart(HYP)
    assert abs(ch.alpha - 0.25) < 1e-14
    assert abs(ch.fixed_point - 0.0) < 1e-14
    # chart is the identity germ: derivative 1 at the fixed point
    xs = np.array([1e-4, -1e-4 % 1.0])
    ys = ch.to_chart(xs)
    assert np.allclose(ys, [1e-4, -1e-4], rtol=1e-6)


def test_chart_rejects_non_hyperbolic():
    with pytest.raises(ValueError, match="not hyperbolic"):
        linearizing_chart(rotation(0.25))
    with pytest.raises(ValueError, match="pure Mobius"):
        linearizing_chart(make_generator([[0.5, 0], [0, 2]], conjugator=[[0.01, 0.0]]))


def test_chart_conjugated_hyperbolic_exact_linearization():
    R = rotation(0.2)
    H = Word((R.inverse(), HYP, R)).as_mobius()  # R o HYP o R^{-1}
    ch = linearizing_chart(H)
    ys = np.linspace(-0.01, 0.01, 41)
    conj = ch.to_chart(H.apply(ch.from_chart(ys)))
    assert np.max(np.abs(conj - 0.25 * ys)) < 1e-12


# -- analytic extension width ------------------------------------------------

def test_rho_rotation_infinite():
    assert np.isinf(rho_lower_bound(rotation(0.3)))


def test_rho_hyperbolic_closed_form():
    assert abs(rho_lower_bound(HYP) - np.log(5.0 / 3.0) / (2 * np.pi)) < 1e-12


def test_rho_conjugated_bound_never_refuted_by_scan():
    conj = TrigConjugacy([[0.01, -0.005]])
    g = ConjugatedMap(MobiusMap([[0.5, 0], [0, 2]]), conj)
    r = rho_lower_bound(g)
    assert r > 0
    # injectivity scan on the certified annulus: extension stays finite,
    # derivative stays away from 0, and grid points remain pairwise distinct
    re = np.linspace(0, 1, 60, endpoint=False)
    im = np.linspace(-r, r, 7)
    z = (re[None, :] + 1j * im[:, None]).ravel()
    t = conj.inverse_value(np.real(z)) + 1j * np.imag(z)  # crude lift of c^{-1} near the circle
    w = g.mobius.cval(t)
    assert np.all(np.isfinite(w))
    d = g.mobius.cderiv(t)
    assert np.all(np.abs(d) > 0)
