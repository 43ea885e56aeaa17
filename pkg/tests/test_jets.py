import numpy as np
import pytest

from circlelab.jets import (
    Jet3,
    compose,
    identity_jet,
    log_and_schwarzian,
    projective_schwarzian,
    schwarzian,
)
from circlelab.maps import MobiusMap, Word, rotation


def random_jet(rng):
    return Jet3(rng.random(), 0.2 + rng.random(), rng.standard_normal(), rng.standard_normal())


def test_identity_jet():
    j = identity_jet(0.37)
    assert (j.value, j.d1, j.d2, j.d3) == (0.37, 1.0, 0.0, 0.0)


def test_composition_associative():
    rng = np.random.default_rng(11)
    for _ in range(200):
        a, b, c = (random_jet(rng) for _ in range(3))
        left = compose(a, compose(b, c))
        right = compose(compose(a, b), c)
        for f in ("d1", "d2", "d3"):
            x, y = getattr(left, f), getattr(right, f)
            assert abs(x - y) <= 1e-12 * max(1.0, abs(x), abs(y))


def test_affine_jet_has_zero_L_and_S():
    j = Jet3(0.3, 1.7, 0.0, 0.0)
    L, S = log_and_schwarzian(j)
    assert L == 0.0 and S == 0.0


def test_mobius_word_schwarzian():
    # In the angle coordinate a Mobius circle map satisfies the exact
    # identity S g = 2 pi^2 (1 - g'^2); equivalently the Schwarzian taken
    # relative to the projective structure vanishes.  Both are checked at
    # 100 random points on random words.
    rng = np.random.default_rng(5)
    mats = [MobiusMap([[1, 2], [0, 1]]), MobiusMap([[1, 0], [2, 1]]), rotation(0.3183)]
    for _ in range(10):
        letters = [mats[k] if s > 0 else mats[k].inverse()
                   for k, s in zip(rng.integers(0, 3, 6), rng.choice([-1, 1], 6))]
        w = Word(letters)
        xs = rng.random(10)
        j = w.jet(xs)
        S = schwarzian(j)
        assert np.max(np.abs(S - 2 * np.pi ** 2 * (1 - j.d1 ** 2))) < 1e-8 * max(1, np.max(np.abs(S)))
        assert np.max(np.abs(projective_schwarzian(j))) < 1e-10 * max(1.0, np.max(np.abs(S)))


def test_log_and_schwarzian_match_symbolic_trig():
    # phi(x) = x + eps sin(2 pi x): all derivatives in closed form
    from circlelab.maps import TrigConjugacy

    eps, x = 0.01, 0.3
    phi = TrigConjugacy([[0.0, eps]])
    j = phi.jet(x)
    w = 2 * np.pi
    d1 = 1 + eps * w * np.cos(w * x)
    d2 = -eps * w ** 2 * np.sin(w * x)
    d3 = -eps * w ** 3 * np.cos(w * x)
    L, S = log_and_schwarzian(j)
    L_true = d2 / d1
    S_true = d3 / d1 - 1.5 * (d2 / d1) ** 2
    assert abs(L - L_true) < 1e-12
    assert abs(S - S_true) < 1e-10


def test_cocycle_identities_on_random_words():
    # L(u o v) = (L u o v) v' + L v   and   S(u o v) = (S u o v) v'^2 + S v
    rng = np.random.default_rng(23)
    gens = [MobiusMap([[1, 2], [0, 1]]), MobiusMap([[1, 0], [2, 1]]), rotation(np.sqrt(2) - 1)]

    def rand_word(k):
        return Word([gens[i] if s > 0 else gens[i].inverse()
                     for i, s in zip(rng.integers(0, 3, k), rng.choice([-1, 1], k))])

    for _ in range(100):
        ku = int(rng.integers(1, 6))
        kv = int(rng.integers(1, 6))
        v, u = rand_word(kv), rand_word(ku)
        w = Word(v.factors + u.factors)  # u o v, v applied first
        x = rng.random(3)
        jv = v.jet(x)
        ju = u.jet(jv.value)
        jw = w.jet(x)
        Lu, Su = log_and_schwarzian(ju)
        Lv, Sv = log_and_schwarzian(jv)
        Lw, Sw = log_and_schwarzian(jw)
        L_pred = Lu * jv.d1 + Lv
        S_pred = Su * jv.d1 ** 2 + Sv
        assert np.max(np.abs(Lw - L_pred)) <= 1e-9 * max(1.0, np.max(np.abs(Lw)))
        assert np.max(np.abs(Sw - S_pred)) <= 1e-9 * max(1.0, np.max(np.abs(Sw)))


def test_orientation_guard():
    with pytest.raises(ValueError):
        log_and_schwarzian(Jet3(0.1, -0.5, 0.0, 0.0))
