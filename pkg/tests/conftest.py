import numpy as np
import pytest


def fd_jet(map_like, x, h1=1e-4, h3=1e-3):
    """Finite-difference oracle for the first three derivatives at x.

    Central stencils (steps h1 for orders 1-2, h3 for order 3) with one
    Richardson extrapolation each, so the truncation error is O(h^4).
    """
    def val(y):
        v = np.asarray(map_like.apply(np.asarray(y) % 1.0), dtype=float)
        ref = np.asarray(map_like.apply(np.asarray(x) % 1.0), dtype=float)
        return v + np.round(ref - v)

    def D1(h):
        return (val(x + h) - val(x - h)) / (2 * h)

    def D2(h):
        return (val(x + h) - 2 * val(x) + val(x - h)) / h ** 2

    def D3(h):
        return (val(x + 2 * h) - 2 * val(x + h) + 2 * val(x - h) - val(x - 2 * h)) / (2 * h ** 3)

    d1 = (4 * D1(h1 / 2) - D1(h1)) / 3
    d2 = (4 * D2(h1 / 2) - D2(h1)) / 3
    d3 = (4 * D3(h3 / 2) - D3(h3)) / 3
    return d1, d2, d3


@pytest.fixture(scope="session")
def sanov_atoms():
    from circlelab.maps import make_generator

    A = make_generator([[1, 2], [0, 1]])
    B = make_generator([[1, 0], [2, 1]])
    return [A, A.inverse(), B, B.inverse()]


@pytest.fixture(scope="session")
def sanov_mu(sanov_atoms):
    from circlelab.walk import make_step_distribution

    return make_step_distribution(
        sanov_atoms, [0.25] * 4, symmetric=True, names=["a", "a'", "b", "b'"]
    )
