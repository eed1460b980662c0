import numpy as np
import pytest

from jumpwave import piecewise_constant_system


def random_well_conditioned(rng, n, cond_max=50.0):
    """Random invertible matrix with a modest condition number."""
    while True:
        A = rng.standard_normal((n, n))
        if np.linalg.cond(A) < cond_max:
            return A


def random_hyperbolic_matrix(rng, n, signs=None, speed_range=(0.3, 3.0), min_gap=0.15):
    """Random strictly hyperbolic matrix with prescribed family signs.

    Built as A diag(lambdas) A_inv from a well-conditioned random basis, so
    the spectrum is known by construction.
    """
    lo, hi = speed_range
    if signs is None:
        k = rng.integers(0, n + 1)
        signs = [-1] * k + [1] * (n - k)
    mags = np.sort(rng.uniform(lo, hi, size=n))
    lams = np.sort(np.array(signs, dtype=float) * mags)
    while np.min(np.diff(lams)) < min_gap if n > 1 else False:
        mags = np.sort(rng.uniform(lo, hi, size=n))
        lams = np.sort(np.array(signs, dtype=float) * mags)
    A = random_well_conditioned(rng, n)
    return (A * lams) @ np.linalg.inv(A), lams


def random_system(rng, n, m, signs=None, interface_span=(-1.0, 1.0)):
    """Random sign-consistent piecewise-constant system with m interfaces."""
    if signs is None:
        k = int(rng.integers(0, n + 1))
        signs = [-1] * k + [1] * (n - k)
    mats = [random_hyperbolic_matrix(rng, n, signs=signs)[0] for _ in range(m + 1)]
    lo, hi = interface_span
    interfaces = np.sort(rng.uniform(lo, hi, size=m))
    while m > 1 and np.min(np.diff(interfaces)) < 0.1 * (hi - lo):
        interfaces = np.sort(rng.uniform(lo, hi, size=m))
    return piecewise_constant_system(mats, interfaces)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
