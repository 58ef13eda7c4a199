import math

import mpmath
import numpy as np
import pytest

from torusbie.errors import SingularEvaluationError
from torusbie.kernel import distance_sq, kernel_G, kernel_K, wrap_offset, zeta
from torusbie.surface import CATALOG_NAMES, get_surface, sample_grid

PI = math.pi


def _torus_kernel_mp(theta, eta):
    """High-precision double-layer kernel on the (2, 1) torus, straight from the definition."""
    mpmath.mp.dps = 40

    def gamma(t0, t1):
        return mpmath.matrix([(2 + mpmath.cos(t0)) * mpmath.cos(t1), (2 + mpmath.cos(t0)) * mpmath.sin(t1), mpmath.sin(t0)])

    e0, e1 = (mpmath.mpf(v) for v in eta)
    d0 = mpmath.matrix([-mpmath.sin(e0) * mpmath.cos(e1), -mpmath.sin(e0) * mpmath.sin(e1), mpmath.cos(e0)])
    d1 = mpmath.matrix([-(2 + mpmath.cos(e0)) * mpmath.sin(e1), (2 + mpmath.cos(e0)) * mpmath.cos(e1), 0])
    n = mpmath.matrix([d0[1] * d1[2] - d0[2] * d1[1], d0[2] * d1[0] - d0[0] * d1[2], d0[0] * d1[1] - d0[1] * d1[0]])
    diff = gamma(*(mpmath.mpf(v) for v in theta)) - gamma(e0, e1)
    r = mpmath.norm(diff)
    return float(-(diff[0] * n[0] + diff[1] * n[1] + diff[2] * n[2]) / (2 * mpmath.pi * r**3))


@pytest.mark.parametrize(
    "v, expected",
    [((0.0, 0.0), 0.0), ((PI, PI), math.sqrt(2) * PI), ((1.5 * PI, 0.5 * PI), PI / math.sqrt(2))],
)
def test_zeta_examples(v, expected):
    assert zeta(v) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize(
    "v, expected",
    [((PI / 2, 1.5 * PI), (PI / 2, -PI / 2)), ((0.0, 0.0), (0.0, 0.0)), ((PI, PI), (-PI, -PI))],
)
def test_wrap_offset_examples(v, expected):
    np.testing.assert_allclose(wrap_offset(v), expected, atol=1e-15)


def test_zeta_symmetry_and_wrap_identity(rng):
    v = rng.uniform(0, 2 * PI, (500, 2))
    np.testing.assert_allclose(zeta(v), zeta(2 * PI - v), atol=1e-13)
    np.testing.assert_allclose(zeta(v), np.linalg.norm(wrap_offset(v), axis=-1), atol=1e-13)


def test_distance_sq_examples():
    assert distance_sq(get_surface("bagel"), (0.0, 0.0), (PI, PI)) == pytest.approx(100.0, abs=1e-12)
    assert distance_sq(get_surface("torus"), (0.0, 0.0), (PI, PI)) == pytest.approx(16.0, abs=1e-12)
    assert distance_sq(get_surface("cruller"), (0.7, 2.1), (0.0, 0.0)) == 0.0


def test_kernel_torus_example_against_high_precision():
    s = get_surface("torus")
    oracle = _torus_kernel_mp((0, 0), (PI, PI))
    assert oracle == pytest.approx(1 / (32 * PI), rel=1e-14)
    assert kernel_K(s, (0.0, 0.0), (PI, PI)) == pytest.approx(oracle, rel=1e-13)
    assert kernel_G(s, (0.0, 0.0), (PI, PI)) == pytest.approx(oracle, rel=1e-13)


def test_kernel_random_pairs_against_high_precision(rng):
    s = get_surface("torus")
    for theta, eta in rng.uniform(0, 2 * PI, (10, 2, 2)):
        assert kernel_K(s, theta, eta) == pytest.approx(_torus_kernel_mp(theta, eta), rel=1e-11)


def test_kernel_singular_points_rejected():
    s = get_surface("bagel")
    with pytest.raises(SingularEvaluationError):
        kernel_K(s, (0.3, 0.4), (0.3, 0.4))
    with pytest.raises(SingularEvaluationError):
        kernel_G(s, (0.3, 0.4), (0.0, 2 * PI))


def test_orientation_negates_kernel(rng):
    s = get_surface("cruller")
    theta, eta = rng.uniform(0, 2 * PI, (2, 40, 2))
    np.testing.assert_allclose(kernel_K(s.flipped(), theta, eta), -kernel_K(s, theta, eta), rtol=1e-15)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_sheared_form_matches_direct_form(name, rng):
    s = get_surface(name)
    theta = rng.uniform(0, 2 * PI, (100, 2))
    v = rng.uniform(0.05, 2 * PI - 0.05, (100, 2))
    g = kernel_G(s, theta, v)
    k = kernel_K(s, theta, np.mod(theta + v, 2 * PI))
    np.testing.assert_allclose(g, k, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_sheared_kernel_periodic_in_theta(name, rng):
    s = get_surface(name)
    theta = rng.uniform(0, 2 * PI, (50, 2))
    v = rng.uniform(0.1, 2 * PI - 0.1, (50, 2))
    base = kernel_G(s, theta, v)
    for shift in ((2 * PI, 0.0), (0.0, 2 * PI)):
        np.testing.assert_allclose(kernel_G(s, theta + np.array(shift), v), base, atol=1e-12)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_weak_singularity_bound(name):
    # |G(theta, v)| zeta(v) stays bounded on a 64^4 grid (v = 0 excluded)
    s = get_surface(name)
    m = 64
    x, _, _, nrm = sample_grid(s, m)
    t = 2 * PI * np.arange(m) / m
    worst = 0.0
    for a in range(m):
        for b in range(m):
            if a == 0 and b == 0:
                continue
            y = np.roll(np.roll(x, -a, axis=1), -b, axis=2)
            ny = np.roll(np.roll(nrm, -a, axis=1), -b, axis=2)
            diff = x - y
            d = np.sum(diff * diff, axis=0)
            g = -np.sum(diff * ny, axis=0) / (2 * PI * d**1.5)
            worst = max(worst, float(np.abs(g).max()) * float(zeta((t[a], t[b]))))
    assert np.isfinite(worst) and worst < 50.0
