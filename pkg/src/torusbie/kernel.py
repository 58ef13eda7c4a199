"""Double-layer kernel on a parametrized surface.

``K(theta, eta) = -(1/2pi) (Gamma(theta) - Gamma(eta)) . n(eta) / |Gamma(theta) - Gamma(eta)|^3``
with ``n = orientation_sign * dGamma/deta0 x dGamma/deta1``, and its sheared
form ``G(theta, v) = K(theta, theta + v)``. ``G(., v)`` is smooth in
``theta`` for every fixed nonzero offset, which is what the Fourier assembly
exploits.

All functions are vectorized: angle arguments carry a trailing axis of
length 2 and broadcast against each other.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .errors import SingularEvaluationError
from .surface import TWO_PI, SurfaceDescriptor, _split_angles

SINGULAR_THRESHOLD = 1e-14
_MINUS_INV_2PI = -1.0 / TWO_PI


def zeta(v) -> np.ndarray:
    """Periodic distance of an angular offset from the origin, in [0, sqrt(2) pi]."""
    v0, v1 = _split_angles(v)
    v0 = np.mod(v0, TWO_PI)
    v1 = np.mod(v1, TWO_PI)
    return np.hypot(np.minimum(v0, TWO_PI - v0), np.minimum(v1, TWO_PI - v1))


def wrap_offset(v) -> np.ndarray:
    """Map each component in [0, 2pi) to [-pi, pi): values >= pi shift by -2pi."""
    v = np.mod(np.asarray(v, dtype=float), TWO_PI)
    return np.where(v < math.pi, v, v - TWO_PI)


def distance_sq(s: SurfaceDescriptor, theta, v) -> np.ndarray:
    """``|Gamma(theta) - Gamma(theta + v)|^2``."""
    t0, t1 = _split_angles(theta)
    v0, v1 = _split_angles(v)
    x, _, _, _ = s.sample(t0, t1)
    y, _, _, _ = s.sample(t0 + v0, t1 + v1)
    return np.sum((x - y) ** 2, axis=0)


def _check_separation(v):
    z = zeta(v)
    if np.any(z < SINGULAR_THRESHOLD):
        raise SingularEvaluationError(
            f"kernel evaluated at coincident parameters (zeta = {float(np.min(z)):.3e})"
        )


def sheared_kernel_values(x, y, ny) -> np.ndarray:
    """``-(1/2pi) (x - y) . ny / d^{3/2}`` with ``d = |x - y|^2``; leading axis 3."""
    diff = x - y
    d = np.sum(diff * diff, axis=0)
    return _MINUS_INV_2PI * np.sum(diff * ny, axis=0) / (d * np.sqrt(d))


def kernel_K(s: SurfaceDescriptor, theta, eta) -> np.ndarray:
    """Double-layer kernel evaluated directly at the pair ``(theta, eta)``."""
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    _check_separation(theta - eta)
    t0, t1 = _split_angles(theta)
    e0, e1 = _split_angles(eta)
    x, _, _, _ = s.sample(t0, t1)
    y, _, _, ny = s.sample(e0, e1)
    x, y = np.broadcast_arrays(x, y)
    diff = x - y
    r = np.sqrt(np.sum(diff * diff, axis=0))
    return _MINUS_INV_2PI * np.sum(diff * ny, axis=0) / r**3


def kernel_G(s: SurfaceDescriptor, theta, v) -> np.ndarray:
    """Sheared kernel ``G(theta, v) = K(theta, theta + v)`` via the distance form."""
    v = np.asarray(v, dtype=float)
    _check_separation(v)
    t0, t1 = _split_angles(theta)
    v0, v1 = _split_angles(v)
    x, _, _, _ = s.sample(t0, t1)
    y, _, _, ny = s.sample(t0 + v0, t1 + v1)
    x, y = np.broadcast_arrays(x, y)
    return sheared_kernel_values(x, y, ny)


# ---------------------------------------------------------------------------
# Grid kernels for the assembly hot loop
# ---------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def sheared_kernel_grid_shift(x, nrm, stride, shift0, shift1, out):
    """G on a theta grid for an offset lying on a finer sample grid (index shift).

    ``x`` and ``nrm`` are sampled on an (L, L) grid with ``L = stride * m``;
    the theta grid is every ``stride``-th point and the shifted partner of
    fine index ``(P, Q)`` is ``((P + shift0) % L, (Q + shift1) % L)``.
    """
    big0 = x.shape[1]
    big1 = x.shape[2]
    m0 = out.shape[0]
    m1 = out.shape[1]
    c = -1.0 / (2.0 * np.pi)
    for p in range(m0):
        pf = p * stride
        pp = (pf + shift0) % big0
        for q in range(m1):
            qf = q * stride
            qq = (qf + shift1) % big1
            d0 = x[0, pf, qf] - x[0, pp, qq]
            d1 = x[1, pf, qf] - x[1, pp, qq]
            d2 = x[2, pf, qf] - x[2, pp, qq]
            d = d0 * d0 + d1 * d1 + d2 * d2
            num = d0 * nrm[0, pp, qq] + d1 * nrm[1, pp, qq] + d2 * nrm[2, pp, qq]
            out[p, q] = c * num / (d * np.sqrt(d))
    return out


@numba.njit(cache=True, nogil=True)
def sheared_kernel_grid(x, y, ny, out):
    """G on the theta grid given separately sampled shifted points ``y`` and normals ``ny``."""
    m0 = x.shape[1]
    m1 = x.shape[2]
    c = -1.0 / (2.0 * np.pi)
    for p in range(m0):
        for q in range(m1):
            d0 = x[0, p, q] - y[0, p, q]
            d1 = x[1, p, q] - y[1, p, q]
            d2 = x[2, p, q] - y[2, p, q]
            d = d0 * d0 + d1 * d1 + d2 * d2
            num = d0 * ny[0, p, q] + d1 * ny[1, p, q] + d2 * ny[2, p, q]
            out[p, q] = c * num / (d * np.sqrt(d))
    return out
