"""Torus-diffeomorphic parametric surfaces.

A surface is a smooth 2*pi-biperiodic map ``Gamma: [0, 2pi)^2 -> R^3``.
Every surface exposes its point map and both partial derivatives in closed
form; the unnormalized normal ``dGamma/dtheta0 x dGamma/dtheta1`` (scaled by
``orientation_sign``) carries the surface-area Jacobian.

Angles are passed as arrays whose last axis has length 2, and results carry
a trailing axis of length 3::

    >>> eval_surface(get_surface("bagel"), (0.0, 0.0))
    array([8., 0., 0.])
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from .errors import SurfaceCatalogError

TWO_PI = 2.0 * math.pi

# Geometry callback: (theta0, theta1) -> (points, d/dtheta0, d/dtheta1),
# each of shape (3,) + broadcast(theta0, theta1).shape.
GeometryFn = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class SurfaceDescriptor:
    """Named parametrization plus orientation.

    Attributes
    ----------
    name : str
        Catalog or user-registered name.
    parameters : tuple of (str, float)
        Named shape parameters, informational only.
    orientation_sign : int
        +1 or -1, multiplies the cross product of the partial derivatives.
    """

    name: str
    parameters: Tuple[Tuple[str, float], ...] = ()
    orientation_sign: int = 1
    geometry: GeometryFn = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.orientation_sign not in (1, -1):
            raise ValueError(f"orientation_sign must be +1 or -1, got {self.orientation_sign}")
        if self.geometry is None:
            raise SurfaceCatalogError(f"surface {self.name!r} has no geometry")

    def with_orientation(self, sign: int) -> "SurfaceDescriptor":
        return dataclasses.replace(self, orientation_sign=int(sign))

    def flipped(self) -> "SurfaceDescriptor":
        return self.with_orientation(-self.orientation_sign)

    def sample(self, theta0, theta1):
        """Return ``(points, d0, d1, normal)`` with a leading axis of length 3.

        This is the array-first layout used by the assembly loops; the public
        ``eval_*`` helpers move the component axis to the end.
        """
        t0 = np.mod(np.asarray(theta0, dtype=float), TWO_PI)
        t1 = np.mod(np.asarray(theta1, dtype=float), TWO_PI)
        t0, t1 = np.broadcast_arrays(t0, t1)
        x, d0, d1 = self.geometry(t0, t1)
        x = np.asarray(x, dtype=float)
        d0 = np.asarray(d0, dtype=float)
        d1 = np.asarray(d1, dtype=float)
        nrm = self.orientation_sign * _cross0(d0, d1)
        return x, d0, d1, nrm


def _cross0(a, b):
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def _split_angles(theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1:] != (2,):
        raise ValueError(f"angles must have a trailing axis of length 2, got shape {theta.shape}")
    return theta[..., 0], theta[..., 1]


# ---------------------------------------------------------------------------
# Catalog parametrizations
# ---------------------------------------------------------------------------


def _torus_geometry(major: float, minor: float) -> GeometryFn:
    def geometry(t0, t1):
        c0, s0, c1, s1 = np.cos(t0), np.sin(t0), np.cos(t1), np.sin(t1)
        ring = major + minor * c0
        x = np.stack([ring * c1, ring * s1, minor * s0])
        d0 = np.stack([-minor * s0 * c1, -minor * s0 * s1, minor * c0])
        d1 = np.stack([-ring * s1, ring * c1, np.zeros_like(t0)])
        return x, d0, d1

    return geometry


def _bagel_geometry(major: float, minor: float, wobble: float) -> GeometryFn:
    # [(R + r cos t0)(1 + w sin t1) cos t1, (R + r cos t0)(1 + w sin t1) sin t1, r sin t0]
    def geometry(t0, t1):
        c0, s0, c1, s1 = np.cos(t0), np.sin(t0), np.cos(t1), np.sin(t1)
        ring = major + minor * c0
        scale = 1.0 + wobble * s1
        x = np.stack([ring * scale * c1, ring * scale * s1, minor * s0])
        dring = -minor * s0
        d0 = np.stack([dring * scale * c1, dring * scale * s1, minor * c0])
        d1 = np.stack([
            ring * (wobble * c1 * c1 - scale * s1),
            ring * (wobble * c1 * s1 + scale * c1),
            np.zeros_like(t0),
        ])
        return x, d0, d1

    return geometry


def _cruller_geometry(major: float, mean_radius: float, amplitude: float, lobes: int) -> GeometryFn:
    # tube radius w(t) = mean_radius + amplitude * cos(lobes * (t0 + t1))
    def geometry(t0, t1):
        c0, s0, c1, s1 = np.cos(t0), np.sin(t0), np.cos(t1), np.sin(t1)
        phase = lobes * (t0 + t1)
        w = mean_radius + amplitude * np.cos(phase)
        dw = -lobes * amplitude * np.sin(phase)  # same for both angles
        ring = major + w * c0
        dring0 = dw * c0 - w * s0
        dring1 = dw * c0
        x = np.stack([ring * c1, ring * s1, w * s0])
        d0 = np.stack([dring0 * c1, dring0 * s1, dw * s0 + w * c0])
        d1 = np.stack([dring1 * c1 - ring * s1, dring1 * s1 + ring * c1, dw * s0])
        return x, d0, d1

    return geometry


def _catalog() -> Dict[str, SurfaceDescriptor]:
    return {
        "torus": SurfaceDescriptor(
            "torus", (("major", 2.0), ("minor", 1.0)), 1, _torus_geometry(2.0, 1.0)
        ),
        "bagel": SurfaceDescriptor(
            "bagel",
            (("major", 5.0), ("minor", 3.0), ("wobble", 0.5)),
            1,
            _bagel_geometry(5.0, 3.0, 0.5),
        ),
        "cruller": SurfaceDescriptor(
            "cruller",
            (("major", 1.0), ("mean_radius", 0.5), ("amplitude", 0.065), ("lobes", 3.0)),
            1,
            _cruller_geometry(1.0, 0.5, 0.065, 3),
        ),
    }


_REGISTRY: Dict[str, SurfaceDescriptor] = _catalog()
CATALOG_NAMES = ("torus", "bagel", "cruller")


def get_surface(name: str, orientation_sign: int = 1) -> SurfaceDescriptor:
    """Look up a catalog or registered surface by name."""
    try:
        surf = _REGISTRY[name]
    except KeyError:
        raise SurfaceCatalogError(
            f"unknown surface {name!r}; known: {', '.join(sorted(_REGISTRY))}"
        ) from None
    return surf.with_orientation(orientation_sign)


def register_surface(name, components, partials, parameters=(), overwrite=False) -> SurfaceDescriptor:
    """Register a user parametrization.

    Parameters
    ----------
    name : str
    components : sequence of 3 callables
        ``gamma_j(theta0, theta1)`` for j = 0, 1, 2, vectorized over arrays.
    partials : sequence of 6 callables
        ``d gamma_j / d theta_i`` ordered as
        ``(dg0/dt0, dg1/dt0, dg2/dt0, dg0/dt1, dg1/dt1, dg2/dt1)``.
    """
    if len(components) != 3 or len(partials) != 6:
        raise ValueError("need 3 component functions and 6 partial-derivative functions")
    if name in _REGISTRY and not overwrite:
        raise ValueError(f"surface {name!r} already registered")
    comps = tuple(components)
    parts = tuple(partials)

    def geometry(t0, t1):
        shape = np.broadcast(t0, t1).shape

        def ev(f):
            return np.broadcast_to(np.asarray(f(t0, t1), dtype=float), shape)

        x = np.stack([ev(f) for f in comps])
        d0 = np.stack([ev(f) for f in parts[:3]])
        d1 = np.stack([ev(f) for f in parts[3:]])
        return x, d0, d1

    surf = SurfaceDescriptor(name, tuple(parameters), 1, geometry)
    _REGISTRY[name] = surf
    return surf


# ---------------------------------------------------------------------------
# Pointwise evaluation
# ---------------------------------------------------------------------------


def eval_surface(s: SurfaceDescriptor, theta) -> np.ndarray:
    """Gamma(theta); angles are reduced mod 2*pi."""
    x, _, _, _ = s.sample(*_split_angles(theta))
    return np.moveaxis(x, 0, -1)


def eval_jacobian(s: SurfaceDescriptor, theta) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-form ``(dGamma/dtheta0, dGamma/dtheta1)``."""
    _, d0, d1, _ = s.sample(*_split_angles(theta))
    return np.moveaxis(d0, 0, -1), np.moveaxis(d1, 0, -1)


def normal_vector(s: SurfaceDescriptor, theta) -> np.ndarray:
    """``orientation_sign * (dGamma/dtheta0 x dGamma/dtheta1)``, not normalized."""
    _, _, _, nrm = s.sample(*_split_angles(theta))
    return np.moveaxis(nrm, 0, -1)


def angle_grid(m: int, offset: float = 0.0) -> np.ndarray:
    """Uniform 1-D grid ``(j + offset) * 2pi/m`` for j in 0..m-1."""
    return (np.arange(m) + offset) * (TWO_PI / m)


def sample_grid(s: SurfaceDescriptor, m: int, offset: float = 0.0):
    """Sample ``(points, d0, d1, normal)`` on the tensor grid, each (3, m, m)."""
    t = angle_grid(m, offset)
    t0, t1 = np.meshgrid(t, t, indexing="ij")
    return s.sample(t0, t1)


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------


def estimate_injectivity_constant(s: SurfaceDescriptor, samples_per_axis: int) -> float:
    """Brute-force ``min ||Gamma(theta) - Gamma(eta)|| / zeta(theta - eta)``.

    Both points range over the uniform ``samples_per_axis``-point grid; the
    coincident pairs are skipped. A clearly positive value supports the
    lower-Lipschitz assumption the solver relies on.
    """
    m = int(samples_per_axis)
    if m < 8:
        raise ValueError("samples_per_axis must be >= 8")
    x, _, _, _ = sample_grid(s, m)
    t = angle_grid(m)
    wrapped = np.minimum(t, TWO_PI - t)
    best = np.inf
    for a in range(m):
        shifted_rows = np.roll(x, -a, axis=1)
        for b in range(m):
            if a == 0 and b == 0:
                continue
            y = np.roll(shifted_rows, -b, axis=2)
            dist = np.sqrt(np.sum((x - y) ** 2, axis=0)).min()
            best = min(best, dist / math.hypot(wrapped[a], wrapped[b]))
    return float(best)


def check_periodicity(s: SurfaceDescriptor, tol: float, samples: int = 64, seed: int = 0) -> bool:
    """True iff Gamma and its partials agree at theta and theta + 2pi e_i.

    Evaluation bypasses the internal mod-2pi reduction so the closed forms
    themselves are tested.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    t0 = rng.uniform(0.0, TWO_PI, samples)
    t1 = rng.uniform(0.0, TWO_PI, samples)
    ref = s.geometry(t0, t1)
    worst = 0.0
    for s0, s1 in ((TWO_PI, 0.0), (0.0, TWO_PI), (-TWO_PI, TWO_PI)):
        shifted = s.geometry(t0 + s0, t1 + s1)
        for a, b in zip(ref, shifted):
            worst = max(worst, float(np.max(np.abs(np.asarray(a) - np.asarray(b)))))
    return worst <= tol
