"""Bivariate Fourier coefficient algebra.

Basis: ``e_k(theta) = exp(i k . theta) / (2 pi)``, orthonormal in
L2([0, 2pi)^2). A :class:`CoeffGrid` of bandwidth ``n`` stores
``<phi, e_k>`` for ``k in [-n, n]^2`` at array position ``(k0 + n, k1 + n)``;
the flattened (linear) index of ``k`` is ``(k0 + n)(2n + 1) + (k1 + n)``,
which is also the row/column ordering of every Galerkin matrix.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import AliasingError, ValidationError

TWO_PI = 2.0 * math.pi
CSV_HEADER = ("k0", "k1", "re", "im")


def make_index_set(n: int) -> np.ndarray:
    """All ``k`` in ``[-n, n]^2`` in lexicographic order, shape ((2n+1)^2, 2)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    r = np.arange(-n, n + 1)
    k0, k1 = np.meshgrid(r, r, indexing="ij")
    return np.stack([k0.ravel(), k1.ravel()], axis=1)


def linear_index(k, n: int):
    """Position of multi-index ``k`` (trailing axis 2) in ``make_index_set(n)``."""
    k = np.asarray(k)
    return (k[..., 0] + n) * (2 * n + 1) + (k[..., 1] + n)


@dataclass
class CoeffGrid:
    """Fourier coefficients on ``[-n, n]^2``."""

    n: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        side = 2 * self.n + 1
        if self.data.shape != (side, side):
            raise ValueError(f"data shape {self.data.shape} != ({side}, {side})")

    @classmethod
    def zeros(cls, n: int) -> "CoeffGrid":
        return cls(n, np.zeros((2 * n + 1, 2 * n + 1), dtype=complex))

    @classmethod
    def from_vector(cls, n: int, vec) -> "CoeffGrid":
        return cls(n, np.asarray(vec, dtype=complex).reshape(2 * n + 1, 2 * n + 1))

    @classmethod
    def from_entries(cls, n: int, entries) -> "CoeffGrid":
        """Build from a mapping ``{(k0, k1): value}``."""
        c = cls.zeros(n)
        for (k0, k1), val in dict(entries).items():
            c[k0, k1] = val
        return c

    def __getitem__(self, k):
        k0, k1 = k
        if max(abs(k0), abs(k1)) > self.n:
            return 0j
        return self.data[k0 + self.n, k1 + self.n]

    def __setitem__(self, k, value):
        k0, k1 = k
        self.data[k0 + self.n, k1 + self.n] = value

    @property
    def size(self) -> int:
        return (2 * self.n + 1) ** 2

    def vector(self) -> np.ndarray:
        """Coefficients flattened in index-set order (a view when possible)."""
        return self.data.reshape(-1)

    def reflected(self) -> "CoeffGrid":
        """Grid holding ``c_{-k}`` at ``k``."""
        return CoeffGrid(self.n, self.data[::-1, ::-1].copy())

    def conjugate_symmetry_defect(self) -> float:
        """``max |c_{-k} - conj(c_k)|``; zero for coefficients of a real function."""
        return float(np.max(np.abs(self.data[::-1, ::-1] - np.conj(self.data)), initial=0.0))

    def __add__(self, other):
        _check_same(self, other)
        return CoeffGrid(self.n, self.data + other.data)

    def __sub__(self, other):
        _check_same(self, other)
        return CoeffGrid(self.n, self.data - other.data)

    def __mul__(self, scalar):
        return CoeffGrid(self.n, self.data * scalar)

    __rmul__ = __mul__


def _check_same(a: CoeffGrid, b: CoeffGrid):
    if a.n != b.n:
        raise ValueError(f"bandwidth mismatch: {a.n} vs {b.n}")


def _signed_bins(n: int, m: int) -> np.ndarray:
    return np.arange(-n, n + 1) % m


def forward_coeffs(samples, n: int) -> CoeffGrid:
    """Coefficients ``<phi, e_k>`` for ``|k|_inf <= n`` from uniform samples.

    ``samples[j0, j1] = phi(2 pi j0/m, 2 pi j1/m)``. The trapezoidal rule is
    exact for trigonometric polynomials of per-axis degree <= m - n - 1.
    """
    samples = np.asarray(samples)
    if samples.ndim != 2 or samples.shape[0] != samples.shape[1]:
        raise ValueError(f"samples must be a square m x m grid, got {samples.shape}")
    m = samples.shape[0]
    if m < 2 * (2 * n + 1):
        raise AliasingError(f"grid size {m} < 2(2n+1) = {2 * (2 * n + 1)} for n = {n}")
    spec = np.fft.fft2(samples)
    bins = _signed_bins(n, m)
    return CoeffGrid(n, spec[np.ix_(bins, bins)] * (TWO_PI / m**2))


def eval_from_coeffs(c: CoeffGrid, m: int) -> np.ndarray:
    """Synthesize ``sum_k c_k e_k`` on the uniform m x m grid."""
    if m < 2 * c.n + 1:
        raise AliasingError(f"grid size {m} < 2n+1 = {2 * c.n + 1}")
    spec = np.zeros((m, m), dtype=complex)
    bins = _signed_bins(c.n, m)
    spec[np.ix_(bins, bins)] = c.data
    return np.fft.ifft2(spec) * (m**2 / TWO_PI)


def l2_norm(c: CoeffGrid) -> float:
    """L2 norm of the represented function (Parseval)."""
    return float(np.linalg.norm(c.data))


def sobolev_norm(c: CoeffGrid, p: int) -> float:
    """``(sum_k (1 + |k|_2^2)^p |c_k|^2)^(1/2)``."""
    if p < 0:
        raise ValueError("p must be >= 0")
    r = np.arange(-c.n, c.n + 1)
    w = 1.0 + r[:, None] ** 2 + r[None, :] ** 2
    return float(np.sqrt(np.sum(w**p * np.abs(c.data) ** 2)))


def project(c: CoeffGrid, n_target: int) -> CoeffGrid:
    """Orthogonal projection onto bandwidth ``n_target`` (truncate or zero-pad)."""
    if n_target < 0:
        raise ValueError("n_target must be >= 0")
    out = CoeffGrid.zeros(n_target)
    keep = min(n_target, c.n)
    src = slice(c.n - keep, c.n + keep + 1)
    dst = slice(n_target - keep, n_target + keep + 1)
    out.data[dst, dst] = c.data[src, src]
    return out


# ---------------------------------------------------------------------------
# CSV exchange format: header k0,k1,re,im in index-set order
# ---------------------------------------------------------------------------


def write_coeffs_csv(path, c: CoeffGrid) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for (k0, k1), val in zip(make_index_set(c.n), c.vector()):
            w.writerow((int(k0), int(k1), repr(float(val.real)), repr(float(val.imag))))


def read_coeffs_csv(path) -> CoeffGrid:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(h.strip() for h in rows[0]) != CSV_HEADER:
        raise ValidationError(f"{path}: expected header {','.join(CSV_HEADER)}")
    body = rows[1:]
    side = math.isqrt(len(body))
    if side * side != len(body) or side % 2 == 0:
        raise ValidationError(f"{path}: {len(body)} rows is not (2n+1)^2")
    n = (side - 1) // 2
    expected = make_index_set(n)
    vals = np.empty(len(body), dtype=complex)
    for i, row in enumerate(body):
        k0, k1, re, im = row
        if (int(k0), int(k1)) != tuple(expected[i]):
            raise ValidationError(f"{path}: row {i + 2} has index ({k0},{k1}), expected {tuple(expected[i])}")
        vals[i] = complex(float(re), float(im))
    return CoeffGrid.from_vector(n, vals)


def coeffs_from_function(func, n: int, m: int | None = None) -> CoeffGrid:
    """Sample ``func(theta0, theta1)`` on a uniform grid and transform."""
    if m is None:
        m = 2 * (2 * n + 1)
    t = np.arange(m) * (TWO_PI / m)
    t0, t1 = np.meshgrid(t, t, indexing="ij")
    return forward_coeffs(func(t0, t1), n)


def trig_polynomial(terms: Iterable, theta0, theta1) -> np.ndarray:
    """Evaluate ``sum c * e_k`` for ``terms = [((k0, k1), c), ...]``."""
    out = np.zeros(np.broadcast(theta0, theta1).shape, dtype=complex)
    for (k0, k1), val in terms:
        out += val * np.exp(1j * (k0 * theta0 + k1 * theta1)) / TWO_PI
    return out
