"""Fourier-Galerkin matrix assembly.

Entries ``K[k, l] = <K e_l, e_k>`` are read off the two-level Fourier
coefficients of the sheared kernel, ``K[k, l] = Ghat[k - l, -l]``, where

    Ghat[j, m] = int int G(theta, v) e_{-j}(theta) e_{-m}(v) dtheta dv.

The theta integral is a uniform trapezoidal rule (one real 2-D FFT per
offset ``v``); the offset integral is a tensor midpoint rule on the grid
``v_i = (i + 1/2) 2pi/m_vartheta``, which never touches the singular point
``v = 0``. By default the Gauss identity ``K 1 = -1`` is used to subtract
the singularity,

    K[k, l] = Ghat[k - l, -l] - Ghat[k - l, 0] - delta_{kl},

which turns the first-order punctured rule into a second-order one at no
extra cost (``Ghat[j, 0]`` comes out of the same sweep).

Only coefficients with ``j`` in the requested set are kept, so a banded
matrix with band ``B`` costs ``O(B^2 N)`` storage rather than ``O(N^2)``.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numba
import numpy as np
import scipy.fft
import scipy.sparse

from .errors import MemoryBudgetError, ValidationError
from .kernel import sheared_kernel_grid, sheared_kernel_grid_shift
from .spectral import CoeffGrid, forward_coeffs, make_index_set
from .surface import TWO_PI, SurfaceDescriptor, angle_grid, eval_surface, sample_grid

logger = logging.getLogger(__name__)

GIB = 1 << 30
DEFAULT_M_VARTHETA = 128
DEFAULT_MEMORY_BUDGET = GIB
DEFAULT_DENSE_CAP = GIB
ORIENTATION_TOLERANCE = 0.2
_PROBE_M_THETA = 32


def default_threads() -> int:
    env = os.environ.get("TORUSBIE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer TORUSBIE_THREADS=%r", env)
    return os.cpu_count() or 1


def next_pow2(x: int) -> int:
    return 1 << max(0, int(x - 1).bit_length())


@dataclass(frozen=True)
class QuadratureConfig:
    """Grid sizes for the two-level quadrature.

    Attributes
    ----------
    m_theta : int
        Uniform points per theta axis (trapezoidal / FFT).
    m_vartheta : int
        Midpoint-rule points per offset axis.
    deterministic : bool
        Force single-threaded transforms so results are bit-reproducible.
    subtract_singularity : bool
        Apply the Gauss-identity subtraction (see module docstring).
    memory_budget : int
        Bytes allowed for the coefficient accumulators of one sweep; larger
        requests are split into several sweeps.
    threads : int or None
        Worker threads for the FFTs; ``None`` reads ``TORUSBIE_THREADS``.
    """

    m_theta: int = 256
    m_vartheta: int = DEFAULT_M_VARTHETA
    deterministic: bool = True
    subtract_singularity: bool = True
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    threads: Optional[int] = None

    @classmethod
    def for_order(cls, n: int, m_vartheta: int = DEFAULT_M_VARTHETA, **kw) -> "QuadratureConfig":
        """Default grid for dense order-``n`` assembly: ``2(4n+1)`` rounded up to a power of two, at least 64."""
        return cls(m_theta=max(64, next_pow2(2 * (4 * n + 1))), m_vartheta=m_vartheta, **kw)

    def validate(self, j_extent: int = 0, n_m: int = 0) -> None:
        """Check grid sizes against the largest ``|j|_inf`` and ``|m|_inf`` needed."""
        if self.m_theta % 2 or self.m_vartheta % 2:
            raise ValidationError(f"grid sizes must be even: {self.m_theta}, {self.m_vartheta}")
        if self.m_vartheta < 16:
            raise ValidationError(f"m_vartheta = {self.m_vartheta} < 16")
        if self.m_theta < 2 * (2 * j_extent + 1):
            raise ValidationError(
                f"m_theta = {self.m_theta} cannot resolve |j| <= {j_extent} alias-free "
                f"(need >= {2 * (2 * j_extent + 1)})"
            )
        if self.m_vartheta < 2 * n_m + 1:
            raise ValidationError(f"m_vartheta = {self.m_vartheta} < 2n+1 = {2 * n_m + 1}")
        if self.memory_budget <= 0:
            raise ValidationError("memory_budget must be positive")

    @property
    def workers(self) -> int:
        if self.deterministic:
            return 1
        return self.threads or default_threads()


# ---------------------------------------------------------------------------
# Band geometry
# ---------------------------------------------------------------------------


def band_width(n: int, q: float) -> int:
    """Largest integer ``d`` with ``d <= q ln N``, ``N = (2n+1)^2``."""
    if q <= 0:
        raise ValueError("q must be positive")
    return int(math.floor(q * math.log((2 * n + 1) ** 2)))


def band_offsets(bandwidth: int) -> np.ndarray:
    """All ``d`` with ``|d|_1 <= bandwidth``, lexicographic, shape (count, 2)."""
    r = np.arange(-bandwidth, bandwidth + 1)
    d0, d1 = np.meshgrid(r, r, indexing="ij")
    keep = np.abs(d0) + np.abs(d1) <= bandwidth
    return np.stack([d0[keep], d1[keep]], axis=1)


def band_index_count(n: int, q: float) -> int:
    """Exact size of ``{(k, l) in [-n, n]^4 : |k - l|_1 <= q ln N}``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    bw = band_width(n, q)
    side = 2 * n + 1
    d = np.arange(-min(bw, 2 * n), min(bw, 2 * n) + 1)
    per_axis = side - np.abs(d)  # number of (k_i, l_i) pairs with k_i - l_i = d
    total = 0
    for d0, c0 in zip(d, per_axis):
        rest = bw - abs(int(d0))
        mask = np.abs(d) <= rest
        total += int(c0) * int(per_axis[mask].sum())
    return total


def band_pairs(n: int, bandwidth: int) -> Tuple[np.ndarray, np.ndarray]:
    """Linear (row, col) indices of the band, sorted by row then column."""
    side = 2 * n + 1
    idx = make_index_set(n)
    rows, cols = [], []
    for d0, d1 in band_offsets(min(bandwidth, 4 * n)):
        l0 = idx[:, 0] - d0
        l1 = idx[:, 1] - d1
        ok = (np.abs(l0) <= n) & (np.abs(l1) <= n)
        k_lin = np.nonzero(ok)[0]
        rows.append(k_lin)
        cols.append((l0[ok] + n) * side + (l1[ok] + n))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    order = np.lexsort((cols, rows))
    return rows[order], cols[order]


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


@dataclass
class DenseGalerkinMatrix:
    """Full ``N x N`` matrix ``K_N``, rows ``k`` and columns ``l`` in index-set order."""

    n: int
    entries: np.ndarray
    quad: Optional[QuadratureConfig] = None

    @property
    def size(self) -> int:
        return (2 * self.n + 1) ** 2

    def system(self) -> np.ndarray:
        """``I - K_N`` as a dense array."""
        return np.eye(self.size, dtype=complex) - self.entries

    def to_dense(self) -> np.ndarray:
        return self.entries


@dataclass
class BandedGalerkinMatrix:
    """Truncated matrix: entries with ``|k - l|_1 <= band`` stored in COO order.

    ``rows``/``cols`` are linear indices sorted by row then column, so the
    stored pairs of row ``k`` are ``cols[indptr[k]:indptr[k+1]]``.
    """

    n: int
    q: float
    band: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    quad: Optional[QuadratureConfig] = None
    _csr: Optional[scipy.sparse.csr_matrix] = field(default=None, init=False, repr=False)

    @property
    def size(self) -> int:
        return (2 * self.n + 1) ** 2

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def csr(self) -> scipy.sparse.csr_matrix:
        if self._csr is None:
            indptr = np.searchsorted(self.rows, np.arange(self.size + 1))
            # explicit zeros stay stored, so the pattern is exactly the band
            self._csr = scipy.sparse.csr_matrix(
                (self.values, self.cols.astype(np.int64), indptr), shape=(self.size, self.size)
            )
        return self._csr

    def row(self, k_lin: int) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = np.searchsorted(self.rows, [k_lin, k_lin + 1])
        return self.cols[lo:hi], self.values[lo:hi]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.size, self.size), dtype=complex)
        out[self.rows, self.cols] = self.values
        return out

    def system(self):
        """``I - K~_N`` as a sparse CSC matrix."""
        eye = scipy.sparse.identity(self.size, dtype=complex, format="csr")
        return (eye - self.csr).tocsc()


# ---------------------------------------------------------------------------
# Coefficient tables from the sheared-FFT sweep
# ---------------------------------------------------------------------------


def _canonical(j: np.ndarray) -> np.ndarray:
    """Representatives of ``j ~ -j``: ``j0 > 0`` or ``j0 == 0 and j1 >= 0``."""
    return (j[:, 0] > 0) | ((j[:, 0] == 0) & (j[:, 1] >= 0))


@dataclass
class KernelCoefficientTable:
    """``Ghat[j, m]`` for canonical ``j`` in a set and ``|m|_inf <= n_m``.

    Values at ``-j`` follow from ``Ghat[-j, -m] = conj(Ghat[j, m])`` (the
    kernel is real).
    """

    j: np.ndarray  # canonical multi-indices, shape (nj, 2)
    n_m: int
    values: np.ndarray  # shape (nj, 2 n_m + 1, 2 n_m + 1)
    gauss_constant: float
    quad: QuadratureConfig
    _extent: int = field(init=False)
    _lookup: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._extent = int(np.abs(self.j).max()) if self.j.size else 0
        e = self._extent
        self._lookup = np.full((2 * e + 1, 2 * e + 1), -1, dtype=np.int64)
        self._lookup[self.j[:, 0] + e, self.j[:, 1] + e] = np.arange(len(self.j))

    def lookup(self, j: np.ndarray, m: np.ndarray) -> np.ndarray:
        """Vectorized ``Ghat[j, m]`` for arrays with trailing axis 2."""
        j = np.asarray(j)
        m = np.asarray(m)
        e = self._extent
        if np.abs(j).max(initial=0) > e or np.abs(m).max(initial=0) > self.n_m:
            raise ValidationError("coefficient request outside the assembled table")
        canon = (j[..., 0] > 0) | ((j[..., 0] == 0) & (j[..., 1] >= 0))
        sgn = np.where(canon, 1, -1)
        jj = j * sgn[..., None]
        mm = m * sgn[..., None]
        pos = self._lookup[jj[..., 0] + e, jj[..., 1] + e]
        if np.any(pos < 0):
            raise ValidationError("coefficient request outside the assembled j set")
        vals = self.values[pos, mm[..., 0] + self.n_m, mm[..., 1] + self.n_m]
        return np.where(canon, vals, np.conj(vals))

    def galerkin_entries(self, k: np.ndarray, l: np.ndarray) -> np.ndarray:
        """``K[k, l]`` for paired multi-index arrays ``k``, ``l``."""
        j = k - l
        vals = self.lookup(j, -l)
        if self.quad.subtract_singularity:
            vals = vals - self.lookup(j, np.zeros_like(l))
            diag = np.all(j == 0, axis=-1)
            vals = vals + np.where(diag, self.gauss_constant, 0.0)
        return vals


@numba.njit(cache=True, nogil=True)
def _accumulate_row(acc, t, w0):
    # acc[j, a, b] += w0[a] * t[b, j], fixed loop order for reproducibility
    nj = acc.shape[0]
    nm = acc.shape[1]
    for jj in range(nj):
        for a in range(nm):
            wa = w0[a]
            for b in range(nm):
                acc[jj, a, b] += wa * t[b, jj]


_MAX_FINE_GRID = 2048


class _ShearedGrid:
    """Samples of G(theta_grid, v) for offsets on the midpoint grid.

    Theta points and shifted points both lie on the common refinement of
    size ``lcm(m_theta, 2 m_vartheta)``; when that grid is small enough the
    surface is sampled once on it and every offset becomes an index shift.
    """

    def __init__(self, surface: SurfaceDescriptor, quad: QuadratureConfig):
        self.surface = surface
        self.m = quad.m_theta
        self.mv = quad.m_vartheta
        self.offsets = angle_grid(self.mv, 0.5)
        fine = math.lcm(self.m, 2 * self.mv)
        self.shifted = fine <= max(_MAX_FINE_GRID, self.m)
        if self.shifted:
            x, _, _, nrm = sample_grid(surface, fine)
            self.stride = fine // self.m
            self.ratio = fine // (2 * self.mv)
        else:
            x, _, _, nrm = sample_grid(surface, self.m)
            t = angle_grid(self.m)
            self.t0, self.t1 = np.meshgrid(t, t, indexing="ij")
        self.x = np.ascontiguousarray(x)
        self.nrm = np.ascontiguousarray(nrm)

    def fill(self, a: int, b: int, out: np.ndarray) -> np.ndarray:
        if self.shifted:
            return sheared_kernel_grid_shift(
                self.x, self.nrm, self.stride, (2 * a + 1) * self.ratio, (2 * b + 1) * self.ratio, out
            )
        y, _, _, ny = self.surface.sample(self.t0 + self.offsets[a], self.t1 + self.offsets[b])
        return sheared_kernel_grid(self.x, np.ascontiguousarray(y), np.ascontiguousarray(ny), out)


def gauss_probe_values(s: SurfaceDescriptor, quad: QuadratureConfig) -> np.ndarray:
    """``(K 1)(theta)`` on the ``m_theta`` grid by the offset midpoint rule."""
    quad.validate()
    grid = _ShearedGrid(s, quad)
    total = np.zeros((grid.m, grid.m))
    buf = np.empty((grid.m, grid.m))
    for a in range(grid.mv):
        for b in range(grid.mv):
            total += grid.fill(a, b, buf)
    return total * (TWO_PI / grid.mv) ** 2


def gauss_identity_residual(s: SurfaceDescriptor, quad: QuadratureConfig) -> Tuple[float, float]:
    """Mean of ``K 1`` over the theta grid and the largest deviation from that mean."""
    vals = gauss_probe_values(s, quad)
    mean = float(vals.mean())
    return mean, float(np.abs(vals - mean).max())


def _probe_quad(quad: QuadratureConfig) -> QuadratureConfig:
    return QuadratureConfig(
        m_theta=min(quad.m_theta, _PROBE_M_THETA),
        m_vartheta=quad.m_vartheta,
        subtract_singularity=quad.subtract_singularity,
    )


def normalize_orientation(s: SurfaceDescriptor, quad: QuadratureConfig) -> SurfaceDescriptor:
    """Return ``s`` oriented so that ``K 1 = -1`` (then ``(I - K) 1 = 2``)."""
    mean, _ = gauss_identity_residual(s, _probe_quad(quad))
    if abs(mean + 1.0) <= ORIENTATION_TOLERANCE:
        return s
    if abs(mean - 1.0) <= ORIENTATION_TOLERANCE:
        logger.info("flipping orientation of %s (probe mean %.4f)", s.name, mean)
        return s.flipped()
    raise ValidationError(
        f"Gauss probe mean {mean:.4f} on {s.name!r} is not within {ORIENTATION_TOLERANCE} of +-1; "
        "refine m_vartheta or check the parametrization"
    )


def _gauss_constant(s: SurfaceDescriptor, quad: QuadratureConfig) -> float:
    mean, _ = gauss_identity_residual(s, _probe_quad(quad))
    if abs(abs(mean) - 1.0) > ORIENTATION_TOLERANCE:
        raise ValidationError(f"Gauss probe mean {mean:.4f} on {s.name!r} is not near +-1")
    return -1.0 if mean < 0 else 1.0


def _resolve_orientation(s: SurfaceDescriptor, quad: QuadratureConfig, orientation_sign):
    if orientation_sign is None:
        s = normalize_orientation(s, quad)
        return s, -1.0
    s = s.with_orientation(orientation_sign)
    gauss = _gauss_constant(s, quad) if quad.subtract_singularity else -1.0
    return s, gauss


@dataclass
class _Request:
    j: np.ndarray  # canonical j
    n_m: int


def _sweep(surface: SurfaceDescriptor, quad: QuadratureConfig, requests: Sequence[_Request]) -> List[np.ndarray]:
    """One pass over all offsets, accumulating ``Ghat[j, m]`` for every request."""
    m, mv = quad.m_theta, quad.m_vartheta
    union, inverse = np.unique(np.concatenate([r.j for r in requests]), axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    splits = np.cumsum([len(r.j) for r in requests])[:-1]
    positions = np.split(inverse, splits)

    # gather map into the half-spectrum of rfft2: F[j0, j1] = conj(F[-j0, -j1])
    neg = union[:, 1] < 0
    g0 = np.where(neg, -union[:, 0], union[:, 0]) % m
    g1 = np.abs(union[:, 1])
    flat = g0 * (m // 2 + 1) + g1

    grid = _ShearedGrid(surface, quad)
    offsets = grid.offsets
    accs = [np.zeros((len(r.j), 2 * r.n_m + 1, 2 * r.n_m + 1), dtype=complex) for r in requests]
    phase_rows = []
    for r in requests:
        mr = np.arange(-r.n_m, r.n_m + 1)
        phase_rows.append((mr % mv, np.exp(-1j * mr * offsets[0])))  # half-step phase

    batch = max(1, min(mv, (64 << 20) // (m * m * 8)))
    gbuf = np.empty((batch, m, m))
    stage = np.empty((mv, len(union)), dtype=complex)
    workers = quad.workers
    for a in range(mv):
        for b0 in range(0, mv, batch):
            nb = min(batch, mv - b0)
            for i in range(nb):
                grid.fill(a, b0 + i, gbuf[i])
            spec = scipy.fft.rfft2(gbuf[:nb], workers=workers).reshape(nb, -1)
            vals = spec[:, flat]
            vals[:, neg] = np.conj(vals[:, neg])
            stage[b0:b0 + nb] = vals
        row = np.fft.fft(stage, axis=0)
        for r, acc, pos, (bins, ph) in zip(requests, accs, positions, phase_rows):
            mr = np.arange(-r.n_m, r.n_m + 1)
            t = row[np.ix_(bins, pos)] * ph[:, None]
            _accumulate_row(acc, np.ascontiguousarray(t), np.exp(-1j * mr * offsets[a]))
    # theta weight (2pi/m)^2 / (2pi), offset weight (2pi/mv)^2 / (2pi)
    scale = (TWO_PI / m) ** 2 * (TWO_PI / mv) ** 2 / TWO_PI**2
    for acc in accs:
        acc *= scale
    return accs


def _accumulator_bytes(requests: Sequence[_Request]) -> int:
    return sum(16 * len(r.j) * (2 * r.n_m + 1) ** 2 for r in requests)


def compute_tables(
    surface: SurfaceDescriptor,
    quad: QuadratureConfig,
    requests: Sequence[Tuple[np.ndarray, int]],
    gauss_constant: float = -1.0,
) -> List[KernelCoefficientTable]:
    """Coefficient tables for several ``(j set, n_m)`` requests sharing one kernel sweep.

    The ``j`` sets are reduced to canonical representatives. When the
    accumulators exceed ``quad.memory_budget`` the sets are split into chunks
    and the sweep is repeated per chunk.
    """
    reqs = []
    for j, n_m in requests:
        j = np.asarray(j, dtype=np.int64).reshape(-1, 2)
        j = np.unique(np.concatenate([j, -j]), axis=0)
        reqs.append(_Request(j[_canonical(j)], int(n_m)))
    extent = max(int(np.abs(r.j).max()) for r in reqs)
    quad.validate(j_extent=extent, n_m=max(r.n_m for r in reqs))

    need = _accumulator_bytes(reqs)
    nchunks = max(1, math.ceil(need / quad.memory_budget))
    if nchunks > 1:
        logger.info("accumulators need %.2f GiB; splitting into %d sweeps", need / GIB, nchunks)
    parts: List[List[np.ndarray]] = [[] for _ in reqs]
    for c in range(nchunks):
        chunk = [_Request(np.array_split(r.j, nchunks)[c], r.n_m) for r in reqs]
        live = [i for i, r in enumerate(chunk) if len(r.j)]
        accs = _sweep(surface, quad, [chunk[i] for i in live])
        for i, acc in zip(live, accs):
            parts[i].append(acc)
    return [
        KernelCoefficientTable(r.j, r.n_m, np.concatenate(p, axis=0), gauss_constant, quad)
        for r, p in zip(reqs, parts)
    ]


def dense_j_set(n: int) -> np.ndarray:
    r = np.arange(-2 * n, 2 * n + 1)
    j0, j1 = np.meshgrid(r, r, indexing="ij")
    return np.stack([j0.ravel(), j1.ravel()], axis=1)


def banded_j_set(n: int, bandwidth: int) -> np.ndarray:
    d = band_offsets(min(bandwidth, 4 * n))
    return d[np.abs(d).max(axis=1) <= 2 * n]


def dense_from_table(table: KernelCoefficientTable, n: int, cap_bytes: int = DEFAULT_DENSE_CAP) -> DenseGalerkinMatrix:
    size = (2 * n + 1) ** 2
    _check_dense_cap(n, cap_bytes)
    idx = make_index_set(n)
    entries = np.empty((size, size), dtype=complex)
    for row in range(size):  # row-wise keeps the index temporaries O(N)
        k = np.broadcast_to(idx[row], idx.shape)
        entries[row] = table.galerkin_entries(k, idx)
    return DenseGalerkinMatrix(n, entries, table.quad)


def banded_from_table(table: KernelCoefficientTable, n: int, q: float) -> BandedGalerkinMatrix:
    bw = band_width(n, q)
    rows, cols = band_pairs(n, bw)
    idx = make_index_set(n)
    values = np.empty(rows.size, dtype=complex)
    step = 1 << 20
    for lo in range(0, rows.size, step):
        sl = slice(lo, lo + step)
        values[sl] = table.galerkin_entries(idx[rows[sl]], idx[cols[sl]])
    return BandedGalerkinMatrix(n, float(q), bw, rows, cols, values, table.quad)


def dense_bytes(n: int) -> int:
    return 16 * (2 * n + 1) ** 4


def _check_dense_cap(n: int, cap_bytes: int) -> None:
    need = dense_bytes(n)
    if need > cap_bytes:
        raise MemoryBudgetError(
            f"dense order-{n} matrix needs {need} bytes, above the cap of {cap_bytes}", need
        )


def assemble_dense(
    s: SurfaceDescriptor,
    n: int,
    quad: Optional[QuadratureConfig] = None,
    orientation_sign: Optional[int] = None,
    cap_bytes: int = DEFAULT_DENSE_CAP,
) -> DenseGalerkinMatrix:
    """Full Galerkin matrix of order ``n`` (all ``|k - l|_inf <= 2n``)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    quad = quad or QuadratureConfig.for_order(n)
    quad.validate(j_extent=2 * n, n_m=n)
    _check_dense_cap(n, cap_bytes)
    s, gauss = _resolve_orientation(s, quad, orientation_sign)
    (table,) = compute_tables(s, quad, [(dense_j_set(n), n)], gauss)
    return dense_from_table(table, n, cap_bytes)


def assemble_banded(
    s: SurfaceDescriptor,
    n: int,
    q: float,
    quad: Optional[QuadratureConfig] = None,
    orientation_sign: Optional[int] = None,
) -> BandedGalerkinMatrix:
    """Truncated Galerkin matrix: only entries with ``|k - l|_1 <= q ln N`` are computed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if q <= 0:
        raise ValueError("q must be positive")
    quad = quad or QuadratureConfig.for_order(n)
    bw = band_width(n, q)
    jset = banded_j_set(n, bw)
    quad.validate(j_extent=int(np.abs(jset).max()), n_m=n)
    s, gauss = _resolve_orientation(s, quad, orientation_sign)
    (table,) = compute_tables(s, quad, [(jset, n)], gauss)
    return banded_from_table(table, n, q)


def truncate_dense(m: DenseGalerkinMatrix, q: float) -> BandedGalerkinMatrix:
    """Keep the entries of ``m`` inside the band, drop the rest."""
    if q <= 0:
        raise ValueError("q must be positive")
    bw = band_width(m.n, q)
    rows, cols = band_pairs(m.n, bw)
    return BandedGalerkinMatrix(m.n, float(q), bw, rows, cols, m.entries[rows, cols].copy(), m.quad)


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RhsSpec:
    """Boundary data ``h``.

    ``kind`` is one of

    * ``example1``: ``2 r^2 ln r`` with ``r = |x - Gamma(pi, pi)|``;
    * ``example2``: ``t^2 ln|t|`` with ``t = x_0 - pi`` (first coordinate);
    * ``example2_anchor``: same with ``t = x_0 - Gamma_0(pi, pi)``, which is
      singular on the surface;
    * ``constant``: ``value``;
    * ``harmonic_pole``: ``1/|x - pole|`` for an exterior ``pole``.
    """

    kind: str
    value: float = 1.0
    pole: Optional[Tuple[float, float, float]] = None

    KINDS = ("example1", "example2", "example2_anchor", "constant", "harmonic_pole")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown boundary data {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "harmonic_pole":
            if self.pole is None or len(self.pole) != 3:
                raise ValidationError("harmonic_pole needs a 3-vector pole")
            object.__setattr__(self, "pole", tuple(float(c) for c in self.pole))

    def boundary_values(self, s: SurfaceDescriptor, points: np.ndarray) -> np.ndarray:
        """``h`` at points with trailing axis 3."""
        points = np.asarray(points, dtype=float)
        if self.kind == "constant":
            return np.full(points.shape[:-1], float(self.value))
        if self.kind == "harmonic_pole":
            return 1.0 / np.linalg.norm(points - np.asarray(self.pole), axis=-1)
        anchor = eval_surface(s, (math.pi, math.pi))
        if self.kind == "example1":
            return 2.0 * _sq_log(np.linalg.norm(points - anchor, axis=-1))
        shift = math.pi if self.kind == "example2" else anchor[0]
        return _sq_log(np.abs(points[..., 0] - shift))


def _sq_log(r: np.ndarray) -> np.ndarray:
    """``r^2 ln r`` extended by 0 at ``r = 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, r**2 * np.log(r), 0.0)


def solid_angle_fraction(s: SurfaceDescriptor, x, m: int = 128) -> float:
    """``(1/4pi) int (x - y) . nu / |x - y|^3 ds`` with the outward normal.

    About -1 for points inside the solid, 0 outside (smooth trapezoidal
    rule, accurate away from the surface). The outward direction is taken
    from the sign that makes the enclosed volume positive.
    """
    pts, _, _, nrm = sample_grid(s, m)
    vol = np.sum(pts * nrm) * (TWO_PI / m) ** 2 / 3.0
    outward = nrm if vol > 0 else -nrm
    diff = np.asarray(x, dtype=float).reshape(3, 1, 1) - pts
    r = np.sqrt(np.sum(diff * diff, axis=0))
    return float(np.sum(np.sum(diff * outward, axis=0) / r**3) * (TWO_PI / m) ** 2 / (4 * math.pi))


def validate_rhs(s: SurfaceDescriptor, r: RhsSpec, m: int = 128) -> None:
    if r.kind != "harmonic_pole":
        return
    pts = np.moveaxis(sample_grid(s, m)[0], 0, -1).reshape(-1, 3)
    dist = float(np.min(np.linalg.norm(pts - np.asarray(r.pole), axis=1)))
    if dist <= 1e-9:
        raise ValidationError(f"pole {r.pole} lies on the surface")
    if solid_angle_fraction(s, r.pole, m) < -0.5:
        raise ValidationError(f"pole {r.pole} lies inside the domain; it must be exterior")


def assemble_rhs(s: SurfaceDescriptor, r: RhsSpec, n: int, quad: Optional[QuadratureConfig] = None) -> CoeffGrid:
    """Coefficients of ``g(theta) = -(1/2pi) h(Gamma(theta))`` on the ``m_theta`` grid."""
    quad = quad or QuadratureConfig.for_order(n)
    validate_rhs(s, r)
    pts = np.moveaxis(sample_grid(s, quad.m_theta)[0], 0, -1)
    g = -r.boundary_values(s, pts) / TWO_PI
    return forward_coeffs(g, n)
