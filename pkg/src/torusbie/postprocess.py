"""Interior potentials, error metrics and matrix-decay diagnostics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .assembly import BandedGalerkinMatrix, DenseGalerkinMatrix, QuadratureConfig, band_index_count
from .errors import ValidationError
from .spectral import CoeffGrid, eval_from_coeffs, l2_norm, make_index_set, project
from .surface import TWO_PI, SurfaceDescriptor, sample_grid

TABLE_HEADER = ("n", "e_n", "co", "cond", "e_trunc", "co_trunc", "cond_trunc", "cr")
DECAY_HEADER = ("d", "max_abs", "mean_abs")
INTERIOR_MARGIN = 5.0
CO_GAP = 10


@dataclass
class SolveReport:
    """One row of an error/conditioning table.

    Values that were not computed are NaN; ``failure`` holds the reason a
    stage was skipped or aborted.
    """

    n: int
    e_n: float = math.nan
    co: float = math.nan
    cond: float = math.nan
    e_trunc: float = math.nan
    co_trunc: float = math.nan
    cond_trunc: float = math.nan
    cr: float = math.nan
    wall_time_assemble: float = 0.0
    wall_time_solve: float = 0.0
    failure: str = ""
    skipped: Tuple[str, ...] = field(default_factory=tuple)

    def table_row(self) -> List[str]:
        out = [str(self.n)]
        for name in TABLE_HEADER[1:]:
            val = getattr(self, name)
            if math.isnan(val):
                out.append("skipped" if name in self.skipped else "")
            else:
                out.append(f"{val:.10g}")
        return out


def relative_error(reference: CoeffGrid, candidate: CoeffGrid) -> float:
    """``||ref - pad(cand)|| / ||ref||`` in coefficient space (Parseval)."""
    if candidate.n > reference.n:
        raise ValidationError(f"candidate bandwidth {candidate.n} exceeds reference {reference.n}")
    ref_norm = l2_norm(reference)
    if ref_norm == 0.0:
        raise ValidationError("reference has zero norm")
    return l2_norm(reference - project(candidate, reference.n)) / ref_norm


def convergence_order(e_prev: float, e_curr: float, n: int) -> float:
    """``log(e_curr / e_prev) / log((n - 10) / n)`` for errors at ``n - 10`` and ``n``."""
    if not (e_prev > 0 and e_curr > 0):
        raise ValidationError("errors must be positive")
    if n <= CO_GAP:
        raise ValidationError(f"n must exceed {CO_GAP}")
    return math.log(e_curr / e_prev) / math.log((n - CO_GAP) / n)


def compression_ratio(n: int, q: float) -> float:
    """Fraction of the ``N^2`` entries kept by the band."""
    return band_index_count(n, q) / float((2 * n + 1) ** 4)


# ---------------------------------------------------------------------------
# Interior potential
# ---------------------------------------------------------------------------


def _outward(points: np.ndarray, nrm: np.ndarray) -> np.ndarray:
    # divergence theorem: int x . nu ds = 3 vol > 0 for the outward normal
    return nrm if np.sum(points * nrm) > 0 else -nrm


def eval_potential(s: SurfaceDescriptor, rho: CoeffGrid, x, quad: Optional[QuadratureConfig] = None) -> Union[float, np.ndarray]:
    """Double-layer potential ``u(x) = int rho(eta) (x - Gamma) . nu |J| / |x - Gamma|^3 deta``.

    ``nu`` is the outward unit normal, so a constant density ``c`` gives
    ``u = -4 pi c`` inside. The trapezoidal rule on the ``m_theta`` grid is
    spectrally accurate away from the surface; points closer than five local
    grid spacings, or outside the domain, are rejected.

    Parameters
    ----------
    x : array_like
        One point (shape (3,)) or several (shape (..., 3)).
    """
    quad = quad or QuadratureConfig()
    m = quad.m_theta
    if m < 2 * rho.n + 1:
        raise ValidationError(f"m_theta = {m} too small for density bandwidth {rho.n}")
    pts, d0, d1, nrm = sample_grid(s, m)
    nrm = _outward(pts, nrm)
    dens = eval_from_coeffs(rho, m).real
    spacing = np.maximum(np.linalg.norm(d0, axis=0), np.linalg.norm(d1, axis=0)) * (TWO_PI / m)
    flat_pts = pts.reshape(3, -1)
    weights = (dens * (TWO_PI / m) ** 2).reshape(-1)
    flat_nrm = nrm.reshape(3, -1)
    flat_spacing = spacing.reshape(-1)

    xs = np.asarray(x, dtype=float)
    single = xs.ndim == 1
    xs = xs.reshape(-1, 3)
    out = np.empty(len(xs))
    for i, xi in enumerate(xs):
        diff = xi[:, None] - flat_pts
        r = np.sqrt(np.sum(diff * diff, axis=0))
        j = int(np.argmin(r))
        where = "(" + ", ".join(f"{c:g}" for c in xi) + ")"
        if r[j] <= INTERIOR_MARGIN * flat_spacing[j]:
            raise ValidationError(
                f"point {where} is {r[j]:.4g} from the surface, within {INTERIOR_MARGIN:g} grid "
                f"spacings ({INTERIOR_MARGIN * flat_spacing[j]:.4g}); refine m_theta or move inward"
            )
        kern = np.sum(diff * flat_nrm, axis=0) / r**3
        solid = kern.sum() * (TWO_PI / m) ** 2 / (4 * math.pi)
        if solid > -0.5:
            raise ValidationError(f"point {where} is not inside the surface")
        out[i] = float(np.dot(kern, weights))
    return float(out[0]) if single else out.reshape(np.shape(x)[:-1])


# ---------------------------------------------------------------------------
# Decay diagnostics
# ---------------------------------------------------------------------------


@dataclass
class DecayRow:
    d: int
    max_abs: float
    mean_abs: float


def _entries(m) -> np.ndarray:
    if isinstance(m, DenseGalerkinMatrix):
        return m.entries
    if isinstance(m, BandedGalerkinMatrix):
        return m.to_dense()
    return np.asarray(m)


def decay_profile(m: Union[DenseGalerkinMatrix, BandedGalerkinMatrix], max_distance: int) -> List[DecayRow]:
    """Max and mean ``|K[k, l]|`` over pairs with ``|k - l|_1 = d``, ``d = 0..max_distance``."""
    if max_distance < 0 or max_distance > 4 * m.n:
        raise ValidationError(f"max_distance must lie in [0, {4 * m.n}]")
    idx = make_index_set(m.n)
    dist = np.abs(idx[:, None, 0] - idx[None, :, 0]) + np.abs(idx[:, None, 1] - idx[None, :, 1])
    mag = np.abs(_entries(m))
    dist = dist.ravel()
    mag = mag.ravel()
    counts = np.bincount(dist, minlength=4 * m.n + 1)
    sums = np.bincount(dist, weights=mag, minlength=4 * m.n + 1)
    maxes = np.zeros(4 * m.n + 1)
    np.maximum.at(maxes, dist, mag)
    return [DecayRow(d, float(maxes[d]), float(sums[d] / counts[d])) for d in range(max_distance + 1)]


@dataclass
class DiagonalProfiles:
    """Moduli along the main diagonal ``K[k, k]`` and the anti-diagonal ``K[k, -k]``.

    Both are indexed by the linear row index; ``radius`` is ``|k|_1``.
    """

    radius: np.ndarray
    diagonal: np.ndarray
    anti_diagonal: np.ndarray

    def envelope(self, which: str) -> Tuple[np.ndarray, np.ndarray]:
        """Largest modulus at each radius."""
        vals = getattr(self, which)
        radii = np.unique(self.radius)
        return radii, np.array([vals[self.radius == r].max() for r in radii])


def diagonal_profiles(m: Union[DenseGalerkinMatrix, BandedGalerkinMatrix]) -> DiagonalProfiles:
    mag = np.abs(_entries(m))
    size = mag.shape[0]
    rows = np.arange(size)
    radius = np.abs(make_index_set(m.n)).sum(axis=1)
    return DiagonalProfiles(radius, mag[rows, rows], mag[rows, size - 1 - rows])


def log_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``ln y`` against ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValidationError("log_slope needs positive values")
    return float(np.polyfit(x, np.log(y), 1)[0])


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def write_table_csv(path, reports: Iterable[SolveReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for rep in reports:
            w.writerow(rep.table_row())


def write_decay_csv(path, rows: Iterable[DecayRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DECAY_HEADER)
        for r in rows:
            w.writerow((r.d, f"{r.max_abs:.10g}", f"{r.mean_abs:.10g}"))
