"""Error / conditioning / compression tables for a surface and boundary data.

For a fixed quadrature the Galerkin entries ``K[k, l]`` do not depend on
``n``, so a single kernel sweep produces every matrix in the table: the
dense request covers the largest ``n`` within the memory cap (and all
smaller ones), extra banded requests cover larger ``n``, and one more
banded request at ``q_ref`` gives the reference solution.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .assembly import (
    DEFAULT_DENSE_CAP,
    QuadratureConfig,
    RhsSpec,
    next_pow2,
    assemble_rhs,
    band_width,
    banded_from_table,
    banded_j_set,
    compute_tables,
    dense_bytes,
    dense_from_table,
    dense_j_set,
    normalize_orientation,
)
from .errors import TorusBIEError, ValidationError
from .linsolve import CONDITION_CAP, SolverConfig, condition_number, solve_banded, solve_dense
from .postprocess import (
    CO_GAP,
    SolveReport,
    compression_ratio,
    convergence_order,
    relative_error,
    write_table_csv,
)
from .surface import get_surface

logger = logging.getLogger(__name__)

DEFAULT_Q = 2.3
DEFAULT_Q_REF = 4.0


@dataclass
class ExperimentConfig:
    """Inputs of one table run.

    ``quad=None`` picks ``m_theta`` from the largest coefficient index the
    sweep needs (power of two, at least 64) and ``m_vartheta = 128``.
    """

    surface: str
    problem: RhsSpec
    n_list: Sequence[int]
    n_ref: int
    q: float = DEFAULT_Q
    q_ref: float = DEFAULT_Q_REF
    quad: Optional[QuadratureConfig] = None
    table_path: Optional[str] = None
    dense_cap: int = DEFAULT_DENSE_CAP
    solver: SolverConfig = field(default_factory=SolverConfig)
    compute_cond: bool = True

    def validate(self) -> None:
        ns = list(self.n_list)
        if not ns:
            raise ValidationError("n_list is empty")
        if any(n < 1 for n in ns):
            raise ValidationError("every n must be >= 1")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValidationError(f"n_list must be strictly increasing: {ns}")
        if self.n_ref <= ns[-1]:
            raise ValidationError(f"n_ref = {self.n_ref} must exceed max(n_list) = {ns[-1]}")
        if not (self.q > 0 and self.q_ref > 0):
            raise ValidationError("q and q_ref must be positive")


def _plan(cfg: ExperimentConfig) -> Tuple[Optional[int], List[int]]:
    dense_ns = [n for n in cfg.n_list if dense_bytes(n) <= cfg.dense_cap]
    dense_max = max(dense_ns) if dense_ns else None
    extra = [n for n in cfg.n_list if dense_max is None or n > dense_max]
    return dense_max, extra


def _requests(cfg: ExperimentConfig):
    dense_max, extra = _plan(cfg)
    requests, owners = [], []
    if dense_max is not None:
        requests.append((dense_j_set(dense_max), dense_max))
        owners.append("dense")
    for n in extra:
        requests.append((banded_j_set(n, band_width(n, cfg.q)), n))
        owners.append(n)
    requests.append((banded_j_set(cfg.n_ref, band_width(cfg.n_ref, cfg.q_ref)), cfg.n_ref))
    owners.append("ref")
    return dense_max, requests, owners


def auto_quadrature(cfg: ExperimentConfig, **overrides) -> QuadratureConfig:
    """Smallest power-of-two ``m_theta`` (at least 64) resolving every coefficient the sweep needs."""
    _, requests, _ = _requests(cfg)
    extent = max(int(abs(j).max()) for j, _ in requests)
    settings = {"m_theta": max(64, next_pow2(2 * (2 * extent + 1)))}
    settings.update({k: v for k, v in overrides.items() if v is not None})
    return QuadratureConfig(**settings)


def run_experiment(cfg: ExperimentConfig) -> List[SolveReport]:
    """Fill one :class:`SolveReport` per ``n`` and optionally write the table CSV.

    ``wall_time_assemble`` is the time to extract that row's matrices from
    the shared sweep (the sweep itself is logged once); a failing stage
    leaves NaN in its columns and its message in ``failure``.
    """
    cfg.validate()
    dense_max, requests, owners = _requests(cfg)
    quad = cfg.quad or auto_quadrature(cfg)
    surface = normalize_orientation(get_surface(cfg.surface), quad)

    t0 = time.perf_counter()
    tables = dict(zip(owners, compute_tables(surface, quad, requests)))
    logger.info("kernel sweep (%d requests, m_theta=%d, m_vartheta=%d): %.1f s",
                len(requests), quad.m_theta, quad.m_vartheta, time.perf_counter() - t0)

    ref_matrix = banded_from_table(tables["ref"], cfg.n_ref, cfg.q_ref)
    reference = solve_banded(ref_matrix, assemble_rhs(surface, cfg.problem, cfg.n_ref, quad), cfg.solver)
    del ref_matrix

    reports = []
    for n in cfg.n_list:
        rep = SolveReport(n=n, cr=compression_ratio(n, cfg.q))
        try:
            _fill_row(rep, n, cfg, tables, dense_max, surface, quad, reference)
        except (TorusBIEError, MemoryError, ArithmeticError) as exc:
            rep.failure = f"{type(exc).__name__}: {exc}"
            logger.warning("row n=%d aborted: %s", n, rep.failure)
        reports.append(rep)

    for prev, cur in zip(reports, reports[1:]):
        if cur.n - prev.n != CO_GAP:
            continue
        if prev.e_n > 0 and cur.e_n > 0:
            cur.co = convergence_order(prev.e_n, cur.e_n, cur.n)
        if prev.e_trunc > 0 and cur.e_trunc > 0:
            cur.co_trunc = convergence_order(prev.e_trunc, cur.e_trunc, cur.n)

    if cfg.table_path:
        write_table_csv(cfg.table_path, reports)
    return reports


def _fill_row(rep, n, cfg, tables, dense_max, surface, quad, reference) -> None:
    g = assemble_rhs(surface, cfg.problem, n, quad)
    want_cond = cfg.compute_cond and (2 * n + 1) ** 2 <= CONDITION_CAP

    if dense_max is not None and n <= dense_max:
        t = time.perf_counter()
        dense = dense_from_table(tables["dense"], n, cfg.dense_cap)
        banded = banded_from_table(tables["dense"], n, cfg.q)
        rep.wall_time_assemble = time.perf_counter() - t
        t = time.perf_counter()
        rep.e_n = relative_error(reference, solve_dense(dense, g, cfg.solver))
        rep.e_trunc = relative_error(reference, solve_banded(banded, g, cfg.solver))
        rep.wall_time_solve = time.perf_counter() - t
        if want_cond:
            rep.cond = condition_number(dense)
        del dense
    else:
        rep.skipped = ("e_n", "co", "cond")
        t = time.perf_counter()
        banded = banded_from_table(tables[n], n, cfg.q)
        rep.wall_time_assemble = time.perf_counter() - t
        t = time.perf_counter()
        rep.e_trunc = relative_error(reference, solve_banded(banded, g, cfg.solver))
        rep.wall_time_solve = time.perf_counter() - t
    if want_cond:
        rep.cond_trunc = condition_number(banded)


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from None

