"""Solvers for ``(I - K) rho = g`` in dense and banded form, plus conditioning."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg as spla

from .assembly import BandedGalerkinMatrix, DenseGalerkinMatrix
from .errors import ConvergenceError, SingularSystemError, ValidationError
from .spectral import CoeffGrid

logger = logging.getLogger(__name__)

DIRECT_AUTO_LIMIT = 4096
DIRECT_CAP = 8192
CONDITION_CAP = 16384
DIRECT_RTOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    """Linear solver settings.

    ``method="auto"`` picks a direct factorization for ``N <= 4096`` and
    restarted GMRES above that.
    """

    method: str = "auto"
    krylov_tol: float = 1e-12
    krylov_restart: int = 50
    krylov_max_iters: int = 500
    direct_cap: int = DIRECT_CAP

    def __post_init__(self):
        if self.method not in ("auto", "direct", "krylov"):
            raise ValidationError(f"unknown solver method {self.method!r}")
        if not self.krylov_tol > 0:
            raise ValidationError("krylov_tol must be positive")
        if self.krylov_restart < 2:
            raise ValidationError("krylov_restart must be >= 2")
        if self.krylov_max_iters < 1:
            raise ValidationError("krylov_max_iters must be >= 1")

    def resolve(self, size: int) -> str:
        if self.method == "auto":
            return "direct" if size <= DIRECT_AUTO_LIMIT else "krylov"
        return self.method


@dataclass
class SolveInfo:
    method: str
    iterations: int
    relative_residual: float


def _check_band(n_matrix: int, g: CoeffGrid):
    if g.n != n_matrix:
        raise ValidationError(f"bandwidth mismatch: matrix n={n_matrix}, vector n={g.n}")


def matvec_banded(m: BandedGalerkinMatrix, v: CoeffGrid) -> CoeffGrid:
    """``K~ v`` from the stored band only."""
    _check_band(m.n, v)
    return CoeffGrid.from_vector(m.n, m.csr @ v.vector())


def _relative_residual(apply_k, rho: np.ndarray, g: np.ndarray) -> float:
    gnorm = np.linalg.norm(g)
    r = np.linalg.norm(rho - apply_k(rho) - g)
    return float(r / gnorm) if gnorm > 0 else float(r)


def _lu(a: np.ndarray):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)  # singularity is reported below
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    d = np.abs(np.diag(lu))
    if not np.all(np.isfinite(d)) or d.min() <= np.finfo(float).eps * max(d.max(), 1.0) * a.shape[0]:
        raise SingularSystemError("system matrix I - K is numerically singular")
    return lu, piv


def _direct(system: np.ndarray, g: np.ndarray) -> np.ndarray:
    return scipy.linalg.lu_solve(_lu(system), g, check_finite=False)


def solve_dense(m: DenseGalerkinMatrix, g: CoeffGrid, cfg: Optional[SolverConfig] = None,
                return_info: bool = False):
    """Solve ``(I - K_N) rho = g`` by LU factorization."""
    _check_band(m.n, g)
    rhs = g.vector()
    if not np.any(rhs):
        out = CoeffGrid.zeros(m.n)
        return (out, SolveInfo("direct", 0, 0.0)) if return_info else out
    rho = _direct(m.system(), rhs)
    res = _relative_residual(lambda v: m.entries @ v, rho, rhs)
    if not res <= DIRECT_RTOL:
        raise SingularSystemError(f"direct solve residual {res:.3e} above {DIRECT_RTOL:g}")
    out = CoeffGrid.from_vector(m.n, rho)
    return (out, SolveInfo("direct", 1, res)) if return_info else out


def _gmres(apply_k, rhs: np.ndarray, cfg: SolverConfig) -> Tuple[np.ndarray, int]:
    size = rhs.size
    op = spla.LinearOperator((size, size), matvec=lambda v: v - apply_k(v), dtype=complex)
    count = [0]

    def tick(_):
        count[0] += 1

    restart = min(cfg.krylov_restart, size)
    rho, info = spla.gmres(
        op, rhs, rtol=cfg.krylov_tol, atol=0.0, restart=restart,
        maxiter=math.ceil(cfg.krylov_max_iters / restart), callback=tick, callback_type="pr_norm",
    )
    res = _relative_residual(apply_k, rho, rhs)
    if info != 0 and res > cfg.krylov_tol:
        raise ConvergenceError(
            f"GMRES did not converge in {count[0]} iterations (relative residual {res:.3e})",
            residual=res, iterations=count[0],
        )
    return rho, count[0]


def solve_banded(m: BandedGalerkinMatrix, g: CoeffGrid, cfg: Optional[SolverConfig] = None,
                 return_info: bool = False):
    """Solve ``(I - K~_N) rho = g``; Krylov uses only banded products."""
    cfg = cfg or SolverConfig()
    _check_band(m.n, g)
    rhs = g.vector()
    method = cfg.resolve(m.size)
    if not np.any(rhs):
        out = CoeffGrid.zeros(m.n)
        return (out, SolveInfo(method, 0, 0.0)) if return_info else out
    apply_k = m.csr.dot
    if method == "direct":
        if m.size > cfg.direct_cap:
            raise ValidationError(f"direct solve refused for N={m.size} > cap {cfg.direct_cap}")
        rho = _direct(m.system().toarray(), rhs)
        iters, tol = 1, DIRECT_RTOL
    else:
        rho, iters = _gmres(apply_k, rhs, cfg)
        tol = cfg.krylov_tol
    res = _relative_residual(apply_k, rho, rhs)
    if not res <= 10 * tol:
        msg = f"{method} solve residual {res:.3e} above {10 * tol:.1e}"
        if method == "direct":
            raise SingularSystemError(msg)
        raise ConvergenceError(msg, residual=res, iterations=iters)
    out = CoeffGrid.from_vector(m.n, rho)
    return (out, SolveInfo(method, iters, res)) if return_info else out


# ---------------------------------------------------------------------------
# Conditioning
# ---------------------------------------------------------------------------

SystemLike = Union[DenseGalerkinMatrix, BandedGalerkinMatrix, np.ndarray, scipy.sparse.spmatrix]


def _as_system(a: SystemLike):
    """Matrices of ``K`` become ``I - K``; raw arrays are taken as the system itself."""
    if isinstance(a, (DenseGalerkinMatrix, BandedGalerkinMatrix)):
        return a.system()
    if scipy.sparse.issparse(a):
        return scipy.sparse.csc_matrix(a, dtype=complex)
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"system must be square, got {a.shape}")
    return a


def _largest_eig(apply, size: int, tol: float) -> float:
    """Largest eigenvalue of a Hermitian positive operator (Lanczos-accelerated power iteration)."""
    if size <= 32:
        dense = np.column_stack([apply(e) for e in np.eye(size, dtype=complex)])
        return float(np.linalg.eigvalsh(dense).max())
    op = spla.LinearOperator((size, size), matvec=apply, dtype=complex)
    v0 = np.ones(size, dtype=complex) + 0.5j * np.cos(np.arange(size))
    vals = spla.eigsh(op, k=1, which="LM", v0=v0, tol=tol, return_eigenvectors=False)
    return float(np.abs(vals).max())


def condition_number(a: SystemLike, force: bool = False, tol: float = 1e-10) -> float:
    """2-norm condition number of the system ``I - K`` (or of a raw square matrix).

    ``sigma_max`` comes from the dominant eigenvalue of ``A^H A``, ``sigma_min``
    from that of ``(A^H A)^{-1}`` applied through an LU factorization.
    """
    sys_ = _as_system(a)
    size = sys_.shape[0]
    if size > CONDITION_CAP and not force:
        raise ValidationError(f"condition number skipped for N={size} > {CONDITION_CAP} (pass force=True)")
    if scipy.sparse.issparse(sys_):
        try:
            lu = spla.splu(sys_.tocsc())
        except RuntimeError as exc:
            raise SingularSystemError(f"factorization failed: {exc}") from None
        if not np.all(np.isfinite(lu.U.diagonal())) or np.abs(lu.U.diagonal()).min() == 0:
            raise SingularSystemError("system matrix is singular")
        fwd = sys_.dot
        adj_mat = sys_.conj().T.tocsr()
        adj = adj_mat.dot

        def inv(v):
            return lu.solve(v)

        def inv_adj(v):
            return lu.solve(v, trans="H")
    else:
        fac = _lu(sys_)
        fwd = sys_.dot
        adj_mat = sys_.conj().T
        adj = adj_mat.dot

        def inv(v):
            return scipy.linalg.lu_solve(fac, v)

        def inv_adj(v):
            return scipy.linalg.lu_solve(fac, v, trans=2)

    big = _largest_eig(lambda v: adj(fwd(v)), size, tol)
    small_inv = _largest_eig(lambda v: inv(inv_adj(v)), size, tol)
    return float(math.sqrt(big * small_inv))


def truncation_error_norms(dense: DenseGalerkinMatrix, banded: BandedGalerkinMatrix) -> Tuple[float, float, float]:
    """``(||E||_1, ||E||_inf, ||E||_2)`` for ``E = K_N - K~_N``.

    The 2-norm is the Lanczos estimate of ``sqrt(lambda_max(E^H E))``, capped
    by the bound ``sqrt(||E||_1 ||E||_inf)``.
    """
    if dense.n != banded.n:
        raise ValidationError(f"dimension mismatch: n={dense.n} vs n={banded.n}")
    e = dense.entries.copy()
    e[banded.rows, banded.cols] -= banded.values
    mag = np.abs(e)
    norm1 = float(mag.sum(axis=0).max())
    norm_inf = float(mag.sum(axis=1).max())
    bound = math.sqrt(norm1 * norm_inf)
    if bound == 0.0:
        return 0.0, 0.0, 0.0
    eh = e.conj().T
    norm2 = math.sqrt(_largest_eig(lambda v: eh @ (e @ v), e.shape[0], 1e-8))
    return norm1, norm_inf, min(norm2, bound)
