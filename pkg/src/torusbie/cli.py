"""Command-line front end.

Subcommands: ``surface-validate``, ``assemble``, ``solve``, ``experiment``,
``decay`` and ``potential``. Options may also come from a flat
``key=value`` file passed with ``--config`` (keys are the long flag names
without dashes, ``n`` and ``q`` for the short ones); explicit flags win.

Exit status is 0 on success, 2 on usage errors and 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import assembly as asm
from .errors import TorusBIEError, ValidationError
from .experiment import (
    DEFAULT_Q,
    DEFAULT_Q_REF,
    ExperimentConfig,
    auto_quadrature,
    parse_int_list,
    run_experiment,
)
from .linsolve import SolverConfig, condition_number, solve_banded, solve_dense
from .matrix_io import read_matrix, write_matrix
from .postprocess import (
    DECAY_HEADER,
    TABLE_HEADER,
    decay_profile,
    diagonal_profiles,
    eval_potential,
    write_decay_csv,
)
from .spectral import write_coeffs_csv
from .surface import CATALOG_NAMES, check_periodicity, estimate_injectivity_constant, get_surface

logger = logging.getLogger("torusbie")

PROBLEMS = asm.RhsSpec.KINDS
BOOL_TRUE = {"1", "true", "yes", "on"}
BOOL_FALSE = {"0", "false", "no", "off"}


class UsageError(Exception):
    pass


def _vec3(text: str):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if len(vals) != 3 or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected three finite numbers, got {text!r}")
    return vals


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _int_list(text: str) -> List[int]:
    try:
        return parse_int_list(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_common(p: argparse.ArgumentParser, problem=False, order=False, mode=False):
    p.add_argument("--config", help="key=value file; explicit flags override it")
    p.add_argument("--surface", choices=CATALOG_NAMES)
    p.add_argument("--mtheta", type=_positive_int, help="theta grid points per axis")
    p.add_argument("--mvartheta", type=_positive_int, help="offset grid points per axis (default 128)")
    p.add_argument("--deterministic", action="store_true", default=None,
                   help="single-threaded transforms (bit-reproducible)")
    p.add_argument("--threads", type=_positive_int, help="FFT worker threads (default TORUSBIE_THREADS)")
    p.add_argument("--no-subtraction", dest="no_subtraction", action="store_true", default=None,
                   help="plain offset quadrature without the Gauss-identity correction")
    p.add_argument("-v", "--verbose", action="store_true", default=None)
    if problem:
        p.add_argument("--problem", choices=PROBLEMS)
        p.add_argument("--value", type=float, help="boundary value for --problem constant")
        p.add_argument("--pole", type=_vec3, help="x,y,z of the exterior pole for harmonic_pole")
    if order:
        p.add_argument("-n", type=_positive_int, help="Fourier order (N = (2n+1)^2)")
    if mode:
        p.add_argument("-q", type=_positive_float, help=f"band parameter (default {DEFAULT_Q})")
        p.add_argument("--mode", choices=("dense", "banded"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="torusbie", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("surface-validate", help="periodicity, injectivity and Gauss-probe checks")
    _add_common(p)
    p.add_argument("--samples", type=_positive_int, help="samples per axis for the injectivity scan (64)")

    p = sub.add_parser("assemble", help="assemble a Galerkin matrix into a TBIE file")
    _add_common(p, order=True, mode=True)
    p.add_argument("--out", help="output matrix file")

    p = sub.add_parser("solve", help="solve for the density coefficients")
    _add_common(p, problem=True, order=True, mode=True)
    p.add_argument("--matrix", help="use a previously assembled TBIE file")
    p.add_argument("--out", help="coefficient CSV (k0,k1,re,im)")
    p.add_argument("--cond", action="store_true", default=None, help="also report the condition number")

    p = sub.add_parser("experiment", help="error / condition / compression table")
    _add_common(p, problem=True)
    p.add_argument("-q", type=_positive_float, help=f"band parameter (default {DEFAULT_Q})")
    p.add_argument("--nlist", type=_int_list, help="comma-separated orders, e.g. 15,25")
    p.add_argument("--nref", type=_positive_int, help="reference order (default 35)")
    p.add_argument("--qref", type=_positive_float, help=f"reference band parameter (default {DEFAULT_Q_REF})")
    p.add_argument("--out", help="table CSV")

    p = sub.add_parser("decay", help="entry-decay profile of the dense matrix")
    _add_common(p, order=True)
    p.add_argument("--max-distance", dest="max_distance", type=int, help="largest |k-l|_1 (default 4n)")
    p.add_argument("--profiles", help="also write diagonal / anti-diagonal moduli to this CSV")
    p.add_argument("--out", help="decay CSV (d,max_abs,mean_abs)")

    p = sub.add_parser("potential", help="interior values of the solution")
    _add_common(p, problem=True, order=True, mode=True)
    p.add_argument("--point", type=_vec3, action="append", help="x,y,z (repeatable)")
    p.add_argument("--out", help="CSV of x,y,z,u (default stdout)")
    return parser


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


def read_config(path: str) -> Dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _apply_config(parser, sub_parser, args, argv) -> argparse.Namespace:
    values = read_config(args.config)
    actions = {a.dest: a for a in sub_parser._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None:
            raise UsageError(f"{args.config}: unknown key {key!r}")
        if action.nargs == 0:  # store_true
            low = raw.lower()
            if low not in BOOL_TRUE | BOOL_FALSE:
                raise UsageError(f"{args.config}: {key} expects true/false, got {raw!r}")
            defaults[key] = low in BOOL_TRUE
        elif isinstance(action, argparse._AppendAction):
            defaults[key] = [action.type(v) if action.type else v for v in raw.split(";")]
        else:
            try:
                val = action.type(raw) if action.type else raw
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"{args.config}: {key}: {exc}") from None
            if action.choices is not None and val not in action.choices:
                raise UsageError(f"{args.config}: {key} must be one of {list(action.choices)}")
            defaults[key] = val
    sub_parser.set_defaults(**defaults)
    return parser.parse_args(argv)


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse and validate; raises ``SystemExit(2)`` on usage errors."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    sub_parser = parser._subparsers._group_actions[0].choices[args.command]
    try:
        if args.config:
            args = _apply_config(parser, sub_parser, args, argv)
        _validate(args)
    except (UsageError, OSError) as exc:
        sub_parser.error(str(exc))
    return args


def _validate(args) -> None:
    if args.command != "solve" or not getattr(args, "matrix", None):
        if args.surface is None:
            raise UsageError("--surface is required")
    if args.command in ("assemble", "decay", "potential") and args.n is None:
        raise UsageError("-n is required")
    if args.command == "solve" and args.n is None and not args.matrix:
        raise UsageError("-n is required unless --matrix is given")
    if hasattr(args, "problem"):
        if args.problem is None:
            raise UsageError("--problem is required")
        if args.problem == "harmonic_pole" and args.pole is None:
            raise UsageError("--problem harmonic_pole needs --pole x,y,z")
        if args.problem != "harmonic_pole" and args.pole is not None:
            raise UsageError("--pole only applies to --problem harmonic_pole")
    if args.command == "experiment":
        if not args.nlist:
            raise UsageError("--nlist is required")
        if any(b <= a for a, b in zip(args.nlist, args.nlist[1:])) or min(args.nlist) < 1:
            raise UsageError("--nlist must be strictly increasing positive integers")
        nref = args.nref or 35
        if nref <= max(args.nlist):
            raise UsageError(f"--nref {nref} must exceed max(--nlist)")
    if args.command == "potential":
        if not args.point:
            raise UsageError("at least one --point is required")
        if args.pole is not None:
            for pt in args.point:
                if np.allclose(pt, args.pole):
                    raise UsageError(f"--point {pt} coincides with --pole")
    if args.command == "decay" and args.max_distance is not None:
        if not 0 <= args.max_distance <= 4 * args.n:
            raise UsageError(f"--max-distance must lie in [0, {4 * args.n}]")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _quad(args, j_extent: int) -> asm.QuadratureConfig:
    mt = args.mtheta or max(64, asm.next_pow2(2 * (2 * j_extent + 1)))
    return asm.QuadratureConfig(
        m_theta=mt,
        m_vartheta=args.mvartheta or asm.DEFAULT_M_VARTHETA,
        deterministic=bool(args.deterministic),
        subtract_singularity=not args.no_subtraction,
        threads=args.threads,
    )


def _rhs(args) -> asm.RhsSpec:
    if args.problem == "constant":
        return asm.RhsSpec("constant", value=1.0 if args.value is None else args.value)
    return asm.RhsSpec(args.problem, pole=args.pole)


def _j_extent(args) -> int:
    if getattr(args, "mode", None) == "banded":
        return min(asm.band_width(args.n, args.q or DEFAULT_Q), 2 * args.n)
    return 2 * args.n


def _assemble(args, surface):
    quad = _quad(args, _j_extent(args))
    if getattr(args, "mode", None) == "banded":
        return asm.assemble_banded(surface, args.n, args.q or DEFAULT_Q, quad)
    return asm.assemble_dense(surface, args.n, quad)


def cmd_surface_validate(args, out) -> int:
    s = get_surface(args.surface)
    quad = _quad(args, 0)
    periodic = check_periodicity(s, 1e-12)
    c0 = estimate_injectivity_constant(s, args.samples or 64)
    mean, dev = asm.gauss_identity_residual(s, quad)
    ok = periodic and c0 > 0 and abs(abs(mean) - 1) <= asm.ORIENTATION_TOLERANCE
    sign = -1 if mean > 0 else 1
    print(f"surface={s.name} periodic={periodic} injectivity={c0:.6g} "
          f"gauss_mean={mean:.6f} gauss_deviation={dev:.3e} "
          f"normalized_orientation={sign:+d} ok={ok}", file=out)
    return 0 if ok else 1


def cmd_assemble(args, out) -> int:
    t = time.perf_counter()
    m = _assemble(args, get_surface(args.surface))
    kind = "dense" if isinstance(m, asm.DenseGalerkinMatrix) else "banded"
    nnz = m.size**2 if kind == "dense" else m.nnz
    if args.out:
        write_matrix(args.out, m)
    print(f"assembled {kind} n={m.n} N={m.size} nnz={nnz} m_theta={m.quad.m_theta} "
          f"m_vartheta={m.quad.m_vartheta} time={time.perf_counter() - t:.2f}s", file=out)
    return 0


def cmd_solve(args, out) -> int:
    t = time.perf_counter()
    if args.matrix:
        m = read_matrix(args.matrix, subtract_singularity=not args.no_subtraction)
        if args.surface is None:
            raise ValidationError("--surface is required to build the right-hand side")
        quad = m.quad or _quad(args, 2 * m.n)
    else:
        m = _assemble(args, get_surface(args.surface))
        quad = m.quad
    ta = time.perf_counter() - t
    g = asm.assemble_rhs(get_surface(args.surface), _rhs(args), m.n, quad)
    t = time.perf_counter()
    if isinstance(m, asm.DenseGalerkinMatrix):
        rho, info = solve_dense(m, g, return_info=True)
    else:
        rho, info = solve_banded(m, g, SolverConfig(), return_info=True)
    ts = time.perf_counter() - t
    if args.out:
        write_coeffs_csv(args.out, rho)
    msg = (f"solved n={m.n} N={m.size} method={info.method} iterations={info.iterations} "
           f"residual={info.relative_residual:.3e} assemble={ta:.2f}s solve={ts:.2f}s")
    if args.cond:
        msg += f" cond={condition_number(m):.6f}"
    print(msg, file=out)
    return 0


def cmd_experiment(args, out) -> int:
    cfg = ExperimentConfig(
        surface=args.surface,
        problem=_rhs(args),
        n_list=args.nlist,
        n_ref=args.nref or 35,
        q=args.q or DEFAULT_Q,
        q_ref=args.qref or DEFAULT_Q_REF,
        table_path=args.out,
    )
    cfg.quad = auto_quadrature(
        cfg,
        m_theta=args.mtheta,
        m_vartheta=args.mvartheta,
        deterministic=bool(args.deterministic),
        subtract_singularity=not args.no_subtraction,
        threads=args.threads,
    )
    reports = run_experiment(cfg)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for rep in reports:
        w.writerow(rep.table_row())
    failed = [r for r in reports if r.failure]
    for r in failed:
        print(f"row n={r.n} failed: {r.failure}", file=sys.stderr)
    return 1 if failed else 0


def cmd_decay(args, out) -> int:
    m = asm.assemble_dense(get_surface(args.surface), args.n, _quad(args, 2 * args.n))
    maxd = 4 * args.n if args.max_distance is None else args.max_distance
    rows = decay_profile(m, maxd)
    if args.out:
        write_decay_csv(args.out, rows)
    else:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(DECAY_HEADER)
        for r in rows:
            w.writerow((r.d, f"{r.max_abs:.10g}", f"{r.mean_abs:.10g}"))
    if args.profiles:
        prof = diagonal_profiles(m)
        with open(args.profiles, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("index", "radius", "diagonal", "anti_diagonal"))
            for i, (r, d, a) in enumerate(zip(prof.radius, prof.diagonal, prof.anti_diagonal)):
                w.writerow((i, int(r), f"{d:.10g}", f"{a:.10g}"))
    return 0


def cmd_potential(args, out) -> int:
    s = get_surface(args.surface)
    rhs = _rhs(args)
    m = _assemble(args, s)
    g = asm.assemble_rhs(s, rhs, m.n, m.quad)
    rho = solve_dense(m, g) if isinstance(m, asm.DenseGalerkinMatrix) else solve_banded(m, g)
    pts = np.array(args.point, dtype=float)
    vals = np.atleast_1d(eval_potential(s, rho, pts, m.quad))
    fh = open(args.out, "w", newline="") if args.out else out
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x", "y", "z", "u"))
        for p, u in zip(pts, vals):
            w.writerow((*(f"{c:.10g}" for c in p), f"{u:.12g}"))
    finally:
        if args.out:
            fh.close()
    return 0


COMMANDS = {
    "surface-validate": cmd_surface_validate,
    "assemble": cmd_assemble,
    "solve": cmd_solve,
    "experiment": cmd_experiment,
    "decay": cmd_decay,
    "potential": cmd_potential,
}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (TorusBIEError, MemoryError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
