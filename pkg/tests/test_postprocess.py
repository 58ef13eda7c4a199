import math

import numpy as np
import pytest

from torusbie.assembly import (
    QuadratureConfig,
    RhsSpec,
    assemble_dense,
    assemble_rhs,
    compute_tables,
    dense_from_table,
    dense_j_set,
    normalize_orientation,
)
from torusbie.errors import ValidationError
from torusbie.linsolve import solve_dense
from torusbie.postprocess import (
    SolveReport,
    compression_ratio,
    convergence_order,
    decay_profile,
    diagonal_profiles,
    eval_potential,
    log_slope,
    relative_error,
    write_decay_csv,
    write_table_csv,
)
from torusbie.spectral import CoeffGrid
from torusbie.surface import get_surface

# exterior pole and five interior points per surface
HARMONIC_CASES = {
    "torus": ((4.0, 0.0, 0.0), [(2.5, 0, 0), (0, 2.2, 0.3), (-2, 0, -0.4), (0, -1.6, 0.2), (1.4, 1.4, 0)]),
    "bagel": ((9.0, 0.0, 0.0), [(5, 0, 1), (0, 7.5, -1), (-5, 0, 0.5), (0, -2.5, 0), (4.5, 4.5, 0.5)]),
    "cruller": ((1.8, 0.0, 0.0), [(1, 0, 0), (0, 1.1, 0.1), (-1, 0, -0.1), (0, -0.9, 0), (0.7, 0.7, 0.1)]),
}


# --- error metrics -------------------------------------------------------


def test_relative_error_examples():
    ref = CoeffGrid.from_entries(2, {(0, 0): 1.0, (1, 0): 0.1})
    assert relative_error(ref, ref) == 0.0
    assert relative_error(ref, CoeffGrid.zeros(1)) == 1.0
    cand = CoeffGrid.from_entries(1, {(0, 0): 1.0})
    assert relative_error(ref, cand) == pytest.approx(0.1 / math.sqrt(1.01), rel=1e-14)
    with pytest.raises(ValidationError):
        relative_error(CoeffGrid.zeros(2), cand)
    with pytest.raises(ValidationError):
        relative_error(cand, ref)


def test_convergence_order_examples():
    assert round(convergence_order(8.8193e-06, 3.1172e-06, 25), 2) == 2.04
    assert round(convergence_order(3.1172e-06, 1.4445e-06, 35), 2) == 2.29
    assert convergence_order(1e-3, 1e-3, 20) == 0.0
    with pytest.raises(ValidationError):
        convergence_order(0.0, 1e-3, 20)
    with pytest.raises(ValidationError):
        convergence_order(1e-3, 1e-4, 10)


def test_compression_ratio_examples_and_monotone():
    assert compression_ratio(15, 2.3) == pytest.approx(0.3443, abs=1e-4)
    assert compression_ratio(35, 2.3) == pytest.approx(0.1243, abs=1e-4)
    assert compression_ratio(3, 100.0) == 1.0
    # monotone along n = 5, 15, 25, ...; single steps can tick up where the band width jumps
    crs = [compression_ratio(n, 2.3) for n in range(5, 66, 10)]
    assert all(b <= a for a, b in zip(crs, crs[1:]))
    assert all(0 < compression_ratio(n, 2.3) <= 1 for n in range(1, 61))


# --- potential -----------------------------------------------------------


@pytest.mark.parametrize("name, point", [("torus", (0.0, 2.0, 0.1)), ("bagel", (5.0, 0.0, 0.5)), ("cruller", (0.0, 1.0, 0.0))])
def test_constant_density_potential(name, point):
    rho = CoeffGrid.from_entries(3, {(0, 0): -0.5})
    assert eval_potential(get_surface(name), rho, point, QuadratureConfig(128, 32)) == pytest.approx(1.0, abs=1e-6)


def test_zero_density_and_batch_shape():
    s = get_surface("torus")
    assert eval_potential(s, CoeffGrid.zeros(2), (2.0, 0.0, 0.0)) == 0.0
    rho = CoeffGrid.from_entries(2, {(0, 0): -0.5})
    out = eval_potential(s, rho, np.array([[2.0, 0, 0], [0, 2.0, 0]]))
    assert out.shape == (2,)
    np.testing.assert_allclose(out, 1.0, atol=1e-6)


def test_potential_orientation_independent():
    rho = CoeffGrid.from_entries(2, {(0, 0): -0.5, (1, 0): 0.1, (-1, 0): 0.1})
    s = get_surface("bagel")
    a = eval_potential(s, rho, (5.0, 0.0, 0.0))
    b = eval_potential(s.flipped(), rho, (5.0, 0.0, 0.0))
    assert a == b


def test_potential_rejects_bad_points():
    s = get_surface("torus")
    rho = CoeffGrid.from_entries(1, {(0, 0): -0.5})
    with pytest.raises(ValidationError, match="from the surface"):
        eval_potential(s, rho, (2.99, 0.0, 0.0), QuadratureConfig(64, 32))
    with pytest.raises(ValidationError, match="not inside"):
        eval_potential(s, rho, (0.0, 0.0, 0.0), QuadratureConfig(64, 32))
    with pytest.raises(ValidationError):
        eval_potential(s, CoeffGrid.zeros(40), (2.0, 0.0, 0.0), QuadratureConfig(64, 32))


def test_harmonic_pole_single_point():
    s = get_surface("torus")
    quad = QuadratureConfig(256, 128)
    r = RhsSpec("harmonic_pole", pole=(10.0, 0.0, 0.0))
    rho = solve_dense(assemble_dense(s, 8, quad), assemble_rhs(s, r, 8, quad))
    assert eval_potential(s, rho, (2.5, 0.0, 0.0), quad) == pytest.approx(1 / 7.5, rel=1e-5)


@pytest.mark.parametrize("name", sorted(HARMONIC_CASES))
def test_harmonic_reproduction_converges(name):
    pole, points = HARMONIC_CASES[name]
    quad = QuadratureConfig(256, 128)
    s = normalize_orientation(get_surface(name), quad)
    (table,) = compute_tables(s, quad, [(dense_j_set(20), 20)])
    rhs = RhsSpec("harmonic_pole", pole=pole)
    pts = np.array(points, dtype=float)
    exact = 1.0 / np.linalg.norm(pts - np.array(pole), axis=1)
    errs = []
    for n in (5, 10, 15, 20):
        rho = solve_dense(dense_from_table(table, n), assemble_rhs(s, rhs, n, quad))
        errs.append(float(np.max(np.abs(eval_potential(s, rho, pts, quad) - exact))))
    assert all(b <= 1.1 * a for a, b in zip(errs, errs[1:])), errs
    assert errs[-1] < 1e-2 * errs[0], errs


# --- decay ---------------------------------------------------------------


def test_decay_profile_shape_and_gauss_entry(bagel_dense5):
    rows = decay_profile(bagel_dense5, 10)
    assert [r.d for r in rows] == list(range(11))
    assert rows[0].max_abs == pytest.approx(1.0, abs=0.05)
    assert log_slope([r.d for r in rows[1:]], [r.max_abs for r in rows[1:]]) < 0
    assert all(r.mean_abs <= r.max_abs for r in rows)
    with pytest.raises(ValidationError):
        decay_profile(bagel_dense5, 21)


def test_decay_profile_brute_force(bagel_dense5):
    from torusbie.spectral import make_index_set

    idx = make_index_set(5)
    mag = np.abs(bagel_dense5.entries)
    rows = decay_profile(bagel_dense5, 4)
    for r in rows:
        sel = [mag[a, b] for a in range(len(idx)) for b in range(len(idx)) if np.abs(idx[a] - idx[b]).sum() == r.d]
        assert r.max_abs == max(sel)
        assert r.mean_abs == pytest.approx(np.mean(sel), rel=1e-12)


def test_anti_diagonal_decays_faster(bagel_dense5):
    prof = diagonal_profiles(bagel_dense5)
    rd, diag = prof.envelope("diagonal")
    ra, anti = prof.envelope("anti_diagonal")
    sel = (rd >= 1) & (rd <= 10)
    assert log_slope(ra[sel], anti[sel]) < log_slope(rd[sel], diag[sel])


def test_log_slope():
    x = np.arange(5)
    assert log_slope(x, np.exp(-0.5 * x)) == pytest.approx(-0.5)
    with pytest.raises(ValidationError):
        log_slope(x, -np.ones(5))


# --- CSV -----------------------------------------------------------------


def test_table_and_decay_csv(tmp_path):
    rep = SolveReport(15, e_n=1e-5, cond=3.98, cr=0.3443, skipped=("e_trunc",))
    path = tmp_path / "t.csv"
    write_table_csv(path, [rep])
    lines = path.read_text().splitlines()
    assert lines[0] == "n,e_n,co,cond,e_trunc,co_trunc,cond_trunc,cr"
    assert lines[1] == "15,1e-05,,3.98,skipped,,,0.3443"
    path = tmp_path / "d.csv"
    from torusbie.postprocess import DecayRow

    write_decay_csv(path, [DecayRow(0, 1.0, 0.5)])
    assert path.read_text().splitlines() == ["d,max_abs,mean_abs", "0,1,0.5"]
