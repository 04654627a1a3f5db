import csv
import json
import math

import numpy as np
import pytest

from hardyp.domain import Annulus, build_domain
from hardyp.errors import LadderNotMonotoneError, NonConvergenceError
from hardyp.fem import Field, evaluate_quotient
from hardyp.mesh import triangulate
from hardyp.oracle import RadialProblem, convex_value, radial_constant
from hardyp.solver import (
    SolveConfig,
    comparison_function,
    compute_constant,
    export_result,
    minimize_quotient,
    _scaled_solve,
    shift_candidates,
    solve_ladder,
    transfer,
)


@pytest.fixture(scope="module")
def line512(interval):
    return triangulate(interval, 1 / 64, 2.0, depth=2.0**-230)


def test_interval_eigenvalue(interval):
    mesh = triangulate(interval, 1 / 256, 1.0)
    res = minimize_quotient(mesh, 2.0, 0.0)
    assert res.value == pytest.approx(math.pi**2, rel=0.01)
    assert res.converged and res.residual <= 1e-4


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_interval_hardy_constant(line512, p):
    res = minimize_quotient(line512, p, 1.0)
    ref = convex_value(p)
    assert ref <= res.value <= 1.02 * ref


def test_iteration_log_strictly_decreasing(line512):
    res = minimize_quotient(line512, 1.5, 1.0)
    vals = [r.value for r in res.history]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert res.history[-1].value == res.value


def test_normalised_minimiser(line512):
    res = minimize_quotient(line512, 2.0, 1.0)
    q = evaluate_quotient(line512, res.field, 2.0, 1.0)
    assert q.denominator == pytest.approx(1.0, rel=1e-12)
    assert q.value == pytest.approx(res.value, rel=1e-14)
    assert np.all(res.field.coefficients >= 0)


def test_square_ladder_decreases_above_convex_value(square):
    res = compute_constant(square, 2.0, 1.0, [(0.5, 2.0), (0.25, 2.0), (0.125, 2.0)])
    lv = res.ladder_values
    assert all(b <= a for a, b in zip(lv, lv[1:]))
    assert min(lv) >= 0.25 - 1e-9
    assert res.value <= 1.05 * 0.25
    assert res.alpha is None          # discrete values sit above the convex value
    assert res.slack == pytest.approx(lv[-2] - lv[-1])


def test_annulus_value_close_to_radial(annulus):
    res = minimize_quotient(triangulate(annulus, 0.25, 2.0), 2.0, 1.0)
    ref = radial_constant(RadialProblem(1.0, 2.0, 2, 2.0, 1.0)).value
    assert res.value == pytest.approx(ref, rel=0.02)
    # the annulus constant sits above 1/4, so no decay root exists
    assert res.value > 0.25


def test_warm_start_consistency(line512):
    cfg = SolveConfig(tol_gradient=1e-7, tol_value=1e-10)
    base = minimize_quotient(line512, 2.0, 1.0, cfg)
    warm = minimize_quotient(line512, 2.01, 1.0, SolveConfig(tol_gradient=1e-7, init=base.field))
    cold = minimize_quotient(line512, 2.01, 1.0, cfg)
    assert abs(warm.value - cold.value) <= 10 * cfg.tol_value * cold.value


def test_random_and_comparison_init_agree(line512):
    cfg = SolveConfig(tol_gradient=1e-7)
    a = minimize_quotient(line512, 3.0, 1.0, cfg)
    b = minimize_quotient(line512, 3.0, 1.0, SolveConfig(tol_gradient=1e-7, init="random", seed=4))
    assert b.value == pytest.approx(a.value, rel=1e-9)


@pytest.mark.slow
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_both_inits_converge_on_annulus(p):
    mesh = triangulate(build_domain(Annulus(1.0, 2.0)), 0.3, 2.0)
    comp = minimize_quotient(mesh, p, 1.0)
    rand = minimize_quotient(mesh, p, 1.0, SolveConfig(init="random", seed=0))
    assert comp.converged and rand.converged
    assert rand.value == pytest.approx(comp.value, rel=1e-6)


def test_callback_sees_every_accepted_step(interval):
    mesh = triangulate(interval, 1 / 32, 1.5)
    seen = []
    res = minimize_quotient(mesh, 2.0, 1.0, SolveConfig(callback=seen.append))
    assert len(seen) == res.iterations
    assert [h.value for h in seen] == [h.value for h in res.history[1:]]


def test_scaled_solve_counts_negative_eigenvalues():
    import scipy.sparse as sp

    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.normal(size=(12, 12)))
    eig = np.array([-3.0, -0.5, -1e-3] + [1.0 + k for k in range(9)])
    d = 10.0 ** rng.uniform(-20, 20, 12)
    B = (Q * eig) @ Q.T
    rhs = rng.normal(size=12)
    z, negative = _scaled_solve(sp.csr_matrix(d[:, None] * B * d[None, :]), rhs)
    assert negative == 3
    # A = D B D with B well conditioned, so z = D^-1 B^-1 D^-1 rhs is the reference
    np.testing.assert_allclose(z, np.linalg.solve(B, rhs / d) / d, rtol=1e-8)


def test_random_init_is_seeded(interval):
    mesh = triangulate(interval, 1 / 32, 1.5)
    cfg = SolveConfig(init="random", seed=11)
    a, b = minimize_quotient(mesh, 2.0, 1.0, cfg), minimize_quotient(mesh, 2.0, 1.0, cfg)
    assert a.value == b.value
    np.testing.assert_array_equal(a.field.coefficients, b.field.coefficients)


def test_nonconvergence_reported(line512):
    with pytest.raises(NonConvergenceError) as info:
        minimize_quotient(line512, 2.0, 1.0, SolveConfig(max_iterations=1))
    assert info.value.iterations == 1


def test_ladder_rise_detected(interval):
    fine = triangulate(interval, 1 / 64, 2.0)
    coarse = triangulate(interval, 1 / 4, 1.0)
    with pytest.raises(LadderNotMonotoneError):
        solve_ladder([fine, coarse], 2.0, 1.0)


def test_ladder_must_decrease(square):
    with pytest.raises(ValueError):
        compute_constant(square, 2.0, 1.0, [0.1, 0.2])


@pytest.mark.parametrize("kwargs", [dict(tol_gradient=0), dict(max_iterations=0),
                                    dict(min_shift_gap=0.5, max_shift_gap=0.1)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolveConfig(**kwargs)


def test_shift_candidates_order():
    s = shift_candidates(1.0, 1e-3)
    assert list(s) == sorted(s, reverse=True)
    assert s[0] == pytest.approx(1 - 1e-5)
    assert shift_candidates(1.0, math.inf)[0] == pytest.approx(0.99)
    assert shift_candidates(1.0, 1e-20)[0] == pytest.approx(1 - 1e-10)


def test_comparison_function_vanishes_on_boundary(lshape):
    mesh = triangulate(lshape, 0.3, 2.0)
    u = comparison_function(mesh, 0.5)
    assert np.all(u[mesh.boundary] == 0) and np.all(u[~mesh.boundary] > 0)


def test_transfer_between_meshes(annulus):
    coarse = triangulate(annulus, 0.3, 2.0)
    fine = triangulate(annulus, 0.15, 2.0)
    f = Field(coarse, comparison_function(coarse, 0.5))
    moved = transfer(f, fine)
    expected = comparison_function(fine, 0.5)
    inner = fine.distance > 0.05
    np.testing.assert_allclose(moved[inner], expected[inner], rtol=0.05)
    assert np.all(moved[fine.boundary] == 0)


def test_export_result(line512, tmp_path):
    res = minimize_quotient(line512, 2.0, 1.0)
    path = export_result(res, tmp_path, "r")
    rec = json.loads(path.read_text())
    assert rec["value"] == res.value and rec["source"] == "fem"
    assert rec["infimum_attained_expected"] is False
    assert (tmp_path / "r.field").exists()
    with open(tmp_path / "r_log.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(res.history)
    assert float(rows[-1]["value"]) == pytest.approx(res.value, rel=1e-11)


def test_result_record_flags(annulus):
    res = minimize_quotient(triangulate(annulus, 0.3, 2.0), 2.0, 1.0)
    rec = res.record()
    assert rec["domain_convex"] is False and rec["infimum_attained_expected"] is True
    assert rec["smoothness"] == "smooth"
