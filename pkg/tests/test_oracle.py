import json
import math

import pytest

from hardyp.oracle import (
    Disk,
    IntervalShape,
    RadialProblem,
    bessel_j0,
    bessel_j0_first_zero,
    classical_eigen_reference,
    convex_value,
    export_oracle,
    radial_constant,
    radial_grid,
)
from hardyp.analysis import monotone_transform


def test_convex_values():
    assert convex_value(2.0) == 0.25
    assert convex_value(3.0) == pytest.approx(8 / 27, rel=1e-15)
    h = convex_value(1.01)
    assert h == pytest.approx((0.01 / 1.01) ** 1.01, rel=1e-15)
    assert h == pytest.approx(9.44e-3, rel=2e-3)
    # at the convex value H^(1/p) = (p-1)/p, so the transform is 2p - 1
    assert monotone_transform(1.01, h) == pytest.approx(2 * 1.01 - 1, rel=1e-12)
    with pytest.raises(ValueError):
        convex_value(1.0)


def test_thin_annulus_near_slab_value():
    v = radial_constant(RadialProblem(1.0, 1.01, 2, 2.0, 1.0)).value
    assert v == pytest.approx(0.25, rel=0.03)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_one_dimensional_reduction(p):
    v = radial_constant(RadialProblem(0.0, 1.0, 1, p, 1.0)).value
    assert convex_value(p) <= v <= 1.02 * convex_value(p)


def test_one_dimensional_eigenvalue():
    v = radial_constant(RadialProblem(0.0, 1.0, 1, 2.0, 0.0)).value
    assert v == pytest.approx(math.pi**2, rel=0.01)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_dilation_invariance(p):
    a = radial_constant(RadialProblem(1.0, 2.0, 2, p, 1.0)).value
    b = radial_constant(RadialProblem(3.0, 6.0, 2, p, 1.0)).value
    assert b == pytest.approx(a, rel=1e-6)


def test_eigenvalue_dilation_scaling():
    t, p = 2.0, 2.0
    a = radial_constant(RadialProblem(1.0, 2.0, 2, p, 0.0)).value
    b = radial_constant(RadialProblem(1.0 * t, 2.0 * t, 2, p, 0.0)).value
    assert b == pytest.approx(a * t**-p, rel=1e-6)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_grid_refinement_stable(p):
    a = radial_constant(RadialProblem(1.0, 2.0, 2, p, 1.0, radial_grid(1.0, 2.0, 64))).value
    b = radial_constant(RadialProblem(1.0, 2.0, 2, p, 1.0, radial_grid(1.0, 2.0, 128, 1.25 ** 0.5))).value
    assert abs(a - b) <= 0.005 * b


def test_annulus_radial_value_above_convex():
    # the radial problem on annulus(1, 2) stays above ((p-1)/p)^p at these depths
    for p in (1.5, 2.0, 3.0):
        assert radial_constant(RadialProblem(1.0, 2.0, 2, p, 1.0)).value > convex_value(p)


def test_wide_annulus_drops_below_convex_value_for_large_p():
    v = radial_constant(RadialProblem(1.0, 50.0, 2, 3.0, 1.0)).value
    assert v < 0.9 * convex_value(3.0)


def test_bessel():
    assert bessel_j0(0.0) == 1.0
    assert bessel_j0(1.0) == pytest.approx(0.7651976865579666, abs=1e-15)
    j = bessel_j0_first_zero()
    assert j == pytest.approx(2.404826, abs=1e-6)
    assert abs(bessel_j0(j)) < 1e-14


def test_classical_references():
    assert classical_eigen_reference(IntervalShape(1.0)) == pytest.approx(math.pi**2)
    assert classical_eigen_reference(IntervalShape(2.0)) == pytest.approx(math.pi**2 / 4)
    assert classical_eigen_reference(Disk(1.0)) == pytest.approx(5.7832, abs=1e-4)
    with pytest.raises(ValueError):
        classical_eigen_reference("square")


@pytest.mark.parametrize("kwargs", [dict(inner=2.0, outer=1.0), dict(inner=1, outer=2, p=1.0),
                                    dict(inner=1, outer=2, a=2.0), dict(inner=1, outer=2, ambient_dim=0)])
def test_problem_validation(kwargs):
    with pytest.raises(ValueError):
        RadialProblem(**kwargs)


def test_grid_validation():
    with pytest.raises(ValueError):
        RadialProblem(1.0, 2.0, grid=radial_grid(1.0, 2.0, 4, 2.0, 1e-3))
    with pytest.raises(ValueError):
        RadialProblem(1.0, 3.0, grid=radial_grid(1.0, 2.0))


def test_export_tags_source(tmp_path):
    res = radial_constant(RadialProblem(1.0, 2.0, 2, 2.0, 1.0))
    rec = res.record()
    assert rec["source"] == "oracle"
    path = export_oracle(dict(rec, source="x"), tmp_path / "o" / "r.json")
    assert json.loads(path.read_text())["source"] == "oracle"
