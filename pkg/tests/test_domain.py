import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardyp.domain import (
    Annulus,
    Interval,
    Polygon,
    build_domain,
    distance_to_boundary,
    is_convex,
    l_shape,
    load_spec,
    regular_polygon,
    spec_from_dict,
    spec_to_dict,
)
from hardyp.errors import (
    DomainError,
    NonPositiveMeasureError,
    OutsideDomainError,
    SelfIntersectingError,
)


def test_interval_geometry(interval):
    assert interval.diameter == 1.0
    assert interval.measure == 1.0


def test_square_geometry(square):
    assert square.measure == pytest.approx(1.0, abs=1e-15)
    assert len(square.edges) == 4


def test_crossing_edges_rejected():
    with pytest.raises(SelfIntersectingError):
        build_domain(Polygon(((0, 0), (1, 1), (1, 0), (0, 1))))


def test_clockwise_polygon_rejected():
    with pytest.raises(NonPositiveMeasureError):
        build_domain(Polygon(((0, 0), (0, 1), (1, 1), (1, 0))))


@pytest.mark.parametrize("spec", [Interval(0.0), Annulus(2.0, 1.0), Annulus(0.0, 1.0)])
def test_degenerate_specs_rejected(spec):
    with pytest.raises(DomainError):
        build_domain(spec)


def test_square_centre_distance(square):
    assert distance_to_boundary(square, (0.5, 0.5)) == pytest.approx(0.5, abs=1e-15)


def test_annulus_distance(annulus):
    assert distance_to_boundary(annulus, (1.25, 0.0)) == pytest.approx(0.25, abs=1e-15)
    x = 1.25 / math.sqrt(2)
    assert distance_to_boundary(annulus, (x, x)) == pytest.approx(0.25, abs=1e-15)


def test_lshape_reentrant_corner_distance(lshape):
    # (1.1, 1.1) lies in the cut-out square; its mirror image is inside
    assert distance_to_boundary(lshape, (0.9, 0.9)) == pytest.approx(math.sqrt(0.02), abs=1e-12)
    with pytest.raises(OutsideDomainError):
        distance_to_boundary(lshape, (1.1, 1.1))


def test_interval_distance(interval):
    assert distance_to_boundary(interval, 0.3) == pytest.approx(0.3)
    assert distance_to_boundary(interval, 0.9) == pytest.approx(0.1)


def test_outside_point_raises(square, lshape, annulus):
    with pytest.raises(OutsideDomainError):
        square.distance(np.array([[1.5, 0.5]]))
    with pytest.raises(OutsideDomainError):
        lshape.distance(np.array([[1.5, 1.5]]))
    with pytest.raises(OutsideDomainError):
        annulus.distance(np.array([[0.5, 0.0]]))


def test_convexity(square, lshape, annulus, interval):
    assert is_convex(square)
    assert not is_convex(lshape)
    assert not is_convex(annulus)
    assert is_convex(interval)
    assert is_convex(build_domain(regular_polygon(128)))


@pytest.mark.parametrize("spec", [Interval(2.5), Annulus(1.0, 3.0), l_shape()])
def test_spec_round_trip(spec, tmp_path):
    assert spec_from_dict(spec_to_dict(spec)) == spec
    path = tmp_path / "d.json"
    path.write_text(json.dumps(spec_to_dict(spec)))
    assert load_spec(path) == spec


def test_unknown_spec_type():
    with pytest.raises(DomainError):
        spec_from_dict({"type": "sphere"})


points = st.tuples(st.floats(0, 2), st.floats(0, 2))


@settings(max_examples=200, deadline=None)
@given(points, points)
def test_lshape_distance_is_1_lipschitz(x, y):
    dom = build_domain(l_shape())
    pts = np.array([x, y])
    if not dom.contains(pts).all():
        return
    dx, dy = dom.distance(pts)
    assert abs(dx - dy) <= math.dist(x, y) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 2 * math.pi))
def test_annulus_distance_formula(s, theta):
    dom = build_domain(Annulus(1.0, 2.0))
    r = 1.0 + s
    d = dom.distance(np.array([[r * math.cos(theta), r * math.sin(theta)]]))[0]
    assert d == pytest.approx(min(r - 1.0, 2.0 - r), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.0, 1.0))
def test_interval_distance_formula(length, t):
    dom = build_domain(Interval(length))
    x = t * length
    assert dom.distance(np.array([x]))[0] == pytest.approx(min(x, length - x), abs=1e-12)
