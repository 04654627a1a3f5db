import numpy as np
import pytest

from hardyp.domain import Annulus, Interval, build_domain, regular_polygon
from hardyp.errors import ResolutionTooCoarseError
from hardyp.mesh import check_mesh, dyadic_count, export_mesh, read_mesh_export, triangulate


def test_square_uniform_coarse(square):
    mesh = triangulate(square, 0.5, 1.0)
    assert mesh.n_elements >= 8
    assert check_mesh(mesh) == []


def test_interval_uniform(interval):
    mesh = triangulate(interval, 0.25, 1.0)
    np.testing.assert_allclose(mesh.vertices[:, 0], [0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(mesh.distance, [0, 0.25, 0.5, 0.25, 0])
    assert check_mesh(mesh) == []


def test_annulus_grading(annulus):
    mesh = triangulate(annulus, 0.2, 2.0)
    assert check_mesh(mesh) == []
    diam = mesh.element_diameters()
    at_boundary = mesh.boundary[mesh.elements].any(axis=1)
    assert diam[at_boundary].max() <= diam[~at_boundary].max()
    # layers shrink geometrically towards the circles
    assert mesh.distance[~mesh.boundary].min() < 1e-20


@pytest.mark.parametrize("h,q", [(0.2, 2.0), (0.15, 1.5), (0.3, 1.0)])
def test_lshape_and_disk_meshes_valid(lshape, h, q):
    assert check_mesh(triangulate(lshape, h, q)) == []
    assert check_mesh(triangulate(build_domain(regular_polygon(32)), h, q)) == []


def test_graded_square_valid(square):
    mesh = triangulate(square, 0.1, 2.0)
    assert check_mesh(mesh) == []
    assert mesh.distance[~mesh.boundary].min() > 0


def test_too_coarse(square, annulus):
    with pytest.raises(ResolutionTooCoarseError):
        triangulate(square, 0.8)
    with pytest.raises(ResolutionTooCoarseError):
        triangulate(annulus, 0.0)


def test_dyadic_count():
    assert dyadic_count(1.0, 0.3) == 4
    assert dyadic_count(1.0, 0.25) == 4
    assert dyadic_count(1.0, 0.24) == 8


def test_halving_ladders_share_nodes(interval, square):
    for dom in (interval, square):
        coarse = triangulate(dom, 0.2, 2.0, depth=1e-8)
        fine = triangulate(dom, 0.1, 2.0, depth=1e-8)
        c = {tuple(np.round(v, 14)) for v in coarse.vertices}
        f = {tuple(np.round(v, 14)) for v in fine.vertices}
        assert c <= f


@pytest.mark.parametrize("h,q", [(0.2, 2.0), (0.3, 1.5)])
def test_mesh_is_deterministic(lshape, annulus, h, q):
    for dom in (lshape, annulus):
        a, b = triangulate(dom, h, q), triangulate(dom, h, q)
        np.testing.assert_array_equal(a.vertices, b.vertices)
        np.testing.assert_array_equal(a.elements, b.elements)
        np.testing.assert_array_equal(a.distance, b.distance)


def test_export_round_trip(lshape, tmp_path):
    mesh = triangulate(lshape, 0.3, 2.0)
    path = tmp_path / "m.txt"
    export_mesh(mesh, path)
    back = read_mesh_export(path)
    np.testing.assert_array_equal(back["xy"], mesh.vertices)
    np.testing.assert_array_equal(back["elements"], mesh.elements)
    np.testing.assert_array_equal(back["distance"], mesh.distance)
    np.testing.assert_array_equal(back["boundary"], mesh.boundary)


def test_deep_interval_offsets_exact():
    mesh = triangulate(build_domain(Interval(1.0)), 1 / 64, 2.0, depth=2.0**-230)
    assert mesh.n_elements == 512
    d = np.sort(mesh.distance[~mesh.boundary])
    assert d[0] == pytest.approx(2.0**-230, rel=1e-12)


def test_annulus_mesh_exact_distance():
    mesh = triangulate(build_domain(Annulus(1.0, 1.5)), 0.1, 2.0)
    assert check_mesh(mesh) == []
