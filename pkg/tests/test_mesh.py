import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lbmax.lattice import EQUILATERAL, SQUARE
from lbmax.mesh import (
    MeshError, TriMesh, check_manifold, disjoint_union, embedded_torus_mesh, euler_characteristic, genus,
    glue, glue_strip, icosphere, kissing_spheres_mesh, local_maxima, n_components, read_off, torus_mesh,
    write_off,
)


@pytest.mark.parametrize("s", range(0, 5))
def test_icosphere_counts_and_topology(s):
    m = icosphere(s)
    assert m.n_vertices == 10 * 4**s + 2
    assert m.n_triangles == 20 * 4**s
    assert euler_characteristic(m) == 2 and genus(m) == 0
    np.testing.assert_allclose(np.linalg.norm(m.vertices, axis=1), 1.0, atol=1e-14)


def test_icosphere_level5_vertex_count():
    assert icosphere(5).n_vertices == 10242


def test_icosphere_area_and_orientation():
    m = icosphere(4)
    assert abs(m.total_area() - 4 * math.pi) / (4 * math.pi) < 2e-3
    outward = np.einsum("ij,ij->i", m.face_normals(), m.face_centroids())
    assert np.all(outward > 0)
    big = icosphere(2, radius=3.0, center=(1, 2, 3))
    np.testing.assert_allclose(np.linalg.norm(big.vertices - [1, 2, 3], axis=1), 3.0)


def test_icosphere_rejects_bad_level():
    with pytest.raises(ValueError):
        icosphere(8)
    with pytest.raises(ValueError):
        icosphere(-1)


def test_flat_torus_mesh():
    m = torus_mesh(SQUARE, 8, 8)
    assert (m.n_vertices, m.n_triangles) == (64, 128)
    assert m.total_area() == pytest.approx(1.0, rel=1e-12)
    assert euler_characteristic(m) == 0 and genus(m) == 1
    assert torus_mesh(EQUILATERAL, 8, 8).total_area() == pytest.approx(math.sqrt(3) / 2, rel=1e-12)
    assert np.all(torus_mesh((0.4, 1.3), 9, 11).areas() > 0)


def test_embedded_torus_mesh_is_genus_one():
    m = embedded_torus_mesh(2.0, 24, 12)
    assert genus(m) == 1
    # normalized to unit area; the polyhedral area approaches it from below
    assert 0.95 < m.total_area() < 1.0
    assert embedded_torus_mesh(2.0, 96, 48).total_area() == pytest.approx(1.0, rel=3e-3)


def test_glue_two_spheres():
    a, b = icosphere(3), icosphere(3)
    g = glue(a, b, 0, 5)
    assert g.n_vertices == a.n_vertices + b.n_vertices - 3
    assert g.n_triangles == a.n_triangles + b.n_triangles - 2
    assert euler_characteristic(g) == 2 and genus(g) == 0
    with pytest.raises(MeshError):
        glue(a, b, -1, 0)


def test_glue_torus_and_sphere():
    t = embedded_torus_mesh(2.0, 24, 12)
    face = int(np.argmax(t.face_centroids()[:, 2]))
    g = glue(t, icosphere(2, radius=0.5), face, 0)
    assert euler_characteristic(g) == 0 and genus(g) == 1


def test_kissing_chain_is_sphere():
    m = kissing_spheres_mesh(3, 2)
    assert genus(m) == 0 and n_components(m) == 1


def test_strip_glued_tori_have_genus_one():
    ta = torus_mesh(EQUILATERAL, 12, 12)
    tb = torus_mesh(EQUILATERAL, 12, 12)
    assert genus(glue_strip(ta, tb)) == 1


def test_disjoint_union_components():
    u = disjoint_union(icosphere(1), icosphere(1))
    assert n_components(u) == 2
    assert euler_characteristic(u) == 4
    with pytest.raises(MeshError):
        genus(u)


def test_manifold_checks():
    m = icosphere(0)
    with pytest.raises(MeshError):
        check_manifold(TriMesh(m.vertices, m.triangles[1:]))  # open surface
    flipped = m.triangles.copy()
    flipped[0] = flipped[0, ::-1]
    with pytest.raises(MeshError):
        check_manifold(TriMesh(m.vertices, flipped))
    with pytest.raises(MeshError):
        TriMesh(m.vertices, m.triangles + 100)
    with pytest.raises(MeshError):
        TriMesh(m.vertices[:, :2], m.triangles)


def test_off_round_trip(tmp_path):
    m = icosphere(2)
    path = tmp_path / "sphere.off"
    write_off(m, path)
    back = read_off(path)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.triangles, m.triangles)
    write_off(back, tmp_path / "again.off")
    assert (tmp_path / "again.off").read_text() == path.read_text()


def test_off_errors(tmp_path):
    bad = tmp_path / "bad.off"
    bad.write_text("PLY\n")
    with pytest.raises(MeshError):
        read_off(bad)
    bad.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n4 0 1 2 3\n")
    with pytest.raises(MeshError):
        read_off(bad)
    bad.write_text("OFF\n3 1 0\n0 0 0\n1 0\n")
    with pytest.raises(MeshError):
        read_off(bad)


@settings(max_examples=25)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3))
def test_off_round_trip_is_exact(shift):
    import tempfile
    from pathlib import Path
    m = icosphere(0)
    moved = TriMesh(m.vertices * 1.000000001 + np.array(shift), m.triangles)
    with tempfile.TemporaryDirectory() as d:
        write_off(moved, Path(d) / "m.off")
        np.testing.assert_array_equal(read_off(Path(d) / "m.off").vertices, moved.vertices)


def test_local_maxima():
    m = icosphere(2)
    z = m.vertices[:, 2]
    np.testing.assert_array_equal(local_maxima(m, z), [int(np.argmax(z))])
    two = np.abs(z)
    assert len(local_maxima(m, two)) == 2
    assert len(local_maxima(m, np.ones(m.n_vertices))) == 0
