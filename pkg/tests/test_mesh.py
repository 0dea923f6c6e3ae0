import numpy as np
import pytest

from qlim.errors import (
    DegenerateFace,
    InconsistentOrientation,
    NonManifoldEdge,
)
from qlim.mesh import SurfacePoint, angle_defect, build_halfedge, topology_info

from meshes import grid_disk, octahedron, square_pyramid_open, surface_mesh, torus_mesh


def test_single_triangle():
    m = build_halfedge(
        np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0)], float), [(0, 1, 2)]
    )
    assert len(m.faces) == 1
    assert m.n_edges == 3
    assert all(m.twin[h] == -1 for h in range(3))
    assert len(m.boundary_loops) == 1
    assert len(m.boundary_loops[0]) == 3


def test_two_triangles_shared_edge():
    m = build_halfedge(
        np.array([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)], float),
        [(0, 1, 2), (0, 2, 3)],
    )
    interior = [e for e in range(m.n_edges) if m.twin[m.edge_halfedge[e]] != -1]
    assert len(interior) == 1
    assert m.n_edges - len(interior) == 4


def test_flipped_triangle_rejected():
    # edge 2-0 traversed in the same direction by both faces
    with pytest.raises(InconsistentOrientation):
        build_halfedge(
            np.array([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)], float),
            [(0, 1, 2), (3, 2, 0)],
        )


def test_nonmanifold_edge_rejected():
    with pytest.raises((NonManifoldEdge, InconsistentOrientation)):
        build_halfedge(
            np.array(
                [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (0, -1, 0)], float
            ),
            [(0, 1, 2), (1, 0, 3), (0, 1, 4)],
        )


def test_degenerate_face_rejected():
    with pytest.raises(DegenerateFace):
        build_halfedge(
            np.array([(0, 0, 0), (1, 0, 0), (2, 0, 0), (0, 5, 0)], float),
            [(0, 1, 2), (0, 2, 3)],
        )


def test_topology_torus():
    t = topology_info(torus_mesh())
    assert (t.genus, t.boundary_count, t.euler) == (1, 0, 0)


def test_topology_torus_two_holes():
    m = surface_mesh(1, 2)
    t = topology_info(m)
    assert (t.genus, t.boundary_count, t.euler) == (1, 2, -2)


def test_topology_disk():
    t = topology_info(grid_disk())
    assert (t.genus, t.boundary_count, t.euler) == (0, 1, 1)


def test_topology_genus2():
    t = topology_info(surface_mesh(2, 0))
    assert (t.genus, t.boundary_count, t.euler) == (2, 0, -2)


def test_angle_defect_flat_interior():
    m = grid_disk()
    v = 1 * 5 + 1  # interior grid vertex
    assert not m.is_boundary_vertex[v]
    assert angle_defect(m, v) == pytest.approx(0.0, abs=1e-12)


def test_angle_defect_pyramid_apex():
    m = square_pyramid_open()
    assert not m.is_boundary_vertex[0]
    assert angle_defect(m, 0) == pytest.approx(2 * np.pi / 3, abs=1e-12)


def test_angle_defect_right_corner():
    m = grid_disk()
    assert m.is_boundary_vertex[0]
    assert angle_defect(m, 0) == pytest.approx(np.pi / 2, abs=1e-12)


@pytest.mark.parametrize("mesh_fn", [octahedron, torus_mesh, lambda: surface_mesh(2, 0)])
def test_gauss_bonnet_closed(mesh_fn):
    m = mesh_fn()
    chi = topology_info(m).euler
    total = sum(angle_defect(m, v) for v in range(len(m.vertices)))
    assert abs(total - 2 * np.pi * chi) < 1e-9 * len(m.vertices)


def test_topology_invariant_under_reindexing():
    m = torus_mesh()
    rng = np.random.default_rng(0)
    perm = rng.permutation(len(m.vertices))
    inv = np.argsort(perm)
    verts = m.vertices[inv]
    faces = perm[m.faces]
    m2 = build_halfedge(verts, faces)
    assert topology_info(m2) == topology_info(m)


def test_surface_point_validation():
    SurfacePoint(0, (0.2, 0.3, 0.5))
    with pytest.raises(ValueError):
        SurfacePoint(0, (0.5, 0.6, 0.5))
    with pytest.raises(ValueError):
        SurfacePoint(0, (-0.1, 0.6, 0.5))
