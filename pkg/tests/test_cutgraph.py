import numpy as np
import pytest

from qlim.cutgraph import (
    build_cutting_graph,
    cut_mesh,
    make_cut_graph,
    validate_cutting_graph,
)
from qlim.errors import SingularityOnBoundary
from qlim.mesh import build_halfedge, topology_info

from meshes import grid_disk, surface_mesh, torus_mesh


def cylinder_mesh(nu=8, nv=4):
    """Open grid cylinder (annulus), wrapped in u only."""
    verts = []
    for j in range(nv + 1):
        for i in range(nu):
            a = 2 * np.pi * i / nu
            verts.append((np.cos(a), np.sin(a), float(j)))
    faces = []
    vid = lambda i, j: j * nu + (i % nu)
    for j in range(nv):
        for i in range(nu):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return build_halfedge(np.array(verts, float), faces)


def assert_simple(mesh, graph, sing=()):
    rep = validate_cutting_graph(mesh, graph, sing)
    assert rep["all"], rep
    comp = cut_mesh(mesh, graph)
    info = topology_info(comp.mesh)
    assert info.euler == 1 and info.boundary_count == 1


def test_disk_no_singularities_empty_graph():
    m = grid_disk()
    g = build_cutting_graph(m, [])
    assert not g.cut_edges
    assert_simple(m, g)


def test_torus_generators():
    m = torus_mesh()
    g = build_cutting_graph(m, [])
    assert g.cut_edges
    assert_simple(m, g)


def test_annulus_with_singularities():
    m = cylinder_mesh()
    interior = [v for v in range(len(m.vertices)) if not m.is_boundary_vertex[v]]
    sing = [interior[0], interior[7]]
    g = build_cutting_graph(m, sing)
    assert_simple(m, g, sing)
    # both singularities are degree-1 endpoints and in the node set
    for s in sing:
        assert s in g.nodes


def test_boundary_singularity_rejected():
    m = grid_disk()
    assert m.is_boundary_vertex[0]
    with pytest.raises(SingularityOnBoundary):
        build_cutting_graph(m, [0])


def test_torus_empty_graph_not_simply_connected():
    m = torus_mesh()
    g = make_cut_graph(m, frozenset())
    rep = validate_cutting_graph(m, g, [])
    assert not rep["complement_simply_connected"]


def test_missing_singularity_path_detected():
    m = cylinder_mesh()
    interior = [v for v in range(len(m.vertices)) if not m.is_boundary_vertex[v]]
    sing = [interior[0]]
    g = build_cutting_graph(m, sing)
    # drop the dead-end arc that reaches the singularity
    dead_end = None
    for arc in g.arcs:
        ends = {m.src(arc.halfedges[0]), m.dst(arc.halfedges[-1])}
        if sing[0] in ends:
            dead_end = arc
    assert dead_end is not None
    pruned = frozenset(g.cut_edges) - set(dead_end.edge_ids(m))
    g2 = make_cut_graph(m, pruned)
    rep = validate_cutting_graph(m, g2, sing)
    assert not rep["interior_singularities_are_endpoints"]


def test_cut_mesh_identity_on_empty_graph():
    m = grid_disk()
    comp = cut_mesh(m, frozenset())
    assert np.array_equal(comp.mesh.faces, m.faces)
    assert np.array_equal(comp.vertex_map, np.arange(len(m.vertices)))


def test_cut_mesh_arc_duplicates_middle_vertex():
    m = grid_disk(4, 4)
    # horizontal interior arc of 2 edges through vertex (2,2)
    vid = lambda i, j: j * 5 + i
    e1 = m.edge_id[m.halfedge_between(vid(1, 2), vid(2, 2))]
    e2 = m.edge_id[m.halfedge_between(vid(2, 2), vid(3, 2))]
    comp = cut_mesh(m, frozenset({int(e1), int(e2)}))
    assert len(comp.vertex_copies[vid(2, 2)]) == 2
    assert len(comp.vertex_copies[vid(1, 2)]) == 1


def test_cut_mesh_junction_three_copies():
    m = grid_disk(4, 4)
    vid = lambda i, j: j * 5 + i
    c = vid(2, 2)
    es = [
        int(m.edge_id[m.halfedge_between(c, vid(1, 2))]),
        int(m.edge_id[m.halfedge_between(c, vid(3, 2))]),
        int(m.edge_id[m.halfedge_between(c, vid(2, 3))]),
    ]
    comp = cut_mesh(m, frozenset(es))
    assert len(comp.vertex_copies[c]) == 3


def test_reglue_recovers_connectivity():
    m = torus_mesh()
    g = build_cutting_graph(m, [])
    comp = cut_mesh(m, g)
    glued = comp.vertex_map[comp.mesh.faces]
    assert np.array_equal(glued, m.faces)
    m2 = build_halfedge(m.vertices, glued)
    assert np.array_equal(m2.twin, m.twin)


def test_euler_bookkeeping_tree_graph():
    m = grid_disk(6, 6)
    interior = [v for v in range(len(m.vertices)) if not m.is_boundary_vertex[v]]
    sing = [interior[0], interior[10]]
    g = build_cutting_graph(m, sing)
    comp = cut_mesh(m, g)
    extra = sum(len(c) - 1 for c in comp.vertex_copies.values())
    # tree-like graph: copies added = cut edges - components + boundary
    # touches (a graph vertex on the surface boundary gains one extra split)
    n_components = _graph_components(m, g.cut_edges)
    graph_vertices = {int(v) for e in g.cut_edges for v in m.edges[e]}
    touches = sum(1 for v in graph_vertices if m.is_boundary_vertex[v])
    assert extra == len(g.cut_edges) - n_components + touches


def _graph_components(mesh, cut_edges):
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in cut_edges:
        u, v = (int(x) for x in mesh.edges[e])
        parent.setdefault(u, u)
        parent.setdefault(v, v)
        parent[find(u)] = find(v)
    return len({find(x) for x in parent})


@pytest.mark.parametrize("genus,k", [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0)])
def test_build_on_various_topologies(genus, k):
    m = surface_mesh(genus, k)
    g = build_cutting_graph(m, [])
    assert_simple(m, g)
