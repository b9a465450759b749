import io

import numpy as np
import pytest

from dgmg.errors import ConfigError
from dgmg.mesh import (EDGE_INFLOW, EDGE_INTERIOR, EDGE_OUTFLOW,
                       build_initial_mesh, classify_edges, dump_mesh,
                       refine_uniform)


def test_unit_square_initial_counts():
    m = build_initial_mesh("unit_square")
    assert m.num_triangles == 2
    assert m.num_vertices == 4
    assert len(m.boundary_edges) == 4
    assert len(m.interior_edges) == 1
    assert m.h_max == pytest.approx(np.sqrt(2.0), rel=1e-15)


def test_l_shaped_initial_counts():
    m = build_initial_mesh("l_shaped")
    assert m.num_triangles == 6
    assert m.num_vertices == 8
    assert len(m.boundary_edges) == 8
    assert len(m.interior_edges) == 5


def test_unknown_domain():
    with pytest.raises(ConfigError):
        build_initial_mesh("hexagon")


@pytest.mark.parametrize("domain,area", [("unit_square", 1.0), ("l_shaped", 0.75)])
def test_areas_and_refinement(domain, area):
    m = build_initial_mesh(domain)
    nt = m.num_triangles
    for level in range(4):
        assert m.areas.sum() == pytest.approx(area, abs=1e-12)
        assert m.num_triangles == nt * 4 ** level
        assert m.level == level
        if level:
            assert m.h_max == prev_h / 2.0  # exact halving
        prev_h = m.h_max
        m = refine_uniform(m)


def test_refinement_is_nested():
    coarse = build_initial_mesh("l_shaped")
    fine = refine_uniform(coarse)
    # every child vertex lies inside (or on) its parent triangle
    for tf, tp in enumerate(fine.parent_map):
        verts = fine.vertices[fine.triangles[tf]]
        lam = 1.0 / 3.0 + np.einsum(
            "ad,nd->na", coarse.grads[tp], verts - coarse.centroids[tp])
        assert (lam > -1e-13).all() and (lam < 1 + 1e-13).all()


def test_edge_topology_invariants():
    m = refine_uniform(refine_uniform(build_initial_mesh("l_shaped")))
    # conforming: interior edges shared by 2 triangles, boundary by 1
    assert (m.edge_minus[m.interior_edges] >= 0).all()
    assert (m.edge_minus[m.boundary_edges] == -1).all()
    # normals are unit length
    norms = np.linalg.norm(m.edge_normal, axis=1)
    assert np.abs(norms - 1.0).max() < 1e-14
    # plus side is the smaller triangle index (deterministic convention)
    interior = m.interior_edges
    assert (m.edge_plus[interior] < m.edge_minus[interior]).all()
    # interior normal points from the plus centroid toward the minus centroid
    cent = m.centroids
    d = cent[m.edge_minus[interior]] - cent[m.edge_plus[interior]]
    assert (np.einsum("ed,ed->e", m.edge_normal[interior], d) > 0).all()
    # boundary normal points away from the incident triangle
    bnd = m.boundary_edges
    mids = 0.5 * (m.vertices[m.edge_vertices[bnd, 0]]
                  + m.vertices[m.edge_vertices[bnd, 1]])
    d = mids - cent[m.edge_plus[bnd]]
    assert (np.einsum("ed,ed->e", m.edge_normal[bnd], d) > 0).all()


def test_edges_are_lexicographic():
    m = build_initial_mesh("l_shaped")
    keys = [tuple(pair) for pair in m.edge_vertices]
    assert keys == sorted(keys)


def test_classification_unit_square():
    m = classify_edges(build_initial_mesh("unit_square"), [1.0, 0.0])
    kinds = {}
    for e in m.edges:
        v0, v1 = m.vertices[e.endpoints[0]], m.vertices[e.endpoints[1]]
        if v0[0] == 0.0 and v1[0] == 0.0:
            kinds["left"] = e.kind
        elif v0[0] == 1.0 and v1[0] == 1.0:
            kinds["right"] = e.kind
        elif v0[1] == 1.0 and v1[1] == 1.0:
            kinds["top"] = e.kind
        elif v0[1] == 0.0 and v1[1] == 0.0:
            kinds["bottom"] = e.kind
    assert kinds["left"] == "boundary_inflow"
    # zero crosswind flux is not inflow (strict inequality)
    assert kinds["top"] == "boundary_outflow"
    assert kinds["bottom"] == "boundary_outflow"
    assert kinds["right"] == "boundary_outflow"


def test_classification_callable_velocity():
    rotating = lambda pts: np.stack([-pts[:, 1], pts[:, 0]], axis=-1)
    m = classify_edges(build_initial_mesh("unit_square"), rotating)
    assert set(m.edge_kind) <= {EDGE_INTERIOR, EDGE_INFLOW, EDGE_OUTFLOW}
    assert (m.edge_kind[m.interior_edges] == EDGE_INTERIOR).all()


def test_dump_mesh():
    m = classify_edges(build_initial_mesh("unit_square"), [1.0, 0.0])
    buf = io.StringIO()
    dump_mesh(m, buf)
    lines = buf.getvalue().splitlines()
    nv, nt, ne = map(int, lines[0].split())
    assert (nv, nt, ne) == (4, 2, 5)
    assert len(lines) == 1 + nv + nt + ne
    assert lines[1 + nv + nt].split()[-1] in ("interior", "boundary_inflow",
                                              "boundary_outflow")


def test_mesh_is_immutable():
    m = build_initial_mesh("unit_square")
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0
