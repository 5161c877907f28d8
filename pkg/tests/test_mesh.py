import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import vemspectra as vs
from vemspectra.mesh import MeshError, from_elements


def test_build_quad_unit_square():
    m = vs.build_mesh("unit-square", "quad", 2)
    assert m.n_elements == 4
    assert m.n_vertices == 9
    assert m.total_area() == pytest.approx(1.0, rel=1e-15)


def test_build_quad_lshape():
    m = vs.build_mesh("l-shape", "quad", 2)
    assert m.n_elements == 12
    assert m.total_area() == pytest.approx(3.0, rel=1e-14)


def test_build_tria_unit_square():
    m = vs.build_mesh("unit-square", "tria", 1)
    assert m.n_elements == 2
    assert m.areas() == pytest.approx([0.5, 0.5], rel=1e-15)


@pytest.mark.parametrize("domain", ["unit-square", "l-shape", "h-shape"])
@pytest.mark.parametrize("family", ["tria", "quad", "hexa", "voro"])
def test_generated_meshes_pass_invariants(domain, family):
    m = vs.build_mesh(domain, family, 6, seed=1)
    m.validate(domain_area=vs.DomainSpec(domain).area)


def test_build_mesh_deterministic():
    a = vs.build_mesh("h-shape", "voro", 7, seed=11)
    b = vs.build_mesh("h-shape", "voro", 7, seed=11)
    assert np.array_equal(a.vertices, b.vertices)
    assert a.elements == b.elements
    assert np.array_equal(a.edges, b.edges)


def test_build_mesh_rejects_bad_input():
    with pytest.raises(MeshError):
        vs.build_mesh("unit-square", "file", 4)
    with pytest.raises(MeshError):
        vs.build_mesh("unit-square", "nope", 4)
    with pytest.raises(MeshError):
        vs.build_mesh("from-file", "quad", 4)
    with pytest.raises(MeshError):
        vs.build_mesh("unit-square", "quad", 0)


def test_refine_single_square_in_2x2(quad_mesh_2x2):
    m = quad_mesh_2x2
    sizes = {len(c) for c in m.elements}
    assert sizes == {4}
    r = vs.refine(m, {0})
    assert r.n_elements == 3 + 4
    # marked square -> 4 quads; both edge-sharing neighbors gain a midpoint
    lengths = sorted(len(c) for c in r.elements)
    assert lengths.count(5) == 2
    assert lengths.count(4) == 5  # 4 children + the untouched opposite corner
    assert r.total_area() == pytest.approx(1.0, rel=1e-14)
    r.validate(domain_area=1.0)


def test_refine_pentagon_conserves_area():
    ang = np.linspace(0, 2 * np.pi, 5, endpoint=False) + 0.3
    penta = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    m = from_elements(penta, [tuple(range(5))])
    r = vs.refine(m, {0})
    assert r.n_elements == 5
    assert r.total_area() == pytest.approx(m.total_area(), rel=1e-13)


def test_uniform_refine_counts(quad_mesh_2x2):
    assert vs.uniform_refine(quad_mesh_2x2).n_elements == 16
    tri = vs.build_mesh("unit-square", "tria", 1)
    assert vs.uniform_refine(tri).n_elements == 6
    ang = np.linspace(0, 2 * np.pi, 6, endpoint=False)
    hexa = from_elements(np.stack([np.cos(ang), np.sin(ang)], axis=1), [tuple(range(6))])
    assert vs.uniform_refine(hexa).n_elements == 6


def test_refine_empty_marking_returns_input(quad_mesh_2x2):
    assert vs.refine(quad_mesh_2x2, set()) is quad_mesh_2x2


def test_refine_generation_counter(quad_mesh_2x2):
    r1 = vs.refine(quad_mesh_2x2, {0})
    r2 = vs.refine(r1, {1})
    assert (quad_mesh_2x2.generation, r1.generation, r2.generation) == (0, 1, 2)


def test_refine_rejects_bad_ids(quad_mesh_2x2):
    with pytest.raises(MeshError):
        vs.refine(quad_mesh_2x2, {99})


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_refine_random_markings_conserve_area_and_conformity(seed):
    rng = np.random.default_rng(seed)
    domain = ["unit-square", "l-shape", "h-shape"][seed % 3]
    family = ["quad", "hexa", "voro", "tria"][seed % 4]
    mesh = vs.build_mesh(domain, family, 3, seed=seed % 17)
    area = vs.DomainSpec(domain).area
    for _ in range(2):
        n_mark = int(rng.integers(1, mesh.n_elements + 1))
        marked = set(rng.choice(mesh.n_elements, size=n_mark, replace=False).tolist())
        mesh = vs.refine(mesh, marked)
    assert mesh.total_area() == pytest.approx(area, rel=1e-12)
    interior = mesh.edges[mesh.edges[:, 3] >= 0]
    assert np.all(interior[:, 2] != interior[:, 3])
    mesh.validate(domain_area=area)


def test_roundtrip_preserves_mesh(tmp_path):
    m = vs.build_mesh("l-shape", "voro", 4, seed=2)
    path = tmp_path / "m.poly"
    vs.save_mesh(m, path)
    loaded = vs.load_mesh(path)
    assert np.array_equal(loaded.vertices, m.vertices)
    assert loaded.elements == m.elements
    # export again: byte-identical
    path2 = tmp_path / "m2.poly"
    vs.save_mesh(loaded, path2)
    assert path.read_text() == path2.read_text()


def test_load_single_square():
    text = "#poly-mesh 1\n4 1\n0 0\n1 0\n1 1\n0 1\n4 0 1 2 3\n"
    m = vs.load_mesh(io.StringIO(text))
    assert m.n_elements == 1
    assert m.total_area() == pytest.approx(1.0)
    assert np.all(m.boundary_vertices)


def test_load_fixes_clockwise_cycle():
    text = "#poly-mesh 1\n4 1\n0 0\n1 0\n1 1\n0 1\n4 3 2 1 0\n"
    m = vs.load_mesh(io.StringIO(text))
    assert m.total_area() == pytest.approx(1.0)


def test_load_duplicate_vertex_names_element():
    text = "#poly-mesh 1\n4 1\n0 0\n1 0\n1 1\n0 1\n4 0 1 1 3\n"
    with pytest.raises(MeshError, match="element 0"):
        vs.load_mesh(io.StringIO(text))


def test_load_parse_error_carries_line_number():
    text = "#poly-mesh 1\n4 1\n0 0\n1 oops\n1 1\n0 1\n4 0 1 2 3\n"
    with pytest.raises(MeshError, match="line 4"):
        vs.load_mesh(io.StringIO(text))
    with pytest.raises(MeshError, match="line 1"):
        vs.load_mesh(io.StringIO("#not-a-mesh\n"))


def test_from_elements_rejects_nonconforming():
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    # duplicated element: every shared edge has the same orientation twice
    with pytest.raises(MeshError, match="orientation"):
        from_elements(verts, [(0, 1, 2, 3), (0, 1, 2, 3)])
    # three elements on one edge
    verts5 = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, -1]], dtype=float)
    with pytest.raises(MeshError, match="more than two"):
        from_elements(verts5, [(0, 1, 2, 3), (0, 4, 1), (0, 1, 2)])


def test_edge_quality_diagnostic(quad_mesh_2x2):
    assert quad_mesh_2x2.edge_quality() == pytest.approx(1 / np.sqrt(2), rel=1e-12)


def test_hshape_geometry_exact():
    d = vs.DomainSpec("hshape")
    assert d.area == pytest.approx(1.5 * 3 - 0.5 * 1.25 - 0.5 * 1.125, rel=1e-15)
    assert set(d.reentrant_corners()) == {
        (0.5, 1.25), (1.0, 1.25), (0.5, 1.875), (1.0, 1.875)
    }
