import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import vemspectra as vs
from vemspectra.geometry import GeometryError, MONOMIAL_EXPONENTS

from conftest import random_convex_polygon


def quadrature_moment(poly, a, b):
    """Independent oracle: degree-2 moments via the fan quadrature."""
    geom = vs.element_geometry(poly)
    sub = vs.subtriangulate(poly)
    c, h = geom.centroid, geom.diameter

    def mono(p):
        return ((p[0] - c[0]) / h) ** a * ((p[1] - c[1]) / h) ** b

    return vs.integrate(sub, mono).real


def test_unit_square_basics(unit_square):
    g = vs.element_geometry(unit_square)
    assert g.area == pytest.approx(1.0, abs=1e-15)
    assert g.centroid == pytest.approx([0.5, 0.5], abs=1e-15)
    assert g.diameter == pytest.approx(np.sqrt(2.0), abs=1e-15)
    assert g.perimeter == pytest.approx(4.0, abs=1e-14)


def test_reference_triangle():
    g = vs.element_geometry(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    assert g.area == pytest.approx(0.5, abs=1e-15)
    assert g.centroid == pytest.approx([1 / 3, 1 / 3], abs=1e-15)


def test_unit_square_second_scaled_moment(unit_square):
    # int ((x-xc)/h)^2 over the square = (1/12) / 2 = 1/24
    g = vs.element_geometry(unit_square)
    assert g.moments[3] == pytest.approx(1.0 / 24.0, rel=1e-14)
    assert g.moments[3] == pytest.approx(quadrature_moment(unit_square, 2, 0), rel=1e-12)


def test_moment_invariants(unit_square):
    g = vs.element_geometry(unit_square)
    assert g.moments[0] == pytest.approx(g.area, rel=1e-14)
    assert abs(g.moments[1]) < 1e-14 and abs(g.moments[2]) < 1e-14


def test_degenerate_polygon_rejected():
    line = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(GeometryError, match="element 7"):
        vs.element_geometry(line, label=7)


def test_self_intersection_rejected():
    bowtie = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(GeometryError):
        vs.element_geometry(bowtie, label="bowtie", check_simple=True)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_moments_match_quadrature_oracle(seed):
    rng = np.random.default_rng(seed)
    poly = random_convex_polygon(rng)
    g = vs.element_geometry(poly)
    for k, (a, b) in enumerate(MONOMIAL_EXPONENTS):
        expected = quadrature_moment(poly, a, b)
        assert g.moments[k] == pytest.approx(expected, rel=1e-12, abs=1e-13 * g.area)


def test_subtriangulate_square(unit_square):
    sub = vs.subtriangulate(unit_square)
    assert len(sub.triangles) == 4
    areas = 0.5 * np.cross(
        sub.triangles[:, 1] - sub.triangles[:, 0], sub.triangles[:, 2] - sub.triangles[:, 0]
    )
    assert areas == pytest.approx([0.25] * 4, rel=1e-14)
    assert sub.total_area == pytest.approx(1.0, rel=1e-14)
    assert np.all(sub.weights > 0)


def test_subtriangulate_regular_hexagon():
    ang = np.linspace(0, 2 * np.pi, 6, endpoint=False)
    hexagon = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    sub = vs.subtriangulate(hexagon)
    areas = 0.5 * np.cross(
        sub.triangles[:, 1] - sub.triangles[:, 0], sub.triangles[:, 2] - sub.triangles[:, 0]
    )
    assert len(areas) == 6
    assert np.ptp(areas) < 1e-14  # congruent fan triangles


def test_subtriangulate_nonconvex_star_shaped():
    # L-shaped hexagonal cycle, star-shaped w.r.t. an interior point of the
    # thick corner but not w.r.t. every candidate.
    poly = np.array(
        [[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float
    )
    sub = vs.subtriangulate(poly, star_point=np.array([0.5, 0.5]))
    areas = 0.5 * np.cross(
        sub.triangles[:, 1] - sub.triangles[:, 0], sub.triangles[:, 2] - sub.triangles[:, 0]
    )
    assert np.all(areas > 0)
    assert sub.total_area == pytest.approx(3.0, rel=1e-13)


def test_subtriangulate_rejects_bad_star_point():
    poly = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float)
    with pytest.raises(GeometryError, match="star"):
        vs.subtriangulate(poly, star_point=np.array([1.9, 1.9]))


def test_integrate_polynomials(unit_square):
    sub = vs.subtriangulate(unit_square)
    assert vs.integrate(sub, lambda p: 1.0) == pytest.approx(1.0, rel=1e-14)
    assert vs.integrate(sub, lambda p: p[0]) == pytest.approx(0.5, rel=1e-14)
    assert vs.integrate(sub, lambda p: p[0] ** 2) == pytest.approx(1.0 / 3.0, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**9))
def test_integrate_linear_and_conjugation(seed):
    rng = np.random.default_rng(seed)
    poly = random_convex_polygon(rng)
    sub = vs.subtriangulate(poly)

    def f(p):
        return (p[0] + 2j * p[1]) ** 2

    def g(p):
        return np.sin(p[0]) + 1j * p[1]

    a, b = 2.0 - 1j, 0.5j
    lhs = vs.integrate(sub, lambda p: a * f(p) + b * g(p))
    rhs = a * vs.integrate(sub, f) + b * vs.integrate(sub, g)
    assert lhs == pytest.approx(rhs, rel=1e-12)
    conj = vs.integrate(sub, lambda p: np.conj(f(p)))
    assert conj == pytest.approx(np.conj(vs.integrate(sub, f)), rel=1e-12)
