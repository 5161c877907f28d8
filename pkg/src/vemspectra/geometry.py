"""Exact polygon integrals, sub-triangulation and validation quadrature.

All element-level integrands in the lowest-order scheme are polynomials of
total degree <= 2, so every integral here is computed exactly: moments by
edge-wise divergence-theorem formulas (two-point Gauss per edge, exact for
the cubic edge integrands that arise), quadrature by a degree-2 midpoint
rule on a fan sub-triangulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Gauss-Legendre nodes on [0, 1], exact for polynomials of degree 3.
_GAUSS2_T = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])

# (a, b) exponents of the six scaled monomials 1, xi, eta, xi^2, xi*eta, eta^2.
MONOMIAL_EXPONENTS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


class GeometryError(ValueError):
    """Raised for degenerate or otherwise unusable polygons."""


def _cross2(a, b):
    """z-component of the cross product of stacked 2D vectors."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace signed area; positive for counter-clockwise cycles."""
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(vertices: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon (shoelace formula)."""
    x = vertices[:, 0]
    y = vertices[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = 0.5 * float(np.sum(cross))
    if area == 0.0:
        raise GeometryError("polygon has zero area")
    cx = float(np.sum((x + np.roll(x, -1)) * cross)) / (6.0 * area)
    cy = float(np.sum((y + np.roll(y, -1)) * cross)) / (6.0 * area)
    return np.array([cx, cy])


def is_simple(vertices: np.ndarray, tol: float = 1e-14) -> bool:
    """Whether a polygon is free of proper self-intersections.

    Non-adjacent edges must not cross or overlap; adjacent edges may share
    their common endpoint.  Collinear hanging-node vertices are fine.
    """
    n = len(vertices)
    p = vertices
    q = np.roll(vertices, -1, axis=0)
    scale = max(float(np.abs(vertices).max()), 1.0)
    eps = tol * scale * scale
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = (j == i + 1) or (i == 0 and j == n - 1)
            if adjacent:
                continue
            if _segments_cross(p[i], q[i], p[j], q[j], eps):
                return False
    return True


def _segments_cross(a0, a1, b0, b1, eps) -> bool:
    d1 = _cross2(a1 - a0, b0 - a0)
    d2 = _cross2(a1 - a0, b1 - a0)
    d3 = _cross2(b1 - b0, a0 - b0)
    d4 = _cross2(b1 - b0, a1 - b0)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    # Collinear segments overlapping over positive length.
    if abs(d1) <= eps and abs(d2) <= eps:
        t = a1 - a0
        s0, s1 = np.dot(b0 - a0, t), np.dot(b1 - a0, t)
        lo, hi = min(s0, s1), max(s0, s1)
        nt = float(np.dot(t, t))
        if min(hi, nt) - max(lo, 0.0) > eps * 10:
            return True
    return False


@dataclass(frozen=True)
class ElementGeometry:
    """Exact geometric data of one polygonal element.

    `moments` holds the integrals over the element of the six scaled
    monomials 1, xi, eta, xi^2, xi*eta, eta^2, with xi = (x - x_c)/h and
    eta = (y - y_c)/h.  The first entry equals the area; the first-order
    entries vanish because the scaling is centered at the area centroid.
    """

    vertices: np.ndarray       # (n, 2) CCW cycle
    area: float
    centroid: np.ndarray
    diameter: float
    perimeter: float
    edge_lengths: np.ndarray   # (n,)
    edge_normals: np.ndarray   # (n, 2) outward unit normals
    edge_midpoints: np.ndarray  # (n, 2)
    moments: np.ndarray        # (6,)

    @property
    def n_vertices(self) -> int:
        return len(self.edge_lengths)

    @property
    def scaled_vertices(self) -> np.ndarray:
        """Vertex coordinates in the (xi, eta) frame."""
        return (self.vertices - self.centroid) / self.diameter

    @property
    def monomial_mass(self) -> np.ndarray:
        """3x3 matrix of products of the linear scaled monomials."""
        m = self.moments
        return np.array(
            [
                [m[0], m[1], m[2]],
                [m[1], m[3], m[4]],
                [m[2], m[4], m[5]],
            ]
        )

    @property
    def monomial_stiffness(self) -> np.ndarray:
        """3x3 matrix of gradient products of the scaled monomials."""
        g = self.area / self.diameter**2
        return np.diag([0.0, g, g])


def element_geometry(
    vertices: np.ndarray, label=None, check_simple: bool = False
) -> ElementGeometry:
    """Exact area, centroid, diameter, edge data and degree-2 moments.

    The polygon must be a simple counter-clockwise cycle.  Moments are
    evaluated by divergence-theorem edge integrals, exact for polynomial
    integrands.

    Args:
        vertices: (n, 2) vertex coordinates, CCW.
        label: optional identifier used in error messages.
        check_simple: also run the O(n^2) self-intersection test.
    """
    vertices = np.asarray(vertices, dtype=float)
    name = f"element {label}" if label is not None else "polygon"
    if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 3:
        raise GeometryError(f"{name}: need at least 3 planar vertices")

    area = signed_area(vertices)
    scale2 = float(np.max(np.abs(vertices - vertices.mean(axis=0)))) ** 2
    if area <= 1e-14 * max(scale2, 1e-300):
        raise GeometryError(f"{name}: non-positive area {area:.3e}")
    if check_simple and not is_simple(vertices):
        raise GeometryError(f"{name}: self-intersecting boundary")

    centroid = polygon_centroid(vertices)
    diff = vertices[:, None, :] - vertices[None, :, :]
    diameter = float(np.sqrt(np.max(np.sum(diff * diff, axis=2))))

    nxt = np.roll(vertices, -1, axis=0)
    tangents = nxt - vertices
    edge_lengths = np.hypot(tangents[:, 0], tangents[:, 1])
    if np.any(edge_lengths <= 1e-14 * diameter):
        raise GeometryError(f"{name}: zero-length edge")
    edge_normals = (
        np.stack([tangents[:, 1], -tangents[:, 0]], axis=1) / edge_lengths[:, None]
    )
    edge_midpoints = 0.5 * (vertices + nxt)

    moments = _scaled_moments(vertices, centroid, diameter)
    return ElementGeometry(
        vertices=vertices,
        area=area,
        centroid=centroid,
        diameter=diameter,
        perimeter=float(edge_lengths.sum()),
        edge_lengths=edge_lengths,
        edge_normals=edge_normals,
        edge_midpoints=edge_midpoints,
        moments=moments,
    )


def _scaled_moments(vertices, centroid, diameter) -> np.ndarray:
    """Integrals of the six scaled monomials via int_E xi^a eta^b =
    h^2/(a+1) * contour integral of xi^(a+1) eta^b d(eta)."""
    s = (vertices - centroid) / diameter
    s2 = np.roll(s, -1, axis=0)
    deta = s2[:, 1] - s[:, 1]
    # Gauss points along every edge: shape (n_edges, 2)
    xi = s[:, 0, None] + _GAUSS2_T[None, :] * (s2[:, 0] - s[:, 0])[:, None]
    eta = s[:, 1, None] + _GAUSS2_T[None, :] * deta[:, None]
    h2 = diameter * diameter
    out = np.empty(6)
    for k, (a, b) in enumerate(MONOMIAL_EXPONENTS):
        vals = xi ** (a + 1) * eta**b
        out[k] = h2 / (a + 1) * float(np.sum(deta * 0.5 * vals.sum(axis=1)))
    return out


@dataclass(frozen=True)
class SubTriangulation:
    """Fan triangulation from an interior star point with attached
    degree-2 quadrature (edge-midpoint rule, weights area/3)."""

    triangles: np.ndarray  # (m, 3, 2)
    points: np.ndarray     # (3m, 2)
    weights: np.ndarray    # (3m,)

    @property
    def total_area(self) -> float:
        return float(self.weights.sum())


def subtriangulate(
    vertices: np.ndarray, star_point: np.ndarray | None = None, label=None
) -> SubTriangulation:
    """Fan the polygon into triangles around a star point.

    Defaults to the area centroid.  If the polygon is not star-shaped with
    respect to the requested point, a small set of fallback candidates is
    tried (vertex average and points between the centroid and vertices),
    keeping the one with the largest inscribed distance to the boundary.
    """
    vertices = np.asarray(vertices, dtype=float)
    name = f"element {label}" if label is not None else "polygon"
    centroid = polygon_centroid(vertices)
    if star_point is not None:
        candidates = [np.asarray(star_point, dtype=float)]
    else:
        candidates = [centroid, vertices.mean(axis=0)]
        candidates += [0.5 * (centroid + v) for v in vertices]

    best = None
    best_radius = 0.0
    for cand in candidates:
        radius = _star_radius(vertices, cand)
        if radius > best_radius:
            best, best_radius = cand, radius
    if best is None:
        raise GeometryError(f"{name}: not star-shaped w.r.t. any candidate point")

    n = len(vertices)
    tris = np.empty((n, 3, 2))
    tris[:, 0] = best
    tris[:, 1] = vertices
    tris[:, 2] = np.roll(vertices, -1, axis=0)
    areas = 0.5 * _cross2(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    keep = areas > 0.0
    if star_point is not None and not np.all(
        areas >= -1e-14 * max(areas.max(initial=0.0), 1.0)
    ):
        raise GeometryError(f"{name}: not star-shaped w.r.t. the given point")
    tris, areas = tris[keep], areas[keep]

    mids = 0.5 * (tris + np.roll(tris, -1, axis=1))  # edge midpoints, (m, 3, 2)
    points = mids.reshape(-1, 2)
    weights = np.repeat(areas / 3.0, 3)
    return SubTriangulation(triangles=tris, points=points, weights=weights)


def _star_radius(vertices, point) -> float:
    """Minimal signed distance from `point` to the edge lines; positive
    iff every fan triangle is positively oriented with room to spare."""
    nxt = np.roll(vertices, -1, axis=0)
    t = nxt - vertices
    lengths = np.hypot(t[:, 0], t[:, 1])
    cross = _cross2(t, point - vertices)
    return float(np.min(cross / lengths))


def integrate(subtri: SubTriangulation, f) -> complex:
    """Quadrature sum over the sub-triangulation; exact for degree <= 2.

    `f` maps one point (array of shape (2,)) to a real or complex value.
    """
    values = np.array([f(p) for p in subtri.points])
    return complex(np.sum(subtri.weights * values))
