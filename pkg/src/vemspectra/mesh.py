"""Polygonal meshes: data structure, generators, refinement, text format.

Meshes are immutable after construction; refinement returns a new mesh.
Hanging nodes created by refinement are absorbed as ordinary (collinear)
polygon vertices, so every mesh here is edge-conforming: each interior
edge is shared by exactly two elements with opposite orientation.
"""

from __future__ import annotations

import io as _io
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np

from .geometry import GeometryError, element_geometry, polygon_centroid, signed_area

FAMILIES = ("tria", "quad", "hexa", "voro", "file")

_POOL_TOL = 1e-9  # vertex dedup tolerance, relative to the domain scale


class MeshError(ValueError):
    """Raised for malformed meshes or mesh files."""


@dataclass(frozen=True)
class PolygonalMesh:
    """Conforming polygonal mesh.

    Attributes:
        vertices: (nv, 2) float array, read-only.
        elements: tuple of CCW vertex-index cycles.
        edges: (ne, 4) int array with rows (a, b, left, right); (a, b) is
            the direction in which element `left` traverses the edge and
            `right` is -1 on the boundary.
        boundary_vertices: (nv,) bool array.
        generation: refinement-step counter.
    """

    vertices: np.ndarray
    elements: tuple
    edges: np.ndarray
    boundary_vertices: np.ndarray
    generation: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def element_coords(self, e: int) -> np.ndarray:
        return self.vertices[list(self.elements[e])]

    def areas(self) -> np.ndarray:
        return np.array([signed_area(self.element_coords(e)) for e in range(self.n_elements)])

    def total_area(self) -> float:
        return float(self.areas().sum())

    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_vertices)

    def edge_quality(self) -> float:
        """Diagnostic min over elements of (shortest edge / diameter).

        Repeated refinement near a corner can drive this down; it is
        reported, not enforced.
        """
        worst = np.inf
        for e in range(self.n_elements):
            p = self.element_coords(e)
            t = np.roll(p, -1, axis=0) - p
            lengths = np.hypot(t[:, 0], t[:, 1])
            diff = p[:, None, :] - p[None, :, :]
            diam = np.sqrt(np.max(np.sum(diff * diff, axis=2)))
            worst = min(worst, float(lengths.min() / diam))
        return worst

    def validate(self, domain_area: float | None = None) -> None:
        """Full invariant check: simple positive cycles, conforming edges,
        and (optionally) that element areas tile the expected domain area."""
        for e in range(self.n_elements):
            element_geometry(self.element_coords(e), label=e, check_simple=True)
        interior = self.edges[self.edges[:, 3] >= 0]
        if np.any(interior[:, 2] == interior[:, 3]):
            raise MeshError("edge with identical element on both sides")
        if domain_area is not None:
            total = self.total_area()
            if abs(total - domain_area) > 1e-12 * domain_area:
                raise MeshError(
                    f"element areas sum to {total!r}, expected {domain_area!r}"
                )


def from_elements(vertices, elements, generation: int = 0) -> PolygonalMesh:
    """Build a mesh from vertex coordinates and CCW cycles.

    Checks index ranges, repeated vertices inside a cycle, orientation and
    edge conformity; recomputes boundary flags from edge incidence.
    """
    vertices = np.array(vertices, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertices must be an (n, 2) array")
    nv = len(vertices)
    cycles = []
    for e, cyc in enumerate(elements):
        cyc = tuple(int(i) for i in cyc)
        if len(cyc) < 3:
            raise MeshError(f"element {e}: fewer than 3 vertices")
        if any(i < 0 or i >= nv for i in cyc):
            raise MeshError(f"element {e}: vertex index out of range")
        if len(set(cyc)) != len(cyc):
            raise MeshError(f"element {e}: repeated vertex index in cycle")
        if signed_area(vertices[list(cyc)]) <= 0.0:
            raise MeshError(f"element {e}: non-positive signed area")
        cycles.append(cyc)

    edge_map: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
    for e, cyc in enumerate(cycles):
        for i, a in enumerate(cyc):
            b = cyc[(i + 1) % len(cyc)]
            key = (a, b) if a < b else (b, a)
            edge_map.setdefault(key, []).append((e, a, b))

    rows = []
    boundary = np.zeros(nv, dtype=bool)
    for key, users in sorted(edge_map.items()):
        if len(users) > 2:
            raise MeshError(f"edge {key}: shared by more than two elements")
        if len(users) == 1:
            (e, a, b) = users[0]
            rows.append((a, b, e, -1))
            boundary[a] = boundary[b] = True
        else:
            (e1, a1, b1), (e2, a2, b2) = users
            if a1 == a2:
                raise MeshError(f"edge {key}: same orientation in elements {e1}, {e2}")
            rows.append((a1, b1, e1, e2))

    edges = np.array(rows, dtype=np.int64).reshape(-1, 4)
    vertices.setflags(write=False)
    edges.setflags(write=False)
    boundary.setflags(write=False)
    return PolygonalMesh(
        vertices=vertices,
        elements=tuple(cycles),
        edges=edges,
        boundary_vertices=boundary,
        generation=generation,
    )


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class DomainSpec:
    """One of the built-in rectilinear domains, or a placeholder for meshes
    loaded from file."""

    kind: str

    _ALIASES = {
        "unit-square": "unit-square",
        "square": "unit-square",
        "unit_square": "unit-square",
        "l-shape": "l-shape",
        "lshape": "l-shape",
        "h-shape": "h-shape",
        "hshape": "h-shape",
        "from-file": "from-file",
        "file": "from-file",
    }

    def __post_init__(self):
        kind = self._ALIASES.get(self.kind.lower())
        if kind is None:
            raise MeshError(f"unknown domain kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)

    def rectangles(self):
        """Axis-aligned rectangles (x0, y0, x1, y1) tiling the domain."""
        if self.kind == "unit-square":
            return [(0.0, 0.0, 1.0, 1.0)]
        if self.kind == "l-shape":
            # (-1,1)^2 minus the closed quadrant [0,1]x[-1,0]
            return [
                (-1.0, -1.0, 0.0, 0.0),
                (-1.0, 0.0, 0.0, 1.0),
                (0.0, 0.0, 1.0, 1.0),
            ]
        if self.kind == "h-shape":
            # (0,3/2)x(0,3) minus [1/2,1]x[0,5/4] and [1/2,1]x[15/8,3]
            return [
                (0.0, 0.0, 0.5, 3.0),
                (0.5, 1.25, 1.0, 1.875),
                (1.0, 0.0, 1.5, 3.0),
            ]
        raise MeshError(f"domain {self.kind!r} has no built-in geometry")

    @property
    def area(self) -> float:
        return sum((x1 - x0) * (y1 - y0) for x0, y0, x1, y1 in self.rectangles())

    @property
    def bbox(self):
        rects = self.rectangles()
        return (
            min(r[0] for r in rects),
            min(r[1] for r in rects),
            max(r[2] for r in rects),
            max(r[3] for r in rects),
        )

    def breakpoints(self):
        xs = sorted({v for r in self.rectangles() for v in (r[0], r[2])})
        ys = sorted({v for r in self.rectangles() for v in (r[1], r[3])})
        return xs, ys

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        inside = np.zeros(len(points), dtype=bool)
        for x0, y0, x1, y1 in self.rectangles():
            inside |= (
                (points[:, 0] >= x0)
                & (points[:, 0] <= x1)
                & (points[:, 1] >= y0)
                & (points[:, 1] <= y1)
            )
        return inside

    def reentrant_corners(self):
        if self.kind == "l-shape":
            return [(0.0, 0.0)]
        if self.kind == "h-shape":
            return [(0.5, 1.25), (1.0, 1.25), (0.5, 1.875), (1.0, 1.875)]
        return []


# ---------------------------------------------------------------------------
# generators


def build_mesh(
    domain: DomainSpec | str, family: str, resolution: int, seed: int = 0
) -> PolygonalMesh:
    """Generate a conforming mesh of a built-in domain.

    tria and quad tile a breakpoint-aligned grid; hexa is a structured
    honeycomb whose lattice is aligned with the domain facets and clipped
    to them; voro is a seeded Voronoi diagram (2 Lloyd iterations) clipped
    to the domain.  Identical arguments produce bit-identical meshes.
    """
    if isinstance(domain, str):
        domain = DomainSpec(domain)
    if not (isinstance(resolution, (int, np.integer)) and resolution >= 1):
        raise MeshError(f"resolution must be a positive integer, got {resolution!r}")
    if family not in FAMILIES or family == "file":
        raise MeshError(f"unsupported mesh family {family!r}")
    if domain.kind == "from-file":
        raise MeshError("cannot generate a mesh for a from-file domain; use load_mesh")

    if family in ("quad", "tria"):
        return _build_grid(domain, family, int(resolution))
    if family == "hexa":
        return _build_hexa(domain, int(resolution))
    return _build_voro(domain, int(resolution), seed)


def _segmented_ticks(lo, hi, breaks, step):
    """Ticks covering [lo, hi], hitting every breakpoint exactly, with each
    stretch subdivided uniformly at spacing as close to `step` as possible."""
    knots = [lo] + [b for b in breaks if lo < b < hi] + [hi]
    ticks = []
    for a, b in zip(knots[:-1], knots[1:]):
        n = max(1, round((b - a) / step))
        ticks.extend(a + (b - a) * k / n for k in range(n))
    ticks.append(hi)
    return np.array(ticks)


def _build_grid(domain, family, resolution):
    x0, y0, x1, y1 = domain.bbox
    bx, by = domain.breakpoints()
    step = 1.0 / resolution
    xs = _segmented_ticks(x0, x1, bx, step)
    ys = _segmented_ticks(y0, y1, by, step)

    index: dict[tuple[int, int], int] = {}
    coords: list[tuple[float, float]] = []

    def vid(i, j):
        k = index.get((i, j))
        if k is None:
            k = len(coords)
            coords.append((xs[i], ys[j]))
            index[(i, j)] = k
        return k

    centers = []
    cells = []
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            centers.append((0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])))
            cells.append((i, j))
    inside = domain.contains(np.array(centers))

    elements = []
    for (i, j), ok in zip(cells, inside):
        if not ok:
            continue
        ll, lr, ur, ul = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
        if family == "quad":
            elements.append((ll, lr, ur, ul))
        else:
            elements.append((ll, lr, ur))
            elements.append((ll, ur, ul))
    return from_elements(np.array(coords), elements)


class _VertexPool:
    """Deduplicates nearly-coincident points via a quantized grid."""

    def __init__(self, tol: float):
        self.tol = tol
        self.coords: list[np.ndarray] = []
        self.grid: dict[tuple[int, int], list[int]] = {}

    def insert(self, p) -> int:
        kx = round(p[0] / self.tol)
        ky = round(p[1] / self.tol)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for idx in self.grid.get((kx + dx, ky + dy), ()):
                    q = self.coords[idx]
                    if abs(q[0] - p[0]) <= self.tol and abs(q[1] - p[1]) <= self.tol:
                        return idx
        idx = len(self.coords)
        self.coords.append(np.array([p[0], p[1]]))
        self.grid.setdefault((kx, ky), []).append(idx)
        return idx


def _clip_half(pts, axis, bound, keep_ge):
    out = []
    n = len(pts)
    for i in range(n):
        cur = pts[i]
        nxt = pts[(i + 1) % n]
        cin = cur[axis] >= bound if keep_ge else cur[axis] <= bound
        nin = nxt[axis] >= bound if keep_ge else nxt[axis] <= bound
        if cin:
            out.append(cur)
            if not nin:
                out.append(_cut(cur, nxt, axis, bound))
        elif nin:
            out.append(_cut(cur, nxt, axis, bound))
    return out


def _cut(cur, nxt, axis, bound):
    t = (bound - cur[axis]) / (nxt[axis] - cur[axis])
    p = [0.0, 0.0]
    p[axis] = bound
    p[1 - axis] = cur[1 - axis] + t * (nxt[1 - axis] - cur[1 - axis])
    return (p[0], p[1])


def _clip_to_rect(poly, rect):
    x0, y0, x1, y1 = rect
    pts = [tuple(p) for p in poly]
    for axis, bound, keep_ge in (
        (0, x0, True),
        (0, x1, False),
        (1, y0, True),
        (1, y1, False),
    ):
        if not pts:
            return []
        pts = _clip_half(pts, axis, bound, keep_ge)
    return pts


def _register_pieces(polys, domain, pool, min_area):
    """Clip each polygon against the domain rectangles and emit pooled,
    deduplicated vertex cycles for every piece of positive area."""
    elements = []
    rects = domain.rectangles()
    for poly in polys:
        for rect in rects:
            piece = _clip_to_rect(poly, rect)
            if len(piece) < 3:
                continue
            cyc = [pool.insert(p) for p in piece]
            dedup = [v for k, v in enumerate(cyc) if v != cyc[(k - 1) % len(cyc)]]
            if len(dedup) < 3 or len(set(dedup)) != len(dedup):
                continue
            pts = np.array([pool.coords[v] for v in dedup])
            if signed_area(pts) <= min_area:
                continue
            elements.append(tuple(dedup))
    return elements


def _fraction_gcd(values):
    fracs = [Fraction(v).limit_denominator(10**9) for v in values]
    den = 1
    for f in fracs:
        den = den * f.denominator // gcd(den, f.denominator)
    nums = [f.numerator * (den // f.denominator) for f in fracs]
    g = 0
    for n in nums:
        g = gcd(g, n)
    return Fraction(g, den)


def _build_hexa(domain, resolution):
    """Structured honeycomb aligned with the domain facets.

    Hexagon centers form a lattice whose column pitch divides every
    x-breakpoint gap and whose half row pitch divides every y-breakpoint
    gap, so domain lines cut hexagons only through centers or along
    existing edges and never create slivers.
    """
    x0, y0, x1, y1 = domain.bbox
    bx, by = domain.breakpoints()
    qx = _fraction_gcd([b - a for a, b in zip(bx[:-1], bx[1:])])
    qy = _fraction_gcd([b - a for a, b in zip(by[:-1], by[1:])])

    px = float(qx) / max(1, round(qx * resolution))
    a = 2.0 * px / 3.0
    nb = max(1, round(float(qy) / (0.866 * a)))
    b = float(qy) / nb

    scale = max(x1 - x0, y1 - y0)
    pool = _VertexPool(_POOL_TOL * scale)
    polys = []
    ncol = int(np.ceil((x1 - x0) / px)) + 1
    nrow = int(np.ceil((y1 - y0) / (2 * b))) + 1
    for i in range(-1, ncol + 1):
        cx = x0 + i * px
        off = b if i % 2 else 0.0
        for j in range(-1, nrow + 1):
            cy = y0 + off + j * 2 * b
            polys.append(
                [
                    (cx + a, cy),
                    (cx + a / 2, cy + b),
                    (cx - a / 2, cy + b),
                    (cx - a, cy),
                    (cx - a / 2, cy - b),
                    (cx + a / 2, cy - b),
                ]
            )
    elements = _register_pieces(polys, domain, pool, min_area=(pool.tol * 10) ** 2)
    return from_elements(np.array(pool.coords), elements)


def _build_voro(domain, resolution, seed):
    """Clipped Voronoi mesh from seeded random points, 2 Lloyd iterations."""
    from scipy.spatial import Voronoi

    x0, y0, x1, y1 = domain.bbox
    target = max(4, round(domain.area * resolution * resolution))
    rng = np.random.default_rng(seed)
    pts = np.empty((0, 2))
    while len(pts) < target:
        cand = rng.uniform((x0, y0), (x1, y1), size=(4 * target, 2))
        pts = np.vstack([pts, cand[domain.contains(cand)]])
    pts = pts[:target]

    center = np.array([(x0 + x1) / 2, (y0 + y1) / 2])
    radius = 3.0 * max(x1 - x0, y1 - y0)
    angles = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
    ring = center + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    bx, by = domain.breakpoints()
    snap_tol = 0.05 / resolution

    def conditioned_vertices(vor):
        """Merge near-coincident Voronoi vertices and snap the ones close
        to a domain line onto it, so clipping cannot create sliver edges.
        Applied to the shared vertex array, so adjacent cells stay
        conforming."""
        coords = vor.vertices.copy()
        for axis, lines in ((0, bx), (1, by)):
            for line in lines:
                near = np.abs(coords[:, axis] - line) < snap_tol
                coords[near, axis] = line
        pool = _VertexPool(snap_tol)
        canon = np.array([pool.coords[pool.insert(p)] for p in coords])
        return canon

    def cell_polys(points):
        """One polygon (or None, for cells crushed by merging) per point."""
        vor = Voronoi(np.vstack([points, ring]))
        coords = conditioned_vertices(vor)
        polys = []
        for i in range(len(points)):
            region = vor.regions[vor.point_region[i]]
            if -1 in region or len(region) < 3:
                raise MeshError("unbounded Voronoi cell; ring too small")
            verts = coords[region]
            keep = [k for k in range(len(verts)) if not np.array_equal(verts[k], verts[k - 1])]
            verts = verts[keep]
            if len(verts) < 3:
                polys.append(None)
                continue
            order = np.argsort(np.arctan2(verts[:, 1] - points[i, 1], verts[:, 0] - points[i, 0]))
            verts = verts[order]
            if signed_area(verts) < 0:
                verts = verts[::-1]
            polys.append(verts)
        return polys

    rects = domain.rectangles()
    for _ in range(2):  # Lloyd smoothing on the clipped cells
        moved = pts.copy()
        for i, poly in enumerate(cell_polys(pts)):
            if poly is None:
                continue
            area_sum = 0.0
            weighted = np.zeros(2)
            for rect in rects:
                piece = _clip_to_rect(poly, rect)
                if len(piece) < 3:
                    continue
                piece = np.array(piece)
                area = signed_area(piece)
                if area <= 0.0:
                    continue
                area_sum += area
                weighted += area * polygon_centroid(piece)
            if area_sum > 0.0:
                cand = weighted / area_sum
                if domain.contains(cand[None, :])[0]:
                    moved[i] = cand
        pts = moved

    scale = max(x1 - x0, y1 - y0)
    pool = _VertexPool(_POOL_TOL * scale)
    polys = [p for p in cell_polys(pts) if p is not None]
    elements = _register_pieces(polys, domain, pool, min_area=(pool.tol * 10) ** 2)
    return from_elements(np.array(pool.coords), elements)


# ---------------------------------------------------------------------------
# refinement


def refine(mesh: PolygonalMesh, marked) -> PolygonalMesh:
    """Split every marked n-gon into n quadrilaterals joining its barycenter
    to the edge midpoints; unmarked neighbors absorb the new midpoints as
    collinear vertices, keeping the mesh conforming."""
    ids = {int(e) for e in marked}
    if not ids:
        return mesh
    bad = [e for e in ids if e < 0 or e >= mesh.n_elements]
    if bad:
        raise MeshError(f"marked ids out of range: {sorted(bad)[:5]}")

    V = mesh.vertices
    new_coords: list[np.ndarray] = []
    midpoint: dict[tuple[int, int], int] = {}

    def new_vertex(p):
        new_coords.append(p)
        return len(V) + len(new_coords) - 1

    def mid(u, v):
        key = (u, v) if u < v else (v, u)
        idx = midpoint.get(key)
        if idx is None:
            idx = new_vertex(0.5 * (V[u] + V[v]))
            midpoint[key] = idx
        return idx

    children = []
    for e in sorted(ids):
        cyc = mesh.elements[e]
        k = len(cyc)
        bary = new_vertex(polygon_centroid(V[list(cyc)]))
        mids = [mid(cyc[i], cyc[(i + 1) % k]) for i in range(k)]
        for i in range(k):
            children.append((cyc[i], mids[i], bary, mids[i - 1]))

    elements = []
    for e, cyc in enumerate(mesh.elements):
        if e in ids:
            continue
        out = []
        k = len(cyc)
        for i, u in enumerate(cyc):
            out.append(u)
            v = cyc[(i + 1) % k]
            key = (u, v) if u < v else (v, u)
            if key in midpoint:
                out.append(midpoint[key])
        elements.append(tuple(out))
    elements.extend(children)

    verts = np.vstack([V, np.array(new_coords)]) if new_coords else V.copy()
    return from_elements(verts, elements, generation=mesh.generation + 1)


def uniform_refine(mesh: PolygonalMesh) -> PolygonalMesh:
    """Refine every element."""
    return refine(mesh, range(mesh.n_elements))


# ---------------------------------------------------------------------------
# mesh text format


def save_mesh(mesh: PolygonalMesh, target) -> None:
    """Write the `#poly-mesh 1` text format; vertex order is preserved."""
    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    stream = open(target, "w") if own else target
    try:
        stream.write("#poly-mesh 1\n")
        stream.write(f"{mesh.n_vertices} {mesh.n_elements}\n")
        for x, y in mesh.vertices:
            stream.write(f"{float(x)!r} {float(y)!r}\n")
        for cyc in mesh.elements:
            stream.write(str(len(cyc)) + " " + " ".join(str(i) for i in cyc) + "\n")
    finally:
        if own:
            stream.close()


def load_mesh(source) -> PolygonalMesh:
    """Read the `#poly-mesh 1` text format.

    Clockwise cycles are re-oriented; boundary flags come from edge
    incidence.  Parse errors carry the offending line number, invariant
    violations the element id.
    """
    own = isinstance(source, (str, bytes)) or hasattr(source, "__fspath__")
    if own:
        stream = open(source, "r")
    elif isinstance(source, str):  # pragma: no cover - str handled above
        stream = _io.StringIO(source)
    else:
        stream = source
    try:
        lines = stream.read().splitlines()
    finally:
        if own:
            stream.close()

    def fail(lineno, msg):
        raise MeshError(f"line {lineno}: {msg}")

    if not lines or lines[0].strip() != "#poly-mesh 1":
        fail(1, "expected header '#poly-mesh 1'")
    if len(lines) < 2:
        fail(2, "missing vertex/element counts")
    try:
        nv, ne = (int(tok) for tok in lines[1].split())
    except ValueError:
        fail(2, f"expected 'V E' counts, got {lines[1]!r}")
    if len(lines) < 2 + nv + ne:
        fail(len(lines) + 1, f"expected {2 + nv + ne} lines, file has {len(lines)}")

    verts = np.empty((nv, 2))
    for k in range(nv):
        lineno = 3 + k
        toks = lines[2 + k].split()
        if len(toks) != 2:
            fail(lineno, f"expected 'x y', got {lines[2 + k]!r}")
        try:
            verts[k] = [float(toks[0]), float(toks[1])]
        except ValueError:
            fail(lineno, f"bad coordinate in {lines[2 + k]!r}")

    cycles = []
    for k in range(ne):
        lineno = 3 + nv + k
        toks = lines[2 + nv + k].split()
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            fail(lineno, f"bad vertex index in {lines[2 + nv + k]!r}")
        if not vals or len(vals) != vals[0] + 1:
            fail(lineno, f"expected 'n i1 ... in', got {lines[2 + nv + k]!r}")
        cyc = vals[1:]
        if any(i < 0 or i >= nv for i in cyc):
            raise MeshError(f"element {k}: vertex index out of range (line {lineno})")
        if signed_area(verts[cyc]) < 0.0:
            cyc = cyc[::-1]
        cycles.append(tuple(cyc))

    mesh = from_elements(verts, cycles)
    for e in range(mesh.n_elements):
        try:
            element_geometry(mesh.element_coords(e), label=e, check_simple=True)
        except GeometryError as exc:
            raise MeshError(str(exc)) from exc
    return mesh
