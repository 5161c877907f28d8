"""Lowest-order virtual element operators and global assembly.

Degrees of freedom are vertex values.  On each element the energy
projector onto linear polynomials is computed from boundary integrals of
the traces (exact trapezoid rule, the traces being linear per edge), with
its constant part fixed by matching the boundary mean.  On the enhanced
lowest-order space this projector coincides with the elementwise L2
projector, so a single projection matrix serves the diffusion, advection
and mass terms.

Stabilizations are the dofi-dofi choice: the identity on the projector
kernel, scaled by the diffusion coefficient for the stiffness and by the
element area for the mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import ElementGeometry, element_geometry
from .mesh import PolygonalMesh


class AssemblyError(ValueError):
    """Raised for invalid coefficient data or unusable meshes."""


@dataclass(frozen=True)
class Coefficients:
    """Piecewise-constant diffusion kappa > 0 and constant-per-element
    advection vector theta (divergence-free by constancy)."""

    kappa: float | np.ndarray = 1.0
    theta: tuple | np.ndarray = (0.0, 0.0)

    def kappa_per_element(self, n_elements: int) -> np.ndarray:
        k = np.broadcast_to(np.asarray(self.kappa, dtype=float), (n_elements,)).copy()
        if np.any(k <= 0.0):
            raise AssemblyError("kappa must be positive on every element")
        return k

    def theta_per_element(self, n_elements: int) -> np.ndarray:
        th = np.asarray(self.theta, dtype=float)
        if th.ndim == 1:
            th = np.broadcast_to(th, (n_elements, 2)).copy()
        if th.shape != (n_elements, 2):
            raise AssemblyError(f"theta must be (2,) or ({n_elements}, 2)")
        return th


def local_projector(geom: ElementGeometry):
    """Energy projection onto {1, xi, eta} from vertex values.

    Returns (proj, D): proj is 3 x n mapping dof vectors to coefficients
    in the scaled monomial basis, D is n x 3 evaluating the monomials at
    the vertices.  proj @ D is the identity, so D @ proj projects in dof
    space and reproduces every linear polynomial exactly.
    """
    n = geom.n_vertices
    h = geom.diameter
    lengths = geom.edge_lengths

    D = np.empty((n, 3))
    D[:, 0] = 1.0
    D[:, 1:] = geom.scaled_vertices

    # Edge e_i runs from vertex i to vertex i+1; vertex i touches edges
    # i-1 and i.  The trace of a dof function is linear per edge, so both
    # the boundary mean and the flux integrals reduce to trapezoid sums.
    contrib = 0.5 * (
        lengths[:, None] * geom.edge_normals
        + np.roll(lengths[:, None] * geom.edge_normals, 1, axis=0)
    )  # integral of phi_i times the outward normal over the boundary
    B = np.empty((3, n))
    B[0] = 0.5 * (lengths + np.roll(lengths, 1)) / geom.perimeter
    B[1] = contrib[:, 0] / h
    B[2] = contrib[:, 1] / h

    G = B @ D
    try:
        proj = np.linalg.solve(G, B)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - PD for valid polygons
        raise AssemblyError(f"singular projector system: {exc}") from exc
    return proj, D


@dataclass(frozen=True)
class LocalOperators:
    """Element matrices of the discrete forms, all real.

    stiffness = consistency + stab_a realizes the diffusion form,
    advection the convection form (projected trial gradient against the
    projected test function), mass = consistency + stab_c the L2 form.
    """

    proj: np.ndarray        # (3, n)
    D: np.ndarray           # (n, 3)
    stab_a: np.ndarray      # (n, n) kappa-scaled dofi-dofi term
    stab_c: np.ndarray      # (n, n) area-scaled dofi-dofi term
    stiffness: np.ndarray   # (n, n)
    advection: np.ndarray   # (n, n)
    mass: np.ndarray        # (n, n)

    @property
    def n(self) -> int:
        return self.D.shape[0]


def local_matrices(
    geom: ElementGeometry, kappa: float, theta, proj: np.ndarray, D: np.ndarray
) -> LocalOperators:
    """Local stiffness, advection and mass matrices for one element."""
    h = geom.diameter
    defect = np.eye(geom.n_vertices) - D @ proj

    stab_a = kappa * (defect.T @ defect)
    stiffness = kappa * (proj.T @ geom.monomial_stiffness @ proj) + stab_a

    stab_c = geom.area * (defect.T @ defect)
    mass = proj.T @ geom.monomial_mass @ proj + stab_c

    # Advection pairs the constant theta . grad of the projected trial
    # function with the integral of the projected test function.
    slope = (theta[0] * proj[1] + theta[1] * proj[2]) / h
    mom1 = geom.moments[:3]  # integrals of 1, xi, eta
    advection = np.outer(mom1 @ proj, slope)

    return LocalOperators(
        proj=proj,
        D=D,
        stab_a=stab_a,
        stab_c=stab_c,
        stiffness=stiffness,
        advection=advection,
        mass=mass,
    )


@dataclass(frozen=True)
class GlobalSystem:
    """Assembled pencil over the free (interior) vertex dofs.

    Bh collects diffusion + advection, Ch the L2 form; Ch is symmetric
    positive definite.  Matrix entry (r, c) pairs trial dof c with test
    dof r.  Boundary dofs are eliminated (homogeneous Dirichlet).
    """

    mesh: PolygonalMesh
    coefficients: Coefficients
    Bh: sp.csr_matrix
    Ch: sp.csr_matrix
    free_index: np.ndarray      # (nv,) int, -1 for boundary vertices
    free_vertices: np.ndarray   # (N,) vertex id per free dof
    local_ops: tuple            # LocalOperators per element
    geometries: tuple           # ElementGeometry per element

    @property
    def n_free(self) -> int:
        return len(self.free_vertices)

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Free-dof vector -> full vertex vector with zero boundary values."""
        full = np.zeros(self.mesh.n_vertices, dtype=complex)
        full[self.free_vertices] = x
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full)[self.free_vertices]


def assemble(mesh: PolygonalMesh, coefficients: Coefficients) -> GlobalSystem:
    """Assemble the global pencil by scatter-add of the local matrices."""
    n_el = mesh.n_elements
    kappa = coefficients.kappa_per_element(n_el)
    theta = coefficients.theta_per_element(n_el)

    free_index = -np.ones(mesh.n_vertices, dtype=np.int64)
    free_vertices = mesh.interior_vertices()
    if len(free_vertices) == 0:
        raise AssemblyError("mesh has no interior dofs")
    free_index[free_vertices] = np.arange(len(free_vertices))

    rows, cols, b_vals, c_vals = [], [], [], []
    ops_list = []
    geoms = []
    for e in range(n_el):
        geom = element_geometry(mesh.element_coords(e), label=e)
        proj, D = local_projector(geom)
        ops = local_matrices(geom, kappa[e], theta[e], proj, D)
        geoms.append(geom)
        ops_list.append(ops)

        dofs = free_index[list(mesh.elements[e])]
        keep = dofs >= 0
        if not np.any(keep):
            continue
        idx = np.flatnonzero(keep)
        sub = np.ix_(idx, idx)
        local_b = (ops.stiffness + ops.advection)[sub]
        local_c = ops.mass[sub]
        r = np.repeat(dofs[idx], len(idx))
        c = np.tile(dofs[idx], len(idx))
        rows.append(r)
        cols.append(c)
        b_vals.append(local_b.ravel())
        c_vals.append(local_c.ravel())

    n = len(free_vertices)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    Bh = sp.csr_matrix((np.concatenate(b_vals), (rows, cols)), shape=(n, n))
    Ch = sp.csr_matrix((np.concatenate(c_vals), (rows, cols)), shape=(n, n))
    Bh.sum_duplicates()
    Ch.sum_duplicates()
    return GlobalSystem(
        mesh=mesh,
        coefficients=coefficients,
        Bh=Bh,
        Ch=Ch,
        free_index=free_index,
        free_vertices=free_vertices,
        local_ops=tuple(ops_list),
        geometries=tuple(geoms),
    )
