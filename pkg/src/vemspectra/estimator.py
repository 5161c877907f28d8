"""Residual error indicators for the primal and dual eigenpairs.

Each element contributes three computable pieces:

* a stabilization energy of the projection defect (the part of the
  discrete solution invisible to the polynomial projection),
* a scaled volumetric residual of the projected eigenfunction, where the
  diffusion term drops out because the projection is linear and the
  diffusion coefficient is constant per element,
* conormal-derivative jumps of the projected solution across interior
  edges (zero on boundary edges), weighted by the diameter of the element
  whose indicator is being accumulated, so a shared edge counts once per
  adjacent element.

The dual indicators use the dual vector with the advection sign flipped
and the eigenvalue conjugated; all terms are moduli, hence invariant
under unit-phase changes of the eigenvector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eig import EigenPair
from .vem import GlobalSystem


class EstimatorError(ValueError):
    """Raised for unusable estimator input."""


@dataclass(frozen=True)
class EstimatorReport:
    """Per-element indicator pieces and their global aggregates."""

    theta_sq: np.ndarray  # stabilization energies
    r_sq: np.ndarray      # h^2-weighted volumetric residuals
    jump_sq: np.ndarray   # per-element sums of h_E ||J||^2 over its edges
    dual: bool = False

    @property
    def eta_sq(self) -> np.ndarray:
        return self.theta_sq + self.r_sq + self.jump_sq

    @property
    def element_eta(self) -> np.ndarray:
        return np.sqrt(self.eta_sq)

    @property
    def total_theta_sq(self) -> float:
        return float(self.theta_sq.sum())

    @property
    def total_r_sq(self) -> float:
        return float(self.r_sq.sum())

    @property
    def total_jump_sq(self) -> float:
        return float(self.jump_sq.sum())

    @property
    def total_eta_sq(self) -> float:
        return float(self.eta_sq.sum())

    @property
    def eta(self) -> float:
        return float(np.sqrt(self.total_eta_sq))


def _check_normalized(system: GlobalSystem, vec: np.ndarray, what: str):
    norm_sq = np.vdot(vec, system.Ch @ vec)
    if abs(norm_sq - 1.0) > 1e-6:
        raise EstimatorError(
            f"{what} vector must be L2-normalized (Ch-norm^2 = {norm_sq:.6g}); "
            "run normalize_biorthogonal first"
        )


def primal_indicators(mesh, system: GlobalSystem, pair: EigenPair) -> EstimatorReport:
    """Indicators of the right eigenvector; requires Ch-normalization."""
    _check_normalized(system, pair.right, "primal")
    values = system.expand(pair.right)
    return indicators_from_vertex_values(mesh, system, values, pair.lam, dual=False)


def dual_indicators(mesh, system: GlobalSystem, pair: EigenPair) -> EstimatorReport:
    """Indicators of the left eigenvector (conjugated dual solution,
    advection sign flipped)."""
    left = np.asarray(pair.left, dtype=complex)
    norm = np.sqrt(abs(np.vdot(left, system.Ch @ left)))
    if norm == 0.0:
        raise EstimatorError("dual vector vanishes")
    values = system.expand(left / norm)
    return indicators_from_vertex_values(mesh, system, values, pair.lam, dual=True)


def indicators_from_vertex_values(
    mesh, system: GlobalSystem, values: np.ndarray, lam: complex, dual: bool = False
) -> EstimatorReport:
    """Core indicator evaluation on a full vertex-value vector.

    `values` holds one complex value per mesh vertex (boundary included).
    The primal volumetric residual is -theta.grad(projection) + lam *
    projection; the dual one flips the advection sign and conjugates lam.
    """
    n_el = mesh.n_elements
    theta = system.coefficients.theta_per_element(n_el)
    kappa = system.coefficients.kappa_per_element(n_el)
    sign = 1.0 if dual else -1.0
    lam_eff = np.conj(lam) if dual else lam

    theta_sq = np.empty(n_el)
    r_sq = np.empty(n_el)
    grads = np.empty((n_el, 2), dtype=complex)
    diams = np.empty(n_el)

    for e in range(n_el):
        ops = system.local_ops[e]
        geom = system.geometries[e]
        u = values[list(mesh.elements[e])]
        coeff = ops.proj @ u
        defect = u - ops.D @ coeff
        theta_sq[e] = kappa[e] * float(np.real(np.vdot(defect, defect)))

        h = geom.diameter
        grad = coeff[1:] / h
        grads[e] = grad
        diams[e] = h
        upsilon = lam_eff * coeff
        upsilon[0] += sign * (theta[e, 0] * grad[0] + theta[e, 1] * grad[1])
        r_sq[e] = h * h * float(np.real(np.vdot(upsilon, geom.monomial_mass @ upsilon)))

    jump_sq = np.zeros(n_el)
    interior = mesh.edges[mesh.edges[:, 3] >= 0]
    if len(interior):
        va = mesh.vertices[interior[:, 0]]
        vb = mesh.vertices[interior[:, 1]]
        tang = vb - va
        lengths = np.hypot(tang[:, 0], tang[:, 1])
        normals = np.stack([tang[:, 1], -tang[:, 0]], axis=1) / lengths[:, None]
        left = interior[:, 2]
        right = interior[:, 3]
        flux_left = kappa[left] * (
            grads[left, 0] * normals[:, 0] + grads[left, 1] * normals[:, 1]
        )
        flux_right = kappa[right] * (
            grads[right, 0] * normals[:, 0] + grads[right, 1] * normals[:, 1]
        )
        jump = 0.5 * (flux_left - flux_right)  # opposite outward normals
        norm_sq = np.abs(jump) ** 2 * lengths
        np.add.at(jump_sq, left, diams[left] * norm_sq)
        np.add.at(jump_sq, right, diams[right] * norm_sq)

    return EstimatorReport(theta_sq=theta_sq, r_sq=r_sq, jump_sq=jump_sq, dual=dual)


def effectivity(lambda_ref: complex, lambda_h: complex, eta: float) -> float:
    """Eigenvalue error divided by the squared estimator."""
    if not eta > 0.0:
        raise EstimatorError("effectivity needs a positive estimator value")
    return float(abs(lambda_ref - lambda_h) / eta**2)
