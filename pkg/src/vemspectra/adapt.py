"""Marking, the uniform/adaptive study loop, and rate fitting."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .eig import SolveOptions, solve_pairs
from .estimator import EstimatorReport, dual_indicators, effectivity, primal_indicators
from .mesh import DomainSpec, PolygonalMesh, build_mesh, refine, uniform_refine
from .vem import Coefficients, assemble

MODES = ("uniform", "adaptive-primal", "adaptive-dual", "adaptive-both")


def mark(report: EstimatorReport, fraction: float = 0.5) -> set:
    """Maximum marking strategy: elements whose indicator reaches the given
    fraction of the largest one.  Never empty (the argmax qualifies)."""
    eta = report.element_eta
    if len(eta) == 0:
        raise ValueError("empty estimator report")
    threshold = fraction * float(eta.max())
    return set(np.flatnonzero(eta >= threshold).tolist())


def fit_rate(Ns, errors) -> float:
    """Least-squares slope of log(error) against log(N)."""
    Ns = np.asarray(Ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(Ns) < 3:
        raise ValueError("need at least 3 points to fit a rate")
    if np.any(Ns <= 0) or np.any(errors <= 0):
        raise ValueError("rate fit needs positive sizes and errors")
    return float(np.polyfit(np.log(Ns), np.log(errors), 1)[0])


def extrapolate_reference(Ns, lambdas) -> float:
    """Reference eigenvalue from fitting lambda(N) = lambda_ref + C*N^-t.

    Nonlinear least squares with the decay exponent free; works for
    monotone sequences of either sign of C.
    """
    from scipy.optimize import curve_fit

    Ns = np.asarray(Ns, dtype=float)
    lams = np.real(np.asarray(lambdas, dtype=complex))
    if len(Ns) < 4:
        raise ValueError("need at least 4 steps to extrapolate a reference value")

    def model(n, ref, c, t):
        return ref + c * n ** (-t)

    delta = lams[-1] - lams[-2]
    guess = (lams[-1] + delta, lams[0] - lams[-1], 1.0)
    try:
        popt, pcov = curve_fit(
            model, Ns, lams, p0=guess, bounds=([-np.inf, -np.inf, 0.05], [np.inf, np.inf, 5.0]),
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise ValueError(f"reference extrapolation failed: {exc}") from exc
    if not np.all(np.isfinite(pcov)):
        raise ValueError(
            f"reference extrapolation ill-conditioned: covariance {np.diag(pcov)}"
        )
    return float(popt[0])


@dataclass(frozen=True)
class StudyConfig:
    """Configuration of one uniform or adaptive eigenvalue study."""

    domain: str = "unit-square"
    family: str = "quad"
    resolution: int = 4
    mode: str = "adaptive-primal"
    fraction: float = 0.5
    eig_index: int = 1          # 1-based position in the sorted spectrum
    num_eigs: int | None = None
    steps: int = 8
    lambda_ref: float | None = None
    kappa: float = 1.0
    theta: tuple = (0.0, 0.0)
    solve: SolveOptions = field(default_factory=lambda: SolveOptions(dense_threshold=400))
    seed: int = 0
    dof_cap: int | None = None
    initial_mesh: PolygonalMesh | None = None
    out_dir: str | None = None

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError("marking fraction must lie in (0, 1]")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.eig_index < 1:
            raise ValueError("eig_index is 1-based")


@dataclass
class StudyRow:
    """One adaptive/uniform step of a study."""

    step: int
    n_free: int
    n_elements: int
    lam: complex
    r_sq: float
    theta_sq: float
    jump_sq: float
    eta_sq: float
    r_sq_dual: float
    theta_sq_dual: float
    jump_sq_dual: float
    eta_sq_dual: float
    eff: float = np.nan
    eff_dual: float = np.nan
    min_h: float = np.nan
    min_h_center: tuple = (np.nan, np.nan)
    wall_time: float = 0.0


@dataclass
class StudyResult:
    config: StudyConfig
    rows: list
    final_mesh: PolygonalMesh
    lambda_ref: float | None = None
    rate: float | None = None

    @property
    def n_free(self) -> np.ndarray:
        return np.array([r.n_free for r in self.rows])

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.rows])

    def errors(self) -> np.ndarray:
        if self.lambda_ref is None:
            raise ValueError("no reference eigenvalue available")
        return np.abs(self.lambdas - self.lambda_ref)


def run_study(config: StudyConfig) -> StudyResult:
    """Loop assemble -> solve -> estimate -> mark -> refine.

    Records one row per step; adaptive modes mark by the primal
    indicator, the dual one, or the union of both marked sets.  A missing
    reference eigenvalue is extrapolated from the recorded sequence when
    at least 4 steps are available.
    """
    if config.initial_mesh is not None:
        mesh = config.initial_mesh
    else:
        mesh = build_mesh(
            DomainSpec(config.domain), config.family, config.resolution, seed=config.seed
        )
    coeffs = Coefficients(kappa=config.kappa, theta=tuple(config.theta))
    num_eigs = config.num_eigs or (config.eig_index + 2)
    opts = SolveOptions(
        k=max(num_eigs, config.eig_index),
        shift=config.solve.shift,
        tol=config.solve.tol,
        max_iterations=config.solve.max_iterations,
        dense_threshold=config.solve.dense_threshold,
        seed=config.seed,
    )

    rows = []
    for step in range(config.steps):
        t0 = time.perf_counter()
        system = assemble(mesh, coeffs)
        if config.dof_cap is not None and system.n_free > config.dof_cap:
            break
        try:
            pairs = solve_pairs(system, opts)
        except Exception as exc:
            raise RuntimeError(f"eigensolve failed at step {step}: {exc}") from exc
        pair = pairs[config.eig_index - 1]
        primal = primal_indicators(mesh, system, pair)
        dual = dual_indicators(mesh, system, pair)

        diams = np.array([g.diameter for g in system.geometries])
        e_min = int(np.argmin(diams))
        center = system.geometries[e_min].centroid
        row = StudyRow(
            step=step,
            n_free=system.n_free,
            n_elements=mesh.n_elements,
            lam=pair.lam,
            r_sq=primal.total_r_sq,
            theta_sq=primal.total_theta_sq,
            jump_sq=primal.total_jump_sq,
            eta_sq=primal.total_eta_sq,
            r_sq_dual=dual.total_r_sq,
            theta_sq_dual=dual.total_theta_sq,
            jump_sq_dual=dual.total_jump_sq,
            eta_sq_dual=dual.total_eta_sq,
            min_h=float(diams[e_min]),
            min_h_center=(float(center[0]), float(center[1])),
            wall_time=time.perf_counter() - t0,
        )
        if rows and row.n_free <= rows[-1].n_free:
            raise RuntimeError(f"free dof count did not grow at step {step}")
        rows.append(row)

        if step < config.steps - 1:
            if config.mode == "uniform":
                mesh = uniform_refine(mesh)
            elif config.mode == "adaptive-both":
                marked = mark(primal, config.fraction) | mark(dual, config.fraction)
                mesh = refine(mesh, marked)
            else:
                report = primal if config.mode == "adaptive-primal" else dual
                mesh = refine(mesh, mark(report, config.fraction))

    if not rows:
        raise RuntimeError("dof cap excludes even the initial mesh")

    lambda_ref = config.lambda_ref
    if lambda_ref is None and len(rows) >= 4:
        try:
            lambda_ref = extrapolate_reference(
                [r.n_free for r in rows], [r.lam for r in rows]
            )
        except ValueError:
            lambda_ref = None

    result = StudyResult(config=config, rows=rows, final_mesh=mesh, lambda_ref=lambda_ref)
    if lambda_ref is not None:
        floor = 1e-14 * max(1.0, abs(lambda_ref))
        for row in rows:
            eta_sq = max(row.eta_sq, floor)
            row.eff = float(abs(lambda_ref - row.lam) / eta_sq)
            row.eff_dual = float(abs(lambda_ref - row.lam) / max(row.eta_sq_dual, floor))
        errs = np.maximum(np.abs(result.lambdas - lambda_ref), floor)
        if len(rows) >= 3:
            result.rate = fit_rate(result.n_free, errs)
    return result
