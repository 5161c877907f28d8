"""Generalized non-symmetric eigensolver for the assembled pencil.

Solves Bh x = lambda Ch x for a few eigenvalues nearest a shift, together
with left (dual) eigenvectors y satisfying Bh^T y = conj(lambda) Ch y.
Small systems go through a dense two-sided solve; larger ones through
shift-and-invert Arnoldi applied to the pencil and to its transpose, with
primal/dual pairs matched by eigenvalue conjugation.  Every returned pair
is polished by inverse iteration until the relative residuals meet the
requested tolerance, then scaled to the biorthonormal convention
right^H Ch right = 1, left^H Ch right = 1 with the largest entry of the
right vector made real positive.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class EigenSolveError(RuntimeError):
    """Raised when the eigensolver cannot meet its tolerance."""


@dataclass(frozen=True)
class SolveOptions:
    k: int = 1
    shift: complex = 0.0
    tol: float = 1e-10
    max_iterations: int = 2000
    dense_threshold: int = 3000
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")


@dataclass
class EigenPair:
    """One eigenpair of the pencil with its matched dual vector.

    `paired` is False when no left eigenvalue matched conj(lambda) within
    the pairing tolerance (near-defective case).
    """

    lam: complex
    right: np.ndarray
    left: np.ndarray
    residual_right: float = np.nan
    residual_left: float = np.nan
    paired: bool = True


def _residual(A, C, lam, x) -> float:
    r = A @ x - lam * (C @ x)
    denom = np.linalg.norm(C @ x)
    return float(np.linalg.norm(r) / denom) if denom > 0 else np.inf


def _polish(A, C, lam, x, tol, sweeps=3):
    """Inverse-iteration refinement of one approximate eigenpair."""
    best_lam, best_x = lam, x / np.linalg.norm(x)
    best_res = _residual(A, C, best_lam, best_x)
    for _ in range(sweeps):
        if best_res <= tol:
            break
        shift = best_lam * (1.0 + 1e-11) + 1e-13
        M = (A - shift * C).tocsc() if sp.issparse(A) else A - shift * C
        try:
            if sp.issparse(M):
                z = spla.splu(M).solve(C @ best_x)
            else:
                z = sla.solve(M, C @ best_x)
        except (RuntimeError, sla.LinAlgError):
            break
        z = z / np.linalg.norm(z)
        num = np.vdot(z, A @ z)
        den = np.vdot(z, C @ z)
        lam_new = num / den
        res_new = _residual(A, C, lam_new, z)
        if res_new < best_res:
            best_lam, best_x, best_res = lam_new, z, res_new
        else:
            break
    return best_lam, best_x, best_res


def _order(values: np.ndarray, shift: complex) -> np.ndarray:
    return np.lexsort((values.real, np.abs(values - shift)))


def solve_pairs(system, opts: SolveOptions | None = None) -> list[EigenPair]:
    """Eigenpairs of (Bh, Ch) nearest the shift, with dual vectors.

    Returns `opts.k` pairs sorted by distance to the shift, then by real
    part, already normalized (see `normalize_biorthogonal`).  Raises
    EigenSolveError when residuals cannot be brought below `opts.tol` and
    reports the residuals that were achieved.
    """
    opts = opts or SolveOptions()
    B, C = system.Bh, system.Ch
    n = B.shape[0]
    if n < opts.k:
        raise EigenSolveError(f"asked for {opts.k} pairs but system has only {n} dofs")

    if n <= opts.dense_threshold:
        pairs = _solve_dense(B, C, opts)
    else:
        pairs = _solve_arnoldi(B, C, opts)

    for p in pairs:
        p.lam, p.right, p.residual_right = _polish(B, C, p.lam, p.right, opts.tol)
        lam_left = np.conj(p.lam)
        lam_left, p.left, p.residual_left = _polish(B.T, C, lam_left, p.left, opts.tol)

    bad = [p for p in pairs if max(p.residual_right, p.residual_left) > opts.tol]
    if bad:
        achieved = ", ".join(
            f"lambda={p.lam:.6g}: right {p.residual_right:.2e} left {p.residual_left:.2e}"
            for p in bad
        )
        raise EigenSolveError(f"residual tolerance {opts.tol:g} not met: {achieved}")

    pairs = normalize_biorthogonal(pairs, C)
    for p in pairs:
        p.residual_right = _residual(B, C, p.lam, p.right)
        p.residual_left = _residual(B.T, C, np.conj(p.lam), p.left)
    return pairs


def _solve_dense(B, C, opts):
    Bd = B.toarray() if sp.issparse(B) else np.asarray(B, dtype=float)
    Cd = C.toarray() if sp.issparse(C) else np.asarray(C, dtype=float)
    w, vl, vr = sla.eig(Bd, Cd, left=True, right=True)
    finite = np.isfinite(w)
    w, vl, vr = w[finite], vl[:, finite], vr[:, finite]
    order = _order(w, opts.shift)[: opts.k]
    return [
        EigenPair(lam=complex(w[i]), right=vr[:, i].astype(complex), left=vl[:, i].astype(complex))
        for i in order
    ]


def _solve_arnoldi(B, C, opts):
    n = B.shape[0]
    k_req = min(opts.k + 2, n - 2)
    rng = np.random.default_rng(opts.seed)
    v0_r = rng.standard_normal(n)
    v0_l = rng.standard_normal(n)
    common = dict(M=C.tocsc(), sigma=opts.shift, maxiter=opts.max_iterations, tol=0)
    try:
        wr, Vr = spla.eigs(B.tocsc(), k=k_req, v0=v0_r, **common)
        wl, Vl = spla.eigs(B.T.tocsc(), k=k_req, v0=v0_l, **common)
    except spla.ArpackNoConvergence as exc:
        raise EigenSolveError(f"Arnoldi iteration did not converge: {exc}") from exc

    order = _order(wr, opts.shift)[: opts.k]
    pairs = []
    used = set()
    for i in order:
        lam = complex(wr[i])
        # match the dual vector through lambda = conj(lambda*)
        gaps = np.abs(np.conj(wl) - lam)
        for j in used:
            gaps[j] = np.inf
        j = int(np.argmin(gaps))
        paired = gaps[j] <= 1e-6 * max(abs(lam), 1e-30)
        if paired:
            used.add(j)
        else:
            warnings.warn(
                f"no dual eigenvalue matches lambda={lam:.6g} "
                f"(closest gap {gaps[j]:.2e}); pair flagged",
                stacklevel=2,
            )
        pairs.append(
            EigenPair(
                lam=lam,
                right=Vr[:, i].astype(complex),
                left=Vl[:, j].astype(complex),
                paired=bool(paired),
            )
        )
    return pairs


def normalize_biorthogonal(pairs, Ch) -> list:
    """Scale pairs to right^H Ch right = 1 and left^H Ch right = 1.

    The phase of the right vector is fixed by making its largest-modulus
    entry real positive.  Fails when the left/right Ch-pairing is nearly
    defective (Gram entry below 1e-12 after unit scaling).
    """
    out = []
    for p in pairs:
        x = np.asarray(p.right, dtype=complex)
        y = np.asarray(p.left, dtype=complex)
        nx = np.sqrt(abs(np.vdot(x, Ch @ x)))
        if nx == 0.0:
            raise EigenSolveError("zero right eigenvector")
        x = x / nx
        pivot = x[int(np.argmax(np.abs(x)))]
        x = x * (np.conj(pivot) / abs(pivot))

        ny = np.sqrt(abs(np.vdot(y, Ch @ y)))
        if ny == 0.0:
            raise EigenSolveError("zero left eigenvector")
        y = y / ny
        gram = np.vdot(y, Ch @ x)
        if abs(gram) < 1e-12:
            raise EigenSolveError(
                f"near-defective pair at lambda={p.lam:.6g}: |left^H Ch right| = {abs(gram):.2e}"
            )
        y = y / np.conj(gram)
        out.append(replace_pair(p, x, y))
    return out


def replace_pair(p: EigenPair, right, left) -> EigenPair:
    return EigenPair(
        lam=p.lam,
        right=right,
        left=left,
        residual_right=p.residual_right,
        residual_left=p.residual_left,
        paired=p.paired,
    )
