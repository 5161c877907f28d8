"""Command-line entry point: mesh generation, one-shot solves, studies."""

from __future__ import annotations

import os

# Honor the worker cap before any BLAS pool is spun up.
_threads = os.environ.get("VEMSPECTRA_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import sys

import numpy as np

from . import io as vio
from .adapt import StudyConfig, run_study
from .eig import SolveOptions, solve_pairs
from .mesh import DomainSpec, build_mesh, load_mesh, save_mesh
from .vem import Coefficients, assemble

_FAMILY_NAMES = ("tria", "quad", "hexa", "voro")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vemspectra",
        description="Polygonal VEM eigensolver for convection-diffusion problems "
        "with residual estimators and adaptive refinement.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_mesh = sub.add_parser("mesh", help="generate a mesh and write it as .poly text")
    p_mesh.add_argument("--domain", default="unit-square",
                        help="unit-square | lshape | hshape (default: unit-square)")
    p_mesh.add_argument("--family", "--mesh", dest="family", default="quad",
                        help="tria | quad | hexa | voro (default: quad)")
    p_mesh.add_argument("--resolution", type=int, default=8)
    p_mesh.add_argument("--seed", type=int, default=0, help="Voronoi seed")
    p_mesh.add_argument("--out", required=True, help="output .poly path")

    p_solve = sub.add_parser("solve", help="solve the eigenproblem on a mesh file")
    p_solve.add_argument("--mesh", required=True, help="input .poly mesh file")
    p_solve.add_argument("--kappa", type=float, default=1.0)
    p_solve.add_argument("--advect", type=float, nargs=2, default=(0.0, 0.0),
                         metavar=("VX", "VY"))
    p_solve.add_argument("--num-eigs", type=int, default=1)
    p_solve.add_argument("--shift", type=float, default=0.0)
    p_solve.add_argument("--tol", type=float, default=1e-10)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--out", help="directory for VTK output of the eigenfunctions")

    p_study = sub.add_parser("study", help="uniform or adaptive refinement study")
    p_study.add_argument("--domain", default="unit-square")
    p_study.add_argument("--family", "--mesh", dest="family", default="quad",
                         help="mesh family, or a .poly file to start from")
    p_study.add_argument("--resolution", type=int, default=8)
    p_study.add_argument("--mode", default="adaptive",
                         help="uniform | adaptive | adaptive-primal | adaptive-dual | adaptive-both")
    p_study.add_argument("--steps", type=int, default=8)
    p_study.add_argument("--fraction", type=float, default=0.5)
    p_study.add_argument("--kappa", type=float, default=1.0)
    p_study.add_argument("--advect", type=float, nargs=2, default=(0.0, 0.0),
                         metavar=("VX", "VY"))
    p_study.add_argument("--num-eigs", type=int, default=None)
    p_study.add_argument("--eig-index", type=int, default=1,
                         help="1-based index of the tracked eigenvalue")
    p_study.add_argument("--shift", type=float, default=0.0)
    p_study.add_argument("--tol", type=float, default=1e-10)
    p_study.add_argument("--lambda-ref", type=float, default=None,
                         help="reference eigenvalue; extrapolated when omitted")
    p_study.add_argument("--seed", type=int, default=0)
    p_study.add_argument("--dof-cap", type=int, default=None)
    p_study.add_argument("--vtk", action="store_true",
                         help="also write the final eigenfunction as VTK")
    p_study.add_argument("--out", default=".", help="output directory")
    return parser


def _cmd_mesh(args) -> int:
    mesh = build_mesh(DomainSpec(args.domain), args.family, args.resolution, seed=args.seed)
    mesh.validate(domain_area=DomainSpec(args.domain).area)
    with vio.atomic_text(args.out) as stream:
        save_mesh(mesh, stream)
    print(f"wrote {args.out}: {mesh.n_vertices} vertices, {mesh.n_elements} elements, "
          f"area {mesh.total_area():.12g}")
    return 0


def _cmd_solve(args) -> int:
    mesh = load_mesh(args.mesh)
    system = assemble(mesh, Coefficients(kappa=args.kappa, theta=tuple(args.advect)))
    opts = SolveOptions(k=args.num_eigs, shift=args.shift, tol=args.tol, seed=args.seed)
    pairs = solve_pairs(system, opts)
    for i, p in enumerate(pairs, start=1):
        print(
            f"lambda[{i}] = {p.lam.real:.10e} {p.lam.imag:+.3e}j   "
            f"residual right {p.residual_right:.2e}  left {p.residual_left:.2e}"
        )
    if args.out:
        fields = {}
        for i, p in enumerate(pairs, start=1):
            fields[f"u{i}"] = system.expand(p.right)
            fields[f"u{i}_dual"] = system.expand(p.left)
        vio.export_vtk(mesh, fields, os.path.join(args.out, "eigenfunctions.vtk"))
        print(f"wrote {os.path.join(args.out, 'eigenfunctions.vtk')}")
    return 0


def _cmd_study(args) -> int:
    mode = {"adaptive": "adaptive-primal"}.get(args.mode, args.mode)
    initial_mesh = None
    family = args.family
    if family not in _FAMILY_NAMES:
        if os.path.exists(family):
            initial_mesh = load_mesh(family)
            family = "file"
        else:
            raise ValueError(
                f"--family/--mesh must be one of {_FAMILY_NAMES} or an existing .poly file, "
                f"got {family!r}"
            )
    config = StudyConfig(
        domain=args.domain if initial_mesh is None else "from-file",
        family=family,
        resolution=args.resolution,
        mode=mode,
        fraction=args.fraction,
        eig_index=args.eig_index,
        num_eigs=args.num_eigs,
        steps=args.steps,
        lambda_ref=args.lambda_ref,
        kappa=args.kappa,
        theta=tuple(args.advect),
        solve=SolveOptions(
            k=args.num_eigs or (args.eig_index + 2),
            shift=args.shift,
            tol=args.tol,
            dense_threshold=400,
            seed=args.seed,
        ),
        seed=args.seed,
        dof_cap=args.dof_cap,
        initial_mesh=initial_mesh,
        out_dir=args.out,
    )
    result = run_study(config)

    csv_path = os.path.join(args.out, "study.csv")
    vio.export_csv(result, csv_path)
    mesh_path = os.path.join(args.out, "final_mesh.poly")
    with vio.atomic_text(mesh_path) as stream:
        save_mesh(result.final_mesh, stream)

    for row in result.rows:
        print(
            f"step {row.step:2d}  N {row.n_free:7d}  lambda {row.lam.real:.6f}  "
            f"eta^2 {row.eta_sq:.4e}  eff {row.eff:.4e}"
        )
    if result.lambda_ref is not None:
        print(f"lambda_ref = {result.lambda_ref:.8f}  fitted rate = {result.rate:+.3f}")
    print(f"wrote {csv_path} and {mesh_path}")

    if args.vtk:
        system = assemble(
            result.final_mesh, Coefficients(kappa=args.kappa, theta=tuple(args.advect))
        )
        pairs = solve_pairs(system, config.solve)
        pair = pairs[config.eig_index - 1]
        vtk_path = os.path.join(args.out, "eigenfunction.vtk")
        vio.export_vtk(
            result.final_mesh,
            {"u": system.expand(pair.right), "u_dual": system.expand(pair.left)},
            vtk_path,
        )
        print(f"wrote {vtk_path}")
    return 0


def parse_and_dispatch(argv) -> int:
    """Parse arguments and run the chosen subcommand.

    Returns the process exit status: 0 on success, 1 on runtime failure,
    2 on usage errors (argparse convention).
    """
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "mesh":
            return _cmd_mesh(args)
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_study(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
