"""Polygonal VEM solver for the convection-diffusion eigenvalue problem."""

from .adapt import (
    StudyConfig,
    StudyResult,
    StudyRow,
    extrapolate_reference,
    fit_rate,
    mark,
    run_study,
)
from .eig import EigenPair, EigenSolveError, SolveOptions, normalize_biorthogonal, solve_pairs
from .estimator import (
    EstimatorReport,
    dual_indicators,
    effectivity,
    primal_indicators,
)
from .geometry import ElementGeometry, SubTriangulation, element_geometry, integrate, subtriangulate
from .io import export_csv, export_vtk, read_csv
from .mesh import (
    DomainSpec,
    MeshError,
    PolygonalMesh,
    build_mesh,
    from_elements,
    load_mesh,
    refine,
    save_mesh,
    uniform_refine,
)
from .vem import Coefficients, GlobalSystem, LocalOperators, assemble, local_matrices, local_projector

__version__ = "0.1.0"

__all__ = [
    "Coefficients",
    "DomainSpec",
    "EigenPair",
    "EigenSolveError",
    "ElementGeometry",
    "EstimatorReport",
    "GlobalSystem",
    "LocalOperators",
    "MeshError",
    "PolygonalMesh",
    "SolveOptions",
    "StudyConfig",
    "StudyResult",
    "StudyRow",
    "SubTriangulation",
    "assemble",
    "build_mesh",
    "dual_indicators",
    "effectivity",
    "element_geometry",
    "export_csv",
    "export_vtk",
    "extrapolate_reference",
    "fit_rate",
    "from_elements",
    "integrate",
    "load_mesh",
    "local_matrices",
    "local_projector",
    "mark",
    "normalize_biorthogonal",
    "primal_indicators",
    "read_csv",
    "refine",
    "run_study",
    "save_mesh",
    "solve_pairs",
    "subtriangulate",
    "uniform_refine",
]
