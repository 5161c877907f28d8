"""Result export: legacy VTK polygon files and study CSV tables.

All writers go through an atomic temp-file-plus-rename so partial files
never appear under the target name.
"""

from __future__ import annotations

import contextlib
import os
import tempfile

import numpy as np

CSV_COLUMNS = (
    "N", "lambda_h", "R2", "Theta2", "J2", "eta2", "eff",
    "R*2", "Theta*2", "J*2", "eta*2", "eff*",
)


@contextlib.contextmanager
def atomic_text(path):
    """Context manager yielding a text stream; renames into place on success."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as stream:
            yield stream
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def export_vtk(mesh, fields: dict, path) -> None:
    """Write a legacy-VTK polygon file with per-vertex scalar fields.

    Complex fields emit three arrays (name_re, name_im, name_abs); real
    fields a single one.  Field lengths must match the vertex count.
    """
    scalars = []
    for name, values in fields.items():
        values = np.asarray(values)
        if len(values) != mesh.n_vertices:
            raise ValueError(
                f"field {name!r} has {len(values)} values for {mesh.n_vertices} vertices"
            )
        if np.iscomplexobj(values):
            scalars.append((f"{name}_re", values.real))
            scalars.append((f"{name}_im", values.imag))
            scalars.append((f"{name}_abs", np.abs(values)))
        else:
            scalars.append((name, values.astype(float)))

    cell_size = sum(len(c) + 1 for c in mesh.elements)
    with atomic_text(path) as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write("vemspectra polygonal mesh\n")
        f.write("ASCII\nDATASET POLYDATA\n")
        f.write(f"POINTS {mesh.n_vertices} double\n")
        for x, y in mesh.vertices:
            f.write(f"{x:.16e} {y:.16e} 0.0\n")
        f.write(f"POLYGONS {mesh.n_elements} {cell_size}\n")
        for cyc in mesh.elements:
            f.write(str(len(cyc)) + " " + " ".join(str(i) for i in cyc) + "\n")
        if scalars:
            f.write(f"POINT_DATA {mesh.n_vertices}\n")
            for name, values in scalars:
                f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in values:
                    f.write(f"{v:.12e}\n")


def _fmt(x: float) -> str:
    return f"{x:.4e}"


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.4e}{z.imag:+.4e}j"


def export_csv(result, path) -> None:
    """One row per study step, mirroring the estimator breakdown tables.

    Columns: N, lambda_h (complex literal), the primal splits R2, Theta2,
    J2, eta2 and effectivity, then the dual counterparts.  Scientific
    notation with 5 significant digits throughout.
    """
    if not result.rows:
        raise ValueError("cannot export an empty study")
    with atomic_text(path) as f:
        f.write(",".join(CSV_COLUMNS) + "\n")
        for row in result.rows:
            cells = [
                str(row.n_free),
                _fmt_complex(complex(row.lam)),
                _fmt(row.r_sq),
                _fmt(row.theta_sq),
                _fmt(row.jump_sq),
                _fmt(row.eta_sq),
                _fmt(row.eff),
                _fmt(row.r_sq_dual),
                _fmt(row.theta_sq_dual),
                _fmt(row.jump_sq_dual),
                _fmt(row.eta_sq_dual),
                _fmt(row.eff_dual),
            ]
            f.write(",".join(cells) + "\n")


def read_csv(path):
    """Parse a study CSV back into a list of dicts (values as floats or
    complex for the eigenvalue column)."""
    rows = []
    with open(path) as f:
        header = f.readline().strip().split(",")
        for line in f:
            toks = line.strip().split(",")
            if not toks or toks == [""]:
                continue
            row = {}
            for key, tok in zip(header, toks):
                if key == "N":
                    row[key] = int(tok)
                elif key == "lambda_h":
                    row[key] = complex(tok)
                else:
                    row[key] = float(tok)
            rows.append(row)
    return rows
