"""CSV diagnostics and legacy-VTK snapshots."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import Mesh

CSV_HEADER = ["i", "t", "energy", "min_detG", "max_normG", "max_step_rate", "min_mu", "max_mu"]
VTK_TETRA = 10


def _num(v) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    return repr(float(v)) if not isinstance(v, (int, np.integer)) else str(int(v))


def emit_csv(traj, path: str | Path) -> Path:
    """One row per time step ``i = 1..N`` with the fields of :data:`CSV_HEADER`.

    The initial state is not a step and gets no row; its values are the
    ``i = 0`` entry of ``traj.diagnostics()``.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in traj.diagnostics()[1:]:
            w.writerow([_num(row[k]) for k in CSV_HEADER])
    return path


def read_csv(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "i" else float(v)) for k, v in r.items()} for r in rows]


def emit_vtk(mesh: Mesh, y: np.ndarray, G: np.ndarray, detG: np.ndarray, path: str | Path,
             nutrient: np.ndarray | None = None, title: str = "morphoelastic state") -> Path:
    """Legacy ASCII unstructured grid: deformed points, tets, per-cell G and det G."""
    path = Path(path)
    y = np.asarray(y, dtype=float)
    nt = mesh.n_tets
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(y)} double",
    ]
    lines += [" ".join(_num(v) for v in p) for p in y]
    lines.append(f"CELLS {nt} {5 * nt}")
    lines += ["4 " + " ".join(str(int(v)) for v in tet) for tet in mesh.tets]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TETRA)] * nt
    lines.append(f"CELL_DATA {nt}")
    lines += ["SCALARS detG double 1", "LOOKUP_TABLE default"]
    lines += [_num(v) for v in detG]
    lines.append("FIELD FieldData 1")
    lines.append(f"G 9 {nt} double")
    lines += [" ".join(_num(v) for v in g.ravel()) for g in np.asarray(G)]
    if nutrient is not None:
        lines.append(f"POINT_DATA {len(y)}")
        lines += ["SCALARS nutrient double 1", "LOOKUP_TABLE default"]
        lines += [_num(v) for v in nutrient]
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_state_vtk(traj, i: int, path: str | Path) -> Path:
    mu = traj.mu[i] if traj.mu and len(traj.mu[i]) == traj.mesh.n_vertices else None
    return emit_vtk(traj.mesh, traj.y[i], traj.G[i], traj.detG[i], path, nutrient=mu,
                    title=f"step {i} t={traj.grid.times[i]!r}")


def emit_control_csv(result, path: str | Path, names=()) -> Path:
    """Candidate id, coefficients, objective terms and total, in evaluation order."""
    path = Path(path)
    k = len(result.evaluated[0].c) if result.evaluated else 0
    names = list(names) if len(names) == k else [f"c{j}" for j in range(k)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["candidate"] + names + ["J_volume", "J_tracking", "J_control", "J"])
        for cand in result.evaluated:
            t = cand.terms
            w.writerow([cand.index] + [_num(v) for v in cand.c]
                       + [_num(t.volume), _num(t.tracking), _num(t.control), _num(t.total)])
    return path
