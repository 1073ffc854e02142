"""Run artifacts: field dumps, images, history tables, checkpoints.

All writers are plain-text or npz and bit-reproducible: no timestamps, no
host-dependent content. VTK output is the legacy ASCII structured-points
flavor (element fields as CELL_DATA, nodal vectors as POINT_DATA); images
are portable graymaps/bitmaps written by hand.
"""

import csv
import json

import numpy as np

from .fields import REALIZATIONS


def write_vtk(path, mesh, cell_fields=None, point_fields=None):
    """Legacy ASCII VTK structured-points dump of a structured mesh.

    cell_fields: name -> (n_elem,) scalar arrays. point_fields: name ->
    (n_dof,) displacement-like vectors, written as 3-vectors with z = 0.
    """
    cell_fields = cell_fields or {}
    point_fields = point_fields or {}
    lines = [
        "# vtk DataFile Version 3.0",
        "buckopt fields",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {mesh.dx:.9g} {mesh.dx:.9g} 1",
    ]
    if cell_fields:
        lines.append(f"CELL_DATA {mesh.n_elem}")
        for name, values in cell_fields.items():
            lines.append(f"SCALARS {name} float 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.9g}" for v in np.asarray(values, dtype=float))
    if point_fields:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, values in point_fields.items():
            v = np.asarray(values, dtype=float).reshape(mesh.n_nodes, 2)
            lines.append(f"VECTORS {name} float")
            lines.extend(f"{a:.9g} {b:.9g} 0" for a, b in v)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _to_grid(mesh, values):
    # row 0 of the file is the top of the domain
    return np.asarray(values, dtype=float).reshape(mesh.ny, mesh.nx)[::-1]


def write_pgm(path, mesh, values):
    """8-bit portable graymap of an element field in [0, 1]; 1 -> black."""
    grid = np.clip(_to_grid(mesh, values), 0.0, 1.0)
    pix = np.rint((1.0 - grid) * 255).astype(int)
    rows = [" ".join(str(v) for v in row) for row in pix]
    with open(path, "w") as fh:
        fh.write(f"P2\n{mesh.nx} {mesh.ny}\n255\n" + "\n".join(rows) + "\n")


def write_pbm(path, mesh, indicator):
    """Portable bitmap of a binary element field; 1 -> black."""
    grid = (_to_grid(mesh, indicator) > 0.5).astype(int)
    rows = [" ".join(str(v) for v in row) for row in grid]
    with open(path, "w") as fh:
        fh.write(f"P1\n{mesh.nx} {mesh.ny}\n" + "\n".join(rows) + "\n")


def write_history_csv(path, records):
    """Per-iteration history table. Columns are the union of record keys
    in first-appearance order; missing entries stay empty."""
    if not records:
        raise ValueError("history is empty")
    columns = []
    for rec in records:
        for key in rec:
            if key not in columns:
                columns.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, restval="")
        writer.writeheader()
        for rec in records:
            writer.writerow({k: _fmt(v) for k, v in rec.items()})


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return v


def write_sweep_csv(path, rows, n_eig):
    """De-homogenization sweep table: one row per (epsilon, offset) case."""
    header = (["epsilon", "x_off", "y_off"]
              + [f"lambda{i + 1}" for i in range(n_eig)]
              + ["compliance", "volume_fraction", "local_mode"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in rows:
            lams = list(r["lambdas"])[:n_eig]
            lams += [""] * (n_eig - len(lams))
            writer.writerow(
                [_fmt(r["epsilon"]), _fmt(r["x_off"]), _fmt(r["y_off"])]
                + [_fmt(v) for v in lams]
                + [_fmt(r["compliance"]), _fmt(r["volume_fraction"]),
                   int(r["local_mode"])]
            )


def write_manifest(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_checkpoint(path, x, s, iteration, beta, correction, vstar_d, refs):
    """Everything needed to warm-start or de-homogenize a finished phase."""
    def packed(store):
        return np.array([store.get(m, np.nan) for m in REALIZATIONS])

    np.savez(
        path,
        x=x, s=s,
        iteration=np.array(iteration),
        beta=np.array(beta),
        vstar_d=np.array(vstar_d),
        correction=np.array([correction.get(m, 1.0) for m in REALIZATIONS]),
        compliance0=packed(refs.compliance),
        ks0=packed(refs.ks),
        gamma0=packed(refs.gamma0),
        stress_norm0=packed(refs.stress_norm),
        realizations=np.array(REALIZATIONS),
    )


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as data:
        out = {key: data[key] for key in data.files}
    out["iteration"] = int(out["iteration"])
    out["beta"] = float(out["beta"])
    out["vstar_d"] = float(out["vstar_d"])
    return out
