"""File output: atomic writes, field/loss CSVs and legacy VTK."""
from __future__ import annotations

import contextlib
import csv
import hashlib
import os
from pathlib import Path

import numpy as np

FIELD_COLUMNS = ("x", "y", "ux", "uy", "p11", "p12", "p21", "p22", "psi")
HISTORY_COLUMNS = ("iter", "total", "pi", "mse_r", "mse_t", "mse_u", "mse_p", "phase")


@contextlib.contextmanager
def atomic_writer(path, mode: str = "w"):
    """Write to a temporary sibling and rename over ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        with open(tmp, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def atomic_write_text(path, text: str) -> None:
    with atomic_writer(path) as fh:
        fh.write(text)


def _fmt(v) -> str:
    return repr(float(v))


def write_fields_csv(path, x, u, P, psi) -> None:
    """``x,y,ux,uy,p11,p12,p21,p22,psi`` with one row per point."""
    x, u = np.asarray(x, dtype=float), np.asarray(u, dtype=float)
    P = np.asarray(P, dtype=float).reshape(-1, 4)
    psi = np.asarray(psi, dtype=float)
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_COLUMNS)
        for row in np.column_stack([x, u, P, psi]):
            w.writerow([_fmt(v) for v in row])


def read_fields_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != FIELD_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(FIELD_COLUMNS)}")
        data = np.array([[float(v) for v in r] for r in reader], dtype=float).reshape(-1, len(FIELD_COLUMNS))
    return {name: data[:, k] for k, name in enumerate(FIELD_COLUMNS)}


def write_history_csv(path, history) -> None:
    """Loss history rows (dicts keyed by ``HISTORY_COLUMNS``)."""
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for rec in history:
            w.writerow([str(int(rec["iter"]))] + [_fmt(rec[k]) for k in HISTORY_COLUMNS[1:-1]] + [rec["phase"]])


def read_history_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        out = []
        for r in csv.DictReader(fh):
            rec = {k: float(r[k]) for k in HISTORY_COLUMNS[1:-1]}
            rec["iter"] = int(r["iter"])
            rec["phase"] = r["phase"]
            out.append(rec)
    return out


def point_hash(x, decimals: int = 12) -> str:
    """Order-sensitive digest of a point set, robust to text round-off."""
    x = np.round(np.asarray(x, dtype=float), decimals) + 0.0
    return hashlib.sha256(np.ascontiguousarray(x).tobytes()).hexdigest()


def write_vtk(path, points, triangles, point_data: dict, title: str = "mdem fields") -> None:
    """Legacy ASCII unstructured grid with triangle cells and point-data arrays.

    Arrays of shape (n,) become SCALARS, (n, 2) VECTORS (z = 0) and
    (n, 4) 2x2 TENSORS embedded in 3x3.
    """
    points = np.asarray(points, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    n, m = len(points), len(triangles)
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [f"{_fmt(p[0])} {_fmt(p[1])} 0.0" for p in points]
    lines.append(f"CELLS {m} {4 * m}")
    lines += [f"3 {a} {b} {c}" for a, b, c in triangles]
    lines.append(f"CELL_TYPES {m}")
    lines += ["5"] * m
    if point_data:
        lines.append(f"POINT_DATA {n}")
    for name, arr in point_data.items():
        arr = np.asarray(arr, dtype=float)
        if arr.shape[0] != n:
            raise ValueError(f"point array {name!r} has {arr.shape[0]} rows, expected {n}")
        if arr.ndim == 1:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_fmt(v) for v in arr]
        elif arr.shape[1:] == (2,):
            lines.append(f"VECTORS {name} double")
            lines += [f"{_fmt(a)} {_fmt(b)} 0.0" for a, b in arr]
        elif arr.shape[1:] in ((4,), (2, 2)):
            lines.append(f"TENSORS {name} double")
            for a11, a12, a21, a22 in arr.reshape(-1, 4):
                lines += [f"{_fmt(a11)} {_fmt(a12)} 0.0", f"{_fmt(a21)} {_fmt(a22)} 0.0", "0.0 0.0 0.0"]
        else:
            raise ValueError(f"unsupported point array shape {arr.shape} for {name!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")
