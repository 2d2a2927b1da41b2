"""
Report and snapshot writers.

Reports are JSON with sorted keys and no timestamps, so identical runs produce identical
bytes. Non-finite floats are written as the strings "inf", "-inf" and "nan".
"""
import csv
import json
import math
from pathlib import Path
from typing import Any, List, Union

import numpy as np

SNAPSHOT_COLUMNS = ("t", "i", "j", "k", "x", "y", "z", "u")


def to_jsonable(obj: Any) -> Any:
    """Recursively convert reports, numpy values and non-finite floats to plain JSON types."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def dumps_report(doc: Any) -> str:
    return json.dumps(to_jsonable(doc), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_report(doc: Any, file_path: Union[str, Path]) -> Path:
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_report(doc))
    return path


def write_snapshot_csv(file_path: Union[str, Path], t: float, grid, values: np.ndarray) -> Path:
    """One row per cell in C order: t, i, j, k, x, y, z, u."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    centers = grid.cell_centers()
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SNAPSHOT_COLUMNS)
        for idx in np.ndindex(*grid.n):
            x, y, z = centers[idx]
            writer.writerow([repr(float(t)), *idx, repr(float(x)), repr(float(y)), repr(float(z)),
                             repr(float(values[idx]))])
    return path


def write_trajectory(traj, out_dir: Union[str, Path], prefix: str = "snapshot") -> List[Path]:
    """Write every snapshot of a trajectory as ``<prefix>_<index>.csv``."""
    out = Path(out_dir)
    width = max(4, len(str(len(traj.snapshots) - 1)))
    return [write_snapshot_csv(out / f"{prefix}_{index:0{width}d}.csv", t, snap.grid, snap.values)
            for index, (t, snap) in enumerate(zip(traj.times, traj.snapshots))]


def write_convergence_csv(table, file_path: Union[str, Path]) -> Path:
    """Rows of a convergence table; missing errors and orders are left empty."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("level", "n", "dt", "error", "order"))
        for row in table.rows:
            writer.writerow([row.level, row.n, repr(float(row.dt)),
                             "" if row.error is None else repr(float(row.error)),
                             "" if row.order is None else repr(float(row.order))])
    return path
