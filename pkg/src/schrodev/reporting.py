"""Artifact writers: manifest, RFC-4180 results table, report, plot data."""

from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

__all__ = ["write_manifest", "write_results_csv", "write_report_json",
           "write_plot_data", "trajectory_rows", "trajectory_header"]


def write_manifest(path: Path, *, config_hash: str, seed: int,
                   extra: dict | None = None) -> None:
    from . import __version__

    manifest = {
        "config_hash": config_hash,
        "seed": int(seed),
        "versions": {
            "schrodev": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_results_csv(path: Path, header: list, rows: list) -> None:
    """RFC-4180 table (CRLF line endings, minimal quoting)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_report_json(path: Path, report: dict) -> None:
    path.write_text(json.dumps(report, indent=2, sort_keys=True,
                               default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and obj != obj:
        return None
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def write_plot_data(path: Path, x, y) -> None:
    """Two-column whitespace-separated text, one figure per file."""
    with open(path, "w") as fh:
        for xi, yi in zip(x, y):
            fh.write(f"{float(xi):.17g} {float(yi):.17g}\n")


def trajectory_header(mode_count: int) -> list:
    header = ["t"]
    for j in range(1, mode_count + 1):
        header += [f"re_c{j}", f"im_c{j}"]
    return header


def trajectory_rows(traj) -> list:
    rows = []
    for t, state in zip(traj.times, traj.states):
        row = [float(t)]
        for c in state:
            row += [float(c.real), float(c.imag)]
        rows.append(row)
    return rows
