"""CSV/JSON output. Floats are written with 17 significant digits so they round-trip."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .lagrangian import LagrangianState
from .measures import DataPair

__all__ = ["FLOAT_FMT", "write_table", "read_table", "write_state", "read_state", "write_snapshot", "write_atoms"]

FLOAT_FMT = "%.17g"


def write_table(path, names, columns, header: dict | None = None) -> None:
    """Comma-separated table; an optional JSON header goes on a leading ``#`` line."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    n = cols[0].size if cols else 0
    if any(c.size != n for c in cols):
        raise ValueError("columns must have equal length")
    with open(path, "w", newline="") as fh:
        if header is not None:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(FLOAT_FMT % c[i] for c in cols) + "\n")


def read_table(path) -> tuple[dict | None, dict[str, np.ndarray]]:
    lines = Path(path).read_text().splitlines()
    header = None
    if lines and lines[0].startswith("#"):
        header = json.loads(lines[0][1:])
        lines = lines[1:]
    names = lines[0].split(",")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:] if ln]
    data = np.array(rows, dtype=float).reshape(-1, len(names))
    return header, {k: data[:, i] for i, k in enumerate(names)}


def write_state(path, state: LagrangianState) -> None:
    write_table(
        path,
        ["alpha", "y", "U", "H"],
        [state.alpha, state.y, state.U, state.H],
        {"t": state.t, "dalpha": state.dalpha, "n": state.n},
    )


def read_state(path) -> LagrangianState:
    header, cols = read_table(path)
    return LagrangianState(cols["alpha"], cols["y"], cols["U"], cols["H"], header["t"] if header else 0.0)


def write_snapshot(path, data: DataPair) -> None:
    u = data.u
    write_table(path, ["x", "u", "ux"], [u.nodes, u.values, u.derivative])


def write_atoms(path, data: DataPair) -> None:
    write_table(path, ["position", "mass"], [data.mu.positions, data.mu.masses])
