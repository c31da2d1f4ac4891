"""Snapshot and trajectory file formats.

``SNEMA1`` binary layout (all integers little-endian):

    magic      6 bytes  b"SNEMA1"
    N1, N2     uint32, uint32
    nfields    uint32
    per field: uint16 name length, UTF-8 name,
               uint8 rank, rank x uint32 component shape
    payload    float64 little-endian; fields in table order, each stored
               row-major as (components..., N1, N2) so the node index
               varies fastest

The energy CSV has a fixed header and prints every float with 17
significant digits, which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .diagnostics import EnergyReport
from .geometry import ChartGeometry

__all__ = [
    "SNEMA_MAGIC",
    "ENERGY_COLUMNS",
    "format_float",
    "write_energy_csv",
    "read_energy_csv",
    "write_snema",
    "read_snema",
    "write_vtk",
    "state_fields",
]

SNEMA_MAGIC = b"SNEMA1"
ENERGY_COLUMNS = EnergyReport.COLUMNS


def format_float(x) -> str:
    return format(float(x), ".17g")


def write_energy_csv(path, reports) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENERGY_COLUMNS)
        for r in reports:
            w.writerow([format_float(x) for x in r.row()])
    return path


def read_energy_csv(path) -> list[EnergyReport]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != ENERGY_COLUMNS:
        raise ValueError(f"{path}: header must be {','.join(ENERGY_COLUMNS)}")
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(ENERGY_COLUMNS):
            raise ValueError(f"{path}:{i}: expected {len(ENERGY_COLUMNS)} columns, got {len(row)}")
        out.append(EnergyReport(**{c: float(v) for c, v in zip(ENERGY_COLUMNS, row)}))
    return out


# ----------------------------------------------------------------- SNEMA1


def _grid_fields(fields, grid):
    out = {}
    for name, a in fields.items():
        a = np.asarray(a, dtype=float)
        if a.shape[:2] != grid:
            raise ValueError(f"field {name!r} has shape {a.shape}, grid is {grid}")
        out[name] = a
    return out


def write_snema(path, fields: dict, grid_shape=None) -> Path:
    """Write named grid fields; each value has shape ``(N1, N2, *components)``."""
    if not fields:
        raise ValueError("no fields to write")
    grid = tuple(grid_shape or np.shape(next(iter(fields.values())))[:2])
    fields = _grid_fields(fields, grid)
    head = [SNEMA_MAGIC, struct.pack("<III", grid[0], grid[1], len(fields))]
    for name, a in fields.items():
        raw = name.encode()
        comp = a.shape[2:]
        head.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", len(comp)))
        head.append(struct.pack(f"<{len(comp)}I", *comp))
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(b"".join(head))
        for a in fields.values():
            body = np.moveaxis(a, (0, 1), (-2, -1))
            fh.write(np.ascontiguousarray(body, dtype="<f8").tobytes())
    return path


def read_snema(path) -> dict:
    buf = Path(path).read_bytes()
    if buf[:6] != SNEMA_MAGIC:
        raise ValueError(f"{path}: not a SNEMA1 file")
    n1, n2, nf = struct.unpack_from("<III", buf, 6)
    pos = 18
    table = []
    for _ in range(nf):
        (ln,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + ln].decode()
        pos += ln
        (rank,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        comp = struct.unpack_from(f"<{rank}I", buf, pos)
        pos += 4 * rank
        table.append((name, tuple(comp)))
    out = {}
    for name, comp in table:
        count = int(np.prod(comp, dtype=int)) * n1 * n2
        a = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(comp + (n1, n2))
        pos += 8 * count
        out[name] = np.moveaxis(a, (-2, -1), (0, 1)).astype(float)
    if pos != len(buf):
        raise ValueError(f"{path}: {len(buf) - pos} trailing bytes")
    return out


# -------------------------------------------------------------------- VTK


def _vtk_points(a):
    """Flatten grid axes with the first index fastest (VTK point order)."""
    return np.swapaxes(a, 0, 1).reshape((-1,) + a.shape[2:])


def _rows(arr):
    return "\n".join(" ".join(format_float(x) for x in np.atleast_1d(r)) for r in arr)


def write_vtk(path, chart: ChartGeometry, fields: dict, title="surfnema snapshot") -> Path:
    """Legacy ASCII ``STRUCTURED_GRID`` on the chart's embedded nodes.

    Scalars, 3-vectors and 3x3 tensors map to SCALARS, VECTORS and TENSORS;
    anything else is written as a multi-component SCALARS block.
    """
    grid = tuple(chart.grid_shape)
    fields = _grid_fields(fields, grid)
    n = grid[0] * grid[1]
    parts = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {grid[0]} {grid[1]} 1",
        f"POINTS {n} double",
        _rows(_vtk_points(np.asarray(chart.X))),
        f"POINT_DATA {n}",
    ]
    for name, a in fields.items():
        label = name.replace(" ", "_")
        comp = a.shape[2:]
        if comp == (3,):
            parts += [f"VECTORS {label} double", _rows(_vtk_points(a))]
        elif comp == (3, 3):
            parts += [f"TENSORS {label} double", _rows(_vtk_points(a).reshape(-1, 3))]
        else:
            k = int(np.prod(comp, dtype=int))
            if not 1 <= k <= 4:
                raise ValueError(f"field {name!r}: VTK scalars hold 1 to 4 components, got {k}")
            parts += [f"SCALARS {label} double {k}", "LOOKUP_TABLE default",
                      _rows(_vtk_points(a).reshape(n, k))]
    path = Path(path)
    path.write_text("\n".join(parts) + "\n")
    return path


def state_fields(chart: ChartGeometry, state) -> dict:
    """Named fields of a solver state for snapshot export."""
    n = tuple(chart.grid_shape)
    return {
        "v": np.asarray(state.v, dtype=float),
        "p": np.asarray(state.p, dtype=float),
        "q": np.asarray(state.q, dtype=float),
        "beta": np.broadcast_to(np.asarray(state.beta, dtype=float), n),
        "Q": state.Q(chart),
    }
