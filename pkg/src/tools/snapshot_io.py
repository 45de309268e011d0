import struct
from pathlib import Path
from typing import Union

import numpy as np
from loguru import logger

from processing.grid import Field, Grid

MAGIC = b"BLGV"
VERSION = 1
HEADER = struct.Struct("<4sIIIddd")


def write_snapshot(path: Union[str, Path], f: Field) -> Path:
    """Writes a field as header + N_x * N_y little-endian f64 values, x index major."""
    path = Path(path)
    grid = f.grid
    header = HEADER.pack(MAGIC, VERSION, grid.N_x, grid.N_y, grid.L_x, grid.Y_max, f.t)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as out:
        out.write(header)
        out.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    logger.debug(f"Snapshot t={f.t:.6g} written to '{path}'.")
    return path


def read_snapshot(path: Union[str, Path], grid: Grid = None) -> Field:
    """Reads a snapshot; without a grid, a uniform one is rebuilt from the header."""
    path = Path(path)
    with open(path, "rb") as src:
        raw = src.read()
    if len(raw) < HEADER.size:
        raise ValueError(f"'{path}' is too short to hold a snapshot header")
    magic, version, n_x, n_y, l_x, y_max, t = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"'{path}' is not a snapshot file (magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"unsupported snapshot version {version} in '{path}'")
    expected = HEADER.size + 8 * n_x * n_y
    if len(raw) != expected:
        raise ValueError(f"'{path}' holds {len(raw)} bytes, expected {expected}")
    values = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape(n_x, n_y)
    if grid is None:
        grid = Grid(l_x, n_x, y_max, n_y)
    elif grid.shape != (n_x, n_y):
        raise ValueError(f"snapshot shape {(n_x, n_y)} does not match grid {grid.shape}")
    return Field(grid, values.astype(float), t)
