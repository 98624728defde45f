"""Grid maps, cell indexing, sensor footprints and the plain-text map format."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np


class MapFormatError(ValueError):
    pass


class CellIndex(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise MapFormatError("map has zero cells")
        vals = np.asarray(self.values, dtype=float).reshape(-1).copy()
        if vals.size != self.width * self.height:
            raise MapFormatError(
                f"expected {self.width * self.height} values, got {vals.size}")
        bad = np.flatnonzero(~((vals >= 0.0) & (vals <= 1.0)))
        if bad.size:
            r, c = divmod(int(bad[0]), self.width)
            raise MapFormatError(f"value {vals[bad[0]]!r} at cell ({r},{c}) outside [0,1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_array(cls, arr) -> "GridMap":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 2:
            raise MapFormatError("map array must be 2-D")
        return cls(width=arr.shape[1], height=arr.shape[0], values=arr.reshape(-1))

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.height, self.width)

    def contains(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def flat(self, cell) -> int:
        r, c = cell
        if not self.contains(cell):
            raise IndexError(f"cell ({r},{c}) outside {self.height}x{self.width} map")
        return r * self.width + c

    def cell(self, j: int) -> CellIndex:
        if not 0 <= j < self.n_cells:
            raise IndexError(f"flat index {j} outside map")
        return CellIndex(*divmod(int(j), self.width))

    def __getitem__(self, cell) -> float:
        return float(self.values[self.flat(cell)])


@dataclass(frozen=True)
class Footprint:
    center: CellIndex
    window_w: int
    window_h: int
    cells: tuple  # row-major CellIndex tuple, clipped to the map

    @property
    def size(self) -> int:
        return len(self.cells)


def window_bounds(height, width, center, w, h):
    """Clipped [r0, r1) x [c0, c1) of a w x h window around center."""
    r, c = center
    return (max(r - h // 2, 0), min(r + h // 2 + 1, height),
            max(c - w // 2, 0), min(c + w // 2 + 1, width))


def footprint(grid: GridMap, center, w: int, h: int) -> Footprint:
    if w % 2 == 0 or h % 2 == 0 or w < 1 or h < 1:
        raise ValueError(f"window {w}x{h} must have odd positive sides")
    center = CellIndex(*center)
    if not grid.contains(center):
        raise IndexError(f"center {tuple(center)} outside map")
    r0, r1, c0, c1 = window_bounds(grid.height, grid.width, center, w, h)
    cells = tuple(CellIndex(r, c) for r in range(r0, r1) for c in range(c0, c1))
    return Footprint(center=center, window_w=w, window_h=h, cells=cells)


def footprint_indices(height: int, width: int, center, w: int, h: int) -> np.ndarray:
    """Flat indices of the clipped window, row-major."""
    r0, r1, c0, c1 = window_bounds(height, width, center, w, h)
    rows = np.arange(r0, r1)[:, None]
    cols = np.arange(c0, c1)[None, :]
    return (rows * width + cols).reshape(-1)


def _data_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def parse_map(text: str) -> GridMap:
    lines = list(_data_lines(text))
    if not lines:
        raise MapFormatError("zero cells: empty map file")
    try:
        height, width = (int(t) for t in lines[0][1].split())
    except ValueError:
        raise MapFormatError(f"line {lines[0][0]}: header must be 'height width'") from None
    if height <= 0 or width <= 0:
        raise MapFormatError("zero cells")
    rows = lines[1:]
    if len(rows) != height:
        raise MapFormatError(f"expected {height} rows, found {len(rows)}")
    values = np.empty((height, width))
    for r, (lineno, line) in enumerate(rows):
        toks = line.split()
        if len(toks) != width:
            raise MapFormatError(f"line {lineno}: expected {width} values, found {len(toks)}")
        for c, tok in enumerate(toks):
            try:
                v = float(tok)
            except ValueError:
                raise MapFormatError(f"line {lineno}: cannot parse {tok!r} at cell ({r},{c})") from None
            if not 0.0 <= v <= 1.0:
                raise MapFormatError(f"value {v!r} at cell ({r},{c}) outside [0,1]")
            values[r, c] = v
    return GridMap.from_array(values)


def load_map(path) -> GridMap:
    return parse_map(Path(path).read_text())


def format_map(grid: GridMap) -> str:
    out = [f"{grid.height} {grid.width}"]
    for row in grid.as_array():
        out.append(" ".join(repr(float(v)) if v not in (0.0, 1.0) else str(int(v)) for v in row))
    return "\n".join(out) + "\n"


def save_map(grid: GridMap, path) -> None:
    Path(path).write_text(format_map(grid))
