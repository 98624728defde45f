"""Compression templates, the (mean, variance, template) message and bit accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from taskexplore.grid import CellIndex


class CodebookError(ValueError):
    pass


@dataclass(frozen=True)
class Template:
    """A window-shaped partition; 0 marks cells that are never transmitted."""

    theta: int
    group_grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        grid = np.asarray(self.group_grid, dtype=int)
        if grid.ndim != 2 or grid.shape[0] % 2 == 0 or grid.shape[1] % 2 == 0:
            raise CodebookError(f"template {self.theta}: window must be 2-D with odd sides")
        if grid.min() < 0:
            raise CodebookError(f"template {self.theta}: negative group id")
        ids = np.unique(grid[grid > 0])
        if ids.size == 0:
            raise CodebookError(f"template {self.theta}: template transmits nothing")
        if not np.array_equal(ids, np.arange(1, ids.size + 1)):
            raise CodebookError(f"template {self.theta}: group ids must be 1..k without gaps")
        grid.setflags(write=False)
        object.__setattr__(self, "group_grid", grid)

    @property
    def window_h(self) -> int:
        return self.group_grid.shape[0]

    @property
    def window_w(self) -> int:
        return self.group_grid.shape[1]

    @property
    def k(self) -> int:
        return int(self.group_grid.max())

    @cached_property
    def offsets(self):
        """Per group id, (drow, dcol) offsets from the window center."""
        h, w = self.group_grid.shape
        out = {}
        for gid in range(1, self.k + 1):
            rr, cc = np.nonzero(self.group_grid == gid)
            out[gid] = (rr - h // 2, cc - w // 2)
        return out


@dataclass(frozen=True)
class InstantiatedAbstraction:
    theta: int
    center: CellIndex
    group_ids: tuple
    groups: tuple  # flat-index arrays, one per retained group

    @property
    def k(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups], dtype=int)

    def cells(self) -> np.ndarray:
        return np.concatenate(self.groups) if self.groups else np.empty(0, dtype=int)


@dataclass(frozen=True)
class AbstractionMessage:
    theta: int
    sensor_position: CellIndex
    means: np.ndarray
    variances: np.ndarray
    variance_included: bool = True
    t: int = 0

    @property
    def k(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class CommModel:
    n_m: int = 24
    n_a: int = 4

    def __post_init__(self):
        if self.n_m <= 0 or self.n_a < 0:
            raise ValueError("need n_m > 0 and n_a >= 0")
        if self.n_m % 2:
            raise ValueError("n_m must be even so the value-only cost n_m/2 is integral")

    def group_bits(self, variance_included: bool = True) -> int:
        return self.n_m if variance_included else self.n_m // 2


def bit_cost(message: AbstractionMessage, comm: CommModel) -> int:
    return message.k * comm.group_bits(message.variance_included) + comm.n_a


def instantiate(template: Template, grid, center) -> InstantiatedAbstraction:
    """Place `template` at `center`, dropping cells (and whole groups) outside the map.

    `grid` is a GridMap or a (height, width) pair.
    """
    r, c = center
    height, width = (grid.height, grid.width) if hasattr(grid, "height") else grid
    if not (0 <= r < height and 0 <= c < width):
        raise IndexError(f"center {(r, c)} outside map")
    ids, groups = [], []
    for gid, (dr, dc) in template.offsets.items():
        rr, cc = dr + r, dc + c
        keep = (rr >= 0) & (rr < height) & (cc >= 0) & (cc < width)
        if keep.any():
            ids.append(gid)
            groups.append(rr[keep] * width + cc[keep])
    return InstantiatedAbstraction(template.theta, CellIndex(r, c), tuple(ids), tuple(groups))


def compress(values, abstraction: InstantiatedAbstraction, *, variance_included=True,
             t=0) -> AbstractionMessage:
    """Mean and mean squared deviation of each group.

    `values` is a flat array over the map; NaN marks cells the sender has not sensed.
    """
    values = np.asarray(values, dtype=float)
    means = np.empty(abstraction.k)
    variances = np.empty(abstraction.k)
    for i, idx in enumerate(abstraction.groups):
        x = values[idx]
        if np.isnan(x).any():
            raise ValueError(f"group {abstraction.group_ids[i]} of template "
                             f"{abstraction.theta} references an unsensed cell")
        if np.ptp(x) == 0.0:
            # uniform group: keep the exact value so it pins cells downstream
            means[i], variances[i] = x[0], 0.0
            continue
        o = min(max(x.mean(), 0.0), 1.0)
        means[i] = o
        variances[i] = min(np.mean((x - o) ** 2), o * (1.0 - o))
    return AbstractionMessage(abstraction.theta, abstraction.center, means, variances,
                              bool(variance_included), int(t))


# ---------------------------------------------------------------- codebooks


def _blocks(n, sizes):
    edges = np.cumsum([0] + list(sizes))
    assert edges[-1] == n
    lab = np.empty(n, dtype=int)
    for b in range(len(sizes)):
        lab[edges[b]:edges[b + 1]] = b
    return lab


def _even_split(n, parts):
    base, extra = divmod(n, parts)
    sizes = [base] * parts
    # spread the remainder symmetrically from the middle outwards
    mid = parts // 2
    order = sorted(range(parts), key=lambda p: (abs(p - mid), p))
    for p in order[:extra]:
        sizes[p] += 1
    return sizes


def _block_template(n, parts):
    lab = _blocks(n, _even_split(n, parts))
    return lab[:, None] * parts + lab[None, :] + 1


def default_templates(n: int = 7) -> list:
    """The stock codebook for an n x n window (n odd, n >= 5): ten templates.

    Ordering: single block, quadrant-like 2x2, 3x3 blocks, 4x4 blocks, finest,
    fovea + ring, fovea only (rest untransmitted), row bands, column bands,
    coarse center + four border bands.
    """
    if n % 2 == 0 or n < 5:
        raise ValueError("default codebook needs an odd window of at least 5")
    c = n // 2
    grids = []
    grids.append(np.ones((n, n), dtype=int))
    grids.append(_block_template(n, 2))
    grids.append(_block_template(n, 3))
    grids.append(_block_template(n, 4))
    grids.append(np.arange(1, n * n + 1).reshape(n, n))

    fovea = np.zeros((n, n), dtype=int)
    fovea[c - 1:c + 2, c - 1:c + 2] = np.arange(1, 10).reshape(3, 3)
    ring = fovea.copy()
    ring[fovea == 0] = 10
    grids.append(ring)
    grids.append(fovea)

    grids.append(np.repeat(np.arange(1, n + 1)[:, None], n, axis=1))
    grids.append(np.repeat(np.arange(1, n + 1)[None, :], n, axis=0))

    bands = np.zeros((n, n), dtype=int)
    bands[:c - 1, :] = 2
    bands[c + 2:, :] = 3
    bands[c - 1:c + 2, :c - 1] = 4
    bands[c - 1:c + 2, c + 2:] = 5
    bands[c - 1:c + 2, c - 1:c + 2] = 1
    grids.append(bands)
    return [Template(theta=i + 1, group_grid=g) for i, g in enumerate(grids)]


def format_codebook(templates) -> str:
    h, w = templates[0].group_grid.shape
    out = [f"{len(templates)} {h} {w}"]
    for tpl in templates:
        out.append(f"template {tpl.theta}")
        out.extend(" ".join(str(v) for v in row) for row in tpl.group_grid)
    return "\n".join(out) + "\n"


def parse_codebook(text: str) -> list:
    lines = [(no, ln.strip()) for no, ln in enumerate(text.splitlines(), 1)
             if ln.strip() and not ln.strip().startswith("#")]
    if not lines:
        raise CodebookError("empty codebook file")
    try:
        K, wh, ww = (int(t) for t in lines[0][1].split())
    except ValueError:
        raise CodebookError(f"line {lines[0][0]}: header must be 'K window_h window_w'") from None
    pos = 1
    templates, seen = [], set()
    while pos < len(lines):
        no, line = lines[pos]
        head = line.split()
        if len(head) != 2 or head[0] != "template":
            raise CodebookError(f"line {no}: expected 'template <id>'")
        theta = int(head[1])
        if theta in seen:
            raise CodebookError(f"line {no}: duplicate template id {theta}")
        seen.add(theta)
        body = lines[pos + 1:pos + 1 + wh]
        if len(body) != wh or any(b[1].startswith("template") for b in body):
            raise CodebookError(f"template {theta}: dimension mismatch, expected {wh} rows")
        rows = []
        for bno, bline in body:
            toks = bline.split()
            if len(toks) != ww:
                raise CodebookError(f"line {bno}: dimension mismatch, expected {ww} columns")
            rows.append([int(t) for t in toks])
        templates.append(Template(theta, np.array(rows)))
        pos += 1 + wh
    if len(templates) != K:
        raise CodebookError(f"header announces {K} templates, found {len(templates)}")
    if sorted(seen) != list(range(1, K + 1)):
        raise CodebookError(f"template ids must be 1..{K}")
    templates.sort(key=lambda t: t.theta)
    return templates


def load_codebook(path=None) -> list:
    """Read a codebook file; with no path, the bundled 7x7 default."""
    if path is None:
        text = resources.files("taskexplore.data").joinpath("default_codebook.txt").read_text()
    else:
        text = Path(path).read_text()
    return parse_codebook(text)


def default_codebook() -> list:
    return load_codebook(None)
