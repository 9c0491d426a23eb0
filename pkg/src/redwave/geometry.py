"""Regions, cell grids, cell distances and geometric eccentricity.

The spatial substrate for everything else: convex bounded regions (squares
and disks), grid partitions into square cells of side ``l`` kept when they
overlap the region by at least ``gamma * l**2``, BFS distances over the
cover under 8-adjacency, and a lattice-sampled eccentricity.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, GeometryError

CellIndex = tuple[int, int]

# 8-adjacency offsets (side or corner contact)
_ADJ8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]

# Sub-sampling resolution for disk cell areas: 32 x 32 = 1024 points per cell.
_AREA_SAMPLES_PER_SIDE = 32
_KNIFE_EDGE_MARGIN = 2.0 / (_AREA_SAMPLES_PER_SIDE**2)


@dataclass(frozen=True)
class Region:
    """A convex bounded support region: an axis-aligned square or a disk.

    Squares span ``[0, L] x [0, L]``; disks are centered at the origin.
    """

    kind: str  # "square" | "disk"
    size: float  # side length L, or disk radius

    def __post_init__(self) -> None:
        if self.kind not in ("square", "disk"):
            raise ConfigurationError(f"unknown region kind {self.kind!r}")
        if self.size <= 0:
            raise ConfigurationError("region size must be positive")

    @staticmethod
    def square(side: float) -> "Region":
        return Region("square", side)

    @staticmethod
    def disk(radius: float) -> "Region":
        return Region("disk", radius)

    @property
    def diameter(self) -> float:
        if self.kind == "square":
            return self.size * math.sqrt(2)
        return 2.0 * self.size

    @property
    def area(self) -> float:
        if self.kind == "square":
            return self.size**2
        return math.pi * self.size**2

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the bounding box."""
        if self.kind == "square":
            return (0.0, 0.0, self.size, self.size)
        r = self.size
        return (-r, -r, r, r)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Vectorized membership test for an (n, 2) array (or a single point)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "square":
            ok = np.all((pts >= -tol) & (pts <= self.size + tol), axis=1)
        else:
            ok = np.einsum("ij,ij->i", pts, pts) <= (self.size + tol) ** 2
        if np.ndim(points) == 1:
            return bool(ok[0])
        return ok


@dataclass(frozen=True)
class CellGrid:
    """A gamma-area cell cover of a region with square cells of side ``side``.

    Cells are half-open: ``[i*side, (i+1)*side) x [j*side, (j+1)*side)``
    relative to ``origin``, so every boundary point has a unique owner cell.
    """

    region: Region
    side: float
    gamma: float
    origin: tuple[float, float]
    cover: frozenset[CellIndex]
    knife_edge: frozenset[CellIndex] = field(default_factory=frozenset)

    @cached_property
    def _cover_sorted(self) -> list[CellIndex]:
        return sorted(self.cover)

    @cached_property
    def _mask(self) -> tuple[np.ndarray, int, int]:
        """Boolean occupancy mask over the cover's index bounding box."""
        cols = [c for c, _ in self.cover]
        rows = [r for _, r in self.cover]
        c0, r0 = min(cols), min(rows)
        mask = np.zeros((max(cols) - c0 + 1, max(rows) - r0 + 1), dtype=bool)
        for c, r in self.cover:
            mask[c - c0, r - r0] = True
        return mask, c0, r0

    def in_cover(self, cols: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Vectorized cover membership for parallel column/row index arrays."""
        mask, c0, r0 = self._mask
        c = np.asarray(cols) - c0
        r = np.asarray(rows) - r0
        inside = (c >= 0) & (c < mask.shape[0]) & (r >= 0) & (r < mask.shape[1])
        out = np.zeros(inside.shape, dtype=bool)
        out[inside] = mask[c[inside], r[inside]]
        return out

    def cells_of(self, points: np.ndarray) -> np.ndarray:
        """Cell indices, shape (n, 2) int, for an (n, 2) position array.

        Pure floor-division: no cover membership check.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rel = (pts - np.asarray(self.origin)) / self.side
        return np.floor(rel).astype(np.int64)

    def is_full_rectangle(self) -> bool:
        mask, _, _ = self._mask
        return bool(mask.all())

    def cell_center(self, c: CellIndex) -> tuple[float, float]:
        ox, oy = self.origin
        return (ox + (c[0] + 0.5) * self.side, oy + (c[1] + 0.5) * self.side)


def build_cell_grid(region: Region, side: float, gamma: float) -> CellGrid:
    """Build the cell cover: cells with ``area(c & S) >= gamma * side**2``.

    Square regions get analytic intersection areas; disks are sub-sampled
    with a deterministic 1024-point lattice per cell.  Cells whose sampled
    area lies within the sampling tolerance of the threshold are flagged as
    knife-edge.
    """
    if side <= 0:
        raise ConfigurationError("cell side must be positive")
    if not (0 < gamma <= 1):
        raise ConfigurationError("gamma must be in (0, 1]")
    if side >= region.diameter:
        raise ConfigurationError(
            f"cell side {side} >= region diameter {region.diameter}: degenerate grid"
        )

    xmin, ymin, xmax, ymax = region.bounds
    origin = (xmin, ymin)
    ncols = int(math.ceil((xmax - xmin) / side - 1e-12))
    nrows = int(math.ceil((ymax - ymin) / side - 1e-12))
    threshold = gamma * side**2

    cover: set[CellIndex] = set()
    knife: set[CellIndex] = set()

    if region.kind == "square":
        L = region.size
        for i in range(ncols):
            w = min((i + 1) * side, L) - i * side
            if w <= 0:
                continue
            for j in range(nrows):
                h = min((j + 1) * side, L) - j * side
                if h <= 0:
                    continue
                # 1e-9 relative slack absorbs float noise on exact tilings
                if w * h >= threshold * (1 - 1e-9):
                    cover.add((i, j))
    else:
        m = _AREA_SAMPLES_PER_SIDE
        offs = (np.arange(m) + 0.5) / m * side
        ox, oy = np.meshgrid(offs, offs, indexing="ij")
        sample = np.column_stack([ox.ravel(), oy.ravel()])
        for i in range(ncols):
            for j in range(nrows):
                base = np.array([xmin + i * side, ymin + j * side])
                frac = np.count_nonzero(region.contains(sample + base)) / (m * m)
                area = frac * side**2
                if area >= threshold * (1 - 1e-9):
                    cover.add((i, j))
                    if abs(frac - gamma) <= _KNIFE_EDGE_MARGIN:
                        knife.add((i, j))
                elif abs(frac - gamma) <= _KNIFE_EDGE_MARGIN:
                    knife.add((i, j))

    if not cover:
        raise GeometryError("empty cell cover: gamma too large for this side length")
    grid = CellGrid(region, side, gamma, origin, frozenset(cover), frozenset(knife))
    if not _is_connected(grid):
        raise GeometryError("cell cover is not connected under 8-adjacency")
    return grid


def _is_connected(grid: CellGrid) -> bool:
    start = next(iter(grid.cover))
    seen = {start}
    queue = deque([start])
    while queue:
        c, r = queue.popleft()
        for dc, dr in _ADJ8:
            nb = (c + dc, r + dr)
            if nb in grid.cover and nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return len(seen) == len(grid.cover)


def cell_of(point, grid: CellGrid) -> CellIndex:
    """The (half-open) cell owning ``point``; errors if the point is outside S."""
    pt = np.asarray(point, dtype=float)
    if not grid.region.contains(pt):
        raise GeometryError(f"point {tuple(pt)} outside region")
    c = grid.cells_of(pt)[0]
    idx = (int(c[0]), int(c[1]))
    if idx not in grid.cover:
        raise GeometryError(f"cell {idx} of point {tuple(pt)} not in cover")
    return idx


def neighborhood(c: CellIndex, grid: CellGrid) -> set[CellIndex]:
    """N(c): the cell itself plus its covered side/corner neighbors."""
    if c not in grid.cover:
        raise GeometryError(f"cell {c} not in cover")
    out = {c}
    for dc, dr in _ADJ8:
        nb = (c[0] + dc, c[1] + dr)
        if nb in grid.cover:
            out.add(nb)
    return out


def bfs_distances(sources, grid: CellGrid) -> dict[CellIndex, int]:
    """Multi-source BFS over the cover under 8-adjacency."""
    dist: dict[CellIndex, int] = {}
    queue: deque[CellIndex] = deque()
    for s in sources:
        if s not in grid.cover:
            raise GeometryError(f"source cell {s} not in cover")
        if s not in dist:
            dist[s] = 0
            queue.append(s)
    while queue:
        cur = queue.popleft()
        d = dist[cur]
        for dc, dr in _ADJ8:
            nb = (cur[0] + dc, cur[1] + dr)
            if nb in grid.cover and nb not in dist:
                dist[nb] = d + 1
                queue.append(nb)
    return dist


def cell_distance(a: CellIndex, b: CellIndex, grid: CellGrid) -> int:
    """Shortest cell-path length between two covered cells."""
    if b not in grid.cover:
        raise GeometryError(f"cell {b} not in cover")
    dist = bfs_distances([a], grid)
    if b not in dist:
        raise GeometryError(f"cells {a} and {b} are disconnected in the cover")
    return dist[b]


def cell_diameter(grid: CellGrid) -> int:
    """Max pairwise cell-distance over the cover.

    Full rectangular covers reduce to the Chebyshev span; anything else
    falls back to exhaustive per-cell BFS.
    """
    if grid.is_full_rectangle():
        mask, _, _ = grid._mask
        return max(mask.shape[0], mask.shape[1]) - 1
    best = 0
    for c in grid._cover_sorted:
        dist = bfs_distances([c], grid)
        if len(dist) != len(grid.cover):
            raise GeometryError("disconnected cover")
        best = max(best, max(dist.values()))
    return best


def eccentricity(A, region: Region, lattice_points: int = 1000) -> float:
    """max over S of the distance to the nearest point of A.

    Lattice approximation: S is sampled on a deterministic grid with spacing
    at most ``diameter / lattice_points``, so the result underestimates the
    true eccentricity by at most one lattice spacing.
    """
    pts = np.atleast_2d(np.asarray(A, dtype=float))
    if pts.size == 0:
        raise GeometryError("empty source set")
    if not np.all(region.contains(pts, tol=1e-9)):
        raise GeometryError("source set not contained in region")

    spacing = region.diameter / lattice_points
    xmin, ymin, xmax, ymax = region.bounds
    xs = np.arange(xmin, xmax + spacing / 2, spacing)
    ys = np.arange(ymin, ymax + spacing / 2, spacing)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    lattice = np.column_stack([gx.ravel(), gy.ravel()])
    lattice = lattice[region.contains(lattice)]

    # chunked min-distance to A to bound peak memory
    best = np.full(len(lattice), np.inf)
    for a in pts:
        d = np.hypot(lattice[:, 0] - a[0], lattice[:, 1] - a[1])
        np.minimum(best, d, out=best)
    return float(best.max())
