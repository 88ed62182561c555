"""Elite containers: N-d grid, CVT archive, distance-based archive and deep grid.

Every container exposes ``add(individual) -> bool`` (True iff the content
changed) and ``elites()``. Cells are stored under row-major linear integer
indices; ``cell_coords`` gives the tuple form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .domain import Bounds, Individual


@dataclass(frozen=True)
class GridSpec:
    bins: tuple
    bounds: Bounds

    def __init__(self, bins: Sequence[int], bounds: Bounds):
        bins = tuple(int(b) for b in bins)
        if any(b < 1 for b in bins):
            raise ValueError(f"bin counts must be >= 1, got {bins}")
        if len(bins) != bounds.dim:
            raise ValueError(f"{len(bins)} bin counts for a {bounds.dim}-d descriptor space")
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "bounds", bounds)

    @property
    def dim(self) -> int:
        return len(self.bins)


_INT64_MAX = np.iinfo(np.int64).max


def grid_cell_count(spec: GridSpec) -> int:
    """Total cell count, raising OverflowError beyond a signed 64-bit integer."""
    total = math.prod(spec.bins)
    if total > _INT64_MAX:
        raise OverflowError(f"grid with bins {spec.bins} has {total} cells, beyond int64")
    return total


def grid_cell_index(descriptor, spec: GridSpec) -> tuple:
    """Per-dimension bin of ``descriptor``; the top edge maps into the last bin."""
    b = np.asarray(descriptor, dtype=float)
    lo, hi = spec.bounds.lo, spec.bounds.hi
    if b.shape != lo.shape:
        raise ValueError(f"descriptor of shape {b.shape} for a {spec.dim}-d grid")
    if np.any(b < lo) or np.any(b > hi):
        raise ValueError(f"descriptor {b.tolist()} lies outside the grid bounds")
    n = np.asarray(spec.bins)
    idx = np.floor(n * (b - lo) / (hi - lo)).astype(np.int64)
    return tuple(int(i) for i in np.minimum(idx, n - 1))


def grid_cell_indices(descriptors, spec: GridSpec) -> np.ndarray:
    """Vectorized ``grid_cell_index`` for an ``(N, d)`` array (no bounds check)."""
    B = np.asarray(descriptors, dtype=float)
    lo, hi = spec.bounds.lo, spec.bounds.hi
    n = np.asarray(spec.bins)
    idx = np.floor(n * (B - lo) / (hi - lo)).astype(np.int64)
    return np.clip(idx, 0, n - 1)


def linear_index(coords, bins) -> int:
    return int(np.ravel_multi_index(tuple(coords), tuple(bins)))


def unravel_index(index: int, bins) -> tuple:
    return tuple(int(i) for i in np.unravel_index(int(index), tuple(bins)))


class Container:
    """Common surface; subclasses define ``cell_of`` and ``add``."""

    kind = "base"

    def __len__(self):
        return len(self.elites())

    def elites(self) -> list[Individual]:
        raise NotImplementedError

    @property
    def n_cells(self) -> Optional[int]:
        """Finite cell count, or None for containers without fixed cells."""
        return None

    def filled_cells(self) -> int:
        return len(self.elites())


class _SingleEliteCells(Container):
    def __init__(self):
        self.cells: dict[int, Individual] = {}

    def cell_of(self, descriptor) -> int:
        raise NotImplementedError

    def add(self, candidate: Individual) -> bool:
        c = self.cell_of(candidate.descriptor)
        incumbent = self.cells.get(c)
        if incumbent is None or incumbent.fitness < candidate.fitness:
            self.cells[c] = candidate
            return True
        return False

    def elites(self) -> list[Individual]:
        return [self.cells[c] for c in sorted(self.cells)]

    def items(self):
        return [(c, self.cells[c]) for c in sorted(self.cells)]

    def filled_cells(self) -> int:
        return len(self.cells)


class GridContainer(_SingleEliteCells):
    kind = "grid"

    def __init__(self, spec: GridSpec):
        super().__init__()
        self.spec = spec
        self._n_cells = grid_cell_count(spec)

    @property
    def n_cells(self) -> int:
        return self._n_cells

    def cell_of(self, descriptor) -> int:
        return linear_index(grid_cell_index(descriptor, self.spec), self.spec.bins)

    def cell_coords(self, cell: int) -> tuple:
        return unravel_index(cell, self.spec.bins)


class CVTContainer(_SingleEliteCells):
    kind = "cvt"

    def __init__(self, centroids, bounds: Optional[Bounds] = None):
        super().__init__()
        c = getattr(centroids, "centroids", centroids)
        self.centroids = np.asarray(c, dtype=float)
        if self.centroids.ndim != 2 or len(self.centroids) == 0:
            raise ValueError("CVT container needs a non-empty (k, d) centroid array")
        self.bounds = bounds if bounds is not None else getattr(centroids, "bounds", None)

    @property
    def n_cells(self) -> int:
        return len(self.centroids)

    def cell_of(self, descriptor) -> int:
        from .cvt import nearest_centroid
        return nearest_centroid(descriptor, self.centroids)

    def cell_coords(self, cell: int) -> tuple:
        return tuple(float(v) for v in self.centroids[cell])


class DistanceArchive(Container):
    """Unstructured archive with a novelty threshold ``l`` in descriptor space.

    A candidate enters if it is at least ``l`` away from every entry. Otherwise
    it may replace its nearest entry when strictly fitter, provided it also
    stays at least ``l`` from the second-nearest entry, which limits erosion of
    outlying entries.
    """

    kind = "archive"

    def __init__(self, threshold: float, bounds: Optional[Bounds] = None):
        if not threshold > 0:
            raise ValueError("distance threshold must be > 0")
        self.threshold = float(threshold)
        self.bounds = bounds
        self.entries: list[Individual] = []
        self._desc = np.empty((0, 0))

    def _refresh(self):
        self._desc = np.array([e.descriptor for e in self.entries]) if self.entries else np.empty((0, 0))

    def add(self, candidate: Individual) -> bool:
        if not self.entries:
            self.entries.append(candidate)
            self._refresh()
            return True
        dist = np.linalg.norm(self._desc - candidate.descriptor, axis=1)
        order = np.argsort(dist, kind="stable")
        nearest = int(order[0])
        if dist[nearest] >= self.threshold:
            self.entries.append(candidate)
            self._desc = np.vstack([self._desc, candidate.descriptor])
            return True
        if candidate.fitness > self.entries[nearest].fitness:
            second_ok = len(order) < 2 or dist[order[1]] >= self.threshold
            if second_ok:
                self.entries[nearest] = candidate
                self._desc[nearest] = candidate.descriptor
                return True
        return False

    def elites(self) -> list[Individual]:
        return list(self.entries)

    def items(self):
        return list(enumerate(self.entries))

    def cell_coords(self, cell: int) -> tuple:
        return tuple(float(v) for v in self.entries[cell].descriptor)


def deepgrid_select_within_cell(cell: Sequence[Individual], rng: np.random.Generator) -> Individual:
    """Draw one member with probability proportional to its fitness rank (worst = 1)."""
    if len(cell) == 0:
        raise ValueError("cannot select from an empty cell")
    if len(cell) == 1:
        return cell[0]
    fit = np.array([ind.fitness for ind in cell])
    order = np.argsort(fit, kind="stable")
    ranks = np.empty(len(cell))
    ranks[order] = np.arange(1, len(cell) + 1)
    return cell[int(rng.choice(len(cell), p=ranks / ranks.sum()))]


class DeepGridContainer(GridContainer):
    """Grid holding up to ``depth`` individuals per cell.

    A full cell takes every newcomer by overwriting a uniformly random member,
    so the stored best fitness of a cell can go down over time.
    """

    kind = "deepgrid"

    def __init__(self, spec: GridSpec, depth: int, rng: np.random.Generator):
        super().__init__(spec)
        if depth < 1:
            raise ValueError("deep-grid depth must be >= 1")
        self.depth = int(depth)
        self.rng = rng
        self.cells: dict[int, list[Individual]] = {}

    def add(self, candidate: Individual) -> bool:
        c = self.cell_of(candidate.descriptor)
        members = self.cells.setdefault(c, [])
        if len(members) < self.depth:
            members.append(candidate)
        else:
            members[int(self.rng.integers(self.depth))] = candidate
        return True

    def cell_best(self, cell: int) -> Individual:
        members = self.cells[cell]
        # first maximum in storage order
        return members[int(np.argmax([m.fitness for m in members]))]

    def elites(self) -> list[Individual]:
        return [self.cell_best(c) for c in sorted(self.cells)]

    def items(self):
        return [(c, self.cell_best(c)) for c in sorted(self.cells)]

    def members(self):
        """All stored individuals as ``(cell, individual, is_cell_best)``."""
        out = []
        for c in sorted(self.cells):
            best = self.cell_best(c)
            out.extend((c, m, m is best) for m in self.cells[c])
        return out

    def filled_cells(self) -> int:
        return len(self.cells)


def make_grid(bins, lo, hi) -> GridContainer:
    bins = tuple(bins)
    return GridContainer(GridSpec(bins, Bounds(np.broadcast_to(lo, len(bins)), np.broadcast_to(hi, len(bins)))))
