"""QD metrics, archive/metrics CSV export and PPM heatmaps."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .containers import DeepGridContainer, GridSpec, linear_index
from .domain import Individual

CELL_PX = 8
EMPTY_RGB = (255, 0, 0)


def _elites(container) -> list:
    return container.elites() if hasattr(container, "elites") else list(container)


def coverage(container, n_cells: Optional[int] = None) -> float:
    """Fraction of filled cells. Needs a container with a finite cell count."""
    total = n_cells if n_cells is not None else getattr(container, "n_cells", None)
    if not total:
        raise ValueError("coverage needs a finite cell count; distance archives report entry counts")
    filled = container.filled_cells() if hasattr(container, "filled_cells") else len(_elites(container))
    return filled / total


def qd_score(container, offset: Optional[float] = None) -> float:
    """Sum of elite fitnesses; with ``offset`` (a fitness floor), sum of ``f - offset``."""
    f = [e.fitness for e in _elites(container)]
    if offset is None:
        return math.fsum(f)
    return math.fsum(v - offset for v in f)


def knn_density(container, k: int = 15) -> float:
    """Mean over entries of the mean distance to their ``k`` nearest fellows."""
    B = np.array([e.descriptor for e in _elites(container)], dtype=float)
    if len(B) < 2:
        raise ValueError("knn density needs at least two entries")
    kk = min(k, len(B) - 1)
    dist, idx = cKDTree(B).query(B, k=kk + 1)
    vals = []
    for i in range(len(B)):
        row = dist[i][idx[i] != i][:kk]
        vals.append(row.mean())
    return float(np.mean(vals))


@dataclass
class MetricsRecord:
    iteration: int
    evaluations: int
    coverage: float
    qd_score: float
    qd_score_offset: float
    max_fitness: float
    mean_fitness: float
    size: int
    knn_density: float = float("nan")


METRICS_COLUMNS = [f.name for f in fields(MetricsRecord)]


def measure(container, iteration: int, evaluations: int, fitness_floor: Optional[float] = None,
            density_k: Optional[int] = None) -> MetricsRecord:
    el = _elites(container)
    f = [e.fitness for e in el]
    n_cells = getattr(container, "n_cells", None)
    cov = coverage(container) if n_cells else float("nan")
    dens = float("nan")
    if density_k and len(el) >= 2:
        dens = knn_density(el, density_k)
    return MetricsRecord(
        iteration=iteration, evaluations=evaluations, coverage=cov,
        qd_score=math.fsum(f),
        qd_score_offset=qd_score(el, fitness_floor) if fitness_floor is not None else float("nan"),
        max_fitness=max(f) if f else float("nan"),
        mean_fitness=math.fsum(f) / len(f) if f else float("nan"),
        size=len(el), knn_density=dens)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _open_for_write(path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export_metrics_csv(log, path) -> None:
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for rec in log:
            row = asdict(rec)
            w.writerow([_fmt(row[c]) for c in METRICS_COLUMNS])


def read_metrics_csv(path) -> list[MetricsRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append(MetricsRecord(**{c: (int(r[c]) if c in ("iteration", "evaluations", "size") else float(r[c]))
                                    for c in METRICS_COLUMNS}))
    return out


def archive_header(d: int, n: int, coord_dim: int, deep: bool = False) -> list[str]:
    cols = ["cell_id"] + [f"c{j}" for j in range(coord_dim)] + ["fitness"]
    cols += [f"b{j}" for j in range(d)] + [f"g{j}" for j in range(n)]
    if deep:
        cols.append("is_cell_best")
    return cols


def export_archive_csv(container, path, d: Optional[int] = None, n: Optional[int] = None) -> None:
    """One row per elite (deep grid: per stored individual plus ``is_cell_best``).

    Grid rows carry the integer cell coordinates, CVT rows the centroid and
    distance-archive rows the entry's own descriptor. Reals are written with
    17 significant digits.
    """
    deep = isinstance(container, DeepGridContainer)
    if deep:
        rows = container.members()
    else:
        rows = [(c, ind, True) for c, ind in container.items()]
    if d is None or n is None:
        if not rows:
            raise ValueError("empty archive: pass descriptor and genotype dimensions explicitly")
        d = len(rows[0][1].descriptor)
        n = len(rows[0][1].genotype)
    if hasattr(container, "spec"):
        coord_dim = container.spec.dim
    elif hasattr(container, "centroids"):
        coord_dim = container.centroids.shape[1]
    else:
        coord_dim = d
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(archive_header(d, n, coord_dim, deep))
        for cell, ind, best in rows:
            line = [str(int(cell))] + [_fmt(v) for v in container.cell_coords(cell)]
            line += [_fmt(ind.fitness)] + [_fmt(v) for v in ind.descriptor] + [_fmt(v) for v in ind.genotype]
            if deep:
                line.append(_fmt(best))
            w.writerow(line)


class SchemaError(ValueError):
    pass


@dataclass
class ArchiveTable:
    """Archive rows re-imported from CSV."""

    cell_id: np.ndarray
    coords: np.ndarray
    fitness: np.ndarray
    descriptor: np.ndarray
    genotype: np.ndarray
    is_cell_best: np.ndarray

    def __len__(self):
        return len(self.cell_id)

    def elites(self) -> list[Individual]:
        return [Individual(genotype=self.genotype[i].copy(), fitness=float(self.fitness[i]),
                           descriptor=self.descriptor[i].copy())
                for i in range(len(self)) if self.is_cell_best[i]]

    def filled_cells(self) -> int:
        return int(np.count_nonzero(self.is_cell_best))

    def best_by_cell(self) -> dict:
        return {int(c): float(f) for c, f, b in zip(self.cell_id, self.fitness, self.is_cell_best) if b}


def read_archive_csv(path) -> ArchiveTable:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        rows = list(reader)
    header = [h.strip() for h in header]
    if not header or header[0] != "cell_id":
        raise SchemaError(f"{path}: first column must be 'cell_id', got {header[:1]}")
    if "fitness" not in header:
        raise SchemaError(f"{path}: missing column 'fitness'")
    fi = header.index("fitness")
    coord_cols = header[1:fi]
    rest = header[fi + 1:]
    deep = bool(rest) and rest[-1] == "is_cell_best"
    if deep:
        rest = rest[:-1]
    b_cols = [h for h in rest if h.startswith("b")]
    g_cols = [h for h in rest if h.startswith("g")]
    expected = archive_header(len(b_cols), len(g_cols), len(coord_cols), deep)
    for j, (got, want) in enumerate(zip(header, expected)):
        if got != want:
            raise SchemaError(f"{path}: column {j} is '{got}', expected '{want}'")
    if len(header) != len(expected):
        raise SchemaError(f"{path}: header has {len(header)} columns, expected {len(expected)}")
    width = len(header)
    for lineno, r in enumerate(rows, start=2):
        if len(r) != width:
            col = header[len(r)] if len(r) < width else f"extra column {len(r)}"
            raise SchemaError(f"{path}:{lineno}: {len(r)} fields, expected {width} (at column '{col}')")
    nc, d, n = len(coord_cols), len(b_cols), len(g_cols)
    A = np.array([[float(v) for v in r] for r in rows], dtype=float).reshape(len(rows), width)
    return ArchiveTable(
        cell_id=A[:, 0].astype(np.int64), coords=A[:, 1:1 + nc], fitness=A[:, fi],
        descriptor=A[:, fi + 1:fi + 1 + d], genotype=A[:, fi + 1 + d:fi + 1 + d + n],
        is_cell_best=(A[:, -1] != 0) if deep else np.ones(len(rows), dtype=bool))


def render_heatmap(source, spec: GridSpec, path, cell_px: int = CELL_PX) -> None:
    """Write a 2-D grid archive as a plain-text (P3) PPM.

    Fitness maps linearly from [min, max] elite fitness onto a grey ramp
    (uniform fitness renders white); empty cells get ``EMPTY_RGB``. The first
    descriptor dimension runs left to right, the second bottom to top.
    ``source`` is a grid container or an ``ArchiveTable``.
    """
    if spec.dim != 2:
        raise ValueError(f"heatmaps need a 2-D grid, got {spec.dim}-D")
    n1, n2 = spec.bins
    best: dict = {}
    if isinstance(source, ArchiveTable):
        for c, f, b in zip(source.cell_id, source.fitness, source.is_cell_best):
            if b:
                best[int(c)] = float(f)
    else:
        if getattr(source, "spec", None) is None or source.spec.bins != spec.bins:
            raise ValueError("heatmaps need a 2-D grid container matching the spec")
        best = {c: e.fitness for c, e in source.items()}
    vals = list(best.values())
    fmin, fmax = (min(vals), max(vals)) if vals else (0.0, 0.0)
    cell_rgb = {}
    for c, f in best.items():
        level = 255 if fmax == fmin else int(round(255 * (f - fmin) / (fmax - fmin)))
        cell_rgb[c] = (level, level, level)
    lines = ["P3", f"{n1 * cell_px} {n2 * cell_px}", "255"]
    for row in range(n2 * cell_px):
        j = n2 - 1 - row // cell_px
        px = []
        for i in range(n1):
            rgb = cell_rgb.get(linear_index((i, j), spec.bins), EMPTY_RGB)
            px.extend([f"{rgb[0]} {rgb[1]} {rgb[2]}"] * cell_px)
        lines.append(" ".join(px))
    with _open_for_write(path) as fh:
        fh.write("\n".join(lines) + "\n")

