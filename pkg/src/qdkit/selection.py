"""Parent selection operators and population scores (novelty, curiosity, counters)."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .containers import DeepGridContainer, deepgrid_select_within_cell
from .domain import Individual

WEIGHT_EPS = 1e-6


class ScoreKind(enum.Enum):
    CURIOSITY = "curiosity"
    NOVELTY = "novelty"
    INVERSE_COUNT = "inverse_count"
    FITNESS = "fitness"


@dataclass(frozen=True)
class CuriosityConfig:
    reward: float = 1.0
    penalty: float = 0.5
    floor: float = -10.0

    def __post_init__(self):
        if not (self.reward > 0 and self.penalty > 0):
            raise ValueError("curiosity reward and penalty must be > 0")
        if not self.floor <= 0:
            raise ValueError("curiosity floor must be <= 0")


def _pool(container) -> list[Individual]:
    pool = container.elites() if hasattr(container, "elites") else list(container)
    if not pool:
        raise ValueError("cannot select from an empty container")
    return pool


def _deepgrid_draw(container: DeepGridContainer, cells: np.ndarray, rng) -> list[Individual]:
    keys = sorted(container.cells)
    return [deepgrid_select_within_cell(container.cells[keys[c]], rng) for c in cells]


def select_uniform(container, batch_size: int, rng: np.random.Generator) -> list[Individual]:
    """Uniform draws with replacement over the elites.

    On a deep grid a cell is drawn uniformly and the parent is then drawn
    within that cell with rank-proportional probability.
    """
    pool = _pool(container)
    idx = rng.integers(len(pool), size=batch_size)
    if isinstance(container, DeepGridContainer):
        parents = _deepgrid_draw(container, idx, rng)
    else:
        parents = [pool[i] for i in idx]
    for p in parents:
        p.selection_count += 1
    return parents


def score_weights(pool: list[Individual], kind: ScoreKind) -> np.ndarray:
    """Non-negative selection weights, ordered like the underlying scores."""
    if kind is ScoreKind.INVERSE_COUNT:
        return np.array([1.0 / (1 + p.selection_count + p.offspring_added) for p in pool])
    attr = {ScoreKind.CURIOSITY: "curiosity", ScoreKind.NOVELTY: "novelty",
            ScoreKind.FITNESS: "fitness"}[kind]
    s = np.array([getattr(p, attr) for p in pool], dtype=float)
    return np.maximum(s - s.min(), WEIGHT_EPS)


def select_weighted(container, kind: ScoreKind, batch_size: int,
                    rng: np.random.Generator) -> list[Individual]:
    pool = _pool(container)
    w = score_weights(pool, ScoreKind(kind))
    idx = rng.choice(len(pool), size=batch_size, p=w / w.sum())
    if isinstance(container, DeepGridContainer):
        parents = _deepgrid_draw(container, idx, rng)
    else:
        parents = [pool[i] for i in idx]
    for p in parents:
        p.selection_count += 1
    return parents


def novelty_score(descriptor, reference, k: int, self_index: Optional[int] = None) -> float:
    """Mean distance to the ``min(k, |reference|)`` nearest reference descriptors.

    ``self_index`` marks the row of ``reference`` that is the query itself;
    it is excluded. Other entries at the same position count as distance 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    R = np.atleast_2d(np.asarray(reference, dtype=float))
    if self_index is not None:
        R = np.delete(R, self_index, axis=0)
    if R.size == 0:
        raise ValueError("novelty needs a non-empty reference set")
    d = np.sort(np.linalg.norm(R - np.asarray(descriptor, dtype=float), axis=1))
    return float(d[:min(k, len(d))].mean())


def curiosity_update(parent: Individual, added: bool, cfg: CuriosityConfig = CuriosityConfig()) -> float:
    if added:
        parent.curiosity += cfg.reward
        parent.offspring_added += 1
    else:
        parent.curiosity = max(parent.curiosity - cfg.penalty, cfg.floor)
    return parent.curiosity


def refresh_novelty(container, k: int = 15, diameter: Optional[float] = None) -> None:
    """Recompute every stored elite's novelty against the current elite set.

    A solitary elite gets the descriptor-space diagonal (``diameter``, or the
    container bounds' diagonal) as its finite "maximally novel" value.
    """
    pool = container.elites()
    if not pool:
        return
    if len(pool) == 1:
        if diameter is None:
            bounds = getattr(container, "bounds", None) or getattr(getattr(container, "spec", None), "bounds", None)
            if bounds is None:
                raise ValueError("solitary elite needs a descriptor-space diameter")
            diameter = bounds.diagonal
        pool[0].novelty = float(diameter)
        return
    B = np.array([p.descriptor for p in pool])
    kk = min(k, len(pool) - 1)
    # query one extra neighbour and drop each point's own row
    dist, idx = cKDTree(B).query(B, k=kk + 1)
    dist = np.atleast_2d(dist.reshape(len(pool), kk + 1))
    idx = np.atleast_2d(idx.reshape(len(pool), kk + 1))
    for i, p in enumerate(pool):
        row = dist[i][idx[i] != i]
        p.novelty = float(row[:kk].mean())
