"""Offspring generation: isotropic Gaussian, directional (line) and blend variation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .domain import Bounds, clamp_to_bounds

OPERATORS = ("iso", "directional", "crossover")


@dataclass(frozen=True)
class VariationConfig:
    """Static variation settings.

    ``sigma1`` may be a scalar or a per-dimension vector; ``None`` means
    ``0.01 * (hi - lo)``. ``mix`` gives the probability of each operator in
    ``OPERATORS`` order.
    """

    sigma1: Optional[float | Sequence[float]] = None
    sigma2: float = 0.2
    mix: tuple = (0.5, 0.5, 0.0)
    bound_policy: str = "clamp"

    def __post_init__(self):
        mix = tuple(float(m) for m in self.mix)
        if len(mix) != len(OPERATORS) or any(m < 0 for m in mix) or abs(sum(mix) - 1) > 1e-9:
            raise ValueError(f"operator mix must be {len(OPERATORS)} non-negative weights summing to 1, got {mix}")
        object.__setattr__(self, "mix", mix)
        if self.sigma2 < 0 or not np.isfinite(self.sigma2):
            raise ValueError("sigma2 must be finite and >= 0")
        if self.sigma1 is not None:
            s1 = np.asarray(self.sigma1, dtype=float)
            if np.any(s1 < 0) or not np.all(np.isfinite(s1)):
                raise ValueError("sigma1 must be finite and >= 0")
        if self.bound_policy != "clamp":
            raise ValueError(f"unsupported bound policy {self.bound_policy!r}")

    def resolved_sigma1(self, bounds: Bounds) -> np.ndarray:
        if self.sigma1 is None:
            return 0.01 * bounds.span
        return np.broadcast_to(np.asarray(self.sigma1, dtype=float), (bounds.dim,))


def _check_same(a, b):
    if a.shape != b.shape:
        raise ValueError(f"parent dimension mismatch: {a.shape} vs {b.shape}")


def mutate_iso(parent, sigma1, rng: np.random.Generator, bounds: Bounds) -> np.ndarray:
    parent = np.asarray(parent, dtype=float)
    return clamp_to_bounds(parent + sigma1 * rng.standard_normal(parent.shape), bounds)


def variation_directional(parent_i, parent_j, sigma1, sigma2, rng: np.random.Generator,
                          bounds: Bounds) -> np.ndarray:
    """``theta_i + sigma1 N(0, I) + sigma2 (theta_j - theta_i) N(0, 1)``, clamped.

    The isotropic draw comes first, so with ``parent_i == parent_j`` the child
    equals ``mutate_iso`` under the same generator state.
    """
    a = np.asarray(parent_i, dtype=float)
    b = np.asarray(parent_j, dtype=float)
    _check_same(a, b)
    iso = rng.standard_normal(a.shape)
    line = rng.standard_normal()
    return clamp_to_bounds(a + sigma1 * iso + sigma2 * (b - a) * line, bounds)


def crossover_blend(parent_i, parent_j, rng: np.random.Generator, bounds: Bounds,
                    alpha: Optional[float] = None) -> np.ndarray:
    """Convex blend ``alpha theta_i + (1 - alpha) theta_j`` with one shared alpha."""
    a = np.asarray(parent_i, dtype=float)
    b = np.asarray(parent_j, dtype=float)
    _check_same(a, b)
    if alpha is None:
        alpha = rng.random()
    return clamp_to_bounds(alpha * a + (1 - alpha) * b, bounds)


def vary(parents, config: VariationConfig, rng: np.random.Generator, bounds: Bounds,
         pool=None) -> np.ndarray:
    """One offspring per parent, each with an operator drawn from ``config.mix``.

    ``parents`` and ``pool`` hold genotype arrays or Individuals. Directional
    and crossover offspring use a co-parent drawn uniformly from ``pool``
    (default: ``parents``). Every random quantity is drawn batch-wise in a
    fixed order, so the batch is a deterministic function of the generator.
    """
    P = np.array([getattr(p, "genotype", p) for p in parents], dtype=float)
    if P.ndim != 2 or P.shape[1] != bounds.dim:
        raise ValueError(f"parents must form an (N, {bounds.dim}) array")
    Q = P if pool is None else np.array([getattr(p, "genotype", p) for p in pool], dtype=float)
    _check_same(P[0], Q[0])
    m = len(P)
    sigma1 = config.resolved_sigma1(bounds)
    ops = rng.choice(len(OPERATORS), size=m, p=config.mix)
    co = Q[rng.integers(len(Q), size=m)]
    iso = rng.standard_normal(P.shape)
    line = rng.standard_normal(m)[:, None]
    alpha = rng.random(m)[:, None]

    out = P + sigma1 * iso
    d = ops == 1
    out[d] += config.sigma2 * (co[d] - P[d]) * line[d]
    c = ops == 2
    out[c] = alpha[c] * P[c] + (1 - alpha[c]) * co[c]
    return clamp_to_bounds(out, bounds)
