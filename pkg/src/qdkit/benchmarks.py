"""Desk-scale QD benchmarks, a noisy wrapper and an exhaustive lattice oracle."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .domain import Bounds, EvalCounter, NoiseModel, ObjectiveSpec, evaluate_batch

RASTRIGIN_HALF_WIDTH = 5.12
MAX_LATTICE_POINTS = 10_000_000


def arm_forward_kinematics(angles, lengths):
    """End-effector ``(x, y)`` of a planar chain; angles accumulate along the chain.

    Accepts a single angle vector or an ``(N, m)`` batch.
    """
    a = np.asarray(angles, dtype=float)
    L = np.asarray(lengths, dtype=float)
    if a.shape[-1] != L.shape[-1]:
        raise ValueError(f"{a.shape[-1]} angles for {L.shape[-1]} links")
    cum = np.cumsum(a, axis=-1)
    return np.stack([np.sum(L * np.cos(cum), axis=-1), np.sum(L * np.sin(cum), axis=-1)], axis=-1)


@dataclass(frozen=True)
class ArmTask:
    """Planar arm repertoire: reach every point, with the smoothest posture.

    Descriptor is the end effector mapped from ``[-1, 1]^2`` to ``[0, 1]^2``;
    fitness is minus the (population) standard deviation of the joint angles.
    """

    joints: int = 8
    lengths: Optional[tuple] = None

    def link_lengths(self) -> np.ndarray:
        if self.lengths is None:
            return np.full(self.joints, 1.0 / self.joints)
        L = np.asarray(self.lengths, dtype=float)
        if L.shape != (self.joints,) or np.any(L <= 0):
            raise ValueError("link lengths must be positive, one per joint")
        return L

    def evaluate_batch(self, angles):
        a = np.atleast_2d(np.asarray(angles, dtype=float))
        xy = arm_forward_kinematics(a, self.link_lengths())
        return -np.std(a, axis=1), (xy + 1.0) / 2.0

    def evaluate(self, angles):
        f, b = self.evaluate_batch(angles)
        return float(f[0]), b[0]

    def descriptor(self, angles):
        return self.evaluate_batch(angles)[1]

    def objective(self) -> ObjectiveSpec:
        return ObjectiveSpec(
            n=self.joints, genotype_bounds=Bounds.uniform(self.joints, -np.pi, np.pi),
            d=2, descriptor_bounds=Bounds.uniform(2, 0.0, 1.0),
            evaluator=self.evaluate, batch_evaluator=self.evaluate_batch,
            descriptor_fn=self.descriptor, fitness_floor=-np.pi, name="arm")


def arm_objective(angles, lengths=None):
    angles = np.asarray(angles, dtype=float)
    task = ArmTask(joints=len(angles), lengths=None if lengths is None else tuple(lengths))
    return task.evaluate(angles)


def rastrigin(x):
    """Rastrigin function on the last axis; 0 at the origin, >= 0 everywhere."""
    x = np.asarray(x, dtype=float)
    return 10.0 * x.shape[-1] + np.sum(x * x - 10.0 * np.cos(2 * np.pi * x), axis=-1)


@dataclass(frozen=True)
class IlluminationTask:
    """Multimodal illumination task on ``[0, 1]^n``.

    The descriptor is the first two genotype coordinates; the remaining
    ``n - 2`` coordinates only affect fitness, which is minus Rastrigin on
    the rescaled genotype (peak 0 at the box centre).
    """

    n: int = 6

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("illumination task needs n >= 2")

    def evaluate_batch(self, theta):
        t = np.atleast_2d(np.asarray(theta, dtype=float))
        s = 2 * RASTRIGIN_HALF_WIDTH
        return -rastrigin(s * t - s / 2), t[:, :2].copy()

    def evaluate(self, theta):
        f, b = self.evaluate_batch(theta)
        return float(f[0]), b[0]

    def descriptor(self, theta):
        return np.atleast_2d(np.asarray(theta, dtype=float))[:, :2].copy()

    @property
    def fitness_floor(self) -> float:
        # each Rastrigin term is at most x^2 + 20 on the domain
        return -self.n * (RASTRIGIN_HALF_WIDTH ** 2 + 20.0)

    def objective(self) -> ObjectiveSpec:
        return ObjectiveSpec(
            n=self.n, genotype_bounds=Bounds.uniform(self.n, 0.0, 1.0),
            d=2, descriptor_bounds=Bounds.uniform(2, 0.0, 1.0),
            evaluator=self.evaluate, batch_evaluator=self.evaluate_batch,
            descriptor_fn=self.descriptor, fitness_floor=self.fitness_floor, name="illum")


def illumination_objective(theta):
    theta = np.asarray(theta, dtype=float)
    return IlluminationTask(n=len(theta)).evaluate(theta)


def noisy_wrapper(objective: ObjectiveSpec, sigma_f: float, sigma_b: float, seed: int) -> ObjectiveSpec:
    """Add independent Gaussian noise to fitness and to each descriptor dimension.

    The noise for an evaluation is keyed by ``(seed, eval_index)``, so results
    do not depend on batching or evaluation parallelism. Noisy descriptors are
    clamped back into the feature bounds by ``evaluate_batch``.
    """
    if sigma_f < 0 or sigma_b < 0:
        raise ValueError("noise levels must be >= 0")
    if sigma_f == 0 and sigma_b == 0:
        return objective
    return replace(objective, noisy=True, noise=NoiseModel(float(sigma_f), float(sigma_b), int(seed)),
                   name=f"{objective.name}+noise")


def lattice_points(bounds: Bounds, points_per_dim: Sequence[int]) -> np.ndarray:
    """Regular lattice including both box edges, last coordinate varying fastest."""
    pts = [int(p) for p in np.broadcast_to(points_per_dim, (bounds.dim,))]
    if any(p < 1 for p in pts):
        raise ValueError("need at least one lattice point per dimension")
    total = int(np.prod(pts, dtype=object))
    if total > MAX_LATTICE_POINTS:
        raise ValueError(f"lattice of {total} points exceeds the {MAX_LATTICE_POINTS} budget")
    axes = [np.array([(lo + hi) / 2]) if p == 1 else np.linspace(lo, hi, p)
            for lo, hi, p in zip(bounds.lo, bounds.hi, pts)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def exhaustive_oracle(objective: ObjectiveSpec, points_per_dim, container, points=None,
                      chunk: int = 65536):
    """Evaluate every lattice point and stream it through ``container.add``."""
    X = lattice_points(objective.genotype_bounds, points_per_dim) if points is None else np.asarray(points, float)
    if len(X) > MAX_LATTICE_POINTS:
        raise ValueError(f"lattice of {len(X)} points exceeds the {MAX_LATTICE_POINTS} budget")
    counter = EvalCounter()
    for start in range(0, len(X), chunk):
        for ind in evaluate_batch(objective, X[start:start + chunk], counter):
            container.add(ind)
    return container
