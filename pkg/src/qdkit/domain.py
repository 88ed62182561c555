"""Core value types, the objective contract, bounds handling and RNG streams."""
from __future__ import annotations

import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Stream ids, one per consumer of randomness.
STREAM_INIT = 0
STREAM_SELECTION = 1
STREAM_VARIATION = 2
STREAM_NOISE = 3
STREAM_CONTAINER = 4
STREAM_SURROGATE = 5
STREAM_CVT = 6


def make_rng(seed: int, stream: int | str = 0) -> np.random.Generator:
    """Return a counter-based (Philox) generator for ``(seed, stream)``.

    Distinct streams are statistically independent, and a given
    ``(seed, stream)`` pair replays the same draws on every call sequence.
    String stream names are hashed to a stable integer id.
    """
    if isinstance(stream, str):
        stream = zlib.crc32(stream.encode("utf8"))
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return make_rng(self.seed, self.stream)


class Bounds:
    """Axis-aligned box ``[lo_i, hi_i]``."""

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError(f"bounds shape mismatch: {lo.shape} vs {hi.shape}")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ValueError("bounds must be finite")
        if not np.all(lo < hi):
            raise ValueError(f"bounds not well-ordered: lo={lo}, hi={hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        self.lo = lo
        self.hi = hi

    @classmethod
    def uniform(cls, dim: int, lo: float, hi: float) -> "Bounds":
        return cls(np.full(dim, lo), np.full(dim, hi))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def span(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.span))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.lo + rng.random((size, self.dim)) * self.span

    def __eq__(self, other):
        return (isinstance(other, Bounds) and np.array_equal(self.lo, other.lo)
                and np.array_equal(self.hi, other.hi))

    def __repr__(self):
        return f"Bounds(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


def clamp_to_bounds(values, bounds: Bounds) -> np.ndarray:
    """Project ``values`` (a vector or a batch of row vectors) onto ``bounds``."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != bounds.dim:
        raise ValueError(
            f"dimension mismatch: got {values.shape[-1]} components, bounds have {bounds.dim}")
    return np.minimum(np.maximum(values, bounds.lo), bounds.hi)


@dataclass(eq=False)
class Individual:
    genotype: np.ndarray
    fitness: float
    descriptor: np.ndarray
    eval_index: int = -1
    curiosity: float = 0.0
    novelty: float = 0.0
    selection_count: int = 0
    offspring_added: int = 0

    def __repr__(self):
        return (f"Individual(fitness={self.fitness:.6g}, descriptor={np.round(self.descriptor, 4).tolist()}, "
                f"eval_index={self.eval_index})")


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian noise keyed by evaluation index."""

    sigma_f: float
    sigma_b: float
    seed: int

    def draw(self, eval_index: int, d: int) -> Tuple[float, np.ndarray]:
        # A fresh Philox stream per evaluation index: the draw never depends on
        # batching, thread scheduling or what other evaluations did.
        rng = np.random.Generator(np.random.Philox(
            key=[int(self.seed) & 0xFFFFFFFFFFFFFFFF, STREAM_NOISE], counter=[0, 0, 0, int(eval_index)]))
        z = rng.standard_normal(1 + d)
        return self.sigma_f * z[0], self.sigma_b * z[1:]


@dataclass(frozen=True)
class ObjectiveSpec:
    """A QD objective: genotype -> (fitness, descriptor), fitness maximized.

    ``batch_evaluator`` is an optional vectorized form mapping an ``(N, n)``
    array to ``(N,)`` fitnesses and ``(N, d)`` descriptors.
    ``descriptor_fn`` is an optional cheap descriptor-only evaluator used by
    surrogate-assisted runs. ``fitness_floor`` is the declared lower bound used
    for the offset QD-score.
    """

    n: int
    genotype_bounds: Bounds
    d: int
    descriptor_bounds: Bounds
    evaluator: Callable[[np.ndarray], Tuple[float, Sequence[float]]]
    noisy: bool = False
    batch_evaluator: Optional[Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]] = None
    descriptor_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fitness_floor: Optional[float] = None
    noise: Optional[NoiseModel] = None
    name: str = "objective"

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        if self.genotype_bounds.dim != self.n:
            raise ValueError("genotype bounds dimension does not match n")
        if self.descriptor_bounds.dim != self.d:
            raise ValueError("descriptor bounds dimension does not match d")


def minimize_to_objective(spec: ObjectiveSpec) -> ObjectiveSpec:
    """Wrap a spec whose evaluator returns a cost so that fitness = -cost."""
    f = spec.evaluator

    def neg(x):
        cost, b = f(x)
        return -cost, b

    batch = None
    if spec.batch_evaluator is not None:
        bf = spec.batch_evaluator

        def batch(X):
            cost, B = bf(X)
            return -np.asarray(cost, dtype=float), B

    return replace(spec, evaluator=neg, batch_evaluator=batch)


class EvaluationError(RuntimeError):
    def __init__(self, message, genotype=None, eval_index=None):
        super().__init__(message)
        self.genotype = genotype
        self.eval_index = eval_index


@dataclass
class EvalCounter:
    """Global evaluation counter and descriptor-clamp tally for one run."""

    count: int = 0
    clamp_events: int = 0


def _raw_evaluate(objective: ObjectiveSpec, X: np.ndarray, threads: int):
    if objective.batch_evaluator is not None:
        if threads > 1 and len(X) > 1:
            # row-wise evaluators give the same bits whatever the chunking
            chunks = np.array_split(X, min(threads, len(X)))
            with ThreadPoolExecutor(max_workers=threads) as ex:
                parts = list(ex.map(objective.batch_evaluator, chunks))
            F = np.concatenate([np.asarray(p[0], dtype=float).reshape(len(c)) for p, c in zip(parts, chunks)])
            B = np.concatenate([np.asarray(p[1], dtype=float).reshape(len(c), objective.d)
                                for p, c in zip(parts, chunks)])
            return F, B
        F, B = objective.batch_evaluator(X)
        return np.asarray(F, dtype=float).reshape(len(X)), np.asarray(B, dtype=float).reshape(len(X), objective.d)
    if threads > 1 and len(X) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(objective.evaluator, X))
    else:
        out = [objective.evaluator(x) for x in X]
    F = np.array([float(o[0]) for o in out], dtype=float)
    B = np.array([np.asarray(o[1], dtype=float).reshape(objective.d) for o in out], dtype=float)
    return F, B.reshape(len(X), objective.d)


def evaluate_batch(objective: ObjectiveSpec, genotypes, counter: Optional[EvalCounter] = None,
                   threads: int = 1) -> list[Individual]:
    """Evaluate genotypes in input order and wrap them as Individuals.

    Descriptors falling outside the declared feature bounds are clamped and
    each such evaluation is counted in ``counter.clamp_events``. The counter is
    advanced by the batch size.
    """
    if counter is None:
        counter = EvalCounter()
    X = np.asarray(genotypes, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if len(X) == 0:
        return []
    if X.shape[1] != objective.n:
        raise ValueError(f"genotype dimension {X.shape[1]} != declared n={objective.n}")
    gb = objective.genotype_bounds
    outside = np.any((X < gb.lo) | (X > gb.hi), axis=1)
    if np.any(outside):
        i = int(np.argmax(outside))
        raise ValueError(f"genotype {X[i].tolist()} lies outside its bounds")

    F, B = _raw_evaluate(objective, X, threads)
    start = counter.count
    indices = np.arange(start, start + len(X))
    if objective.noise is not None:
        nm = objective.noise
        for r, k in enumerate(indices):
            df, db = nm.draw(int(k), objective.d)
            F[r] += df
            B[r] += db

    bad = ~np.isfinite(F) | ~np.all(np.isfinite(B), axis=1)
    if np.any(bad):
        r = int(np.argmax(bad))
        raise EvaluationError(
            f"non-finite evaluation at eval_index {start + r} for genotype {X[r].tolist()}: "
            f"fitness={F[r]}, descriptor={B[r].tolist()}", genotype=X[r].copy(), eval_index=start + r)

    db = objective.descriptor_bounds
    out_b = np.any((B < db.lo) | (B > db.hi), axis=1)
    n_clamped = int(out_b.sum())
    if n_clamped:
        B = clamp_to_bounds(B, db)
        counter.clamp_events += n_clamped
        logger.debug("clamped %d descriptor(s) into feature bounds", n_clamped)
    counter.count += len(X)

    return [Individual(genotype=X[r].copy(), fitness=float(F[r]), descriptor=B[r].copy(),
                       eval_index=int(indices[r])) for r in range(len(X))]
