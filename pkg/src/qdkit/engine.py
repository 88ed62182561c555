"""The unified QD loop; MAP-Elites is a preset of it.

One run is: ``initial`` uniform random genotypes, then ``iterations`` rounds
of select -> vary -> evaluate -> add (with curiosity bookkeeping) -> score
refresh -> metrics. Container writes happen in ascending evaluation order.
"""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .containers import CVTContainer, DeepGridContainer, DistanceArchive, GridContainer, GridSpec
from .cvt import CentroidSet, cvt_build
from .domain import (STREAM_CONTAINER, STREAM_INIT, STREAM_SELECTION, STREAM_VARIATION, EvalCounter,
                     EvaluationError, ObjectiveSpec, evaluate_batch, make_rng)
from .metrics import MetricsRecord, export_archive_csv, measure
from .selection import (CuriosityConfig, ScoreKind, curiosity_update, refresh_novelty, select_uniform,
                        select_weighted)
from .variation import VariationConfig, vary

logger = logging.getLogger(__name__)

CONTAINERS = ("grid", "cvt", "archive", "deepgrid")
SELECTORS = ("uniform", "weighted", "random")


@dataclass
class RunConfig:
    objective: ObjectiveSpec
    container: str = "grid"
    bins: tuple = (32, 32)
    cvt_k: int = 1000
    cvt_samples: Optional[int] = None
    cvt_cache_dir: Optional[str] = None
    centroids: Optional[CentroidSet] = None
    archive_threshold: float = 0.05
    depth: int = 50
    selector: str = "uniform"
    score: ScoreKind = ScoreKind.CURIOSITY
    novelty_k: int = 15
    curiosity: CuriosityConfig = field(default_factory=CuriosityConfig)
    variation: VariationConfig = field(default_factory=VariationConfig)
    initial: int = 100
    iterations: int = 100
    batch_size: int = 64
    seed: int = 0
    metrics_every: int = 1
    score_refresh_every: int = 1
    include_previous_batch: bool = False
    threads: int = 1
    checkpoint_every: int = 0
    checkpoint_dir: Optional[str] = None
    initial_genotypes: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.initial < 1 or self.iterations < 1 or self.batch_size < 1:
            raise ValueError(f"need initial >= 1, iterations >= 1, batch_size >= 1 "
                             f"(got {self.initial}, {self.iterations}, {self.batch_size})")
        if self.container not in CONTAINERS:
            raise ValueError(f"unknown container {self.container!r}; choose from {CONTAINERS}")
        if self.selector not in SELECTORS:
            raise ValueError(f"unknown selector {self.selector!r}; choose from {SELECTORS}")
        self.score = ScoreKind(self.score)
        if self.metrics_every < 1 or self.score_refresh_every < 1:
            raise ValueError("cadences must be >= 1")
        if self.checkpoint_every and not self.checkpoint_dir:
            raise ValueError("checkpoint_every needs checkpoint_dir")

    @property
    def total_evaluations(self) -> int:
        return self.initial + self.iterations * self.batch_size


@dataclass
class RunResult:
    container: object
    metrics: list
    evaluations: int
    wall_time: float
    clamp_events: int = 0
    rounds: list = field(default_factory=list)


def make_container(config: RunConfig):
    db = config.objective.descriptor_bounds
    if config.container == "grid":
        return GridContainer(GridSpec(config.bins, db))
    if config.container == "deepgrid":
        return DeepGridContainer(GridSpec(config.bins, db), config.depth, make_rng(config.seed, STREAM_CONTAINER))
    if config.container == "cvt":
        cs = config.centroids
        if cs is None:
            cs = cvt_build(config.cvt_k, db, seed=config.seed, K=config.cvt_samples,
                           cache_dir=config.cvt_cache_dir)
        return CVTContainer(cs, bounds=db)
    return DistanceArchive(config.archive_threshold, bounds=db)


def _jsonable(o):
    return o.tolist() if isinstance(o, np.ndarray) else int(o)


class QDRun:
    """Stepwise driver behind ``qd_run``; exposes ``initialize`` and ``step``."""

    def __init__(self, config: RunConfig, container=None):
        self.config = config
        self.objective = config.objective
        self.container = container if container is not None else make_container(config)
        self.counter = EvalCounter()
        self.rng_init = make_rng(config.seed, STREAM_INIT)
        self.rng_select = make_rng(config.seed, STREAM_SELECTION)
        self.rng_vary = make_rng(config.seed, STREAM_VARIATION)
        self.metrics: list[MetricsRecord] = []
        self.iteration = 0
        self.previous: list = []
        self.added_total = 0
        self._uses_novelty = config.selector == "weighted" and config.score is ScoreKind.NOVELTY
        self._density_k = config.novelty_k if isinstance(self.container, DistanceArchive) else None

    def _evaluate(self, X):
        try:
            return evaluate_batch(self.objective, X, self.counter, threads=self.config.threads)
        except EvaluationError as exc:
            raise EvaluationError(f"iteration {self.iteration}: {exc}", exc.genotype, exc.eval_index) from exc

    def _random_genotypes(self, m):
        return self.objective.genotype_bounds.sample(self.rng_init, m)

    def _record(self):
        self.metrics.append(measure(self.container, self.iteration, self.counter.count,
                                    self.objective.fitness_floor, self._density_k))

    def initialize(self):
        cfg = self.config
        X = self._random_genotypes(cfg.initial)
        if cfg.initial_genotypes is not None and len(cfg.initial_genotypes):
            X = np.vstack([np.asarray(cfg.initial_genotypes, dtype=float), X])
        offspring = self._evaluate(X)
        for ind in offspring:
            self.added_total += self.container.add(ind)
        self.previous = offspring
        if self._uses_novelty:
            refresh_novelty(self.container, cfg.novelty_k)
        self._record()

    def _select(self):
        cfg = self.config
        pool = self.container
        if cfg.include_previous_batch and self.previous:
            pool = self.container.elites() + list(self.previous)
        if cfg.selector == "uniform":
            return select_uniform(pool, cfg.batch_size, self.rng_select)
        return select_weighted(pool, cfg.score, cfg.batch_size, self.rng_select)

    def step(self):
        cfg = self.config
        self.iteration += 1
        if cfg.selector == "random":
            parents = None
            X = self._random_genotypes(cfg.batch_size)
        else:
            parents = self._select()
            X = vary(parents, cfg.variation, self.rng_vary, self.objective.genotype_bounds,
                     pool=self.container.elites())
        offspring = self._evaluate(X)
        for r, child in enumerate(offspring):
            added = self.container.add(child)
            self.added_total += added
            if parents is not None:
                curiosity_update(parents[r], added, cfg.curiosity)
        self.previous = offspring
        if self._uses_novelty and self.iteration % cfg.score_refresh_every == 0:
            refresh_novelty(self.container, cfg.novelty_k)
        if self.iteration % cfg.metrics_every == 0 or self.iteration == cfg.iterations:
            self._record()
        if cfg.checkpoint_every and self.iteration % cfg.checkpoint_every == 0:
            self.checkpoint()

    def checkpoint(self):
        d = self.config.checkpoint_dir
        os.makedirs(d, exist_ok=True)
        stem = os.path.join(d, f"checkpoint_{self.iteration:06d}")
        export_archive_csv(self.container, stem + ".csv", d=self.objective.d, n=self.objective.n)
        state = {
            "iteration": self.iteration,
            "evaluations": self.counter.count,
            "rng": {name: rng.bit_generator.state for name, rng in
                    (("init", self.rng_init), ("selection", self.rng_select), ("variation", self.rng_vary))},
        }
        with open(stem + ".json", "w") as fh:
            json.dump(state, fh, indent=1, sort_keys=True, default=_jsonable)

    def result(self, wall_time: float) -> RunResult:
        return RunResult(container=self.container, metrics=self.metrics, evaluations=self.counter.count,
                         wall_time=wall_time, clamp_events=self.counter.clamp_events)


def qd_run(config: RunConfig, container=None) -> RunResult:
    t0 = time.perf_counter()
    run = QDRun(config, container)
    run.initialize()
    for _ in range(config.iterations):
        run.step()
    if run.counter.clamp_events:
        logger.info("%d descriptor(s) clamped into feature bounds", run.counter.clamp_events)
    return run.result(time.perf_counter() - t0)


def map_elites(spec: GridSpec, objective: ObjectiveSpec, initial: int, iterations: int, batch_size: int,
               seed: int, **kwargs) -> RunResult:
    """MAP-Elites: grid container, uniform selection over elites, default variation."""
    if spec.bounds != objective.descriptor_bounds:
        raise ValueError("grid bounds must equal the objective's descriptor bounds")
    return qd_run(RunConfig(objective=objective, container="grid", bins=spec.bins, selector="uniform",
                            initial=initial, iterations=iterations, batch_size=batch_size, seed=seed, **kwargs))
