"""Surrogate-assisted illumination.

Exact GP regression with a squared-exponential kernel, UCB and expected
improvement acquisitions, the SAIL loop (MAP-Elites on UCB, then uniform picks
from the resulting acquisition map evaluated on the true objective) and the
expected joint improvement of elites (EJIE).
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtr

from .containers import GridContainer, GridSpec, grid_cell_count
from .domain import (STREAM_SURROGATE, EvalCounter, ObjectiveSpec, clamp_to_bounds, evaluate_batch,
                     make_rng)
from .engine import QDRun, RunConfig, RunResult
from .metrics import measure, qd_score
from .variation import VariationConfig

logger = logging.getLogger(__name__)


class GPFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class GPHyperparameters:
    lengthscale: float | Sequence[float] = 1.0
    signal_var: float = 1.0
    noise_var: float = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.lengthscale, dtype=float) <= 0):
            raise ValueError("length-scales must be > 0")
        if self.signal_var < 0 or self.noise_var < 0:
            raise ValueError("variances must be >= 0")


@dataclass
class GPModel:
    X: np.ndarray
    y: np.ndarray
    hyper: GPHyperparameters
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    y_mean: float = 0.0
    y_scale: float = 1.0

    @property
    def lengthscale(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.hyper.lengthscale, dtype=float), (self.X.shape[1],))


def se_kernel(A, B, lengthscale, signal_var) -> np.ndarray:
    A = np.asarray(A, dtype=float) / lengthscale
    B = np.asarray(B, dtype=float) / lengthscale
    d2 = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T
    return signal_var * np.exp(-0.5 * np.maximum(d2, 0.0))


def gp_fit(X, y, hyper: GPHyperparameters = GPHyperparameters(), normalize: bool = False,
           max_jitter: float = 1e-4) -> GPModel:
    """Fit an exact GP, adding diagonal jitter (from 1e-10 relative) only as needed.

    With ``normalize`` the targets are centred and scaled to unit variance
    before fitting and predictions are mapped back; otherwise the prior mean
    is zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(X) != len(y) or len(y) < 1:
        raise ValueError(f"need matching non-empty X and y, got {len(X)} and {len(y)}")
    y_mean, y_scale = 0.0, 1.0
    if normalize:
        y_mean = float(y.mean())
        y_scale = float(y.std()) or 1.0
    yc = (y - y_mean) / y_scale
    ls = np.broadcast_to(np.asarray(hyper.lengthscale, dtype=float), (X.shape[1],))
    K = se_kernel(X, X, ls, hyper.signal_var)
    K[np.diag_indices_from(K)] += hyper.noise_var
    scale = hyper.signal_var if hyper.signal_var > 0 else 1.0
    jitter = 1e-10 * scale
    while True:
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(len(K)))
            break
        except np.linalg.LinAlgError:
            jitter *= 10
            if jitter > max_jitter * scale:
                raise GPFitError(f"kernel matrix not positive definite even with jitter {jitter:g}") from None
    alpha = cho_solve((L, True), yc)
    return GPModel(X=X, y=y, hyper=hyper, chol=L, alpha=alpha, jitter=jitter, y_mean=y_mean, y_scale=y_scale)


def gp_predict_batch(model: GPModel, Xq):
    """Posterior means and standard deviations at the rows of ``Xq``."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    Ks = se_kernel(Xq, model.X, model.lengthscale, model.hyper.signal_var)
    mu = Ks @ model.alpha
    v = solve_triangular(model.chol, Ks.T, lower=True)
    var = np.maximum(model.hyper.signal_var - np.sum(v * v, axis=0), 0.0)
    return model.y_mean + model.y_scale * mu, model.y_scale * np.sqrt(var)


def gp_predict(model: GPModel, x):
    mu, sd = gp_predict_batch(model, np.asarray(x, dtype=float).reshape(1, -1))
    return float(mu[0]), float(sd[0])


def ucb(model: GPModel, x, beta: float = 1.0):
    """``mu + beta * sigma``; ``x`` may be a single point or a batch of rows."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    x = np.asarray(x, dtype=float)
    mu, sd = gp_predict_batch(model, x if x.ndim == 2 else x.reshape(1, -1))
    val = mu + beta * sd
    return val if x.ndim == 2 else float(val[0])


def ei_from_moments(mu, sigma, incumbent):
    """Closed-form expected improvement of ``N(mu, sigma^2)`` over ``incumbent``.

    With ``f ~ N(mu, sigma^2)`` and ``z = (mu - incumbent) / sigma``,
    ``E[max(f - incumbent, 0)] = (mu - incumbent) Phi(z) + sigma phi(z)``;
    as ``sigma -> 0`` this tends to ``max(mu - incumbent, 0)``.
    """
    mu, sigma, inc = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (mu, sigma, incumbent)))
    shape = mu.shape
    diff = (mu - inc).reshape(-1)
    sigma = sigma.reshape(-1)
    out = np.maximum(diff, 0.0)
    pos = sigma > 0
    if np.any(pos):
        z = diff[pos] / sigma[pos]
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        out[pos] = np.maximum(diff[pos] * ndtr(z) + sigma[pos] * pdf, 0.0)
    return out.reshape(shape)


def expected_improvement(model: GPModel, x, incumbent: float) -> float:
    mu, sd = gp_predict(model, x)
    return float(ei_from_moments(mu, sd, incumbent))


def cell_membership_probabilities(mu_b, sigma_b, spec: GridSpec) -> np.ndarray:
    """P(descriptor in cell) for every cell, row-major, under independent Gaussians.

    Each factor is a difference of normal CDFs at the cell edges; a zero
    standard deviation degenerates to the indicator of the cell that
    ``grid_cell_index`` would pick. Mass outside the bounds is dropped, so the
    probabilities sum to at most 1.
    """
    mu_b = np.asarray(mu_b, dtype=float).reshape(spec.dim)
    sigma_b = np.asarray(sigma_b, dtype=float).reshape(spec.dim)
    per_dim = []
    for j, nb in enumerate(spec.bins):
        lo, hi = spec.bounds.lo[j], spec.bounds.hi[j]
        if sigma_b[j] > 0:
            edges = lo + (hi - lo) * np.arange(nb + 1) / nb
            with np.errstate(over="ignore"):  # tiny sigma: +-inf is the right limit
                p = np.diff(ndtr((edges - mu_b[j]) / sigma_b[j]))
        else:
            p = np.zeros(nb)
            if lo <= mu_b[j] <= hi:
                p[min(int(math.floor(nb * (mu_b[j] - lo) / (hi - lo))), nb - 1)] = 1.0
        per_dim.append(np.clip(p, 0.0, 1.0))
    out = per_dim[0]
    for p in per_dim[1:]:
        out = np.multiply.outer(out, p)
    return out.reshape(-1)


def empty_cell_floor(model_f: GPModel) -> float:
    return float(model_f.y.min() - (model_f.y.std() if len(model_f.y) > 1 else 0.0))


def ejie(model_f: GPModel, model_b: Sequence[GPModel], x, archive: GridContainer, spec: Optional[GridSpec] = None,
         empty_incumbent: Optional[float] = None) -> float:
    """Expected joint improvement of elites at genotype ``x``.

    Sum over cells of P(x lands in the cell) times the expected improvement
    over that cell's incumbent. ``model_b`` holds one GP per descriptor
    dimension; empty cells use ``empty_incumbent`` (default: minimum observed
    fitness minus one standard deviation).
    """
    spec = spec if spec is not None else archive.spec
    if len(model_b) != spec.dim:
        raise ValueError(f"need one descriptor model per dimension ({spec.dim}), got {len(model_b)}")
    mu_f, sd_f = gp_predict(model_f, x)
    mb = [gp_predict(m, x) for m in model_b]
    probs = cell_membership_probabilities([m for m, _ in mb], [s for _, s in mb], spec)
    if empty_incumbent is None:
        empty_incumbent = empty_cell_floor(model_f)
    inc = np.full(len(probs), float(empty_incumbent))
    for c, ind in archive.items():
        inc[c] = ind.fitness
    return float(np.sum(probs * ei_from_moments(mu_f, sd_f, inc)))


@dataclass
class AcquisitionMap:
    container: GridContainer
    beta: float
    evaluations: int


def _descriptor_source(objective: ObjectiveSpec, model_b):
    if model_b is not None:
        db = objective.descriptor_bounds

        def desc(X):
            return clamp_to_bounds(np.column_stack([gp_predict_batch(m, X)[0] for m in model_b]), db)
        return desc
    if objective.descriptor_fn is None:
        raise ValueError("true-descriptor acquisition needs objective.descriptor_fn (or pass model_b)")
    return objective.descriptor_fn


def build_acquisition_map(model_f: GPModel, objective: ObjectiveSpec, spec: GridSpec, beta: float = 1.0,
                          initial: int = 100, iterations: int = 50, batch_size: int = 100, seed: int = 0,
                          model_b: Optional[Sequence[GPModel]] = None, seed_genotypes=None,
                          variation: Optional[VariationConfig] = None) -> AcquisitionMap:
    """MAP-Elites over the cheap UCB objective; cells keep the best UCB candidate.

    Descriptors come from ``objective.descriptor_fn`` (the true, cheap
    descriptor) or, when ``model_b`` is given, from the descriptor GP means.
    ``iterations=0`` leaves only the initial candidates.
    """
    desc = _descriptor_source(objective, model_b)

    def batch(X):
        return ucb(model_f, X, beta), desc(X)

    def single(x):
        f, b = batch(np.asarray(x, dtype=float).reshape(1, -1))
        return float(f[0]), b[0]

    cheap = replace(objective, evaluator=single, batch_evaluator=batch, noise=None, noisy=False,
                    fitness_floor=None, name=f"ucb[{objective.name}]")
    cfg = RunConfig(objective=cheap, container="grid", bins=spec.bins, selector="uniform",
                    initial=initial, iterations=max(iterations, 1), batch_size=batch_size, seed=seed,
                    variation=variation or VariationConfig(), initial_genotypes=seed_genotypes,
                    metrics_every=max(iterations, 1))
    run = QDRun(cfg, GridContainer(spec))
    run.initialize()
    for _ in range(iterations):
        run.step()
    return AcquisitionMap(container=run.container, beta=beta, evaluations=run.counter.count)


@dataclass
class SurrogateRound:
    round: int
    evaluations: int
    map_coverage: float
    qd_score: float
    qd_score_offset: float


ROUND_COLUMNS = ["round", "evaluations", "map_coverage", "qd_score", "qd_score_offset"]


def export_rounds_csv(rounds, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROUND_COLUMNS)
        for r in rounds:
            row = asdict(r)
            w.writerow([str(row[c]) if isinstance(row[c], int) else format(row[c], ".17g") for c in ROUND_COLUMNS])


@dataclass
class SailConfig:
    objective: ObjectiveSpec
    bins: tuple = (10, 10)
    budget: int = 500
    initial: int = 50
    batch_size: int = 10
    beta: float = 1.0
    seed: int = 0
    hyper: GPHyperparameters = field(default_factory=lambda: GPHyperparameters(lengthscale=0.3))
    descriptor_model: bool = False
    descriptor_hyper: Optional[GPHyperparameters] = None
    inner_initial: int = 100
    inner_iterations: int = 50
    inner_batch: int = 100
    variation: VariationConfig = field(default_factory=VariationConfig)
    threads: int = 1

    def __post_init__(self):
        if self.budget < self.initial or self.initial < 1:
            raise ValueError(f"need budget >= initial >= 1, got budget={self.budget}, initial={self.initial}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def sail(config: SailConfig) -> RunResult:
    """Surrogate-assisted illumination; returns the archive of true evaluations.

    Each round refits the GP on every true evaluation so far, builds a UCB
    acquisition map seeded with the current true elites, and evaluates a
    uniform pick of map cells on the true objective. Genotypes already
    evaluated are never re-evaluated.
    """
    t0 = time.perf_counter()
    obj = config.objective
    spec = GridSpec(config.bins, obj.descriptor_bounds)
    rng = make_rng(config.seed, STREAM_SURROGATE)
    counter = EvalCounter()
    archive = GridContainer(spec)
    evaluated = []
    seen = set()

    def true_eval(X):
        inds = evaluate_batch(obj, X, counter, threads=config.threads)
        for ind in inds:
            archive.add(ind)
            evaluated.append(ind)
            seen.add(ind.genotype.tobytes())

    true_eval(obj.genotype_bounds.sample(rng, config.initial))
    rounds = [SurrogateRound(0, counter.count, float("nan"), qd_score(archive), qd_score(archive, obj.fitness_floor))]
    metrics = [measure(archive, 0, counter.count, obj.fitness_floor)]
    r = 0
    while counter.count < config.budget:
        r += 1
        X = np.array([e.genotype for e in evaluated])
        y = np.array([e.fitness for e in evaluated])
        model_f = gp_fit(X, y, config.hyper, normalize=True)
        model_b = None
        if config.descriptor_model:
            B = np.array([e.descriptor for e in evaluated])
            dh = config.descriptor_hyper or config.hyper
            model_b = [gp_fit(X, B[:, j], dh, normalize=True) for j in range(obj.d)]
        amap = build_acquisition_map(
            model_f, obj, spec, beta=config.beta, initial=config.inner_initial,
            iterations=config.inner_iterations, batch_size=config.inner_batch,
            seed=int(rng.integers(2 ** 63)), model_b=model_b,
            seed_genotypes=np.array([e.genotype for e in archive.elites()]), variation=config.variation)
        candidates = [e.genotype for e in amap.container.elites() if e.genotype.tobytes() not in seen]
        m = min(config.batch_size, config.budget - counter.count)
        if len(candidates) >= m:
            pick = rng.choice(len(candidates), size=m, replace=False)
            Xn = np.array([candidates[i] for i in np.sort(pick)])
        else:
            extra = obj.genotype_bounds.sample(rng, m - len(candidates))
            Xn = np.vstack([np.array(candidates).reshape(-1, obj.n), extra])
        true_eval(Xn)
        rounds.append(SurrogateRound(r, counter.count, amap.container.filled_cells() / grid_cell_count(spec),
                                     qd_score(archive), qd_score(archive, obj.fitness_floor)))
        metrics.append(measure(archive, r, counter.count, obj.fitness_floor))
        logger.debug("sail round %d: %d true evaluations, map coverage %.3f", r, counter.count,
                     rounds[-1].map_coverage)
    return RunResult(container=archive, metrics=metrics, evaluations=counter.count,
                     wall_time=time.perf_counter() - t0, clamp_events=counter.clamp_events, rounds=rounds)

