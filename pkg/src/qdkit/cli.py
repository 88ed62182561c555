"""Command-line experiment runner: ``run``, ``oracle``, ``render`` and ``--explain``.

Experiments are INI files with the sections listed in ``DEFAULTS``; unknown
sections or keys are rejected. Exit codes: 0 success, 1 runtime error,
2 configuration or schema error.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys

import numpy as np

from .benchmarks import ArmTask, IlluminationTask, exhaustive_oracle, noisy_wrapper
from .containers import GridSpec
from .domain import Bounds
from .engine import RunConfig, make_container, qd_run
from .metrics import (SchemaError, coverage, export_archive_csv, export_metrics_csv, qd_score,
                      read_archive_csv, render_heatmap)
from .selection import CuriosityConfig, ScoreKind
from .surrogate import GPHyperparameters, SailConfig, export_rounds_csv, sail
from .variation import VariationConfig

logger = logging.getLogger(__name__)

# section -> key -> (default, help); "" means unset
DEFAULTS = {
    "objective": {
        "name": ("", "benchmark: arm | illum (required)"),
        "joints": ("8", "arm: number of joints"),
        "dim": ("6", "illum: genotype dimension"),
        "noise_fitness": ("0.0", "std of additive fitness noise"),
        "noise_descriptor": ("0.0", "std of additive descriptor noise, per dimension"),
    },
    "container": {
        "type": ("grid", "grid | cvt | archive | deepgrid"),
        "bins": ("32, 32", "grid/deepgrid: bins per descriptor dimension"),
        "k": ("1000", "cvt: number of centroids"),
        "samples": ("", "cvt: uniform samples for k-means (default 100*k)"),
        "cache_dir": ("", "cvt: directory for cached centroids"),
        "threshold": ("0.05", "archive: novelty distance threshold"),
        "depth": ("50", "deepgrid: individuals per cell"),
    },
    "selector": {
        "type": ("uniform", "uniform | weighted | random"),
        "score": ("curiosity", "weighted: curiosity | novelty | inverse_count | fitness"),
        "novelty_k": ("15", "neighbours for novelty and knn density"),
        "curiosity_reward": ("1.0", "curiosity increment when an offspring is added"),
        "curiosity_penalty": ("0.5", "curiosity decrement otherwise"),
        "curiosity_floor": ("-10.0", "lowest curiosity value"),
    },
    "variation": {
        "sigma1": ("", "isotropic step (default 0.01*(hi-lo))"),
        "sigma2": ("0.2", "directional step"),
        "mix": ("0.5, 0.5, 0.0", "probabilities of iso, directional, crossover"),
    },
    "engine": {
        "algorithm": ("qd", "qd | map_elites | sail"),
        "initial": ("100", "random genotypes before the main loop"),
        "iterations": ("100", "main-loop iterations"),
        "batch": ("64", "offspring per iteration"),
        "seed": ("0", "random seed"),
        "metrics_every": ("1", "iterations between metrics records"),
        "score_refresh_every": ("1", "iterations between novelty refreshes"),
        "include_previous_batch": ("false", "also select parents from the last offspring batch"),
        "checkpoint_every": ("0", "iterations between checkpoints (0 = never)"),
    },
    "surrogate": {
        "budget": ("500", "sail: true evaluations"),
        "initial": ("50", "sail: random true evaluations first"),
        "batch": ("10", "sail: true evaluations per round"),
        "beta": ("1.0", "UCB exploration weight"),
        "lengthscale": ("0.3", "GP length-scale (scalar or per-dimension list)"),
        "signal_var": ("1.0", "GP signal variance (normalized targets)"),
        "noise_var": ("0.0", "GP noise variance (normalized targets)"),
        "descriptor_model": ("false", "predict descriptors with GPs instead of the true descriptor"),
        "inner_initial": ("100", "acquisition map: random candidates"),
        "inner_iterations": ("50", "acquisition map: iterations"),
        "inner_batch": ("100", "acquisition map: batch size"),
    },
    "output": {
        "dir": ("out", "output directory (QD_OUT_DIR overrides)"),
        "heatmap": ("true", "write heatmap.ppm for 2-D grids"),
    },
    "oracle": {
        "points": ("101", "lattice points per genotype dimension (scalar or list)"),
        "run_archive": ("", "archive CSV of a run to compare against the oracle"),
    },
}


class ConfigError(ValueError):
    pass


def explain() -> str:
    lines = []
    for section, keys in DEFAULTS.items():
        lines.append(f"[{section}]")
        for key, (default, doc) in keys.items():
            lines.append(f"{key} = {default}".rstrip() + f"    ; {doc}")
        lines.append("")
    return "\n".join(lines)


def load_config(path, overrides=()) -> dict:
    """Parse ``path`` and ``section.key=value`` overrides into a nested dict of strings."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    cfg = {s: {k: v[0] for k, v in keys.items()} for s, keys in DEFAULTS.items()}
    present = set()
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        present.add(section)
        for key, value in cp.items(section):
            if key not in DEFAULTS[section]:
                raise ConfigError(f"{path}: unknown key {section}.{key}")
            cfg[section][key] = value.strip()
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"override {ov!r} is not of the form section.key=value")
        lhs, value = ov.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError(f"override names unknown key {section}.{key}")
        present.add(section)
        cfg[section][key] = value.strip()
    if "objective" not in present or not cfg["objective"]["name"]:
        raise ConfigError("missing required key objective.name (section [objective])")
    return cfg


def _get(cfg, section, key, kind):
    raw = cfg[section][key]
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return [float(v) for v in raw.replace(",", " ").split()]
        if kind == "ints":
            return [int(v) for v in raw.replace(",", " ").split()]
        if kind == "opt_float":
            return None if raw == "" else float(raw)
        if kind == "opt_int":
            return None if raw == "" else int(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"invalid value for {section}.{key}: {raw!r}") from None


def build_objective(cfg, seed):
    name = cfg["objective"]["name"]
    if name == "arm":
        obj = ArmTask(joints=_get(cfg, "objective", "joints", int)).objective()
    elif name == "illum":
        obj = IlluminationTask(n=_get(cfg, "objective", "dim", int)).objective()
    else:
        raise ConfigError(f"unknown objective.name {name!r} (arm | illum)")
    sf = _get(cfg, "objective", "noise_fitness", float)
    sb = _get(cfg, "objective", "noise_descriptor", float)
    return noisy_wrapper(obj, sf, sb, seed)


def build_run_config(cfg, seed=None, threads=1) -> RunConfig:
    seed = _get(cfg, "engine", "seed", int) if seed is None else seed
    obj = build_objective(cfg, seed)
    algorithm = cfg["engine"]["algorithm"]
    selector = cfg["selector"]["type"]
    container = cfg["container"]["type"]
    if algorithm == "map_elites":
        selector, container = "uniform", "grid"
    try:
        score = ScoreKind(cfg["selector"]["score"])
    except ValueError:
        raise ConfigError(f"invalid value for selector.score: {cfg['selector']['score']!r}") from None
    sigma1 = cfg["variation"]["sigma1"]
    try:
        variation = VariationConfig(
            sigma1=None if sigma1 == "" else _get(cfg, "variation", "sigma1", "floats"),
            sigma2=_get(cfg, "variation", "sigma2", float),
            mix=tuple(_get(cfg, "variation", "mix", "floats")))
        curiosity = CuriosityConfig(_get(cfg, "selector", "curiosity_reward", float),
                                    _get(cfg, "selector", "curiosity_penalty", float),
                                    _get(cfg, "selector", "curiosity_floor", float))
        out_dir = output_dir(cfg)
        return RunConfig(
            objective=obj, container=container, bins=tuple(_get(cfg, "container", "bins", "ints")),
            cvt_k=_get(cfg, "container", "k", int), cvt_samples=_get(cfg, "container", "samples", "opt_int"),
            cvt_cache_dir=cfg["container"]["cache_dir"] or None,
            archive_threshold=_get(cfg, "container", "threshold", float),
            depth=_get(cfg, "container", "depth", int), selector=selector, score=score,
            novelty_k=_get(cfg, "selector", "novelty_k", int), curiosity=curiosity, variation=variation,
            initial=_get(cfg, "engine", "initial", int), iterations=_get(cfg, "engine", "iterations", int),
            batch_size=_get(cfg, "engine", "batch", int), seed=seed,
            metrics_every=_get(cfg, "engine", "metrics_every", int),
            score_refresh_every=_get(cfg, "engine", "score_refresh_every", int),
            include_previous_batch=_get(cfg, "engine", "include_previous_batch", bool),
            threads=threads, checkpoint_every=_get(cfg, "engine", "checkpoint_every", int),
            checkpoint_dir=os.path.join(out_dir, "checkpoints"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_sail_config(cfg, seed=None, threads=1) -> SailConfig:
    seed = _get(cfg, "engine", "seed", int) if seed is None else seed
    obj = build_objective(cfg, seed)
    ls = _get(cfg, "surrogate", "lengthscale", "floats")
    try:
        hyper = GPHyperparameters(lengthscale=ls[0] if len(ls) == 1 else tuple(ls),
                                  signal_var=_get(cfg, "surrogate", "signal_var", float),
                                  noise_var=_get(cfg, "surrogate", "noise_var", float))
        sigma1 = cfg["variation"]["sigma1"]
        variation = VariationConfig(
            sigma1=None if sigma1 == "" else _get(cfg, "variation", "sigma1", "floats"),
            sigma2=_get(cfg, "variation", "sigma2", float), mix=tuple(_get(cfg, "variation", "mix", "floats")))
        return SailConfig(
            objective=obj, bins=tuple(_get(cfg, "container", "bins", "ints")),
            budget=_get(cfg, "surrogate", "budget", int), initial=_get(cfg, "surrogate", "initial", int),
            batch_size=_get(cfg, "surrogate", "batch", int), beta=_get(cfg, "surrogate", "beta", float),
            seed=seed, hyper=hyper, descriptor_model=_get(cfg, "surrogate", "descriptor_model", bool),
            inner_initial=_get(cfg, "surrogate", "inner_initial", int),
            inner_iterations=_get(cfg, "surrogate", "inner_iterations", int),
            inner_batch=_get(cfg, "surrogate", "inner_batch", int), variation=variation, threads=threads)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def output_dir(cfg) -> str:
    return os.environ.get("QD_OUT_DIR") or cfg["output"]["dir"]


def _grid_spec_of(container):
    spec = getattr(container, "spec", None)
    return spec if spec is not None and spec.dim == 2 else None


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.override)
    algorithm = cfg["engine"]["algorithm"]
    if algorithm not in ("qd", "map_elites", "sail"):
        raise ConfigError(f"invalid value for engine.algorithm: {algorithm!r}")
    out = output_dir(cfg)
    if algorithm == "sail":
        sc = build_sail_config(cfg, args.seed, args.threads)
        obj = sc.objective
        result = sail(sc)
    else:
        rc = build_run_config(cfg, args.seed, args.threads)
        obj = rc.objective
        result = qd_run(rc)
    os.makedirs(out, exist_ok=True)
    export_archive_csv(result.container, os.path.join(out, "archive.csv"), d=obj.d, n=obj.n)
    export_metrics_csv(result.metrics, os.path.join(out, "metrics.csv"))
    if result.rounds:
        export_rounds_csv(result.rounds, os.path.join(out, "rounds.csv"))
    spec = _grid_spec_of(result.container)
    if spec is not None and _get(cfg, "output", "heatmap", bool):
        render_heatmap(result.container, spec, os.path.join(out, "heatmap.ppm"))
    cov = coverage(result.container) if getattr(result.container, "n_cells", None) else float("nan")
    print(f"evaluations: {result.evaluations}")
    print(f"coverage: {cov:.6f}")
    print(f"qd_score: {qd_score(result.container):.10g}")
    if obj.fitness_floor is not None:
        print(f"qd_score_offset: {qd_score(result.container, obj.fitness_floor):.10g}")
    if result.clamp_events:
        print(f"descriptor clamp events: {result.clamp_events}")
    return 0


def cmd_oracle(args) -> int:
    cfg = load_config(args.config, args.override)
    rc = build_run_config(cfg, args.seed)
    if rc.container == "archive":
        raise ConfigError("oracle needs a cell-based container (grid | cvt | deepgrid), not archive")
    points = _get(cfg, "oracle", "points", "ints")
    if len(points) not in (1, rc.objective.n):
        raise ConfigError(f"oracle.points needs 1 or {rc.objective.n} values")
    container = exhaustive_oracle(rc.objective, points if len(points) > 1 else points[0], make_container(rc))
    out = output_dir(cfg)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "oracle_archive.csv")
    export_archive_csv(container, path, d=rc.objective.d, n=rc.objective.n)
    print(f"oracle cells filled: {container.filled_cells()} of {container.n_cells}")
    run_archive = args.run_archive or cfg["oracle"]["run_archive"]
    if run_archive:
        gaps = compare_archives(read_archive_csv(path).best_by_cell(), read_archive_csv(run_archive).best_by_cell())
        print(f"cells where the run is below the oracle: {len(gaps)}")
        for cell, oracle_f, run_f in gaps:
            run_s = "missing" if run_f is None else f"{run_f:.10g}"
            gap = "" if run_f is None else f" gap={oracle_f - run_f:.6g}"
            print(f"  cell {cell}: oracle={oracle_f:.10g} run={run_s}{gap}")
    return 0


def compare_archives(oracle: dict, run: dict) -> list:
    """``(cell, oracle_fitness, run_fitness or None)`` where the run falls short."""
    gaps = []
    for cell in sorted(oracle):
        r = run.get(cell)
        if r is None or r < oracle[cell]:
            gaps.append((cell, oracle[cell], r))
    return gaps


def cmd_render(args) -> int:
    if args.config:
        cfg = load_config(args.config, args.override)
        bins = tuple(_get(cfg, "container", "bins", "ints"))
        bounds = build_objective(cfg, 0).descriptor_bounds
    else:
        bins = tuple(int(b) for b in args.bins.replace(",", " ").split())
        lo, hi = (float(v) for v in args.bounds.replace(",", " ").split())
        bounds = Bounds(np.full(len(bins), lo), np.full(len(bins), hi))
    spec = GridSpec(bins, bounds)
    if spec.dim != 2:
        raise ConfigError(f"render needs a 2-D grid, got bins {bins}")
    table = read_archive_csv(args.archive)
    if table.coords.shape[1] != 2:
        raise SchemaError(f"{args.archive}: expected cell coordinate columns c0, c1; "
                          f"found {table.coords.shape[1]}")
    if len(table) and (table.cell_id.min() < 0 or table.cell_id.max() >= np.prod(bins)):
        raise SchemaError(f"{args.archive}: column 'cell_id' has values outside a {bins} grid")
    render_heatmap(table, spec, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdkit", description="Quality-diversity experiment runner.")
    p.add_argument("--explain", action="store_true", help="print every config key with its default")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")

    def common(sp):
        sp.add_argument("config")
        sp.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=1, help="cap on evaluation threads (1 = serial)")

    common(sub.add_parser("run", help="run an experiment"))
    o = sub.add_parser("oracle", help="exhaustive lattice oracle")
    common(o)
    o.add_argument("--run-archive", default=None)
    r = sub.add_parser("render", help="re-render a heatmap from an archive CSV")
    r.add_argument("archive")
    r.add_argument("--bins", default="32,32")
    r.add_argument("--bounds", default="0,1", help="lo,hi applied to every dimension")
    r.add_argument("--config", default=None, help="take bins and bounds from an experiment file")
    r.add_argument("--override", action="append", default=[])
    r.add_argument("--out", default="heatmap.ppm")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.explain:
        print(explain())
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    handler = {"run": cmd_run, "oracle": cmd_oracle, "render": cmd_render}[args.command]
    try:
        return handler(args)
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        logger.debug("run failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
