"""Quality-diversity optimization toolkit."""
from .benchmarks import (ArmTask, IlluminationTask, arm_forward_kinematics, arm_objective, exhaustive_oracle,
                         illumination_objective, noisy_wrapper)
from .containers import (CVTContainer, DeepGridContainer, DistanceArchive, GridContainer, GridSpec,
                         deepgrid_select_within_cell, grid_cell_count, grid_cell_index)
from .cvt import CentroidSet, cvt_build, kmeans_lloyd, nearest_centroid, sample_points
from .domain import (Bounds, EvalCounter, EvaluationError, Individual, ObjectiveSpec, RngStream,
                     clamp_to_bounds, evaluate_batch, make_rng)
from .engine import QDRun, RunConfig, RunResult, map_elites, qd_run
from .metrics import (MetricsRecord, coverage, export_archive_csv, export_metrics_csv, knn_density, qd_score,
                      read_archive_csv, render_heatmap)
from .selection import (CuriosityConfig, ScoreKind, curiosity_update, novelty_score, refresh_novelty,
                        select_uniform, select_weighted)
from .surrogate import (GPHyperparameters, GPModel, SailConfig, build_acquisition_map, ejie,
                        expected_improvement, gp_fit, gp_predict, sail, ucb)
from .variation import VariationConfig, crossover_blend, mutate_iso, vary, variation_directional

__version__ = "0.1.0"
