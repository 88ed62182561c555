"""
Illumination on a small evaluation budget
=========================================

With only 500 true evaluations, a Gaussian-process surrogate decides where
to spend them. Compare against plain MAP-Elites at the same budget.
"""
from qdkit import GridSpec, IlluminationTask, SailConfig, coverage, map_elites, qd_score, sail

task = IlluminationTask(n=10).objective()
spec = GridSpec((10, 10), task.descriptor_bounds)

s = sail(SailConfig(task, bins=(10, 10), budget=500, seed=0))
m = map_elites(spec, task, 50, 45, 10, seed=0)

# rounds: one row per batch of true evaluations
for r in s.rounds[::10]:
    print(f"round {r.round:3d}  evals {r.evaluations}  offset QD-score {r.qd_score_offset:.1f}")

for name, res in (("SAIL", s), ("MAP-Elites", m)):
    print(f"{name:10s} evals {res.evaluations}  coverage {coverage(res.container):.2f}"
          f"  offset QD-score {qd_score(res.container, task.fitness_floor):.1f}")
