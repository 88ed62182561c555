"""
Reaching repertoire for a planar arm
====================================

Fill a 32x32 grid of end-effector positions with the smoothest joint
configuration that reaches each one, then write the archive and a heatmap.
"""
import sys
from pathlib import Path

import numpy as np

from qdkit import ArmTask, GridSpec, coverage, export_archive_csv, map_elites, qd_score, render_heatmap

out = Path(sys.argv[1] if len(sys.argv) > 1 else "arm_out")
out.mkdir(exist_ok=True)

# six joints, fitness is minus the spread of joint angles
arm = ArmTask(joints=6).objective()
spec = GridSpec((32, 32), arm.descriptor_bounds)

# 2000 random arms, then 200 rounds of 100 mutants
res = map_elites(spec, arm, 2000, 200, 100, seed=0)
print(f"{res.evaluations} evaluations in {res.wall_time:.1f} s")
print(f"coverage {coverage(res.container):.3f}, offset QD-score {qd_score(res.container, arm.fitness_floor):.1f}")

# progress, every 50 iterations
for m in res.metrics[::50]:
    print(f"  iter {m.iteration:4d}  coverage {m.coverage:.3f}  qd_offset {m.qd_score_offset:9.1f}")

# the farthest reach from the arm's base at the centre of the box
far = max(res.container.elites(), key=lambda e: np.linalg.norm(e.descriptor - 0.5))
print("farthest elite reaches", np.round(far.descriptor, 3), "fitness", round(far.fitness, 4),
      "angles", np.round(far.genotype, 2))

export_archive_csv(res.container, out / "archive.csv")
render_heatmap(res.container, spec, out / "heatmap.ppm")
print("wrote", out / "archive.csv", "and", out / "heatmap.ppm")
