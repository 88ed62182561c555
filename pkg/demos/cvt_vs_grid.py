"""
Voronoi cells versus a regular grid
===================================

A centroidal Voronoi tessellation with as many cells as a 16x16 grid covers
the same descriptor box. Run the same budget on both and compare.
"""
from qdkit import ArmTask, RunConfig, coverage, cvt_build, qd_run, qd_score

arm = ArmTask().objective()

# 256 centroids from 25600 uniform samples; cached after the first build
centroids = cvt_build(256, arm.descriptor_bounds, seed=0)
print(f"CVT: {centroids.k} centroids after {centroids.iterations} Lloyd iterations")

budget = dict(initial=500, iterations=200, batch_size=50)
for seed in range(3):
    grid = qd_run(RunConfig(arm, bins=(16, 16), seed=seed, **budget))
    cvt = qd_run(RunConfig(arm, container="cvt", centroids=centroids, seed=seed, **budget))
    print(f"seed {seed}: grid coverage {coverage(grid.container):.3f} qd {qd_score(grid.container, arm.fitness_floor):7.1f}"
          f" | cvt coverage {coverage(cvt.container):.3f} qd {qd_score(cvt.container, arm.fitness_floor):7.1f}")
