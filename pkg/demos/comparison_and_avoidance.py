"""Ordered data stay ordered; disjoint interfaces move apart.

Two concentric circles of radius 1 and 2 shrink at different rates, so the
gap sqrt(4 - 2t) - sqrt(1 - 2t) grows. Separately, a datum and the same
datum lifted by a constant never cross.
"""

import numpy as np

from mcflab import DatumSpec, LevelFamily, SolverParams, boundary_distance, build_datum, evolve, make_grid
from mcflab import marching_squares, two_circles_datum
from mcflab.verify import check_avoidance, check_comparison

grid = make_grid((0.0, 0.0), 3.0, 129)
p = SolverParams(T=0.45, frame_dt=0.05)
a, b = (evolve(g, p) for g in two_circles_datum(1.0, 2.0, 0.0, grid))
print("   t    distance   sqrt(4-2t) - sqrt(1-2t)")
for fa, fb in zip(a.frames, b.frames):
    d = boundary_distance(marching_squares(fa, 0.0), marching_squares(fb, 0.0))
    t = fa.time_tag
    print(f"{t:5.2f}   {d:.4f}     {np.sqrt(4 - 2 * t) - np.sqrt(1 - 2 * t):.4f}")
r = check_avoidance(LevelFamily.from_field(a, [0.0]), 0.0, LevelFamily.from_field(b, [0.0]), 0.0)
print(f"avoidance: {r.verdict}")

g = build_datum(DatumSpec("circle", {"R": 1.0}), make_grid((0.0, 0.0), 2.2, 129))
q = SolverParams(T=0.3, frame_dt=0.05)
r = check_comparison(evolve(g, q), evolve(g + 0.25, q))
print(f"comparison of g and g + 0.25: {r.verdict}, violations per frame {r.meta['violations_per_frame']}")
