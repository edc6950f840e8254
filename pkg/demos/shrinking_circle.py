"""A circle under mean curvature flow: radius law, V = -H, and what the solver records.

Run with ``python3 demos/shrinking_circle.py``.
"""

import numpy as np

from mcflab import DatumSpec, SolverParams, build_datum, curvature_on_contour, evolve, make_grid, marching_squares
from mcflab import normal_velocity_on_contour

grid = make_grid((0.0, 0.0), 2.2, 129)
g = build_datum(DatumSpec("circle", {"R": 1.0}), grid)
u = evolve(g, SolverParams(T=0.4, frame_dt=0.05))
print(f"h = {grid.h:.4f}, eps = {u.meta['eps']:.4f}, dt = {u.meta['dt']:.2e}, {u.meta['steps_per_frame']} steps per frame")

# the zero level should be a circle of radius sqrt(1 - 2t)
print("\n   t    mean radius   sqrt(1-2t)   rel. error")
for f in u.frames:
    pts = marching_squares(f, 0.0).points()
    r = np.hypot(pts[:, 0], pts[:, 1])
    R = np.sqrt(1 - 2 * f.time_tag)
    print(f"{f.time_tag:5.2f}   {r.mean():.5f}      {R:.5f}      {np.abs(r - R).max() / R:.2e}")

# normal velocity from the time derivative against curvature from the frame
print("\n   t    mean H    mean V    |V + H| / |H|")
for k in range(1, len(u) - 1):
    f = u[k]
    c = marching_squares(f, 0.0)
    H = curvature_on_contour(f, c).values
    V = normal_velocity_on_contour(u, 0.0, f.time_tag, contour=c).values
    w = c.weights()
    print(f"{f.time_tag:5.2f}   {np.average(H, weights=w):.4f}   {np.average(V, weights=w):.4f}   "
          f"{np.sum(w * np.abs(V + H)) / np.sum(w * np.abs(H)):.2e}")
