"""The figure-eight level of a lemniscate fattens; a circle level does not.

The band {s - d <= u < s + d} shrinks with d like 2 d P / |grad u| for a thin
level, so its linear extrapolation to d = 0 is near zero. A level that has
developed interior keeps a positive intercept.
"""

from mcflab import DatumSpec, SolverParams, build_datum, evolve, make_grid
from mcflab.verify import detect_fattening

deltas = [0.1, 0.08, 0.06, 0.05, 0.04]
lem = evolve(build_datum(DatumSpec("lemniscate"), make_grid((0.0, 0.0), 1.5, 257)), SolverParams(T=0.05, frame_dt=0.01))
cir = evolve(build_datum(DatumSpec("circle", {"R": 1.0}), make_grid((0.0, 0.0), 2.2, 257)), SolverParams(T=0.05, frame_dt=0.01))

for name, u in (("lemniscate", lem), ("circle", cir)):
    r = detect_fattening(u, 0.0, 0.05, deltas)
    areas = ", ".join(f"{a:.3f}" for a in r.meta["areas"])
    print(f"{name:10s} band areas [{areas}] -> intercept {r.residual:.4f} (threshold {r.meta['threshold']:.4f}): "
          f"{'fattened' if r.meta['fattening'] else 'thin'}")
