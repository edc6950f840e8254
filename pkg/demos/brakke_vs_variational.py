"""Circles that vanish at once satisfy Brakke's inequality but are not a distributional solution.

The fixture is |x|^2 + 2t, clipped below by 3 from t = 1 on, so every level
s in (2, 3) jumps from a disc to the empty set. Mass loss is allowed for a
Brakke flow; the jump in area breaks the velocity identity and L1 continuity.
"""

from mcflab import DatumSpec, LevelFamily, SolverParams, build_datum, evolve, make_grid, verify_variational
from mcflab.fixtures import vanishing_sphere


def show(title, fam, s):
    rep = verify_variational(fam, s)
    print(f"\n{title}, level {s:g}: {rep.verdict}")
    for c in rep.checks:
        print(f"  {c.name:26s} {c.verdict:8s} residual {c.residual: .3e}  scale {c.scale:.3e}")


sphere = vanishing_sphere(make_grid((0.0, 0.0), 2.5, 129), T=1.5, frame_dt=0.02)
show("vanishing circles", LevelFamily.from_field(sphere, [2.5]), 2.5)

grid = make_grid((0.0, 0.0), 2.2, 257)
u = evolve(build_datum(DatumSpec("circle", {"R": 1.0}), grid), SolverParams(T=0.4, frame_dt=0.01))
show("level-set flow of a circle", LevelFamily.from_field(u, [0.0]), 0.0)
