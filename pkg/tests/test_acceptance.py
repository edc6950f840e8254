"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed together at the
end of the session (see ``conftest.pytest_terminal_summary``).
"""

import json
import math
import time

import numpy as np

from mcflab import (
    DatumSpec,
    LayerCakeParams,
    LevelFamily,
    SolverParams,
    build_datum,
    check_viscosity_inequalities,
    cli,
    curvature_on_contour,
    evolve,
    layer_cake,
    make_grid,
    marching_squares,
    normal_velocity_on_contour,
    sup_norm_distance,
    verify_variational,
    well_prepared_norm,
)
from mcflab.fields import gradient_grid
from mcflab.initial_data import creased_fixture
from mcflab.verify import (
    brakke_residual,
    check_avoidance,
    check_comparison,
    detect_fattening,
    l1_continuity_modulus,
    plateau_function,
    residual_distributional_curvature,
    residual_distributional_velocity,
    standard_battery,
)

from . import oracles
from .conftest import circle_datum

RESULTS: list[str] = []


def record(number: int, title: str, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_01_shrinking_circle_law():
    t0 = time.perf_counter()
    u = evolve(circle_datum(), SolverParams(T=0.4, frame_dt=0.02))
    wall = time.perf_counter() - t0
    worst = 0.0
    for f in u.frames:
        R = float(oracles.circle_radius(1, f.time_tag))
        pts = marching_squares(f, 0.0).points()
        worst = max(worst, float(np.abs(np.hypot(pts[:, 0], pts[:, 1]) - R).max() / R))
    h = u.grid.h
    ok = worst <= 0.02 and wall <= 120 and u.meta["eps"] == h and u.meta["dt"] <= h * h / 8 * (1 + 1e-12)
    record(1, "shrinking-circle law", ok, f"max rel radius error {worst:.2e} (<= 2e-2), evolve {wall:.1f} s (<= 120 s)")


def test_02_paraboloid_exactness(paraboloid_run):
    u = paraboloid_run
    X, Y = u.grid.mesh()
    inside = X * X + Y * Y < 1.0
    rng_ = u[0].vmax - u[0].vmin
    err = max(float(np.abs(f.values - (X * X + Y * Y + 2 * f.time_tag))[inside].max()) for f in u.frames)
    record(2, "paraboloid exactness", err <= 0.02 * rng_, f"sup error {err:.2e} = {err / rng_:.2e} of range (<= 2e-2)")


def test_03_velocity_equals_minus_curvature(circle_run):
    u = circle_run
    worst = 0.0
    for f in u.frames:
        if not 0.05 - 1e-9 <= f.time_tag <= 0.35 + 1e-9:
            continue
        c = marching_squares(f, 0.0)
        H = curvature_on_contour(f, c).values
        V = normal_velocity_on_contour(u, 0.0, f.time_tag, contour=c).values
        w = c.weights()
        worst = max(worst, float(np.sum(w * np.abs(V + H)) / np.sum(w * np.abs(H))))
    record(3, "V = -H", worst <= 0.05, f"worst weighted mean |V+H| / mean |H| = {worst:.2e} (<= 5e-2)")


def test_04_brakke_equality(circle_family):
    r = brakke_residual(circle_family, 0.0, plateau_function((0, 0), 1.2, 1.8), 0.0, 0.125)
    total = r.meta["mass_t2"] + r.meta["dissipation"]
    oracle = float(2 * math.pi)
    ok = abs(r.meta["raw"]) <= 0.05 * r.scale and abs(total - oracle) <= 0.05 * r.scale
    record(4, "Brakke equality", ok, f"|raw| / scale = {abs(r.meta['raw']) / r.scale:.2e}, mass + dissipation = {total:.4f} vs 2pi")


def test_05_bv_identities(circle_family):
    fam = circle_family
    rel = []
    for s in fam.levels:
        b = standard_battery(fam, s)
        for r in (residual_distributional_velocity(fam, s, b["zeta"]), residual_distributional_curvature(fam, s, b["xi"])):
            rel.append(abs(r.residual) / r.scale)
    # area of the zero level is linear in t; node counts are lattice-noisy, so fit the slope
    A = [E.area for E in fam.sets(0.0)]
    rate = float(np.polyfit(fam.times, A, 1)[0])
    oracle = float(oracles.disc_area_rate(0.2))
    ok = max(rel) <= 0.05 and abs(rate - oracle) <= 0.05 * abs(oracle)
    record(5, "BV identities", ok, f"worst relative residual {max(rel):.2e} (<= 5e-2), area rate {rate:.4f} vs {oracle:.4f}")


def test_06_comparison(circle_run, circle_partner_run):
    offset = check_comparison(circle_run, circle_partner_run)
    inner = build_datum(DatumSpec("circle", {"R": 0.9}, r_in=1.5, r_out=2.0), circle_run.grid)
    assert (circle_run[0].values <= inner.values).all()
    nested = check_comparison(circle_run, evolve(inner, SolverParams(T=0.4, frame_dt=0.005)))
    v = sum(offset.meta["violations_per_frame"]) + sum(nested.meta["violations_per_frame"])
    ok = offset.verdict == nested.verdict == "pass" and v == 0
    record(6, "discrete comparison", ok, f"{v} violating nodes over all frames (offset pair and nested circles)")


def test_07_avoidance(concentric_runs):
    a, b = concentric_runs
    fa, fb = LevelFamily.from_field(a, [0.0]), LevelFamily.from_field(b, [0.0])
    r = check_avoidance(fa, 0.0, fb, 0.0)
    h = a.grid.h
    d = np.array(r.meta["distances"])
    gap = np.array([float(oracles.concentric_gap(t)) for t in r.meta["times"]])
    ok = r.passed and d.min() >= 1 - 2 * h and np.abs(d - gap).max() <= 2 * h and r.meta["times"][-1] >= 0.45 - 1e-9
    record(7, "avoidance", ok, f"min distance {d.min():.4f} (>= {1 - 2 * h:.4f}), max |d - oracle| {np.abs(d - gap).max():.2e}")


def test_08_l1_continuity(circle_family, sphere_fixture):
    c = l1_continuity_modulus(circle_family, 0.0)
    s = l1_continuity_modulus(LevelFamily.from_field(sphere_fixture, [2.5]), 2.5)
    jumps = s.meta["jumps"]
    oracle = float(oracles.sphere_jump(2.5))
    hit = [j for j in jumps if abs(j["time"] - 1.0) < 0.02]
    ok = (c.passed and c.meta["exponent"] >= 0.45 and not s.passed and len(hit) == 1
          and abs(hit[0]["magnitude"] - oracle) <= 0.1 * oracle)
    mag = hit[0]["magnitude"] if hit else float("nan")
    record(8, "L1 continuity", ok, f"circle exponent {c.meta['exponent']:.3f} (>= 0.45), sphere jump {mag:.4f} vs pi/2 = {oracle:.4f}")


def test_09_brakke_vs_variational(sphere_fixture, circle_family):
    sphere = LevelFamily.from_field(sphere_fixture, [2.25, 2.5, 2.75])
    sphere_ok = True
    for s in sphere.levels:
        rep = verify_variational(sphere, s)
        sphere_ok &= rep.get("brakke").verdict == "pass"
        sphere_ok &= rep.get("distributional_velocity").verdict == "fail"
        sphere_ok &= rep.verdict == "not variational"
    circle = [verify_variational(circle_family, s).verdict for s in circle_family.levels]
    ok = sphere_ok and all(v == "variational" for v in circle)
    record(9, "Brakke vs variational", ok, f"sphere levels 2.25/2.5/2.75 Brakke-only: {sphere_ok}; circle verdicts {circle}")


def test_10_layer_cake(circle_run):
    u = circle_run
    g = u[0]
    gx, gy = gradient_grid(g)
    lip = float(np.hypot(gx, gy).max())
    dist = {}
    for n in (64, 128):
        p = LayerCakeParams.for_field(g, n)
        v = layer_cake(LevelFamily.from_field(u, p.levels()), p)
        dist[n] = (sup_norm_distance(u, v), p.ds + 4 * u.grid.h * lip)
    ok = dist[64][0] <= dist[64][1] and dist[128][0] < dist[64][0]
    record(10, "layer-cake round trip", ok,
           f"64 levels {dist[64][0]:.4f} (bound {dist[64][1]:.4f}), 128 levels {dist[128][0]:.4f}")


def test_11_fattening(lemniscate_run, circle_run):
    deltas = [0.1, 0.08, 0.06, 0.05, 0.04]
    lem = detect_fattening(lemniscate_run, 0.0, 0.05, deltas)
    cir = detect_fattening(circle_run, 0.0, 0.05, deltas)
    ok = lem.residual > 10 * max(cir.residual, 0.0) and lem.meta["fattening"] and not cir.meta["fattening"]
    record(11, "fattening detection", ok,
           f"lemniscate {lem.residual:.4f} (threshold {lem.meta['threshold']:.4f}), circle {cir.residual:.2e} (threshold {cir.meta['threshold']:.4f})")


def test_12_well_preparedness():
    g = make_grid((0, 0), 2.2, 257)
    data = {
        "circle": build_datum(DatumSpec("circle", {"R": 1.0}), g),
        "paraboloid": build_datum(DatumSpec("paraboloid"), g),
        "lemniscate": build_datum(DatumSpec("lemniscate"), make_grid((0, 0), 1.5, 257)),
    }
    plateau = {k: well_prepared_norm(f).plateau for k, f in data.items()}
    creased = well_prepared_norm(creased_fixture(g)).plateau
    record(12, "well-preparedness", all(plateau.values()) and not creased, f"plateau {plateau}, creased fixture plateau={creased}")


def test_13_viscosity(circle_run):
    s = check_viscosity_inequalities(circle_run, n_samples=200, seed=0)
    ok = s.passed and s.fraction_satisfied >= 0.99
    record(13, "viscosity spot checks", ok,
           f"{s.fraction_satisfied:.1%} of {s.n_checked} checked samples satisfied, {s.skipped} skipped, tolerance {s.tolerance:.3g} = {s.tolerance / circle_run.grid.h:.0f} h")


def test_14_determinism(tmp_path):
    cfg = {
        "datum": {"kind": "circle", "params": {"R": 1.0}},
        "grid": {"center": [0, 0], "half_width": 2.2, "n": 129},
        "solver": {"T": 0.2, "frame_dt": 0.01},
        "levels": {"values": [0.0]},
        "checks": ["variational", "viscosity", "comparison"],
        "partner": {"offset": 0.25},
        "seed": 3,
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    reports = []
    for name in ("a", "b"):
        run = tmp_path / name
        assert cli.main(["evolve", "--config", str(path), "--out", str(run)]) == 0
        cli.main(["verify", "--run", str(run)])
        reports.append((run / "verify" / "report.json").read_bytes())
    record(14, "determinism", reports[0] == reports[1], f"report.json byte-identical across runs ({len(reports[0])} bytes)")
