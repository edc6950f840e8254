"""Batch front end: ``evolve``, ``verify`` and ``reconstruct`` subcommands.

Exit codes: 0 all checks pass, 1 some check fails, 2 solver error, 3 I/O
or unusable configuration, 4 missing run data, 5 nesting violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import InsufficientData, InvalidArgument, NestingViolation, StabilityError
from .fields import ScalarField, SpaceTimeField, gradient_grid, make_grid, read_snapshot, write_snapshot
from .fixtures import vanishing_sphere
from .geometry import FinitePerimeterSet
from .initial_data import DatumSpec, build_datum, two_circles_datum
from .reconstruct import LayerCakeParams, check_level_consistency, layer_cake, sup_norm_distance
from .solver import SolverParams, check_viscosity_inequalities, evolve
from .verify import (
    CheckResult,
    LevelFamily,
    VerificationReport,
    check_avoidance,
    check_comparison,
    detect_fattening,
    verify_variational,
)

log = logging.getLogger("mcflab")

EXIT_OK, EXIT_FAIL, EXIT_SOLVER, EXIT_IO, EXIT_MISSING, EXIT_NESTING = range(6)
DEFAULT_CHECKS = ("variational",)
ALL_CHECKS = ("variational", "avoidance", "comparison", "fattening", "viscosity")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MCF_THREADS", "1")))
    except ValueError:
        return 1


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    if "grid" not in cfg or ("datum" not in cfg and "fixture" not in cfg):
        raise InvalidArgument("config needs 'grid' and either 'datum' or 'fixture'")
    return cfg


def _grid(cfg: dict):
    gc = cfg["grid"]
    return make_grid(tuple(gc.get("center", (0.0, 0.0))), float(gc["half_width"]), int(gc["n"]))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_frames(u: SpaceTimeField, folder: Path) -> dict:
    folder.mkdir(parents=True, exist_ok=True)
    sums = {}
    for k, f in enumerate(u.frames):
        p = folder / f"frame_{k:05d}.mcf"
        write_snapshot(f, p)
        sums[p.name] = _sha256(p)
    return sums


def _solver_params(cfg: dict) -> SolverParams:
    sc = dict(cfg.get("solver", {}))
    return SolverParams(**{k: sc[k] for k in ("T", "eps", "dt", "cfl_safety", "frame_dt") if k in sc})


def _partner_datum(cfg: dict, grid, g: ScalarField):
    if cfg.get("datum", {}).get("kind") == "two_circles":
        return None
    pc = cfg.get("partner")
    if not pc:
        return None
    if "offset" in pc:
        return g + float(pc["offset"])
    return build_datum(DatumSpec.from_dict(pc["datum"]), grid)


def cmd_evolve(cfg: dict, out: Path | None = None) -> int:
    out = Path(out or cfg.get("output", "run"))
    grid = _grid(cfg)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": cfg, "R_dom": grid.R_dom, "runs": {}}
    t0 = time.perf_counter()
    runs = {}
    if "fixture" in cfg and cfg["fixture"]:
        fx = dict(cfg["fixture"])
        if fx.pop("kind", "vanishing_sphere") != "vanishing_sphere":
            raise InvalidArgument("only the vanishing_sphere fixture is available")
        runs["primary"] = vanishing_sphere(grid, **fx)
    else:
        params = _solver_params(cfg)
        d = cfg["datum"]
        if d["kind"] == "two_circles":
            p = d["params"]
            g1, g2 = two_circles_datum(p["R1"], p["R2"], p.get("separation", 0.0), grid, tuple(p.get("axis", (1.0, 0.0))))
        else:
            g1 = build_datum(DatumSpec.from_dict(d), grid)
            g2 = _partner_datum(cfg, grid, g1)
        runs["primary"] = evolve(g1, params)
        if g2 is not None:
            runs["partner"] = evolve(g2, params)
    elapsed = time.perf_counter() - t0
    for name, u in runs.items():
        folder = out / ("frames" if name == "primary" else f"{name}/frames")
        manifest["runs"][name] = {
            "folder": str(folder.relative_to(out)),
            "n_frames": len(u),
            "frame_dt": u.dt,
            "meta": {k: v for k, v in u.meta.items() if isinstance(v, (int, float, str))},
            "checksums": _write_frames(u, folder),
        }
    manifest["timings"] = {"evolve_seconds": elapsed}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    log.info("wrote %d frames to %s", len(runs["primary"]), out)
    return EXIT_OK


def load_run(run: Path, name: str = "primary") -> SpaceTimeField:
    mpath = Path(run) / "manifest.json"
    if not mpath.exists():
        raise InsufficientData(f"{mpath} not found")
    manifest = json.loads(mpath.read_text())
    if name not in manifest["runs"]:
        raise InsufficientData(f"run {name!r} missing from {mpath}")
    entry = manifest["runs"][name]
    folder = Path(run) / entry["folder"]
    frames = []
    for k in range(entry["n_frames"]):
        p = folder / f"frame_{k:05d}.mcf"
        if not p.exists():
            raise InsufficientData(f"missing frame {p}")
        if _sha256(p) != entry["checksums"][p.name]:
            raise InsufficientData(f"checksum mismatch for {p}")
        frames.append(read_snapshot(p, R_dom=manifest["R_dom"]))
    return SpaceTimeField(tuple(frames), float(entry["frame_dt"]), dict(entry.get("meta", {})))


def _manifest(run: Path) -> dict:
    return json.loads((Path(run) / "manifest.json").read_text())


def choose_levels(cfg: dict, g: ScalarField, count: int | None) -> list[float]:
    lv = cfg.get("levels", {})
    if count is None and "values" in lv:
        return [float(s) for s in lv["values"]]
    k = count or int(lv.get("count", 3))
    lo, hi = g.vmin, g.vmax
    return [float(lo + (hi - lo) * (j + 1) / (k + 1)) for j in range(k)]


def _svg(fig, path: Path):
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = "mcflab"
    fig.savefig(path, format="svg", metadata={"Date": None})


def _plots(out: Path, fam: LevelFamily, reports: list[VerificationReport], cfg: dict):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = fam.times
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for s in fam.levels:
        ax.plot(t, [np.sqrt(E.area / np.pi) for E in fam.sets(s)], label=f"s = {s:g}")
    d = cfg.get("datum", {})
    if d.get("kind") == "circle":
        R = float(d.get("params", {}).get("R", 1.0))
        for s in fam.levels:
            r0 = R * R + 2 * R * s
            if r0 > 0:
                ax.plot(t, np.sqrt(np.clip(r0 - 2 * t, 0, None)), "k:", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("equivalent radius")
    ax.legend(fontsize=7)
    _svg(fig, out / "radius_vs_t.svg")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for s in fam.levels:
        ax.plot(t, [E.perimeter for E in fam.sets(s)], label=f"s = {s:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("perimeter")
    ax.legend(fontsize=7)
    _svg(fig, out / "perimeter_vs_t.svg")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    names = sorted({c.name for r in reports for c in r.checks})
    for name in names:
        xs, ys = [], []
        for r in reports:
            c = r.get(name)
            if c.scale and np.isfinite(c.residual) and c.scale > 0:
                xs.append(r.level)
                ys.append(abs(c.residual) / c.scale)
        ax.plot(xs, ys, "o-", label=name)
    ax.set_yscale("symlog", linthresh=1e-4)
    ax.set_xlabel("level s")
    ax.set_ylabel("|residual| / scale")
    ax.legend(fontsize=6)
    _svg(fig, out / "residuals_vs_level.svg")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for r in reports:
        c = r.get("l1_continuity")
        if c.verdict != "skipped":
            lags, m = np.array(c.meta["lags"], float), np.array(c.meta["modulus"], float)
            pos = m > 0
            if pos.any():
                ax.loglog(lags[pos], m[pos], "o-", label=f"s = {r.level:g}")
    ax.set_xlabel("time lag")
    ax.set_ylabel("max |Omega(t+lag) delta Omega(t)|")
    ax.legend(fontsize=7)
    _svg(fig, out / "l1_modulus.svg")
    plt.close(fig)


def cmd_verify(run: Path, levels: int | None = None, checks=None, seed: int | None = None, out: Path | None = None) -> int:
    run = Path(run)
    u = load_run(run)
    manifest = _manifest(run)
    cfg = manifest["config"]
    checks = list(checks or cfg.get("checks", DEFAULT_CHECKS))
    unknown = set(checks) - set(ALL_CHECKS)
    if unknown:
        raise InvalidArgument(f"unknown checks {sorted(unknown)}")
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    lv = choose_levels(cfg, u[0], levels)
    fam = LevelFamily.from_field(u, lv)
    out = Path(out or run / "verify")
    out.mkdir(parents=True, exist_ok=True)

    reports: list[VerificationReport] = []
    if "variational" in checks:
        for s in fam.levels:  # fill set caches serially, the checks then only read them
            fam.sets(s)
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            reports = list(pool.map(lambda s: verify_variational(fam, s), fam.levels))
        reports.sort(key=lambda r: r.level)

    extra: list[CheckResult] = []
    if "avoidance" in checks or "comparison" in checks:
        if "partner" not in manifest["runs"]:
            raise InsufficientData("avoidance/comparison need a partner run")
        w = load_run(run, "partner")
        if "avoidance" in checks:
            extra.append(check_avoidance(LevelFamily.from_field(u, [0.0]), 0.0, LevelFamily.from_field(w, [0.0]), 0.0))
        if "comparison" in checks:
            extra.append(check_comparison(u, w))
    if "fattening" in checks:
        fc = cfg.get("fattening", {})
        deltas = fc.get("deltas", [0.1, 0.08, 0.06, 0.05, 0.04])
        for t in fc.get("times", [0.05]):
            r = detect_fattening(u, float(fc.get("level", 0.0)), float(t), deltas)
            r.name = f"fattening@t={float(t):g}"
            extra.append(r)
    if "viscosity" in checks:
        vs = check_viscosity_inequalities(u, n_samples=int(cfg.get("viscosity_samples", 200)), seed=seed)
        extra.append(CheckResult.make("viscosity", max(0.0, 0.99 - vs.fraction_satisfied) + (0.0 if vs.passed else 1.0),
                                      1.0, 0.0, fraction_satisfied=vs.fraction_satisfied, checked=vs.n_checked,
                                      skipped=vs.skipped, tolerance_h=vs.tolerance, seed=seed))

    n_var = sum(r.verdict == "variational" for r in reports)
    doc = {
        "levels": [r.to_dict() for r in reports],
        "checks": [c.to_dict() for c in sorted(extra, key=lambda c: c.name)],
        "aggregate": f"foliation variational on {n_var} of {len(reports)} levels",
        "seed": seed,
    }
    ok = n_var == len(reports) and all(c.verdict == "pass" for c in extra)
    doc["verdict"] = "pass" if ok else "fail"
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    rows = ["level,check,residual,scale,tolerance,verdict"]
    for r in reports:
        rows += [",".join(map(str, row)) for row in r.csv_rows()]
    for c in sorted(extra, key=lambda c: c.name):
        d = c.to_dict()
        rows.append(",".join(map(str, ["", d["name"], d["residual"], d["scale"], d["tolerance"], d["verdict"]])))
    (out / "summary.csv").write_text("\n".join(rows) + "\n")
    if reports:
        _plots(out, fam, reports, cfg)
    print(doc["aggregate"])
    return EXIT_OK if ok else EXIT_FAIL


def _family_from_npz(path: Path, grid) -> LevelFamily:
    data = np.load(path)
    levels, times, inds = data["levels"], data["times"], data["indicators"].astype(bool)
    if inds.shape[:2] != (len(levels), len(times)) or inds.shape[2:] != grid.shape:
        raise InvalidArgument("npz family shape does not match levels, times and grid")
    sets = {
        float(s): [FinitePerimeterSet(grid, inds[a, k], level=float(s), time_tag=float(times[k])) for k in range(len(times))]
        for a, s in enumerate(levels)
    }
    return LevelFamily.from_sets(sets, times, grid)


def cmd_reconstruct(run: Path, levels: int = 64, family: Path | None = None, repair: bool = False,
                    consistency: bool = False, out: Path | None = None) -> int:
    run = Path(run)
    u = load_run(run)
    g = u[0]
    params = LayerCakeParams.for_field(g, levels)
    if family is None:
        fam = LevelFamily.from_field(u, params.levels())
    else:
        fam = _family_from_npz(Path(family), u.grid)
        params = LayerCakeParams.for_levels(fam.levels)
    v = layer_cake(fam, params, repair=repair)
    out = Path(out or run / f"reconstruct_{levels}")
    _write_frames(v, out / "frames")
    gx, gy = gradient_grid(g)
    lip = float(np.hypot(gx, gy).max())
    bound = params.ds + 4 * u.grid.h * lip
    checks = [CheckResult.make("sup_norm_distance", sup_norm_distance(u, v), bound, 1.0, ds=params.ds, K=params.K,
                               lipschitz=lip, n_levels=levels)]
    if consistency:
        checks.append(check_level_consistency(u, fam))
    rep = VerificationReport(None, checks)
    doc = rep.to_dict()
    doc["verdict"] = "pass" if all(c.passed for c in checks) else "fail"
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"sup |u - v| = {checks[0].residual:.6g} (bound {bound:.6g})")
    return EXIT_OK if doc["verdict"] == "pass" else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mcflab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    e = sub.add_parser("evolve", help="run the solver (or a closed-form fixture) and write frames")
    e.add_argument("--config", required=True)
    e.add_argument("--out")
    v = sub.add_parser("verify", help="run the verification suite on a run directory")
    v.add_argument("--run", required=True)
    v.add_argument("--levels", type=int)
    v.add_argument("--checks", help="comma separated subset of " + ",".join(ALL_CHECKS))
    v.add_argument("--seed", type=int)
    v.add_argument("--out")
    r = sub.add_parser("reconstruct", help="layer-cake reconstruction and distance report")
    r.add_argument("--run", required=True)
    r.add_argument("--levels", type=int, default=64)
    r.add_argument("--family", help="externally supplied family (.npz with levels, times, indicators)")
    r.add_argument("--repair", action="store_true", help="intersect non-nested sets instead of failing")
    r.add_argument("--consistency", action="store_true", help="also compare level curves with set boundaries")
    r.add_argument("--out")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "evolve":
            try:
                cfg = load_config(args.config)
            except (OSError, json.JSONDecodeError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_IO
            return cmd_evolve(cfg, args.out)
        if args.command == "verify":
            checks = args.checks.split(",") if args.checks else None
            return cmd_verify(Path(args.run), args.levels, checks, args.seed, args.out)
        return cmd_reconstruct(Path(args.run), args.levels, args.family, args.repair, args.consistency, args.out)
    except StabilityError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except NestingViolation as exc:
        print(f"nesting violation: {exc}", file=sys.stderr)
        return EXIT_NESTING
    except InsufficientData as exc:
        print(f"missing data: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (OSError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
