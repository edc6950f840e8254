"""Residual checks for the weak solution concepts of mean curvature flow.

Every check returns a :class:`CheckResult` carrying the residual, the scale
it is measured against and the tolerance, with ``pass`` exactly when
``|residual| <= tolerance * scale``. One-sided inequalities store the
positive part of the raw defect as the residual and keep the raw value in
``meta``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage
from scipy.integrate import trapezoid

from .errors import ConstructionError, InsufficientData, InvalidArgument
from .fields import Grid2, SpaceTimeField, bilinear_with_gradient, gradient_grid, theta_grad
from .geometry import (
    FinitePerimeterSet,
    boundary_distance,
    curvature_on_contour,
    marching_squares,
    normal_velocity_on_contour,
    perimeter,
    polyline_curvature,
    signed_distance_to_set,
    sublevel_set,
)
from .initial_data import smoothstep5, smoothstep5_prime

__all__ = [
    "TestFunction",
    "space_time_bump",
    "plateau_function",
    "position_field",
    "rotation_field",
    "build_localization_fE",
    "standard_battery",
    "LevelFamily",
    "CheckResult",
    "VerificationReport",
    "check_perimeter_bound",
    "check_velocity_L2",
    "residual_distributional_velocity",
    "residual_distributional_curvature",
    "brakke_residual",
    "check_avoidance",
    "check_comparison",
    "l1_continuity_modulus",
    "detect_fattening",
    "verify_variational",
]

DEGENERATE_LIMIT = 0.05
DEFAULT_TOL = 0.05
GRAD_SLACK = 0.02


# -- test functions --------------------------------------------------------------


@dataclass(frozen=True)
class _TimeProfile:
    """``bump``: ``(1 - ((t - a) / b)^2)^3_+``; ``cutoff``: 1 before ``a``, 0 after ``b``; ``const``: 1."""

    kind: str
    a: float = 0.0
    b: float = 1.0

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "bump":
            q = 1.0 - ((t - self.a) / self.b) ** 2
            return np.where(q > 0, q, 0.0) ** 3
        if self.kind == "cutoff":
            return 1.0 - smoothstep5((t - self.a) / (self.b - self.a))
        return np.ones_like(t)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "bump":
            q = 1.0 - ((t - self.a) / self.b) ** 2
            return np.where(q > 0, 3.0 * q * q * (-2.0 * (t - self.a) / self.b**2), 0.0)
        if self.kind == "cutoff":
            return -smoothstep5_prime((t - self.a) / (self.b - self.a)) / (self.b - self.a)
        return np.zeros_like(t)

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "bump":
            return self.a - self.b, self.a + self.b
        if self.kind == "cutoff":
            return -math.inf, self.b
        return -math.inf, math.inf


@dataclass(frozen=True)
class TestFunction:
    """Separable test function ``amp * eta(t) * spatial(x)``.

    ``kind`` is one of ``bump``, ``plateau``, ``localization`` (scalar) or
    ``position``, ``rotation`` (vector fields ``(x - c) chi`` and
    ``(x - c)^perp chi``). Scalar radial profiles are polynomial bumps of
    radius ``radius`` or plateaus equal to 1 on ``B(c, r1)`` that vanish
    beyond ``radius``. Localizations carry gridded values and gradients.
    """

    __test__ = False  # not a pytest class

    kind: str
    center: tuple[float, float]
    radius: float
    time: _TimeProfile = _TimeProfile("const")
    r1: float = 0.0
    amp: float = 1.0
    grid: Grid2 | None = None
    table: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def is_vector(self) -> bool:
        return self.kind in ("position", "rotation")

    @property
    def window(self) -> tuple[float, float]:
        return self.time.support

    def scaled(self, c: float) -> "TestFunction":
        return replace(self, amp=self.amp * c)

    # spatial parts
    def _radial(self, pts):
        d = pts - np.asarray(self.center)
        r = np.hypot(d[:, 0], d[:, 1])
        if self.kind == "bump":
            q = 1.0 - (r / self.radius) ** 2
            val = np.where(q > 0, q, 0.0) ** 3
            dval = np.where(q > 0, -6.0 * q * q / self.radius**2, 0.0)  # d val / d x = dval * (x - c)
            return val, dval[:, None] * d
        width = self.radius - self.r1
        val = 1.0 - smoothstep5((r - self.r1) / width)
        with np.errstate(invalid="ignore", divide="ignore"):
            dr = -smoothstep5_prime((r - self.r1) / width) / width
            grad = np.where(r[:, None] > 0, dr[:, None] * d / r[:, None], 0.0)
        return val, grad

    def spatial(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Spatial factor and its gradient (scalar kinds only)."""
        pts = np.atleast_2d(pts)
        if self.kind == "localization":
            return bilinear_with_gradient(self.grid, self.table[..., 0], pts)
        return self._radial(pts)

    def spatial_grid(self, grid: Grid2) -> np.ndarray:
        if self.kind == "localization":
            return self.table[..., 0]
        return self.spatial(grid.points())[0].reshape(grid.shape)

    def value(self, pts, t):
        pts = np.atleast_2d(pts)
        eta = self.amp * self.time.value(t)
        if self.is_vector:
            chi, _ = self._plateau_part(pts)
            return eta * self._field(pts) * chi[:, None]
        return eta * self.spatial(pts)[0]

    def grad(self, pts, t):
        return self.amp * self.time.value(t) * self.spatial(pts)[1]

    def time_derivative(self, pts, t):
        pts = np.atleast_2d(pts)
        if self.is_vector:
            chi, _ = self._plateau_part(pts)
            return self.amp * self.time.deriv(t) * self._field(pts) * chi[:, None]
        return self.amp * self.time.deriv(t) * self.spatial(pts)[0]

    # vector parts
    def _plateau_part(self, pts):
        return replace(self, kind="plateau")._radial(pts)

    def _field(self, pts):
        d = pts - np.asarray(self.center)
        return d if self.kind == "position" else np.column_stack([-d[:, 1], d[:, 0]])

    def jacobian(self, pts, t):
        """``J[n, a, b] = d xi_a / d x_b``."""
        pts = np.atleast_2d(pts)
        chi, gchi = self._plateau_part(pts)
        A = self._field(pts)
        dA = np.eye(2) if self.kind == "position" else np.array([[0.0, -1.0], [1.0, 0.0]])
        J = A[:, :, None] * gchi[:, None, :] + chi[:, None, None] * dA[None]
        return self.amp * self.time.value(t) * J

    def support_box(self) -> tuple[float, float, float, float]:
        if self.kind == "localization":
            X, Y = self.grid.mesh()
            m = self.table[..., 0] > 0
            if not m.any():
                return (0.0, 0.0, 0.0, 0.0)
            return X[m].min(), X[m].max(), Y[m].min(), Y[m].max()
        cx, cy = self.center
        return cx - self.radius, cx + self.radius, cy - self.radius, cy + self.radius

    def check_admissible(self, grid: Grid2, T: float, open_start: bool = False) -> None:
        """Raise unless the support stays off the two outer node rings and inside the time window."""
        x0, x1, y0, y1 = self.support_box()
        lo = np.array(grid.origin) + 2 * grid.h
        hi = np.array(grid.origin) + grid.h * (np.array(grid.shape) - 1) - 2 * grid.h
        if x0 < lo[0] or y0 < lo[1] or x1 > hi[0] or y1 > hi[1]:
            raise InvalidArgument(f"{self.kind} test function support touches the grid boundary")
        t0, t1 = self.window
        if self.time.kind != "const" and t1 >= T + 1e-12:
            raise InvalidArgument(f"{self.kind} test function is not compactly supported before T={T}")
        if open_start and t0 <= 0:
            raise InvalidArgument(f"{self.kind} vector field must vanish near t = 0")


def space_time_bump(center, radius, t_center=0.0, t_radius=None, amp=1.0) -> TestFunction:
    time = _TimeProfile("const") if t_radius is None else _TimeProfile("bump", t_center, t_radius)
    return TestFunction("bump", tuple(map(float, center)), float(radius), time, amp=amp)


def plateau_function(center, r1, r2, t_cut=None, amp=1.0) -> TestFunction:
    """1 on ``B(center, r1)``, 0 outside ``B(center, r2)``; ``t_cut=(a, b)`` adds a decay in time."""
    time = _TimeProfile("const") if t_cut is None else _TimeProfile("cutoff", *t_cut)
    return TestFunction("plateau", tuple(map(float, center)), float(r2), time, r1=float(r1), amp=amp)


def position_field(center, r1, r2, t_center, t_radius) -> TestFunction:
    return TestFunction("position", tuple(map(float, center)), float(r2), _TimeProfile("bump", t_center, t_radius), r1=r1)


def rotation_field(center, r1, r2, t_center, t_radius) -> TestFunction:
    return TestFunction("rotation", tuple(map(float, center)), float(r2), _TimeProfile("bump", t_center, t_radius), r1=r1)


def build_localization_fE(E: FinitePerimeterSet, c1: float, moll: float | None = None) -> TestFunction:
    """Time-independent cutoff that is 0 off ``E`` and 1 deeper than ``c1`` inside it.

    A linear ramp in the distance to the boundary between ``c1/3`` and
    ``2 c1/3`` is smoothed by a Gaussian of width ``moll / 3``, compactly
    truncated at ``moll``. With ``moll <= c1/6`` the smoothed ramp still
    vanishes on the outer shell and saturates on the inner one.
    """
    h = E.grid.h
    if not c1 > 4 * h:
        raise InvalidArgument(f"c1 = {c1} must exceed 4h = {4 * h}")
    moll = c1 / 6 if moll is None else moll
    if not 0 < moll <= c1 / 6 + 1e-15:
        raise InvalidArgument("mollifier radius must lie in (0, c1/6]")
    if E.is_empty:
        raise ConstructionError("cannot localize to an empty set")
    dist = ndimage.distance_transform_edt(E.indicator) * h
    if not (dist > c1).any():
        raise ConstructionError(f"set has no points deeper than c1 = {c1}")
    ramp = np.clip((dist - c1 / 3) / (c1 / 3), 0.0, 1.0)
    sigma = moll / 3 / h
    f = ndimage.gaussian_filter(ramp, sigma, mode="nearest", truncate=3.0)
    f = np.clip(f, 0.0, 1.0)
    f[~E.indicator] = 0.0
    f[dist > c1] = 1.0
    gx = np.zeros_like(f)
    gy = np.zeros_like(f)
    gx[1:-1, :] = (f[2:] - f[:-2]) / (2 * h)
    gy[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2 * h)
    gmax = float(np.hypot(gx, gy).max())
    # the bound is sharp for the ramp; allow for the grid error of EDT and differencing
    if f.min() < 0 or f.max() > 1 or gmax > 3.0 / c1 * (1 + GRAD_SLACK):
        raise ConstructionError(f"localization gradient {gmax} exceeds 3/c1 = {3.0 / c1}")
    table = np.stack([f, gx, gy], axis=-1)
    table.setflags(write=False)
    c = E.centroid()
    return TestFunction("localization", (float(c[0]), float(c[1])), c1, grid=E.grid, table=table, r1=c1)


def standard_battery(fam: "LevelFamily", s: float) -> dict[str, list[TestFunction]]:
    """Fixed test-function battery for one level.

    Twelve space-time bumps on three spatial scales and four time centres
    (placed on the interface at their time centre), a plateau with a time
    decay, the position and rotation fields, and localizations to the
    initial set at ``c1 = 6h`` and ``12h``.
    """
    g = fam.grid
    h = g.h
    T = fam.T
    sets = fam.sets(s)
    lo = np.array(g.origin) + 3 * h
    hi = np.array(g.origin) + g.h * (np.array(g.shape) - 1) - 3 * h

    def room(c):
        return float(min((c - lo).min(), (hi - c).min()))

    base = sets[0] if not sets[0].boundary.is_empty else next((E for E in sets if not E.boundary.is_empty), None)
    out = {"zeta": [], "xi": [], "brakke": []}
    if base is None:
        return out
    pts0 = base.boundary.points()
    c0 = 0.5 * (pts0.min(axis=0) + pts0.max(axis=0))
    L = max(math.sqrt(max(base.area, h * h) / math.pi), 4 * h)
    tau = T / 5
    for j, tc in enumerate((0.0, T / 4, T / 2, 3 * T / 4)):
        kc = fam.index_of(tc)
        alive = [k for k in range(kc + 1) if not sets[k].boundary.is_empty]
        P = sets[alive[-1]].boundary.points() if alive else pts0
        cpt = P[(j * len(P)) // 4]
        for scale in (0.25, 0.5, 1.0):
            r = min(scale * L, room(cpt))
            if r > 3 * h:
                out["zeta"].append(space_time_bump(cpt, r, tc, tau))
    rmax = float(np.linalg.norm(pts0 - c0, axis=1).max())
    r1 = rmax + 4 * h
    space = room(c0) - r1
    if space > 4 * h:
        r2 = r1 + min(0.5 * max(rmax, 4 * h), space)
        out["zeta"].append(plateau_function(c0, r1, r2, t_cut=(0.1 * T, 0.9 * T)))
        out["xi"].append(position_field(c0, r1, r2, T / 2, 0.45 * T))
        out["xi"].append(rotation_field(c0, r1, r2, T / 2, 0.45 * T))
        out["brakke"].append(plateau_function(c0, r1, r2))
    out["brakke"].extend(space_time_bump(z.center, z.radius) for z in out["zeta"] if z.kind == "bump")
    for c1 in (6 * h, 12 * h):
        try:
            out["brakke"].append(build_localization_fE(sets[0], c1))
        except (ConstructionError, InvalidArgument):
            pass
    return out


# -- level families ----------------------------------------------------------------


@dataclass
class Interface:
    """Quadrature data of one interface slice."""

    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    H: np.ndarray
    V: np.ndarray
    degenerate: np.ndarray

    @property
    def good_weights(self) -> np.ndarray:
        return np.where(self.degenerate, 0.0, self.weights)

    @property
    def degenerate_fraction(self) -> float:
        tot = self.weights.sum()
        return float(self.weights[self.degenerate].sum() / tot) if tot > 0 else 0.0


class LevelFamily:
    """Sub-level sets ``Omega_s(t)`` for a list of levels over a common time grid.

    Families extracted from a field compute curvature and velocity from the
    field; externally supplied families fall back on polyline geometry.
    """

    def __init__(self, levels, times, grid: Grid2, provenance: str, field: SpaceTimeField | None = None,
                 sets: dict | None = None):
        self.levels = sorted(float(s) for s in levels)
        self.times = np.asarray(times, dtype=float)
        if len(self.times) < 1:
            raise InvalidArgument("a family needs at least one frame")
        self.grid = grid
        self.provenance = provenance
        self.field = field
        self._sets = dict(sets or {})
        self._iface: dict = {}
        self._theta = theta_grad(field[0]) if field is not None else 0.0
        if sets is not None:
            for s, lst in self._sets.items():
                if len(lst) != len(self.times):
                    raise InvalidArgument(f"level {s} has {len(lst)} sets for {len(self.times)} frames")
                for E in lst:
                    if not E.grid.same_as(grid):
                        raise InvalidArgument("all sets must share the family grid")

    @classmethod
    def from_field(cls, u: SpaceTimeField, levels) -> "LevelFamily":
        return cls(levels, u.times, u.grid, "extracted-from-field", field=u)

    @classmethod
    def from_sets(cls, sets: dict, times, grid: Grid2) -> "LevelFamily":
        return cls(list(sets), times, grid, "externally-supplied", sets={float(k): list(v) for k, v in sets.items()})

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def index_of(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def _level(self, s: float) -> float:
        lv = np.asarray(self.levels)
        j = int(np.argmin(np.abs(lv - s)))
        spread = float(np.diff(lv).min()) if lv.size > 1 else max(1.0, abs(s))
        if abs(lv[j] - s) <= 1e-9 * spread:
            return self.levels[j]
        raise InvalidArgument(f"level {s} is not part of the family")

    def sets(self, s: float) -> list[FinitePerimeterSet]:
        s = self._level(s)
        if s not in self._sets:
            self._sets[s] = [sublevel_set(f, s) for f in self.field.frames]
        return self._sets[s]

    def interface(self, s: float, k: int) -> Interface:
        s = self._level(s)
        key = (s, k)
        if key not in self._iface:
            self._iface[key] = self._compute_interface(s, k)
        return self._iface[key]

    def _compute_interface(self, s: float, k: int) -> Interface:
        E = self.sets(s)[k]
        c = E.boundary
        pts, w = c.points(), c.weights()
        if len(pts) == 0:
            z = np.zeros(0)
            return Interface(np.zeros((0, 2)), z, np.zeros((0, 2)), z, z, np.zeros(0, dtype=bool))
        if self.field is not None:
            Hf = curvature_on_contour(self.field[k], c, self._theta)
            if len(self.times) > 1:
                Vf = normal_velocity_on_contour(self.field, s, self.times[k], contour=c, theta=self._theta)
                V, bad_v = Vf.values, Vf.flagged
            else:
                V, bad_v = np.zeros(len(pts)), np.zeros(len(pts), dtype=bool)
            return Interface(pts, w, Hf.meta["normals"], Hf.values, V, Hf.flagged | bad_v)
        H = polyline_curvature(c, 3 * self.grid.h)
        V = self._geometric_velocity(s, k, pts)
        return Interface(pts, w, c.normals(), H, V, np.zeros(len(pts), dtype=bool))

    def _geometric_velocity(self, s: float, k: int, pts: np.ndarray) -> np.ndarray:
        sets = self.sets(s)
        dt = self.dt
        if dt == 0:
            return np.zeros(len(pts))
        fwd = -signed_distance_to_set(pts, sets[k + 1]) / dt if k + 1 < len(sets) else None
        bwd = signed_distance_to_set(pts, sets[k - 1]) / dt if k > 0 else None
        if fwd is None:
            fwd = bwd
        if bwd is None:
            bwd = fwd
        fwd = np.where(np.isfinite(fwd), fwd, bwd)
        bwd = np.where(np.isfinite(bwd), bwd, fwd)
        jump = np.abs(fwd - bwd) > 0.5 * np.maximum(np.abs(fwd), np.abs(bwd))
        V = np.where(jump, np.where(np.abs(fwd) <= np.abs(bwd), fwd, bwd), 0.5 * (fwd + bwd))
        return np.where(np.isfinite(V), V, 0.0)

    def singular_frames(self, s: float, window: int = 2) -> list[int]:
        """Frames within ``window`` of a topology change (component count or emptiness)."""
        sets = self.sets(s)
        counts = [E.boundary.n_components if not E.is_empty else -1 for E in sets]
        changes = [k for k in range(1, len(counts)) if counts[k] != counts[k - 1]]
        out = set()
        for k in changes:
            out.update(range(max(0, k - window), min(len(sets), k + window)))
        return sorted(out)


def _trapezoid(n: int, dt: float) -> np.ndarray:
    w = np.full(n, dt)
    if n == 1:
        return np.zeros(1)
    w[0] = w[-1] = 0.5 * dt
    return w


# -- reports -------------------------------------------------------------------------


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return x


@dataclass
class CheckResult:
    name: str
    residual: float
    scale: float
    tolerance: float
    verdict: str
    meta: dict = field(default_factory=dict)

    @classmethod
    def make(cls, name, residual, scale, tolerance, **meta) -> "CheckResult":
        residual, scale = float(residual), float(scale)
        ok = math.isfinite(residual) and abs(residual) <= tolerance * scale
        return cls(name, residual, scale, float(tolerance), "pass" if ok else "fail", meta)

    @classmethod
    def skipped(cls, name, reason: str, **meta) -> "CheckResult":
        return cls(name, math.nan, math.nan, math.nan, "skipped", {"reason": reason, **meta})

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return _clean({"name": self.name, "residual": self.residual, "scale": self.scale,
                       "tolerance": self.tolerance, "verdict": self.verdict, "meta": self.meta})


@dataclass
class VerificationReport:
    level: float | None
    checks: list[CheckResult]

    @property
    def verdict(self) -> str:
        return "variational" if all(c.verdict == "pass" for c in self.checks) else "not variational"

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        checks = sorted(self.checks, key=lambda c: c.name)
        return {"level": _clean(self.level), "checks": [c.to_dict() for c in checks], "verdict": self.verdict}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def csv_rows(self) -> list[list]:
        return [[_clean(self.level), c.name, _clean(c.residual), _clean(c.scale), _clean(c.tolerance), c.verdict]
                for c in sorted(self.checks, key=lambda c: c.name)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "check", "residual", "scale", "tolerance", "verdict"])
        w.writerows(self.csv_rows())
        return buf.getvalue()


# -- individual checks --------------------------------------------------------------


def check_perimeter_bound(fam: LevelFamily, s: float, tol: float = 0.1) -> CheckResult:
    """Perimeter must stay finite and not exceed its early maximum by more than ``tol``."""
    P = np.array([E.perimeter for E in fam.sets(s)])
    head = float(P[:3].max())
    sup = float(P.max())
    if not np.all(np.isfinite(P)):
        return CheckResult.make("perimeter_bound", math.inf, head, tol, sup=sup)
    return CheckResult.make("perimeter_bound", max(sup - head, 0.0), head, tol, sup=sup,
                            argsup_time=float(fam.times[int(P.argmax())]), perimeters=P)


def check_velocity_L2(fam: LevelFamily, s: float, t_end: float | None = None, expected: float | None = None,
                      tol: float = DEFAULT_TOL) -> CheckResult:
    """``int int V^2 dmu dt`` by trapezoidal time quadrature up to ``t_end``."""
    k_end = len(fam.times) - 1 if t_end is None else fam.index_of(t_end)
    tw = _trapezoid(k_end + 1, fam.dt)
    total, frac = 0.0, 0.0
    for k in range(k_end + 1):
        I = fam.interface(s, k)
        total += tw[k] * float(np.sum(I.good_weights * I.V**2))
        frac = max(frac, I.degenerate_fraction)
    meta = {"value": total, "degenerate_fraction": frac, "t_end": float(fam.times[k_end])}
    if frac > DEGENERATE_LIMIT:
        return CheckResult.make("velocity_L2", math.inf, 1.0, 0.0, diagnostic="degenerate vertex fraction above 5%", **meta)
    if not math.isfinite(total):
        return CheckResult.make("velocity_L2", math.inf, 1.0, 0.0, **meta)
    if expected is not None:
        return CheckResult.make("velocity_L2", total - expected, abs(expected), tol, expected=expected, **meta)
    return CheckResult.make("velocity_L2", 0.0, 1.0, 0.0, **meta)


def _hat_weights(fn, times: np.ndarray, k1: int = 0, k2: int | None = None, sub: int = 32) -> np.ndarray:
    """``w_k = int fn(t) phi_k(t) dt`` over ``[t_k1, t_k2]`` for the piecewise-linear hats ``phi_k``.

    Frame data enter linearly in time (the trapezoidal rule) while the known
    time profile of a test function is integrated accurately.
    """
    k2 = len(times) - 1 if k2 is None else k2
    w = np.zeros(len(times))
    th = np.linspace(0.0, 1.0, sub + 1)
    for k in range(k1, k2):
        dtk = times[k + 1] - times[k]
        v = np.asarray(fn(times[k] + th * dtk), dtype=float) * np.ones_like(th)
        w[k] += trapezoid(v * (1.0 - th), th) * dtk
        w[k + 1] += trapezoid(v * th, th) * dtk
    return w


def _velocity_terms(fam: LevelFamily, s: float, z: TestFunction):
    g = fam.grid
    rho = z.amp * z.spatial_grid(g)
    w_eta = _hat_weights(lambda t: np.abs(z.time.value(t)), fam.times)
    w_deta = _hat_weights(z.time.deriv, fam.times)
    w_sgn = _hat_weights(z.time.value, fam.times)
    w_adeta = _hat_weights(lambda t: np.abs(z.time.deriv(t)), fam.times)
    lhs = rhs = scale = 0.0
    for k, E in enumerate(fam.sets(s)):
        if w_eta[k] == 0 and w_adeta[k] == 0 and k > 0:
            continue
        A = float(rho[E.indicator].sum()) * g.h**2
        lhs += w_deta[k] * A
        scale += w_adeta[k] * float(np.abs(rho[E.indicator]).sum()) * g.h**2
        I = fam.interface(s, k)
        if len(I.points):
            r = z.amp * z.spatial(I.points)[0]
            rhs -= w_sgn[k] * float(np.sum(I.good_weights * r * I.V))
            scale += w_eta[k] * float(np.sum(I.good_weights * np.abs(r * I.V)))
        if k == 0:
            eta0 = float(z.time.value(fam.times[0]))
            rhs -= eta0 * A
            scale += abs(eta0 * A)
    return lhs, rhs, scale


def _worst(name: str, items: list, tol: float, **meta) -> CheckResult:
    """Aggregate per-function (label, lhs, rhs, scale) tuples by the largest relative defect."""
    if not items:
        return CheckResult.skipped(name, "no admissible test functions", **meta)
    rel = [abs(l - r) / sc if sc > 0 else (0.0 if l == r else math.inf) for _, l, r, sc in items]
    j = int(np.argmax(rel))
    label, l, r, sc = items[j]
    per = [{"function": lab, "lhs": a, "rhs": b, "scale": c, "relative": e} for (lab, a, b, c), e in zip(items, rel)]
    return CheckResult.make(name, l - r, sc, tol, worst=label, per_function=per, **meta)


def residual_distributional_velocity(fam: LevelFamily, s: float, zetas: list[TestFunction],
                                     tol: float = DEFAULT_TOL) -> CheckResult:
    """``int int_Omega d_t zeta = -int zeta V dmu dt - int_Omega0 zeta(., 0)`` for each ``zeta``."""
    items = []
    for n, z in enumerate(zetas):
        z.check_admissible(fam.grid, fam.T)
        l, r, sc = _velocity_terms(fam, s, z)
        items.append((f"{z.kind}[{n}]", l, r, sc))
    return _worst("distributional_velocity", items, tol, singular_frames=fam.singular_frames(s))


def residual_distributional_curvature(fam: LevelFamily, s: float, xis: list[TestFunction],
                                      tol: float = DEFAULT_TOL) -> CheckResult:
    """``int int (div xi - nu . grad xi nu) dmu dt = -int int V xi . nu dmu dt`` for each ``xi``."""
    items = []
    for n, xi in enumerate(xis):
        if not xi.is_vector:
            raise InvalidArgument("curvature identity needs vector test fields")
        xi.check_admissible(fam.grid, fam.T, open_start=True)
        w_eta = _hat_weights(xi.time.value, fam.times)
        w_abs = _hat_weights(lambda t: np.abs(xi.time.value(t)), fam.times)
        steady = replace(xi, time=_TimeProfile("const"))
        lhs = rhs = scale = 0.0
        for k, t in enumerate(fam.times):
            if w_abs[k] == 0:
                continue
            I = fam.interface(s, k)
            if not len(I.points):
                continue
            J = steady.jacobian(I.points, t)
            val = steady.value(I.points, t)
            nu = I.normals
            tdiv = J[:, 0, 0] + J[:, 1, 1] - np.einsum("na,nab,nb->n", nu, J, nu)
            w = I.good_weights
            lhs += w_eta[k] * float(np.sum(w * tdiv))
            rhs -= w_eta[k] * float(np.sum(w * I.V * np.sum(val * nu, axis=1)))
            scale += w_abs[k] * float(np.sum(w * (np.abs(I.V) * np.linalg.norm(val, axis=1) + np.linalg.norm(J, axis=(1, 2)))))
        items.append((f"{xi.kind}[{n}]", lhs, rhs, scale))
    return _worst("distributional_curvature", items, tol, singular_frames=fam.singular_frames(s))


def _brakke_terms(fam: LevelFamily, s: float, f: TestFunction, k1: int, k2: int):
    w_eta = _hat_weights(f.time.value, fam.times, k1, k2)
    w_deta = _hat_weights(f.time.deriv, fam.times, k1, k2)
    steady = replace(f, time=_TimeProfile("const"))

    def mass(k):
        I = fam.interface(s, k)
        if not len(I.points):
            return 0.0
        return float(f.time.value(fam.times[k])) * float(np.sum(I.good_weights * steady.value(I.points, 0.0)))

    diss = dis_scale = 0.0
    for k in range(k1, k2 + 1):
        I = fam.interface(s, k)
        if not len(I.points):
            continue
        rho, grad = steady.spatial(I.points)
        rho, grad = f.amp * rho, f.amp * grad
        w = I.good_weights
        curv = float(np.sum(w * (I.H**2 * rho + I.H * np.sum(I.normals * grad, axis=1))))
        diss += w_eta[k] * curv - w_deta[k] * float(np.sum(w * rho))
        dis_scale += w_eta[k] * float(np.sum(w * I.H**2 * rho))
    m1, m2 = mass(k1), mass(k2)
    return m2 + diss - m1, m1 + dis_scale, {"mass_t1": m1, "mass_t2": m2, "dissipation": diss}


def brakke_residual(fam: LevelFamily, s: float, f: TestFunction, t1: float, t2: float,
                    tol: float = DEFAULT_TOL) -> CheckResult:
    """One-sided Brakke defect ``mu_t2(f) + int int (|H|^2 f + H.grad f - d_t f) - mu_t1(f)``.

    The mean curvature vector is taken as ``H nu`` with the outer normal ``nu``
    and ``H > 0`` on convex sets, i.e. the first variation is ``+int H.X``.
    """
    if f.is_vector:
        raise InvalidArgument("Brakke test functions are scalar")
    if not t1 < t2:
        raise InvalidArgument("need t1 < t2")
    vals = f.spatial_grid(fam.grid)
    if f.amp < 0 or vals.min() < -1e-14:
        raise InvalidArgument("Brakke test functions must be non-negative")
    k1, k2 = fam.index_of(t1), fam.index_of(t2)
    raw, scale, meta = _brakke_terms(fam, s, f, k1, k2)
    return CheckResult.make("brakke", max(raw, 0.0), scale, tol, raw=raw, t1=float(fam.times[k1]),
                            t2=float(fam.times[k2]), **meta)


def brakke_battery(fam: LevelFamily, s: float, fs: list[TestFunction], t1: float, t2: float,
                   tol: float = DEFAULT_TOL) -> CheckResult:
    worst, per = None, []
    for n, f in enumerate(fs):
        r = brakke_residual(fam, s, f, t1, t2, tol)
        rel = r.residual / r.scale if r.scale > 0 else (0.0 if r.residual == 0 else math.inf)
        per.append({"function": f"{f.kind}[{n}]", "raw": r.meta["raw"], "scale": r.scale, "relative": rel})
        if worst is None or rel > worst[0]:
            worst = (rel, r, f"{f.kind}[{n}]")
    if worst is None:
        return CheckResult.skipped("brakke", "no admissible test functions")
    _, r, label = worst
    return CheckResult(r.name, r.residual, r.scale, r.tolerance, r.verdict, {**r.meta, "worst": label, "per_function": per})


def check_avoidance(famA: LevelFamily, sA: float, famB: LevelFamily, sB: float, slack: float | None = None) -> CheckResult:
    """Boundary distance must not drop below its initial value minus ``2h``."""
    slack = 2 * famA.grid.h if slack is None else slack
    A, B = famA.sets(sA), famB.sets(sB)
    d0 = boundary_distance(A[0].boundary, B[0].boundary)
    if not math.isfinite(d0) or d0 <= 0:
        return CheckResult.skipped("avoidance", "initial boundaries are not disjoint", d0=d0)
    ds, ts = [], []
    for k in range(min(len(A), len(B))):
        d = boundary_distance(A[k].boundary, B[k].boundary)
        if not math.isfinite(d):
            break
        ds.append(d)
        ts.append(float(famA.times[k]))
    dmin = float(min(ds))
    return CheckResult.make("avoidance", max(0.0, d0 - slack - dmin), 1.0, 0.0, d0=d0, min_distance=dmin,
                            distances=ds, times=ts)


def check_comparison(uA: SpaceTimeField, uB: SpaceTimeField) -> CheckResult:
    """Count nodes where the ordering ``uA <= uB`` fails at any frame (no tolerance)."""
    if not uA.grid.same_as(uB.grid) or len(uA) != len(uB):
        raise InvalidArgument("fields must share grid and frames")
    if (uA[0].values > uB[0].values).any():
        return CheckResult.skipped("comparison", "initial data are not ordered")
    per = [int(np.count_nonzero(a.values > b.values)) for a, b in zip(uA.frames, uB.frames)]
    gaps = [float((b.values - a.values).min()) for a, b in zip(uA.frames, uB.frames)]
    bad = [float(uA.times[k]) for k, c in enumerate(per) if c]
    return CheckResult.make("comparison", sum(per), 1.0, 0.0, violations_per_frame=per, min_gap=min(gaps),
                            violating_times=bad)


def l1_continuity_modulus(fam: LevelFamily, s: float, min_exponent: float = 0.45, jump_factor: float = 10.0) -> CheckResult:
    """Modulus ``m(lag) = max_t |Omega(t + lag) delta Omega(t)|`` over dyadic lags.

    Fails when the fitted Hoelder exponent is below ``min_exponent`` or when a
    single frame-to-frame change exceeds ``jump_factor`` times the median one.
    """
    sets = fam.sets(s)
    n = len(sets)
    if n < 8:
        raise InsufficientData(f"need at least 8 frames, got {n}")
    h2 = fam.grid.h**2
    inds = np.stack([E.indicator for E in sets])
    lags, m = [], []
    lag = 1
    while lag <= (n - 1) // 2:
        D = np.count_nonzero(inds[lag:] ^ inds[:-lag], axis=(1, 2)) * h2
        lags.append(lag)
        m.append(float(D.max()))
        lag *= 2
    D1 = np.count_nonzero(inds[1:] ^ inds[:-1], axis=(1, 2)) * h2
    med = float(np.median(D1))
    floor = max(jump_factor * med, jump_factor * h2)
    jumps = [{"time": float(fam.times[k + 1]), "magnitude": float(D1[k]), "excess": float(D1[k] - med)}
             for k in np.nonzero(D1 > floor)[0]]
    m = np.array(m)
    H = np.array(lags) * fam.dt
    pos = m > 0
    if pos.sum() >= 2:
        exponent = float(np.polyfit(np.log(H[pos]), np.log(m[pos]), 1)[0])
    elif pos.sum() == 0:
        exponent = math.inf
    else:
        exponent = 0.0
    residual = max(min_exponent - exponent, 0.0) + len(jumps)
    return CheckResult.make("l1_continuity", residual, 1.0, 0.0, exponent=exponent, lags=H, modulus=m,
                            median_step=med, jumps=jumps)


def detect_fattening(u: SpaceTimeField, s: float, t: float, deltas, factor: float = 10.0) -> CheckResult:
    """Extrapolate the band area ``|{s - delta <= u < s + delta}|`` to ``delta -> 0``.

    The intercept of a linear fit is the fattening indicator; it is flagged
    when it exceeds ``factor * h * P``. Deltas must exceed ``2h`` times the
    largest gradient of ``u`` in the widest band.
    """
    d = np.asarray(sorted(deltas, reverse=True), dtype=float)
    if len(d) < 2 or np.any(d <= 0):
        raise InvalidArgument("need at least two positive deltas")
    f = u[u.frame_index(t)]
    h = f.grid.h
    gx, gy = gradient_grid(f)
    band = np.abs(f.values - s) <= d[0]
    # nodes next to a crossing of the level count even when the band misses them
    below = f.values < s
    cross = np.zeros_like(band)
    cross[:-1] |= below[:-1] != below[1:]
    cross[1:] |= below[:-1] != below[1:]
    cross[:, :-1] |= below[:, :-1] != below[:, 1:]
    cross[:, 1:] |= below[:, :-1] != below[:, 1:]
    band |= cross
    band[[0, -1], :] = False
    band[:, [0, -1]] = False
    lip = float(np.hypot(gx, gy)[band].max()) if band.any() else 0.0
    if d[-1] <= 2 * h * lip:
        raise InvalidArgument(f"smallest delta {d[-1]} not above 2h*Lip = {2 * h * lip}")
    area = np.array([np.count_nonzero((f.values >= s - dl) & (f.values < s + dl)) * h * h for dl in d])
    slope, intercept = np.polyfit(d, area, 1)
    P = perimeter(marching_squares(f, s))
    threshold = factor * h * P
    fat = bool(intercept > threshold)
    return CheckResult("fattening", float(intercept), float(h * P), factor, "fail" if fat else "pass",
                       _clean({"fattening": fat, "threshold": threshold, "deltas": d, "areas": area,
                               "slope": slope, "lipschitz": lip, "time": float(f.time_tag), "perimeter": P}))


def verify_variational(fam: LevelFamily, s: float, battery: dict | None = None, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Aggregate the checks defining a variational solution for level ``s``."""
    battery = standard_battery(fam, s) if battery is None else battery
    checks = [check_perimeter_bound(fam, s), check_velocity_L2(fam, s)]
    checks.append(residual_distributional_velocity(fam, s, battery["zeta"], tol))
    checks.append(residual_distributional_curvature(fam, s, battery["xi"], tol))
    checks.append(brakke_battery(fam, s, battery["brakke"], 0.0, fam.T, tol))
    try:
        checks.append(l1_continuity_modulus(fam, s))
    except InsufficientData as exc:
        checks.append(CheckResult.skipped("l1_continuity", str(exc)))
    return VerificationReport(float(s), checks)
