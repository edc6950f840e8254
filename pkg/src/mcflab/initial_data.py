"""Well-prepared initial data: radial profiles with flat cutoffs and the lemniscate."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidArgument
from .fields import Grid2, ScalarField, read_snapshot

__all__ = [
    "DatumSpec",
    "build_datum",
    "two_circles_datum",
    "well_prepared_norm",
    "WellPreparedness",
    "creased_fixture",
    "smoothstep5",
    "smooth_min",
    "smooth_max",
    "third_difference_bound",
    "radial_profile",
]

KINDS = ("circle", "two_circles", "paraboloid", "lemniscate", "custom")


def smoothstep5(q):
    """Quintic smoothstep: 0 for q <= 0, 1 for q >= 1, two vanishing derivatives at both ends."""
    q = np.clip(q, 0.0, 1.0)
    return q * q * q * (10.0 + q * (-15.0 + 6.0 * q))


def smoothstep5_prime(q):
    inside = (q > 0) & (q < 1)
    q = np.clip(q, 0.0, 1.0)
    return np.where(inside, 30.0 * q * q * (1.0 - q) ** 2, 0.0)


def smooth_min(a, b, k: float):
    """C2 polynomial smooth minimum; equals ``min(a, b)`` once ``|a - b| >= k``."""
    hh = np.maximum(k - np.abs(a - b), 0.0) / k
    return np.minimum(a, b) - hh**3 * k / 6.0


def smooth_max(a, b, k: float):
    return -smooth_min(-a, -b, k)


@dataclass
class DatumSpec:
    """Parameters of an initial datum.

    ``r_in``/``r_out`` bound the radial blend into the constant ``outside``
    value. ``None`` picks the kind's defaults (``1.5 R`` / ``2 R`` for circles,
    ``1.5`` / ``2`` for the paraboloid). The lemniscate uses ``clamp_width``
    instead of radial cutoffs.
    """

    kind: str
    params: dict = field(default_factory=dict)
    r_in: float | None = None
    r_out: float | None = None
    outside: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown datum kind {self.kind!r}; expected one of {KINDS}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "DatumSpec":
        d = dict(d)
        return cls(kind=d.pop("kind"), params=d.pop("params", {}), **d)


def radial_profile(base, r, r_in: float, r_out: float, outside: float | None = None):
    """Blend ``base(r)`` into a constant between ``r_in`` and ``r_out``."""
    if outside is None:
        outside = float(base(np.array(r_out)))
    S = smoothstep5((r - r_in) / (r_out - r_in))
    return base(r) * (1.0 - S) + outside * S


def _circle_values(grid: Grid2, center, R, r_in, r_out, outside):
    if R <= 0:
        raise InvalidArgument("circle radius must be positive")
    r_in = 1.5 * R if r_in is None else r_in
    r_out = 2.0 * R if r_out is None else r_out
    _check_radii(grid, center, R, r_in, r_out)
    X, Y = grid.mesh()
    r = np.hypot(X - center[0], Y - center[1])
    return radial_profile(lambda q: (q * q - R * R) / (2.0 * R), r, r_in, r_out, outside)


def _check_radii(grid: Grid2, center, R, r_in, r_out):
    if R is not None and not R < r_in < r_out:
        raise InvalidArgument(f"need R < r_in < r_out, got {R}, {r_in}, {r_out}")
    # B(center, r_out) must stay clear of the two outermost node rings
    margin = 2.5 * grid.h
    c = np.asarray(center, dtype=float)
    lo = np.array(grid.origin) + margin
    hi = np.array(grid.origin) + grid.h * (np.array(grid.shape) - 1) - margin
    if np.any(c - r_out < lo - 1e-12) or np.any(c + r_out > hi + 1e-12):
        raise InvalidArgument(f"cutoff radius {r_out} around {tuple(c)} exceeds the grid domain")


def build_datum(spec: DatumSpec, grid: Grid2) -> ScalarField:
    p = spec.params
    if spec.kind == "circle":
        values = _circle_values(grid, p.get("center", (0.0, 0.0)), p.get("R", 1.0), spec.r_in, spec.r_out, spec.outside)
    elif spec.kind == "paraboloid":
        r_in = 1.5 if spec.r_in is None else spec.r_in
        r_out = 2.0 if spec.r_out is None else spec.r_out
        center = p.get("center", (0.0, 0.0))
        if not 0 < r_in < r_out:
            raise InvalidArgument("need 0 < r_in < r_out")
        _check_radii(grid, center, None, r_in, r_out)
        X, Y = grid.mesh()
        r = np.hypot(X - center[0], Y - center[1])
        values = radial_profile(lambda q: q * q, r, r_in, r_out, spec.outside)
    elif spec.kind == "lemniscate":
        lo, hi = p.get("clamp", (-0.2, 1.0))
        width = p.get("clamp_width", 0.05)
        X, Y = grid.mesh()
        raw = (X * X + Y * Y) ** 2 - X * X + Y * Y
        values = smooth_min(smooth_max(raw, lo, width), hi, width)
        ring = np.concatenate([values[:2].ravel(), values[-2:].ravel(), values[:, :2].ravel(), values[:, -2:].ravel()])
        if np.any(ring != hi):
            raise InvalidArgument("lemniscate datum is not constant on the grid boundary; enlarge the grid")
    elif spec.kind == "two_circles":
        raise InvalidArgument("two_circles yields a pair of data; use two_circles_datum")
    else:  # custom
        f = read_snapshot(p["snapshot"], R_dom=grid.R_dom)
        if not f.grid.same_as(grid):
            raise InvalidArgument("custom snapshot grid does not match the requested grid")
        return ScalarField(grid, f.values, 0.0)
    return ScalarField(grid, values, 0.0)


def two_circles_datum(R1: float, R2: float, separation: float, grid: Grid2, axis=(1.0, 0.0)):
    """Two circle data whose zero levels are disjoint circles.

    ``separation`` is the distance between the centres, which sit
    symmetrically about the grid centre along ``axis``. ``separation = 0``
    gives concentric circles.
    """
    if R1 <= 0 or R2 <= 0:
        raise InvalidArgument("radii must be positive")
    if abs(R1 - R2) <= separation <= R1 + R2 or (separation == 0 and R1 == R2):
        raise InvalidArgument(f"circles R={R1}, R={R2} at distance {separation} intersect")
    e = np.asarray(axis, dtype=float)
    e = e / np.linalg.norm(e)
    c1 = grid.center - 0.5 * separation * e
    c2 = grid.center + 0.5 * separation * e
    fields = []
    for R, c in ((R1, c1), (R2, c2)):
        room = grid.R_dom - np.linalg.norm(c - grid.center) - 3 * grid.h
        r_out = min(2.0 * R, room)
        if r_out <= R:
            raise InvalidArgument(f"no room for a cutoff around the circle of radius {R}")
        r_in = R + 0.6 * (r_out - R)
        spec = DatumSpec("circle", {"center": tuple(float(x) for x in c), "R": R}, r_in=r_in, r_out=r_out)
        fields.append(build_datum(spec, grid))
    return fields[0], fields[1]


def creased_fixture(grid: Grid2, amplitude: float = 2e-4, wavenumber: float = 12.0) -> ScalarField:
    """Negative control: a plateau corrugated by creases with tiny slopes.

    ``|sin|`` has kinks wherever it vanishes; the regularized curvature of
    such small-gradient creases grows like ``1/eps`` instead of settling.
    """
    X, Y = grid.mesh()
    r = np.hypot(X - grid.center[0], Y - grid.center[1])
    w = 1.0 - smoothstep5((r - 0.5 * grid.R_dom) / (0.3 * grid.R_dom))
    return ScalarField(grid, amplitude * np.abs(np.sin(wavenumber * X)) * w, 0.0)


@dataclass
class WellPreparedness:
    eps: np.ndarray
    values: np.ndarray
    sup: float
    plateau: bool


def well_prepared_norm(g: ScalarField, eps_list=None, plateau_tol: float = 0.10) -> WellPreparedness:
    """Cell quadrature of ``|div(grad g / sqrt(|grad g|^2 + eps^2))|`` for each eps."""
    if eps_list is None:
        eps_list = [2.0**-k for k in range(7)]
    eps_arr = np.asarray(eps_list, dtype=float)
    if np.any(eps_arr <= 0) or np.any(eps_arr > 1) or np.any(np.diff(eps_arr) >= 0):
        raise InvalidArgument("eps_list must be descending within (0, 1]")
    h = g.grid.h
    v = g.values
    gx = np.zeros_like(v)
    gy = np.zeros_like(v)
    gx[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2 * h)
    gy[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * h)
    out = []
    for eps in eps_arr:
        norm = np.sqrt(gx * gx + gy * gy + eps * eps)
        Fx, Fy = gx / norm, gy / norm
        div = (Fx[2:, 1:-1] - Fx[:-2, 1:-1]) / (2 * h) + (Fy[1:-1, 2:] - Fy[1:-1, :-2]) / (2 * h)
        out.append(float(np.abs(div).sum() * h * h))
    vals = np.array(out)
    a, b = vals[-2], vals[-1]
    plateau = bool(abs(b - a) <= plateau_tol * max(abs(a), abs(b)) or max(abs(a), abs(b)) < 1e-14)
    return WellPreparedness(eps_arr, vals, float(vals.max()), plateau)


def third_difference_bound(g: ScalarField) -> float:
    """Largest third difference quotient along either axis."""
    v, h = g.values, g.grid.h
    dx = np.abs(np.diff(v, n=3, axis=0)).max() / h**3
    dy = np.abs(np.diff(v, n=3, axis=1)).max() / h**3
    return float(max(dx, dy))
