"""Explicit time stepping of level-set mean curvature flow and viscosity spot checks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

from .errors import InvalidArgument, StabilityError
from .fields import Grid2, ScalarField, SpaceTimeField, derivatives, theta_grad

__all__ = [
    "SolverParams",
    "stable_dt",
    "step_explicit",
    "evolve",
    "ViscosityCheckSample",
    "ViscositySummary",
    "check_viscosity_inequalities",
]

log = logging.getLogger(__name__)


@dataclass
class SolverParams:
    """Knobs for :func:`evolve`.

    ``eps=None`` uses one grid spacing, ``dt=None`` the stability bound scaled
    by ``cfl_safety``. Frames are stored every ``frame_dt`` (every step when
    ``None``); the step is shrunk slightly so that frames land on exact
    multiples of ``frame_dt``.
    """

    T: float
    eps: float | None = None
    dt: float | None = None
    cfl_safety: float = 1.0
    frame_dt: float | None = None

    def __post_init__(self):
        if not 0 < self.cfl_safety <= 1:
            raise InvalidArgument("cfl_safety must lie in (0, 1]")
        if self.T < 0:
            raise InvalidArgument("horizon must be non-negative")
        if self.eps is not None and self.eps < 0:
            raise InvalidArgument("eps must be non-negative")


def stable_dt(grid: Grid2, eps: float = 0.0, cfl_safety: float = 1.0) -> float:
    """Largest forward-Euler step, ``cfl_safety * h**2 / 8``.

    The diffusion matrix of the regularized operator has eigenvalues in
    ``[0, 1]`` for every ``eps >= 0``, so the bound does not depend on ``eps``.
    """
    if eps < 0:
        raise InvalidArgument("eps must be non-negative")
    return cfl_safety * grid.h**2 / 8.0


def _rhs(v: np.ndarray, h: float, eps: float, theta: float, out: np.ndarray) -> np.ndarray:
    ux, uy, uxx, uyy, uxy = derivatives(v, h)
    p2 = ux * ux + uy * uy
    num = uy * uy * uxx - 2.0 * ux * uy * uxy + ux * ux * uyy
    if eps > 0:
        num += eps * eps * (uxx + uyy)
        np.divide(num, p2 + eps * eps, out=out)
    else:
        crit = p2 <= theta * theta
        np.divide(num, np.where(crit, 1.0, p2), out=out)
        np.copyto(out, (uxx + uyy), where=crit)
    return out


def _advance_numpy(v, h, eps, theta, dt, n_steps):
    buf = np.empty((v.shape[0] - 2, v.shape[1] - 2))
    for _ in range(n_steps):
        v[1:-1, 1:-1] += dt * _rhs(v, h, eps, theta, buf)


def _advance_kernel(v, h, eps, theta, dt, n_steps):
    nx, ny = v.shape
    w = v.copy()
    e2 = eps * eps
    inv2h = 1.0 / (2.0 * h)
    invh2 = 1.0 / (h * h)
    inv4h2 = 0.25 * invh2
    for _ in range(n_steps):
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                c = v[i, j]
                ux = (v[i + 1, j] - v[i - 1, j]) * inv2h
                uy = (v[i, j + 1] - v[i, j - 1]) * inv2h
                uxx = (v[i + 1, j] - 2.0 * c + v[i - 1, j]) * invh2
                uyy = (v[i, j + 1] - 2.0 * c + v[i, j - 1]) * invh2
                uxy = (v[i + 1, j + 1] - v[i + 1, j - 1] - v[i - 1, j + 1] + v[i - 1, j - 1]) * inv4h2
                p2 = ux * ux + uy * uy
                num = uy * uy * uxx - 2.0 * ux * uy * uxy + ux * ux * uyy
                if e2 > 0.0:
                    rate = (num + e2 * (uxx + uyy)) / (p2 + e2)
                elif p2 <= theta * theta:
                    rate = uxx + uyy
                else:
                    rate = num / p2
                w[i, j] = c + dt * rate
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                v[i, j] = w[i, j]


if numba is not None:
    _advance = numba.njit(cache=True)(_advance_kernel)
else:  # pragma: no cover
    _advance = _advance_numpy


def step_explicit(f: ScalarField, dt: float, eps: float, theta: float | None = None) -> ScalarField:
    """One forward-Euler step; the outer node ring is copied unchanged."""
    bound = stable_dt(f.grid, eps)
    if dt > bound * (1 + 1e-12):
        raise StabilityError(f"dt={dt:.3e} exceeds the stability bound h^2/8={bound:.3e}")
    if theta is None:
        theta = theta_grad(f)
    v = np.array(f.values)
    _advance(v, f.grid.h, float(eps), float(theta), float(dt), 1)
    return ScalarField(f.grid, v, f.time_tag + dt)


def evolve(g: ScalarField, params: SolverParams) -> SpaceTimeField:
    """Approximate the viscosity solution starting at ``g`` up to ``params.T``."""
    grid = g.grid
    if not g.boundary_ring_constant():
        raise InvalidArgument("initial datum must be constant on the two outermost node rings")
    eps = grid.h if params.eps is None else float(params.eps)
    bound = stable_dt(grid, eps, params.cfl_safety)
    if params.dt is not None and params.dt > stable_dt(grid, eps) * (1 + 1e-12):
        raise StabilityError(f"dt={params.dt:.3e} exceeds the stability bound {stable_dt(grid, eps):.3e}")
    dt = bound if params.dt is None else float(params.dt)
    frame_dt = dt if params.frame_dt is None else float(params.frame_dt)
    if frame_dt < dt:
        frame_dt = dt
    per_frame = max(1, int(np.ceil(frame_dt / dt - 1e-9)))
    dt = frame_dt / per_frame
    n_frames = int(round(params.T / frame_dt))
    theta = theta_grad(g)

    v = np.array(g.values)
    frames = [ScalarField(grid, v, 0.0)]
    for k in range(1, n_frames + 1):
        _advance(v, grid.h, eps, float(theta), dt, per_frame)
        frames.append(ScalarField(grid, v, k * frame_dt))
    log.debug("evolved %d frames, %d steps of %.3e", n_frames + 1, n_frames * per_frame, dt)
    meta = {"eps": eps, "dt": dt, "frame_dt": frame_dt, "steps_per_frame": per_frame, "theta_grad": theta}
    return SpaceTimeField(tuple(frames), frame_dt, meta)


# -- viscosity inequalities ---------------------------------------------------


@dataclass
class ViscosityCheckSample:
    """One touching test quadratic.

    ``kind`` is ``"super"`` when ``u - phi`` has a local minimum (the
    super-solution inequality is tested) and ``"sub"`` for a local maximum.
    """

    location: tuple[float, float, float]
    kind: str
    branch: str
    phi_t: float
    phi_grad: tuple[float, float]
    phi_hess: tuple[tuple[float, float], tuple[float, float]]
    residual: float
    satisfied: bool


@dataclass
class ViscositySummary:
    samples: list[ViscosityCheckSample]
    skipped: int
    requested: int
    tolerance: float
    meta: dict = field(default_factory=dict)

    @property
    def n_checked(self) -> int:
        return len(self.samples)

    @property
    def fraction_satisfied(self) -> float:
        if not self.samples:
            return 0.0
        return sum(s.satisfied for s in self.samples) / len(self.samples)

    @property
    def passed(self) -> bool:
        return self.skipped <= 0.5 * self.requested and self.fraction_satisfied >= 0.99

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)


def _branch_value(kind: str, p: np.ndarray, B: np.ndarray, theta: float) -> tuple[str, float]:
    lap = B[0, 0] + B[1, 1]
    pn = float(np.hypot(*p))
    if pn > theta:
        nu = p / pn
        return "noncritical", lap - nu @ B @ nu
    lam = np.linalg.eigvalsh(B)
    # best |xi| <= 1 for the existential quantifier
    if kind == "super":
        return "critical", lap - max(lam[-1], 0.0)
    return "critical", lap - min(lam[0], 0.0)


def check_viscosity_inequalities(
    u: SpaceTimeField,
    n_samples: int = 200,
    tolerance: float | None = None,
    seed: int = 0,
    window: int = 6,
    margin: float = 0.25,
) -> ViscositySummary:
    """Sample touching quadratics and test the viscosity inequalities.

    Each sample picks a random interior node and frame, builds a spatial
    quadratic ``phi`` from the local derivatives of ``u`` shifted by a random
    slope and made strictly more convex (minimum) or concave (maximum) by
    ``margin`` times the local Hessian scale, and locates the discrete
    extremum of ``u - phi`` in a ``window``-node box. The time slope of
    ``phi`` is the centred time difference of ``u`` at the touching node; a
    quadratic time term of suitable sign turns the spatial extremum into a
    space-time one without changing that slope. A sample whose extremum
    sits on the box edge is skipped.

    ``tolerance`` defaults to ``10 h``.
    """
    grid = u.grid
    h = grid.h
    if tolerance is None:
        tolerance = 10.0 * h
    if len(u) < 3:
        raise InvalidArgument("need at least three frames")
    rng = np.random.default_rng(seed)
    theta = theta_grad(u[0])
    X, Y = grid.mesh()
    ring = window + 3
    samples: list[ViscosityCheckSample] = []
    skipped = 0
    for _ in range(n_samples):
        k = int(rng.integers(1, len(u) - 1))
        i = int(rng.integers(ring, grid.nx - ring))
        j = int(rng.integers(ring, grid.ny - ring))
        kind = "super" if rng.random() < 0.5 else "sub"
        v = u[k].values
        ux, uy, uxx, uyy, uxy = (d[i - 1, j - 1] for d in derivatives(v, h))
        A = np.array([[uxx, uxy], [uxy, uyy]])
        scale = max(np.abs(A).max(), 1.0)
        sgn = 1.0 if kind == "super" else -1.0
        B = A - sgn * margin * scale * np.eye(2)
        # random shift of the touching point by a few cells
        p = np.array([ux, uy]) + margin * scale * h * rng.normal(size=2) * 2.0
        x0 = np.array([X[i, j], Y[i, j]])
        sl = (slice(i - window, i + window + 1), slice(j - window, j + window + 1))
        dx = X[sl] - x0[0]
        dy = Y[sl] - x0[1]
        phi = v[i, j] + p[0] * dx + p[1] * dy + 0.5 * (B[0, 0] * dx * dx + 2 * B[0, 1] * dx * dy + B[1, 1] * dy * dy)
        diff = sgn * (v[sl] - phi)
        a, b = np.unravel_index(np.argmin(diff), diff.shape)
        if a in (0, 2 * window) or b in (0, 2 * window):
            skipped += 1
            continue
        ii, jj = i - window + a, j - window + b
        # a quadratic-in-time term in phi, concave or convex enough, makes the
        # touching point a space-time extremum without changing phi_t there
        fwd = u[k + 1].values[ii, jj] - u[k].values[ii, jj]
        bwd = u[k].values[ii, jj] - u[k - 1].values[ii, jj]
        phi_t = (fwd + bwd) / (2 * u.dt)
        xs = np.array([X[ii, jj], Y[ii, jj]])
        grad_phi = p + B @ (xs - x0)
        branch, F = _branch_value(kind, grad_phi, B, theta)
        residual = phi_t - F
        ok = residual >= -tolerance if kind == "super" else residual <= tolerance
        samples.append(
            ViscosityCheckSample(
                location=(float(xs[0]), float(xs[1]), float(u[k].time_tag)),
                kind=kind,
                branch=branch,
                phi_t=float(phi_t),
                phi_grad=(float(grad_phi[0]), float(grad_phi[1])),
                phi_hess=((float(B[0, 0]), float(B[0, 1])), (float(B[1, 0]), float(B[1, 1]))),
                residual=float(residual),
                satisfied=bool(ok),
            )
        )
    return ViscositySummary(samples, skipped, n_samples, float(tolerance), {"seed": seed, "window": window})
