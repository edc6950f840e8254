"""Uniform grids, sampled scalar fields and the level-set curvature operator.

Values are stored as ``values[i, j]`` at the node ``(origin_x + i*h, origin_y + j*h)``,
so axis 0 runs along x and axis 1 along y.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, OutOfDomainError

__all__ = [
    "Grid2",
    "ScalarField",
    "SpaceTimeField",
    "make_grid",
    "gradient_central",
    "hessian_central",
    "mcf_operator",
    "derivatives",
    "mcf_operator_grid",
    "gradient_grid",
    "theta_grad",
    "bilinear",
    "write_snapshot",
    "read_snapshot",
]


@dataclass(frozen=True)
class Grid2:
    origin: tuple[float, float]
    h: float
    nx: int
    ny: int
    R_dom: float

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidArgument(f"grid spacing must be positive, got {self.h}")
        if self.nx < 4 or self.ny < 4:
            raise InvalidArgument(f"need at least 4 nodes per axis, got {self.nx}x{self.ny}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    @property
    def center(self) -> np.ndarray:
        return np.array(
            [self.origin[0] + 0.5 * self.h * (self.nx - 1), self.origin[1] + 0.5 * self.h * (self.ny - 1)]
        )

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def points(self) -> np.ndarray:
        """All node coordinates as an ``(nx*ny, 2)`` array in C order."""
        X, Y = self.mesh()
        return np.column_stack([X.ravel(), Y.ravel()])

    def sample(self, func) -> np.ndarray:
        X, Y = self.mesh()
        return np.asarray(func(X, Y), dtype=float) * np.ones(self.shape)

    def same_as(self, other: "Grid2") -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and np.isclose(self.h, other.h, rtol=1e-12, atol=0)
            and np.allclose(self.origin, other.origin, rtol=0, atol=1e-12 * max(1.0, self.h))
        )


def make_grid(center=(0.0, 0.0), half_width: float = 1.0, n: int = 65) -> Grid2:
    """Square grid of ``n x n`` nodes covering ``center +- half_width``.

    >>> make_grid((0, 0), 2.0, 5).h
    1.0
    """
    if not half_width > 0:
        raise InvalidArgument(f"half_width must be positive, got {half_width}")
    if n < 4:
        raise InvalidArgument(f"n must be >= 4, got {n}")
    cx, cy = (float(c) for c in np.broadcast_to(np.asarray(center, dtype=float), (2,)))
    h = 2.0 * half_width / (n - 1)
    return Grid2(origin=(cx - half_width, cy - half_width), h=h, nx=n, ny=n, R_dom=float(half_width))


@dataclass(frozen=True)
class ScalarField:
    grid: Grid2
    values: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise InvalidArgument(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid2, func, time_tag: float = 0.0) -> "ScalarField":
        return cls(grid, grid.sample(func), time_tag)

    @property
    def vmin(self) -> float:
        return float(self.values.min())

    @property
    def vmax(self) -> float:
        return float(self.values.max())

    def boundary_ring_constant(self, width: int = 2) -> bool:
        v = self.values
        ring = np.concatenate(
            [v[:width].ravel(), v[-width:].ravel(), v[:, :width].ravel(), v[:, -width:].ravel()]
        )
        return bool(np.all(ring == ring[0]))

    def with_values(self, values, time_tag: float | None = None) -> "ScalarField":
        return ScalarField(self.grid, values, self.time_tag if time_tag is None else time_tag)

    def __add__(self, c: float) -> "ScalarField":
        return self.with_values(self.values + c)


@dataclass(frozen=True)
class SpaceTimeField:
    """Frames of one evolution at times ``0, dt, 2 dt, ...``.

    ``dt`` is the spacing between stored frames, which may be a multiple of the
    solver step.
    """

    frames: tuple[ScalarField, ...]
    dt: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise InvalidArgument("a space-time field needs at least one frame")
        if not self.dt > 0:
            raise InvalidArgument("frame spacing must be positive")
        g = frames[0].grid
        for k, f in enumerate(frames):
            if not f.grid.same_as(g):
                raise InvalidArgument(f"frame {k} lives on a different grid")
            if not np.isclose(f.time_tag, k * self.dt, rtol=1e-9, atol=1e-12):
                raise InvalidArgument(f"frame {k} has time_tag {f.time_tag}, expected {k * self.dt}")
        object.__setattr__(self, "frames", frames)

    @classmethod
    def from_function(cls, grid: Grid2, func, dt: float, n_frames: int, **meta) -> "SpaceTimeField":
        """Sample ``func(X, Y, t)`` at ``n_frames`` times spaced ``dt``."""
        X, Y = grid.mesh()
        frames = []
        for k in range(n_frames):
            t = k * dt
            frames.append(ScalarField(grid, np.asarray(func(X, Y, t), dtype=float) * np.ones(grid.shape), t))
        return cls(tuple(frames), dt, dict(meta))

    @property
    def grid(self) -> Grid2:
        return self.frames[0].grid

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time_tag for f in self.frames])

    @property
    def T(self) -> float:
        return self.frames[-1].time_tag

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, k) -> ScalarField:
        return self.frames[k]

    def frame_index(self, t: float) -> int:
        k = int(round(t / self.dt))
        if k < 0 or k >= len(self.frames) or abs(k * self.dt - t) > 0.5 * self.dt + 1e-12:
            raise InvalidArgument(f"time {t} is outside the stored frames [0, {self.T}]")
        return k

    def stack(self) -> np.ndarray:
        return np.stack([f.values for f in self.frames])


# -- stencils ----------------------------------------------------------------


def _check_interior(f: ScalarField, i: int, j: int) -> None:
    if not (1 <= i < f.grid.nx - 1 and 1 <= j < f.grid.ny - 1):
        raise OutOfDomainError(f"node ({i}, {j}) has no full stencil on a {f.grid.nx}x{f.grid.ny} grid")


def gradient_central(f: ScalarField, i: int, j: int) -> np.ndarray:
    _check_interior(f, i, j)
    v, h = f.values, f.grid.h
    return np.array([(v[i + 1, j] - v[i - 1, j]) / (2 * h), (v[i, j + 1] - v[i, j - 1]) / (2 * h)])


def hessian_central(f: ScalarField, i: int, j: int) -> np.ndarray:
    _check_interior(f, i, j)
    v, h = f.values, f.grid.h
    uxx = (v[i + 1, j] - 2 * v[i, j] + v[i - 1, j]) / h**2
    uyy = (v[i, j + 1] - 2 * v[i, j] + v[i, j - 1]) / h**2
    uxy = (v[i + 1, j + 1] - v[i + 1, j - 1] - v[i - 1, j + 1] + v[i - 1, j - 1]) / (4 * h**2)
    return np.array([[uxx, uxy], [uxy, uyy]])


def theta_grad(g: ScalarField) -> float:
    """Gradient magnitude below which a node is treated as critical."""
    return 1e-3 * (g.vmax - g.vmin) / g.grid.R_dom


def _operator(ux, uy, uxx, uyy, uxy, eps: float, theta: float):
    p2 = ux * ux + uy * uy
    lap = uxx + uyy
    num = uy * uy * uxx - 2.0 * ux * uy * uxy + ux * ux * uyy + eps * eps * lap
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / (p2 + eps * eps)
    if eps == 0.0:
        out = np.where(p2 <= theta * theta, lap, out)
    return out


def mcf_operator(f: ScalarField, i: int, j: int, eps: float, theta: float | None = None) -> float:
    """Regularized level-set curvature operator at one interior node.

    Returns ``lap u - (grad u . D2u . grad u) / (|grad u|^2 + eps^2)``. With
    ``eps == 0`` and ``|grad u| < theta`` the anisotropic term is dropped.
    """
    if eps < 0:
        raise InvalidArgument("eps must be non-negative")
    p = gradient_central(f, i, j)
    H = hessian_central(f, i, j)
    if theta is None:
        theta = theta_grad(f)
    return float(_operator(p[0], p[1], H[0, 0], H[1, 1], H[0, 1], float(eps), theta))


def derivatives(v: np.ndarray, h: float):
    """Central differences on the interior of a raw array: ux, uy, uxx, uyy, uxy."""
    c = v[1:-1, 1:-1]
    e, w = v[2:, 1:-1], v[:-2, 1:-1]
    n, s = v[1:-1, 2:], v[1:-1, :-2]
    ux = (e - w) / (2 * h)
    uy = (n - s) / (2 * h)
    uxx = (e - 2 * c + w) / (h * h)
    uyy = (n - 2 * c + s) / (h * h)
    uxy = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4 * h * h)
    return ux, uy, uxx, uyy, uxy


def mcf_operator_grid(f: ScalarField, eps: float, theta: float | None = None) -> np.ndarray:
    """``mcf_operator`` at every node; the boundary ring is set to 0."""
    if theta is None:
        theta = theta_grad(f)
    out = np.zeros(f.grid.shape)
    out[1:-1, 1:-1] = _operator(*derivatives(f.values, f.grid.h), float(eps), theta)
    return out


def gradient_grid(f: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Central gradient at every node (zero on the frozen ring)."""
    gx = np.zeros(f.grid.shape)
    gy = np.zeros(f.grid.shape)
    v, h = f.values, f.grid.h
    gx[1:-1, 1:-1] = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * h)
    gy[1:-1, 1:-1] = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * h)
    return gx, gy


def bilinear(grid: Grid2, arr: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of node data ``arr`` (trailing dims allowed) at ``pts``."""
    pts = np.atleast_2d(pts)
    fx = (pts[:, 0] - grid.origin[0]) / grid.h
    fy = (pts[:, 1] - grid.origin[1]) / grid.h
    i = np.clip(np.floor(fx).astype(int), 0, grid.nx - 2)
    j = np.clip(np.floor(fy).astype(int), 0, grid.ny - 2)
    a = np.clip(fx - i, 0.0, 1.0)
    b = np.clip(fy - j, 0.0, 1.0)
    extra = (slice(None),) + (None,) * (arr.ndim - 2)
    a, b = a[extra], b[extra]
    return (
        (1 - a) * (1 - b) * arr[i, j]
        + a * (1 - b) * arr[i + 1, j]
        + a * b * arr[i + 1, j + 1]
        + (1 - a) * b * arr[i, j + 1]
    )



def bilinear_with_gradient(grid: Grid2, arr: np.ndarray, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear interpolant of 2D node data and its exact gradient at ``pts``.

    The gradient is that of the interpolant itself, so line integrals of it
    reproduce differences of the interpolated values.
    """
    pts = np.atleast_2d(pts)
    fx = (pts[:, 0] - grid.origin[0]) / grid.h
    fy = (pts[:, 1] - grid.origin[1]) / grid.h
    i = np.clip(np.floor(fx).astype(int), 0, grid.nx - 2)
    j = np.clip(np.floor(fy).astype(int), 0, grid.ny - 2)
    a = np.clip(fx - i, 0.0, 1.0)
    b = np.clip(fy - j, 0.0, 1.0)
    f00, f10, f11, f01 = arr[i, j], arr[i + 1, j], arr[i + 1, j + 1], arr[i, j + 1]
    val = (1 - a) * (1 - b) * f00 + a * (1 - b) * f10 + a * b * f11 + (1 - a) * b * f01
    gx = ((1 - b) * (f10 - f00) + b * (f11 - f01)) / grid.h
    gy = ((1 - a) * (f01 - f00) + a * (f11 - f10)) / grid.h
    return val, np.stack([gx, gy], axis=1)

# -- snapshot files -----------------------------------------------------------

_MAGIC = b"MCF1"
_HEADER = struct.Struct("<4sIIdddd")


def write_snapshot(f: ScalarField, path) -> None:
    g = f.grid
    header = _HEADER.pack(_MAGIC, g.nx, g.ny, g.h, g.origin[0], g.origin[1], f.time_tag)
    Path(path).write_bytes(header + np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path, R_dom: float | None = None) -> ScalarField:
    """Read a field written by :func:`write_snapshot`.

    The file carries no domain radius; without ``R_dom`` the half-width of the
    grid is used.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size or data[:4] != _MAGIC:
        raise InvalidArgument(f"{path}: not an MCF1 snapshot")
    _, nx, ny, h, ox, oy, t = _HEADER.unpack_from(data)
    expected = _HEADER.size + 8 * nx * ny
    if len(data) != expected:
        raise InvalidArgument(f"{path}: truncated snapshot ({len(data)} of {expected} bytes)")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(nx, ny)
    if R_dom is None:
        R_dom = 0.5 * h * (min(nx, ny) - 1)
    return ScalarField(Grid2((ox, oy), h, nx, ny, float(R_dom)), values, t)
