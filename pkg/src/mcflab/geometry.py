"""Level sets, sub-level sets and the measure-theoretic quantities attached to them."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from matplotlib.path import Path as MplPath
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import InvalidArgument
from .fields import Grid2, ScalarField, SpaceTimeField, bilinear, derivatives, gradient_grid, theta_grad

__all__ = [
    "Contour",
    "ContourField",
    "FinitePerimeterSet",
    "marching_squares",
    "sublevel_set",
    "perimeter",
    "enclosed_area",
    "curvature_on_contour",
    "normal_velocity_on_contour",
    "time_derivative_at",
    "boundary_distance",
    "hausdorff_distance",
    "sym_diff_area",
    "normalize_representative",
    "polyline_curvature",
    "signed_distance_to_set",
    "export_contour_csv",
]


@dataclass
class Contour:
    """Oriented polylines of one level set, the region ``{f < s}`` on the left.

    Closed components repeat their first vertex at the end. Components that
    run into the edge of the grid stay open.
    """

    components: list[np.ndarray]
    closed: list[bool]
    level: float = 0.0
    time_tag: float = 0.0
    meta: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, level: float = 0.0, time_tag: float = 0.0) -> "Contour":
        return cls([], [], level, time_tag)

    @property
    def is_empty(self) -> bool:
        return not self.components

    @property
    def n_components(self) -> int:
        return len(self.components)

    def _unique(self, k: int) -> np.ndarray:
        c = self.components[k]
        return c[:-1] if self.closed[k] else c

    def points(self) -> np.ndarray:
        """Distinct vertices of all components, concatenated."""
        if self.is_empty:
            return np.zeros((0, 2))
        return np.concatenate([self._unique(k) for k in range(self.n_components)])

    def component_ids(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros(0, dtype=int)
        return np.concatenate([np.full(len(self._unique(k)), k) for k in range(self.n_components)])

    def weights(self) -> np.ndarray:
        """Arc-length quadrature weight of each vertex (half of each adjacent segment)."""
        out = []
        for k, c in enumerate(self.components):
            seg = np.linalg.norm(np.diff(c, axis=0), axis=1)
            if self.closed[k]:
                out.append(0.5 * (seg + np.roll(seg, 1)))
            else:
                w = np.zeros(len(c))
                w[:-1] += 0.5 * seg
                w[1:] += 0.5 * seg
                out.append(w)
        return np.concatenate(out) if out else np.zeros(0)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        if self.is_empty:
            return np.zeros((0, 2)), np.zeros((0, 2))
        a = np.concatenate([c[:-1] for c in self.components])
        b = np.concatenate([c[1:] for c in self.components])
        return a, b

    def normals(self) -> np.ndarray:
        """Outward unit normals from the polyline (averaged over adjacent segments)."""
        out = []
        for k, c in enumerate(self.components):
            d = np.diff(c, axis=0)
            n_seg = np.column_stack([d[:, 1], -d[:, 0]])
            if self.closed[k]:
                n = n_seg + np.roll(n_seg, 1, axis=0)
            else:
                n = np.zeros((len(c), 2))
                n[:-1] += n_seg
                n[1:] += n_seg
            out.append(n / np.linalg.norm(n, axis=1, keepdims=True))
        return np.concatenate(out) if out else np.zeros((0, 2))


@dataclass
class ContourField:
    """Per-vertex data aligned with ``contour.points()``."""

    contour: Contour
    values: np.ndarray
    flagged: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.contour.points())
        if len(self.values) != n or len(self.flagged) != n:
            raise InvalidArgument("per-vertex arrays must match the vertex count")

    @property
    def flagged_fraction(self) -> float:
        w = self.contour.weights()
        total = w.sum()
        return float(w[self.flagged].sum() / total) if total > 0 else 0.0


# -- marching squares ----------------------------------------------------------


def marching_squares(f: ScalarField, s: float) -> Contour:
    """Extract ``{f = s}`` with ``{f < s}`` on the left of every polyline.

    Saddle cells are split according to the bilinear interpolant at the
    cell centre. Nodes lying exactly on the level are nudged upward by
    ``1e-12`` times the field range; the count is kept in ``meta``.
    """
    g = f.grid
    v = f.values
    hit = v == s
    n_pert = int(hit.sum())
    if n_pert:
        rng = float(v.max() - v.min()) or max(abs(s), 1.0)
        v = np.where(hit, s + 1e-12 * rng, v)
    inside = v < s
    corners = (inside[:-1, :-1], inside[1:, :-1], inside[1:, 1:], inside[:-1, 1:])
    code = corners[0] + 2 * corners[1] + 4 * corners[2] + 8 * corners[3]
    I, J = np.nonzero((code != 0) & (code != 15))
    meta = {"perturbed_nodes": n_pert, "saddle_cells": 0}
    if I.size == 0:
        return Contour([], [], float(s), f.time_tag, meta)

    ny = g.ny
    cb = np.stack([c[I, J] for c in corners])  # (4, M)
    edges = np.stack(
        [2 * (I * ny + J), 2 * ((I + 1) * ny + J) + 1, 2 * (I * ny + J + 1), 2 * (I * ny + J) + 1]
    )
    nxt = np.roll(cb, -1, axis=0)
    in_out = cb & ~nxt
    out_in = ~cb & nxt
    cell_code = code[I, J]
    saddle = (cell_code == 5) | (cell_code == 10)
    meta["saddle_cells"] = int(saddle.sum())
    center = 0.25 * (v[I, J] + v[I + 1, J] + v[I + 1, J + 1] + v[I, J + 1])
    cols = np.arange(I.size)

    plain = ~saddle
    starts = [edges[np.argmax(in_out[:, plain], axis=0), cols[plain]]]
    ends = [edges[np.argmax(out_in[:, plain], axis=0), cols[plain]]]
    if saddle.any():
        sc = cols[saddle]
        step = np.where(center[saddle] < s, 1, -1)
        for k0 in range(4):
            sel = in_out[k0, sc]
            starts.append(edges[k0, sc[sel]])
            ends.append(edges[(k0 + step[sel]) % 4, sc[sel]])
    starts = np.concatenate(starts)
    ends = np.concatenate(ends)

    link = dict(zip(starts.tolist(), ends.tolist()))
    end_set = set(ends.tolist())
    used: set[int] = set()
    chains: list[tuple[list[int], bool]] = []
    for e0 in starts.tolist():
        if e0 in end_set or e0 in used:
            continue
        chain = [e0]
        used.add(e0)
        e = e0
        while e in link:
            e = link[e]
            chain.append(e)
            used.add(e)
        chains.append((chain, False))
    for e0 in starts.tolist():
        if e0 in used:
            continue
        chain = [e0]
        used.add(e0)
        e = link[e0]
        while e != e0:
            chain.append(e)
            used.add(e)
            e = link[e]
        chain.append(e0)
        chains.append((chain, True))

    all_edges = np.unique(np.concatenate([np.asarray(c, dtype=np.int64) for c, _ in chains]))
    pts = _edge_points(all_edges, v, s, g)
    lookup = dict(zip(all_edges.tolist(), range(all_edges.size)))
    comps, closed = [], []
    tol = 1e-14 * g.h
    for chain, is_closed in chains:
        P = pts[[lookup[e] for e in chain]]
        keep = np.ones(len(P), dtype=bool)
        keep[1:] = np.linalg.norm(np.diff(P, axis=0), axis=1) > tol
        P = P[keep]
        if is_closed and len(P) < 4:
            continue
        comps.append(P)
        closed.append(is_closed)
    return Contour(comps, closed, float(s), f.time_tag, meta)


def _edge_points(ids: np.ndarray, v: np.ndarray, s: float, g: Grid2) -> np.ndarray:
    node = ids // 2
    vertical = (ids % 2).astype(bool)
    i, j = node // g.ny, node % g.ny
    i2 = np.where(vertical, i, i + 1)
    j2 = np.where(vertical, j + 1, j)
    va, vb = v[i, j], v[i2, j2]
    t = (s - va) / (vb - va)
    x = g.origin[0] + g.h * (i + np.where(vertical, 0.0, t))
    y = g.origin[1] + g.h * (j + np.where(vertical, t, 0.0))
    return np.column_stack([x, y])


def perimeter(c: Contour) -> float:
    return float(sum(np.linalg.norm(np.diff(comp, axis=0), axis=1).sum() for comp in c.components))


def enclosed_area(c: Contour) -> float:
    """Shoelace area of the closed components (counter-clockwise counts positive)."""
    total = 0.0
    for comp, closed in zip(c.components, c.closed):
        if closed:
            x, y = comp[:, 0], comp[:, 1]
            total += 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))
    return total


class FinitePerimeterSet:
    """Node indicator of a planar set together with its boundary contour.

    Each node stands for the ``h x h`` cell around it. The boundary is
    extracted lazily: from the generating field when one is known, and from
    the 0/1 indicator otherwise.
    """

    def __init__(
        self,
        grid: Grid2,
        indicator: np.ndarray,
        level: float | None = None,
        time_tag: float = 0.0,
        boundary: Contour | None = None,
        source: ScalarField | None = None,
    ):
        ind = np.asarray(indicator, dtype=bool)
        if ind.shape != grid.shape:
            raise InvalidArgument("indicator shape does not match the grid")
        ind.setflags(write=False)
        self.grid = grid
        self.indicator = ind
        self.level = level
        self.time_tag = time_tag
        self._source = source
        if boundary is not None:
            self.__dict__["boundary"] = boundary

    @cached_property
    def boundary(self) -> Contour:
        if self._source is not None and self.level is not None:
            return marching_squares(self._source, self.level)
        f = ScalarField(self.grid, (~self.indicator).astype(float), self.time_tag)
        c = marching_squares(f, 0.5)
        c.level = self.level if self.level is not None else 0.5
        return c

    @property
    def perimeter(self) -> float:
        return perimeter(self.boundary)

    @property
    def area(self) -> float:
        return float(self.indicator.sum()) * self.grid.h**2

    @property
    def is_empty(self) -> bool:
        return not self.indicator.any()

    def centroid(self) -> np.ndarray:
        X, Y = self.grid.mesh()
        if self.is_empty:
            return self.grid.center
        return np.array([X[self.indicator].mean(), Y[self.indicator].mean()])

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Point membership using the closed boundary polygons (even-odd rule)."""
        pts = np.atleast_2d(pts)
        inside = np.zeros(len(pts), dtype=bool)
        for comp, closed in zip(self.boundary.components, self.boundary.closed):
            if closed:
                inside ^= MplPath(comp).contains_points(pts)
        return inside


def sublevel_set(f: ScalarField, s: float) -> FinitePerimeterSet:
    """``{f < s}`` with its level contour."""
    return FinitePerimeterSet(f.grid, f.values < s, level=float(s), time_tag=f.time_tag, source=f)


# -- curvature and velocity on contours ---------------------------------------


def _node_curvature_data(f: ScalarField):
    gx, gy = gradient_grid(f)
    K = np.zeros(f.grid.shape)
    ux, uy, uxx, uyy, uxy = derivatives(f.values, f.grid.h)
    p2 = ux * ux + uy * uy
    with np.errstate(invalid="ignore", divide="ignore"):
        K[1:-1, 1:-1] = np.where(p2 > 0, (uy * uy * uxx - 2 * ux * uy * uxy + ux * ux * uyy) / p2, 0.0)
    return gx, gy, K


def _vertex_gradient(f: ScalarField, pts: np.ndarray, theta: float):
    gx, gy, K = _node_curvature_data(f)
    grad = bilinear(f.grid, np.stack([gx, gy], axis=-1), pts)
    num = bilinear(f.grid, K, pts)
    gn = np.hypot(grad[:, 0], grad[:, 1])
    return grad, gn, num, gn <= theta


def curvature_on_contour(f: ScalarField, c: Contour, theta: float | None = None) -> ContourField:
    """Signed curvature of the level curves of ``f`` at the vertices of ``c``.

    Positive where ``{f < s}`` is convex. Vertices where ``|grad f| <= theta``
    are flagged and get ``H = 0``.
    """
    theta = theta_grad(f) if theta is None else theta
    pts = c.points()
    if len(pts) == 0:
        return ContourField(c, np.zeros(0), np.zeros(0, dtype=bool))
    grad, gn, num, bad = _vertex_gradient(f, pts, theta)
    with np.errstate(invalid="ignore", divide="ignore"):
        H = np.where(bad, 0.0, num / gn)
    normals = np.where(bad[:, None], c.normals(), grad / np.where(gn > 0, gn, 1.0)[:, None])
    return ContourField(c, H, bad, {"normals": normals})


def time_derivative_at(u: SpaceTimeField, k: int, pts: np.ndarray) -> np.ndarray:
    """``d u / d t`` at points of frame ``k`` by frame differences.

    Centred where both one-sided differences agree; where they disagree by
    more than half their size (a jump in time) the smaller one is used.
    """
    g = u.grid
    here = bilinear(g, u[k].values, pts)
    fwd = (bilinear(g, u[k + 1].values, pts) - here) / u.dt if k + 1 < len(u) else None
    bwd = (here - bilinear(g, u[k - 1].values, pts)) / u.dt if k > 0 else None
    if fwd is None and bwd is None:
        raise InvalidArgument("need at least two frames for a time derivative")
    if fwd is None:
        return bwd
    if bwd is None:
        return fwd
    jump = np.abs(fwd - bwd) > 0.5 * np.maximum(np.abs(fwd), np.abs(bwd))
    smaller = np.where(np.abs(fwd) <= np.abs(bwd), fwd, bwd)
    return np.where(jump, smaller, 0.5 * (fwd + bwd))


def normal_velocity_on_contour(
    u: SpaceTimeField, s: float, t: float, contour: Contour | None = None, theta: float | None = None
) -> ContourField:
    """Outer normal velocity ``V = -u_t / |grad u|`` of ``{u(., t) < s}``."""
    k = u.frame_index(t)
    if len(u) < 2:
        raise InvalidArgument("need at least two frames")
    theta = theta_grad(u[0]) if theta is None else theta
    c = marching_squares(u[k], s) if contour is None else contour
    pts = c.points()
    if len(pts) == 0:
        return ContourField(c, np.zeros(0), np.zeros(0, dtype=bool))
    gx, gy = gradient_grid(u[k])
    grad = bilinear(u.grid, np.stack([gx, gy], axis=-1), pts)
    gn = np.hypot(grad[:, 0], grad[:, 1])
    bad = gn <= theta
    ut = time_derivative_at(u, k, pts)
    with np.errstate(invalid="ignore", divide="ignore"):
        V = np.where(bad, 0.0, -ut / gn)
    return ContourField(c, V, bad)


# -- field-free geometry for externally supplied sets -----------------------------


def polyline_curvature(c: Contour, arc: float) -> np.ndarray:
    """Signed curvature from the circle through each vertex and the points ``arc`` away.

    Counter-clockwise turning (convex for the inside-left orientation) is
    positive. Open components use one-sided fallbacks near their ends.
    """
    out = []
    for comp, closed in zip(c.components, c.closed):
        P = comp[:-1] if closed else comp
        n = len(P)
        seg = np.linalg.norm(np.diff(np.vstack([P, P[:1]]) if closed else P, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        L = s[-1]
        sv = s[:n]
        if closed:
            ext_s = np.concatenate([sv - L, sv, sv + L])
            ext_x = np.tile(P[:, 0], 3)
            ext_y = np.tile(P[:, 1], 3)
            lo = np.clip(sv - arc, sv - L, None)
            hi = sv + arc
        else:
            ext_s, ext_x, ext_y = sv, P[:, 0], P[:, 1]
            lo = np.clip(sv - arc, 0, L)
            hi = np.clip(sv + arc, 0, L)
        A = np.column_stack([np.interp(lo, ext_s, ext_x), np.interp(lo, ext_s, ext_y)])
        B = np.column_stack([np.interp(hi, ext_s, ext_x), np.interp(hi, ext_s, ext_y)])
        a, b, cc = P - A, B - P, B - A
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        denom = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1) * np.linalg.norm(cc, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out.append(np.where(denom > 0, 2.0 * cross / denom, 0.0))
    return np.concatenate(out) if out else np.zeros(0)


def signed_distance_to_set(pts: np.ndarray, E: FinitePerimeterSet) -> np.ndarray:
    """Distance from ``pts`` to the boundary of ``E``, negative inside."""
    pts = np.atleast_2d(pts)
    if E.boundary.is_empty:
        sign = np.where(E.indicator.any(), -1.0, 1.0)
        return np.full(len(pts), sign * np.inf)
    a, b = E.boundary.segments()
    d = _point_segment_min(pts, a, b)
    return np.where(E.contains(pts), -d, d)


# -- distances and set operations -----------------------------------------------


def _point_segment_brute(P, A, B, chunk: int = 1024) -> np.ndarray:
    AB = B - A
    L2 = np.maximum((AB * AB).sum(axis=1), 1e-300)
    out = np.empty(len(P))
    for lo in range(0, len(P), chunk):
        Q = P[lo : lo + chunk, None, :]
        t = np.clip(((Q - A) * AB).sum(axis=-1) / L2, 0.0, 1.0)
        D = Q - (A + t[..., None] * AB)
        out[lo : lo + chunk] = np.sqrt((D * D).sum(axis=-1)).min(axis=1)
    return out


def _point_segment_min(P: np.ndarray, A: np.ndarray, B: np.ndarray, k: int = 16) -> np.ndarray:
    """Exact distance from each point to the nearest segment ``[A_i, B_i]``.

    Candidates come from the ``k`` nearest segment midpoints; a segment closer
    than the nearest midpoint must have its midpoint within that distance
    plus half the longest segment, and points whose candidate ball is not
    covered fall back to a full scan.
    """
    if len(A) <= k:
        return _point_segment_brute(P, A, B)
    M = 0.5 * (A + B)
    half = 0.5 * float(np.linalg.norm(B - A, axis=1).max())
    dist, idx = cKDTree(M).query(P, k=k)
    a, b = A[idx], B[idx]
    ab = b - a
    L2 = np.maximum((ab * ab).sum(axis=-1), 1e-300)
    t = np.clip(((P[:, None, :] - a) * ab).sum(axis=-1) / L2, 0.0, 1.0)
    D = P[:, None, :] - (a + t[..., None] * ab)
    out = np.sqrt((D * D).sum(axis=-1)).min(axis=1)
    unsure = dist[:, -1] < dist[:, 0] + half
    if unsure.any():
        out[unsure] = _point_segment_brute(P[unsure], A, B)
    return out


def boundary_distance(a: Contour, b: Contour) -> float:
    """Smallest vertex-to-segment distance between two contours; ``inf`` if either is empty."""
    if a.is_empty or b.is_empty:
        return float("inf")
    pa, pb = a.points(), b.points()
    sa, sb = a.segments(), b.segments()
    return float(min(_point_segment_min(pa, *sb).min(), _point_segment_min(pb, *sa).min()))


def hausdorff_distance(a: Contour, b: Contour) -> float:
    if a.is_empty and b.is_empty:
        return 0.0
    if a.is_empty or b.is_empty:
        return float("inf")
    sa, sb = a.segments(), b.segments()
    return float(max(_point_segment_min(a.points(), *sb).max(), _point_segment_min(b.points(), *sa).max()))


def sym_diff_area(a: FinitePerimeterSet, b: FinitePerimeterSet) -> float:
    if not a.grid.same_as(b.grid):
        raise InvalidArgument("sets live on different grids")
    return float(np.count_nonzero(a.indicator ^ b.indicator)) * a.grid.h**2


_RING = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]])


def normalize_representative(a: FinitePerimeterSet) -> FinitePerimeterSet:
    """Drop isolated set cells and fill isolated holes (discrete density 0 / 1 points).

    Density is measured over the eight neighbours of a cell.
    """
    ind = a.indicator
    nbrs = ndimage.convolve(ind.astype(np.int8), _RING, mode="constant", cval=0)
    out = ind.copy()
    out[ind & (nbrs == 0)] = False
    full = ndimage.convolve(np.ones_like(ind, dtype=np.int8), _RING, mode="constant", cval=0)
    out[~ind & (nbrs == full) & (full == 8)] = True
    return FinitePerimeterSet(a.grid, out, level=a.level, time_tag=a.time_tag)


def export_contour_csv(path, c: Contour, V=None, H=None, flagged=None) -> None:
    """Write ``component_id, vertex_index, x, y`` and the optional V, H, flagged columns."""
    pts = c.points()
    ids = c.component_ids()
    idx = np.concatenate([np.arange(np.sum(ids == k)) for k in range(c.n_components)]) if len(ids) else ids
    header = ["component_id", "vertex_index", "x", "y"]
    cols = []
    for name, arr in (("V", V), ("H", H), ("flagged", flagged)):
        if arr is not None:
            header.append(name)
            cols.append(np.asarray(arr))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for n in range(len(pts)):
            row = [int(ids[n]), int(idx[n]), repr(float(pts[n, 0])), repr(float(pts[n, 1]))]
            for col in cols:
                row.append(int(col[n]) if col.dtype == bool else repr(float(col[n])))
            w.writerow(row)
