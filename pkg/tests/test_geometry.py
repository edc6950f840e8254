import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcflab import (
    DatumSpec,
    FinitePerimeterSet,
    InvalidArgument,
    LevelFamily,
    ScalarField,
    build_datum,
    boundary_distance,
    curvature_on_contour,
    make_grid,
    marching_squares,
    normal_velocity_on_contour,
    normalize_representative,
    perimeter,
    sublevel_set,
    sym_diff_area,
)
from mcflab.fixtures import exact_radial_flow, stationary_flow
from mcflab.geometry import Contour, enclosed_area, export_contour_csv, hausdorff_distance

# ellipse curvature at (a, 0) is a / b^2; frozen from the parametric formula
# kappa(th) = a b / (a^2 sin^2 th + b^2 cos^2 th)^(3/2) at th = 0, a = 2, b = 1
ELLIPSE_KAPPA = 2.0
ANNULUS_AREA = 0.3141592653589793  # pi (1 - 0.9)


def disc_field(n=257, hw=2.0, R=1.0, c=(0.0, 0.0)):
    g = make_grid((0, 0), hw, n)
    return ScalarField.from_function(g, lambda X, Y: (X - c[0]) ** 2 + (Y - c[1]) ** 2 - R * R)


def _segments_cross(P, Q):
    """True if any segment of polyline P properly crosses one of Q (skipping shared endpoints)."""
    a, b = P[:-1], P[1:]
    c, d = Q[:-1], Q[1:]

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

    A, B, C, D = a[:, None], b[:, None], c[None], d[None]
    o1, o2 = orient(A, B, C), orient(A, B, D)
    o3, o4 = orient(C, D, A), orient(C, D, B)
    hit = (o1 * o2 < 0) & (o3 * o4 < 0)
    return bool(hit.any())


def test_circle_contour():
    f = disc_field()
    c = marching_squares(f, 0.0)
    assert c.n_components == 1 and c.closed[0]
    P = c.components[0]
    np.testing.assert_array_equal(P[0], P[-1])
    r = np.hypot(P[:, 0], P[:, 1])
    assert np.abs(r - 1).max() < f.grid.h
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    assert seg.min() > 0 and seg.max() <= 2 * f.grid.h
    assert perimeter(c) == pytest.approx(2 * math.pi, rel=0.02)
    assert enclosed_area(c) > 0  # interior {f < s} on the left


def test_empty_contour():
    f = disc_field(n=33)
    assert marching_squares(f, -5.0).is_empty
    assert perimeter(marching_squares(f, -5.0)) == 0.0


def test_saddle_resolution_xy():
    g = make_grid((0, 0), 1.0, 32)  # even: origin is a cell centre
    f = ScalarField.from_function(g, lambda X, Y: X * Y)
    c = marching_squares(f, 0.0)
    assert c.meta["saddle_cells"] >= 1
    assert c.n_components == 2
    A, B = c.components
    assert not _segments_cross(A, B)
    assert not _segments_cross(A, A) and not _segments_cross(B, B)


def test_node_on_level_is_perturbed():
    g = make_grid((0, 0), 1.0, 33)  # odd: origin is a node
    f = ScalarField.from_function(g, lambda X, Y: X * Y)
    c = marching_squares(f, 0.0)
    assert c.meta["perturbed_nodes"] > 0


def test_lemniscate_two_lobes():
    for n in (256, 257):
        f = build_datum(DatumSpec("lemniscate"), make_grid((0, 0), 1.5, n))
        E = sublevel_set(f, 0.0)
        assert E.boundary.n_components == 2
        A, B = E.boundary.components
        assert not _segments_cross(A, B)
        xs = sorted(comp[:, 0].mean() for comp in E.boundary.components)
        assert xs[0] < 0 < xs[1]


def test_sublevel_examples():
    f = disc_field()
    E = sublevel_set(f, 0.0)
    assert E.perimeter == pytest.approx(2 * math.pi, rel=0.02)
    assert abs(E.area - math.pi) <= 2 * f.grid.h * E.perimeter
    full = sublevel_set(f, 1e3)
    assert full.perimeter == 0.0 and full.area == pytest.approx(f.grid.h**2 * f.grid.nx * f.grid.ny)
    assert sublevel_set(f, -2.0).is_empty


def test_two_circle_additivity():
    g = make_grid((0, 0), 3.0, 257)
    f = ScalarField.from_function(g, lambda X, Y: np.minimum((X - 1.3) ** 2 + Y**2, (X + 1.3) ** 2 + Y**2) - 1)
    c = marching_squares(f, 0.0)
    assert c.n_components == 2
    assert perimeter(c) == pytest.approx(4 * math.pi, rel=0.02)


def test_curvature_examples():
    f = disc_field()
    c = marching_squares(f, 0.0)
    H = curvature_on_contour(f, c)
    assert len(H.values) == len(c.points())
    assert np.abs(H.values - 1).max() <= 0.03
    assert H.flagged_fraction == 0.0

    g = make_grid((0, 0), 2.0, 65)
    ramp = ScalarField.from_function(g, lambda X, Y: 0.7 * X + 0.2 * Y)
    Hr = curvature_on_contour(ramp, marching_squares(ramp, 0.1))
    np.testing.assert_allclose(Hr.values, 0.0, atol=1e-9)

    ge = make_grid((0, 0), 2.5, 257)
    ell = ScalarField.from_function(ge, lambda X, Y: X**2 / 4 + Y**2 - 1)
    ce = marching_squares(ell, 0.0)
    pts = ce.points()
    k = np.argmin(np.hypot(pts[:, 0] - 2, pts[:, 1]))
    assert curvature_on_contour(ell, ce).values[k] == pytest.approx(ELLIPSE_KAPPA, rel=0.05)


def test_curvature_flags_critical_vertices():
    g = make_grid((0, 0), 1.0, 65)
    f = ScalarField.from_function(g, lambda X, Y: X**2 + Y**2)
    c = marching_squares(f, 0.01)
    H = curvature_on_contour(f, c, theta=10.0)
    assert H.flagged_fraction == 1.0


def test_normal_velocity_exact_paraboloid():
    g = make_grid((0, 0), 2.2, 257)
    u = exact_radial_flow(lambda q: q * q, g, 0.01, 21, 1.5, 2.0)
    t, s = 0.1, 0.9
    V = normal_velocity_on_contour(u, s, t)
    R = math.sqrt(s - 2 * t)
    np.testing.assert_allclose(V.values, -1 / R, rtol=0.02)


def test_normal_velocity_stationary():
    f = disc_field(n=65)
    u = stationary_flow(f, 0.01, 5)
    V = normal_velocity_on_contour(u, 0.0, 0.02)
    np.testing.assert_allclose(V.values, 0.0, atol=1e-12)


def test_velocity_matches_curvature_on_run(small_circle_run):
    u = small_circle_run
    for t in (0.05, 0.15, 0.25):
        f = u[u.frame_index(t)]
        c = marching_squares(f, 0.0)
        H = curvature_on_contour(f, c).values
        V = normal_velocity_on_contour(u, 0.0, t, contour=c).values
        w = c.weights()
        assert np.sum(w * np.abs(V + H)) <= 0.05 * np.sum(w * np.abs(H))


def test_boundary_distance_examples():
    g = make_grid((0, 0), 3.0, 257)
    a = marching_squares(ScalarField.from_function(g, lambda X, Y: X**2 + Y**2 - 1), 0.0)
    b = marching_squares(ScalarField.from_function(g, lambda X, Y: X**2 + Y**2 - 4), 0.0)
    assert abs(boundary_distance(a, b) - 1) <= 2 * g.h
    assert boundary_distance(a, a) == 0.0
    assert boundary_distance(a, Contour.empty()) == math.inf
    assert boundary_distance(Contour.empty(), a) == math.inf


def test_sym_diff_examples():
    g = make_grid((0, 0), 2.0, 257)
    A = sublevel_set(ScalarField.from_function(g, lambda X, Y: X**2 + Y**2 - 1), 0.0)
    B = sublevel_set(ScalarField.from_function(g, lambda X, Y: X**2 + Y**2 - 0.9), 0.0)
    assert sym_diff_area(A, A) == 0.0
    assert abs(sym_diff_area(A, B) - ANNULUS_AREA) <= 4 * g.h * A.perimeter
    g3 = make_grid((0, 0), 3.0, 257)
    L = sublevel_set(ScalarField.from_function(g3, lambda X, Y: (X + 1.5) ** 2 + Y**2 - 1), 0.0)
    Rr = sublevel_set(ScalarField.from_function(g3, lambda X, Y: (X - 1.5) ** 2 + Y**2 - 1), 0.0)
    assert sym_diff_area(L, Rr) == pytest.approx(2 * math.pi, abs=4 * g3.h * 4 * math.pi)
    with pytest.raises(InvalidArgument):
        sym_diff_area(A, L)


def test_normalize_examples():
    f = disc_field(n=65)
    E = sublevel_set(f, 0.0)
    ind = E.indicator.copy()
    ind[3, 3] = True  # isolated exterior cell
    i0 = ind.shape[0] // 2
    ind[i0, i0] = False  # isolated interior hole
    N = normalize_representative(FinitePerimeterSet(E.grid, ind))
    assert not N.indicator[3, 3] and N.indicator[i0, i0]
    np.testing.assert_array_equal(normalize_representative(E).indicator, E.indicator)


def _random_set(seed, n=24, p=0.5):
    g = make_grid((0, 0), 1.0, n)
    ind = np.random.default_rng(seed).random(g.shape) < p
    return FinitePerimeterSet(g, ind)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), p=st.floats(0.05, 0.95))
def test_normalize_idempotent_and_bounded(seed, p):
    E = _random_set(seed, p=p)
    N = normalize_representative(E)
    np.testing.assert_array_equal(normalize_representative(N).indicator, N.indicator)
    changed = np.count_nonzero(N.indicator ^ E.indicator)
    # only isolated cells move, and every isolated cell touches the boundary
    ind = E.indicator
    pad = np.pad(ind, 1, mode="edge")
    nb = sum(np.roll(np.roll(pad, a, 0), b, 1) for a in (-1, 0, 1) for b in (-1, 0, 1))[1:-1, 1:-1]
    boundary_cells = np.count_nonzero((nb > 0) & (nb < 9))
    assert changed <= boundary_cells


@settings(max_examples=40, deadline=None)
@given(s1=st.integers(0, 10**6), s2=st.integers(0, 10**6), s3=st.integers(0, 10**6))
def test_sym_diff_metric(s1, s2, s3):
    A, B, C = _random_set(s1), _random_set(s2), _random_set(s3)
    assert sym_diff_area(A, B) == sym_diff_area(B, A) >= 0
    assert sym_diff_area(A, C) <= sym_diff_area(A, B) + sym_diff_area(B, C) + 1e-12


centres = st.tuples(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))


@settings(max_examples=20, deadline=None)
@given(c1=centres, c2=centres, r1=st.floats(0.2, 0.6), r2=st.floats(0.2, 0.6))
def test_boundary_distance_symmetric(c1, c2, r1, r2):
    g = make_grid((0, 0), 1.6, 65)
    a = marching_squares(ScalarField.from_function(g, lambda X, Y: np.hypot(X - c1[0], Y - c1[1]) - r1), 0.0)
    b = marching_squares(ScalarField.from_function(g, lambda X, Y: np.hypot(X - c2[0], Y - c2[1]) - r2), 0.0)
    d = boundary_distance(a, b)
    assert d >= 0 and d == pytest.approx(boundary_distance(b, a), abs=1e-12)
    assert hausdorff_distance(a, b) >= d


@settings(max_examples=20, deadline=None)
@given(dx=st.floats(1.0, 2.0), r1=st.floats(0.3, 0.9), r2=st.floats(0.3, 0.9))
def test_perimeter_additivity(dx, r1, r2):
    g = make_grid((0, 0), 3.0, 129)
    fa = ScalarField.from_function(g, lambda X, Y: np.hypot(X + dx, Y) - r1)
    fb = ScalarField.from_function(g, lambda X, Y: np.hypot(X - dx, Y) - r2)
    fab = ScalarField(g, np.minimum(fa.values, fb.values))
    pa, pb = perimeter(marching_squares(fa, 0.0)), perimeter(marching_squares(fb, 0.0))
    assert perimeter(marching_squares(fab, 0.0)) == pytest.approx(pa + pb, rel=1e-9)


def test_circle_perimeter_law(small_circle_run):
    u = small_circle_run
    for f in u.frames:
        P = sublevel_set(f, 0.0).perimeter
        assert P == pytest.approx(2 * math.pi * math.sqrt(1 - 2 * f.time_tag), rel=0.03)


@settings(max_examples=15, deadline=None)
@given(c=centres, a=st.floats(0.3, 0.8), b=st.floats(0.3, 0.8), th=st.floats(0, math.pi))
def test_components_are_simple(c, a, b, th):
    g = make_grid((0, 0), 1.0, 48)
    def f(X, Y):
        x, y = X - c[0] * 0.2, Y - c[1] * 0.2
        xr, yr = math.cos(th) * x + math.sin(th) * y, -math.sin(th) * x + math.cos(th) * y
        return (xr / a) ** 2 + (yr / b) ** 2 + 0.3 * np.sin(5 * X) * np.cos(4 * Y)
    con = marching_squares(ScalarField.from_function(g, f), 1.0)
    for P in con.components:
        assert not _segments_cross(P, P)


def test_export_csv(tmp_path):
    f = disc_field(n=33)
    c = marching_squares(f, 0.0)
    H = curvature_on_contour(f, c)
    p = tmp_path / "c.csv"
    export_contour_csv(p, c, H=H.values, flagged=H.flagged)
    lines = p.read_text().splitlines()
    assert lines[0].split(",")[:4] == ["component_id", "vertex_index", "x", "y"]
    assert len(lines) == 1 + len(c.points())


def test_family_from_field_interface(small_circle_run):
    fam = LevelFamily.from_field(small_circle_run, [0.0])
    I = fam.interface(0.0, 5)
    assert len(I.points) == len(I.weights) == len(I.H) == len(I.V)
    assert I.degenerate_fraction == 0.0
