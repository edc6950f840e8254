import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcflab import DatumSpec, ScalarField, SolverParams, StabilityError, build_datum, evolve, make_grid, step_explicit
from mcflab.fixtures import exact_radial_flow, stationary_flow
from mcflab.initial_data import smoothstep5
from mcflab.solver import check_viscosity_inequalities, stable_dt
from .conftest import circle_datum


def test_stable_dt_examples():
    g = make_grid((0, 0), 1.0, 129)  # h = 1/64
    assert stable_dt(g, 0.0, 1.0) == pytest.approx(1 / 32768)
    assert stable_dt(g, g.h, 0.5) == pytest.approx(1 / 65536)
    assert stable_dt(make_grid((0, 0), 1.0, 21), 0.0) == pytest.approx(0.00125)


def test_params_reject():
    with pytest.raises(ValueError):
        SolverParams(T=1.0, cfl_safety=1.5)
    with pytest.raises(ValueError):
        SolverParams(T=1.0, eps=-1.0)


def test_step_constant_and_affine():
    g = make_grid((0, 0), 1.0, 33)
    dt = stable_dt(g)
    c = ScalarField(g, np.full(g.shape, 1.5))
    np.testing.assert_array_equal(step_explicit(c, dt, g.h).values, c.values)
    aff = ScalarField.from_function(g, lambda X, Y: 2 * X - Y)
    out = step_explicit(aff, dt, g.h)
    np.testing.assert_allclose(out.values[1:-1, 1:-1], aff.values[1:-1, 1:-1], atol=1e-12)
    np.testing.assert_array_equal(out.values[0], aff.values[0])
    assert out.time_tag == pytest.approx(dt)


def test_step_paraboloid_rate():
    g = make_grid((0, 0), 2.0, 65)
    f = ScalarField.from_function(g, lambda X, Y: X**2 + Y**2)
    dt = stable_dt(g)
    out = step_explicit(f, dt, 0.0)
    X, Y = g.mesh()
    win = (np.hypot(X, Y) > 0.2) & (np.abs(X) < 1.5) & (np.abs(Y) < 1.5)
    np.testing.assert_allclose((out.values - f.values)[win] / dt, 2.0, atol=50 * g.h**2)


def test_step_rejects_large_dt():
    g = make_grid((0, 0), 1.0, 17)
    with pytest.raises(StabilityError):
        step_explicit(ScalarField(g, np.zeros(g.shape)), 1.01 * stable_dt(g), g.h)
    with pytest.raises(StabilityError):
        evolve(ScalarField(g, np.zeros(g.shape)), SolverParams(T=0.1, dt=2 * stable_dt(g)))


def test_evolve_constant_datum():
    g = make_grid((0, 0), 1.0, 33)
    c = ScalarField(g, np.full(g.shape, -0.3))
    u = evolve(c, SolverParams(T=0.05, frame_dt=0.01))
    assert len(u) == 6
    np.testing.assert_allclose(u.times, np.arange(6) * 0.01)
    for f in u.frames:
        np.testing.assert_array_equal(f.values, c.values)


def test_evolve_deterministic():
    g = build_datum(DatumSpec("circle", {"R": 0.5}), make_grid((0, 0), 1.3, 49))
    p = SolverParams(T=0.02, frame_dt=0.01)
    a, b = evolve(g, p), evolve(g, p)
    np.testing.assert_array_equal(a.stack(), b.stack())


def _bump_datum(grid, centers, amps, base):
    X, Y = grid.mesh()
    v = np.full(grid.shape, float(base))
    for (cx, cy), a in zip(centers, amps):
        r = np.hypot(X - cx, Y - cy)
        v += a * (1 - smoothstep5(r / 0.4))
    return ScalarField(grid, v)


coords = st.tuples(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4))


@settings(max_examples=15, deadline=None)
@given(centers=st.lists(coords, min_size=1, max_size=3), amps=st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       lift=st.floats(0.05, 0.5), extra=st.floats(0, 1))
def test_comparison_and_maximum_principle(centers, amps, lift, extra):
    # strictly ordered data: the gap dominates the O(h^2) stencil error
    grid = make_grid((0, 0), 1.0, 33)
    g1 = _bump_datum(grid, centers, amps[: len(centers)], 0.0)
    g2 = ScalarField(grid, g1.values + _bump_datum(grid, [(0.1, -0.2)], [extra], lift).values)
    p = SolverParams(T=0.02, frame_dt=0.01)
    u1, u2 = evolve(g1, p), evolve(g2, p)
    for a, b in zip(u1.frames, u2.frames):
        assert (a.values <= b.values).all()
        assert a.vmin >= g1.vmin - 1e-12 and a.vmax <= g1.vmax + 1e-12


def test_touching_data_order_defect_shrinks():
    """Where ordered data touch, the nine-point stencil can cross them by O(h^2)."""
    defects = []
    for n in (65, 129):
        grid = make_grid((0, 0), 2.2, n)
        X, Y = grid.mesh()
        g1 = build_datum(DatumSpec("circle", {"R": 1.0}), grid)
        g2 = ScalarField(grid, g1.values + 0.2 * (1 - smoothstep5(np.hypot(X - 0.5, Y) / 0.6)))
        p = SolverParams(T=0.2, frame_dt=0.02)
        u1, u2 = evolve(g1, p), evolve(g2, p)
        defects.append(max(float((a.values - b.values).max()) for a, b in zip(u1.frames, u2.frames)))
    assert defects[1] < 0.6 * defects[0]
    assert defects[1] < 0.01 * 0.2


@settings(max_examples=10, deadline=None)
@given(c=st.floats(-10, 10))
def test_translation_invariance(c):
    g = build_datum(DatumSpec("circle", {"R": 0.5}), make_grid((0, 0), 1.3, 33))
    p = SolverParams(T=0.02, frame_dt=0.01)
    a, b = evolve(g, p), evolve(g + c, p)
    np.testing.assert_allclose(b.stack() - c, a.stack(), atol=1e-12 * (1 + abs(c)))


def test_paraboloid_consistency_order(paraboloid_run):
    def err(u):
        X, Y = u.grid.mesh()
        inside = X**2 + Y**2 <= 1
        return max(np.abs(f.values - (X**2 + Y**2 + 2 * f.time_tag))[inside].max() for f in u.frames)

    errs = []
    for n in (65, 129):
        g = build_datum(DatumSpec("paraboloid"), make_grid((0, 0), 2.2, n))
        errs.append(err(evolve(g, SolverParams(T=0.2, frame_dt=0.05))))
    errs.append(err(paraboloid_run))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders.min() >= 0.9


def test_viscosity_on_constant_field():
    g = make_grid((0, 0), 1.0, 33)
    u = stationary_flow(ScalarField(g, np.full(g.shape, 2.0)), 0.01, 10)
    s = check_viscosity_inequalities(u, 50, seed=1)
    assert s.passed and s.fraction_satisfied == 1.0


def test_viscosity_on_exact_flow():
    g = make_grid((0, 0), 2.2, 129)
    u = exact_radial_flow(lambda q: q * q, g, 0.01, 21, 1.5, 2.0)
    s = check_viscosity_inequalities(u, 200, seed=0)
    assert s.passed
    assert s.skipped + s.n_checked == 200


def test_viscosity_rejects_stationary_circle():
    g = build_datum(DatumSpec("circle", {"R": 1.0}), make_grid((0, 0), 2.2, 129))
    s = check_viscosity_inequalities(stationary_flow(g, 0.01, 21), 200, seed=0)
    assert not s.passed


def test_viscosity_seed_reproducible(small_circle_run):
    a = check_viscosity_inequalities(small_circle_run, 40, seed=7)
    b = check_viscosity_inequalities(small_circle_run, 40, seed=7)
    assert [x.location for x in a] == [x.location for x in b]
    assert [x.residual for x in a] == [x.residual for x in b]


def test_numpy_fallback_matches_kernel():
    from mcflab import solver
    from mcflab.fields import theta_grad

    g = circle_datum(n=49, hw=2.5)
    h = g.grid.h
    a, b = g.values.copy(), g.values.copy()
    solver._advance_numpy(a, h, h, theta_grad(g), h * h / 8, 100)
    solver._advance(b, h, h, theta_grad(g), h * h / 8, 100)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)
