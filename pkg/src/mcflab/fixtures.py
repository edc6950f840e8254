"""Closed-form space-time fields used as oracles and negative controls."""

from __future__ import annotations

import numpy as np

from .fields import Grid2, ScalarField, SpaceTimeField
from .initial_data import radial_profile

__all__ = ["exact_radial_flow", "vanishing_sphere", "stationary_flow"]


def exact_radial_flow(base, grid: Grid2, frame_dt: float, n_frames: int, r_in: float, r_out: float, center=(0.0, 0.0)):
    """Exact level-set flow of a radial datum ``G(|x|)``: ``u(x, t) = G(sqrt(|x|^2 + 2t))``.

    Every level circle of radius ``r`` shrinks like ``sqrt(r^2 - 2t)``.
    """
    c = np.asarray(center, dtype=float)

    def u(X, Y, t):
        rho = np.sqrt((X - c[0]) ** 2 + (Y - c[1]) ** 2 + 2.0 * t)
        return radial_profile(base, rho, r_in, r_out)

    return SpaceTimeField.from_function(grid, u, frame_dt, n_frames, kind="exact_radial")


def vanishing_sphere(grid: Grid2, T: float = 1.5, frame_dt: float = 0.01, cap: float = 3.0, t_vanish: float = 1.0,
                     r_in: float = 1.8, r_out: float = 2.2) -> SpaceTimeField:
    """Shrinking circles that all disappear at ``t_vanish``.

    Before ``t_vanish`` this is the exact flow ``|x|^2 + 2t`` (capped far out
    so the field is constant near the grid edge); from ``t_vanish`` on it is
    clipped below by ``cap``, so every level ``s < cap`` jumps to the empty set.
    """
    n_frames = int(round(T / frame_dt)) + 1
    square = lambda q: q * q  # noqa: E731

    def u(X, Y, t):
        v = radial_profile(square, np.sqrt(X * X + Y * Y + 2.0 * t), r_in, r_out)
        if t >= t_vanish - 1e-12:
            v = np.maximum(v, cap)
        return v

    return SpaceTimeField.from_function(grid, u, frame_dt, n_frames, kind="vanishing_sphere", cap=cap, t_vanish=t_vanish)


def stationary_flow(g: ScalarField, frame_dt: float, n_frames: int) -> SpaceTimeField:
    """``u(x, t) = g(x)`` for all times (not a solution unless ``g`` is flat)."""
    frames = [ScalarField(g.grid, g.values, k * frame_dt) for k in range(n_frames)]
    return SpaceTimeField(frames, frame_dt, {"kind": "stationary"})
