"""Layer-cake reconstruction of a level-set function from its sub-level sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NestingViolation
from .fields import ScalarField, SpaceTimeField
from .geometry import FinitePerimeterSet, hausdorff_distance, marching_squares
from .verify import CheckResult, LevelFamily

__all__ = ["LayerCakeParams", "layer_cake", "sup_norm_distance", "check_level_consistency", "check_nesting"]


@dataclass(frozen=True)
class LayerCakeParams:
    """Level bound ``K`` and spacing ``ds``; levels sit at the midpoints of ``[-K, K]``."""

    K: float
    ds: float

    def __post_init__(self):
        if not self.ds > 0:
            raise InvalidArgument("level spacing must be positive")
        if not self.K > 0:
            raise InvalidArgument("level bound must be positive")

    @classmethod
    def for_field(cls, g: ScalarField, n_levels: int) -> "LayerCakeParams":
        """``K = M + ds`` with ``M = max(|min g|, |max g|)`` and ``2K = n_levels * ds``."""
        if n_levels < 3:
            raise InvalidArgument("need at least 3 levels")
        M = max(abs(g.vmin), abs(g.vmax))
        if M == 0:
            M = 1.0
        K = M * n_levels / (n_levels - 2)
        return cls(K, 2 * K / n_levels)

    @classmethod
    def for_levels(cls, levels) -> "LayerCakeParams":
        """Bound and spacing implied by an explicit, sorted level list."""
        lv = np.sort(np.asarray(levels, dtype=float))
        ds = float(np.diff(lv).max()) if lv.size > 1 else 1.0
        return cls(float(np.abs(lv[[0, -1]]).max() + 0.5 * ds), ds)

    @property
    def n_levels(self) -> int:
        return int(round(2 * self.K / self.ds))

    def levels(self) -> np.ndarray:
        """Midpoint levels; requires ``2K`` to be a whole multiple of ``ds``."""
        n = 2 * self.K / self.ds
        if abs(n - round(n)) > 1e-9 * max(n, 1.0):
            raise InvalidArgument("2K must be a whole multiple of ds")
        return -self.K + self.ds * (np.arange(self.n_levels) + 0.5)

    def covers(self, g: ScalarField) -> bool:
        return self.K >= max(abs(g.vmin), abs(g.vmax))


def _level_weights(levels: np.ndarray, K: float) -> np.ndarray:
    """Width of the slab of ``[-K, K]`` each level stands for (split halfway between levels)."""
    edges = np.concatenate([[-K], 0.5 * (levels[1:] + levels[:-1]), [K]])
    return np.diff(edges)


def check_nesting(fam: LevelFamily, k: int) -> tuple[float, float, int] | None:
    """First pair of consecutive levels whose sets fail ``Omega_s subset Omega_s'`` at frame ``k``."""
    lv = fam.levels
    for a, b in zip(lv[:-1], lv[1:]):
        bad = np.count_nonzero(fam.sets(a)[k].indicator & ~fam.sets(b)[k].indicator)
        if bad:
            return a, b, int(bad)
    return None


def layer_cake(fam: LevelFamily, params: LayerCakeParams, repair: bool = False) -> SpaceTimeField:
    """``v = K - sum_s ds_s * 1[Omega_s(t)]`` at every node and frame.

    Non-nested families raise :class:`NestingViolation` unless ``repair`` is
    set, in which case each set is replaced by its intersection with all sets
    of higher level.
    """
    levels = np.asarray(fam.levels)
    if levels.size == 0:
        raise InvalidArgument("family has no levels")
    if levels[0] < -params.K or levels[-1] > params.K:
        raise InvalidArgument("family levels leave [-K, K]")
    gaps = np.diff(np.concatenate([[-params.K], levels, [params.K]]))
    if gaps.max() > params.ds * (1 + 1e-9):
        raise InvalidArgument("family levels do not cover [-K, K] with the requested spacing")
    w = _level_weights(levels, params.K)
    frames = []
    for k, t in enumerate(fam.times):
        inds = [fam.sets(s)[k].indicator for s in levels]
        if repair:
            acc = np.ones(fam.grid.shape, dtype=bool)
            for j in range(len(inds) - 1, -1, -1):
                acc = acc & inds[j]
                inds[j] = acc
        else:
            for j in range(len(inds) - 1):
                bad = np.count_nonzero(inds[j] & ~inds[j + 1])
                if bad:
                    raise NestingViolation(float(levels[j]), float(levels[j + 1]), float(t), int(bad))
        v = np.full(fam.grid.shape, params.K)
        for wj, ind in zip(w, inds):
            v -= wj * ind
        frames.append(ScalarField(fam.grid, v, float(t)))
    dt = fam.dt if len(fam.times) > 1 else 1.0
    return SpaceTimeField(tuple(frames), dt, {"K": params.K, "ds": params.ds, "n_levels": len(levels), "repaired": repair})


def sup_norm_distance(u: SpaceTimeField, v: SpaceTimeField) -> float:
    if not u.grid.same_as(v.grid) or len(u) != len(v) or not np.allclose(u.times, v.times):
        raise InvalidArgument("fields must share grid and frame times")
    return float(max(np.abs(a.values - b.values).max() for a, b in zip(u.frames, v.frames)))


def check_level_consistency(u: SpaceTimeField, fam: LevelFamily, tol_cells: float = 2.0) -> CheckResult:
    """Hausdorff distance between each level curve of ``u`` and the boundary of the family's set.

    The set boundary is re-extracted from its indicator alone, so an
    externally supplied set that strays from the level curve is caught.
    """
    h = u.grid.h
    worst, where = 0.0, None
    for s in fam.levels:
        for k, E in enumerate(fam.sets(s)):
            curve = marching_squares(u[k], s)
            own = FinitePerimeterSet(E.grid, E.indicator, level=s, time_tag=E.time_tag).boundary
            d = hausdorff_distance(curve, own)
            if d > worst:
                worst, where = d, (float(s), float(u.times[k]))
    return CheckResult.make("level_consistency", worst, h, tol_cells, worst_at=where)
