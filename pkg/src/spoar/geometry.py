"""Feasible regions and the linear-optimization oracle ``w*(y)``.

Two region families are supported:

* :class:`Polytope` -- a bounded polytope given by its vertex list. The
  oracle scans every vertex, which is exact and cheap in low dimension.
* :class:`Ball` -- a Euclidean ball, i.e. the level set of
  ``g(w) = ||w - c||^2`` (strongly convex and smooth with ``mu = L = 2``).

Besides the oracle, the module computes the geometric constants used by the
calibration bounds: the linear-optimization gap, diameter, minimal width and
the polyhedral constant ``Xi_S``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "FeasibleRegion",
    "Polytope",
    "Ball",
    "OracleResult",
    "GeometryError",
    "DegenerateRegionError",
    "solve_linear",
    "solve_linear_batch",
    "lin_opt_gap",
    "sample_lin_opt_gap",
    "diameter",
    "width",
    "xi_constant",
    "covering_polytope",
    "unit_square",
    "region_from_dict",
    "region_to_dict",
]

TIE_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid region or cost vector."""


class DegenerateRegionError(GeometryError):
    """Region has zero width, so width-dependent constants are undefined."""


@dataclass(frozen=True)
class OracleResult:
    minimizer: np.ndarray
    value: float


def _as_cost(y: Any, dim: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != dim:
        raise GeometryError(f"cost vector must have shape ({dim},), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise GeometryError("cost vector contains NaN or Inf")
    return y


def _as_cost_batch(ys: Any, dim: int) -> np.ndarray:
    ys = np.asarray(ys, dtype=float)
    if ys.ndim == 1:
        ys = ys[None, :]
    if ys.ndim != 2 or ys.shape[1] != dim:
        raise GeometryError(f"cost batch must have shape (k, {dim}), got {ys.shape}")
    if not np.all(np.isfinite(ys)):
        raise GeometryError("cost batch contains NaN or Inf")
    return ys


class FeasibleRegion:
    """Common interface of the decision sets. Instances are immutable."""

    kind: str
    dim: int

    def solve_batch(self, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Row-wise minimizers and optimal values for a ``(k, d)`` cost batch."""
        raise NotImplementedError

    def max_batch(self, ys: np.ndarray) -> np.ndarray:
        """Row-wise ``max_{w in S} y^T w``."""
        # max y^T w = -min (-y)^T w
        return -self.solve_batch(-ys)[1]

    def diameter(self) -> float:
        raise NotImplementedError

    def width(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Polytope(FeasibleRegion):
    """Vertex-represented bounded polytope.

    Vertices are stored in lexicographic order; the oracle breaks ties
    (within ``TIE_TOL``) in favour of the lexicographically smallest vertex.
    """

    vertices: np.ndarray
    kind: str = field(default="polytope", init=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise GeometryError("polytope needs at least one vertex of positive dimension")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polytope vertices must be finite")
        order = np.lexsort(v.T[::-1])
        v = v[order]
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return int(self.vertices.shape[1])

    def solve_batch(self, ys):
        ys = _as_cost_batch(ys, self.dim)
        vals = ys @ self.vertices.T
        best = vals.min(axis=1)
        # first (lexicographically smallest) vertex within tolerance of the min
        idx = np.argmax(vals <= best[:, None] + TIE_TOL, axis=1)
        return self.vertices[idx], vals[np.arange(len(ys)), idx]

    def max_batch(self, ys):
        ys = _as_cost_batch(ys, self.dim)
        return (ys @ self.vertices.T).max(axis=1)

    def diameter(self) -> float:
        v = self.vertices
        diffs = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((diffs**2).sum(-1)).max())

    def width(self) -> float:
        v = self.vertices
        d = self.dim
        if len(v) == 1:
            return 0.0
        rel = v[1:] - v[0]
        if np.linalg.matrix_rank(rel, tol=1e-12 * max(1.0, np.abs(v).max())) < d:
            # lower-dimensional polytope: some direction has zero spread
            return 0.0
        if d == 1:
            return float(v[:, 0].max() - v[:, 0].min())
        dirs = _width_candidates(v)
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        proj = dirs @ v.T
        return float((proj.max(axis=1) - proj.min(axis=1)).min())

    def to_dict(self) -> dict:
        return {"kind": "polytope", "vertices": self.vertices.tolist()}

    def __repr__(self):
        return f"Polytope(vertices={self.vertices.tolist()})"


def _width_candidates(v: np.ndarray) -> np.ndarray:
    """Directions among which the minimal width is attained.

    In 2-D every edge normal of the hull is a candidate; normals of all
    vertex-pair differences are a superset. In 3-D the minimum is attained at
    a facet normal or at the common normal of two hull edges, so cross
    products of all difference pairs cover it. Beyond 3-D only hull facet
    normals are used, which gives an upper bound on the true width.
    """
    d = v.shape[1]
    pairs = [v[j] - v[i] for i, j in itertools.combinations(range(len(v)), 2)]
    pairs = np.array([p for p in pairs if np.linalg.norm(p) > 0])
    if d == 2:
        return np.stack([-pairs[:, 1], pairs[:, 0]], axis=1)
    if d == 3:
        cands = []
        for a, b in itertools.combinations(range(len(pairs)), 2):
            c = np.cross(pairs[a], pairs[b])
            if np.linalg.norm(c) > 1e-12:
                cands.append(c)
        return np.array(cands)
    from scipy.spatial import ConvexHull

    hull = ConvexHull(v)
    return hull.equations[:, :-1]


@dataclass(frozen=True, eq=False)
class Ball(FeasibleRegion):
    """Closed Euclidean ball ``{w : ||w - center||_2 <= radius}``."""

    center: np.ndarray
    radius: float
    kind: str = field(default="ball", init=False)

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        if c.size < 1 or not np.all(np.isfinite(c)):
            raise GeometryError("ball center must be a finite vector")
        r = float(self.radius)
        if not (r > 0 and math.isfinite(r)):
            raise GeometryError("ball radius must be positive and finite")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return int(self.center.shape[0])

    def solve_batch(self, ys):
        ys = _as_cost_batch(ys, self.dim)
        units, norms = _unit_rows(ys)
        w = self.center - self.radius * units
        vals = ys @ self.center - self.radius * norms
        return w, vals

    def max_batch(self, ys):
        ys = _as_cost_batch(ys, self.dim)
        return ys @ self.center + self.radius * _unit_rows(ys)[1]

    def diameter(self) -> float:
        return 2.0 * self.radius

    def width(self) -> float:
        return 2.0 * self.radius

    def to_dict(self) -> dict:
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


def _unit_rows(ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row directions and norms, scaled first so tiny vectors do not underflow.

    Zero rows get a zero direction.
    """
    scale = np.abs(ys).max(axis=1)
    safe = np.where(scale > 0, scale, 1.0)
    scaled = ys / safe[:, None]
    n_scaled = np.linalg.norm(scaled, axis=1)
    units = np.zeros_like(ys)
    nz = scale > 0
    units[nz] = scaled[nz] / n_scaled[nz, None]
    return units, scale * n_scaled


def solve_linear(region: FeasibleRegion, y) -> OracleResult:
    """Minimize ``y^T w`` over ``region``."""
    y = _as_cost(y, region.dim)
    w, val = region.solve_batch(y[None, :])
    return OracleResult(minimizer=w[0], value=float(val[0]))


def solve_linear_batch(region: FeasibleRegion, ys) -> tuple[np.ndarray, np.ndarray]:
    return region.solve_batch(ys)


def lin_opt_gap(region: FeasibleRegion, y) -> float:
    """``omega_S(y) = max_S y^T w - min_S y^T w``."""
    y = _as_cost(y, region.dim)
    return float(region.max_batch(y[None, :])[0] - region.solve_batch(y[None, :])[1][0])


def sample_lin_opt_gap(region: FeasibleRegion, ys) -> float:
    """Supremum of the linear-optimization gap over a sample of cost vectors."""
    ys = _as_cost_batch(ys, region.dim)
    return float((region.max_batch(ys) - region.solve_batch(ys)[1]).max())


def diameter(region: FeasibleRegion) -> float:
    return region.diameter()


def width(region: FeasibleRegion) -> float:
    return region.width()


def xi_constant(region: FeasibleRegion) -> float:
    """``Xi_S = (1 + 2*sqrt(3)*D_S/d_S)^(1-d)`` for a full-dimensional polytope."""
    if not isinstance(region, Polytope):
        raise GeometryError(f"Xi_S is defined for polytopes only, got {region.kind}")
    d_s = region.width()
    if d_s <= 0:
        raise DegenerateRegionError("polytope has zero width; Xi_S undefined")
    return float((1.0 + 2.0 * math.sqrt(3.0) * region.diameter() / d_s) ** (1 - region.dim))


def covering_polytope() -> Polytope:
    """Default two-item selection region ``{w in [0,1]^2 : w1 + w2 >= 1}``.

    This is a stand-in: the experiments call the task a knapsack problem
    without stating the feasible set, and with positive costs this region
    makes the decision (which item to pick) non-trivial.
    """
    return Polytope([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def unit_square() -> Polytope:
    return Polytope([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def region_from_dict(d: dict) -> FeasibleRegion:
    kind = d.get("kind")
    if kind == "polytope":
        return Polytope(d["vertices"])
    if kind == "ball":
        return Ball(d["center"], d["radius"])
    raise GeometryError(f"unknown region kind {kind!r}")


def region_to_dict(region: FeasibleRegion) -> dict:
    return region.to_dict()
