"""Exact-tolerance convex geometry over generator lists.

Hulls are kept in V-representation only (lists of generators); every
operation needed downstream is a membership or a linear optimization, both
of which reduce to small dense LPs.  Polyhedra are kept in
H-representation ``{y : a_j @ y >= b_j}``.  All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import solve_lp

__all__ = [
    "Hull",
    "Polyhedron",
    "GeometryError",
    "hull_member",
    "hull_distance",
    "one_sided_hull_gap",
    "caratheodory_reduce",
    "segment_hull_member",
    "recession_cone",
    "dual_cone",
    "cone_interior_nonempty",
    "polyhedron_minimize",
    "polyhedron_support_infimum",
]

DEFAULT_MEMBER_TOL = 1e-8
DEFAULT_LP_TOL = 1e-9


class GeometryError(Exception):
    """Dimension mismatch, invalid input, or reported LP failure."""


@dataclass(frozen=True)
class Hull:
    """Convex hull of finitely many generators, with optional provenance tags."""

    generators: np.ndarray  # (n, p)
    tags: tuple | None = None

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.generators, dtype=float))
        if g.size == 0:
            g = g.reshape(0, g.shape[-1] if g.ndim == 2 else 0)
        object.__setattr__(self, "generators", g)
        if self.tags is not None:
            tags = tuple(self.tags)
            if len(tags) != len(g):
                raise GeometryError("one tag per generator required")
            object.__setattr__(self, "tags", tags)

    def __len__(self):
        return self.generators.shape[0]

    @property
    def dim(self) -> int:
        return self.generators.shape[1]

    def deduped(self) -> "Hull":
        """Drop exactly-repeated generators, keeping the first tag seen."""
        seen = {}
        for i, row in enumerate(self.generators):
            seen.setdefault(row.tobytes(), i)
        keep = sorted(seen.values())
        tags = tuple(self.tags[i] for i in keep) if self.tags is not None else None
        return Hull(self.generators[keep], tags)


@dataclass(frozen=True)
class Polyhedron:
    """H-polyhedron {y : normals[j] @ y >= offsets[j] for all j}."""

    normals: np.ndarray  # (m, p)
    offsets: np.ndarray  # (m,)

    def __post_init__(self):
        a = np.asarray(self.normals, dtype=float)
        if a.size == 0:
            a = a.reshape(0, a.shape[-1] if a.ndim == 2 else 0)
        else:
            a = np.atleast_2d(a)
        b = np.asarray(self.offsets, dtype=float).reshape(-1)
        if a.shape[0] != b.size:
            raise GeometryError("one offset per normal required")
        if a.shape[0] and not np.all(np.linalg.norm(a, axis=1) > 0):
            raise GeometryError("normals must be nonzero")
        object.__setattr__(self, "normals", a)
        object.__setattr__(self, "offsets", b)

    @classmethod
    def full_space(cls, dim: int) -> "Polyhedron":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def contains(self, y, tol: float = DEFAULT_MEMBER_TOL) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(self.normals @ y >= self.offsets - tol))

    def is_cone(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.offsets) <= tol))


@dataclass(frozen=True)
class HullMembership:
    member: bool
    coeffs: np.ndarray
    distance: float  # optimal infinity-norm mismatch from the LP


@dataclass(frozen=True)
class SegmentMembership:
    member: bool
    lam: float
    coeffs: np.ndarray
    distance: float


@dataclass(frozen=True)
class ConeInterior:
    nonempty: bool
    witness: np.ndarray
    margin: float


def _check_target(target, hull):
    t = np.asarray(target, dtype=float).reshape(-1)
    if len(hull) == 0:
        raise GeometryError("hull has no generators")
    if t.size != hull.dim:
        raise GeometryError(f"target dimension {t.size} != hull dimension {hull.dim}")
    return t


def hull_member(target, hull: Hull, tol: float = DEFAULT_MEMBER_TOL) -> HullMembership:
    """Decide target in conv(generators) by one LP.

    Minimizes s subject to -s <= (sum_i a_i g_i - target)_j <= s with a in
    the simplex; membership holds iff the optimal s is at most ``tol``.
    """
    t = _check_target(target, hull)
    g = hull.generators
    n, p = g.shape
    # variables: a_1..a_n, s
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.zeros((2 * p, n + 1))
    a_ub[:p, :n] = g.T
    a_ub[p:, :n] = -g.T
    a_ub[:, -1] = -1.0
    b_ub = np.concatenate([t, -t])
    a_eq = np.zeros((1, n + 1))
    a_eq[0, :n] = 1.0
    sol = solve_lp(c, a_ub, b_ub, a_eq, [1.0])
    if not sol.optimal:
        raise GeometryError(f"membership LP failed with status {sol.status}")
    coeffs = np.clip(sol.x[:n], 0.0, None)
    distance = float(sol.x[-1])
    return HullMembership(distance <= tol, coeffs, distance)


def hull_distance(target, hull: Hull) -> float:
    """Infinity-norm distance from target to conv(generators)."""
    if len(hull) == 0:
        return float("inf")
    return hull_member(target, hull, tol=0.0).distance


def one_sided_hull_gap(src: Hull, dst: Hull) -> float:
    """max over src generators of their distance to conv(dst).

    Generators of ``src`` that literally reappear in ``dst`` contribute
    zero and are skipped before any LP runs.
    """
    if len(src) == 0:
        return 0.0
    if len(dst) == 0:
        return float("inf")
    dst_keys = {row.tobytes() for row in dst.generators}
    gap = 0.0
    seen = set()
    for row in src.generators:
        key = row.tobytes()
        if key in dst_keys or key in seen:
            continue
        seen.add(key)
        gap = max(gap, hull_distance(row, dst))
    return gap


def caratheodory_reduce(target, hull: Hull, coeffs, tol_lp: float = DEFAULT_LP_TOL):
    """Reduce a convex representation of target to an affinely independent support.

    Iterated null-space pivoting: while the supported generators are
    affinely dependent, shift the coefficients along a null direction until
    one vanishes, then remove the lowest-index vanished generator.  The
    output support has at most p+1 generators and reproduces the target
    within ``tol_lp``.

    Returns (indices, coeffs) with indices into ``hull.generators``.
    """
    t = _check_target(target, hull)
    g = hull.generators
    a = np.asarray(coeffs, dtype=float).copy().reshape(-1)
    if a.size != len(hull):
        raise GeometryError("one coefficient per generator required")
    scale = 1.0 + float(np.abs(t).max(initial=0.0))
    if (
        np.any(a < -tol_lp)
        or abs(a.sum() - 1.0) > tol_lp * 10
        or np.abs(g.T @ a - t).max() > tol_lp * 10 * scale
    ):
        raise GeometryError("coefficients are not a convex representation of the target")
    a = np.clip(a, 0.0, None)

    support = [int(i) for i in np.flatnonzero(a > 0.0)]
    while len(support) > 1:
        rows = np.vstack([g[support].T, np.ones(len(support))])
        u, s, vt = np.linalg.svd(rows)
        smax = s[0] if s.size else 0.0
        if rows.shape[0] >= rows.shape[1] and (s.size == 0 or s[-1] > 1e-12 * max(1.0, smax)):
            break  # affinely independent support
        if rows.shape[0] < rows.shape[1]:
            gamma = vt[-1]
        elif s[-1] <= 1e-12 * max(1.0, smax):
            gamma = vt[-1]
        else:
            break
        if gamma.max() <= 0.0:
            gamma = -gamma
        positive = gamma > 1e-14
        theta = float(np.min(a[np.array(support)][positive] / gamma[positive]))
        for k, i in enumerate(support):
            a[i] -= theta * gamma[k]
        vanished = [i for i in support if a[i] <= 1e-12]
        if not vanished:
            break  # numerically stuck; keep the current (valid) representation
        gone = min(vanished)  # deterministic tie break: lowest index
        a[gone] = 0.0
        support.remove(gone)
        for i in support:
            if a[i] < 0.0:
                a[i] = 0.0

    indices = np.array([i for i in support if a[i] > 1e-12], dtype=int)
    return indices, a[indices]


def segment_hull_member(
    target, w, hull: Hull, tol: float = DEFAULT_MEMBER_TOL
) -> SegmentMembership:
    """Decide target in [w, conv(hull)] by one LP over (lambda, coefficients).

    Substituting mu_i = (1 - lambda) a_i turns the bilinear combination
    lambda w + (1 - lambda) sum a_i g_i into a single linear program; the
    returned coefficients are the normalized a_i.
    """
    t = _check_target(target, hull)
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != hull.dim:
        raise GeometryError("segment endpoint dimension mismatch")
    g = hull.generators
    n, p = g.shape
    # variables: lambda, mu_1..mu_n, s
    c = np.zeros(n + 2)
    c[-1] = 1.0
    cols = np.column_stack([w, g.T])  # p x (n+1)
    a_ub = np.zeros((2 * p, n + 2))
    a_ub[:p, : n + 1] = cols
    a_ub[p:, : n + 1] = -cols
    a_ub[:, -1] = -1.0
    b_ub = np.concatenate([t, -t])
    a_eq = np.zeros((1, n + 2))
    a_eq[0, : n + 1] = 1.0
    sol = solve_lp(c, a_ub, b_ub, a_eq, [1.0])
    if not sol.optimal:
        raise GeometryError(f"segment membership LP failed with status {sol.status}")
    lam = float(min(max(sol.x[0], 0.0), 1.0))
    mu = np.clip(sol.x[1 : n + 1], 0.0, None)
    weight = mu.sum()
    coeffs = mu / weight if weight > 1e-15 else np.zeros(n)
    distance = float(sol.x[-1])
    return SegmentMembership(distance <= tol, lam, coeffs, distance)


@dataclass(frozen=True)
class PolyhedronMinimum:
    status: str  # 'optimal' | 'unbounded' | 'infeasible'
    value: float
    point: np.ndarray | None
    ray: np.ndarray | None = None


def polyhedron_minimize(poly: Polyhedron, z) -> PolyhedronMinimum:
    """min z @ y over the H-polyhedron (free variables, split internally).

    Unbounded results carry a recession ray with z @ ray < 0.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    p = poly.dim
    if z.size != p:
        raise GeometryError("objective dimension mismatch")
    # y = u - v with u, v >= 0; a_j @ y >= b_j  becomes  -a_j@u + a_j@v <= -b_j
    c = np.concatenate([z, -z])
    a_ub = np.hstack([-poly.normals, poly.normals])
    sol = solve_lp(c, a_ub, -poly.offsets)
    if sol.status == "infeasible":
        return PolyhedronMinimum("infeasible", float("nan"), None)
    y = sol.x[:p] - sol.x[p:]
    if sol.status == "unbounded":
        ray = sol.ray[:p] - sol.ray[p:]
        return PolyhedronMinimum("unbounded", -np.inf, y, ray)
    return PolyhedronMinimum("optimal", float(z @ y), y)


def polyhedron_support_infimum(poly: Polyhedron, direction) -> float:
    """inf over the polyhedron of direction @ y (finite for listed normals)."""
    result = polyhedron_minimize(poly, direction)
    if result.status != "optimal":
        return -np.inf if result.status == "unbounded" else np.inf
    return result.value


def recession_cone(poly: Polyhedron) -> Polyhedron:
    """Recession cone of an H-polyhedron: same normals, offsets zeroed."""
    return Polyhedron(poly.normals, np.zeros(len(poly.offsets)))


def dual_cone(generators: Hull) -> Polyhedron:
    """Dual positive cone of cone(generators): {y : g_i @ y >= 0 for all i}."""
    if len(generators) == 0:
        raise GeometryError("dual cone of an empty generator list")
    return Polyhedron(generators.generators, np.zeros(len(generators)))


def cone_interior_nonempty(poly: Polyhedron, tol: float = DEFAULT_LP_TOL) -> ConeInterior:
    """Interior test for a polyhedral cone via the normalized-margin LP.

    Maximizes delta subject to (a_j/|a_j|) @ e >= delta over the box
    |e|_inf <= 1; the cone has nonempty interior iff the optimum exceeds
    ``tol``.  This realizes the criterion inf{y*(e) : y* in S cap A*} > 0.
    """
    if not poly.is_cone(tol=1e-12):
        raise GeometryError("cone_interior_nonempty expects zero offsets")
    if poly.normals.shape[0] == 0:  # full space
        return ConeInterior(True, np.zeros(poly.dim), float("inf"))
    a = poly.normals / np.linalg.norm(poly.normals, axis=1, keepdims=True)
    m, p = a.shape
    # variables: delta, u (= e + 1, so 0 <= u <= 2); maximize delta
    c = np.zeros(1 + p)
    c[0] = -1.0
    a_ub = np.zeros((m + p, 1 + p))
    a_ub[:m, 0] = 1.0
    a_ub[:m, 1:] = -a
    b_ub = np.concatenate([-a.sum(axis=1), np.full(p, 2.0)])
    a_ub[m:, 1:] = np.eye(p)
    sol = solve_lp(c, a_ub, b_ub)
    if not sol.optimal:
        raise GeometryError(f"cone interior LP failed with status {sol.status}")
    e = sol.x[1:] - 1.0
    margin = float((a @ e).min(initial=np.inf))
    return ConeInterior(margin > tol, e, margin)
