"""Problem representation, index-set discretization, admissibility diagnostics.

A constraint family is one of

* :class:`FiniteFamily` -- an explicit list of expressions, understood to be
  the *entire* family (its multiplier set is the hull of the strictly
  active gradients);
* :class:`ParametricFamily` -- h(x, t) over an index set, possibly a sampled
  or truncated window of an infinite family, optionally carrying extra
  individually-listed members (a union family);
* :class:`PolyhedralFamily` -- the normalized linear functionals of an
  H-polyhedron {y : a_j @ y >= b_j}.

Families and problems are immutable after construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .expr import ExprFn, evaluate, evaluate_many, gradient
from .geometry import Hull, Polyhedron, hull_member, polyhedron_support_infimum
from .options import Options, resolve_seed

__all__ = [
    "IndexSet",
    "FiniteFamily",
    "ParametricFamily",
    "PolyhedralFamily",
    "Problem",
    "ActiveEntry",
    "ActiveSet",
    "FeasibilityReport",
    "InfeasibleError",
    "feasibility",
    "active_set",
    "FamilyScan",
    "equi_lipschitz_estimate",
    "admissible_diagnostics",
]


class InfeasibleError(Exception):
    def __init__(self, report):
        super().__init__(
            f"candidate is infeasible: min value {report.min_value:.6g} at {report.min_tag}"
        )
        self.report = report


@dataclass(frozen=True)
class IndexSet:
    """Index set T: either a finite list of points or a compact box with a grid."""

    kind: str  # 'finite' | 'box'
    points: np.ndarray | None = None  # (k, m) for finite sets
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    base_grid: int = 0

    @classmethod
    def finite(cls, points) -> "IndexSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            raise ValueError("finite index set must be nonempty")
        return cls("finite", points=pts)

    @classmethod
    def box(cls, lower, upper, base_grid: int) -> "IndexSet":
        lo = np.asarray(lower, dtype=float).reshape(-1)
        hi = np.asarray(upper, dtype=float).reshape(-1)
        if lo.size != hi.size or np.any(lo > hi):
            raise ValueError("box index set needs lower <= upper componentwise")
        if base_grid < 2:
            raise ValueError("base_grid must be at least 2")
        return cls("box", lower=lo, upper=hi, base_grid=int(base_grid))

    @property
    def t_dim(self) -> int:
        return self.points.shape[1] if self.kind == "finite" else self.lower.size

    def grid_points(self, grid: int | None = None) -> np.ndarray:
        if self.kind == "finite":
            return self.points
        n = int(grid) if grid else self.base_grid
        axes = [np.linspace(self.lower[a], self.upper[a], n) for a in range(self.t_dim)]
        return np.array(list(itertools.product(*axes)))

    def steps(self, grid: int | None = None) -> np.ndarray:
        n = int(grid) if grid else self.base_grid
        return (self.upper - self.lower) / (n - 1)


@dataclass(frozen=True)
class FiniteFamily:
    members: tuple[ExprFn, ...]
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("finite family must be nonempty")
        tags = tuple(self.tags) or tuple(f"phi{i}" for i in range(len(members)))
        if len(tags) != len(members):
            raise ValueError("one tag per member required")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "tags", tags)

    @property
    def arity(self) -> int:
        return self.members[0].arity_x


@dataclass(frozen=True)
class ParametricFamily:
    h: ExprFn
    index: IndexSet
    extra: tuple[ExprFn, ...] = ()
    extra_tags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "extra", tuple(self.extra))
        tags = tuple(self.extra_tags) or tuple(f"phi{i}" for i in range(len(self.extra)))
        if len(tags) != len(self.extra):
            raise ValueError("one tag per extra member required")
        object.__setattr__(self, "extra_tags", tags)
        if self.h.arity_t != self.index.t_dim:
            raise ValueError("h arity in t must match the index-set dimension")

    @property
    def arity(self) -> int:
        return self.h.arity_x


@dataclass(frozen=True)
class PolyhedralFamily:
    """Members phi_j(y) = (a_j @ y - b_j)/|a_j| with constant gradients a_j/|a_j|."""

    poly: Polyhedron

    @property
    def arity(self) -> int:
        return self.poly.dim

    def normalized(self):
        norms = np.linalg.norm(self.poly.normals, axis=1)
        return self.poly.normals / norms[:, None], self.poly.offsets / norms


ConstraintFamily = FiniteFamily | ParametricFamily | PolyhedralFamily


def is_pure_finite(family) -> bool:
    """True when the family is known in full (no sampled parametric part)."""
    return isinstance(family, (FiniteFamily, PolyhedralFamily))


@dataclass(frozen=True)
class Problem:
    p: int
    objective: ExprFn
    family: ConstraintFamily | None = None
    inner_map: tuple[ExprFn, ...] | None = None
    equality: tuple[ExprFn, ...] | None = None

    def __post_init__(self):
        if self.objective.arity_x != self.p or self.objective.arity_t != 0:
            raise ValueError("objective arity must equal the decision dimension")
        if self.inner_map is not None:
            object.__setattr__(self, "inner_map", tuple(self.inner_map))
            for g in self.inner_map:
                if g.arity_x != self.p or g.arity_t != 0:
                    raise ValueError("inner map components must be functions of x only")
        if self.equality is not None:
            object.__setattr__(self, "equality", tuple(self.equality))
            for h in self.equality:
                if h.arity_x != self.p or h.arity_t != 0:
                    raise ValueError("equality components must be functions of x only")
        if self.family is not None:
            expected = len(self.inner_map) if self.inner_map else self.p
            if self.family.arity != expected:
                raise ValueError(
                    f"constraint family acts on dimension {self.family.arity}, expected {expected}"
                )

    @property
    def q(self) -> int:
        return len(self.inner_map) if self.inner_map else self.p


@dataclass(frozen=True)
class ActiveEntry:
    tag: str
    param: tuple | None  # index-set point for parametric entries
    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class ActiveSet:
    eps: float
    entries: tuple[ActiveEntry, ...]

    def hull(self) -> Hull:
        gens = np.array([e.grad for e in self.entries])
        return Hull(gens, tags=tuple(e.tag for e in self.entries))

    def tag_set(self) -> frozenset:
        return frozenset(e.tag for e in self.entries)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    min_value: float
    min_tag: str
    boundary: bool  # min value ~ 0: the infimum indicator at the constraint boundary
    violations: tuple = ()
    equality_violation: float = 0.0


def _direct_members(family):
    """(tag, expr) pairs for the non-parametric members of the family."""
    if isinstance(family, FiniteFamily):
        return list(zip(family.tags, family.members))
    if isinstance(family, ParametricFamily):
        return list(zip(family.extra_tags, family.extra))
    return []


def _param_tag(t):
    return "t=(" + ", ".join(format(v, ".12g") for v in t) + ")"


def _family_values(family, x, grid=None):
    """Yield (tag, param, value) over the discretized family."""
    if family is None:
        return
    for tag, member in _direct_members(family):
        yield tag, None, evaluate(member, x)
    if isinstance(family, ParametricFamily):
        points = family.index.grid_points(grid)
        values = evaluate_many(family.h, x, points)
        for t, value in zip(points, values):
            yield _param_tag(t), tuple(t), float(value)
    elif isinstance(family, PolyhedralFamily):
        normals, offsets = family.normalized()
        x = np.asarray(x, dtype=float)
        for j, (a, b) in enumerate(zip(normals, offsets)):
            yield f"A[{j}]", None, float(a @ x - b)


def feasibility(prob: Problem, x, tol_feas: float = 1e-9, grid: int | None = None) -> FeasibilityReport:
    """Minimum constraint value over the (discretized) family at x.

    Feasible iff the minimum is >= -tol_feas.  Also reports whether the
    infimum sits at zero, the boundary indicator used to decide between
    the interior (unconstrained) and constrained branches.
    """
    if prob.inner_map is not None:
        raise ValueError("compose the inner map before feasibility checks")
    min_value, min_tag = float("inf"), "(none)"
    violations = []
    for tag, _, value in _family_values(prob.family, x, grid):
        if value < min_value:
            min_value, min_tag = value, tag
        if value < -tol_feas:
            violations.append((tag, value))
    eq_violation = 0.0
    if prob.equality:
        eq_violation = max(abs(evaluate(h, x)) for h in prob.equality)
    feasible = not violations and eq_violation <= tol_feas
    boundary = min_value <= tol_feas
    return FeasibilityReport(
        feasible, min_value, min_tag, boundary, tuple(violations), eq_violation
    )


def _clamp(value, tol_feas):
    # small negatives within tolerance are rounding noise, not infeasibility
    return 0.0 if -tol_feas <= value < 0.0 else value


def _refine_axis_all(h, x, tpoints, axis, lo, hi, depth):
    """Halve each [lo_i, hi_i] toward smaller h-values, one axis, all seeds at once."""
    t = tpoints.copy()
    for _ in range(depth):
        mid = 0.5 * (lo + hi)
        t[:, axis] = 0.5 * (lo + mid)
        left = evaluate_many(h, x, t)
        t[:, axis] = 0.5 * (mid + hi)
        right = evaluate_many(h, x, t)
        take_left = left <= right
        hi = np.where(take_left, mid, hi)
        lo = np.where(take_left, lo, mid)
    return 0.5 * (lo + hi)


class FamilyScan:
    """One pass over the family at x, reusable for every ladder rung.

    Values, gradients and box-refinement outputs do not depend on eps,
    only the near-active filter does, so the scan computes them once for
    all members with value <= eps_cap and :meth:`at` filters.  Filtering
    at any eps <= eps_cap reproduces a direct scan at that eps exactly:
    refinement is deterministic per seed and a seed participates iff its
    own value passes the filter.
    """

    def __init__(self, prob: Problem, x, eps_cap: float, opts: Options = Options(), grid=None):
        report = feasibility(prob, x, opts.tol_feas, grid)
        if not report.feasible:
            raise InfeasibleError(report)
        self.report = report
        self.eps_cap = eps_cap
        candidates = []  # (seed_value, ActiveEntry)
        family = prob.family
        for tag, member in _direct_members(family) if family else []:
            value = _clamp(evaluate(member, x), opts.tol_feas)
            if 0.0 <= value <= eps_cap:
                entry = ActiveEntry(tag, None, value, gradient(member, x, kink_tol=opts.tol_kink))
                candidates.append((value, entry))
        if isinstance(family, ParametricFamily):
            self._scan_parametric(family, x, eps_cap, opts, grid, candidates)
        elif isinstance(family, PolyhedralFamily):
            normals, offsets = family.normalized()
            xv = np.asarray(x, dtype=float)
            for j, (a, b) in enumerate(zip(normals, offsets)):
                value = _clamp(float(a @ xv - b), opts.tol_feas)
                if 0.0 <= value <= eps_cap:
                    candidates.append((value, ActiveEntry(f"A[{j}]", None, value, a.copy())))
        self.candidates = candidates

    def _scan_parametric(self, family, x, eps_cap, opts, grid, candidates):
        h = family.h
        index = family.index
        points = index.grid_points(grid)
        values = evaluate_many(h, x, points)
        near = np.array([_clamp(v, opts.tol_feas) for v in values])
        keep = (near >= 0.0) & (near <= eps_cap)
        seeds = points[keep]
        seed_values = near[keep]
        seen = {t.tobytes() for t in seeds}
        for t, value in zip(seeds, seed_values):
            entry = ActiveEntry(
                _param_tag(t), tuple(t), float(value), gradient(h, x, t, opts.tol_kink)
            )
            candidates.append((float(value), entry))
        if index.kind != "box" or opts.refine_depth <= 0 or not len(seeds):
            return
        steps = index.steps(grid)
        refined = seeds.copy()
        for axis in range(index.t_dim):
            lo = np.maximum(index.lower[axis], refined[:, axis] - steps[axis])
            hi = np.minimum(index.upper[axis], refined[:, axis] + steps[axis])
            refined[:, axis] = _refine_axis_all(h, x, refined, axis, lo, hi, opts.refine_depth)
        refined_values = evaluate_many(h, x, refined)
        for seed_value, t, value in zip(seed_values, refined, refined_values):
            if value < -opts.tol_feas:
                raise InfeasibleError(
                    FeasibilityReport(
                        False, float(value), _param_tag(t), True, ((_param_tag(t), float(value)),)
                    )
                )
            value = _clamp(float(value), opts.tol_feas)
            if value <= eps_cap and t.tobytes() not in seen:
                seen.add(t.tobytes())
                entry = ActiveEntry(_param_tag(t), tuple(t), value, gradient(h, x, t, opts.tol_kink))
                # a refined point exists only when its seed passed the filter
                candidates.append((max(float(seed_value), value), entry))

    def at(self, eps: float) -> ActiveSet:
        if eps > self.eps_cap:
            raise ValueError("eps exceeds the scanned cap")
        return ActiveSet(
            eps, tuple(entry for gate, entry in self.candidates if gate <= eps)
        )


def active_set(
    prob: Problem, x, eps: float, opts: Options = Options(), grid: int | None = None
) -> ActiveSet:
    """Near-active entries: members with 0 <= value <= eps, with gradients.

    For box families the near-active grid points get one local-refinement
    pass: ``opts.refine_depth`` bisection levels per axis, descending
    toward smaller constraint values to localize T(x).
    """
    return FamilyScan(prob, x, eps, opts, grid).at(eps)


def equi_lipschitz_estimate(
    prob: Problem,
    x,
    radius: float,
    samples: int,
    seed: int | None = None,
    grid: int | None = None,
) -> float:
    """Monte-Carlo lower bound on the equi-Lipschitz modulus near x.

    The max runs over difference quotients |phi(u) - phi(v)| / |u - v| for
    all family members; the first pairs are the 2p axis pairs through x
    (which realize the modulus exactly for linear members), then seeded
    random pairs inside B(x, radius).  Monotone nondecreasing in
    ``samples`` for a fixed seed.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    p = x.size
    rng = np.random.default_rng(resolve_seed() if seed is None else seed)
    pairs = []
    for i in range(p):
        e = np.zeros(p)
        e[i] = radius
        pairs.append((x + e, x - e))
    while len(pairs) < max(samples, 0) + p:
        u = _ball_point(rng, x, radius)
        v = _ball_point(rng, x, radius)
        if np.linalg.norm(u - v) > 1e-12 * (1.0 + radius):
            pairs.append((u, v))

    members = []
    family = prob.family
    for _, member in _direct_members(family) if family else []:
        members.append((member, None))
    if isinstance(family, ParametricFamily):
        for t in family.index.grid_points(grid):
            members.append((family.h, t))
    elif isinstance(family, PolyhedralFamily):
        normals, _ = family.normalized()
        best = 0.0
        for u, v in pairs:
            d = np.linalg.norm(u - v)
            best = max(best, float(np.abs(normals @ (u - v)).max()) / d)
        return best

    best = 0.0
    for member, t in members:
        for u, v in pairs:
            quotient = abs(evaluate(member, u, t) - evaluate(member, v, t)) / np.linalg.norm(u - v)
            best = max(best, quotient)
    return best


def _ball_point(rng, center, radius):
    p = center.size
    direction = rng.standard_normal(p)
    direction /= np.linalg.norm(direction)
    return center + radius * rng.random() ** (1.0 / p) * direction


@dataclass(frozen=True)
class AdmissibleReport:
    zero_in_full_hull: bool
    hull_gap: float  # LP mismatch when testing 0 against the full-gradient hull
    admissible_style: bool
    lipschitz_estimate: float
    determination: tuple = ()  # polyhedral: (normalized normal, inf over A, stated offset)
    assumptions: tuple = ()


def admissible_diagnostics(
    prob: Problem, x, eps: float, opts: Options = Options(), grid: int | None = None
) -> AdmissibleReport:
    """Numerical admissibility checks at a feasible x.

    (a) whether 0 lies in the hull of *all* family gradients (the
    difference between weak-admissible and admissible); (b) the
    equi-Lipschitz estimate; (c) for polyhedral families, the closed-set
    determination by normalized supporting functionals, with each stated
    offset compared against the LP infimum over the set.
    """
    report = feasibility(prob, x, opts.tol_feas, grid)
    if not report.feasible:
        raise InfeasibleError(report)
    family = prob.family
    grads = []
    for tag, member in _direct_members(family) if family else []:
        grads.append(gradient(member, x, kink_tol=opts.tol_kink))
    if isinstance(family, ParametricFamily):
        for t in family.index.grid_points(grid):
            grads.append(gradient(family.h, x, t, opts.tol_kink))
    elif isinstance(family, PolyhedralFamily):
        normals, _ = family.normalized()
        grads.extend(normals)

    assumptions = [
        "equi-lower-semicontinuity of the inactive members is assumed, not verified",
        "equi-differentiability is exact for the closed expression grammar",
    ]
    if not grads:
        return AdmissibleReport(False, float("inf"), False, 0.0, (), tuple(assumptions))
    membership = hull_member(np.zeros(prob.p), Hull(np.array(grads)), opts.tol)
    lipschitz = equi_lipschitz_estimate(
        prob, x, opts.lipschitz_radius, opts.lipschitz_samples, grid=grid
    )

    determination = []
    if isinstance(family, PolyhedralFamily):
        normals, offsets = family.normalized()
        for a, b in zip(normals, offsets):
            inf_value = polyhedron_support_infimum(family.poly, a)
            determination.append((tuple(a), inf_value, float(b)))

    return AdmissibleReport(
        zero_in_full_hull=membership.member,
        hull_gap=membership.distance,
        admissible_style=not membership.member,
        lipschitz_estimate=lipschitz,
        determination=tuple(determination),
        assumptions=tuple(assumptions),
    )
