"""Reduction of composed (g(x) in A) and equality (h(x) = 0) constraints.

Composed constraints become literal composites by substituting the inner
map into each family member, so the chained gradients are exact dual-number
gradients of the composite expression.  Equality constraints are reduced by
certifying in the kernel coordinates of the equality Jacobian: the
finite-dimensional splitting R^p = Ker(J_h) + span(pivot columns) makes the
implicit-function step of the full reduction unnecessary at first order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import evaluate, gradient, linear_expr, substitute
from .geometry import Polyhedron, polyhedron_minimize, recession_cone
from .model import (
    FeasibilityReport,
    FiniteFamily,
    InfeasibleError,
    ParametricFamily,
    PolyhedralFamily,
    Problem,
)
from .multipliers import Certificate, certify_fj
from .options import Options

__all__ = [
    "Jacobian",
    "FullCertificate",
    "ConvexSetCheck",
    "compose_family",
    "certify_composed",
    "certify_equality",
    "convex_set_multiplier",
    "compute_jacobian",
]


@dataclass(frozen=True)
class Jacobian:
    """Numerical Jacobian with rank decided by pivoted elimination.

    ``pivots`` records the pivot magnitudes so near-rank-deficiency stays
    visible; ``kernel_basis`` rows are orthonormal and annihilated by the
    matrix within ``tol_rank``; ``left_null`` is a unit vector with
    left_null @ matrix ~ 0, present exactly when the rank is deficient.
    """

    matrix: np.ndarray  # (w, p)
    rank: int
    pivots: tuple  # pivot magnitudes from the elimination
    pivot_cols: tuple  # column indices spanning the complement E1
    kernel_basis: np.ndarray  # (d, p), orthonormal rows
    tol_rank: float
    left_null: np.ndarray | None = None


def compute_jacobian(exprs, x, tol_rank_factor: float = 1e-10, kink_tol: float = 1e-12) -> Jacobian:
    x = np.asarray(x, dtype=float)
    p = x.size
    rows = [gradient(h, x, kink_tol=kink_tol) for h in exprs]
    matrix = np.array(rows, dtype=float).reshape(len(rows), p)
    w = matrix.shape[0]
    max_norm = float(np.abs(matrix).max(initial=0.0))
    tol_rank = tol_rank_factor * max_norm if max_norm > 0 else tol_rank_factor

    # complete-pivot elimination for the rank decision and the pivot columns
    work = matrix.copy()
    row_free = list(range(w))
    col_free = list(range(p))
    pivots = []
    pivot_cols = []
    while row_free and col_free:
        sub = np.abs(work[np.ix_(row_free, col_free)])
        i, j = np.unravel_index(int(sub.argmax()), sub.shape)
        magnitude = float(sub[i, j])
        if magnitude <= tol_rank:
            break
        r, c = row_free[i], col_free[j]
        pivots.append(magnitude)
        pivot_cols.append(c)
        for rr in row_free:
            if rr != r:
                work[rr] -= work[rr, c] / work[r, c] * work[r]
        row_free.remove(r)
        col_free.remove(c)
    rank = len(pivots)

    # kernel and (if deficient) a left null vector from the SVD, with a
    # deterministic sign convention
    d = p - rank
    kernel = np.zeros((0, p))
    left_null = None
    if w:
        u, _, vt = np.linalg.svd(matrix)
        if d:
            kernel = np.array([_fix_sign(v) for v in vt[p - d :]])
        if rank < w:
            left_null = _fix_sign(u[:, w - 1])
    else:
        kernel = np.eye(p)
    return Jacobian(
        matrix, rank, tuple(pivots), tuple(sorted(pivot_cols)), kernel, tol_rank, left_null
    )


def _fix_sign(v):
    v = np.asarray(v, dtype=float)
    nz = np.flatnonzero(np.abs(v) > 1e-14)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def compose_family(prob: Problem, x) -> Problem:
    """Equivalent problem whose family members are the literal composites.

    Family members written over y1..yq (as x-variables of arity q) are
    substituted with the inner-map expressions, so every downstream
    gradient is the exact chained gradient J_g(x)^T grad phi(g(x)).
    """
    if prob.inner_map is None:
        raise ValueError("compose_family requires an inner map")
    inner = list(prob.inner_map)
    family = prob.family
    if family is None:
        composed = None
    elif isinstance(family, FiniteFamily):
        composed = FiniteFamily(
            tuple(substitute(m, inner) for m in family.members), family.tags
        )
    elif isinstance(family, ParametricFamily):
        composed = ParametricFamily(
            substitute(family.h, inner),
            family.index,
            tuple(substitute(m, inner) for m in family.extra),
            family.extra_tags,
        )
    else:  # polyhedral: build the normalized linear members, then substitute
        composed = FiniteFamily(
            tuple(substitute(m, inner) for m in _polyhedral_members(family)),
            tuple(f"A[{j}]" for j in range(len(family.poly.offsets))),
        )
    return Problem(prob.p, prob.objective, composed, inner_map=None, equality=prob.equality)


def _polyhedral_members(family: PolyhedralFamily):
    normals, offsets = family.normalized()
    q = normals.shape[1]
    return [linear_expr(a, -b, q) for a, b in zip(normals, offsets)]


def _pre_chain_data(prob: Problem, x):
    """Per-member gradients of the family at the image point g(x), by tag."""
    family = prob.family
    if prob.inner_map is not None:
        image = np.array([evaluate(g, x) for g in prob.inner_map])
    else:
        image = np.asarray(x, dtype=float)
    grads = {}
    if isinstance(family, FiniteFamily):
        for tag, member in zip(family.tags, family.members):
            grads[tag] = gradient(member, image)
    elif isinstance(family, ParametricFamily):
        for tag, member in zip(family.extra_tags, family.extra):
            grads[tag] = gradient(member, image)
    elif isinstance(family, PolyhedralFamily):
        normals, _ = family.normalized()
        for j, a in enumerate(normals):
            grads[f"A[{j}]"] = a
    return image, grads


def _recover_y_star(prob: Problem, x, cert: Certificate):
    """Convex combination of the pre-chain gradients with the certificate weights."""
    if not cert.coeffs:
        return None
    image, tag_grads = _pre_chain_data(prob, x)
    family = prob.family
    y = np.zeros(image.size)
    for tag, param, weight in cert.coeffs:
        if param is not None:
            if not isinstance(family, ParametricFamily):
                return None
            g = gradient(family.h, image, np.asarray(param))
        else:
            if tag not in tag_grads:
                return None
            g = tag_grads[tag]
        y = y + weight * g
    return y


def certify_composed(prob: Problem, x, opts: Options = Options(), grid=None) -> Certificate:
    """Fritz John certificate for max f s.t. g(x) in A, with the y* witness.

    Runs the core certification on the composed family and recovers
    y* in the image space as the convex combination of the pre-chain
    gradients with the certificate coefficients, so x* = J_g^T y*.
    """
    derived = compose_family(prob, x)
    cert = certify_fj(derived, x, opts, grid)
    if cert.found and cert.coeffs:
        y_star = _recover_y_star(prob, x, cert)
        if y_star is not None:
            return _with_y_star(cert, y_star)
    return cert


def _with_y_star(cert: Certificate, y_star):
    return Certificate(
        cert.kind, cert.lam, cert.beta, cert.x_star, cert.coeffs, cert.residual,
        cert.zero_not_in_tc, cert.grad_f, cert.tc, cert.approximate, y_star,
        cert.diagnostics,
    )


@dataclass(frozen=True)
class FullCertificate:
    """Multipliers (lambda0, z0*, w0*) for the joint inequality/equality problem.

    The residual is |lambda0 grad f + J_g^T z0* + J_h^T w0*| in the max norm,
    recomputable from the stored fields.
    """

    found: bool
    branch: str  # 'not_onto' | 'onto_no_a' | 'onto_with_a'
    lambda0: float
    z_star: np.ndarray | None
    w_star: np.ndarray | None
    residual: float
    jacobian: Jacobian
    inner: Certificate | None = None
    diagnostics: dict = field(default_factory=dict)


def certify_equality(prob: Problem, x, opts: Options = Options(), grid=None) -> FullCertificate:
    """Lagrange-type certificate with equality constraints h(x) = 0.

    Branches on the equality Jacobian: rank-deficient Jacobians yield the
    degenerate certificate (0, 0, left-null); full-rank Jacobians reduce to
    the inequality certification restricted to kernel coordinates, then
    lift the equality multiplier by least squares on the row space.
    """
    x = np.asarray(x, dtype=float)
    equality = prob.equality or ()
    if equality:
        violation = max(abs(evaluate(h, x)) for h in equality)
        if violation > opts.tol_feas:
            raise InfeasibleError(
                FeasibilityReport(False, -violation, "equality", False, (), violation)
            )
    jac = compute_jacobian(equality, x, kink_tol=opts.tol_kink)
    w = jac.matrix.shape[0]

    if jac.rank < w:
        residual = float(np.abs(jac.matrix.T @ jac.left_null).max(initial=0.0))
        return FullCertificate(True, "not_onto", 0.0, None, jac.left_null, residual, jac)

    grad_f = gradient(prob.objective, x, kink_tol=opts.tol_kink)
    kernel = jac.kernel_basis  # (d, p) orthonormal rows

    if prob.family is None:
        projected = kernel.T @ (kernel @ grad_f) if kernel.size else np.zeros_like(grad_f)
        pnorm = float(np.abs(projected).max(initial=0.0))
        if pnorm > opts.tol:
            return FullCertificate(
                False, "onto_no_a", 0.0, None, None, pnorm, jac,
                diagnostics={"reason": "objective gradient has a kernel component",
                             "projected_gradient": projected},
            )
        w_star = _lift_w_star(jac, -grad_f) if w else np.zeros(0)
        residual = float(np.abs(grad_f + jac.matrix.T @ w_star).max(initial=0.0))
        return FullCertificate(True, "onto_no_a", 1.0, None, w_star, residual, jac)

    derived = compose_family(prob, x) if prob.inner_map is not None else prob
    inner_cert = certify_fj(derived, x, opts, grid, restrict=kernel if kernel.size else None)
    if not inner_cert.found:
        return FullCertificate(
            False, "onto_with_a", 0.0, None, None, float("inf"), jac, inner_cert,
            diagnostics={"reason": "kernel-restricted certification failed"},
        )
    if inner_cert.kind == "unconstrained" or not inner_cert.coeffs:
        z_star = np.zeros(prob.q)
        lam0 = 1.0
    else:
        y_star = _recover_y_star(prob, x, inner_cert)
        if y_star is None:
            y_star = np.zeros(prob.q)
        z_star = inner_cert.beta * y_star
        lam0 = inner_cert.lam
    jac_g = _inner_jacobian(prob, x, opts)
    pulled = jac_g.T @ z_star
    rhs = -(lam0 * grad_f + pulled)
    w_star = _lift_w_star(jac, rhs) if w else np.zeros(0)
    residual = float(np.abs(lam0 * grad_f + pulled + jac.matrix.T @ w_star).max(initial=0.0))
    return FullCertificate(
        True, "onto_with_a", lam0, z_star, w_star, residual, jac, inner_cert
    )


def _inner_jacobian(prob: Problem, x, opts) -> np.ndarray:
    if prob.inner_map is None:
        return np.eye(prob.p)
    return np.array([gradient(g, x, kink_tol=opts.tol_kink) for g in prob.inner_map])


def _lift_w_star(jac: Jacobian, rhs) -> np.ndarray:
    solution, *_ = np.linalg.lstsq(jac.matrix.T, rhs, rcond=None)
    return solution


@dataclass(frozen=True)
class ConvexSetCheck:
    passed: bool
    in_dual_of_recession: bool
    attains_minimum: bool
    minimum: float
    value_at_image: float
    unbounded_ray: np.ndarray | None = None


def convex_set_multiplier(A: Polyhedron, x_img, z_star, tol: float = 1e-8) -> ConvexSetCheck:
    """Check the convex-set multiplier clause for z* at the image point.

    (a) z* lies in the dual cone of the recession cone of A, tested by
    minimizing z* over the recession directions in the unit box; (b) z*
    attains its minimum over A at the image point.  An unbounded
    minimization certifies failure with a recession ray.
    """
    z = np.asarray(z_star, dtype=float)
    x_img = np.asarray(x_img, dtype=float)
    rec = recession_cone(A)
    # min z@v over {v in R_A, |v|_inf <= 1}: nonnegative iff z in (R_A)*
    box = Polyhedron(
        np.vstack([rec.normals, np.eye(A.dim), -np.eye(A.dim)]),
        np.concatenate([rec.offsets, -np.ones(A.dim), -np.ones(A.dim)]),
    )
    probe = polyhedron_minimize(box, z)
    in_dual = probe.status == "optimal" and probe.value >= -tol

    result = polyhedron_minimize(A, z)
    if result.status == "unbounded":
        return ConvexSetCheck(False, in_dual, False, -np.inf, float(z @ x_img), result.ray)
    if result.status == "infeasible":
        raise ValueError("the polyhedron is empty")
    value = float(z @ x_img)
    attains = abs(value - result.value) <= tol * (1.0 + abs(result.value))
    return ConvexSetCheck(in_dual and attains, in_dual, attains, result.value, value)
