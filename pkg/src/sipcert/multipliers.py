"""Near-active multiplier set construction and Fritz John / KKT certification.

The multiplier set is approximated by a geometrically shrinking ladder of
near-active hulls: at each rung eps_k = eps0 * shrink^k the hull of the
gradients of constraints with value in [0, eps_k] is built, and the ladder
stops once the hull stops moving (two consecutive one-sided Hausdorff gaps
below ``tol_hull``).  Families known in full (finite, polyhedral) instead
run until every surviving member is exactly active, at which point the
multiplier set equals the hull of the strictly active gradients.

A certificate is then the membership 0 in [grad f(x), T_C(x)], decided by
one LP; the segment parameter gives the Fritz John pair (lambda, beta)
normalized to lambda + beta = 1, and the pair upgrades to KKT whenever 0
lies outside the final hull.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import gradient
from .geometry import (
    Hull,
    caratheodory_reduce,
    hull_member,
    one_sided_hull_gap,
    segment_hull_member,
)
from .model import (
    ActiveSet,
    FamilyScan,
    InfeasibleError,
    Problem,
    feasibility,
    is_pure_finite,
)
from .options import Options

__all__ = ["TCApprox", "Certificate", "SipMultipliers", "tc_approx", "certify_fj", "sip_multipliers"]


@dataclass(frozen=True)
class TCApprox:
    """Ladder of near-active hulls approximating the multiplier set."""

    ladder: tuple  # ((eps, ActiveSet), ...)
    final: Hull
    converged: bool
    hausdorff_gaps: tuple
    interior: bool  # inf of the family was strictly positive: empty multiplier set
    inf_value: float
    stopped_by: str  # 'interior'|'finite_shortcut'|'stabilized'|'empty'|'max_steps'

    def ladder_table(self):
        rows = []
        for k, (eps, aset) in enumerate(self.ladder):
            gap = self.hausdorff_gaps[k - 1] if k >= 1 else None
            rows.append((eps, len(aset.entries), gap))
        return rows


@dataclass(frozen=True)
class Certificate:
    kind: str  # 'kkt' | 'fj' | 'unconstrained' | 'no_certificate'
    lam: float
    beta: float
    x_star: np.ndarray | None
    coeffs: tuple  # ((tag, param, weight), ...) over the final hull, support <= p+1
    residual: float
    zero_not_in_tc: bool | None
    grad_f: np.ndarray
    tc: TCApprox | None
    approximate: bool = False
    y_star: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.kind in ("kkt", "fj", "unconstrained")

    def kkt_weights(self):
        """Multipliers in the lambda = 1 normalization (valid for KKT only)."""
        if self.kind != "kkt" or self.lam <= 0.0:
            return None
        return tuple((tag, param, self.beta * w / self.lam) for tag, param, w in self.coeffs)


def _ladder_gap(prev: Hull, new: Hull) -> float:
    # hulls genuinely stabilized means neither side drifted: take the larger
    # of the two one-sided gaps so nested-but-still-shrinking ladders keep going
    return max(one_sided_hull_gap(prev, new), one_sided_hull_gap(new, prev))


def tc_approx(prob: Problem, x, opts: Options = Options(), grid: int | None = None) -> TCApprox:
    """Build the near-active ladder and its stabilized final hull at x.

    Precondition: x feasible.  When the family infimum at x is strictly
    positive the multiplier set is empty (interior point) and an empty
    final hull is returned with the interior indicator set.
    """
    report = feasibility(prob, x, opts.tol_feas, grid)
    if not report.feasible:
        raise InfeasibleError(report)
    p = prob.p
    if prob.family is None or not report.boundary:
        return TCApprox(
            (), Hull(np.zeros((0, p))), True, (), True, report.min_value, "interior"
        )

    pure_finite = is_pure_finite(prob.family)
    scan = FamilyScan(prob, x, opts.eps0, opts, grid)
    ladder = []
    gaps = []
    converged = False
    stopped_by = "max_steps"
    eps = opts.eps0
    prev_hull = None
    for _ in range(opts.max_steps + 1):
        aset = scan.at(eps)
        if not aset.entries:
            stopped_by = "empty"
            break
        ladder.append((eps, aset))
        hull = aset.hull()
        if pure_finite and all(e.value <= opts.tol_feas for e in aset.entries):
            # the whole surviving family is exactly active: the limit hull
            # is the strictly-active hull, no further shrinking needed
            converged = True
            stopped_by = "finite_shortcut"
            break
        if prev_hull is not None:
            gaps.append(_ladder_gap(prev_hull, hull))
            if (
                not pure_finite
                and len(gaps) >= 2
                and gaps[-1] <= opts.tol_hull
                and gaps[-2] <= opts.tol_hull
            ):
                converged = True
                stopped_by = "stabilized"
                break
        prev_hull = hull
        eps *= opts.shrink
    if not ladder:
        return TCApprox((), Hull(np.zeros((0, p))), False, (), False, report.min_value, stopped_by)
    final = ladder[-1][1].hull().deduped()
    return TCApprox(
        tuple(ladder), final, converged, tuple(gaps), False, report.min_value, stopped_by
    )


def certify_fj(
    prob: Problem,
    x,
    opts: Options = Options(),
    grid: int | None = None,
    restrict: np.ndarray | None = None,
) -> Certificate:
    """First-order (Fritz John) certificate for max f over the family constraints.

    ``restrict`` maps all gradients into a subspace basis (rows) before
    certification; it is used by the equality reduction to certify in the
    kernel coordinates of the equality Jacobian.
    """
    report = feasibility(prob, x, opts.tol_feas, grid)
    if not report.feasible:
        raise InfeasibleError(report)
    grad_f = gradient(prob.objective, x, kink_tol=opts.tol_kink)
    if restrict is not None:
        grad_f = restrict @ grad_f
    tc = tc_approx(prob, x, opts, grid)
    if restrict is not None and len(tc.final):
        tc = _restrict_tc(tc, restrict)
    approx = not tc.converged

    if tc.interior:
        gnorm = float(np.abs(grad_f).max(initial=0.0))
        if gnorm <= opts.tol:
            return Certificate(
                "unconstrained", 1.0, 0.0, None, (), gnorm, None, grad_f, tc, approx
            )
        return Certificate(
            "no_certificate", 0.0, 0.0, None, (), gnorm, None, grad_f, tc, approx,
            diagnostics={"reason": "interior point with nonzero objective gradient"},
        )

    if len(tc.final) == 0:
        return Certificate(
            "no_certificate", 0.0, 0.0, None, (), float("inf"), None, grad_f, tc, True,
            diagnostics={"reason": "empty near-active hull"},
        )

    zero_not_in_tc = not hull_member(np.zeros(tc.final.dim), tc.final, opts.tol).member

    if float(np.abs(grad_f).max(initial=0.0)) <= opts.tol:
        # boundary point with vanishing objective gradient: (lambda, beta) = (1, 0)
        # directly, skipping a degenerate segment LP
        x_star = tc.final.generators[0]
        tag = tc.final.tags[0] if tc.final.tags else "g0"
        kind = "kkt" if zero_not_in_tc else "fj"
        residual = float(np.abs(grad_f).max(initial=0.0))
        return Certificate(
            kind, 1.0, 0.0, x_star, ((tag, _entry_param(tc, 0), 1.0),),
            residual, zero_not_in_tc, grad_f, tc, approx,
        )

    seg = segment_hull_member(np.zeros(tc.final.dim), grad_f, tc.final, opts.tol)
    if not seg.member:
        return Certificate(
            "no_certificate", 0.0, 0.0, None, (), seg.distance, zero_not_in_tc,
            grad_f, tc, approx, diagnostics={"reason": "0 outside [grad f, T_C]"},
        )
    lam, beta = seg.lam, 1.0 - seg.lam
    x_star = tc.final.generators.T @ seg.coeffs if beta > 0 else tc.final.generators[0]
    idx, reduced = caratheodory_reduce(x_star, tc.final, seg.coeffs, opts.tol_lp)
    coeffs = tuple(
        (_entry_tag(tc, int(i)), _entry_param(tc, int(i)), float(w)) for i, w in zip(idx, reduced)
    )
    x_star = tc.final.generators[idx].T @ reduced if len(idx) else x_star
    residual = float(np.abs(lam * grad_f + beta * x_star).max())
    kind = "kkt" if zero_not_in_tc and lam > 0.0 else "fj"
    return Certificate(
        kind, float(lam), float(beta), x_star, coeffs, residual, zero_not_in_tc,
        grad_f, tc, approx,
    )


def _entry_tag(tc: TCApprox, i: int):
    return tc.final.tags[i] if tc.final.tags else f"g{i}"


def _entry_param(tc: TCApprox, i: int):
    # recover the index-set point behind a deduped final-hull generator
    tag = _entry_tag(tc, i)
    for _, aset in reversed(tc.ladder):
        for e in aset.entries:
            if e.tag == tag:
                return e.param
    return None


def _restrict_tc(tc: TCApprox, restrict: np.ndarray) -> TCApprox:
    gens = tc.final.generators @ restrict.T
    return TCApprox(
        tc.ladder, Hull(gens, tags=tc.final.tags), tc.converged, tc.hausdorff_gaps,
        tc.interior, tc.inf_value, tc.stopped_by,
    )


@dataclass(frozen=True)
class SipMultipliers:
    """Certificate in the semi-infinite normal form.

    lambda0 * grad f(x) + sum_i lambda_i * grad_x h(x, t_i) = 0 with all
    lambda >= 0 summing to one and at most p index points.
    """

    found: bool
    lambda0: float
    entries: tuple  # ((tag, param, lambda_i, generator), ...)
    residual: float
    lambda0_nonzero_guaranteed: bool
    approximate: bool
    certificate: Certificate

    @property
    def k(self) -> int:
        return len(self.entries)


def sip_multipliers(
    prob: Problem,
    x,
    opts: Options = Options(),
    grid: int | None = None,
    certificate: Certificate | None = None,
) -> SipMultipliers:
    """Recast a Fritz John certificate as semi-infinite multipliers.

    Requires a parametric family and a nonempty (near-)active set at x.
    The support is reduced so that at most p index points carry weight; an
    exact coincidence of the segment witness with a single generator is
    preferred, it realizes the smallest possible support.  Pass a
    ``certificate`` from an earlier :func:`certify_fj` run to skip the
    recertification.
    """
    from .model import ParametricFamily

    if not isinstance(prob.family, ParametricFamily):
        raise ValueError("sip_multipliers requires a parametric constraint family")
    report = feasibility(prob, x, opts.tol_feas, grid)
    if not report.feasible:
        raise InfeasibleError(report)
    if not report.boundary:
        raise ValueError("active set is empty: the candidate is interior")

    cert = certificate if certificate is not None else certify_fj(prob, x, opts, grid)
    if not cert.found:
        return SipMultipliers(False, 0.0, (), float("inf"), False, cert.approximate, cert)
    if cert.beta <= 0.0:
        residual = float(np.abs(cert.grad_f).max(initial=0.0))
        return SipMultipliers(
            True, cert.lam, (), residual, bool(cert.zero_not_in_tc), cert.approximate, cert
        )

    hull = cert.tc.final
    target = cert.x_star
    # exact coincidence with one generator gives the minimal support directly
    mismatch = np.abs(hull.generators - target).max(axis=1)
    hits = np.flatnonzero(mismatch <= opts.tol)
    if hits.size:
        i = int(hits[0])
        g = hull.generators[i]
        # re-fit the pair on the snapped atom: lam0 grad_f + (1 - lam0) g = 0
        # in least squares, so snapping never inflates the residual
        diff = cert.grad_f - g
        denom = float(diff @ diff)
        lam0 = cert.lam if denom <= 0.0 else float(min(max(-(g @ diff) / denom, 0.0), 1.0))
        entries = ((_entry_tag(cert.tc, i), _entry_param(cert.tc, i), 1.0 - lam0, g),)
        residual = _sip_residual(lam0, cert.grad_f, entries)
        return SipMultipliers(
            True, lam0, entries, residual, bool(cert.zero_not_in_tc), cert.approximate, cert
        )
    else:
        # reduce the combined representation of 0 over {grad f} + support generators
        support = [(tag, param, w) for tag, param, w in cert.coeffs]
        atoms = np.vstack([cert.grad_f[None, :]] + [
            hull.generators[_tag_index(hull, tag)][None, :] for tag, _, _ in support
        ])
        weights = np.concatenate([[cert.lam], [cert.beta * w for _, _, w in support]])
        idx, reduced = caratheodory_reduce(
            np.zeros(hull.dim), Hull(atoms), weights, opts.tol_lp
        )
        lam0 = 0.0
        entries = []
        for i, w in zip(idx, reduced):
            if i == 0:
                lam0 = float(w)
            else:
                tag, param, _ = support[i - 1]
                entries.append((tag, param, float(w), atoms[i]))
        entries = tuple(entries)
        residual = _sip_residual(lam0, cert.grad_f, entries)
        return SipMultipliers(
            True, lam0, entries, residual, bool(cert.zero_not_in_tc), cert.approximate, cert
        )


def _tag_index(hull: Hull, tag) -> int:
    return hull.tags.index(tag)


def _sip_residual(lam0, grad_f, entries):
    acc = lam0 * grad_f
    for _, _, w, gen in entries:
        acc = acc + w * gen
    return float(np.abs(acc).max(initial=0.0))
