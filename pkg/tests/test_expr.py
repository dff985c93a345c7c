import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sipcert.expr import (
    Bin,
    EvalDomainError,
    ExprFn,
    KinkError,
    Neg,
    Num,
    ParseError,
    Var,
    evaluate,
    evaluate_many,
    format_expr,
    gradient,
    linear_expr,
    parse,
    substitute,
)


def central_diff(f, x, t=None, step=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.size)
    for i in range(x.size):
        up, down = x.copy(), x.copy()
        up[i] += step
        down[i] -= step
        out[i] = (evaluate(f, up, t) - evaluate(f, down, t)) / (2 * step)
    return out


class TestParse:
    def test_simple_sum(self):
        f = parse("x1 + x2", 2)
        assert f.ast == Bin("+", Var("x", 0), Var("x", 1))

    def test_unknown_identifier_offset(self):
        with pytest.raises(ParseError) as err:
            parse("y + 1/k", 2)
        assert err.value.offset == 0

    def test_sip_expression_structure(self):
        f = parse("1 - t1*x1 - (1-t1)*x2", 2, 1)
        expected = Bin(
            "-",
            Bin("-", Num(1.0), Bin("*", Var("t", 0), Var("x", 0))),
            Bin("*", Bin("-", Num(1.0), Var("t", 0)), Var("x", 1)),
        )
        assert f.ast == expected

    def test_arity_violation(self):
        with pytest.raises(ParseError):
            parse("x3", 2)
        with pytest.raises(ParseError):
            parse("t1", 2, 0)

    def test_empty_and_malformed(self):
        with pytest.raises(ParseError):
            parse("", 1)
        with pytest.raises(ParseError):
            parse("x1 +", 1)
        with pytest.raises(ParseError):
            parse("sin x1", 1)

    def test_power_is_right_associative(self):
        f = parse("2^3^2", 1)
        assert evaluate(f, [0.0]) == 512.0

    def test_unary_minus_binds_below_power(self):
        f = parse("-x1^2", 1)
        assert evaluate(f, [3.0]) == -9.0
        assert f.ast == Neg(Bin("^", Var("x", 0), Num(2.0)))

    def test_double_star_power(self):
        assert evaluate(parse("x1**2", 1), [3.0]) == 9.0

    def test_parse_error_carries_expected(self):
        with pytest.raises(ParseError) as err:
            parse("(x1", 1)
        assert ")" in err.value.expected


class TestEvaluate:
    def test_near_active_objective(self):
        f = parse("-x1^2 - x2", 2)
        assert evaluate(f, (0, 0)) == 0.0

    def test_near_active_phi0(self):
        assert evaluate(parse("x1", 2), (0, 0)) == 0.0

    def test_near_active_phi_k(self):
        assert evaluate(parse("x2 + 1/3", 2), (0, 0)) == pytest.approx(1 / 3, abs=0)

    def test_division_by_zero(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("1/x1", 1), [0.0])

    def test_log_domain(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("log(x1)", 1), [-1.0])
        with pytest.raises(EvalDomainError):
            evaluate(parse("log(x1)", 1), [0.0])

    def test_sqrt_domain(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("sqrt(x1)", 1), [-1.0])

    def test_overflow_raises_not_inf(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("exp(x1)", 1), [1000.0])
        with pytest.raises(EvalDomainError):
            evaluate(parse("x1^9", 1), [1e300])

    def test_min_max_values(self):
        assert evaluate(parse("min(x1, x2, 3)", 2), (5, 4)) == 3.0
        assert evaluate(parse("max(x1, -x1)", 1), [-2.0]) == 2.0

    def test_abs_at_kink_value_is_fine(self):
        assert evaluate(parse("abs(x1)", 1), [0.0]) == 0.0

    def test_zero_to_negative_power(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("x1^(-1)", 1), [0.0])


class TestGradient:
    def test_near_active_objective_gradient(self):
        g = gradient(parse("-x1^2 - x2", 2), (0, 0))
        assert np.allclose(g, [0.0, -1.0], atol=0)

    def test_linear_gradient(self):
        g = gradient(parse("x1", 2), (0.3, -0.7))
        assert np.array_equal(g, [1.0, 0.0])

    def test_sip_gradient_with_fd_crosscheck(self):
        f = parse("1 - t1*x1 - (1-t1)*x2", 2, 1)
        g = gradient(f, (1, 1), (0.3,))
        assert np.allclose(g, [-0.3, -0.7], atol=1e-15)
        fd = central_diff(f, (1, 1), (0.3,))
        assert np.abs(g - fd).max() <= 1e-8

    def test_kink_errors(self):
        with pytest.raises(KinkError):
            gradient(parse("abs(x1)", 1), [0.0])
        with pytest.raises(KinkError):
            gradient(parse("min(x1, x2)", 2), (0.5, 0.5))
        with pytest.raises(KinkError):
            gradient(parse("abs(x1)", 1), [1e-13])

    def test_kink_tolerance_respected(self):
        g = gradient(parse("abs(x1)", 1), [1e-6])
        assert g[0] == 1.0

    def test_tied_min_with_equal_partials_is_smooth(self):
        g = gradient(parse("min(x1, x1)", 1), [0.0])
        assert g[0] == 1.0

    def test_sqrt_gradient_at_zero(self):
        with pytest.raises(EvalDomainError):
            gradient(parse("sqrt(x1)", 1), [0.0])

    def test_constant_in_x(self):
        g = gradient(parse("t1 + 2", 1, 1), [5.0], [1.0])
        assert np.array_equal(g, [0.0])

    def test_general_power_gradient(self):
        f = parse("x1^x2", 2)
        g = gradient(f, (2.0, 3.0))
        assert g[0] == pytest.approx(3 * 4.0, rel=1e-12)
        assert g[1] == pytest.approx(8 * math.log(2), rel=1e-12)


from sipcert.expr import Call  # noqa: E402


# random smooth ASTs over x1, x2: exponents are integer constants, no
# division or log, so finite differences stay trustworthy; constants are
# nonnegative because the parser produces negatives as Neg nodes
def _smooth(depth):
    leaf = st.one_of(
        st.floats(min_value=0, max_value=2).map(lambda v: Num(round(v, 3))),
        st.sampled_from([Var("x", 0), Var("x", 1)]),
    )
    if depth == 0:
        return leaf
    sub = st.deferred(lambda: _smooth(depth - 1))
    return st.one_of(
        leaf,
        st.tuples(st.sampled_from("+-*"), sub, sub).map(lambda t: Bin(t[0], t[1], t[2])),
        sub.map(Neg),
        sub.map(lambda a: Bin("^", a, Num(2.0))),
        sub.map(lambda a: Call("sin", (a,))),
        sub.map(lambda a: Call("cos", (a,))),
    )


class TestRoundTrip:
    @given(_smooth(3))
    def test_parse_print_parse_identity(self, ast):
        f = ExprFn(ast, 2)
        printed = format_expr(f)
        assert parse(printed, 2).ast == ast

    def test_round_trip_spec_examples(self):
        for src in ("-x1^2 - x2", "1 - t1*x1 - (1-t1)*x2", "min(x1, x2, 0.5)", "x1/(1 + x2^2)"):
            f = parse(src, 2, 1)
            assert parse(format_expr(f), 2, 1).ast == f.ast

    @given(_smooth(3), st.tuples(st.floats(-1, 1), st.floats(-1, 1)))
    def test_eval_never_silently_nonfinite(self, ast, point):
        f = ExprFn(ast, 2)
        try:
            value = evaluate(f, point)
        except EvalDomainError:
            return
        assert math.isfinite(value)


class TestVectorizedEvaluation:
    @pytest.mark.parametrize(
        "src",
        [
            "1 - t1*x1 - (1-t1)*x2 + sin(t1)",
            "x1*cos(t1) + x2*sin(t1)",
            "abs(t1 - 0.5) + max(x1, t1, 0.25) - min(x2, t1)",
            "exp(0.5*t1) / (2 + t1^2) + sqrt(t1 + 1)",
            "t1^3 - x1^t1",
        ],
    )
    def test_matches_scalar_loop(self, src, rng):
        f = parse(src, 2, 1)
        x = (0.3, 0.8)
        tpoints = rng.uniform(0.01, 1, size=(50, 1))
        batched = evaluate_many(f, x, tpoints)
        looped = np.array([evaluate(f, x, t) for t in tpoints])
        assert np.allclose(batched, looped, rtol=1e-15, atol=0)

    def test_two_index_dimensions(self, rng):
        f = parse("x1 + t1^2 + t2^2", 1, 2)
        tpoints = rng.uniform(0, 1, size=(20, 2))
        batched = evaluate_many(f, [0.5], tpoints)
        looped = np.array([evaluate(f, [0.5], t) for t in tpoints])
        assert np.array_equal(batched, looped)

    def test_domain_errors_propagate(self):
        f = parse("log(t1)", 0, 1)
        with pytest.raises(EvalDomainError):
            evaluate_many(f, [], np.array([[1.0], [0.0]]))
        with pytest.raises(EvalDomainError):
            evaluate_many(parse("1/t1", 0, 1), [], np.array([[1.0], [0.0]]))
        with pytest.raises(EvalDomainError):
            evaluate_many(parse("sqrt(t1)", 0, 1), [], np.array([[-1.0]]))


class TestSubstitute:
    def test_linear_chain(self):
        phi = parse("x1", 1)
        inner = [parse("x1 + x2", 2)]
        composed = substitute(phi, inner)
        assert np.array_equal(gradient(composed, (0, 0)), [1.0, 1.0])

    def test_composite_matches_fd(self, rng):
        phi = parse("x1^2 + sin(x2)", 2)
        inner = [parse("x1*x2", 2), parse("x1 - x2", 2)]
        composed = substitute(phi, inner)
        for _ in range(20):
            x = rng.uniform(-1, 1, size=2)
            g = gradient(composed, x)
            fd = central_diff(composed, x)
            assert np.abs(g - fd).max() <= 1e-6 * (1 + np.abs(g).max())

    def test_arity_mismatch(self):
        with pytest.raises(EvalDomainError):
            substitute(parse("x1 + x2", 2), [parse("x1", 1)])


def test_linear_expr_builder():
    f = linear_expr([2.0, -1.0], 0.5, 2)
    assert evaluate(f, (1.0, 1.0)) == pytest.approx(1.5)
    assert np.array_equal(gradient(f, (0, 0)), [2.0, -1.0])
