"""Tests for the expression language: parsing, printing, evaluation, differentiation and system documents."""

import math

import numpy as np
import pytest

from hybridzeno.helpers.spec_lang import (
    ArityMismatch,
    DivisionByZero,
    DomainError,
    ExprSyntaxError,
    If,
    IndexOutOfRange,
    NotDifferentiable,
    Num,
    Pow,
    SchemaError,
    StateVar,
    TypeMismatch,
    UnknownIdentifier,
    compile_expr,
    differentiate,
    dump_system,
    eval_expr,
    gradient,
    load_system,
    parse_expr,
    parse_system_spec,
    substitute,
    to_text,
)
from hybridzeno.helpers.scenarios import scenario_document

CORPUS = [
    "x1",
    "1 + 2 * 3",
    "(1 + 2) * 3",
    "x1 - x2 - x3",
    "x1 / x2 / 4",
    "-x1",
    "-x1^2",
    "(-x1)^2",
    "-(x1 + x2)",
    "2 * -3",
    "x1^0",
    "x2^3 * x1",
    "sqrt(x1^2 + x2^2)",
    "exp(-x3)",
    "abs(x2) + atan(x1)",
    "sin(x1) * cos(x2)",
    "min(x1, 2 * x2)",
    "max(x1^2, 19.62 * x1) / (1 + x1^2)",
    "if(x1 > 0, x2, -x2)",
    "-if(x1 == 0 && x2 == 0, 0, g)",
    "if(x1 >= 0, x1, 0)^2",
    "x1 == 0",
    "x1 < x2",
    "x1 <= 1e-3",
    "x1 > 2.5e10",
    "x1 >= -1",
    "!(x1 > 0)",
    "x1 > 0 || x1 == 0 && x2 >= 0",
    "(x1 > 0 || x1 == 0) && x2 >= 0",
    "true",
    "false || x1 < 0",
    "if(x1 > 0, true, x2 < 0)",
    "lam * x2 + u1",
    "0.5 * x1^2 + g * x2",
    "(1 + theta * atan(x2)) * (x2^2 / 2 + g * x1)",
    "x1 − x2",
]

PARAMS = {"g": 9.81, "lam": 0.5, "theta": 0.19}


def parse(text, **kwargs):
    kwargs.setdefault("params", PARAMS)
    kwargs.setdefault("n_inputs", 1)
    return parse_expr(text, **kwargs)


class TestParser:
    def test_precedence(self):
        assert eval_expr(parse("1 + 2 * 3"), []) == 7.0
        assert eval_expr(parse("(1 + 2) * 3"), []) == 9.0
        assert eval_expr(parse("-2^2"), []) == -4.0
        assert eval_expr(parse("x1 - x2 - x3"), [1, 2, 3]) == -4.0

    def test_logic_precedence(self):
        expr = parse("x1 > 0 || x1 == 0 && x2 >= 0")
        assert expr.op == "||"
        assert expr.right.op == "&&"

    def test_pow_node(self):
        assert parse("x2^3") == Pow(StateVar(2), 3)

    def test_unicode_minus(self):
        assert parse("x1 − x2") == parse("x1 - x2")

    def test_syntax_error_position(self):
        with pytest.raises(ExprSyntaxError) as info:
            parse("x1 +")
        assert info.value.position == 5

    def test_unbalanced_parenthesis(self):
        with pytest.raises(ExprSyntaxError):
            parse("(x1 + 1")

    def test_non_integer_exponent(self):
        with pytest.raises(ExprSyntaxError):
            parse("x1^0.5")

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifier) as info:
            parse("x1 + y")
        assert info.value.position == 6

    def test_state_index_beyond_dimension(self):
        with pytest.raises(UnknownIdentifier):
            parse("x3", dim=2)

    def test_inputs_not_allowed_by_default(self):
        with pytest.raises(UnknownIdentifier):
            parse_expr("u1")

    def test_arity(self):
        with pytest.raises(ArityMismatch):
            parse("min(x1)")
        with pytest.raises(ArityMismatch):
            parse("if(x1 > 0, 1)")

    def test_type_errors(self):
        with pytest.raises(TypeMismatch):
            parse("x1 && x2")
        with pytest.raises(TypeMismatch):
            parse("1 + (x1 > 0)")
        with pytest.raises(TypeMismatch):
            parse("if(x1, 1, 2)")
        with pytest.raises(TypeMismatch):
            parse("if(x1 > 0, 1, x2 > 0)")

    def test_alias(self):
        assert parse_expr("s^2", dim=1, aliases={"s": 1}) == Pow(StateVar(1), 2)

    @pytest.mark.parametrize("text", CORPUS)
    def test_round_trip(self, text):
        expr = parse(text)
        assert parse(to_text(expr)) == expr


class TestEvaluation:
    def test_tolerant_equality(self):
        expr = parse("x1 == 0")
        assert eval_expr(expr, [1e-10])
        assert not eval_expr(expr, [1e-8])
        assert eval_expr(expr, [1e-8], eq_tol=1e-7)

    def test_conditional(self):
        expr = parse("if(x1 > 0, x2, -x2)")
        assert eval_expr(expr, [1, 3]) == 3.0
        assert eval_expr(expr, [-1, 3]) == -3.0

    def test_params_and_inputs(self):
        expr = parse("lam * x2 + u1")
        assert eval_expr(expr, [0, 2], [1], PARAMS) == pytest.approx(2.0)

    def test_division_by_zero(self):
        with pytest.raises(DivisionByZero):
            eval_expr(parse("x1 / x2"), [1, 0])

    def test_sqrt_domain(self):
        with pytest.raises(DomainError):
            eval_expr(parse("sqrt(x1)"), [-1])

    def test_overflow_is_infinite(self):
        assert eval_expr(parse("x1^3"), [1e200]) == math.inf
        assert eval_expr(parse("exp(x1)"), [1e4]) == math.inf

    def test_missing_state(self):
        with pytest.raises(IndexOutOfRange):
            eval_expr(parse("x3"), [1, 2])

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(1)
        points = rng.uniform(-3, 3, size=(50, 2))
        points[::5, 0] = 0.0
        for text in ["if(x1 > 0, x2, -x2)", "-if(x1 == 0 && x2 == 0, 0, g)", "min(x1, x2) + abs(x2)",
                     "x1 > 0 || x1 == 0 && x2 >= 0", "atan(x2) * x1^2"]:
            expr = parse(text)
            batch = compile_expr(expr, PARAMS, vectorized=True)(points.T)
            scalar = [eval_expr(expr, p, params=PARAMS) for p in points]
            np.testing.assert_allclose(batch.astype(float), np.asarray(scalar, dtype=float), rtol=1e-12)

    def test_vectorized_conditional_guards_branches(self):
        expr = parse("if(x1 > 0, sqrt(x1), 0)")
        values = compile_expr(expr, vectorized=True)(np.array([[4.0, -1.0]]))
        assert values.tolist() == [2.0, 0.0]


class TestDifferentiation:
    def test_product_rule(self):
        d = differentiate(parse("x1^2 * x2"), 1)
        assert eval_expr(d, [3, 2]) == pytest.approx(12.0)

    def test_constant_denominator(self):
        d = differentiate(parse("x1 / 4"), 1)
        assert d == Num(0.25)

    def test_atan(self):
        d = differentiate(parse("atan(x1)"), 1)
        assert eval_expr(d, [2]) == pytest.approx(1 / 5)

    def test_kinks_take_a_branch(self):
        d = differentiate(parse("abs(x1)"), 1)
        assert isinstance(d, If)
        assert eval_expr(d, [-2]) == -1.0
        assert eval_expr(d, [0]) == 1.0

    def test_boolean_not_differentiable(self):
        with pytest.raises(NotDifferentiable):
            differentiate(parse("x1 > 0"), 1)

    def test_gradient_matches_finite_differences(self):
        expr = parse("(1 + theta * atan(x2)) * (x2^2 / 2 + g * x1) + exp(-x3) * sin(x1)")
        grad = gradient(expr, 3)
        point = np.array([0.7, -1.3, 0.4])
        h = 1e-6
        for i, d in enumerate(grad):
            e = np.zeros(3)
            e[i] = h
            fd = (eval_expr(expr, point + e, params=PARAMS) - eval_expr(expr, point - e, params=PARAMS)) / (2 * h)
            assert eval_expr(d, point, params=PARAMS) == pytest.approx(fd, rel=1e-6, abs=1e-8)


class TestSubstitute:
    def test_shift_states_and_inputs(self):
        expr = parse("x1 + u1")
        out = substitute(expr, states={1: StateVar(3)}, inputs={1: StateVar(1)})
        assert to_text(out) == "(x3 + x1)"

    def test_missing_input(self):
        with pytest.raises(IndexOutOfRange):
            substitute(parse("u1"), inputs={})


class TestSystemDocuments:
    def test_missing_field(self):
        doc = scenario_document("bouncing_ball")
        del doc["jump_map"]
        with pytest.raises(SchemaError):
            parse_system_spec(doc)

    def test_unknown_field(self):
        doc = dict(scenario_document("bouncing_ball"), extra=1)
        with pytest.raises(SchemaError):
            parse_system_spec(doc)

    def test_map_length(self):
        doc = scenario_document("bouncing_ball")
        doc["flow_map"] = ["x2"]
        with pytest.raises(SchemaError):
            parse_system_spec(doc)

    def test_reserved_param(self):
        doc = scenario_document("bouncing_ball")
        doc["params"] = dict(doc["params"], x1=1.0)
        with pytest.raises(SchemaError):
            parse_system_spec(doc)

    def test_set_must_be_boolean(self):
        doc = scenario_document("bouncing_ball")
        doc["flow_set"] = "x1 + 1"
        with pytest.raises(TypeMismatch) as info:
            load_system(doc)
        assert info.value.field == "flow_set"

    def test_error_names_the_field(self):
        doc = scenario_document("bouncing_ball")
        doc["jump_map"] = ["x1", "-lam*x2 +"]
        with pytest.raises(ExprSyntaxError) as info:
            load_system(doc)
        assert info.value.field == "jump_map[1]"

    def test_dump_and_load(self, example3):
        assert load_system(dump_system(example3)) == example3
