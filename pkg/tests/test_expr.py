import json

import numpy as np
import pytest

from app.selftest import multiplication_chain
from graph.eval_graph import evaluate, evaluate_text, evaluate_with_store
from qcm.errors import DivisorNearZero, EncodingRangeError, ExprSyntaxError
from qcm.store import EnsembleStore
from tools.expr_parser import (
    Add,
    Div,
    Literal,
    Mul,
    Neg,
    Pow,
    Sub,
    oracle,
    parse,
    random_expr,
    shape_key,
    subexpressions,
    to_text,
)


def lit(v: float) -> Literal:
    return Literal(float(v))


class TestParse:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("1+2*3", Add(lit(1), Mul(lit(2), lit(3)))),
            ("-(2+3)^2", Neg(Pow(Add(lit(2), lit(3)), 2))),
            ("2-3-4", Sub(Sub(lit(2), lit(3)), lit(4))),
            ("8/4/2", Div(Div(lit(8), lit(4)), lit(2))),
            ("-2", lit(-2)),
            ("-(2)", lit(-2)),
            ("+2.5e1", lit(25)),
            ("-2^2", Neg(Pow(lit(2), 2))),
            ("2^3^2", Pow(lit(2), 9)),
            ("(2^3)^2", Pow(Pow(lit(2), 3), 2)),
            ("2*-3", Mul(lit(2), lit(-3))),
            (" .5 * ( 1 - 2 ) ", Mul(lit(0.5), Sub(lit(1), lit(2)))),
        ],
    )
    def test_precedence(self, text, expected):
        assert parse(text) == expected

    @pytest.mark.parametrize(
        "text, offset, expected",
        [
            ("2^^3", 2, "("),
            ("(1+2", 4, ")"),
            ("", 0, "number"),
            ("1 2", 2, "end of input"),
            ("2+x", 2, "number"),
            ("\u00a01+", 4, "number"),
        ],
    )
    def test_syntax_errors(self, text, offset, expected):
        with pytest.raises(ExprSyntaxError) as info:
            parse(text)
        assert info.value.offset == offset
        assert expected in info.value.expected

    @pytest.mark.parametrize("text", ["2^1.5", "2^(1+1)", "2^-1", "2^100000"])
    def test_exponent_must_be_integer_literal(self, text):
        with pytest.raises(ExprSyntaxError) as info:
            parse(text)
        assert info.value.offset == 2

    def test_overflowing_literal(self):
        with pytest.raises(ExprSyntaxError):
            parse("1e400")


class TestPrinting:
    def test_canonical_form(self):
        assert to_text(parse("1+2*3")) == "(1.0 + (2.0 * 3.0))"
        assert to_text(parse("-(2+3)^2")) == "(-((2.0 + 3.0)^2))"
        assert to_text(parse("-2/4")) == "((-2.0) / 4.0)"

    def test_round_trip(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            ast = random_expr(rng, depth=5)
            assert parse(to_text(ast)) == ast

    def test_shape_ignores_values(self):
        assert shape_key(parse("(1.5+2)*3")) == shape_key(parse("(4+0.5)*-2"))
        assert shape_key(parse("2^2")) != shape_key(parse("2^3"))

    def test_subexpressions_are_post_order(self):
        nodes = list(subexpressions(parse("1+2*3")))
        assert nodes[-1] == parse("1+2*3")
        assert nodes[:3] == [lit(1), lit(2), lit(3)]


class TestOracle:
    def test_values(self):
        assert oracle(parse("(2+3)*4")) == 20
        assert oracle(parse("-2^2")) == -4

    def test_divisor_guard(self):
        with pytest.raises(DivisorNearZero):
            oracle(parse("1/0.0000001"))
        assert oracle(parse("1/0.01")) == pytest.approx(100)

    def test_overflow(self):
        with pytest.raises(EncodingRangeError):
            oracle(parse("10^400"))


class TestEvaluate:
    def test_product_of_sum(self):
        report = evaluate_text("(2+3)*4")
        assert report.exact_value == 20
        assert report.circuit_value == pytest.approx(20, rel=1e-9)
        assert report.rel_err <= 1e-9

    def test_literal_needs_only_preparation(self):
        report = evaluate_text("7")
        assert report.circuit_value == pytest.approx(7, rel=1e-12)
        assert report.physical_gates == 4
        assert (report.clones, report.renorms) == (0, 0)

    def test_cancellation_to_zero(self):
        report = evaluate_text("1/4 - 0.25")
        assert report.exact_value == 0
        assert report.abs_err <= 1e-9
        assert report.rel_err == report.abs_err

    def test_guarded_divisor(self):
        with pytest.raises(DivisorNearZero):
            evaluate_text("1/0.0000001")

    def test_powers(self):
        assert evaluate_text("1.1^8").circuit_value == pytest.approx(1.1**8, rel=1e-9)
        assert evaluate_text("3^0").circuit_value == pytest.approx(1.0, rel=1e-12)

    def test_gate_count_depends_on_shape_only(self):
        texts = ["(1.5+2)*3/4.5", "(4+0.5)*-2/0.25", "(-3+1)*9/7"]
        reports = [evaluate_text(t) for t in texts]
        assert len({shape_key(parse(t)) for t in texts}) == 1
        assert len({r.physical_gates for r in reports}) == 1

    def test_random_expressions_match_oracle(self):
        rng = np.random.default_rng(32)
        checked = 0
        for _ in range(60):
            ast = random_expr(rng, depth=3)
            try:
                values = [oracle(node) for node in subexpressions(ast) if not isinstance(node, Literal)]
            except (DivisorNearZero, EncodingRangeError):
                continue
            if not all(1e-2 <= abs(v) <= 1e2 for v in values):
                continue
            assert evaluate(ast).rel_err <= 1e-9, to_text(ast)
            checked += 1
        assert checked >= 10

    def test_renorm_off_shrinks_components(self):
        values = [float(v) for v in np.random.default_rng(33).uniform(0.5, 1.0, 9)]
        ast = multiplication_chain(values)
        off = evaluate(ast, renorm=False)
        assert off.min_den_magnitude <= 4.0**-8 * (1 + 1e-9)
        assert off.rel_err <= 1e-6
        assert off.renorms == 0
        on = evaluate(ast, renorm=True)
        assert on.renorms == 8
        assert on.min_den_magnitude > off.min_den_magnitude

    def test_report_json(self):
        data = json.loads(evaluate_text("(2+3)*4").to_json())
        assert data["exact"] == 20
        assert data["circuit"] == pytest.approx(20)
        assert data["estimate"] is None
        assert data["expr"] == "((2.0 + 3.0) * 4.0)"
        assert len(data["components"]["probabilities"]) == 4

    def test_store_is_returned(self):
        store = EnsembleStore()
        _, returned = evaluate_with_store(parse("2*3"), store=store)
        assert returned is store
        assert store.gate_count(label="MEAN") > 0


class TestSampled:
    def test_estimate_near_product(self):
        report = evaluate_text("2*3", mode="sampled", shots=1_000_000, seed=7)
        estimate = report.estimate
        assert estimate.method == "delta"
        se = estimate.width / (2 * 1.959964)
        assert abs(estimate.point - 6) <= 3 * se

    def test_same_seed_same_json(self):
        first = evaluate_text("2*3-1", mode="sampled", shots=10_000, seed=5).to_json()
        second = evaluate_text("2*3-1", mode="sampled", shots=10_000, seed=5).to_json()
        assert first == second

    def test_missing_shots(self):
        with pytest.raises(EncodingRangeError):
            evaluate_text("2", mode="sampled", seed=1)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            evaluate_text("2", mode="fast")
