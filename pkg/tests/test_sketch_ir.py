"""Expression IR tests: dual semantics, spec collection, fills, JSON."""
from __future__ import annotations

import math

import pytest

from statsketch.sketch_ir import (
    Apply,
    Constant,
    GroundTruthVar,
    Hole,
    InputVar,
    SpecExpr,
    Valuation,
    bottom_up_order,
    collect_specs,
    default_registry,
    eval_test,
    eval_train,
    expr_from_json,
    expr_to_json,
    fill_holes,
    fill_spec,
    get_node,
    is_full_sketch,
    valuation_from_json,
    valuation_to_json,
)


def detector_sketch(eps=0.05):
    """Recall-style guard: when a person is present, 1 - conf must clear c."""
    return SpecExpr(
        score=Apply("-", (Constant(1.0), InputVar("conf"))),
        threshold=Hole(),
        spec=Apply("=", (GroundTruthVar("label"), Constant(1))),
        eps=eps,
        mode="impl",
    )


class TestEvaluation:
    def test_train_reads_annotation_not_score(self):
        e = detector_sketch()
        assert eval_train(e, Valuation({"conf": 0.9}, {"label": 1})) == 1
        assert eval_train(e, Valuation({"conf": 0.9}, {"label": 0})) == 0

    def test_train_ignores_holes(self):
        # A holed threshold never blocks train evaluation.
        assert eval_train(detector_sketch(), Valuation({}, {"label": 1})) == 1

    def test_test_gates_on_threshold(self):
        e = fill_spec(detector_sketch(), (), 0.2)
        assert eval_test(e, Valuation({"conf": 0.95})) == 1
        assert eval_test(e, Valuation({"conf": 0.5})) == 0

    def test_test_refuses_ground_truth(self):
        with pytest.raises(ValueError):
            eval_test(GroundTruthVar("y"), Valuation({}, {"y": 3}))

    def test_test_refuses_holes(self):
        with pytest.raises(ValueError):
            eval_test(detector_sketch(), Valuation({"conf": 0.9}))

    def test_missing_bindings_raise(self):
        with pytest.raises(KeyError):
            eval_train(InputVar("x"), Valuation())
        with pytest.raises(KeyError):
            eval_train(GroundTruthVar("y"), Valuation())

    def test_apply_arity_checked(self):
        with pytest.raises(ValueError):
            eval_train(Apply("abs", (Constant(1), Constant(2))), Valuation())

    def test_unknown_component(self):
        with pytest.raises(KeyError):
            eval_train(Apply("frobnicate", (Constant(1),)), Valuation())

    def test_annotation_must_be_bit(self):
        bad = SpecExpr(Constant(0.0), 1.0, Constant(7), 0.1, "impl")
        with pytest.raises(ValueError):
            eval_train(bad, Valuation())

    def test_score_must_be_real(self):
        bad = SpecExpr(Constant("oops"), 1.0, Constant(1), 0.1, "impl")
        with pytest.raises(ValueError):
            eval_test(bad, Valuation())

    def test_variadic_components(self):
        e = Apply("and", (Constant(True), Constant(True), Constant(False)))
        assert eval_train(e, Valuation()) is False

    def test_constants_must_be_finite(self):
        with pytest.raises(ValueError):
            Constant(math.inf)


def _postorder_oracle(expr):
    """Independent stack-based postorder of spec nodes (no recursion)."""
    out = []
    stack = [(expr, (), False)]
    while stack:
        node, path, expanded = stack.pop()
        if isinstance(node, Apply):
            kids = list(enumerate(node.args))
        elif isinstance(node, SpecExpr):
            kids = [(0, node.score), (1, node.spec)]
        else:
            kids = []
        if expanded or not kids:
            if isinstance(node, SpecExpr):
                out.append(path)
            continue
        stack.append((node, path, True))
        for i, child in reversed(kids):
            stack.append((child, path + (i,), False))
    return out


def nested_sketch():
    """Spec whose score contains another spec (a cascade)."""
    inner = SpecExpr(
        score=InputVar("fast_conf"),
        threshold=Hole("inner"),
        spec=GroundTruthVar("slow_fired"),
        eps=0.1,
        mode="cond",
    )
    outer = SpecExpr(
        score=Apply("-", (Constant(1.0), inner)),
        threshold=Hole("outer"),
        spec=GroundTruthVar("label"),
        eps=0.05,
        mode="impl",
    )
    return Apply("and", (outer, detector_sketch()))


class TestStructure:
    def test_collect_is_postorder(self):
        e = nested_sketch()
        got = [p for p, _ in collect_specs(e)]
        assert got == _postorder_oracle(e)
        # Inner spec (buried in the outer's score) comes first.
        assert got[0] == (0, 0, 1)
        assert got[1] == (0,)
        assert got[2] == (1,)

    def test_bottom_up_order_sorts_arbitrary_lists(self):
        e = nested_sketch()
        paths = [p for p, _ in collect_specs(e)]
        assert bottom_up_order(e, list(reversed(paths))) == paths
        with pytest.raises(ValueError):
            bottom_up_order(e, [(9, 9)])

    def test_full_sketch_detection(self):
        assert is_full_sketch(detector_sketch())
        assert is_full_sketch(nested_sketch())
        assert not is_full_sketch(Constant(3))
        filled = fill_spec(detector_sketch(), (), 0.5)
        assert not is_full_sketch(filled)

    def test_get_node(self):
        e = nested_sketch()
        assert isinstance(get_node(e, (0, 0, 1)), SpecExpr)
        with pytest.raises(ValueError):
            get_node(e, (5,))

    def test_fill_is_persistent(self):
        e = detector_sketch()
        filled = fill_spec(e, (), 0.3)
        assert isinstance(e.threshold, Hole)
        assert filled.threshold == 0.3

    def test_fill_eps_hole(self):
        e = SpecExpr(InputVar("z"), 0.7, GroundTruthVar("q"), Hole(), "cond")
        filled = fill_spec(Apply("not", (e,)), (0,), 0.2)
        assert get_node(filled, (0,)).eps == 0.2

    def test_fill_many(self):
        e = nested_sketch()
        filled = fill_holes(e, {(0, 0, 1): 0.9, (0,): 0.4, (1,): 0.6})
        assert not any(s.holed for _, s in collect_specs(filled))

    def test_double_hole_rejected(self):
        with pytest.raises(ValueError):
            SpecExpr(InputVar("z"), Hole(), Constant(1), Hole(), "impl")

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            SpecExpr(InputVar("z"), 0.5, Constant(1), 0.1, "sometimes")


class TestJson:
    def test_round_trip(self):
        for e in [detector_sketch(), nested_sketch(), Apply("+", (Constant(1), InputVar("x")))]:
            assert expr_from_json(expr_to_json(e)) == e

    def test_hole_ids_survive(self):
        e = nested_sketch()
        back = expr_from_json(expr_to_json(e))
        assert get_node(back, (0,)).threshold == Hole("outer")

    def test_schema_checked(self):
        with pytest.raises(ValueError):
            expr_from_json('{"schema": "nope", "expr": {"node": "const", "value": 1}}')

    def test_valuation_round_trip(self):
        v = Valuation({"x": 1.5, "s": "a"}, {"y": 0})
        back = valuation_from_json(valuation_to_json(v))
        assert back.inputs == dict(v.inputs)
        assert back.ground_truth == dict(v.ground_truth)


class TestRegistry:
    def test_no_duplicate_registration(self):
        reg = default_registry()
        with pytest.raises(ValueError):
            reg.register("+", 2, lambda a, b: a + b)

    def test_custom_component(self):
        reg = default_registry()
        reg.register("clip01", 1, lambda a: min(1.0, max(0.0, a)))
        e = Apply("clip01", (Constant(1.7),))
        assert eval_train(e, Valuation(), reg) == 1.0
