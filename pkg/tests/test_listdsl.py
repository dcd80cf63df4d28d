"""List language: types, syntax, evaluation modes, unrolling, lowering."""
import io
import math

import pytest

from statsketch.estimators import EstimatorConfig, threshold_estimate
from statsketch.listdsl import (
    BOT,
    FLOAT,
    IMAGE,
    INT,
    App,
    Arrow,
    Comp,
    Filter,
    Fold,
    HoleAssignment,
    ImageRecord,
    ImageVal,
    IntLit,
    Length,
    ListT,
    Map,
    Prediction,
    PredictorConfig,
    Slice,
    TaskDataConfig,
    ToFloat,
    TypeError_,
    comp,
    dsl_eval,
    dsl_output_error,
    elaborate,
    examples_from_jsonl,
    examples_to_jsonl,
    image_input,
    infer_type,
    length_bound,
    list_input,
    LengthMismatch,
    lower_to_sketch_ir,
    lower_valuations,
    make_task_data,
    max_list_length,
    occurrence_labels,
    parse_program,
    permissive_fill,
    print_program,
    profile_dataset,
    program_from_json,
    program_to_json,
    records_from_jsonl,
    records_to_jsonl,
    sketch_via_ir,
    synth_predictor,
    type_from_str,
    type_to_str,
    unroll_occurrences,
)
from statsketch.listdsl.lang import Input


def rec(
    truth_float=None,
    truth_int=None,
    value=0.0,
    conf=0.9,
    rid=0,
    flipped=False,
    flip_pred=None,
    flip_conf=0.9,
):
    if flip_pred is None:
        flip_pred = flipped
    return ImageRecord(
        id=rid,
        truth_int=truth_int,
        truth_float=truth_float,
        truth_flipped=flipped,
        pred=Prediction(value, conf),
        flip_pred=flip_pred,
        flip_conf=flip_conf,
    )


def img(**kw):
    return image_input(rec(**kw))


CONDITIONAL_SUM = (
    "(fold + (filter (cond-≤ (predict_int input1)) "
    "(map predict_float input2)) 0)"
)


def conditional_sum():
    p = parse_program(CONDITIONAL_SUM)
    q, t = elaborate(p, (IMAGE, ListT(IMAGE)))
    assert t == FLOAT
    return q


def float_sum():
    q, _ = elaborate(
        parse_program("(fold + (map predict_float input1) 0)"), (ListT(IMAGE),)
    )
    return q


# ---------------------------------------------------------------------------
# Types and elaboration

def test_type_string_round_trip():
    for s in ("int", "[float]", "image -> int", "float -> float -> bool",
              "[image] -> [float]", "(int -> int) -> bool"):
        assert type_to_str(type_from_str(s)) == s


def test_elaborate_widens_int_into_float_positions():
    q = float_sum()
    assert isinstance(q, Fold)
    assert isinstance(q.base, ToFloat)
    assert q.fn == Comp("+", Arrow(FLOAT, Arrow(FLOAT, FLOAT)))


def test_elaborate_prefers_integer_arithmetic():
    q, t = elaborate(
        parse_program("(+ (predict_int input1) (predict_int input2))"),
        (IMAGE, IMAGE),
    )
    assert t == INT
    assert isinstance(q, App)


def test_elaborate_rejects_float_slice_bounds():
    p = parse_program("(slice input1 0 (predict_float input2))")
    with pytest.raises(TypeError_):
        elaborate(p, (ListT(FLOAT), IMAGE))


def test_elaborate_rejects_wrong_element_type():
    p = parse_program("(map predict_float input1)")
    with pytest.raises(TypeError_):
        elaborate(p, (ListT(INT),))


def test_infer_type_demands_prior_elaboration():
    p = parse_program("(fold + (map predict_float input1) 0)")
    with pytest.raises(TypeError_):
        infer_type(p, (ListT(IMAGE),))


def test_occurrence_labels_preorder():
    labs = occurrence_labels(conditional_sum())
    assert labs == (
        ("f1", "cond-≤"),
        ("f2", "predict_int"),
        ("f3", "predict_float"),
    )


# ---------------------------------------------------------------------------
# Concrete syntax and JSON

def test_parse_print_round_trip_is_byte_stable():
    text = CONDITIONAL_SUM
    assert print_program(conditional_sum()) == text


def test_parser_accepts_ascii_aliases_and_superscripts():
    p = parse_program("(cond-le (predict_int input¹))")
    assert print_program(p) == "(cond-≤ (predict_int input1))"


def test_parser_flattens_and_rebuilds_applications():
    p = parse_program("(+ 1 2)")
    assert p == App(App(comp("+"), IntLit(1)), IntLit(2))
    assert print_program(p) == "(+ 1 2)"


def test_parser_rejects_junk():
    for bad in ("", "(", ")", "(fold +)", "(frobnicate 1)", "(map f)"):
        with pytest.raises(ValueError):
            parse_program(bad)


def test_json_ast_round_trip_keeps_widening():
    q = conditional_sum()
    blob = program_to_json(q)
    assert blob["schema"] == "statsketch/dsl-v1"
    assert program_from_json(blob) == q


# ---------------------------------------------------------------------------
# Train semantics

def test_train_sum_reads_ground_truth():
    data = (img(truth_float=1.5, value=9.0), img(truth_float=2.5, value=-3.0))
    assert dsl_eval(float_sum(), (data,), "train") == 4.0


def test_train_guard_compares_exactly():
    x = img(truth_int=2, value=7.0)
    ys = (img(truth_float=1.0), img(truth_float=2.0), img(truth_float=3.0))
    out = dsl_eval(conditional_sum(), (x, ys), "train")
    assert out == 5.0  # elements >= 2


def test_train_cond_flip_rights_the_image():
    p, _ = elaborate(parse_program("(cond-flip input1)"), (IMAGE,))
    v = img(truth_int=3, flipped=True, flip_pred=False)
    out = dsl_eval(p, (v,), "train")
    assert isinstance(out, ImageVal) and out.upright


# ---------------------------------------------------------------------------
# Test semantics

def test_low_confidence_abstains_and_absorbs():
    data = (
        img(truth_float=1.0, value=1.1, conf=0.9),
        img(truth_float=2.0, value=2.2, conf=0.3),
    )
    fill = HoleAssignment(thresholds={"f1": 0.5})
    assert dsl_eval(float_sum(), (data,), "test", fill) is BOT


def test_committed_predictions_flow_through():
    data = (
        img(truth_float=1.0, value=1.1, conf=0.9),
        img(truth_float=2.0, value=2.2, conf=0.8),
    )
    fill = HoleAssignment(thresholds={"f1": 0.5})
    out = dsl_eval(float_sum(), (data,), "test", fill)
    assert out == pytest.approx(3.3)


def test_exact_predictors_agree_with_train():
    x = img(truth_int=2, value=2.0, conf=0.99)
    ys = tuple(
        img(truth_float=float(v), value=float(v), conf=0.99, rid=i)
        for i, v in enumerate((1, 2, 3))
    )
    p = conditional_sum()
    out_test = dsl_eval(p, (x, ys), "test", permissive_fill(p))
    out_train = dsl_eval(p, (x, ys), "train")
    assert out_test == out_train == 5.0


def test_guard_gap_below_threshold_abstains():
    p = conditional_sum()
    x = img(truth_int=2, value=2.0, conf=0.99)
    ys = (img(truth_float=3.0, value=2.5, conf=0.99),)
    fill = HoleAssignment(thresholds={"f1": 1.0, "f2": -math.inf, "f3": -math.inf})
    assert dsl_eval(p, (x, ys), "test", fill) is BOT


def test_cond_flip_wrong_detector_leaves_it_upside_down():
    p, _ = elaborate(parse_program("(cond-flip input1)"), (IMAGE,))
    v = img(truth_int=3, flipped=True, flip_pred=False, flip_conf=0.9)
    out = dsl_eval(p, (v,), "test", HoleAssignment(thresholds={"f1": 0.5}))
    assert isinstance(out, ImageVal) and not out.upright
    low = dsl_eval(p, (v,), "test", HoleAssignment(thresholds={"f1": 0.95}))
    assert low is BOT


def test_garbled_prediction_after_missed_flip():
    p, _ = elaborate(
        parse_program("(predict_float (cond-flip input1))"), (IMAGE,)
    )
    v = image_input(
        rec(truth_float=3.0, value=3.1, conf=0.9, flipped=True, flip_pred=False)
    )
    fill = HoleAssignment(thresholds={"f1": 0.0, "f2": 0.0})
    out = dsl_eval(p, (v,), "test", fill)
    assert out == pytest.approx(3.1 + 5.0)


def test_slice_clamps_out_of_range():
    p, _ = elaborate(
        parse_program("(length (slice input1 0 (predict_int input2)))"),
        (ListT(FLOAT), IMAGE),
    )
    fill = HoleAssignment(thresholds={"f1": -math.inf})
    out = dsl_eval(p, ((1.0, 2.0), img(truth_int=9, value=9.0)), "test", fill)
    assert out == 2
    neg = dsl_eval(p, ((1.0, 2.0), img(truth_int=9, value=-4.0)), "test", fill)
    assert neg == 0


def test_missing_threshold_is_an_error():
    data = (img(truth_float=1.0, value=1.0, conf=0.9),)
    with pytest.raises(ValueError, match="f1"):
        dsl_eval(float_sum(), (data,), "test", HoleAssignment())


# ---------------------------------------------------------------------------
# Output error

def test_output_error_scalars_and_lists():
    assert dsl_output_error(3.0, 3.5) == pytest.approx(0.5)
    assert dsl_output_error((1.0, 2.0), (1.2, 1.7)) == pytest.approx(0.3)
    assert dsl_output_error(True, True) == 0.0
    assert dsl_output_error(True, False) == math.inf


def test_output_error_length_mismatch():
    with pytest.raises(LengthMismatch):
        dsl_output_error((1.0, 2.0), (1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        dsl_output_error(BOT, 1.0)


# ---------------------------------------------------------------------------
# Unrolling

def test_unroll_matches_hand_count_for_the_guarded_sum():
    counts = unroll_occurrences(conditional_sum(), 3)
    assert counts == {"f1": 3, "f2": 3, "f3": 3}


def test_unroll_straight_line_program_counts_once():
    p, _ = elaborate(
        parse_program("(+ (predict_int input1) (predict_int input2))"),
        (IMAGE, IMAGE),
    )
    assert unroll_occurrences(p, 5) == {"f1": 1, "f2": 1}


def test_unroll_nested_list_op_multiplies():
    # A guard whose scalar operand itself folds a mapped list: the guard
    # body is duplicated once per outer slot, so the inner predictor
    # appears 3 * 3 = 9 times.
    text = (
        "(length (filter (cond-≤ (fold + (map predict_float input2) 0)) "
        "(map predict_float input1)))"
    )
    p, _ = elaborate(parse_program(text), (ListT(IMAGE), ListT(IMAGE)))
    counts = unroll_occurrences(p, 3)
    assert counts == {"f1": 3, "f2": 9, "f3": 3}


def test_unroll_slice_bounds_count_once():
    p, _ = elaborate(
        parse_program(
            "(fold max (slice (map predict_float input2) 0 "
            "(predict_int input1)) 0)"
        ),
        (IMAGE, ListT(IMAGE)),
    )
    assert unroll_occurrences(p, 3) == {"f1": 3, "f2": 1}


# ---------------------------------------------------------------------------
# Profiling

def test_profile_streams_and_outputs():
    p = conditional_sum()
    x = img(truth_int=2, value=2.2, conf=0.9)
    ys = (
        img(truth_float=1.0, value=1.1, conf=0.8),
        img(truth_float=3.0, value=2.9, conf=0.7),
    )
    prof = profile_dataset(p, (IMAGE, ListT(IMAGE)), [(x, ys)])
    # The guard's scalar operand evaluates once per valuation, the guard
    # itself once per element.
    assert len(prof.details["f2"][0]) == 1
    assert len(prof.details["f1"][0]) == 2
    assert len(prof.details["f3"][0]) == 2
    assert prof.train_outputs == [3.0]  # only the 3.0 element passes the guard
    # All-commit flow: x̂=2, kept ŷ where 2 <= ŷ: only 2.9
    assert prof.commit_outputs[0] == pytest.approx(2.9)
    gap, y1, y2, y1t, y2t = prof.details["f1"][0][0]
    assert gap == pytest.approx(abs(2 - 1.1))
    assert (y1, y2, y1t, y2t) == (2, 1.1, 2, 1.0)


def test_profile_equals_test_eval_when_nothing_abstains():
    p = conditional_sum()
    sig = (IMAGE, ListT(IMAGE))
    data = make_task_data(
        TaskDataConfig(scalars=1, lists=1, predictor=PredictorConfig()),
        40,
        seed=11,
    )
    prof = profile_dataset(p, sig, data)
    fill = permissive_fill(p)
    for inputs, expected in zip(data, prof.commit_outputs):
        assert dsl_eval(p, inputs, "test", fill, sig=sig) == expected


# ---------------------------------------------------------------------------
# Lowering and the generic sketch route

def test_lowered_bundle_shape():
    lowered = lower_to_sketch_ir(
        conditional_sum(),
        3,
        eps={"f1": 0.01, "f2": 0.01, "f3": 0.01},
        errs={"f3": 2.0},
    )
    assert len(lowered.slots) == 9
    assert lowered.sketch_expr.fn == "all"
    labels = {s.label for s in lowered.slots}
    assert labels == {"f1", "f2", "f3"}


def test_lowering_requires_budgets():
    with pytest.raises(ValueError, match="eps"):
        lower_to_sketch_ir(float_sum(), 2, eps={}, errs={"f1": 1.0})
    with pytest.raises(ValueError, match="tolerance"):
        lower_to_sketch_ir(float_sum(), 2, eps={"f1": 0.1}, errs={})


def test_sketch_via_ir_matches_hand_built_stream():
    # Two unrolled slots of one predict_float occurrence.  Streams, pooled
    # order, and the final threshold are reproduced by hand.
    p = float_sum()
    sig = (ListT(IMAGE),)
    data = [
        ((
            img(truth_float=3.0, value=5.0, conf=0.9, rid=1),
            img(truth_float=1.2, value=1.0, conf=0.8, rid=2),
        ),),
        ((img(truth_float=0.5, value=2.0, conf=0.7, rid=3),),),
        ((
            img(truth_float=1.05, value=1.0, conf=0.6, rid=4),
            img(truth_float=2.0, value=4.0, conf=0.95, rid=5),
        ),),
    ]
    report = sketch_via_ir(
        p, sig, data, N=2, eps={"f1": 0.4}, errs={"f1": 1.0}, delta=0.2
    )
    # Violations (err > 1.0): rid 1 (conf .9), rid 3 (conf .7), rid 5
    # (conf .95); everything else, padding included, is vacuous.
    hand = [0.9, -math.inf, -math.inf, -math.inf, 0.7, 0.95]
    expected = threshold_estimate(
        hand, EstimatorConfig(epsilon=0.4, delta=0.2 / 2)
    )
    assert report.fill.thresholds["f1"] == expected
    assert report.core.m == 2
    assert report.dropped == 0
    (fill_rec,) = report.core.fills
    assert fill_rec.n == 6


def test_lower_valuations_reports_dropped_applications():
    p = float_sum()
    sig = (ListT(IMAGE),)
    data = [
        ((img(rid=1, truth_float=1.0), img(rid=2, truth_float=2.0)),),
        ((img(rid=3, truth_float=3.0),),),
    ]
    prof = profile_dataset(p, sig, data)
    lowered = lower_to_sketch_ir(p, 1, eps={"f1": 0.1}, errs={"f1": 1.0})
    vals, dropped = lower_valuations(lowered, prof)
    assert dropped == 1
    assert len(vals) == 2
    assert vals[1].inputs["f1.0.present"] == 1


def test_unconstrained_error_never_violates():
    p = float_sum()
    sig = (ListT(IMAGE),)
    data = [((img(truth_float=0.0, value=50.0, conf=0.9),),)] * 5
    report = sketch_via_ir(
        p, sig, data, N=1, eps={"f1": 0.5}, errs={"f1": math.inf}, delta=0.1
    )
    assert report.fill.thresholds["f1"] == -math.inf


def test_zero_component_program_lowers_to_empty_bundle():
    p, _ = elaborate(parse_program("(length input1)"), (ListT(FLOAT),))
    report = sketch_via_ir(p, (ListT(FLOAT),), [((1.0, 2.0),)], N=1,
                           eps={}, errs={}, delta=0.05)
    assert report.core.m == 0
    assert report.fill.thresholds == {}


# ---------------------------------------------------------------------------
# Length bound

def test_length_bound_constant_lengths():
    p = float_sum()
    sig = (ListT(IMAGE),)
    data = [
        ((img(rid=3 * i, truth_float=1.0), img(rid=3 * i + 1, truth_float=1.0),
          img(rid=3 * i + 2, truth_float=1.0)),)
        for i in range(100)
    ]
    assert length_bound(data, p, sig, 0.2, 0.2) == 3


def test_length_bound_insufficient_data():
    p = float_sum()
    data = [((img(truth_float=1.0),),)]
    assert length_bound(data, p, (ListT(IMAGE),), 0.05, 0.05) == math.inf
    with pytest.raises(ValueError):
        length_bound([], p, (ListT(IMAGE),), 0.05, 0.05)


def test_length_bound_simulation():
    import random as _r

    rng = _r.Random(5)
    p = float_sum()
    sig = (ListT(IMAGE),)
    data = []
    rid = 0
    for _ in range(400):
        n = rng.randint(1, 5)
        row = []
        for _ in range(n):
            row.append(img(rid=rid, truth_float=1.0))
            rid += 1
        data.append((tuple(row),))
    n_bound = length_bound(data, p, sig, 0.4, 0.1)
    assert n_bound <= 5
    frac = sum(1 for (row,) in data if len(row) <= n_bound) / len(data)
    assert frac >= 0.6  # 1 - eps on the fitting data itself


def test_max_list_length_sees_intermediates():
    p, _ = elaborate(
        parse_program("(length (slice input1 0 2))"), (ListT(FLOAT),)
    )
    assert max_list_length(p, (ListT(FLOAT),), ((1.0, 2.0, 3.0, 4.0),)) == 4


# ---------------------------------------------------------------------------
# Synthetic predictors

def test_perfect_predictor_is_exact_with_zero_noise():
    cfg = PredictorConfig(accuracy=1.0, noise=0.0)
    for r in synth_predictor(cfg, 200, seed=3):
        assert r.pred.value == r.truth_float == float(r.truth_int)


def test_hopeless_predictor_never_matches():
    cfg = PredictorConfig(accuracy=0.0)
    for r in synth_predictor(cfg, 200, seed=4):
        assert int(round(r.pred.value)) != r.truth_int


def test_accuracy_concentrates():
    recs = synth_predictor(PredictorConfig(accuracy=0.99), 10000, seed=5)
    acc = sum(1 for r in recs if int(round(r.pred.value)) == r.truth_int) / 10000
    assert abs(acc - 0.99) <= 0.005


def test_confidence_separates_correct_from_wrong():
    recs = synth_predictor(PredictorConfig(accuracy=0.5), 4000, seed=6)
    right = [r.pred.conf for r in recs if int(round(r.pred.value)) == r.truth_int]
    wrong = [r.pred.conf for r in recs if int(round(r.pred.value)) != r.truth_int]
    assert sum(right) / len(right) > sum(wrong) / len(wrong) + 0.2
    assert all(0.0 <= r.pred.conf <= 1.0 for r in recs)


def test_flip_fields_follow_config():
    recs = synth_predictor(
        PredictorConfig(flip_rate=0.3, flip_accuracy=0.9), 5000, seed=7
    )
    flipped = sum(1 for r in recs if r.truth_flipped) / 5000
    detected = sum(1 for r in recs if r.flip_pred == r.truth_flipped) / 5000
    assert abs(flipped - 0.3) < 0.03
    assert abs(detected - 0.9) < 0.02


def test_generator_is_deterministic_and_serializable():
    cfg = PredictorConfig(fast_accuracy=0.9)
    a = synth_predictor(cfg, 50, seed=9)
    b = synth_predictor(cfg, 50, seed=9)
    assert a == b
    buf = io.StringIO()
    records_to_jsonl(a, buf)
    buf.seek(0)
    assert records_from_jsonl(buf) == a


def test_task_data_shapes_and_round_trip():
    cfg = TaskDataConfig(scalars=1, lists=1, list_lengths=(2, 3))
    data = make_task_data(cfg, 30, seed=12)
    assert len(data) == 30
    ids = set()
    for x, ys in data:
        assert isinstance(x, ImageVal)
        assert len(ys) in (2, 3)
        ids.add(x.record.id)
        ids.update(y.record.id for y in ys)
    total = sum(1 + len(ys) for _, ys in data)
    assert len(ids) == total  # every image is fresh
    buf = io.StringIO()
    examples_to_jsonl(data, buf)
    buf.seek(0)
    assert examples_from_jsonl(buf) == data


def test_predictor_config_validation():
    with pytest.raises(ValueError):
        PredictorConfig(accuracy=1.5)
    with pytest.raises(ValueError):
        PredictorConfig(noise=0.6)
    with pytest.raises(ValueError):
        PredictorConfig(wrong_offset=(0.2, 3.0))


# ---------------------------------------------------------------------------
# Absorption

def test_bot_absorbs_through_every_shape():
    p = conditional_sum()
    x = img(truth_int=2, value=2.0, conf=0.99)
    ys = (img(truth_float=1.0, value=1.0, conf=0.2),)
    # Worst threshold on the element predictor: whole program abstains.
    fill = HoleAssignment(
        thresholds={"f1": -math.inf, "f2": -math.inf, "f3": 0.5}
    )
    assert dsl_eval(p, (x, ys), "test", fill) is BOT
    # Guard operand abstains: filter collapses even though elements commit.
    fill2 = HoleAssignment(
        thresholds={"f1": -math.inf, "f2": 1.1, "f3": -math.inf}
    )
    assert dsl_eval(p, (x, ys), "test", fill2) is BOT
