"""Evaluation of list-language programs.

Three modes share one compiler:

* train: learned components read ground truth out of the record, so the
           result is the value the program is supposed to compute.
* test:  learned components consult their confidence and threshold;
           below-threshold applications return the abstain value, which
           absorbs through everything above them.
* dual:  every learned component commits unconditionally and logs a
           (score, violation) sample per application; values are carried
           as (test, truth) pairs so violation checks can compare against
           the truth of whatever actually flowed in.  One dual pass per
           dataset yields the calibration streams for every candidate
           threshold assignment at once.

A dual pass follows the test-time control flow (filters keep what the
predicted booleans keep), so its truth halves are references for the
committed path, not the program's train output; compute that with a train
pass.  When no component abstains, test output equals the dual pass's
test half exactly, which is what makes fast candidate scoring sound.

Programs are compiled to closures once and applied to many inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

from .lang import (
    ANNOTATED,
    BOOL,
    INT,
    FLOAT,
    IMAGE,
    App,
    Comp,
    DslType,
    Filter,
    FloatLit,
    Fold,
    Input,
    IntLit,
    Length,
    ListT,
    Map,
    Program,
    Slice,
    ToFloat,
    annotated_occurrences,
    elaborate,
)
from .values import BOT, ImageVal, Prediction

__all__ = [
    "HoleAssignment",
    "permissive_fill",
    "compile_program",
    "dsl_eval",
    "make_evaluator",
    "dsl_output_error",
    "LengthMismatch",
    "ProfileResult",
    "profile_dataset",
    "max_list_length",
    "infer_signature",
]

# A predictor shown an image that is still wrong side up returns a value
# this far from its upright answer, at unchanged confidence.  Synthetic
# stand-in for "garbage out".
_FLIP_GARBLE = 5.0


@dataclass(frozen=True)
class HoleAssignment:
    """Concrete values for a program's holes, keyed by occurrence label.

    thresholds must cover every annotated occurrence before test-mode
    evaluation; eps and errs ride along for reporting and lowering.
    """

    thresholds: dict[str, float] = field(default_factory=dict)
    eps: dict[str, float] = field(default_factory=dict)
    errs: dict[str, float] = field(default_factory=dict)


def permissive_fill(p: Program) -> HoleAssignment:
    """Thresholds that never abstain (every confidence clears -inf)."""
    occs = annotated_occurrences(p)
    return HoleAssignment(
        thresholds={f"f{i + 1}": -math.inf for i in range(len(occs))}
    )


class LengthMismatch(ValueError):
    """Outputs of list type disagree in length; treated as a failure."""


def dsl_output_error(a: Any, b: Any) -> float:
    """Largest absolute componentwise difference between two outputs."""
    if a is BOT or b is BOT:
        raise ValueError("cannot measure error against an abstention")
    if isinstance(a, tuple) or isinstance(b, tuple):
        if not (isinstance(a, tuple) and isinstance(b, tuple)):
            raise TypeError("cannot compare a list with a scalar")
        if len(a) != len(b):
            raise LengthMismatch(f"list lengths differ: {len(a)} vs {len(b)}")
        return max((dsl_output_error(x, y) for x, y in zip(a, b)), default=0.0)
    if isinstance(a, bool) or isinstance(b, bool):
        return 0.0 if a == b else math.inf
    return abs(float(a) - float(b))


def infer_signature(inputs: Sequence[Any]) -> tuple[DslType, ...]:
    """Read input types off runtime values.  Empty lists are ambiguous and
    need an explicit signature instead."""
    out = []
    for v in inputs:
        out.append(_infer_value_type(v))
    return tuple(out)


def _infer_value_type(v: Any) -> DslType:
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, float):
        return FLOAT
    if isinstance(v, ImageVal):
        return IMAGE
    if isinstance(v, tuple):
        if not v:
            raise ValueError("cannot infer the element type of an empty list")
        return ListT(_infer_value_type(v[0]))
    raise TypeError(f"not a runtime value: {v!r}")


# ---------------------------------------------------------------------------
# Compilation

class _Ctx:
    __slots__ = ("inputs", "sink", "max_len")

    def __init__(self, inputs, sink=None, max_len=None):
        self.inputs = inputs
        self.sink = sink      # dual mode: label -> list of (score, violation)
        self.max_len = max_len  # train mode with tracking: one-cell list


def _predict(img: ImageVal) -> Prediction:
    p = img.record.pred
    if img.upright:
        return p
    return Prediction(p.value + _FLIP_GARBLE, p.conf)


def _track(ctx: _Ctx, lst: tuple) -> tuple:
    cell = ctx.max_len
    if cell is not None and len(lst) > cell[0]:
        cell[0] = len(lst)
    return lst


def compile_program(
    p: Program,
    sig: tuple[DslType, ...],
    mode: str,
    fill: Optional[HoleAssignment] = None,
) -> Callable[[_Ctx], Any]:
    """Elaborate and compile p into a closure over a _Ctx.

    Most callers want dsl_eval or profile_dataset; this is the shared
    engine.  mode is "train", "test", or "dual".
    """
    if mode not in ("train", "test", "dual"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "test" and fill is None:
        raise ValueError("test mode needs a hole assignment")
    elaborated, _ = elaborate(p, sig)
    counter = [0]
    return _compile(elaborated, mode, fill, counter)


def _compile(p, mode, fill, counter):
    if isinstance(p, Input):
        idx = p.index
        if mode == "dual":
            # Lift raw inputs into (test, truth) pairs; both halves start
            # out identical.
            def run_input_dual(ctx, _i=idx):
                v = ctx.inputs[_i]
                if isinstance(v, tuple):
                    return _track(ctx, tuple((x, x) for x in v))
                return (v, v)
            return run_input_dual
        def run_input(ctx, _i=idx):
            v = ctx.inputs[_i]
            if isinstance(v, tuple):
                _track(ctx, v)
            return v
        return run_input
    if isinstance(p, IntLit):
        v = p.value
        if mode == "dual":
            return lambda ctx, _v=v: (_v, _v)
        return lambda ctx, _v=v: _v
    if isinstance(p, FloatLit):
        v = p.value
        if mode == "dual":
            return lambda ctx, _v=v: (_v, _v)
        return lambda ctx, _v=v: _v
    if isinstance(p, Comp):
        if p.name in ANNOTATED:
            counter[0] += 1
            label = f"f{counter[0]}"
            return _compile_annotated(p, mode, fill, label)
        return _compile_exact(p, mode)
    if isinstance(p, ToFloat):
        arg = _compile(p.arg, mode, fill, counter)
        if mode == "dual":
            def run_tofloat_dual(ctx):
                v = arg(ctx)
                if v is BOT:
                    return BOT
                return (float(v[0]), float(v[1]))
            return run_tofloat_dual
        def run_tofloat(ctx):
            v = arg(ctx)
            return BOT if v is BOT else float(v)
        return run_tofloat
    if isinstance(p, App):
        fn = _compile(p.fn, mode, fill, counter)
        arg = _compile(p.arg, mode, fill, counter)
        def run_app(ctx):
            f = fn(ctx)
            if f is BOT:
                return BOT
            x = arg(ctx)
            if x is BOT:
                return BOT
            return f(x)
        return run_app
    if isinstance(p, Fold):
        fn = _compile(p.fn, mode, fill, counter)
        lst = _compile(p.lst, mode, fill, counter)
        base = _compile(p.base, mode, fill, counter)
        def run_fold(ctx):
            f = fn(ctx)
            if f is BOT:
                return BOT
            lv = lst(ctx)
            if lv is BOT:
                return BOT
            acc = base(ctx)
            if acc is BOT:
                return BOT
            for x in lv:
                acc = f(x)(acc)
                if acc is BOT:
                    return BOT
            return acc
        return run_fold
    if isinstance(p, Map):
        fn = _compile(p.fn, mode, fill, counter)
        lst = _compile(p.lst, mode, fill, counter)
        def run_map(ctx):
            f = fn(ctx)
            if f is BOT:
                return BOT
            lv = lst(ctx)
            if lv is BOT:
                return BOT
            out = []
            for x in lv:
                y = f(x)
                if y is BOT:
                    return BOT
                out.append(y)
            return _track(ctx, tuple(out))
        return run_map
    if isinstance(p, Filter):
        fn = _compile(p.fn, mode, fill, counter)
        lst = _compile(p.lst, mode, fill, counter)
        dual = mode == "dual"
        def run_filter(ctx):
            f = fn(ctx)
            if f is BOT:
                return BOT
            lv = lst(ctx)
            if lv is BOT:
                return BOT
            out = []
            for x in lv:
                b = f(x)
                if b is BOT:
                    return BOT
                keep = b[0] if dual else b
                if keep:
                    out.append(x)
            return _track(ctx, tuple(out))
        return run_filter
    if isinstance(p, Slice):
        lst = _compile(p.lst, mode, fill, counter)
        lo = _compile(p.lo, mode, fill, counter)
        hi = _compile(p.hi, mode, fill, counter)
        dual = mode == "dual"
        def run_slice(ctx):
            lv = lst(ctx)
            if lv is BOT:
                return BOT
            i = lo(ctx)
            if i is BOT:
                return BOT
            j = hi(ctx)
            if j is BOT:
                return BOT
            if dual:
                i, j = i[0], j[0]
            n = len(lv)
            i2 = min(max(i, 0), n)
            j2 = min(max(j, 0), n)
            return _track(ctx, lv[i2:j2])
        return run_slice
    if isinstance(p, Length):
        lst = _compile(p.lst, mode, fill, counter)
        dual = mode == "dual"
        def run_length(ctx):
            lv = lst(ctx)
            if lv is BOT:
                return BOT
            n = len(lv)
            return (n, n) if dual else n
        return run_length
    raise TypeError(f"cannot compile {p!r}")


def _compile_exact(p: Comp, mode: str):
    """Arithmetic and integer comparisons: same in every mode, lifted to
    pairs in dual mode."""
    name = p.name
    if name == "+":
        op = lambda a, b: a + b
    elif name == "-":
        op = lambda a, b: a - b
    elif name == "max":
        op = lambda a, b: a if a >= b else b
    elif name == "<=":
        op = lambda a, b: a <= b
    elif name == ">=":
        op = lambda a, b: a >= b
    elif name == "=":
        op = lambda a, b: a == b
    else:
        raise ValueError(f"component {name!r} has no exact semantics")
    if mode == "dual":
        def atom_dual(ctx):
            return lambda a: lambda b: (op(a[0], b[0]), op(a[1], b[1]))
        return atom_dual
    def atom(ctx):
        return lambda a: lambda b: op(a, b)
    return atom


def _truth_int(img: ImageVal) -> int:
    t = img.record.truth_int
    if t is None:
        raise ValueError(f"record {img.record.id} has no integer truth")
    return t


def _truth_float(img: ImageVal) -> float:
    t = img.record.truth_float
    if t is None:
        raise ValueError(f"record {img.record.id} has no float truth")
    return t


def _compile_annotated(p: Comp, mode: str, fill, label: str):
    name = p.name

    if mode == "train":
        if name == "predict_int":
            return lambda ctx: _truth_int
        if name == "predict_float":
            return lambda ctx: _truth_float
        if name == "cond-flip":
            return lambda ctx: lambda img: ImageVal(img.record, True)
        if name == "cond-≤":
            return lambda ctx: lambda a: lambda b: a <= b
        if name == "cond-≥":
            return lambda ctx: lambda a: lambda b: a >= b

    if mode == "test":
        try:
            c = fill.thresholds[label]
        except KeyError:
            raise ValueError(
                f"occurrence {label} ({name}) has no threshold in the fill"
            ) from None
        if name == "predict_int":
            def pi(img, _c=c):
                pr = _predict(img)
                return int(round(pr.value)) if pr.conf >= _c else BOT
            return lambda ctx: pi
        if name == "predict_float":
            def pf(img, _c=c):
                pr = _predict(img)
                return float(pr.value) if pr.conf >= _c else BOT
            return lambda ctx: pf
        if name == "cond-flip":
            def cf(img, _c=c):
                rec = img.record
                if rec.flip_conf < _c:
                    return BOT
                return ImageVal(rec, rec.flip_pred == rec.truth_flipped)
            return lambda ctx: cf
        if name in ("cond-≤", "cond-≥"):
            le = name == "cond-≤"
            def cc(a, _c=c, _le=le):
                def inner(b):
                    if abs(a - b) < _c:
                        return BOT
                    return a <= b if _le else a >= b
                return inner
            return lambda ctx: cc

    if mode == "dual":
        # Commit unconditionally; log the raw makings of one calibration
        # sample per application.  Scores and violation flags are distilled
        # afterwards (for predict_float, violation depends on the e budget).
        if name == "predict_int":
            def pi_dual(ctx, _lab=label):
                out = ctx.sink[_lab]
                def run(img):
                    pr = _predict(img[0])
                    truth = _truth_int(img[0])
                    val = int(round(pr.value))
                    out.append((pr.conf, val, truth))
                    return (val, truth)
                return run
            return pi_dual
        if name == "predict_float":
            def pf_dual(ctx, _lab=label):
                out = ctx.sink[_lab]
                def run(img):
                    pr = _predict(img[0])
                    truth = _truth_float(img[0])
                    val = float(pr.value)
                    out.append((pr.conf, val, truth))
                    return (val, truth)
                return run
            return pf_dual
        if name == "cond-flip":
            def cf_dual(ctx, _lab=label):
                out = ctx.sink[_lab]
                def run(img):
                    rec = img[0].record
                    ok = rec.flip_pred == rec.truth_flipped
                    out.append((rec.flip_conf, rec.flip_pred, rec.truth_flipped))
                    return (ImageVal(rec, ok), ImageVal(rec, True))
                return run
            return cf_dual
        if name in ("cond-≤", "cond-≥"):
            le = name == "cond-≤"
            def cc_dual(ctx, _lab=label, _le=le):
                out = ctx.sink[_lab]
                def run(a):
                    def inner(b):
                        gap = abs(a[0] - b[0])
                        out.append((gap, a[0], b[0], a[1], b[1]))
                        if _le:
                            return (a[0] <= b[0], a[1] <= b[1])
                        return (a[0] >= b[0], a[1] >= b[1])
                    return inner
                return run
            return cc_dual

    raise ValueError(f"no {mode} semantics for component {name!r}")


# ---------------------------------------------------------------------------
# Public entry points

def dsl_eval(
    p: Program,
    inputs: Sequence[Any],
    mode: str,
    fill: Optional[HoleAssignment] = None,
    sig: Optional[tuple[DslType, ...]] = None,
) -> Any:
    """Run a program once.  For repeated evaluation compile_program the
    program yourself and reuse the closure."""
    if sig is None:
        sig = infer_signature(inputs)
    fn = compile_program(p, sig, mode, fill)
    return fn(_Ctx(tuple(inputs)))


def make_evaluator(
    p: Program,
    sig: tuple[DslType, ...],
    mode: str,
    fill: Optional[HoleAssignment] = None,
) -> Callable[[Sequence[Any]], Any]:
    """Compile once, run many: returns a closure from inputs to output."""
    fn = compile_program(p, sig, mode, fill)
    return lambda inputs: fn(_Ctx(tuple(inputs)))


@dataclass
class ProfileResult:
    """Everything one instrumented pass learns about a dataset.

    labels pairs each occurrence label with its component name, in the
    program's preorder.  details[label][i] holds one raw tuple per
    application on valuation i: (conf, value, truth) for predictors,
    (conf, predicted_flip, truly_flipped) for cond-flip, and
    (gap, y1, y2, y1_truth, y2_truth) for guards.  scores and viols are
    the distilled (score, violated) view; for predict_float, viols holds
    absolute errors since what counts as violated depends on the e budget.
    commit_outputs are the outputs with every component committing, and
    train_outputs the ground-truth outputs.
    """

    labels: tuple[tuple[str, str], ...]
    details: dict[str, list[list[tuple]]]
    scores: dict[str, list[list[float]]]
    viols: dict[str, list[list[Any]]]
    commit_outputs: list[Any]
    train_outputs: list[Any]


def _distill(name: str, t: tuple) -> Any:
    if name == "predict_int":
        return t[1] != t[2]
    if name == "predict_float":
        return abs(t[1] - t[2])
    if name == "cond-flip":
        return t[1] != t[2]
    if name == "cond-≤":
        return (t[1] <= t[2]) != (t[3] <= t[4])
    if name == "cond-≥":
        return (t[1] >= t[2]) != (t[3] >= t[4])
    raise ValueError(f"no violation rule for {name!r}")


def profile_dataset(
    p: Program,
    sig: tuple[DslType, ...],
    data: Sequence[Sequence[Any]],
) -> ProfileResult:
    """One dual pass plus one train pass over every valuation."""
    labels = tuple(
        (f"f{i + 1}", c.name) for i, c in enumerate(annotated_occurrences(p))
    )
    dual_fn = compile_program(p, sig, "dual")
    train_fn = compile_program(p, sig, "train")
    details: dict[str, list[list[tuple]]] = {lab: [] for lab, _ in labels}
    scores: dict[str, list[list[float]]] = {lab: [] for lab, _ in labels}
    viols: dict[str, list[list[Any]]] = {lab: [] for lab, _ in labels}
    commit_outputs = []
    train_outputs = []
    for inputs in data:
        sink: dict[str, list] = {lab: [] for lab, _ in labels}
        out = dual_fn(_Ctx(tuple(inputs), sink=sink))
        commit_outputs.append(out if out is BOT else _test_half(out))
        train_outputs.append(train_fn(_Ctx(tuple(inputs))))
        for lab, name in labels:
            samples = sink[lab]
            details[lab].append(samples)
            scores[lab].append([t[0] for t in samples])
            viols[lab].append([_distill(name, t) for t in samples])
    return ProfileResult(labels, details, scores, viols, commit_outputs, train_outputs)


def _test_half(v: Any) -> Any:
    if isinstance(v, tuple) and v and isinstance(v[0], tuple):
        return tuple(x[0] for x in v)
    if isinstance(v, tuple) and not v:
        return v
    return v[0]


def max_list_length(
    p: Program, sig: tuple[DslType, ...], inputs: Sequence[Any]
) -> int:
    """Longest list materialized while running p's train semantics."""
    fn = compile_program(p, sig, "train")
    cell = [0]
    fn(_Ctx(tuple(inputs), max_len=cell))
    return cell[0]
