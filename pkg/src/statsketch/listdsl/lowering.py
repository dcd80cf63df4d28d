"""Lowering list-language programs onto the core sketching machinery.

A program with learned components becomes a straight-line bundle of
guarantee expressions: list operations unroll up to the length bound N,
every unrolled copy of an occurrence gets its own expression (and so its
own calibration stream and its own share of δ), and all copies of one
syntactic occurrence share a single threshold hole.  Absent positions
(lists shorter than N) appear as vacuous rows that can never violate, so
pooled streams always have exactly count·|data| entries.

Threshold direction: a component commits when its confidence (or, for
guards, the gap between its operands) is at least c.  Calibration treats
the confidence itself as the score and the event "the committed answer
breaks the annotation" as the condition, in implication mode, so the
fitted threshold bounds the chance of a confident wrong commitment.  A
commitment exactly at c sits outside the fitted bound, but ties have
probability zero for continuous confidence models.

Applications past the unroll bound (data lists longer than N) fall outside
the lowered bundle; their mass is the length bound's business.  The count
is reported, not silently eaten.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence

from ..estimators import threshold_estimate, EstimatorConfig
from ..sketch_ir import (
    Apply,
    Constant,
    Expr,
    GroundTruthVar,
    Hole,
    InputVar,
    SpecExpr,
    Valuation,
)
from ..sketcher import SketchJob, SketchResult, sketch
from .eval import (
    HoleAssignment,
    ProfileResult,
    max_list_length,
    profile_dataset,
)
from .lang import (
    ANNOTATED,
    App,
    Comp,
    DslType,
    Filter,
    FloatLit,
    Fold,
    Input,
    IntLit,
    Length,
    Map,
    Program,
    Slice,
    ToFloat,
    annotated_occurrences,
    children,
)

__all__ = [
    "unroll_occurrences",
    "LoweredSketch",
    "lower_to_sketch_ir",
    "lower_valuations",
    "sketch_via_ir",
    "length_bound",
]


# ---------------------------------------------------------------------------
# Literal unrolling

@dataclass(frozen=True)
class _LabeledComp(Comp):
    """A component occurrence tagged with its preorder label, so copies of
    distinct occurrences stay distinguishable in the unrolled code."""

    label: str = ""


def _label_occurrences(p: Program) -> Program:
    counter = [0]

    def go(q: Program) -> Program:
        if isinstance(q, Comp):
            if q.name in ANNOTATED:
                counter[0] += 1
                return _LabeledComp(q.name, q.ty, f"f{counter[0]}")
            return q
        if isinstance(q, Input) or isinstance(q, (IntLit, FloatLit)):
            return q
        if isinstance(q, ToFloat):
            return ToFloat(go(q.arg))
        if isinstance(q, App):
            return App(go(q.fn), go(q.arg))
        if isinstance(q, Fold):
            return Fold(go(q.fn), go(q.lst), go(q.base))
        if isinstance(q, Map):
            return Map(go(q.fn), go(q.lst))
        if isinstance(q, Filter):
            return Filter(go(q.fn), go(q.lst))
        if isinstance(q, Slice):
            return Slice(go(q.lst), go(q.lo), go(q.hi))
        if isinstance(q, Length):
            return Length(go(q.lst))
        raise TypeError(f"cannot label {q!r}")

    return go(p)


def unroll_occurrences(p: Program, N: int) -> dict[str, int]:
    """Multiplicity of each annotated occurrence after literally unrolling
    every list operation to N iterations.

    This builds the unrolled expression and counts copies in it, nothing
    cleverer: function expressions are duplicated once per application, a
    filter's output is assumed to keep all N slots, and a fold chains N
    applications.  Deliberately independent of the static counting
    analysis so the two can be checked against each other.
    """
    if N < 1:
        raise ValueError("unroll bound must be at least 1")
    labeled = _label_occurrences(p)
    extra: list[Any] = []
    shape = _unroll(labeled, N, extra)
    trees = list(extra)
    trees.extend(shape if isinstance(shape, list) else [shape])
    counts = {f"f{i + 1}": 0 for i in range(len(annotated_occurrences(p)))}
    stack = list(trees)
    while stack:
        node = stack.pop()
        if isinstance(node, _LabeledComp):
            counts[node.label] += 1
        stack.extend(children(node))
    return counts


def _unroll(p: Program, N: int, extra: list) -> Any:
    """Unrolled form of p: a tree for scalars, a list of N trees for list
    values.  Side computations (filter guards, slice bounds) go to extra."""
    if isinstance(p, Input):
        return p
    if isinstance(p, (IntLit, FloatLit, Comp)):
        return p
    if isinstance(p, ToFloat):
        return ToFloat(_as_scalar(_unroll(p.arg, N, extra)))
    if isinstance(p, App):
        fn = _as_scalar(_unroll(p.fn, N, extra))
        arg = _as_scalar(_unroll(p.arg, N, extra))
        return App(fn, arg)
    if isinstance(p, Fold):
        fn_extra: list = []
        fn = _as_scalar(_unroll(p.fn, N, fn_extra))
        lst = _as_list(_unroll(p.lst, N, extra), p.lst, N)
        acc = _as_scalar(_unroll(p.base, N, extra))
        for elem in lst:
            acc = App(App(fn, elem), acc)
            extra.extend(fn_extra)
        return acc
    if isinstance(p, Map):
        fn_extra = []
        fn = _as_scalar(_unroll(p.fn, N, fn_extra))
        lst = _as_list(_unroll(p.lst, N, extra), p.lst, N)
        out = []
        for elem in lst:
            out.append(App(fn, elem))
            extra.extend(fn_extra)
        return out
    if isinstance(p, Filter):
        fn_extra = []
        fn = _as_scalar(_unroll(p.fn, N, fn_extra))
        lst = _as_list(_unroll(p.lst, N, extra), p.lst, N)
        # One guard application per slot.  The guard reads an element that
        # straight-line code would have bound already, so a placeholder
        # stands in; counting the element tree again would double it.  Any
        # side computations arising inside the function expression belong
        # to each duplicated copy, so they replicate per application too.
        for _ in lst:
            extra.append(App(fn, IntLit(0)))
            extra.extend(fn_extra)
        return list(lst)
    if isinstance(p, Slice):
        lst = _as_list(_unroll(p.lst, N, extra), p.lst, N)
        extra.append(_as_scalar(_unroll(p.lo, N, extra)))
        extra.append(_as_scalar(_unroll(p.hi, N, extra)))
        return list(lst)
    if isinstance(p, Length):
        lst = _as_list(_unroll(p.lst, N, extra), p.lst, N)
        extra.extend(lst)
        return IntLit(0)
    raise TypeError(f"cannot unroll {p!r}")


def _as_scalar(shape: Any) -> Program:
    if isinstance(shape, list):
        raise TypeError("expected a scalar position, found a list")
    return shape


def _as_list(shape: Any, origin: Program, N: int) -> list:
    if isinstance(shape, list):
        return shape
    # A list-typed input: N anonymous element slots.  The input node
    # itself carries no annotated components, so sharing it is harmless.
    return [shape] * N


# ---------------------------------------------------------------------------
# Lowering to the sketch IR

@dataclass(frozen=True)
class _Slot:
    label: str
    comp: str
    index: int

    @property
    def prefix(self) -> str:
        return f"{self.label}.{self.index}"


@dataclass(frozen=True)
class LoweredSketch:
    """A program's guarantee bundle in the core IR.

    program is Apply("all", specs) where every spec is one unrolled
    occurrence slot; slots records their order.  Thresholds appear as one
    shared Hole per occurrence label.
    """

    source: Program
    sketch_expr: Expr
    slots: tuple[_Slot, ...]
    counts: dict[str, int]
    eps: dict[str, float]
    errs: dict[str, float]
    N: int


def lower_to_sketch_ir(
    p: Program,
    N: int,
    eps: dict[str, float],
    errs: dict[str, float],
) -> LoweredSketch:
    """Build the guarantee bundle for p unrolled to N.

    eps maps every occurrence label to its slice of the error budget;
    errs maps predict_float labels to their value tolerance (math.inf
    marks an unconstrained occurrence).
    """
    occs = annotated_occurrences(p)
    labels = [(f"f{i + 1}", c.name) for i, c in enumerate(occs)]
    for lab, _ in labels:
        if lab not in eps:
            raise ValueError(f"occurrence {lab} has no eps assignment")
    for lab, name in labels:
        if name == "predict_float" and lab not in errs:
            raise ValueError(f"occurrence {lab} has no error tolerance")
    counts = unroll_occurrences(p, N) if labels else {}
    slots = []
    specs = []
    for lab, name in labels:
        for j in range(counts[lab]):
            slot = _Slot(lab, name, j)
            slots.append(slot)
            specs.append(_slot_spec(slot, eps[lab], errs.get(lab)))
    return LoweredSketch(
        source=p,
        sketch_expr=Apply("all", tuple(specs)),
        slots=tuple(slots),
        counts=counts,
        eps=dict(eps),
        errs=dict(errs),
        N=N,
    )


def _slot_spec(slot: _Slot, eps_f: float, err_f: Optional[float]) -> SpecExpr:
    pre = slot.prefix
    present = InputVar(f"{pre}.present")
    name = slot.comp
    if name == "predict_int":
        viol: Expr = Apply(
            "!=", (InputVar(f"{pre}.val"), GroundTruthVar(f"{pre}.truth"))
        )
    elif name == "predict_float":
        if err_f is None or math.isinf(err_f):
            viol = Constant(False)
        else:
            viol = Apply(
                ">",
                (
                    Apply(
                        "abs",
                        (
                            Apply(
                                "-",
                                (
                                    InputVar(f"{pre}.val"),
                                    GroundTruthVar(f"{pre}.truth"),
                                ),
                            ),
                        ),
                    ),
                    Constant(err_f),
                ),
            )
    elif name == "cond-flip":
        viol = Apply(
            "!=", (InputVar(f"{pre}.flip"), GroundTruthVar(f"{pre}.flipped"))
        )
    elif name in ("cond-≤", "cond-≥"):
        op = "<=" if name == "cond-≤" else ">="
        viol = Apply(
            "!=",
            (
                Apply(op, (InputVar(f"{pre}.y1"), InputVar(f"{pre}.y2"))),
                Apply(
                    op,
                    (
                        GroundTruthVar(f"{pre}.y1t"),
                        GroundTruthVar(f"{pre}.y2t"),
                    ),
                ),
            ),
        )
    else:
        raise ValueError(f"no lowering for component {name!r}")
    return SpecExpr(
        score=InputVar(f"{pre}.score"),
        threshold=Hole(slot.label),
        spec=Apply("and", (present, viol)),
        eps=eps_f,
        mode="impl",
    )


def lower_valuations(
    lowered: LoweredSketch, profile: ProfileResult
) -> tuple[list[Valuation], int]:
    """Per-example IR valuations for the bundle, plus how many applications
    fell past the unroll bound."""
    n_examples = len(profile.commit_outputs)
    dropped = 0
    out = []
    for i in range(n_examples):
        inputs: dict[str, Any] = {}
        truths: dict[str, Any] = {}
        for lab, name in profile.labels:
            apps = profile.details[lab][i]
            count = lowered.counts.get(lab, 0)
            if len(apps) > count:
                dropped += len(apps) - count
            for j in range(count):
                pre = f"{lab}.{j}"
                if j < len(apps):
                    _fill_slot(inputs, truths, pre, name, apps[j])
                else:
                    _fill_padding(inputs, truths, pre, name)
        out.append(Valuation(inputs=inputs, ground_truth=truths))
    return out, dropped


def _fill_slot(inputs, truths, pre, name, t) -> None:
    inputs[f"{pre}.present"] = 1
    inputs[f"{pre}.score"] = t[0]
    if name in ("predict_int", "predict_float"):
        inputs[f"{pre}.val"] = t[1]
        truths[f"{pre}.truth"] = t[2]
    elif name == "cond-flip":
        inputs[f"{pre}.flip"] = t[1]
        truths[f"{pre}.flipped"] = t[2]
    else:
        inputs[f"{pre}.y1"] = t[1]
        inputs[f"{pre}.y2"] = t[2]
        truths[f"{pre}.y1t"] = t[3]
        truths[f"{pre}.y2t"] = t[4]


def _fill_padding(inputs, truths, pre, name) -> None:
    inputs[f"{pre}.present"] = 0
    inputs[f"{pre}.score"] = 0.0
    if name in ("predict_int", "predict_float"):
        inputs[f"{pre}.val"] = 0
        truths[f"{pre}.truth"] = 0
    elif name == "cond-flip":
        inputs[f"{pre}.flip"] = False
        truths[f"{pre}.flipped"] = False
    else:
        inputs[f"{pre}.y1"] = 0.0
        inputs[f"{pre}.y2"] = 0.0
        truths[f"{pre}.y1t"] = 0.0
        truths[f"{pre}.y2t"] = 0.0


@dataclass(frozen=True)
class DslSketchReport:
    """What calibrating a program on a dataset produced."""

    fill: HoleAssignment
    core: SketchResult
    lowered: LoweredSketch
    dropped: int


def sketch_via_ir(
    p: Program,
    sig: tuple[DslType, ...],
    data: Sequence[Sequence[Any]],
    N: int,
    eps: dict[str, float],
    errs: dict[str, float],
    delta: float,
    k_zero: bool = False,
    profile: Optional[ProfileResult] = None,
) -> DslSketchReport:
    """Calibrate p's thresholds through the generic route: profile the
    data, lower to the core IR, run the core sketcher, read fills back.
    """
    if profile is None:
        profile = profile_dataset(p, sig, data)
    lowered = lower_to_sketch_ir(p, N, eps, errs)
    vals, dropped = lower_valuations(lowered, profile)
    result = sketch(
        SketchJob(
            program=lowered.sketch_expr,
            data=tuple(vals),
            delta=delta,
            k_zero=k_zero,
        )
    )
    thresholds: dict[str, float] = {}
    for f in result.fills:
        if f.kind != "threshold":
            raise RuntimeError("lowered bundles only contain threshold holes")
        thresholds[f.hole_id] = f.value
    fill = HoleAssignment(thresholds=thresholds, eps=dict(eps), errs=dict(errs))
    return DslSketchReport(fill=fill, core=result, lowered=lowered, dropped=dropped)


# ---------------------------------------------------------------------------
# Length bound

def length_bound(
    data: Sequence[Sequence[Any]],
    p: Program,
    sig: tuple[DslType, ...],
    eps_half: float,
    delta_share: float,
) -> float:
    """Smallest N with P(every list the program touches fits in N) at
    least 1 - eps_half, with confidence 1 - delta_share.

    Lengths are integers, so the fitted threshold's fractional padding is
    floored away without weakening the claim.  Returns math.inf when the
    data cannot support the bound (report as insufficient data).
    """
    if not data:
        raise ValueError("cannot bound lengths from no data")
    samples = [float(max_list_length(p, sig, inputs)) for inputs in data]
    t_hat = threshold_estimate(
        samples, EstimatorConfig(epsilon=eps_half, delta=delta_share)
    )
    if math.isinf(t_hat):
        return math.inf
    return max(1, int(math.floor(t_hat)))
