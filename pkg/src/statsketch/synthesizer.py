"""Program synthesis from io examples, with budget search on held-out data.

The pipeline has three steps.  Enumerate typed programs in order of
expression depth until one reproduces every io example under exact
semantics; that program is the partial sketch.  Split the labeled data
in half and search the budget grid on the first half, scoring each
candidate allocation by how rarely the calibrated program abstains.
Re-fit thresholds for the winning allocation on the second half, which
took no part in the search, so the guarantee attached to the returned
program is computed from fresh samples.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from .allocator import GRID_LEVELS, candidate_eps, candidate_errs
from .listdsl import (
    BOOL,
    COMPONENT_TYPES,
    App,
    Arrow,
    DslSketchReport,
    DslType,
    FLOAT,
    Filter,
    Fold,
    HoleAssignment,
    IMAGE,
    INT,
    ImageVal,
    Input,
    IntLit,
    Length,
    ListT,
    Map,
    ProfileResult,
    Program,
    Slice,
    ToFloat,
    comp,
    dsl_eval,
    elaborate,
    is_bot,
    length_bound,
    make_evaluator,
    print_program,
    profile_dataset,
    sketch_via_ir,
    type_from_str,
    type_to_str,
    value_from_json,
    value_to_json,
)

__all__ = [
    "SynthesisError",
    "TaskSpec",
    "SCHEMA_TASK",
    "task_to_json",
    "task_from_json",
    "synthesize_partial_sketch",
    "split_data",
    "score_program",
    "AllocationChoice",
    "select_allocation",
    "SynthesisResult",
    "synthesize",
]

SCHEMA_TASK = "statsketch/task-v1"


class SynthesisError(Exception):
    """Synthesis could not produce a program meeting the request."""


# ---------------------------------------------------------------------------
# Task descriptions


def _freeze(v: Any) -> Any:
    if isinstance(v, (list, tuple)):
        return tuple(_freeze(x) for x in v)
    return v


def _value_fits(v: Any, ty: DslType) -> bool:
    if ty == BOOL:
        return isinstance(v, bool)
    if ty == INT:
        return isinstance(v, int) and not isinstance(v, bool)
    if ty == FLOAT:
        return isinstance(v, float)
    if ty == IMAGE:
        return isinstance(v, ImageVal)
    if isinstance(ty, ListT):
        return isinstance(v, tuple) and all(_value_fits(x, ty.elem) for x in v)
    return False


def _first_order(ty: DslType) -> bool:
    if isinstance(ty, Arrow):
        return False
    if isinstance(ty, ListT):
        return not isinstance(ty.elem, (Arrow, ListT))
    return True


@dataclass(frozen=True)
class TaskSpec:
    """What to synthesize and under which budgets.

    io_examples pin the program's exact-semantics behavior; epsilon,
    tolerance and delta are the overall failure probability, output
    error bound and confidence budget for the calibrated result.
    length_cap bounds the lists the guarantee covers; None means fit it
    from data, spending half of epsilon on that step.
    """

    name: str
    input_types: tuple[DslType, ...]
    output_type: DslType
    io_examples: tuple[tuple[tuple[Any, ...], Any], ...]
    epsilon: float
    tolerance: float
    delta: float
    length_cap: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_types", tuple(self.input_types))
        object.__setattr__(
            self,
            "io_examples",
            tuple(
                (tuple(_freeze(v) for v in ins), _freeze(out))
                for ins, out in self.io_examples
            ),
        )
        if not self.name:
            raise ValueError("a task needs a name")
        if not self.input_types:
            raise ValueError("a task needs at least one input")
        for t in (*self.input_types, self.output_type):
            if not _first_order(t):
                raise ValueError(f"task types must be first order, got {type_to_str(t)}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if not (self.tolerance >= 0.0 and math.isfinite(self.tolerance)):
            raise ValueError("tolerance must be finite and >= 0")
        if self.length_cap is not None and self.length_cap < 1:
            raise ValueError("length_cap must be >= 1 when given")
        if not self.io_examples:
            raise ValueError("a task needs at least one io example")
        for ins, out in self.io_examples:
            if len(ins) != len(self.input_types):
                raise ValueError(
                    f"example has {len(ins)} inputs, task declares {len(self.input_types)}"
                )
            for v, t in zip(ins, self.input_types):
                if not _value_fits(v, t):
                    raise ValueError(f"example input does not fit {type_to_str(t)}")
            if not _value_fits(out, self.output_type):
                raise ValueError(
                    f"example output does not fit {type_to_str(self.output_type)}"
                )

    @property
    def function_type(self) -> DslType:
        ty: DslType = self.output_type
        for t in reversed(self.input_types):
            ty = Arrow(t, ty)
        return ty


def task_to_json(task: TaskSpec) -> dict:
    return {
        "schema": SCHEMA_TASK,
        "name": task.name,
        "function_type": type_to_str(task.function_type),
        "epsilon": task.epsilon,
        "tolerance": task.tolerance,
        "delta": task.delta,
        "length_cap": "auto" if task.length_cap is None else task.length_cap,
        "examples": [
            {
                "inputs": [value_to_json(v) for v in ins],
                "output": value_to_json(out),
            }
            for ins, out in task.io_examples
        ],
    }


def task_from_json(obj: dict) -> TaskSpec:
    if obj.get("schema") != SCHEMA_TASK:
        raise ValueError(f"expected schema {SCHEMA_TASK!r}, got {obj.get('schema')!r}")
    ty = type_from_str(obj["function_type"])
    inputs = []
    while isinstance(ty, Arrow):
        inputs.append(ty.arg)
        ty = ty.res
    cap = obj.get("length_cap", "auto")
    return TaskSpec(
        name=obj["name"],
        input_types=tuple(inputs),
        output_type=ty,
        io_examples=tuple(
            (
                tuple(value_from_json(v) for v in ex["inputs"]),
                value_from_json(ex["output"]),
            )
            for ex in obj["examples"]
        ),
        epsilon=float(obj["epsilon"]),
        tolerance=float(obj["tolerance"]),
        delta=float(obj["delta"]),
        length_cap=None if cap == "auto" else int(cap),
    )


# ---------------------------------------------------------------------------
# Exact-semantics evaluation on values, for the enumerator


class _Dead(Exception):
    """The candidate asked an example image for a truth it does not carry;
    it cannot reproduce the examples, so the enumerator drops it."""


def _need_int(img: ImageVal) -> int:
    t = img.record.truth_int
    if t is None:
        raise _Dead
    return t


def _need_float(img: ImageVal) -> float:
    t = img.record.truth_float
    if t is None:
        raise _Dead
    return t


_EXACT_FNS: dict[str, Callable[..., Any]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "max": lambda a, b: a if a >= b else b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "=": lambda a, b: a == b,
    "cond-≤": lambda a, b: a <= b,
    "cond-≥": lambda a, b: a >= b,
    "predict_int": _need_int,
    "predict_float": _need_float,
    "cond-flip": lambda img: ImageVal(img.record, True),
}


def _value_key(v: Any) -> tuple:
    """Hashable key identifying a value up to exact-semantics equality.

    Images compare by content rather than id: exact semantics only ever
    reads truths and orientation, so records that agree there are
    interchangeable."""
    if isinstance(v, ImageVal):
        r = v.record
        return ("img", r.truth_int, r.truth_float, r.truth_flipped, v.upright)
    if isinstance(v, tuple):
        return ("lst",) + tuple(_value_key(x) for x in v)
    if isinstance(v, bool):
        return ("b", v)
    if isinstance(v, int):
        return ("i", v)
    if isinstance(v, float):
        return ("f", v)
    raise TypeError(f"unexpected value {v!r}")


def _uncurry(arrow: Arrow) -> tuple[tuple[DslType, ...], DslType]:
    args: list[DslType] = []
    ty: DslType = arrow
    while isinstance(ty, Arrow):
        args.append(ty.arg)
        ty = ty.res
    return tuple(args), ty


# Unary components that lift pointwise over an image list, keyed by the
# element type they produce.
_MAP_SOURCES: dict[DslType, str] = {
    INT: "predict_int",
    FLOAT: "predict_float",
    IMAGE: "cond-flip",
}

# Comparison heads usable as filter guards, keyed by element type.  The
# guard is applied to a scalar first, so cond-≤ keeps elements at least
# as large as the operand.
_FILTER_GUARDS: dict[DslType, tuple[str, ...]] = {
    FLOAT: ("cond-≤", "cond-≥"),
    INT: ("<=", ">=", "="),
}

_FOLD_OPS = ("+", "-", "max")


class _Enumerator:
    """Typed bottom-up enumeration with observational pruning.

    Programs are grouped by (type, depth); each entry carries the
    program together with its exact-semantics value on every example
    input so composite values are built without re-walking subtrees.
    Two programs of the same type whose values agree on all examples
    are interchangeable for matching purposes, so only the first
    (shallowest, earliest in production order) is kept.  Productions
    demand argument depths in ascending order, which keeps that pruning
    faithful to depth minimality.
    """

    def __init__(self, sig: tuple[DslType, ...], inputs: tuple[tuple[Any, ...], ...]):
        self.sig = sig
        self.inputs = inputs
        self.n = len(inputs)
        self._exact: dict[tuple[DslType, int], list] = {}
        self._seen: dict[DslType, set] = {}

    def exact(self, ty: DslType, depth: int) -> list:
        key = (ty, depth)
        got = self._exact.get(key)
        if got is None:
            got = self._build(ty, depth)
            self._exact[key] = got
        return got

    def _combos(self, tys: Sequence[DslType], budget: int) -> Iterator[tuple]:
        """All argument tuples whose maximum depth is exactly budget."""
        for depths in itertools.product(range(1, budget + 1), repeat=len(tys)):
            if max(depths) != budget:
                continue
            pools = [self.exact(t, d) for t, d in zip(tys, depths)]
            yield from itertools.product(*pools)

    def _build(self, ty: DslType, depth: int) -> list:
        out: list = []
        seen = self._seen.setdefault(ty, set())

        def emit(prog: Program, vals: tuple) -> None:
            key = tuple(_value_key(v) for v in vals)
            if key in seen:
                return
            seen.add(key)
            out.append((prog, vals, key))

        if depth == 1:
            for idx, t in enumerate(self.sig):
                if t == ty:
                    emit(Input(idx), tuple(ins[idx] for ins in self.inputs))
            if ty == INT:
                emit(IntLit(0), (0,) * self.n)
            elif ty == FLOAT:
                emit(ToFloat(IntLit(0)), (0.0,) * self.n)
            return out

        budget = depth - 1

        for name, arrows in COMPONENT_TYPES.items():
            for arrow in arrows:
                arg_tys, res = _uncurry(arrow)
                if res != ty:
                    continue
                fn = _EXACT_FNS[name]
                for entries in self._combos(arg_tys, budget):
                    prog: Program = comp(name, arrow)
                    for e in entries:
                        prog = App(prog, e[0])
                    try:
                        vals = tuple(
                            fn(*(e[1][i] for e in entries)) for i in range(self.n)
                        )
                    except _Dead:
                        continue
                    emit(prog, vals)

        if isinstance(ty, ListT):
            el = ty.elem
            src = _MAP_SOURCES.get(el)
            if src is not None:
                fn = _EXACT_FNS[src]
                for (e,) in self._combos((ListT(IMAGE),), budget):
                    try:
                        vals = tuple(tuple(fn(x) for x in lv) for lv in e[1])
                    except _Dead:
                        continue
                    emit(Map(comp(src), e[0]), vals)
            for gname in _FILTER_GUARDS.get(el, ()):
                gfn = _EXACT_FNS[gname]
                # The guard is a partial application, so its depth sits one
                # above its operand's.
                for dw in range(1, budget):
                    for dl in range(1, budget + 1):
                        if max(1 + dw, dl) != budget:
                            continue
                        operands = self.exact(el, dw)
                        if el == FLOAT:
                            # Integer operands are welcome too; elaboration
                            # widens them in place.
                            operands = operands + self.exact(INT, dw)
                        for w in operands:
                            for l in self.exact(ty, dl):
                                vals = tuple(
                                    tuple(x for x in lv if gfn(wv, x))
                                    for wv, lv in zip(w[1], l[1])
                                )
                                emit(Filter(App(comp(gname), w[0]), l[0]), vals)
            for l, lo, hi in self._combos((ty, INT, INT), budget):
                vals = []
                for lv, i, j in zip(l[1], lo[1], hi[1]):
                    n = len(lv)
                    vals.append(lv[min(max(i, 0), n) : min(max(j, 0), n)])
                emit(Slice(l[0], lo[0], hi[0]), tuple(vals))

        if ty in (INT, FLOAT):
            lt = ListT(ty)
            for opname in _FOLD_OPS:
                fn = _EXACT_FNS[opname]
                for l, base in self._combos((lt, ty), budget):
                    vals = []
                    for lv, acc in zip(l[1], base[1]):
                        for x in lv:
                            acc = fn(x, acc)
                        vals.append(acc)
                    emit(Fold(comp(opname), l[0], base[0]), tuple(vals))

        if ty == INT:
            for el in (INT, FLOAT, IMAGE):
                for (e,) in self._combos((ListT(el),), budget):
                    emit(Length(e[0]), tuple(len(lv) for lv in e[1]))

        return out


def synthesize_partial_sketch(task: TaskSpec, depth_limit: int = 6) -> Program:
    """Smallest-depth typed program reproducing every io example exactly.

    Ties at a depth go to production order, which is fixed, so the result
    is deterministic.  Raises SynthesisError when no program within the
    depth limit matches.
    """
    if depth_limit < 1:
        raise ValueError("depth_limit must be >= 1")
    sig = task.input_types
    inputs = tuple(ins for ins, _ in task.io_examples)
    want = tuple(_value_key(out) for _, out in task.io_examples)
    en = _Enumerator(sig, inputs)
    for depth in range(1, depth_limit + 1):
        for prog, _vals, key in en.exact(task.output_type, depth):
            if key != want:
                continue
            q, out_ty = elaborate(prog, sig)
            if out_ty != task.output_type:
                raise AssertionError(
                    f"enumerated at {type_to_str(task.output_type)} but "
                    f"elaborated to {type_to_str(out_ty)}"
                )
            # The enumerator evaluates composites from cached pieces; make
            # sure the real evaluator tells the same story before handing
            # the program onward.
            for ins, out in task.io_examples:
                got = dsl_eval(q, ins, "train", sig=sig)
                if _value_key(got) != _value_key(out):
                    raise AssertionError(
                        "enumeration and evaluation disagree on "
                        + print_program(q)
                    )
            return q
    raise SynthesisError(
        f"no program of depth <= {depth_limit} reproduces the examples"
    )


# ---------------------------------------------------------------------------
# Data splitting and scoring


def split_data(
    data: Sequence[Sequence[Any]], seed: int
) -> tuple[list[tuple], list[tuple]]:
    """Shuffle and halve; the first half drives the search, the second
    calibrates.  An odd row goes to the search half."""
    rows = [tuple(r) for r in data]
    if len(rows) < 2:
        raise ValueError("need at least 2 valuations to split")
    random.Random(seed).shuffle(rows)
    half = len(rows) // 2
    return rows[: len(rows) - half], rows[len(rows) - half :]


def score_program(
    p: Program,
    sig: tuple[DslType, ...],
    fill: HoleAssignment,
    data: Sequence[Sequence[Any]],
) -> float:
    """Fraction of valuations the calibrated program commits on."""
    if not data:
        raise ValueError("cannot score on no data")
    run = make_evaluator(p, sig, "test", fill)
    committed = sum(1 for ins in data if not is_bot(run(ins)))
    return committed / len(data)


def _min_scores(profile: ProfileResult) -> dict[str, np.ndarray]:
    """Per valuation, the weakest confidence each occurrence saw; +inf
    where the occurrence never ran."""
    n = len(profile.commit_outputs)
    out = {}
    for label, _name in profile.labels:
        col = np.empty(n)
        rows = profile.scores[label]
        for i, ss in enumerate(rows):
            col[i] = min(ss) if ss else math.inf
        out[label] = col
    return out


def _commit_rate(
    mins: dict[str, np.ndarray], thresholds: dict[str, float], n: int
) -> float:
    """Commit fraction the thresholds would produce, read off the profile.

    A valuation commits exactly when every occurrence's weakest score
    clears its threshold: a sub-threshold application yields the bottom
    output whether or not an earlier abstention got there first.
    """
    ok = np.ones(n, dtype=bool)
    for label, c in thresholds.items():
        ok &= mins[label] >= c
    return float(ok.mean()) if n else 0.0


# ---------------------------------------------------------------------------
# Budget search


@dataclass(frozen=True)
class AllocationChoice:
    """Winning budget split plus its estimated commit rate."""

    eps: dict[str, float]
    errs: dict[str, float]
    score: float
    searched: int


def select_allocation(
    p: Program,
    sig: tuple[DslType, ...],
    data: Sequence[Sequence[Any]],
    N: int,
    *,
    epsilon: float,
    tolerance: float,
    delta: float,
    levels: Optional[tuple[int, ...]] = None,
    k_zero: bool = False,
    profile: Optional[ProfileResult] = None,
) -> AllocationChoice:
    """Try every budget split on the grid and keep the one that commits
    most often on `data`.

    Each candidate is calibrated and scored on the same rows; that is
    fine because the winner is re-calibrated afterwards on data this
    search never touched.  Ties keep the earliest candidate, eps-major.
    """
    if profile is None:
        profile = profile_dataset(p, sig, data)
    lv = tuple(levels) if levels is not None else GRID_LEVELS
    eps_cands = candidate_eps(p, epsilon, N, levels=lv)
    err_cands = candidate_errs(p, tolerance, N, levels=lv)
    mins = _min_scores(profile)
    n = len(profile.commit_outputs)
    best: Optional[tuple[dict, dict, float]] = None
    searched = 0
    for ev in eps_cands:
        for er in err_cands:
            rep = sketch_via_ir(
                p, sig, data, N, ev, er, delta, k_zero=k_zero, profile=profile
            )
            s = _commit_rate(mins, rep.fill.thresholds, n)
            searched += 1
            if best is None or s > best[2]:
                best = (ev, er, s)
    assert best is not None
    ev, er, s = best
    return AllocationChoice(eps=dict(ev), errs=dict(er), score=s, searched=searched)


def _touches_lists(p: Program, sig: tuple[DslType, ...]) -> bool:
    """Whether any list value can flow through the program.

    Every list in an evaluation originates from a list-typed input or a
    list operation, so a walk over the syntax suffices."""
    if isinstance(p, (Fold, Map, Filter, Slice, Length)):
        return True
    if isinstance(p, Input):
        return isinstance(sig[p.index], ListT)
    if isinstance(p, App):
        return _touches_lists(p.fn, sig) or _touches_lists(p.arg, sig)
    if isinstance(p, ToFloat):
        return _touches_lists(p.arg, sig)
    return False


# ---------------------------------------------------------------------------
# The whole pipeline


@dataclass(frozen=True)
class SynthesisResult:
    """A synthesized program with calibrated holes.

    commit_score is the search-half estimate that picked the
    allocation; report holds the final calibration on the held-out
    half, and fill is its threshold assignment.
    """

    program: Program
    fill: HoleAssignment
    eps: dict[str, float]
    errs: dict[str, float]
    commit_score: float
    length_cap: int
    report: DslSketchReport
    searched: int

    @property
    def text(self) -> str:
        return print_program(self.program)


def synthesize(
    task: TaskSpec,
    data: Sequence[Sequence[Any]],
    *,
    depth_limit: int = 6,
    seed: int = 0,
    levels: Optional[tuple[int, ...]] = None,
    no_search: bool = False,
    k_zero: bool = False,
    partial: Optional[Program] = None,
) -> SynthesisResult:
    """Run the full pipeline on labeled data.

    Pass `partial` to skip enumeration and budget an already-known
    program; it still must reproduce the task's io examples.  no_search
    collapses the budget grid to the uniform split.  k_zero refuses to
    discard any calibration sample, which only ever raises thresholds.
    """
    sig = task.input_types
    a_synth, a_sketch = split_data(data, seed)

    if partial is None:
        program = synthesize_partial_sketch(task, depth_limit)
    else:
        program, out_ty = elaborate(partial, sig)
        if out_ty != task.output_type:
            raise SynthesisError(
                f"provided sketch has type {type_to_str(out_ty)}, "
                f"task wants {type_to_str(task.output_type)}"
            )
        for ins, out in task.io_examples:
            got = dsl_eval(program, ins, "train", sig=sig)
            if _value_key(got) != _value_key(out):
                raise SynthesisError(
                    "provided sketch does not reproduce the io examples"
                )

    eps_budget = task.epsilon
    if task.length_cap is not None:
        cap = task.length_cap
    elif not _touches_lists(program, sig):
        # No list ever flows through, so every cap is vacuously valid and
        # the failure budget stays whole.  Downstream accounting wants a
        # positive number.
        cap = 1
    else:
        fitted = length_bound(a_synth, program, sig, task.epsilon / 2.0, task.delta)
        if not math.isfinite(fitted):
            raise SynthesisError(
                "not enough data to cap list lengths; pass length_cap or add data"
            )
        cap = max(int(fitted), 1)
        eps_budget = task.epsilon / 2.0

    if no_search:
        levels = (1,)
    choice = select_allocation(
        program,
        sig,
        a_synth,
        cap,
        epsilon=eps_budget,
        tolerance=task.tolerance,
        delta=task.delta,
        levels=levels,
        k_zero=k_zero,
    )
    report = sketch_via_ir(
        program, sig, a_sketch, cap, choice.eps, choice.errs, task.delta,
        k_zero=k_zero,
    )
    return SynthesisResult(
        program=program,
        fill=report.fill,
        eps=choice.eps,
        errs=choice.errs,
        commit_score=choice.score,
        length_cap=cap,
        report=report,
        searched=choice.searched,
    )
