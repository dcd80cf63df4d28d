"""Static budget allocation for list programs.

Two abstract interpretations over the program tree feed the synthesizer's
search space.  Occurrence counting gives the multiplicity of each learned
component in the length-N unrolling, which prices its share of the failure
budget.  Symbolic error propagation gives a linear form bounding how far a
committed output can drift from the exact one, which prices the tolerance
budget.  Candidate splits of either budget come from a small simplex grid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .listdsl.lang import (
    ANNOTATED,
    App,
    Comp,
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
    occurrence_labels,
)

__all__ = [
    "GRID_LEVELS",
    "MAX_GRID_DIM",
    "LinearForm",
    "CandidateGrid",
    "occurrence_counts",
    "count_occurrences",
    "error_bound",
    "candidate_eps",
    "candidate_errs",
    "analysis_to_json",
]

GRID_LEVELS = (1, 3, 5)

# 3^d grid points; beyond six components the grid is no longer a search
# space, it is a wall of candidates.
MAX_GRID_DIM = 6


# ---------------------------------------------------------------------------
# Linear error forms


@dataclass(frozen=True)
class LinearForm:
    """Nonnegative linear combination of per-occurrence tolerance symbols.

    Stored as a label-sorted tuple of (label, coefficient) pairs with zero
    entries dropped, so equal forms compare equal.
    """

    coeffs: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        for label, a in self.coeffs:
            if a < 0 or not math.isfinite(a):
                raise ValueError(f"coefficient for {label} must be finite and >= 0")

    @staticmethod
    def zero() -> "LinearForm":
        return LinearForm()

    @staticmethod
    def atom(label: str) -> "LinearForm":
        return LinearForm(((label, 1.0),))

    @staticmethod
    def from_dict(d: dict[str, float]) -> "LinearForm":
        return LinearForm(
            tuple(sorted((k, float(v)) for k, v in d.items() if v != 0.0))
        )

    def as_dict(self) -> dict[str, float]:
        return dict(self.coeffs)

    def add(self, other: "LinearForm") -> "LinearForm":
        merged = self.as_dict()
        for label, a in other.coeffs:
            merged[label] = merged.get(label, 0.0) + a
        return LinearForm.from_dict(merged)

    def maximum(self, other: "LinearForm") -> "LinearForm":
        merged = self.as_dict()
        for label, a in other.coeffs:
            merged[label] = max(merged.get(label, 0.0), a)
        return LinearForm.from_dict(merged)

    def evaluate(self, errs: dict[str, float]) -> float:
        total = 0.0
        for label, a in self.coeffs:
            if label not in errs:
                raise ValueError(f"no tolerance assigned for {label}")
            total += a * errs[label]
        return total

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.coeffs)


# ---------------------------------------------------------------------------
# Occurrence counting


def occurrence_counts(p: Program, N: int) -> dict[str, int]:
    """Multiplicity of every learned-component occurrence after unrolling
    list operations to length N.

    Occurrences are keyed by the same preorder f1, f2, ... labels the rest
    of the pipeline uses.  Structural recursion: applications add, the
    function position of fold/map/filter is taken N times, everything else
    passes through.
    """
    if N < 1:
        raise ValueError("length bound N must be at least 1")
    counter = itertools.count(1)

    def walk(node: Program) -> dict[str, int]:
        if isinstance(node, Comp):
            if node.name in ANNOTATED:
                return {f"f{next(counter)}": 1}
            return {}
        if isinstance(node, (Input, IntLit, FloatLit)):
            return {}
        if isinstance(node, ToFloat):
            return walk(node.arg)
        if isinstance(node, App):
            return _merge_counts(walk(node.fn), walk(node.arg))
        if isinstance(node, Fold):
            return _merge_counts(
                _times(walk(node.fn), N), walk(node.lst), walk(node.base)
            )
        if isinstance(node, (Map, Filter)):
            return _merge_counts(_times(walk(node.fn), N), walk(node.lst))
        if isinstance(node, Slice):
            return _merge_counts(walk(node.lst), walk(node.lo), walk(node.hi))
        if isinstance(node, Length):
            return walk(node.lst)
        raise ValueError(f"cannot count occurrences in {type(node).__name__}")

    return walk(p)


def count_occurrences(p: Program, label: str, N: int) -> int:
    """Count one occurrence by its label; 0 if the label does not exist."""
    return occurrence_counts(p, N).get(label, 0)


def _merge_counts(*dicts: dict[str, int]) -> dict[str, int]:
    out: dict[str, int] = {}
    for d in dicts:
        for k, v in d.items():
            out[k] = out.get(k, 0) + v
    return out


def _times(d: dict[str, int], n: int) -> dict[str, int]:
    return {k: n * v for k, v in d.items()}


# ---------------------------------------------------------------------------
# Symbolic error propagation


def error_bound(p: Program, N: int) -> LinearForm:
    """Linear form bounding |committed output - exact output| elementwise,
    valid whenever every committed component met its annotation.

    Components abstract to functions over forms: predict_float introduces
    its own symbol, + and - add forms, max takes the coefficientwise max,
    boolean-valued components contribute nothing (their annotations demand
    an exactly correct answer).  fold literally evaluates all N+1 iterates
    of its function abstraction and keeps the coefficientwise maximum,
    even though with nonnegative coefficients the last iterate wins.
    """
    if N < 1:
        raise ValueError("length bound N must be at least 1")
    counter = itertools.count(1)

    def comp_abstraction(name: str, label: str | None):
        if name == "predict_float":
            return lambda _arg: LinearForm.atom(label)
        if name in ("+", "-"):
            return lambda a: lambda b: _as_form(a, name).add(_as_form(b, name))
        if name == "max":
            return lambda a: lambda b: _as_form(a, name).maximum(_as_form(b, name))
        if name in ("<=", ">=", "=", "cond-≤", "cond-≥"):
            return lambda _a: lambda _b: LinearForm.zero()
        # predict_int and cond-flip: exact when committed, so the identity.
        return lambda a: a

    def walk(node: Program):
        if isinstance(node, Comp):
            label = None
            if node.name in ANNOTATED:
                label = f"f{next(counter)}"
            return comp_abstraction(node.name, label)
        if isinstance(node, (Input, IntLit, FloatLit)):
            return LinearForm.zero()
        if isinstance(node, ToFloat):
            return walk(node.arg)
        if isinstance(node, App):
            fv = walk(node.fn)
            av = walk(node.arg)
            if not callable(fv):
                raise ValueError("error analysis applied a non-function")
            return fv(av)
        if isinstance(node, Fold):
            fv = walk(node.fn)
            lv = _as_form(walk(node.lst), "fold list")
            bv = _as_form(walk(node.base), "fold base")
            if not callable(fv):
                raise ValueError("fold function is not a function abstraction")
            best = bv
            acc = bv
            for _ in range(N):
                step = fv(lv)
                if not callable(step):
                    raise ValueError("fold function must take two arguments")
                acc = _as_form(step(acc), "fold iterate")
                best = best.maximum(acc)
            return best
        if isinstance(node, Map):
            fv = walk(node.fn)
            lv = walk(node.lst)
            if not callable(fv):
                raise ValueError("map function is not a function abstraction")
            return _as_form(fv(lv), "map")
        if isinstance(node, Filter):
            # The guard must still be walked so labels stay aligned, but a
            # correct guard only drops elements, it never perturbs them.
            walk(node.fn)
            return _as_form(walk(node.lst), "filter")
        if isinstance(node, Slice):
            lv = _as_form(walk(node.lst), "slice")
            walk(node.lo)
            walk(node.hi)
            return lv
        if isinstance(node, Length):
            walk(node.lst)
            return LinearForm.zero()
        raise ValueError(f"cannot bound error of {type(node).__name__}")

    out = walk(p)
    if not isinstance(out, LinearForm):
        raise ValueError("program is function-typed; error bound needs a ground result")
    return out


def _as_form(v, where: str) -> LinearForm:
    if not isinstance(v, LinearForm):
        raise ValueError(f"expected a ground value in {where}")
    return v


# ---------------------------------------------------------------------------
# Candidate budget splits


@dataclass(frozen=True)
class CandidateGrid:
    """Finite set of simplex points used to split a budget across holes."""

    points: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        for x in self.points:
            if any(v < 0.0 for v in x):
                raise ValueError("grid point with a negative entry")
            if x and not math.isclose(sum(x), 1.0, rel_tol=1e-9):
                raise ValueError("grid points must sum to 1")

    @property
    def dim(self) -> int:
        return len(self.points[0]) if self.points else 0

    @staticmethod
    def standard(d: int, levels: tuple[int, ...] = GRID_LEVELS) -> "CandidateGrid":
        """The default grid: levels^d rays normalized onto the simplex,
        with coincident rays deduplicated.  d = 0 gives the single empty
        split; levels (1,) gives only the uniform split."""
        if d < 0:
            raise ValueError("grid dimension must be >= 0")
        if not levels or any(v <= 0 for v in levels):
            raise ValueError("grid levels must be positive")
        if d == 0:
            return CandidateGrid(((),))
        if d > MAX_GRID_DIM:
            raise ValueError(
                f"budget grid over {d} occurrences would need "
                f"{len(levels) ** d} points; at most {MAX_GRID_DIM} "
                "occurrences are supported"
            )
        points = []
        seen = set()
        for raw in itertools.product(levels, repeat=d):
            total = sum(raw)
            x = tuple(v / total for v in raw)
            if x not in seen:
                seen.add(x)
                points.append(x)
        return CandidateGrid(tuple(points))


def candidate_eps(
    p: Program,
    eps_total: float,
    N: int,
    grid: CandidateGrid | None = None,
    levels: tuple[int, ...] = GRID_LEVELS,
) -> list[dict[str, float]]:
    """Candidate per-occurrence failure budgets.

    Each grid point x gives eps_f = x_f * eps / count_f, so the counted sum
    over the unrolling equals eps exactly; that identity is asserted on
    every candidate.  Occurrences that never execute (count 0) take the
    vacuous budget 1.
    """
    if not 0.0 < eps_total < 1.0:
        raise ValueError("total failure budget must be in (0, 1)")
    counts = occurrence_counts(p, N)
    labels = [label for label, _ in occurrence_labels(p)]
    active = [label for label in labels if counts.get(label, 0) > 0]
    idle = [label for label in labels if counts.get(label, 0) == 0]
    if grid is None:
        grid = CandidateGrid.standard(len(active), levels)
    if grid.dim != len(active):
        raise ValueError(
            f"grid dimension {grid.dim} does not match {len(active)} occurrences"
        )
    candidates = []
    for x in grid.points:
        eps = {label: 1.0 for label in idle}
        spent = 0.0
        for x_f, label in zip(x, active):
            eps[label] = x_f * eps_total / counts[label]
            spent += counts[label] * eps[label]
        if active and not math.isclose(spent, eps_total, rel_tol=1e-9):
            raise AssertionError("budget split failed to spend the whole budget")
        candidates.append(eps)
    return candidates


def candidate_errs(
    p: Program,
    e_total: float,
    N: int,
    grid: CandidateGrid | None = None,
    levels: tuple[int, ...] = GRID_LEVELS,
) -> list[dict[str, float]]:
    """Candidate per-occurrence tolerances for real-valued predictors.

    Each grid point x gives e_f = x_f * e / a_f where a_f is the
    occurrence's coefficient in the program's error form, so the bound
    evaluates to exactly e.  Predictors whose coefficient is zero cannot
    move the output and take an unbounded tolerance.
    """
    if e_total < 0.0:
        raise ValueError("total tolerance must be >= 0")
    form = error_bound(p, N).as_dict()
    labels = [
        label for label, name in occurrence_labels(p) if name == "predict_float"
    ]
    active = [label for label in labels if form.get(label, 0.0) > 0.0]
    inert = [label for label in labels if form.get(label, 0.0) <= 0.0]
    if grid is None:
        grid = CandidateGrid.standard(len(active), levels)
    if grid.dim != len(active):
        raise ValueError(
            f"grid dimension {grid.dim} does not match {len(active)} occurrences"
        )
    candidates = []
    for x in grid.points:
        errs = {label: math.inf for label in inert}
        bound = 0.0
        for x_f, label in zip(x, active):
            errs[label] = x_f * e_total / form[label]
            bound += form[label] * errs[label]
        if bound > e_total * (1.0 + 1e-9):
            raise AssertionError("tolerance split exceeded the overall bound")
        candidates.append(errs)
    return candidates


# ---------------------------------------------------------------------------
# JSON export


def _label_key(label: str) -> int:
    return int(label[1:])


def analysis_to_json(
    p: Program,
    N: int,
    eps_total: float | None = None,
    e_total: float | None = None,
) -> dict:
    """Both analyses plus candidate lists, as plain JSON-ready data."""
    counts = occurrence_counts(p, N)
    form = error_bound(p, N).as_dict()
    doc = {
        "length_bound": N,
        "occurrences": [
            {"label": label, "component": name, "count": counts.get(label, 0)}
            for label, name in occurrence_labels(p)
        ],
        "error_coefficients": {
            label: form[label] for label in sorted(form, key=_label_key)
        },
    }
    if eps_total is not None:
        doc["epsilon_total"] = eps_total
        doc["epsilon_candidates"] = [
            {k: c[k] for k in sorted(c, key=_label_key)}
            for c in candidate_eps(p, eps_total, N)
        ]
    if e_total is not None:
        doc["tolerance_total"] = e_total
        doc["tolerance_candidates"] = [
            {k: "inf" if math.isinf(c[k]) else c[k] for k in sorted(c, key=_label_key)}
            for c in candidate_errs(p, e_total, N)
        ]
    return doc
