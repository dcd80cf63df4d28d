"""Abstract syntax and types for the list-manipulating language.

Programs are built from a fixed component set (arithmetic, comparisons,
learned predictors, guarded conditionals) plus fold/map/filter/slice/length
structure.  Every node is a frozen dataclass, so programs hash and compare
by value and can key caches.

Learned components are the interesting ones: each syntactic occurrence of
one gets a label (f1, f2, ... in preorder) and later receives its own
confidence threshold and error budget.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

__all__ = [
    "DslType",
    "Ground",
    "ListT",
    "Arrow",
    "BOOL",
    "INT",
    "FLOAT",
    "IMAGE",
    "type_to_str",
    "type_from_str",
    "Program",
    "Input",
    "IntLit",
    "FloatLit",
    "Comp",
    "App",
    "Fold",
    "Map",
    "Filter",
    "Slice",
    "Length",
    "ToFloat",
    "COMPONENT_TYPES",
    "ANNOTATED",
    "ERR_CARRYING",
    "comp",
    "children",
    "infer_type",
    "elaborate",
    "TypeError_",
    "occurrence_labels",
    "annotated_occurrences",
]


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class Ground:
    name: str


@dataclass(frozen=True)
class ListT:
    elem: "DslType"


@dataclass(frozen=True)
class Arrow:
    arg: "DslType"
    res: "DslType"


DslType = Union[Ground, ListT, Arrow]

BOOL = Ground("bool")
INT = Ground("int")
FLOAT = Ground("float")
IMAGE = Ground("image")

_GROUND_BY_NAME = {t.name: t for t in (BOOL, INT, FLOAT, IMAGE)}


def type_to_str(t: DslType) -> str:
    if isinstance(t, Ground):
        return t.name
    if isinstance(t, ListT):
        return f"[{type_to_str(t.elem)}]"
    if isinstance(t, Arrow):
        lhs = type_to_str(t.arg)
        if isinstance(t.arg, Arrow):
            lhs = f"({lhs})"
        return f"{lhs} -> {type_to_str(t.res)}"
    raise TypeError(f"not a type: {t!r}")


def type_from_str(s: str) -> DslType:
    """Parse a type string: ground names, [elem] lists, and -> arrows."""
    tokens = _lex_type(s)
    t, rest = _parse_arrow(tokens)
    if rest:
        raise ValueError(f"trailing tokens in type {s!r}: {rest}")
    return t


def _lex_type(s: str) -> list[str]:
    out: list[str] = []
    i = 0
    while i < len(s):
        ch = s[i]
        if ch.isspace():
            i += 1
        elif ch in "[]()":
            out.append(ch)
            i += 1
        elif s.startswith("->", i):
            out.append("->")
            i += 2
        else:
            j = i
            while j < len(s) and (s[j].isalnum() or s[j] == "_"):
                j += 1
            if j == i:
                raise ValueError(f"bad character in type {s!r}: {ch!r}")
            out.append(s[i:j])
            i = j
    return out


def _parse_arrow(tokens: list[str]) -> tuple[DslType, list[str]]:
    lhs, rest = _parse_atom(tokens)
    if rest and rest[0] == "->":
        rhs, rest = _parse_arrow(rest[1:])
        return Arrow(lhs, rhs), rest
    return lhs, rest


def _parse_atom(tokens: list[str]) -> tuple[DslType, list[str]]:
    if not tokens:
        raise ValueError("unexpected end of type")
    tok = tokens[0]
    if tok == "(":
        t, rest = _parse_arrow(tokens[1:])
        if not rest or rest[0] != ")":
            raise ValueError("unbalanced ( in type")
        return t, rest[1:]
    if tok == "[":
        t, rest = _parse_arrow(tokens[1:])
        if not rest or rest[0] != "]":
            raise ValueError("unbalanced [ in type")
        return ListT(t), rest[1:]
    if tok in _GROUND_BY_NAME:
        return _GROUND_BY_NAME[tok], tokens[1:]
    raise ValueError(f"unknown ground type {tok!r}")


# ---------------------------------------------------------------------------
# Components

def _binop(t: DslType, r: Optional[DslType] = None) -> Arrow:
    return Arrow(t, Arrow(t, r if r is not None else t))


# Each component name maps to its admissible type instantiations, in
# preference order (exact integer match is tried before float widening).
COMPONENT_TYPES: dict[str, tuple[Arrow, ...]] = {
    "+": (_binop(INT), _binop(FLOAT)),
    "-": (_binop(INT), _binop(FLOAT)),
    "max": (_binop(INT), _binop(FLOAT)),
    "<=": (_binop(INT, BOOL),),
    ">=": (_binop(INT, BOOL),),
    "=": (_binop(INT, BOOL),),
    "cond-≤": (_binop(FLOAT, BOOL),),
    "cond-≥": (_binop(FLOAT, BOOL),),
    "predict_int": (Arrow(IMAGE, INT),),
    "predict_float": (Arrow(IMAGE, FLOAT),),
    "cond-flip": (Arrow(IMAGE, IMAGE),),
}

# Components whose behaviour comes from a model and therefore carry a
# confidence threshold hole.
ANNOTATED = frozenset({"cond-≤", "cond-≥", "predict_int", "predict_float", "cond-flip"})

# Of those, the ones whose annotation is a numeric error tolerance rather
# than exact agreement.
ERR_CARRYING = frozenset({"predict_float"})

# ASCII aliases accepted on input; the canonical spelling is printed.
COMP_ALIASES = {"cond-le": "cond-≤", "cond-ge": "cond-≥"}


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Input:
    index: int  # 0-based; printed as input1, input2, ...


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class FloatLit:
    value: float


@dataclass(frozen=True)
class Comp:
    """A component atom at a particular type instantiation."""

    name: str
    ty: Arrow

    def __post_init__(self) -> None:
        if self.name not in COMPONENT_TYPES:
            raise ValueError(f"unknown component {self.name!r}")
        if self.ty not in COMPONENT_TYPES[self.name]:
            raise ValueError(
                f"component {self.name!r} has no instantiation {type_to_str(self.ty)}"
            )


@dataclass(frozen=True)
class App:
    fn: "Program"
    arg: "Program"


@dataclass(frozen=True)
class Fold:
    fn: "Program"
    lst: "Program"
    base: "Program"


@dataclass(frozen=True)
class Map:
    fn: "Program"
    lst: "Program"


@dataclass(frozen=True)
class Filter:
    fn: "Program"
    lst: "Program"


@dataclass(frozen=True)
class Slice:
    lst: "Program"
    lo: "Program"
    hi: "Program"


@dataclass(frozen=True)
class Length:
    lst: "Program"


@dataclass(frozen=True)
class ToFloat:
    """Implicit integer widening.  The printer does not show it."""

    arg: "Program"


Program = Union[
    Input, IntLit, FloatLit, Comp, App, Fold, Map, Filter, Slice, Length, ToFloat
]


def comp(name: str, ty: Optional[Arrow] = None) -> Comp:
    """Component atom by name; the type defaults to the first instantiation."""
    name = COMP_ALIASES.get(name, name)
    if name not in COMPONENT_TYPES:
        raise ValueError(f"unknown component {name!r}")
    return Comp(name, ty if ty is not None else COMPONENT_TYPES[name][0])


def children(p: Program) -> tuple[Program, ...]:
    if isinstance(p, App):
        return (p.fn, p.arg)
    if isinstance(p, Fold):
        return (p.fn, p.lst, p.base)
    if isinstance(p, (Map, Filter)):
        return (p.fn, p.lst)
    if isinstance(p, Slice):
        return (p.lst, p.lo, p.hi)
    if isinstance(p, Length):
        return (p.lst,)
    if isinstance(p, ToFloat):
        return (p.arg,)
    return ()


def _preorder(p: Program) -> Iterator[Program]:
    stack = [p]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


class TypeError_(Exception):
    """A program failed to type-check."""


# ---------------------------------------------------------------------------
# Type inference and elaboration

def _coerce(p: Program, have: DslType, want: DslType) -> tuple[Program, DslType]:
    if have == want:
        return p, have
    if have == INT and want == FLOAT:
        return ToFloat(p), FLOAT
    raise TypeError_(f"expected {type_to_str(want)}, got {type_to_str(have)}")


def elaborate(p: Program, sig: tuple[DslType, ...]) -> tuple[Program, DslType]:
    """Type-check p against the input signature, inserting ToFloat where an
    integer flows into a float position.  Returns the rebuilt program and
    its type.

    Overloaded arithmetic resolves against its first argument, preferring
    the integer instantiation; inside fold/map/filter the list's element
    type decides.  Nothing coerces inside lists or toward int.
    """
    if isinstance(p, Input):
        if not 0 <= p.index < len(sig):
            raise TypeError_(f"input{p.index + 1} is outside the signature")
        return p, sig[p.index]
    if isinstance(p, IntLit):
        return p, INT
    if isinstance(p, FloatLit):
        return p, FLOAT
    if isinstance(p, Comp):
        return p, p.ty
    if isinstance(p, ToFloat):
        arg, t = elaborate(p.arg, sig)
        if t != INT:
            raise TypeError_("widening applies to int only")
        return ToFloat(arg), FLOAT
    if isinstance(p, App):
        fn, ft = elaborate(p.fn, sig)
        arg, at = elaborate(p.arg, sig)
        if isinstance(fn, Comp) and len(COMPONENT_TYPES[fn.name]) > 1:
            fn = Comp(fn.name, _resolve_overload(fn.name, at))
            ft = fn.ty
        if not isinstance(ft, Arrow):
            raise TypeError_("application of a non-function")
        arg, _ = _coerce(arg, at, ft.arg)
        return App(fn, arg), ft.res
    if isinstance(p, Fold):
        lst, lt = elaborate(p.lst, sig)
        if not isinstance(lt, ListT):
            raise TypeError_("fold needs a list")
        fn, ft = elaborate(p.fn, sig)
        if isinstance(fn, Comp) and len(COMPONENT_TYPES[fn.name]) > 1:
            fn = Comp(fn.name, _resolve_overload(fn.name, lt.elem))
            ft = fn.ty
        if not (
            isinstance(ft, Arrow)
            and isinstance(ft.res, Arrow)
            and ft.res.arg == ft.res.res
        ):
            raise TypeError_("fold function must have type a -> b -> b")
        if ft.arg != lt.elem:
            raise TypeError_(
                f"fold function takes {type_to_str(ft.arg)}, list holds "
                f"{type_to_str(lt.elem)}"
            )
        base, bt = elaborate(p.base, sig)
        base, _ = _coerce(base, bt, ft.res.arg)
        return Fold(fn, lst, base), ft.res.res
    if isinstance(p, (Map, Filter)):
        lst, lt = elaborate(p.lst, sig)
        if not isinstance(lt, ListT):
            raise TypeError_(f"{type(p).__name__.lower()} needs a list")
        fn, ft = elaborate(p.fn, sig)
        if isinstance(fn, Comp) and len(COMPONENT_TYPES[fn.name]) > 1:
            fn = Comp(fn.name, _resolve_overload(fn.name, lt.elem))
            ft = fn.ty
        if not isinstance(ft, Arrow) or ft.arg != lt.elem:
            raise TypeError_("function does not accept the list's elements")
        if isinstance(p, Filter):
            if ft.res != BOOL:
                raise TypeError_("filter predicate must return bool")
            return Filter(fn, lst), lt
        return Map(fn, lst), ListT(ft.res)
    if isinstance(p, Slice):
        lst, lt = elaborate(p.lst, sig)
        if not isinstance(lt, ListT):
            raise TypeError_("slice needs a list")
        lo, lot = elaborate(p.lo, sig)
        hi, hit = elaborate(p.hi, sig)
        if lot != INT or hit != INT:
            raise TypeError_("slice bounds must be int")
        return Slice(lst, lo, hi), lt
    if isinstance(p, Length):
        lst, lt = elaborate(p.lst, sig)
        if not isinstance(lt, ListT):
            raise TypeError_("length needs a list")
        return Length(lst), INT
    raise TypeError_(f"not a program node: {p!r}")


def _resolve_overload(name: str, first_arg: DslType) -> Arrow:
    for ty in COMPONENT_TYPES[name]:
        if ty.arg == first_arg:
            return ty
    # int widens into the float instantiation when no exact match exists
    for ty in COMPONENT_TYPES[name]:
        if ty.arg == FLOAT and first_arg == INT:
            return ty
    raise TypeError_(
        f"component {name!r} has no instantiation starting at "
        f"{type_to_str(first_arg)}"
    )


def infer_type(p: Program, sig: tuple[DslType, ...]) -> DslType:
    """Type of an already-elaborated program (no coercions inserted)."""
    q, t = elaborate(p, sig)
    if q != p:
        raise TypeError_("program needs widening; run elaborate first")
    return t


# ---------------------------------------------------------------------------
# Occurrence labelling

def annotated_occurrences(p: Program) -> tuple[Comp, ...]:
    """Annotated component atoms in preorder, one entry per occurrence."""
    return tuple(n for n in _preorder(p) if isinstance(n, Comp) and n.name in ANNOTATED)


def occurrence_labels(p: Program) -> tuple[tuple[str, str], ...]:
    """(label, component name) pairs: f1, f2, ... in preorder."""
    occs = annotated_occurrences(p)
    return tuple((f"f{i + 1}", c.name) for i, c in enumerate(occs))
