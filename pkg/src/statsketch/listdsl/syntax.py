"""Concrete syntax for list-language programs.

Parenthesized prefix notation: "(fold + (map predict_float input2) 0)".
Applications flatten, so "(f a b)" is the curried ((f a) b).  The printer
never shows integer widening; for byte-stable round trips, parse then
elaborate then print.

cond-≤ commits to the comparison y1 ≤ y2 and cond-≥ to y1 ≥ y2; ASCII
spellings cond-le and cond-ge are accepted on input.  Superscripted input
names (input¹) normalize to input1.

Programs also serialize as an explicit JSON AST, widening nodes included.
"""
from __future__ import annotations

from typing import Any

from .lang import (
    App,
    Arrow,
    COMPONENT_TYPES,
    COMP_ALIASES,
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
    comp,
    type_from_str,
    type_to_str,
)

__all__ = [
    "parse_program",
    "print_program",
    "program_to_json",
    "program_from_json",
    "SCHEMA_PROGRAM",
]

SCHEMA_PROGRAM = "statsketch/dsl-v1"

_SUPERSCRIPTS = str.maketrans("⁰¹²³⁴⁵⁶⁷⁸⁹", "0123456789")


# ---------------------------------------------------------------------------
# Parsing

def _tokenize(text: str) -> list[str]:
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            out.append(ch)
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            out.append(text[i:j])
            i = j
    return out


def parse_program(text: str) -> Program:
    """Parse concrete syntax into an AST.  Overloaded arithmetic comes out
    at its default (integer) instantiation; elaborate resolves it."""
    tokens = _tokenize(text)
    if not tokens:
        raise ValueError("empty program text")
    tree, rest = _parse_expr(tokens)
    if rest:
        raise ValueError(f"trailing tokens: {' '.join(rest)}")
    return tree


def _parse_expr(tokens: list[str]) -> tuple[Program, list[str]]:
    if not tokens:
        raise ValueError("unexpected end of program text")
    tok = tokens[0]
    if tok == ")":
        raise ValueError("unexpected )")
    if tok != "(":
        return _parse_atom(tok), tokens[1:]
    rest = tokens[1:]
    if not rest:
        raise ValueError("unclosed (")
    head = rest[0]
    if head in ("fold", "map", "filter", "slice", "length"):
        return _parse_form(head, rest[1:])
    items: list[Program] = []
    while rest and rest[0] != ")":
        item, rest = _parse_expr(rest)
        items.append(item)
    if not rest:
        raise ValueError("unclosed (")
    rest = rest[1:]
    if not items:
        raise ValueError("empty application ()")
    if len(items) == 1:
        return items[0], rest
    out = items[0]
    for arg in items[1:]:
        out = App(out, arg)
    return out, rest


_FORM_ARITY = {"fold": 3, "map": 2, "filter": 2, "slice": 3, "length": 1}


def _parse_form(head: str, tokens: list[str]) -> tuple[Program, list[str]]:
    args: list[Program] = []
    rest = tokens
    while rest and rest[0] != ")":
        item, rest = _parse_expr(rest)
        args.append(item)
    if not rest:
        raise ValueError(f"unclosed ({head}")
    rest = rest[1:]
    want = _FORM_ARITY[head]
    if len(args) != want:
        raise ValueError(f"{head} takes {want} arguments, got {len(args)}")
    if head == "fold":
        return Fold(args[0], args[1], args[2]), rest
    if head == "map":
        return Map(args[0], args[1]), rest
    if head == "filter":
        return Filter(args[0], args[1]), rest
    if head == "slice":
        return Slice(args[0], args[1], args[2]), rest
    return Length(args[0]), rest


def _parse_atom(tok: str) -> Program:
    tok = tok.translate(_SUPERSCRIPTS)
    if tok.startswith("input"):
        tail = tok[5:]
        if tail.isdigit() and int(tail) >= 1:
            return Input(int(tail) - 1)
    name = COMP_ALIASES.get(tok, tok)
    if name in COMPONENT_TYPES:
        return comp(name)
    try:
        return IntLit(int(tok))
    except ValueError:
        pass
    try:
        return FloatLit(float(tok))
    except ValueError:
        pass
    raise ValueError(f"unknown token {tok!r}")


# ---------------------------------------------------------------------------
# Printing

def print_program(p: Program) -> str:
    if isinstance(p, Input):
        return f"input{p.index + 1}"
    if isinstance(p, IntLit):
        return str(p.value)
    if isinstance(p, FloatLit):
        return repr(p.value)
    if isinstance(p, Comp):
        return p.name
    if isinstance(p, ToFloat):
        return print_program(p.arg)
    if isinstance(p, App):
        spine = [p.arg]
        fn = p.fn
        while isinstance(fn, App):
            spine.append(fn.arg)
            fn = fn.fn
        spine.append(fn)
        return "(" + " ".join(print_program(q) for q in reversed(spine)) + ")"
    if isinstance(p, Fold):
        return (
            f"(fold {print_program(p.fn)} {print_program(p.lst)} "
            f"{print_program(p.base)})"
        )
    if isinstance(p, Map):
        return f"(map {print_program(p.fn)} {print_program(p.lst)})"
    if isinstance(p, Filter):
        return f"(filter {print_program(p.fn)} {print_program(p.lst)})"
    if isinstance(p, Slice):
        return (
            f"(slice {print_program(p.lst)} {print_program(p.lo)} "
            f"{print_program(p.hi)})"
        )
    if isinstance(p, Length):
        return f"(length {print_program(p.lst)})"
    raise TypeError(f"cannot print {p!r}")


# ---------------------------------------------------------------------------
# JSON form (the exact AST, widening nodes included)

def program_to_json(p: Program, top: bool = True) -> dict[str, Any]:
    if top:
        return {"schema": SCHEMA_PROGRAM, "ast": program_to_json(p, top=False)}
    if isinstance(p, Input):
        return {"node": "input", "index": p.index}
    if isinstance(p, IntLit):
        return {"node": "int", "value": p.value}
    if isinstance(p, FloatLit):
        return {"node": "float", "value": p.value}
    if isinstance(p, Comp):
        return {"node": "comp", "name": p.name, "type": type_to_str(p.ty)}
    if isinstance(p, ToFloat):
        return {"node": "tofloat", "arg": program_to_json(p.arg, top=False)}
    if isinstance(p, App):
        return {
            "node": "app",
            "fn": program_to_json(p.fn, top=False),
            "arg": program_to_json(p.arg, top=False),
        }
    if isinstance(p, Fold):
        return {
            "node": "fold",
            "fn": program_to_json(p.fn, top=False),
            "lst": program_to_json(p.lst, top=False),
            "base": program_to_json(p.base, top=False),
        }
    if isinstance(p, Map):
        return {
            "node": "map",
            "fn": program_to_json(p.fn, top=False),
            "lst": program_to_json(p.lst, top=False),
        }
    if isinstance(p, Filter):
        return {
            "node": "filter",
            "fn": program_to_json(p.fn, top=False),
            "lst": program_to_json(p.lst, top=False),
        }
    if isinstance(p, Slice):
        return {
            "node": "slice",
            "lst": program_to_json(p.lst, top=False),
            "lo": program_to_json(p.lo, top=False),
            "hi": program_to_json(p.hi, top=False),
        }
    if isinstance(p, Length):
        return {"node": "length", "lst": program_to_json(p.lst, top=False)}
    raise TypeError(f"cannot serialize {p!r}")


def program_from_json(obj: dict[str, Any]) -> Program:
    if "schema" in obj:
        if obj["schema"] != SCHEMA_PROGRAM:
            raise ValueError(f"unknown program schema {obj['schema']!r}")
        return program_from_json(obj["ast"])
    kind = obj["node"]
    if kind == "input":
        return Input(obj["index"])
    if kind == "int":
        return IntLit(obj["value"])
    if kind == "float":
        return FloatLit(obj["value"])
    if kind == "comp":
        ty = type_from_str(obj["type"])
        if not isinstance(ty, Arrow):
            raise ValueError("component type must be an arrow")
        return Comp(obj["name"], ty)
    if kind == "tofloat":
        return ToFloat(program_from_json(obj["arg"]))
    if kind == "app":
        return App(program_from_json(obj["fn"]), program_from_json(obj["arg"]))
    if kind == "fold":
        return Fold(
            program_from_json(obj["fn"]),
            program_from_json(obj["lst"]),
            program_from_json(obj["base"]),
        )
    if kind == "map":
        return Map(program_from_json(obj["fn"]), program_from_json(obj["lst"]))
    if kind == "filter":
        return Filter(program_from_json(obj["fn"]), program_from_json(obj["lst"]))
    if kind == "slice":
        return Slice(
            program_from_json(obj["lst"]),
            program_from_json(obj["lo"]),
            program_from_json(obj["hi"]),
        )
    if kind == "length":
        return Length(program_from_json(obj["lst"]))
    raise ValueError(f"unknown node kind {kind!r}")
