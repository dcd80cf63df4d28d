"""Expression IR for programs with statistically calibrated guard specs.

An expression evaluates in two modes.  Train mode may read ground truth and
evaluates each spec node to its annotation Q.  Test mode never touches
ground truth and evaluates a spec node to the indicator 1[score <= c],
which requires the node's threshold to be concrete.

Spec nodes carry at most one hole (threshold or eps).  Holes may share an
id, in which case one calibrated value fills every member of the group.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Mapping, Sequence, Union

__all__ = [
    "Hole",
    "Constant",
    "InputVar",
    "GroundTruthVar",
    "Apply",
    "SpecExpr",
    "Expr",
    "Valuation",
    "ComponentRegistry",
    "default_registry",
    "Path",
    "eval_train",
    "eval_test",
    "collect_specs",
    "bottom_up_order",
    "is_full_sketch",
    "get_node",
    "fill_spec",
    "fill_holes",
    "expr_to_json",
    "expr_from_json",
    "valuation_to_json",
    "valuation_from_json",
]

MODE_COND = "cond"
MODE_IMPL = "impl"

Path = tuple[int, ...]


@dataclass(frozen=True)
class Hole:
    """Unfilled slot.  Holes sharing an id receive one common fill."""

    id: str | None = None


@dataclass(frozen=True)
class Constant:
    value: Any

    def __post_init__(self) -> None:
        if isinstance(self.value, float) and not math.isfinite(self.value):
            raise ValueError("constants must be finite")


@dataclass(frozen=True)
class InputVar:
    name: str


@dataclass(frozen=True)
class GroundTruthVar:
    name: str


@dataclass(frozen=True)
class Apply:
    fn: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class SpecExpr:
    """Guard with score program, threshold, annotation Q, and budget eps.

    mode selects the guarantee shape: "cond" reads as P(score <= c | Q) and
    "impl" as P(Q implies score <= c).
    """

    score: "Expr"
    threshold: Union[float, Hole]
    spec: "Expr"
    eps: Union[float, Hole]
    mode: str

    def __post_init__(self) -> None:
        if self.mode not in (MODE_COND, MODE_IMPL):
            raise ValueError(f"mode must be cond or impl, got {self.mode!r}")
        if isinstance(self.threshold, Hole) and isinstance(self.eps, Hole):
            raise ValueError("a spec may hole its threshold or its eps, not both")
        if not isinstance(self.eps, Hole) and not (0.0 < self.eps <= 1.0):
            # 1.0 is allowed so a conservative fallback fill stays representable.
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")

    @property
    def holed(self) -> bool:
        return isinstance(self.threshold, Hole) or isinstance(self.eps, Hole)


Expr = Union[Constant, InputVar, GroundTruthVar, Apply, SpecExpr]


@dataclass(frozen=True)
class Valuation:
    """One example: input bindings plus (possibly empty) ground truth."""

    inputs: Mapping[str, Any] = field(default_factory=dict)
    ground_truth: Mapping[str, Any] = field(default_factory=dict)


class ComponentRegistry:
    """Named pure functions usable as Apply nodes.

    arity None means variadic.  Evaluation is deterministic by contract;
    nothing here enforces purity beyond convention.
    """

    def __init__(self) -> None:
        self._table: dict[str, tuple[int | None, Callable[..., Any]]] = {}

    def register(self, name: str, arity: int | None, fn: Callable[..., Any]) -> None:
        if name in self._table:
            raise ValueError(f"component {name!r} already registered")
        self._table[name] = (arity, fn)

    def lookup(self, name: str) -> tuple[int | None, Callable[..., Any]]:
        if name not in self._table:
            raise KeyError(f"unknown component {name!r}")
        return self._table[name]


def default_registry() -> ComponentRegistry:
    reg = ComponentRegistry()
    ops: list[tuple[str, int | None, Callable[..., Any]]] = [
        ("+", 2, lambda a, b: a + b),
        ("-", 2, lambda a, b: a - b),
        ("*", 2, lambda a, b: a * b),
        ("neg", 1, lambda a: -a),
        ("abs", 1, abs),
        ("min", 2, min),
        ("max", 2, max),
        ("<=", 2, lambda a, b: a <= b),
        ("<", 2, lambda a, b: a < b),
        (">=", 2, lambda a, b: a >= b),
        (">", 2, lambda a, b: a > b),
        ("=", 2, lambda a, b: a == b),
        ("!=", 2, lambda a, b: a != b),
        ("and", None, lambda *xs: all(xs)),
        ("or", None, lambda *xs: any(xs)),
        ("not", 1, lambda a: not a),
        ("ite", 3, lambda c, a, b: a if c else b),
        ("all", None, lambda *xs: all(xs)),
    ]
    for name, arity, fn in ops:
        reg.register(name, arity, fn)
    return reg


_DEFAULT_REGISTRY = default_registry()


def _as_bit(value: Any) -> int:
    if isinstance(value, bool):
        return int(value)
    if value in (0, 1):
        return int(value)
    raise ValueError(f"spec annotation must evaluate to a 0/1 value, got {value!r}")


def _apply(node: Apply, args: Sequence[Any], registry: ComponentRegistry) -> Any:
    arity, fn = registry.lookup(node.fn)
    if arity is not None and len(args) != arity:
        raise ValueError(f"component {node.fn!r} expects {arity} args, got {len(args)}")
    return fn(*args)


def eval_train(expr: Expr, val: Valuation, registry: ComponentRegistry | None = None) -> Any:
    """Ground-truth semantics: a spec node evaluates to its annotation."""
    reg = registry or _DEFAULT_REGISTRY
    if isinstance(expr, Constant):
        return expr.value
    if isinstance(expr, InputVar):
        if expr.name not in val.inputs:
            raise KeyError(f"missing input {expr.name!r}")
        return val.inputs[expr.name]
    if isinstance(expr, GroundTruthVar):
        if expr.name not in val.ground_truth:
            raise KeyError(f"missing ground truth {expr.name!r}")
        return val.ground_truth[expr.name]
    if isinstance(expr, Apply):
        return _apply(expr, [eval_train(a, val, reg) for a in expr.args], reg)
    if isinstance(expr, SpecExpr):
        return _as_bit(eval_train(expr.spec, val, reg))
    raise TypeError(f"not an expression: {expr!r}")


def eval_test(expr: Expr, val: Valuation, registry: ComponentRegistry | None = None) -> Any:
    """Deployment semantics: ground truth is off limits, specs gate on score."""
    reg = registry or _DEFAULT_REGISTRY
    if isinstance(expr, Constant):
        return expr.value
    if isinstance(expr, InputVar):
        if expr.name not in val.inputs:
            raise KeyError(f"missing input {expr.name!r}")
        return val.inputs[expr.name]
    if isinstance(expr, GroundTruthVar):
        raise ValueError(f"test semantics cannot read ground truth {expr.name!r}")
    if isinstance(expr, Apply):
        return _apply(expr, [eval_test(a, val, reg) for a in expr.args], reg)
    if isinstance(expr, SpecExpr):
        if isinstance(expr.threshold, Hole):
            raise ValueError("cannot evaluate a spec whose threshold is still a hole")
        z = eval_test(expr.score, val, reg)
        if not isinstance(z, (int, float)) or isinstance(z, bool) or math.isnan(z):
            raise ValueError(f"score must be a real number, got {z!r}")
        return 1 if z <= expr.threshold else 0
    raise TypeError(f"not an expression: {expr!r}")


def _children(expr: Expr) -> tuple[Expr, ...]:
    if isinstance(expr, Apply):
        return expr.args
    if isinstance(expr, SpecExpr):
        return (expr.score, expr.spec)
    return ()


def _walk_post(expr: Expr, path: Path) -> Iterator[tuple[Path, Expr]]:
    for i, child in enumerate(_children(expr)):
        yield from _walk_post(child, path + (i,))
    yield path, expr


def collect_specs(expr: Expr) -> list[tuple[Path, SpecExpr]]:
    """All spec nodes in post order, so nested specs precede their parents."""
    return [(p, e) for p, e in _walk_post(expr, ()) if isinstance(e, SpecExpr)]


def bottom_up_order(expr: Expr, paths: Sequence[Path]) -> list[Path]:
    """Sort the given spec paths into the expression's post order."""
    rank = {p: i for i, (p, _) in enumerate(_walk_post(expr, ()))}
    missing = [p for p in paths if p not in rank]
    if missing:
        raise ValueError(f"paths not in expression: {missing}")
    return sorted(paths, key=lambda p: rank[p])


def is_full_sketch(expr: Expr) -> bool:
    """True when the expression has specs and every spec still has a hole."""
    specs = collect_specs(expr)
    return bool(specs) and all(s.holed for _, s in specs)


def get_node(expr: Expr, path: Path) -> Expr:
    node = expr
    for i in path:
        kids = _children(node)
        if i >= len(kids):
            raise ValueError(f"bad path {path}")
        node = kids[i]
    return node


def _rebuild(expr: Expr, path: Path, repl: Callable[[Expr], Expr]) -> Expr:
    if not path:
        return repl(expr)
    i, rest = path[0], path[1:]
    if isinstance(expr, Apply):
        args = list(expr.args)
        args[i] = _rebuild(args[i], rest, repl)
        return Apply(expr.fn, tuple(args))
    if isinstance(expr, SpecExpr):
        if i == 0:
            return SpecExpr(_rebuild(expr.score, rest, repl), expr.threshold, expr.spec, expr.eps, expr.mode)
        if i == 1:
            return SpecExpr(expr.score, expr.threshold, _rebuild(expr.spec, rest, repl), expr.eps, expr.mode)
    raise ValueError(f"bad path {path}")


def fill_spec(expr: Expr, path: Path, value: float) -> Expr:
    """Fill the single hole of the spec node at path with value."""

    def repl(node: Expr) -> Expr:
        if not isinstance(node, SpecExpr):
            raise ValueError(f"no spec node at {path}")
        if isinstance(node.threshold, Hole):
            return SpecExpr(node.score, value, node.spec, node.eps, node.mode)
        if isinstance(node.eps, Hole):
            return SpecExpr(node.score, node.threshold, node.spec, value, node.mode)
        raise ValueError(f"spec at {path} has no hole")

    return _rebuild(expr, path, repl)


def fill_holes(expr: Expr, fills: Mapping[Path, float]) -> Expr:
    out = expr
    for path, value in fills.items():
        out = fill_spec(out, path, value)
    return out


# --- JSON round trip ------------------------------------------------------

SCHEMA_EXPR = "statsketch/expr-v1"


def _slot_to_json(slot: Union[float, Hole]) -> Any:
    if isinstance(slot, Hole):
        return {"hole": slot.id}
    return slot


def _slot_from_json(obj: Any) -> Union[float, Hole]:
    if isinstance(obj, dict):
        return Hole(obj.get("hole"))
    return float(obj)


def _node_to_json(expr: Expr) -> dict[str, Any]:
    if isinstance(expr, Constant):
        return {"node": "const", "value": expr.value}
    if isinstance(expr, InputVar):
        return {"node": "input", "name": expr.name}
    if isinstance(expr, GroundTruthVar):
        return {"node": "ground_truth", "name": expr.name}
    if isinstance(expr, Apply):
        return {"node": "apply", "fn": expr.fn, "args": [_node_to_json(a) for a in expr.args]}
    if isinstance(expr, SpecExpr):
        return {
            "node": "spec",
            "score": _node_to_json(expr.score),
            "threshold": _slot_to_json(expr.threshold),
            "spec": _node_to_json(expr.spec),
            "eps": _slot_to_json(expr.eps),
            "mode": expr.mode,
        }
    raise TypeError(f"not an expression: {expr!r}")


def _node_from_json(obj: dict[str, Any]) -> Expr:
    kind = obj["node"]
    if kind == "const":
        return Constant(obj["value"])
    if kind == "input":
        return InputVar(obj["name"])
    if kind == "ground_truth":
        return GroundTruthVar(obj["name"])
    if kind == "apply":
        return Apply(obj["fn"], tuple(_node_from_json(a) for a in obj["args"]))
    if kind == "spec":
        return SpecExpr(
            _node_from_json(obj["score"]),
            _slot_from_json(obj["threshold"]),
            _node_from_json(obj["spec"]),
            _slot_from_json(obj["eps"]),
            obj["mode"],
        )
    raise ValueError(f"unknown node kind {kind!r}")


def expr_to_json(expr: Expr) -> str:
    return json.dumps({"schema": SCHEMA_EXPR, "expr": _node_to_json(expr)}, sort_keys=False)


def expr_from_json(text: str) -> Expr:
    obj = json.loads(text)
    if obj.get("schema") != SCHEMA_EXPR:
        raise ValueError(f"expected schema {SCHEMA_EXPR}, got {obj.get('schema')!r}")
    return _node_from_json(obj["expr"])


def valuation_to_json(val: Valuation) -> str:
    return json.dumps({"inputs": dict(val.inputs), "ground_truth": dict(val.ground_truth)})


def valuation_from_json(text: str) -> Valuation:
    obj = json.loads(text)
    return Valuation(inputs=obj.get("inputs", {}), ground_truth=obj.get("ground_truth", {}))
