"""Random typed programs and annotation-respecting data for property tests.

Programs are drawn over a fixed signature (image, [image]).  The data
generator builds valuations where every learned component meets its
annotation by construction: integer predictions round exactly, float
predictions stay within the smallest finite tolerance, digits inside one
valuation are distinct so comparisons of noisy values keep their order,
and flip detection is always right.
"""
import itertools
import random

from statsketch.listdsl import (
    IMAGE,
    App,
    Filter,
    FloatLit,
    Fold,
    ImageRecord,
    ImageVal,
    IntLit,
    Length,
    ListT,
    Map,
    Prediction,
    Slice,
    comp,
)
from statsketch.listdsl.lang import Input

SIG = (IMAGE, ListT(IMAGE))

_FLOAT_BINOPS = ("+", "-", "max")
_INT_CMPS = ("<=", ">=", "=")
_GUARDS = ("cond-≤", "cond-≥")


def _app2(name, a, b):
    return App(App(comp(name), a), b)


class ProgramGen:
    """Draw small type-correct surface programs.

    With simple_guards=True, guard and comparison operands are restricted
    to raw predictions and half-integer literals, the shapes for which the
    data generator can force annotations to hold.
    """

    def __init__(self, rng: random.Random, simple_guards: bool = False):
        self.rng = rng
        self.simple = simple_guards

    def program(self, depth: int = 4):
        kind = self.rng.choice(("float", "int", "flist", "ilist", "bool"))
        if kind == "float":
            return self.float_(depth)
        if kind == "int":
            return self.int_(depth)
        if kind == "flist":
            return self.flist(depth)
        if kind == "ilist":
            return self.ilist(depth)
        return self.bool_(depth)

    def image(self, depth):
        if depth > 1 and self.rng.random() < 0.3:
            return App(comp("cond-flip"), self.image(depth - 1))
        return Input(0)

    def imglist(self, depth):
        if depth > 1 and self.rng.random() < 0.2:
            return Slice(Input(1), IntLit(0), IntLit(self.rng.randint(1, 3)))
        return Input(1)

    def float_atom(self, depth):
        if self.rng.random() < 0.3:
            return FloatLit(self.rng.randint(0, 8) + 0.5)
        return App(comp("predict_float"), self.image(depth - 1))

    def float_(self, depth):
        if depth <= 1:
            return self.float_atom(depth)
        r = self.rng.random()
        if r < 0.35:
            return self.float_atom(depth)
        if r < 0.7:
            op = self.rng.choice(_FLOAT_BINOPS)
            return _app2(op, self.float_(depth - 1), self.float_(depth - 1))
        op = self.rng.choice(_FLOAT_BINOPS)
        base = self.int_(depth - 1) if self.rng.random() < 0.3 else self.float_(depth - 1)
        return Fold(comp(op), self.flist(depth - 1), base)

    def int_atom(self, depth):
        if self.rng.random() < 0.4:
            return IntLit(self.rng.randint(0, 3))
        return App(comp("predict_int"), self.image(depth - 1))

    def int_(self, depth):
        if depth <= 1:
            return self.int_atom(depth)
        r = self.rng.random()
        if r < 0.4:
            return self.int_atom(depth)
        if r < 0.6:
            op = self.rng.choice(("+", "-", "max"))
            return _app2(op, self.int_(depth - 1), self.int_(depth - 1))
        if r < 0.8:
            lst = self.flist(depth - 1) if self.rng.random() < 0.5 else self.ilist(depth - 1)
            return Length(lst)
        return Fold(comp("+"), self.ilist(depth - 1), self.int_(depth - 1))

    def guard_operand(self, depth):
        if self.simple:
            return self.float_atom(depth)
        return self.float_(depth)

    def flist(self, depth):
        base = Map(comp("predict_float"), self.imglist(depth - 1))
        if depth <= 1:
            return base
        r = self.rng.random()
        if r < 0.4:
            return base
        if r < 0.7:
            guard = App(comp(self.rng.choice(_GUARDS)), self.guard_operand(depth - 1))
            return Filter(guard, self.flist(depth - 1))
        lo = IntLit(self.rng.randint(0, 1))
        hi = self.int_slice_bound(depth - 1)
        return Slice(self.flist(depth - 1), lo, hi)

    def ilist(self, depth):
        base = Map(comp("predict_int"), self.imglist(depth - 1))
        if depth <= 1:
            return base
        r = self.rng.random()
        if r < 0.5:
            return base
        if r < 0.8:
            cmp_op = self.rng.choice(_INT_CMPS)
            operand = self.int_atom(depth - 1) if self.simple else self.int_(depth - 1)
            return Filter(App(comp(cmp_op), operand), self.ilist(depth - 1))
        return Slice(self.ilist(depth - 1), IntLit(0), self.int_slice_bound(depth - 1))

    def int_slice_bound(self, depth):
        if self.rng.random() < 0.5:
            return IntLit(self.rng.randint(1, 4))
        return App(comp("predict_int"), self.image(depth - 1))

    def bool_(self, depth):
        if self.rng.random() < 0.5:
            a = self.int_atom(depth - 1) if self.simple else self.int_(depth - 1)
            b = self.int_atom(depth - 1) if self.simple else self.int_(depth - 1)
            return _app2(self.rng.choice(_INT_CMPS), a, b)
        return _app2(
            self.rng.choice(_GUARDS),
            self.guard_operand(depth - 1),
            self.guard_operand(depth - 1),
        )


_ids = itertools.count(1)


def _clean_record(rng: random.Random, digit: int, noise: float) -> ImageRecord:
    flipped = rng.random() < 0.3
    return ImageRecord(
        id=next(_ids),
        truth_int=digit,
        truth_float=float(digit),
        truth_flipped=flipped,
        pred=Prediction(digit + rng.uniform(-noise, noise), rng.uniform(0.5, 1.0)),
        flip_pred=flipped,
        flip_conf=rng.uniform(0.5, 1.0),
    )


def annotation_true_data(
    rng: random.Random,
    n: int,
    max_len: int,
    errs: dict[str, float] | None = None,
):
    """Valuations for SIG where every annotation holds by construction."""
    noise = 0.45
    if errs:
        finite = [e for e in errs.values() if e != float("inf")]
        if finite:
            noise = min(noise, min(finite))
    data = []
    for _ in range(n):
        k = rng.randint(1, max_len)
        digits = rng.sample(range(10), k + 1)
        x = ImageVal(_clean_record(rng, digits[0], noise), upright=True)
        ys = tuple(
            ImageVal(_clean_record(rng, d, noise), upright=True)
            for d in digits[1:]
        )
        data.append((x, ys))
    return data
