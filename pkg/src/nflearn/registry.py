"""Compact reference grammar for learners, streams, index sets and laws.

Examples::

    always-1
    majority(3)
    evil-of(last-bit)
    combine-nv(always-0, [all-ones, alternating])
    sparse-zeros(powers(10))
    spiked(bernoulli(1/2), powers(10), all-ones)
    glue(["0", "10", "11"], [1/10, 2/10, 7/10], laplace-bayes)

Arguments are references, ``[...]`` lists, integers, ``num/den`` rationals
or double-quoted strings.  ``key=value`` keyword arguments are accepted
where a constructor has optional parameters.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from . import extrapolation as ex
from . import forecasting as fc
from . import measures as ms
from .seq_core import (
    BitStream,
    BitString,
    IndexSet,
    alternating_stream,
    constant_stream,
    periodic_stream,
    sparse_zeros_stream,
    stream_from_string,
)


class RefError(ValueError):
    """A reference failed to parse or to resolve."""


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple = ()
    kwargs: tuple = field(default=())

    def kw(self) -> dict:
        return dict(self.kwargs)


_TOKEN = re.compile(
    r"""\s*(?:
        (?P<str>"[^"]*")
      | (?P<num>-?\d+(?:/\d+)?)
      | (?P<name>[A-Za-z][A-Za-z0-9_\-]*)
      | (?P<punct>[()\[\],=])
    )""",
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise RefError(f"cannot parse reference at offset {pos}: {text!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self, value: str | None = None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise RefError(f"expected {value or 'a token'} in {self.text!r}")
        self.i += 1
        return tok

    def value(self):
        kind, tok = self.peek()
        if kind == "str":
            self.i += 1
            return tok[1:-1]
        if kind == "num":
            self.i += 1
            return Fraction(tok)
        if tok == "[":
            self.i += 1
            items = []
            if self.peek()[1] != "]":
                items.append(self.value())
                while self.peek()[1] == ",":
                    self.i += 1
                    items.append(self.value())
            self.take("]")
            return items
        if kind == "name":
            self.i += 1
            args, kwargs = [], []
            if self.peek()[1] == "(":
                self.i += 1
                if self.peek()[1] != ")":
                    self._arg(args, kwargs)
                    while self.peek()[1] == ",":
                        self.i += 1
                        self._arg(args, kwargs)
                self.take(")")
            return Call(tok, tuple(args), tuple(kwargs))
        raise RefError(f"unexpected token {tok!r} in {self.text!r}")

    def _arg(self, args, kwargs):
        kind, tok = self.peek()
        if kind == "name" and self.i + 1 < len(self.tokens) and self.tokens[self.i + 1][1] == "=":
            self.i += 2
            kwargs.append((tok, self.value()))
        else:
            if kwargs:
                raise RefError(f"positional argument after keyword argument in {self.text!r}")
            args.append(self.value())


def parse_ref(text) -> object:
    if not isinstance(text, str):
        return text
    p = _Parser(text)
    out = p.value()
    if p.i != len(p.tokens):
        raise RefError(f"trailing input in reference {text!r}")
    return out


# -- helpers ------------------------------------------------------------------------


def _as_call(node, what: str) -> Call:
    node = parse_ref(node)
    if not isinstance(node, Call):
        raise RefError(f"expected a {what} reference, got {node!r}")
    return node


def _int(x, what: str) -> int:
    x = parse_ref(x) if isinstance(x, str) else x
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    if isinstance(x, int):
        return x
    raise RefError(f"{what} must be an integer, got {x!r}")


def _rational(x, what: str) -> Fraction:
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except ValueError as exc:
            raise RefError(f"{what} must be a rational num/den, got {x!r}") from exc
    raise RefError(f"{what} must be a rational, got {x!r}")


def _bits(x, what: str) -> BitString:
    if isinstance(x, str) and set(x) <= {"0", "1"}:
        return BitString(x)
    raise RefError(f"{what} must be a quoted bit string, got {x!r}")


def _arity(c: Call, lo: int, hi: int | float | None = None) -> None:
    hi = lo if hi is None else hi
    if not lo <= len(c.args) <= hi:
        expect = str(lo) if lo == hi else f"at least {lo}" if hi == float("inf") else f"{lo}..{hi}"
        raise RefError(f"{c.name} takes {expect} arguments, got {len(c.args)}")


# -- extrapolators -------------------------------------------------------------------


def extrapolator(ref) -> ex.Extrapolator:
    c = _as_call(ref, "learner")
    n = c.name
    if n in ("always-0", "always-1"):
        _arity(c, 0)
        return ex.always(int(n[-1]))
    if n == "always":
        _arity(c, 1)
        return ex.always(_int(c.args[0], "bit"))
    if n == "last-bit":
        _arity(c, 0, 1)
        return ex.last_bit(_int(c.args[0], "default") if c.args else 1)
    if n in ("majority", "k-th-order-majority"):
        _arity(c, 1)
        return ex.majority(_int(c.args[0], "k"))
    if n == "table":
        _arity(c, 1, float("inf"))
        entries = {}
        for item in c.args[1:]:
            if not isinstance(item, str) or item.count(":") != 1:
                raise RefError(f"table entries are \"bits:bit\" strings, got {item!r}")
            key, val = item.split(":")
            entries[_bits(key, "table key").text] = int(val)
        return ex.table(entries, default=_int(c.args[0], "default"))
    if n == "evil-of":
        _arity(c, 1)
        return ex.evil_twin(extrapolator(c.args[0]))
    if n in ("combine-nv", "combine-weak"):
        _arity(c, 2)
        make = ex.combine_nv if n == "combine-nv" else ex.combine_weak
        return make(extrapolator(c.args[0]), family(c.args[1]))
    raise RefError(f"unknown learner {n!r}")


# -- streams and index sets -----------------------------------------------------------


def family(ref) -> list[BitStream]:
    node = parse_ref(ref)
    if not isinstance(node, list):
        raise RefError(f"a family is a [...] list of streams, got {node!r}")
    return [stream(x) for x in node]


def index_set(ref) -> IndexSet:
    c = _as_call(ref, "index set")
    n = c.name
    if n == "powers":
        _arity(c, 0, 2)
        base = _int(c.args[0], "base") if c.args else 10
        offset = _int(c.args[1], "offset") if len(c.args) > 1 else 0
        return IndexSet.powers(base, offset)
    if n == "squares":
        _arity(c, 0, 1)
        return IndexSet.squares(_int(c.args[0], "offset") if c.args else 0)
    if n == "set":
        _arity(c, 1)
        items = c.args[0]
        if not isinstance(items, list):
            raise RefError("set(...) takes a [...] list of positions")
        return IndexSet.from_list(_int(x, "position") for x in items)
    if n == "all":
        return IndexSet.all()
    if n == "empty":
        return IndexSet.empty()
    raise RefError(f"unknown index set {n!r}")


def stream(ref) -> BitStream:
    c = _as_call(ref, "stream")
    n, a = c.name, c.args
    if n in ("all-zeros", "all-ones"):
        _arity(c, 0)
        return constant_stream(0 if n == "all-zeros" else 1)
    if n == "alternating":
        _arity(c, 0, 1)
        return alternating_stream(_int(a[0], "first") if a else 0)
    if n == "periodic":
        _arity(c, 1)
        return periodic_stream(_bits(a[0], "pattern"))
    if n == "from-string":
        _arity(c, 2)
        return stream_from_string(_bits(a[0], "prefix"), stream(a[1]))
    if n == "guess":
        _arity(c, 1, 2)
        return ex.guess_sequence(extrapolator(a[0]), _bits(a[1], "seed string") if len(a) > 1 else BitString())
    if n == "sparse-zeros":
        _arity(c, 1, 2)
        return sparse_zeros_stream(index_set(a[0]), stream(a[1]) if len(a) > 1 else None)
    if n == "defeat-nv":
        _arity(c, 1, 2)
        return ex.defeat_nv(extrapolator(a[0]), _int(a[1], "budget") if len(a) > 1 else ex.DEFAULT_DEFEAT_BUDGET)
    if n == "defeat-nc":
        _arity(c, 1, 2)
        return fc.defeat_nc(law(a[0]), _int(a[1], "budget") if len(a) > 1 else ex.DEFAULT_DEFEAT_BUDGET)
    if n == "coarse":
        _arity(c, 1)
        return ex.coarse_block_double(stream(a[0]))
    if n == "sample":
        _arity(c, 2)
        return ms.sample_stream(law(a[0]), _int(a[1], "seed"))
    if n in ("pair-star", "pair-dagger"):
        _arity(c, 4)
        star, dagger = ex.adversarial_pair(extrapolator(a[0]), _bits(a[1], "prefix"), stream(a[2]), index_set(a[3]))
        return star if n == "pair-star" else dagger
    raise RefError(f"unknown stream {n!r}")


# -- laws ----------------------------------------------------------------------------


def law(ref) -> ms.ConditionalLaw:
    c = _as_call(ref, "law")
    n, a = c.name, c.args
    if n == "bernoulli":
        _arity(c, 1)
        return ms.bernoulli(_rational(a[0], "p"))
    if n == "laplace-bayes":
        _arity(c, 0)
        return ms.laplace_bayes()
    if n == "vanishing-zero":
        _arity(c, 0)
        return ms.vanishing_zero_forecaster()
    if n == "markov":
        _arity(c, 2)
        rows = a[1]
        if not isinstance(rows, list):
            raise RefError("markov table is a [...] list of rationals indexed by context")
        initial = c.kw().get("initial", Fraction(1, 2))
        return ms.markov(_int(a[0], "order"), [_rational(x, "markov entry") for x in rows], _rational(initial, "initial"))
    if n == "delta":
        _arity(c, 1)
        return ms.delta(stream(a[0]))
    if n == "spiked":
        _arity(c, 2, 3)
        return ms.spiked(law(a[0]), index_set(a[1]), stream(a[2]) if len(a) > 2 else None)
    if n == "mixture":
        _arity(c, 2)
        if not (isinstance(a[0], list) and isinstance(a[1], list)):
            raise RefError("mixture takes a weight list and a law list")
        return ms.mixture([_rational(x, "weight") for x in a[0]], [law(x) for x in a[1]])
    if n == "evil-of":
        _arity(c, 1)
        return ms.evil_forecaster(law(a[0]))
    if n == "glue":
        _arity(c, 3)
        if not (isinstance(a[0], list) and isinstance(a[1], list)):
            raise RefError("glue takes a part list, a weight list and a law")
        parts = [_bits(x, "part") for x in a[0]]
        return ms.glue_partition(parts, [_rational(x, "weight") for x in a[1]], law(a[2]))
    raise RefError(f"unknown law {n!r}")
