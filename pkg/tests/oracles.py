"""Straightforward reference implementations on plain strings, used as test oracles."""

from fractions import Fraction
from itertools import product


def errors_plain(predict, bits: str) -> list[int]:
    return [k for k in range(1, len(bits) + 1) if str(predict(bits[: k - 1])) != bits[k - 1]]


def guess_plain(predict, w: str, n: int) -> str:
    s = w
    while len(s) < n:
        s += str(predict(s))
    return s[:n]


def weight_plain(p1, w: str) -> Fraction:
    out = Fraction(1)
    for k, ch in enumerate(w):
        q = Fraction(p1(w[:k]))
        out *= q if ch == "1" else 1 - q
    return out


def strings(depth: int):
    return ["".join(b) for b in product("01", repeat=depth)]


def nasty_count(predict, w: str) -> int:
    return len(errors_plain(predict, w))


def wicked_prefix_count(predict, w: str) -> int:
    return sum(1 for n in range(1, len(w) + 1) if 2 * nasty_count(predict, w[:n]) >= n)
