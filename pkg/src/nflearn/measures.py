"""Probability measures on Cantor space as exact next-bit conditional laws.

A law is given by ``p1(w)``, the conditional chance that the bit after ``w``
is a 1.  Cylinder weights are products of conditionals, so additivity
``weight(w) == weight(w.0) + weight(w.1)`` holds by construction.
All arithmetic is over :class:`fractions.Fraction`.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .seq_core import BitStream, BitString, IndexSet, TapeMemo, alternating_stream

ONE = Fraction(1)
HALF = Fraction(1, 2)
TENTH = Fraction(1, 10)
NINE_TENTHS = Fraction(9, 10)


class UndefinedConditional(ValueError):
    """A conditional was requested at a cylinder of weight zero."""


class FullSupportViolation(ValueError):
    """A law claiming full support produced a conditional of 0 or 1."""


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConditionalLaw:
    name: str
    rule: Callable[[BitString], Fraction] = field(repr=False)
    full_support: bool = False
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        def step(acc: Fraction, prefix: BitString, b: int) -> Fraction:
            return acc * self.p(b, prefix) if acc else acc

        object.__setattr__(self, "_weights", TapeMemo(ONE, step))

    def p1(self, w: BitString | str) -> Fraction:
        if not isinstance(w, BitString):
            w = BitString(w)
        value = self.rule(w)
        if type(value) is not Fraction:
            value = Fraction(value)
        # integer comparisons; the denominator of a Fraction is always positive
        num, den = value.numerator, value.denominator
        if not 0 <= num <= den:
            raise ValueError(f"{self.name}: conditional {value} outside [0, 1] at '{w.text}'")
        if self.full_support and (num == 0 or num == den):
            raise FullSupportViolation(f"{self.name}: conditional {value} at '{w.text}' contradicts full support")
        return value

    def p(self, s: int, w: BitString | str) -> Fraction:
        q = self.p1(w)
        return q if s == 1 else 1 - q

    def weight(self, w: BitString | str) -> Fraction:
        if not isinstance(w, BitString):
            w = BitString(w)
        return self._weights(w)

    def supports(self, w: BitString) -> bool:
        """True when the cylinder of ``w`` has positive weight (no big products formed)."""
        if self.full_support:
            return True
        return all(self.p(w.bit(k), w.prefix(k - 1)) > 0 for k in range(1, len(w) + 1))

    def __repr__(self) -> str:
        return f"ConditionalLaw({self.name!r})"


def cylinder_weight(law: ConditionalLaw, w: BitString | str) -> Fraction:
    return law.weight(w)


def cylinder_table(law: ConditionalLaw, depth: int) -> dict[str, Fraction]:
    """Weights of all strings of length ``depth``, keyed by text, lexicographic order."""
    return {
        "".join(bits): law.weight("".join(bits))
        for bits in itertools.product("01", repeat=depth)
    }


# -- registry laws -----------------------------------------------------------


def bernoulli(p) -> ConditionalLaw:
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("bernoulli parameter must lie in [0, 1]")
    return ConditionalLaw(f"bernoulli({p})", lambda w: p, full_support=0 < p < 1, params={"p": p})


def laplace_bayes() -> ConditionalLaw:
    """Rule of succession: p1(w) = (k+1)/(n+2) with k ones among n bits."""
    return ConditionalLaw(
        "laplace-bayes",
        lambda w: Fraction(w.count_ones() + 1, len(w) + 2),
        full_support=True,
    )


def markov(order: int, table, initial=HALF) -> ConditionalLaw:
    """Order-``order`` chain; ``table`` maps the last ``order`` bits to p1.

    ``table`` is either a mapping from context text to p1 or a sequence
    indexed by the context read as a big-endian binary number.  Strings
    shorter than ``order`` use ``initial``.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    if isinstance(table, Mapping):
        rows = {str(k): Fraction(v) for k, v in table.items()}
    else:
        rows = {format(i, f"0{order}b") if order else "": Fraction(v) for i, v in enumerate(table)}
    expected = {"".join(c) for c in itertools.product("01", repeat=order)}
    if set(rows) != expected:
        raise ValueError(f"markov table must cover all {2**order} contexts of length {order}")
    if any(not 0 <= v <= 1 for v in rows.values()):
        raise ValueError("markov table entries must lie in [0, 1]")
    initial = Fraction(initial)
    full = all(0 < v < 1 for v in rows.values()) and 0 < initial < 1

    def rule(w: BitString) -> Fraction:
        if len(w) < order:
            return initial
        ctx = w.tail_bits(order) if order else b""
        return rows["".join("1" if b else "0" for b in ctx)]

    return ConditionalLaw(f"markov({order})", rule, full_support=full, params={"order": order, "table": rows})


def delta(sigma: BitStream) -> ConditionalLaw:
    """Point mass on ``sigma``; conditionals depend only on the length of the input."""
    return ConditionalLaw(f"delta({sigma.name})", lambda w: Fraction(sigma.bit(len(w) + 1)), params={"stream": sigma})


def spiked(base: ConditionalLaw, spikes: IndexSet, inject: BitStream | None = None) -> ConditionalLaw:
    """``base`` except at spike positions, where the ℓ-th spike is forced to ``inject.bit(ℓ)``.

    ``inject`` defaults to alternating bits.
    """
    inject = alternating_stream() if inject is None else inject

    def rule(w: BitString) -> Fraction:
        k = len(w) + 1
        if k in spikes:
            return Fraction(inject.bit(spikes.rank(k)))
        return base.p1(w)

    return ConditionalLaw(
        f"spiked({base.name}, {spikes.name}, {inject.name})",
        rule,
        params={"base": base, "spikes": spikes, "inject": inject},
    )


def vanishing_zero_forecaster() -> ConditionalLaw:
    """Chance of a 0 after n bits is 2^-n, except 1/2 at the root so the law keeps full support."""

    def rule(w: BitString) -> Fraction:
        n = len(w)
        return HALF if n == 0 else 1 - Fraction(1, 2**n)

    return ConditionalLaw("vanishing-zero", rule, full_support=True)


def mixture(weights: Sequence, components: Sequence[ConditionalLaw]) -> ConditionalLaw:
    """Finite convex combination with exact conditionals from cylinder-weight quotients."""
    weights = [Fraction(a) for a in weights]
    components = list(components)
    if len(weights) != len(components) or not components:
        raise ValueError("weights and components must be non-empty and of equal length")
    if any(a <= 0 for a in weights) or sum(weights) != 1:
        raise ValueError("mixture weights must be positive and sum to exactly 1")

    def rule(w: BitString) -> Fraction:
        parts = [a * c.weight(w) for a, c in zip(weights, components)]
        total = sum(parts)
        if total == 0:
            raise UndefinedConditional(f"mixture conditional undefined at '{w.text}' (weight 0)")
        return sum(part * c.p1(w) for part, c in zip(parts, components) if part) / total

    names = ", ".join(c.name for c in components)
    return ConditionalLaw(
        f"mixture([{', '.join(map(str, weights))}], [{names}])",
        rule,
        full_support=any(c.full_support for c in components),
        params={"weights": weights, "components": components},
    )


def evil_forecaster(mu: ConditionalLaw) -> ConditionalLaw:
    """Puts 9/10 on whichever next bit ``mu`` finds no more likely than the other."""
    if not mu.full_support:
        raise PreconditionError(f"evil_forecaster needs a full-support law, got {mu.name}")

    def rule(w: BitString) -> Fraction:
        return TENTH if mu.p(0, w) <= mu.p(1, w) else NINE_TENTHS

    return ConditionalLaw(f"evil-of({mu.name})", rule, full_support=True, params={"base": mu})


def _check_complete_prefix_code(parts: Sequence[BitString]) -> None:
    texts = [p.text for p in parts]
    if len(set(texts)) != len(texts):
        raise PreconditionError("partition parts must be distinct")
    for a, b in itertools.permutations(texts, 2):
        if b.startswith(a):
            raise PreconditionError(f"partition not prefix-free: '{a}' is a prefix of '{b}'")
    if sum(Fraction(1, 2 ** len(t)) for t in texts) != 1:
        raise PreconditionError("partition does not cover Cantor space (Kraft sum != 1)")


def glue_partition(parts: Sequence, weights: Sequence, mu: ConditionalLaw) -> ConditionalLaw:
    """Source with weight p_k on the cylinder of part w_k and ``mu``'s conditionals inside it."""
    parts = [BitString(p) for p in parts]
    weights = [Fraction(p) for p in weights]
    if len(parts) != len(weights):
        raise PreconditionError("parts and weights must have equal length")
    if any(p <= 0 for p in weights) or sum(weights) != 1:
        raise PreconditionError("glue weights must be positive and sum to exactly 1")
    if not mu.full_support:
        raise PreconditionError("glue_partition needs a full-support law")
    _check_complete_prefix_code(parts)
    texts = [p.text for p in parts]
    depth = max(len(t) for t in texts)

    def mass_above(u: str) -> Fraction:
        return sum((p for t, p in zip(texts, weights) if t.startswith(u)), Fraction(0))

    def rule(w: BitString) -> Fraction:
        if len(w) <= depth:
            u = w.text
            if not any(u.startswith(t) for t in texts):
                return mass_above(u + "1") / mass_above(u)
        return mu.p1(w)

    return ConditionalLaw(
        "glue([" + ", ".join(texts) + "])",
        rule,
        full_support=True,
        params={"parts": texts, "weights": weights, "base": mu},
    )


# -- approximation -----------------------------------------------------------


@dataclass(frozen=True)
class ApproxValue:
    estimate: Fraction
    error_bound: Fraction
    components: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.error_bound < 0:
            raise ValueError("error_bound must be nonnegative")

    @property
    def interval(self) -> tuple[Fraction, Fraction]:
        return self.estimate - self.error_bound, self.estimate + self.error_bound

    def overlaps(self, other: "ApproxValue") -> bool:
        lo, hi = self.interval
        olo, ohi = other.interval
        return lo <= ohi and olo <= hi


def dyadic_approx(value: Fraction, precision: int) -> Fraction:
    """Nearest multiple of 2^-precision; within 2^-(precision+1) of ``value``."""
    scale = 2**precision
    return Fraction(round(value * scale), scale)


def mixture_approx(
    base: ConditionalLaw,
    family: Callable[[int], ConditionalLaw],
    w: BitString | str,
    n: int,
) -> ApproxValue:
    """Certified approximation of the weight of ``w`` under ½·base + ½·Σ_k 2^-k·family(k).

    Every exact weight is first degraded to a dyadic approximation at the
    precision the construction calls for (n+1 for the base, 2n for the k-th
    member), then combined over k = 1..n+1.  The three error sources each
    stay within 2^-(n+2), so the estimate is within 2^-n of the true weight.
    """
    if n < 1:
        raise ValueError("precision n must be at least 1")
    w = BitString(w)
    base_exact = base.weight(w)
    base_approx = dyadic_approx(base_exact, n + 1)
    member_exact = [family(k).weight(w) for k in range(1, n + 2)]
    member_approx = [dyadic_approx(x, 2 * n) for x in member_exact]
    estimate = HALF * base_approx + HALF * sum(
        (Fraction(1, 2**k) * f for k, f in enumerate(member_approx, start=1)), Fraction(0)
    )
    alpha = HALF * (base_exact - base_approx)
    beta = sum(
        (Fraction(1, 2 ** (k + 1)) * (x - f) for k, (x, f) in enumerate(zip(member_exact, member_approx), start=1)),
        Fraction(0),
    )
    gamma_bound = Fraction(1, 2 ** (n + 2))
    return ApproxValue(
        estimate=estimate,
        error_bound=Fraction(1, 2**n),
        components={"alpha": alpha, "beta": beta, "gamma_bound": gamma_bound},
    )


# -- sampling ----------------------------------------------------------------


def sample(law: ConditionalLaw, seed: int, horizon: int) -> BitString:
    """Deterministic path of length ``horizon``: bit k is 1 iff the k-th uniform deviate is < p1."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    rng = random.Random(seed)
    w = BitString()
    for _ in range(horizon):
        u = rng.random()
        w = w.append(1 if u < law.p1(w) else 0)
    return w


def sample_stream(law: ConditionalLaw, seed: int) -> BitStream:
    """Infinite lazy version of :func:`sample`; its prefixes agree with ``sample(law, seed, n)``."""
    rng = random.Random(seed)

    def rule(k: int, prefix: BitString) -> int:
        return 1 if rng.random() < law.p1(prefix) else 0

    return BitStream(rule, name=f"sample({law.name}, seed={seed})")
