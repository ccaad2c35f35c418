"""Effective category tools: wicked strings, Banach–Mazur plays, Baire escapes,
rational balls of measures, and replayable exact-arithmetic certificates.
"""

from __future__ import annotations

import hashlib
import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .extrapolation import Extrapolator
from .measures import ConditionalLaw, PreconditionError, UndefinedConditional
from .seq_core import BitString

FIFTH = Fraction(1, 5)
TENTH = Fraction(1, 10)
NINE_TENTHS = Fraction(9, 10)
MAX_SHRINK_EXPONENT = 64
MAX_SUPERBAD_DEPTH = 12


class WitnessViolation(ValueError):
    """A witness function failed to strictly extend its argument."""


class RuleViolation(ValueError):
    """A Banach–Mazur player made an illegal (empty) move."""


class ShrinkFailure(RuntimeError):
    pass


# -- wicked strings ------------------------------------------------------------


def _nasty_flags(m: Extrapolator, w: BitString) -> list[bool]:
    return [m.predict(w.prefix(k - 1)) != w.bit(k) for k in range(1, len(w) + 1)]


def wickedness(m: Extrapolator, w) -> Fraction:
    """Fraction of the bits of ``w`` that ``m`` mispredicts."""
    w = BitString(w)
    if len(w) < 1:
        raise ValueError("wickedness is defined for non-empty strings")
    return Fraction(sum(_nasty_flags(m, w)), len(w))


def wicked_prefix_lengths(m: Extrapolator, w) -> list[int]:
    """Lengths n ≥ 1 such that w[n] has at least half of its bits nasty."""
    w = BitString(w)
    out, nasty = [], 0
    for n, flag in enumerate(_nasty_flags(m, w), start=1):
        nasty += flag
        if 2 * nasty >= n:
            out.append(n)
    return out


def count_wicked_prefixes(m: Extrapolator, w) -> int:
    return len(wicked_prefix_lengths(m, w))


def nasty_extension(m: Extrapolator, w, count: int) -> BitString:
    """``w`` followed by ``count`` bits, each the opposite of m's prediction so far."""
    w = BitString(w)
    for _ in range(count):
        w = w.append(1 - m.predict(w))
    return w


@dataclass(frozen=True)
class WitnessFamily:
    """F(n, w), a strict extension of w, avoiding the n-th closed nowhere dense piece."""

    name: str
    fn: Callable[[int, BitString], BitString] = field(repr=False)

    def __call__(self, n: int, w) -> BitString:
        w = BitString(w)
        out = BitString(self.fn(n, w))
        if len(out) <= len(w) or not w.is_prefix_of(out):
            raise WitnessViolation(f"{self.name}: F({n}, '{w.text}') = '{out.text}' does not strictly extend its input")
        return out


def nwd_witness_weaknv(m: Extrapolator, padding: str = "double") -> WitnessFamily:
    """Witness that the sequences weakly NV-learned by ``m`` form a meagre set.

    ``padding="double"`` appends |w| nasty bits and then n more, so that every
    extension has at least n wicked prefixes.  ``padding="minimal"`` appends
    only as many nasty bits as needed to make w itself wicked before the n
    extra ones, and at least one bit overall; lengths then grow additively
    instead of doubling, which keeps long games tractable.  The empty string
    gets one leading nasty bit so the extension is always strict.
    """
    if padding not in ("double", "minimal"):
        raise ValueError("padding must be 'double' or 'minimal'")

    def fn(n: int, w: BitString) -> BitString:
        if len(w) == 0:
            w = nasty_extension(m, w, 1)
            pad = 0
        elif padding == "double":
            pad = len(w)
        else:
            nasty = sum(_nasty_flags(m, w))
            pad = max(0, len(w) - 2 * nasty)
        # a nasty bit keeps a wicked string wicked, so one extra bit restores strictness
        return nasty_extension(m, w, max(1, pad + n) if padding == "minimal" else pad + n)

    return WitnessFamily(f"nwd-weaknv({m.name}, {padding})", fn)


def witness_from_suffix(name: str, suffix) -> WitnessFamily:
    """F(n, w) = w.suffix for a fixed non-empty suffix."""
    suffix = BitString(suffix)
    return WitnessFamily(name, lambda n, w: w.extend(suffix))


# -- Banach–Mazur games -----------------------------------------------------------


@dataclass(frozen=True)
class GameState:
    round: int
    prefix: BitString
    moves: tuple[BitString, ...]


Strategy = Callable[[GameState], object]


@dataclass(frozen=True)
class GameTranscript:
    moves: tuple[BitString, ...]
    realized_prefix: BitString

    def __post_init__(self):
        if any(len(mv) == 0 for mv in self.moves):
            raise RuleViolation("transcript contains an empty move")
        if BitString("").extend("".join(mv.text for mv in self.moves)) != self.realized_prefix:
            raise ValueError("realized prefix must be the concatenation of the moves")

    def prefix_after_round(self, k: int) -> BitString:
        """Realized prefix after both players have moved in round k (1-based)."""
        return self.realized_prefix.prefix(sum(len(mv) for mv in self.moves[: 2 * k]))


def play_banach_mazur(player_one: Strategy, player_two: Strategy, rounds: int) -> GameTranscript:
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    moves: list[BitString] = []
    prefix = BitString()
    for k in range(1, rounds + 1):
        for label, player in (("Player I", player_one), ("Player II", player_two)):
            move = BitString(player(GameState(k, prefix, tuple(moves))))
            if len(move) == 0:
                raise RuleViolation(f"{label} played the empty string in round {k}")
            moves.append(move)
            prefix = prefix.extend(move)
    return GameTranscript(tuple(moves), prefix)


def constant_player(move) -> Strategy:
    move = BitString(move)
    return lambda state: move


def random_player(seed: int, max_length: int = 4) -> Strategy:
    """Plays 1..max_length random bits; a pure function of (seed, round, prefix length)."""

    def play(state: GameState) -> BitString:
        rng = random.Random(f"{seed}:{state.round}:{len(state.prefix)}")
        return BitString(rng.getrandbits(1) for _ in range(rng.randint(1, max_length)))

    return play


def bm_strategy_from_witness(F: WitnessFamily) -> Strategy:
    """Player II answers the suffix s with prefix.s = F(round, prefix)."""

    def play(state: GameState) -> BitString:
        target = F(state.round, state.prefix)
        return target[len(state.prefix):]

    return play


def escape_trace(F: WitnessFamily, w, steps: int) -> list[tuple[BitString, BitString]]:
    """Pairs (w_k, F(k, w_k)) for k = 0..steps-1 of the iteration w_{k+1} = F(k, w_k).0."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    w = BitString(w)
    out = []
    for k in range(steps):
        piece = F(k, w)
        out.append((w, piece))
        w = piece.append(0)
    return out


def baire_escape(F: WitnessFamily, w, steps: int) -> BitString:
    """w_steps; it extends every F(k, w_k) with k < steps."""
    return escape_trace(F, w, steps)[-1][1].append(0)


# -- exact certificates -------------------------------------------------------------

_OPS: dict[str, Callable[..., Fraction]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "abs": abs,
    "max": max,
    "min": min,
    "le": lambda a, b: Fraction(int(a <= b)),
    "lt": lambda a, b: Fraction(int(a < b)),
    "ge": lambda a, b: Fraction(int(a >= b)),
    "gt": lambda a, b: Fraction(int(a > b)),
}


@dataclass(frozen=True)
class Step:
    register: str
    op: str  # "const" or a key of _OPS
    args: tuple[str, ...]
    value: Fraction


class Trace:
    """Builder for a straight-line exact-arithmetic program."""

    def __init__(self):
        self.steps: list[Step] = []
        self._values: dict[str, Fraction] = {}
        self._consts: dict[Fraction, str] = {}

    def _new(self, op: str, args: tuple[str, ...], value: Fraction, label: str | None) -> str:
        reg = label or f"r{len(self.steps)}"
        if reg in self._values:
            raise ValueError(f"register {reg} already defined")
        self.steps.append(Step(reg, op, args, value))
        self._values[reg] = value
        return reg

    def const(self, value, label: str | None = None) -> str:
        value = Fraction(value)
        if label is None and value in self._consts:
            return self._consts[value]
        reg = self._new("const", (), value, label)
        if label is None:
            self._consts[value] = reg
        return reg

    def op(self, name: str, *args: str, label: str | None = None) -> str:
        value = _OPS[name](*(self._values[a] for a in args))
        return self._new(name, args, value, label)

    def value(self, reg: str) -> Fraction:
        return self._values[reg]


def replay_steps(steps: Sequence[Step]) -> dict[str, Fraction]:
    """Recompute every register; raises if a recorded value disagrees."""
    values: dict[str, Fraction] = {}
    for st in steps:
        if st.op == "const":
            got = st.value
        else:
            got = _OPS[st.op](*(values[a] for a in st.args))
        if got != st.value:
            raise ValueError(f"replay mismatch at {st.register}: recorded {st.value}, computed {got}")
        values[st.register] = got
    return values


@dataclass(frozen=True)
class Certificate:
    kind: str
    premises: tuple[tuple[str, str], ...]
    conclusion: str
    steps: tuple[Step, ...] = field(repr=False)
    asserts: tuple[str, ...] = ()

    ok = True

    def replay(self) -> bool:
        """True iff the trace recomputes exactly and every asserted register is 1."""
        try:
            values = replay_steps(self.steps)
        except (ValueError, KeyError, ZeroDivisionError):
            return False
        return bool(self.asserts) and all(values.get(a) == 1 for a in self.asserts)

    def to_text(self) -> str:
        lines = [f"certificate {self.kind}"]
        lines += [f"premise {name} {digest}" for name, digest in self.premises]
        lines.append(f"conclusion {self.conclusion}")
        for st in self.steps:
            v = st.value
            lines.append(" ".join(["step", st.register, st.op, *st.args, "=", str(v.numerator), str(v.denominator)]))
        lines += [f"assert {a}" for a in self.asserts]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Certificate":
        kind, conclusion = None, ""
        premises, steps, asserts = [], [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            tag, _, rest = line.partition(" ")
            if tag == "certificate":
                kind = rest
            elif tag == "premise":
                name, digest = rest.split(" ", 1)
                premises.append((name, digest))
            elif tag == "conclusion":
                conclusion = rest
            elif tag == "step":
                head, _, tail = rest.partition(" = ")
                reg, op, *args = head.split()
                num, den = tail.split()
                steps.append(Step(reg, op, tuple(args), Fraction(int(num), int(den))))
            elif tag == "assert":
                asserts.append(rest)
            else:
                raise ValueError(f"unknown certificate line: {line!r}")
        if kind is None:
            raise ValueError("missing certificate header")
        return cls(kind, tuple(premises), conclusion, tuple(steps), tuple(asserts))


@dataclass(frozen=True)
class Rejection:
    kind: str
    reason: str
    blocking: str | None = None

    ok = False


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- rational balls of measures -----------------------------------------------------


def _strings(depth: int) -> list[str]:
    return ["".join(b) for b in itertools.product("01", repeat=depth)]


@dataclass(frozen=True)
class BasisBall:
    """Measures whose depth-k cylinder weights are all within ``radius`` of ``center``."""

    depth: int
    center: Mapping[str, Fraction]
    radius: Fraction

    def __post_init__(self):
        center = {str(k): Fraction(v) for k, v in self.center.items()}
        if set(center) != set(_strings(self.depth)):
            raise ValueError(f"center must assign a value to every string of length {self.depth}")
        if any(v < 0 for v in center.values()) or sum(center.values()) != 1:
            raise ValueError("center values must be nonnegative and sum to exactly 1")
        if Fraction(self.radius) <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", dict(sorted(center.items())))
        object.__setattr__(self, "radius", Fraction(self.radius))

    @classmethod
    def uniform(cls, depth: int, radius=Fraction(1, 2)) -> "BasisBall":
        return cls(depth, {w: Fraction(1, 2**depth) for w in _strings(depth)}, radius)

    def restrict(self, depth: int) -> dict[str, Fraction]:
        if depth > self.depth:
            raise PreconditionError("cannot restrict to a deeper level")
        out = {u: Fraction(0) for u in _strings(depth)}
        for w, v in self.center.items():
            out[w[:depth]] += v
        return out

    def mass(self, u: str) -> Fraction:
        """Center weight of the cylinder of ``u`` (|u| ≤ depth)."""
        return sum((v for w, v in self.center.items() if w.startswith(u)), Fraction(0))

    def contains_law(self, law: ConditionalLaw) -> bool:
        return all(abs(law.weight(w) - v) < self.radius for w, v in self.center.items())

    def to_text(self) -> str:
        lines = [f"depth {self.depth}", f"radius {self.radius.numerator} {self.radius.denominator}"]
        lines += [f"cell {w or '-'} {v.numerator} {v.denominator}" for w, v in self.center.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BasisBall":
        depth, radius, center = None, None, {}
        for line in text.split("\n"):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "depth":
                depth = int(parts[1])
            elif parts[0] == "radius":
                radius = Fraction(int(parts[1]), int(parts[2]))
            elif parts[0] == "cell":
                center["" if parts[1] == "-" else parts[1]] = Fraction(int(parts[2]), int(parts[3]))
        return cls(depth, center, radius)

    def digest(self) -> str:
        return _digest(self.to_text())


def table_law(depth: int, weights: Mapping[str, Fraction], name: str = "table") -> ConditionalLaw:
    """Law with the given depth-``depth`` cylinder weights and fair coin flips beyond."""
    weights = {w: Fraction(v) for w, v in weights.items()}
    masses: dict[str, Fraction] = {}
    for w, v in weights.items():
        for i in range(depth + 1):
            masses[w[:i]] = masses.get(w[:i], Fraction(0)) + v
    half = Fraction(1, 2)

    def rule(w: BitString) -> Fraction:
        if len(w) >= depth:
            return half
        u = w.text
        if masses[u] == 0:
            raise UndefinedConditional(f"{name}: conditional undefined at '{u}' (weight 0)")
        return masses[u + "1"] / masses[u]

    full = all(v > 0 for v in weights.values())
    return ConditionalLaw(name, rule, full_support=full, params={"depth": depth})


def extension_law(ball: BasisBall) -> ConditionalLaw:
    """The ball's center measure, extended by fair coin flips below its depth."""
    return table_law(ball.depth, ball.center, name=f"center(depth={ball.depth}, {ball.digest()})")


def ball_contains(outer: BasisBall, inner: BasisBall):
    """Certificate that ``inner`` ⊆ ``outer`` via d(restrict, center) + 2^Δ·ε_in ≤ ε_out.

    The condition is sufficient, not necessary, so a :class:`Rejection` means
    "not proven".
    """
    if inner.depth < outer.depth:
        raise PreconditionError("inner ball must be at least as deep as the outer ball")
    tr = Trace()
    restricted = inner.restrict(outer.depth)
    dist = tr.const(0)
    for u in _strings(outer.depth):
        diff = tr.op("abs", tr.op("sub", tr.const(restricted[u]), tr.const(outer.center[u])))
        dist = tr.op("max", dist, diff)
    factor = tr.const(2 ** (inner.depth - outer.depth))
    spread = tr.op("mul", factor, tr.const(inner.radius))
    lhs = tr.op("add", dist, spread, label="lhs")
    verdict = tr.op("le", lhs, tr.const(outer.radius), label="holds")
    if tr.value(verdict) != 1:
        return Rejection(
            "contains",
            f"distance {tr.value(dist)} + {2 ** (inner.depth - outer.depth)}·{inner.radius} exceeds {outer.radius}",
        )
    return Certificate(
        "contains",
        (("outer", outer.digest()), ("inner", inner.digest())),
        "d(restrict(inner), outer.center) + 2^(inner.depth - outer.depth) * inner.radius <= outer.radius",
        tuple(tr.steps),
        (verdict,),
    )


def bad_gap_certificate(mu: ConditionalLaw, W1: BasisBall):
    """Certificate that every ν in ``W1`` has |μ(s|w) − ν(s|w)| ≥ 1/5 for all w of length W1.depth − 1.

    Gaps for s = 0 and s = 1 coincide, so only s = 1 is traced.  Interval
    bounds: ν(w.1) ∈ [c₁ − ε, c₁ + ε] and ν(w) ∈ [m − 2ε, m + 2ε] with m = c₀ + c₁.
    """
    if W1.depth < 1:
        raise PreconditionError("bad-gap certificates need a ball of depth at least 1")
    k = W1.depth - 1
    tr = Trace()
    eps = tr.const(W1.radius)
    two_eps = tr.op("mul", tr.const(2), eps)
    zero, one, fifth = tr.const(0), tr.const(1), tr.const(FIFTH)
    asserts = []
    for w in _strings(k):
        c0 = tr.const(W1.center[w + "0"])
        c1 = tr.const(W1.center[w + "1"])
        mass = tr.op("add", c0, c1)
        den_lo = tr.op("sub", mass, two_eps)
        positive = tr.op("gt", den_lo, zero)
        if tr.value(positive) != 1:
            return Rejection("bad_gap", f"denominator lower bound {tr.value(den_lo)} is not positive", blocking=w)
        den_hi = tr.op("add", mass, two_eps)
        lo = tr.op("div", tr.op("max", zero, tr.op("sub", c1, eps)), den_hi)
        hi = tr.op("min", one, tr.op("div", tr.op("add", c1, eps), den_lo))
        mu1 = tr.const(mu.p1(w))
        gap = tr.op("max", tr.op("sub", lo, mu1), tr.op("sub", mu1, hi))
        holds = tr.op("ge", gap, fifth, label=f"gap_{w or 'root'}")
        if tr.value(holds) != 1:
            return Rejection(
                "bad_gap",
                f"conditional interval [{tr.value(lo)}, {tr.value(hi)}] comes within 1/5 of {tr.value(mu1)}",
                blocking=w,
            )
        asserts += [positive, holds]
    return Certificate(
        "bad_gap",
        (("mu", _digest(mu.name)), ("ball", W1.digest())),
        f"for all nu in ball, w of length {k}, s in {{0,1}}: |mu(s|w) - nu(s|w)| >= 1/5",
        tuple(tr.steps),
        tuple(asserts),
    )


def shrink_split(mu: ConditionalLaw, W: BasisBall) -> dict[str, Fraction]:
    """Depth k+1 center: 1/10 of each cell to the child μ finds more likely (ties → the 0 child)."""
    out = {}
    for w, v in W.center.items():
        if v <= 0:
            raise PreconditionError(f"ball center must be positive on every cell; '{w}' has weight {v}")
        if mu.p(0, w) >= mu.p(1, w):
            out[w + "0"], out[w + "1"] = TENTH * v, NINE_TENTHS * v
        else:
            out[w + "0"], out[w + "1"] = NINE_TENTHS * v, TENTH * v
    return out


def shrink_against(mu: ConditionalLaw, W: BasisBall):
    """Next ball in the chain with its containment and bad-gap certificates.

    The radius is the first of 10^-1, 10^-2, ..., 10^-64 for which both
    certificates pass.
    """
    if not mu.full_support:
        raise PreconditionError(f"{mu.name} must have full support")
    center = shrink_split(mu, W)
    last = None
    for m in range(1, MAX_SHRINK_EXPONENT + 1):
        W1 = BasisBall(W.depth + 1, center, Fraction(1, 10**m))
        contains = ball_contains(W, W1)
        if not contains.ok:
            last = contains
            continue
        bad = bad_gap_certificate(mu, W1)
        if not bad.ok:
            last = bad
            continue
        return W1, contains, bad
    raise ShrinkFailure(
        f"no radius down to 10^-{MAX_SHRINK_EXPONENT} passes; last blocked by {last.kind}: {last.reason}"
        + (f" at cell '{last.blocking}'" if last.blocking is not None else "")
    )


@dataclass(frozen=True)
class ChainLink:
    ball: BasisBall
    containment: Certificate | None
    bad_gap: Certificate | None


def meagre_chain(mu: ConditionalLaw, W0: BasisBall, t: int) -> list[ChainLink]:
    """W0 ⊇ W1 ⊇ ... ⊇ Wt; each later link carries its two certificates."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    links = [ChainLink(W0, None, None)]
    for _ in range(t):
        ball, contains, bad = shrink_against(mu, links[-1].ball)
        links.append(ChainLink(ball, contains, bad))
    return links


# -- super-bad depths -----------------------------------------------------------------


def bad_depths(mu: ConditionalLaw, nu: ConditionalLaw, K: int) -> list[bool]:
    """Entry k-1 tells whether |μ(1|w) − ν(1|w)| ≥ 1/5 for every w of length k, k = 1..K."""
    if not 0 <= K <= MAX_SUPERBAD_DEPTH:
        raise ValueError(f"K must lie in [0, {MAX_SUPERBAD_DEPTH}]")
    return [
        all(abs(mu.p1(w) - nu.p1(w)) >= FIFTH for w in _strings(k))
        for k in range(1, K + 1)
    ]


def superbad_count(mu: ConditionalLaw, nu: ConditionalLaw, K: int) -> int:
    """Number of k ≤ K for which more than half of the depths j ≤ k are bad."""
    flags = bad_depths(mu, nu, K)
    running = list(itertools.accumulate(flags))
    return sum(1 for k, bad in enumerate(running, start=1) if 2 * bad > k)


def superbad_certificate(mu: ConditionalLaw, nu: ConditionalLaw, K: int, at_least: int) -> Certificate | Rejection:
    """Traced version of :func:`superbad_count` asserting the count is ≥ ``at_least``."""
    tr = Trace()
    fifth, zero, one = tr.const(FIFTH), tr.const(0), tr.const(1)
    bad_total, count = zero, zero
    for k in range(1, K + 1):
        depth_bad = one
        for w in _strings(k):
            gap = tr.op("abs", tr.op("sub", tr.const(mu.p1(w)), tr.const(nu.p1(w))))
            depth_bad = tr.op("min", depth_bad, tr.op("ge", gap, fifth))
        bad_total = tr.op("add", bad_total, depth_bad)
        superbad = tr.op("gt", tr.op("mul", tr.const(2), bad_total), tr.const(k))
        count = tr.op("add", count, superbad)
    holds = tr.op("ge", count, tr.const(at_least), label="holds")
    if tr.value(holds) != 1:
        return Rejection("superbad_count", f"count {tr.value(count)} is below {at_least}")
    return Certificate(
        "superbad_count",
        (("mu", _digest(mu.name)), ("nu", _digest(nu.name))),
        f"superbad_count(mu, nu, {K}) >= {at_least}",
        tuple(tr.steps),
        (holds,),
    )


def perturb_within(ball: BasisBall, rng: random.Random, shrink=Fraction(1, 2)) -> dict[str, Fraction]:
    """A rational depth-k table strictly inside ``ball``: zero-sum moves between paired cells."""
    cells = list(ball.center)
    rng.shuffle(cells)
    out = dict(ball.center)
    for a, b in zip(cells[0::2], cells[1::2]):
        room = min(ball.radius * shrink, out[a], out[b])
        step = room * Fraction(rng.randint(-999, 999), 1000)
        out[a] += step
        out[b] -= step
    return out
