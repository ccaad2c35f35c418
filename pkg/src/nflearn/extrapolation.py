"""Next-bit extrapolators, finite-horizon learning verdicts and the adversarial constructions.

An extrapolator maps every finite bit string to a predicted next bit.  The
criteria here (NV, weak NV / NV(r), NV', NV'') are limit notions; at a finite
horizon we report evidence, never proofs:

* NV is ``consistent`` when the quiet tail window has no errors and
  ``inconclusive`` otherwise.  It is never ``refuted``.
* weak NV / NV(r) compares the correct-prediction density against ``r - tol``
  and requires the last three checkpoint densities to trend the right way.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Sequence

from .seq_core import (
    BitStream,
    BitString,
    DensityStats,
    IndexSet,
    TapeMemo,
    density_stats,
)

CONSISTENT = "consistent"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"

DEFAULT_CHECKPOINTS = 16
TREND_WINDOW = 3
DEFAULT_DEFEAT_BUDGET = 2**20


class ConstructionError(RuntimeError):
    """An adversarial construction could not complete within its budget."""

    def __init__(self, message: str, block: int | None = None):
        super().__init__(message)
        self.block = block


@dataclass(frozen=True, eq=False)
class Extrapolator:
    name: str
    predict: Callable[[BitString], int] = field(repr=False)
    params: Mapping = field(default_factory=dict)

    def __call__(self, w: BitString | str) -> int:
        if not isinstance(w, BitString):
            w = BitString(w)
        return self.predict(w)


@dataclass(frozen=True, eq=False)
class PartialExtrapolator:
    """Like :class:`Extrapolator` but ``predict`` may return ``None`` (undefined)."""

    name: str
    predict: Callable[[BitString], "int | None"] = field(repr=False)
    params: Mapping = field(default_factory=dict)

    def __call__(self, w: BitString | str) -> int | None:
        if not isinstance(w, BitString):
            w = BitString(w)
        return self.predict(w)

    @classmethod
    def lift(cls, m: Extrapolator) -> "PartialExtrapolator":
        return cls(m.name, m.predict, dict(m.params))


# -- basic extrapolators ---------------------------------------------------


def always(b: int) -> Extrapolator:
    b = int(b)
    return Extrapolator(f"always-{b}", lambda w: b, {"bit": b})


def last_bit(default: int = 1) -> Extrapolator:
    """Repeat the last bit seen; ``default`` on the empty string."""
    return Extrapolator("last-bit", lambda w: default if len(w) == 0 else w.last(), {"default": default})


def majority(k: int) -> Extrapolator:
    """Majority of the last ``k`` bits (fewer if the string is shorter); ties predict 1."""
    if k < 1:
        raise ValueError("majority order must be positive")

    def predict(w: BitString) -> int:
        window = w.tail_bits(k)
        return 1 if 2 * sum(window) >= len(window) else 0

    return Extrapolator(f"majority({k})", predict, {"k": k})


def table(mapping: Mapping[str, int], default: int = 0) -> Extrapolator:
    """Explicit finite lookup keyed by the input string's text, ``default`` elsewhere."""
    frozen = {str(key): int(v) for key, v in mapping.items()}
    longest = max((len(key) for key in frozen), default=-1)

    def predict(w: BitString) -> int:
        if len(w) > longest:
            return default
        return frozen.get(w.text, default)

    return Extrapolator("table", predict, {"table": dict(frozen), "default": default})


def evil_twin(m: Extrapolator) -> Extrapolator:
    return Extrapolator(f"evil-of({m.name})", lambda w: 1 - m.predict(w), {"base": m})


class _Family:
    """Finite family of streams with a cached 64-bit head per member for fast mismatch tests."""

    PROBE = 64

    def __init__(self, streams: Sequence[BitStream]):
        self.streams = tuple(streams)
        self._heads = [s.prefix(self.PROBE).head_bytes(self.PROBE) for s in self.streams]

    def first_match(self, w: BitString, limit: int) -> BitStream | None:
        n = len(w)
        head = w.head_bytes(self.PROBE)
        probe = len(head)
        for sigma, sigma_head in zip(self.streams[:limit], self._heads):
            # diverged members are never expanded to length n
            if head == sigma_head[:probe] and (n <= probe or w.is_prefix_of(sigma.prefix(n))):
                return sigma
        return None

    @property
    def names(self) -> str:
        return ", ".join(s.name for s in self.streams)


def combine_nv(m: Extrapolator, family: Sequence[BitStream]) -> Extrapolator:
    """Parity-switching combiner that NV-learns every family member and everything ``m`` does.

    On input w of length n the combiner replays itself over the proper
    prefixes of w and counts its own errors.  Even count: answer ``m(w)``.
    Odd count: answer the next bit of the least-index member σ_ℓ (ℓ ≤ n) with
    σ_ℓ[n] = w, falling back to ``m(w)`` when none matches.
    """
    fam = _Family(family)

    def choose(parity: int, w: BitString) -> int:
        if parity:
            sigma = fam.first_match(w, len(w))
            if sigma is not None:
                return sigma.bit(len(w) + 1)
        return m.predict(w)

    parity_of = TapeMemo(0, lambda parity, prefix, b: parity ^ (choose(parity, prefix) != b))

    def predict(w: BitString) -> int:
        return choose(parity_of(w), w)

    return Extrapolator(f"combine-nv({m.name}, [{fam.names}])", predict, {"base": m, "family": fam.streams})


def combine_weak(m: Extrapolator, family: Sequence[BitStream]) -> Extrapolator:
    """Consult family members with index k ≤ log2(n) only; otherwise defer to ``m``."""
    fam = _Family(family)

    def predict(w: BitString) -> int:
        n = len(w)
        window = n.bit_length() - 1 if n else 0
        sigma = fam.first_match(w, window) if window else None
        return m.predict(w) if sigma is None else sigma.bit(n + 1)

    return Extrapolator(f"combine-weak({m.name}, [{fam.names}])", predict, {"base": m, "family": fam.streams})


# -- guessing and error sets -------------------------------------------------


def guess_sequence(m: Extrapolator, w: BitString | str = "") -> BitStream:
    """The sequence that starts with ``w`` and then follows ``m``'s own predictions."""
    w = BitString(w)
    n = len(w)

    def rule(k: int, prefix: BitString) -> int:
        return w.bit(k) if k <= n else m.predict(prefix)

    return BitStream(rule, name=f"guess({m.name}, '{w.text}')")


def _prefix_source(sigma: BitStream | BitString, horizon: int) -> BitString:
    if isinstance(sigma, BitStream):
        return sigma.prefix(horizon)
    if len(sigma) < horizon:
        raise ValueError(f"finite sequence of length {len(sigma)} shorter than horizon {horizon}")
    return sigma.prefix(horizon)


def error_positions(m: Extrapolator, sigma: BitStream | BitString, horizon: int) -> list[int]:
    """Positions k in [1, horizon] with m(σ[k-1]) ≠ σ(k), ascending."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    s = _prefix_source(sigma, horizon)
    predict = m.predict
    return [k for k in range(1, horizon + 1) if predict(s.prefix(k - 1)) != s.bit(k)]


def _partial_outcomes(m: PartialExtrapolator, sigma, horizon: int) -> tuple[list[int], list[int]]:
    s = _prefix_source(sigma, horizon)
    wrong, undefined = [], []
    for k in range(1, horizon + 1):
        guess = m.predict(s.prefix(k - 1))
        if guess is None:
            undefined.append(k)
        elif guess != s.bit(k):
            wrong.append(k)
    return wrong, undefined


@dataclass(frozen=True)
class VerdictReport:
    criterion: str
    horizon: int
    error_positions: tuple[int, ...]
    last_error: int | None
    density_trajectory: DensityStats
    verdict: str
    params: Mapping = field(default_factory=dict)
    undefined_positions: tuple[int, ...] = ()

    def __post_init__(self):
        if any(not 1 <= k <= self.horizon for k in self.error_positions):
            raise ValueError("error positions must lie in [1, horizon]")
        expected_last = max(self.error_positions) if self.error_positions else None
        if self.last_error != expected_last:
            raise ValueError("last_error must equal the largest error position")

    @property
    def error_count(self) -> int:
        return len(self.error_positions)

    @property
    def correct_density(self) -> Fraction:
        return 1 - Fraction(len(self.error_positions), self.horizon)

    def to_record(self) -> dict:
        return {
            "criterion": self.criterion,
            "horizon": self.horizon,
            "verdict": self.verdict,
            "error_count": self.error_count,
            "last_error": self.last_error,
            "error_density": str(Fraction(self.error_count, self.horizon)),
            "error_positions": list(self.error_positions[:64]),
            "undefined_count": len(self.undefined_positions),
            "params": {k: str(v) for k, v in self.params.items()},
        }


def _nv_verdict(errors: Sequence[int], horizon: int, tail: int) -> str:
    quiet_from = horizon - tail
    return CONSISTENT if not errors or errors[-1] <= quiet_from else INCONCLUSIVE


def _default_tail(horizon: int, tail: int | None) -> int:
    tail = max(1, horizon // 4) if tail is None else tail
    if not 1 <= tail <= horizon:
        raise ValueError("tail must lie in [1, horizon]")
    return tail


def _report(criterion, horizon, errors, verdict, params, undefined=()) -> VerdictReport:
    errors = tuple(errors)
    return VerdictReport(
        criterion=criterion,
        horizon=horizon,
        error_positions=errors,
        last_error=errors[-1] if errors else None,
        density_trajectory=density_stats(errors, horizon, DEFAULT_CHECKPOINTS),
        verdict=verdict,
        params=params,
        undefined_positions=tuple(undefined),
    )


def check_nv(m: Extrapolator, sigma, horizon: int, tail: int | None = None) -> VerdictReport:
    tail = _default_tail(horizon, tail)
    errors = error_positions(m, sigma, horizon)
    return _report("NV", horizon, errors, _nv_verdict(errors, horizon, tail), {"tail": tail})


def weak_verdict(correct: Sequence[Fraction], final: Fraction, r: Fraction, tol: Fraction) -> str:
    """Shared decision rule for weak criteria.

    ``correct`` are success densities at the last checkpoints, ``final`` the
    density at the horizon.
    """
    rising = all(a <= b for a, b in zip(correct, correct[1:]))
    falling = all(a >= b for a, b in zip(correct, correct[1:]))
    if final >= r - tol and rising:
        return CONSISTENT
    if final < r - tol and falling:
        return REFUTED
    return INCONCLUSIVE


def check_weak_nv(
    m: Extrapolator,
    sigma,
    horizon: int,
    r: Fraction | int = 1,
    tol: Fraction | int = Fraction(1, 100),
) -> VerdictReport:
    r, tol = Fraction(r), Fraction(tol)
    if not 0 < r <= 1 or not 0 <= tol < r:
        raise ValueError("need 0 < r <= 1 and 0 <= tol < r")
    errors = error_positions(m, sigma, horizon)
    report = _report("NV(r)" if r != 1 else "weakNV", horizon, errors, INCONCLUSIVE, {"r": r, "tol": tol})
    correct = [1 - v for v in report.density_trajectory.last_values(TREND_WINDOW)]
    verdict = weak_verdict(correct, report.correct_density, r, tol)
    return replace(report, verdict=verdict)


def check_nv_prime(m: PartialExtrapolator, sigma, horizon: int, tail: int | None = None) -> VerdictReport:
    """Refuted as soon as any prediction along σ is undefined; otherwise as NV."""
    tail = _default_tail(horizon, tail)
    wrong, undefined = _partial_outcomes(m, sigma, horizon)
    verdict = REFUTED if undefined else _nv_verdict(wrong, horizon, tail)
    combined = sorted(wrong + undefined)
    return _report("NVprime", horizon, combined, verdict, {"tail": tail}, undefined)


def check_nv_dprime(m: PartialExtrapolator, sigma, horizon: int, tail: int | None = None) -> VerdictReport:
    """Undefined predictions count as errors; verdict as NV over the combined set."""
    tail = _default_tail(horizon, tail)
    wrong, undefined = _partial_outcomes(m, sigma, horizon)
    combined = sorted(wrong + undefined)
    return _report("NVdoubleprime", horizon, combined, _nv_verdict(combined, horizon, tail), {"tail": tail}, undefined)


# -- adversaries -----------------------------------------------------------


def ones_zero_blocks(
    accept: Callable[[BitString], bool], budget: int, label: str, what: str
) -> BitStream:
    """σ = 1^{n1}.0.1^{n2}.0... with n_j the least n > 2^j such that ``accept(prefix.1^n)``.

    Blocks are built on demand; a block whose search exceeds ``budget``
    candidates raises :class:`ConstructionError` when the stream is read
    that far.
    """
    state = {"failure": None}

    def blocks() -> Iterator[int]:
        u = BitString()
        for j in itertools.count(1):
            base = len(u) + 2**j
            w = u.extend([1] * 2**j)
            n = None
            tried = 0
            while n is None and tried < budget:
                chunk = min(4096, budget - tried)
                w = w.extend(bytes([1]) * chunk)
                for cand in range(base + tried + 1, base + tried + chunk + 1):
                    if accept(w.prefix(cand)):
                        n = cand - len(u)
                        break
                tried += chunk
            if n is None:
                state["failure"] = ConstructionError(
                    f"{label}: no n in ({2**j}, {2**j + budget}] with {what} at block {j}",
                    block=j,
                )
                return
            w = w.prefix(len(u) + n)
            yield from [1] * n
            yield 0
            u = w.append(0)

    gen = None

    def rule(k: int, prefix: BitString) -> int:
        nonlocal gen
        if state["failure"] is not None:
            raise state["failure"]
        if gen is None:
            gen = blocks()
        b = next(gen, None)
        if b is None:
            raise state["failure"]
        return b

    return BitStream(rule, name=label)


def defeat_nv(m: Extrapolator, budget: int = DEFAULT_DEFEAT_BUDGET) -> BitStream:
    """Stream on which every 0 is an error of ``m``: blocks end where ``m`` predicts 1."""
    return ones_zero_blocks(lambda w: m.predict(w) == 1, budget, f"defeat-nv({m.name})", "prediction 1")


def zero_positions(sigma, horizon: int) -> list[int]:
    s = _prefix_source(sigma, horizon)
    return [k for k in range(1, horizon + 1) if s.bit(k) == 0]


def adversarial_pair(
    m: Extrapolator,
    w: BitString | str,
    spice: BitStream,
    spikes: IndexSet,
    adaptive: bool = True,
) -> tuple[BitStream, BitStream]:
    """Weakly learnable σ* and non-learnable σ† inside the cylinder of ``w``.

    Both start with ``w`` and carry ``spice.bit(ℓ)`` at the ℓ-th spike.
    Elsewhere σ* follows m.  σ† plays the complement of m's prediction on
    σ†'s own prefix when ``adaptive`` (so m is right on σ† only at spikes);
    with ``adaptive=False`` it is the literal bitwise complement of σ*.
    """
    w = BitString(w)
    n = len(w)
    first = next(iter(spikes), None)
    if first is not None and first <= n:
        raise ValueError("spike positions must exceed |w|")

    def fixed(k: int) -> int | None:
        if k <= n:
            return w.bit(k)
        if k in spikes:
            return spice.bit(spikes.rank(k))
        return None

    def star_rule(k: int, prefix: BitString) -> int:
        b = fixed(k)
        return m.predict(prefix) if b is None else b

    star = BitStream(star_rule, name=f"pair*({m.name}, '{w.text}')")

    def dagger_rule(k: int, prefix: BitString) -> int:
        b = fixed(k)
        if b is not None:
            return b
        return 1 - (m.predict(prefix) if adaptive else star.bit(k))

    dagger = BitStream(dagger_rule, name=f"pair+({m.name}, '{w.text}')")
    return star, dagger


def coarse_block_double(sigma0: BitStream) -> BitStream:
    """2 copies of σ0(1), then 4 copies of σ0(2), ..., 2^k copies of σ0(k)."""

    def rule(p: int, _: BitString) -> int:
        # block k covers positions 2^k - 1 .. 2^(k+1) - 2
        return sigma0.bit((p + 1).bit_length() - 1)

    return BitStream(rule, name=f"coarse({sigma0.name})")


def disagreement_positions(a: Extrapolator, b: Extrapolator, sigma, horizon: int) -> list[int]:
    s = _prefix_source(sigma, horizon)
    return [k for k in range(1, horizon + 1) if a.predict(s.prefix(k - 1)) != b.predict(s.prefix(k - 1))]
