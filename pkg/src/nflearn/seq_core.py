"""Bit strings, memoized bit streams, index sets and density bookkeeping.

Positions are 1-indexed throughout: ``bit(1)`` is the first bit of a string
or stream, and ``prefix(n)`` holds bits ``1..n``.

A :class:`BitString` is an immutable view ``(tape, n)`` onto an append-only
buffer.  Streams and sequential constructions share one tape, so taking the
prefix of a long stream or extending the newest view by one bit costs O(1)
instead of a copy.  Bits below a tape's length never change, which is what
keeps every outstanding view valid.
"""

from __future__ import annotations

import bisect
import itertools
import math
import os
import threading
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator

__all__ = [
    "BitString",
    "BitStream",
    "IndexSet",
    "DensityStats",
    "MemoCapExceeded",
    "TapeMemo",
    "checkpoints",
    "density_upto",
    "density_stats",
    "stream_from_string",
    "constant_stream",
    "alternating_stream",
    "periodic_stream",
    "sparse_zeros_stream",
    "DEFAULT_CACHE_CAP",
]


def _default_cache_cap() -> int:
    return int(os.environ.get("NFLEARN_CACHE_CAP", 2**20))


DEFAULT_CACHE_CAP = _default_cache_cap()


class MemoCapExceeded(RuntimeError):
    """A stream was asked for more bits than its memoization cap allows."""


class _Tape:
    __slots__ = ("bits", "ones", "lock", "shared", "__weakref__")

    def __init__(self, bits: Iterable[int] = (), shared: bool = True):
        self.bits = bytearray()
        self.ones = [0]
        self.lock = threading.Lock()
        # False for tapes owned by a BitStream: only the stream may append
        self.shared = shared
        for b in bits:
            self.push(b)

    def push(self, b: int) -> None:
        self.bits.append(b)
        self.ones.append(self.ones[-1] + b)

    def __len__(self) -> int:
        return len(self.bits)


def _coerce_bit(b) -> int:
    if b in (0, 1) or b in ("0", "1"):
        return int(b)
    raise ValueError(f"not a bit: {b!r}")


class BitString:
    """Immutable finite binary string.

    Accepts a ``str`` of '0'/'1', any iterable of bits, or another BitString.
    Equality and hashing are by content.
    """

    __slots__ = ("_tape", "_n")

    def __init__(self, bits: "str | Iterable[int] | BitString" = ""):
        if isinstance(bits, BitString):
            self._tape, self._n = bits._tape, bits._n
            return
        self._tape = _Tape(_coerce_bit(b) for b in bits)
        self._n = len(self._tape)

    @classmethod
    def _view(cls, tape: _Tape, n: int) -> "BitString":
        obj = cls.__new__(cls)
        obj._tape = tape
        obj._n = n
        return obj

    def __len__(self) -> int:
        return self._n

    @property
    def length(self) -> int:
        return self._n

    def bit(self, k: int) -> int:
        """The k-th bit, 1-indexed."""
        if not 1 <= k <= self._n:
            raise IndexError(f"bit {k} out of range for length {self._n}")
        return self._tape.bits[k - 1]

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(self._tape.bits[: self._n])

    def __iter__(self) -> Iterator[int]:
        return iter(self._tape.bits[: self._n])

    @property
    def text(self) -> str:
        return self._tape.bits[: self._n].translate(_TO_ASCII).decode("ascii")

    def __str__(self) -> str:
        return self.text

    def __repr__(self) -> str:
        if self._n > 64:
            return f"BitString('{self.prefix(60).text}...', length={self._n})"
        return f"BitString('{self.text}')"

    def __eq__(self, other) -> bool:
        if isinstance(other, str):
            other = BitString(other)
        if not isinstance(other, BitString):
            return NotImplemented
        if self._n != other._n:
            return False
        if self._tape is other._tape:
            return True
        return self._tape.bits[: self._n] == other._tape.bits[: other._n]

    def __hash__(self) -> int:
        return hash(bytes(self._tape.bits[: self._n]))

    def __getitem__(self, item):
        # slicing only; use bit() for single positions to keep 1-indexing explicit
        if not isinstance(item, slice):
            raise TypeError("BitString supports slicing only; use .bit(k)")
        start, stop, step = item.indices(self._n)
        if start == 0 and step == 1:
            return self.prefix(max(stop, 0))
        return BitString(self._tape.bits[item][: len(range(start, stop, step))])

    def prefix(self, n: int) -> "BitString":
        if not 0 <= n <= self._n:
            raise IndexError(f"prefix length {n} out of range for length {self._n}")
        return BitString._view(self._tape, n)

    def last(self) -> int | None:
        return self._tape.bits[self._n - 1] if self._n else None

    def tail_bits(self, k: int) -> bytes:
        """The last ``min(k, len)`` bits as raw 0/1 bytes."""
        return bytes(self._tape.bits[max(0, self._n - k) : self._n])

    def head_bytes(self, k: int) -> bytes:
        """The first ``min(k, len)`` bits as raw 0/1 bytes."""
        return bytes(self._tape.bits[: min(k, self._n)])

    def count_ones(self) -> int:
        return self._tape.ones[self._n]

    def count_zeros(self) -> int:
        return self._n - self._tape.ones[self._n]

    def is_prefix_of(self, other: "BitString") -> bool:
        if self._n > other._n:
            return False
        if self._tape is other._tape:
            return True
        return _buffers_agree(self._tape.bits, other._tape.bits, self._n)

    def extend(self, more: "str | Iterable[int] | BitString") -> "BitString":
        """Concatenation ``self.more``.

        Appends in place when this view ends at its tape's end; otherwise
        copies.  Either way the result is a fresh immutable value.
        """
        if isinstance(more, BitString):
            more_bits = more._tape.bits[: more._n]
        else:
            more_bits = [_coerce_bit(b) for b in more]
        tape = self._tape
        with tape.lock:
            if tape.shared and len(tape) == self._n:
                for b in more_bits:
                    tape.push(b)
                return BitString._view(tape, len(tape))
        fresh = _Tape(itertools.chain(tape.bits[: self._n], more_bits))
        return BitString._view(fresh, len(fresh))

    def append(self, b: int) -> "BitString":
        return self.extend((b,))

    __add__ = extend

    def __radd__(self, other):
        return BitString(other).extend(self)

    def complement(self) -> "BitString":
        return BitString(1 - b for b in self)

    def tape_key(self) -> tuple[object, int]:
        """(tape, length) pair identifying this view for sequential memo tables."""
        return self._tape, self._n


_TO_ASCII = bytes.maketrans(b"\x00\x01", b"01")


def _buffers_agree(a: bytearray, b: bytearray, n: int) -> bool:
    # cheap early exit first: most mismatches in practice happen early
    probe = min(n, 64)
    if a[:probe] != b[:probe]:
        return False
    return a[:n] == b[:n]


class TapeMemo:
    """Per-tape cache of a left-to-right scan ``value[j] = step(value[j-1], prefix_{j-1}, bit_j)``.

    ``value[0]`` is ``init``.  Lookups on a view of length n extend the scan
    of that view's tape up to n; views of the same tape share the work, which
    turns repeated queries along a growing stream into amortized O(1).
    """

    def __init__(self, init, step: Callable):
        self._init = init
        self._step = step
        self._tables: "weakref.WeakKeyDictionary[_Tape, list]" = weakref.WeakKeyDictionary()
        self._lock = threading.Lock()

    def __call__(self, w: BitString):
        tape, n = w._tape, w._n
        table = self._tables.get(tape)
        if table is not None and n < len(table):
            return table[n]
        if table is None:
            with self._lock:
                table = self._tables.setdefault(tape, [self._init])
        # extension is deterministic, so a concurrent duplicate append is harmless
        while len(table) <= n:
            j = len(table)
            table.append(self._step(table[j - 1], BitString._view(tape, j - 1), tape.bits[j - 1]))
        return table[n]


class BitStream:
    """Lazy, memoized infinite binary sequence.

    ``rule(n, prefix)`` returns bit n given ``prefix`` = bits 1..n-1.  Once a
    bit has been produced it is cached, so repeated queries are identical
    even when the rule itself is stateful.
    """

    def __init__(
        self,
        rule: Callable[[int, BitString], int],
        name: str = "stream",
        cap: int | None = None,
    ):
        self._rule = rule
        self.name = name
        self.cap = DEFAULT_CACHE_CAP if cap is None else cap
        self._tape = _Tape(shared=False)
        self._lock = threading.RLock()

    @classmethod
    def from_iter(cls, factory: Callable[[], Iterable[int]], name: str = "stream", cap: int | None = None):
        """Stream backed by a single pass over ``factory()``."""
        it = None

        def rule(n: int, prefix: BitString) -> int:
            nonlocal it
            if it is None:
                it = iter(factory())
            return next(it)

        return cls(rule, name=name, cap=cap)

    def _fill(self, n: int) -> None:
        if n > self.cap:
            raise MemoCapExceeded(f"{self.name}: prefix({n}) exceeds memoization cap {self.cap}")
        tape = self._tape
        bits, rule, view = tape.bits, self._rule, BitString._view
        with self._lock:
            while len(bits) < n:
                k = len(bits) + 1
                b = _coerce_bit(rule(k, view(tape, k - 1)))
                with tape.lock:
                    tape.push(b)

    def prefix(self, n: int) -> BitString:
        if n < 0:
            raise ValueError("prefix length must be nonnegative")
        self._fill(n)
        return BitString._view(self._tape, n)

    def bit(self, n: int) -> int:
        if n < 1:
            raise IndexError("streams are 1-indexed")
        self._fill(n)
        return self._tape.bits[n - 1]

    def __repr__(self) -> str:
        return f"BitStream({self.name!r})"


def stream_from_string(w: BitString | str, tail: BitStream) -> BitStream:
    w = BitString(w)
    n = len(w)

    def rule(k: int, prefix: BitString) -> int:
        return w.bit(k) if k <= n else tail.bit(k - n)

    return BitStream(rule, name=f"{w.text}.{tail.name}" if n else tail.name)


def constant_stream(b: int) -> BitStream:
    b = _coerce_bit(b)
    return BitStream(lambda n, _: b, name=f"all-{'ones' if b else 'zeros'}")


def alternating_stream(first: int = 0) -> BitStream:
    first = _coerce_bit(first)
    return BitStream(lambda n, _: first ^ ((n - 1) & 1), name="alternating" if first == 0 else "alternating-1")


def periodic_stream(pattern: BitString | str) -> BitStream:
    pattern = BitString(pattern)
    if not len(pattern):
        raise ValueError("periodic pattern must be non-empty")
    p = len(pattern)
    return BitStream(lambda n, _: pattern.bit((n - 1) % p + 1), name=f"periodic({pattern.text})")


def sparse_zeros_stream(zeros: "IndexSet", spice: BitStream | None = None) -> BitStream:
    """All ones except at members of ``zeros``.

    With ``spice``, the ℓ-th member carries ``spice.bit(ℓ)`` instead of 0.
    """

    def rule(n: int, _: BitString) -> int:
        if n not in zeros:
            return 1
        return 0 if spice is None else spice.bit(zeros.rank(n))

    return BitStream(rule, name=f"ones-except({zeros.name})")


class IndexSet:
    """Decidable set of positive naturals with a strictly increasing enumerator.

    ``contains`` and ``enumerate`` must agree; :meth:`rank` and membership
    lookups use the enumerator's cached output when no predicate is given.
    """

    def __init__(
        self,
        enumerate: Callable[[], Iterable[int]],
        contains: Callable[[int], bool] | None = None,
        name: str = "indexset",
    ):
        self._enumerate = enumerate
        self._contains = contains
        self.name = name
        self._members: list[int] = []
        self._iter: Iterator[int] | None = None
        self._exhausted = False
        self._lock = threading.Lock()

    def _grow_to(self, n: int) -> None:
        with self._lock:
            if self._iter is None:
                self._iter = iter(self._enumerate())
            while not self._exhausted and (not self._members or self._members[-1] < n):
                nxt = next(self._iter, None)
                if nxt is None:
                    self._exhausted = True
                    break
                if nxt < 1 or (self._members and nxt <= self._members[-1]):
                    raise ValueError(f"{self.name}: enumerator must be strictly increasing over positive naturals")
                self._members.append(nxt)

    def __contains__(self, k: int) -> bool:
        if self._contains is not None:
            return bool(self._contains(k))
        self._grow_to(k)
        i = bisect.bisect_left(self._members, k)
        return i < len(self._members) and self._members[i] == k

    def members_upto(self, n: int) -> list[int]:
        self._grow_to(n)
        return self._members[: bisect.bisect_right(self._members, n)]

    def rank(self, k: int) -> int:
        """Number of members ≤ k (so the ℓ-th member has rank ℓ)."""
        return len(self.members_upto(k))

    def __iter__(self) -> Iterator[int]:
        return iter(self._enumerate())

    def __repr__(self) -> str:
        return f"IndexSet({self.name!r})"

    # common schedules

    @classmethod
    def all(cls) -> "IndexSet":
        return cls(lambda: itertools.count(1), lambda k: k >= 1, name="all")

    @classmethod
    def empty(cls) -> "IndexSet":
        return cls(lambda: iter(()), lambda k: False, name="empty")

    @classmethod
    def powers(cls, base: int = 10, offset: int = 0) -> "IndexSet":
        """{offset + base**ℓ : ℓ ≥ 1}."""
        if base < 2:
            raise ValueError("base must be at least 2")

        def contains(k: int) -> bool:
            k -= offset
            if k < base:
                return False
            while k % base == 0:
                k //= base
            return k == 1

        name = f"pow{base}" if not offset else f"pow{base}+{offset}"
        return cls(lambda: (offset + base**l for l in itertools.count(1)), contains, name=name)

    @classmethod
    def squares(cls, offset: int = 0) -> "IndexSet":
        """{offset + ℓ² : ℓ ≥ 1}."""

        def contains(k: int) -> bool:
            k -= offset
            return k >= 1 and math.isqrt(k) ** 2 == k

        name = "squares" if not offset else f"squares+{offset}"
        return cls(lambda: (offset + l * l for l in itertools.count(1)), contains, name=name)

    @classmethod
    def from_list(cls, items: Iterable[int]) -> "IndexSet":
        items = sorted(set(items))
        frozen = frozenset(items)
        return cls(lambda: iter(items), frozen.__contains__, name=f"list{items[:4]}")

    def shifted(self, offset: int) -> "IndexSet":
        base = self
        contains = (lambda k: (k - offset) in base) if self._contains is not None else None
        return IndexSet(lambda: (k + offset for k in base), contains, name=f"{self.name}+{offset}")


def density_upto(s: IndexSet, n: int) -> Fraction:
    if n < 1:
        raise ValueError("density_upto needs n >= 1")
    return Fraction(len(s.members_upto(n)), n)


def checkpoints(horizon: int, count: int) -> list[int]:
    """Geometric ladder of ``count`` strictly increasing indices ending at ``horizon``.

    Targets are ``horizon ** (i / count)``; collisions at the low end are
    pushed up by one and the top is capped so the last value is always
    ``horizon``.  When ``count == horizon`` this is just ``1..horizon``.
    """
    if count < 1 or horizon < count:
        raise ValueError("need 1 <= count <= horizon")
    targets = [_int_root_power(horizon, i, count) for i in range(1, count + 1)]
    out: list[int] = []
    for i, t in enumerate(targets):
        lo = out[-1] + 1 if out else 1
        hi = horizon - (count - 1 - i)
        out.append(min(max(t, lo), hi))
    return out


def _int_root_power(horizon: int, i: int, count: int) -> int:
    # horizon**(i/count), exact when horizon is a perfect count-th power
    root = round(horizon ** (1 / count))
    if root**count == horizon:
        return root**i
    return max(1, round(horizon ** (i / count)))


@dataclass(frozen=True)
class DensityStats:
    """Count of hits up to ``horizon`` plus sampled running densities."""

    horizon: int
    hits: int
    trajectory: tuple[tuple[int, Fraction], ...] = field(default=())

    def __post_init__(self):
        if not 0 <= self.hits <= self.horizon:
            raise ValueError("hits must lie in [0, horizon]")
        for _, v in self.trajectory:
            if not 0 <= v <= 1:
                raise ValueError("trajectory densities must lie in [0, 1]")

    @property
    def density(self) -> Fraction:
        return Fraction(self.hits, self.horizon) if self.horizon else Fraction(0)

    def last_values(self, k: int) -> list[Fraction]:
        return [v for _, v in self.trajectory[-k:]]


def density_stats(hit_positions: Iterable[int], horizon: int, count: int = 16) -> DensityStats:
    """Running density of ``hit_positions`` (subset of 1..horizon) at a checkpoint ladder."""
    hits = sorted(hit_positions)
    if hits and (hits[0] < 1 or hits[-1] > horizon):
        raise ValueError("hit positions must lie in [1, horizon]")
    ladder = checkpoints(horizon, min(count, horizon))
    traj = []
    j = 0
    for c in ladder:
        while j < len(hits) and hits[j] <= c:
            j += 1
        traj.append((c, Fraction(j, c)))
    return DensityStats(horizon=horizon, hits=len(hits), trajectory=tuple(traj))
