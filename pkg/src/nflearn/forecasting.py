"""Finite-horizon evaluators for forecasters against sources.

Gaps are indexed by prefix length: ``gaps[n]`` compares the two laws'
conditionals after the first ``n`` bits of the path, for n = 0..H-1.
Statements that hold "with probability 1" are tested by seed majorities.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .extrapolation import (
    CONSISTENT,
    DEFAULT_CHECKPOINTS,
    DEFAULT_DEFEAT_BUDGET,
    INCONCLUSIVE,
    REFUTED,
    TREND_WINDOW,
    ones_zero_blocks,
    weak_verdict,
)
from .measures import ConditionalLaw, PreconditionError, sample
from .seq_core import BitStream, BitString, checkpoints

SEED_QUORUM = Fraction(9, 10)
WEAK_TOLERANCE = Fraction(1, 100)
MAX_MERGE_DEPTH = 10
NINE_TENTHS = Fraction(9, 10)
MERGE_CAVEAT = (
    "total variation over the depth-d cylinder algebra only; "
    "a lower bound on the supremum over all events, diagnostic not proof"
)


@dataclass(frozen=True)
class GapTrajectory:
    horizon: int
    epsilon: Fraction
    gaps: tuple[Fraction, ...] = field(repr=False)
    good_set_density: Fraction
    trajectory: tuple[tuple[int, Fraction], ...]

    def __post_init__(self):
        if any(not 0 <= g <= 1 for g in self.gaps):
            raise ValueError("gaps must lie in [0, 1]")
        if not 0 <= self.good_set_density <= 1:
            raise ValueError("good_set_density must lie in [0, 1]")

    @property
    def final_gap(self) -> Fraction:
        return self.gaps[-1]

    def bad_positions(self) -> list[int]:
        """Prefix lengths n with gap ≥ ε."""
        return [n for n, g in enumerate(self.gaps) if g >= self.epsilon]


def require_forecaster(mu: ConditionalLaw) -> None:
    if not mu.full_support:
        raise PreconditionError(f"forecaster {mu.name} must have full support")


def gap_trajectory(
    mu: ConditionalLaw,
    lam: ConditionalLaw,
    sigma: BitString,
    epsilon,
    count: int = DEFAULT_CHECKPOINTS,
) -> GapTrajectory:
    require_forecaster(mu)
    sigma = BitString(sigma)
    if len(sigma) < 1:
        raise PreconditionError("path must be non-empty")
    epsilon = Fraction(epsilon)
    horizon = len(sigma)
    gaps = tuple(abs(mu.p1(sigma.prefix(n)) - lam.p1(sigma.prefix(n))) for n in range(horizon))
    good_running = list(itertools.accumulate(1 if g < epsilon else 0 for g in gaps))
    trajectory = tuple((c, Fraction(good_running[c - 1], c)) for c in checkpoints(horizon, count))
    return GapTrajectory(
        horizon=horizon,
        epsilon=epsilon,
        gaps=gaps,
        good_set_density=Fraction(good_running[-1], horizon),
        trajectory=trajectory,
    )


@dataclass(frozen=True)
class SeedResult:
    seed: int
    verdict: str
    trajectory: object


@dataclass(frozen=True)
class ForecastReport:
    criterion: str
    verdict: str
    per_seed: tuple[SeedResult, ...]
    params: dict

    def seed_verdicts(self) -> dict[int, str]:
        return {r.seed: r.verdict for r in self.per_seed}

    def to_record(self) -> dict:
        return {
            "criterion": self.criterion,
            "verdict": self.verdict,
            "params": {k: str(v) for k, v in self.params.items()},
            "seeds": [{"seed": r.seed, "verdict": r.verdict} for r in self.per_seed],
        }


def aggregate_seeds(verdicts: Sequence[str]) -> str:
    total = len(verdicts)
    for label in (CONSISTENT, REFUTED):
        if sum(v == label for v in verdicts) >= SEED_QUORUM * total:
            return label
    return INCONCLUSIVE


def resolve_tail(horizon: int, tail: int | None) -> int:
    tail = horizon // 4 if tail is None else tail
    if not 1 <= tail <= horizon:
        raise ValueError("tail must lie in [1, horizon]")
    return tail


def _interval_maxima(values: Sequence[Fraction], horizon: int) -> list[Fraction]:
    """Maximum of ``values[n]`` over consecutive checkpoint intervals [c_{i-1}, c_i)."""
    ladder = [0] + checkpoints(horizon, DEFAULT_CHECKPOINTS)
    return [max(values[a:b]) for a, b in zip(ladder, ladder[1:]) if b > a]


def nc_seed_verdict(traj: GapTrajectory, tail: int) -> str:
    eps = traj.epsilon
    if all(g < eps for g in traj.gaps[-tail:]):
        return CONSISTENT
    recent = _interval_maxima(traj.gaps, traj.horizon)[-TREND_WINDOW:]
    if all(v >= 2 * eps for v in recent) and recent[-1] >= recent[0]:
        return REFUTED
    return INCONCLUSIVE


def _paths(lam: ConditionalLaw, seeds: Sequence[int], horizon: int):
    if not seeds:
        raise ValueError("at least one seed is required")
    for seed in seeds:
        yield seed, sample(lam, seed, horizon)


def check_nc(mu, lam, seeds, horizon: int, epsilon, tail: int | None = None) -> ForecastReport:
    """Consistent iff ≥ 90% of seeds keep every tail gap below ε.

    Refuted per seed when each of the last three checkpoint intervals
    contains a gap ≥ 2ε and the latest such maximum has not shrunk.
    """
    require_forecaster(mu)
    tail = resolve_tail(horizon, tail)
    results = []
    for seed, path in _paths(lam, seeds, horizon):
        traj = gap_trajectory(mu, lam, path, epsilon)
        results.append(SeedResult(seed, nc_seed_verdict(traj, tail), traj))
    return ForecastReport(
        "NC",
        aggregate_seeds([r.verdict for r in results]),
        tuple(results),
        {"mu": mu.name, "lambda": lam.name, "horizon": horizon, "epsilon": Fraction(epsilon),
         "tail": tail, "seed_quorum": SEED_QUORUM, "trend_window": TREND_WINDOW},
    )


def check_weak_nc(mu, lam, seeds, horizon: int, epsilon, r, tol=WEAK_TOLERANCE) -> ForecastReport:
    """Per seed, the density of sub-ε gaps is judged with the shared weak rule."""
    require_forecaster(mu)
    r, tol = Fraction(r), Fraction(tol)
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    results = []
    for seed, path in _paths(lam, seeds, horizon):
        traj = gap_trajectory(mu, lam, path, epsilon)
        recent = [v for _, v in traj.trajectory[-TREND_WINDOW:]]
        results.append(SeedResult(seed, weak_verdict(recent, traj.good_set_density, r, tol), traj))
    return ForecastReport(
        "weakNC",
        aggregate_seeds([x.verdict for x in results]),
        tuple(results),
        {"mu": mu.name, "lambda": lam.name, "horizon": horizon, "epsilon": Fraction(epsilon),
         "r": r, "tolerance": tol, "seed_quorum": SEED_QUORUM, "trend_window": TREND_WINDOW},
    )


# -- merging -----------------------------------------------------------------


def _leaf_conditionals(law: ConditionalLaw, prefix: BitString, d: int) -> list[Fraction]:
    """law(prefix.v)/law(prefix) for v ∈ 𝓑^d in lexicographic order, by products of conditionals."""
    level = [(prefix, Fraction(1))]
    for _ in range(d):
        nxt = []
        for w, mass in level:
            q = law.p1(w) if mass else Fraction(0)
            nxt.append((w.append(0), mass * (1 - q)))
            nxt.append((w.append(1), mass * q))
        level = nxt
    return [mass for _, mass in level]


def _require_positive(law: ConditionalLaw, prefix: BitString) -> None:
    if not law.supports(prefix):
        raise PreconditionError(f"{law.name} gives zero weight to the prefix of length {len(prefix)}")


def merge_profile(mu, lam, prefix, dmax: int) -> list[Fraction]:
    """Depth-d conditional total variation for d = 1..dmax, from one depth-dmax table."""
    if not 1 <= dmax <= MAX_MERGE_DEPTH:
        raise ValueError(f"depth must lie in [1, {MAX_MERGE_DEPTH}]")
    prefix = BitString(prefix)
    _require_positive(mu, prefix)
    _require_positive(lam, prefix)
    diff = [a - b for a, b in zip(_leaf_conditionals(mu, prefix, dmax), _leaf_conditionals(lam, prefix, dmax))]
    profile = []
    while len(diff) > 1:
        profile.append(sum(abs(x) for x in diff) / 2)
        diff = [diff[i] + diff[i + 1] for i in range(0, len(diff), 2)]
    return profile[::-1]


def merge_depth(mu, lam, prefix, d: int) -> Fraction:
    """½ Σ_v |μ(prefix.v)/μ(prefix) − λ(prefix.v)/λ(prefix)| over v of length d."""
    if d == 0:
        return Fraction(0)
    return merge_profile(mu, lam, prefix, d)[-1]


@dataclass(frozen=True)
class MergeReport:
    depth: int
    trajectory: tuple[tuple[int, Fraction], ...]
    caveat: str = MERGE_CAVEAT

    def __post_init__(self):
        if any(not 0 <= v <= 1 for _, v in self.trajectory):
            raise ValueError("merge values must lie in [0, 1]")


def merge_trajectory(mu, lam, path: BitString, d: int, count: int = DEFAULT_CHECKPOINTS) -> MergeReport:
    return MergeReport(d, tuple((c, merge_depth(mu, lam, path.prefix(c), d)) for c in checkpoints(len(path), count)))


def strong_seed_verdict(report: MergeReport, horizon: int, tail: int, eps: Fraction) -> str:
    tail_values = [v for c, v in report.trajectory if c >= horizon - tail]
    if all(v < eps for v in tail_values):
        return CONSISTENT
    recent = [v for _, v in report.trajectory[-TREND_WINDOW:]]
    if all(v >= 2 * eps for v in recent) and recent[-1] >= recent[0]:
        return REFUTED
    return INCONCLUSIVE


def check_strong_nc(mu, lam, seeds, horizon: int, d: int, epsilon, tail: int | None = None) -> ForecastReport:
    """Depth-d merging diagnostic at checkpoints of sampled paths; see :data:`MERGE_CAVEAT`."""
    require_forecaster(mu)
    eps = Fraction(epsilon)
    tail = resolve_tail(horizon, tail)
    results = []
    for seed, path in _paths(lam, seeds, horizon):
        report = merge_trajectory(mu, lam, path, d)
        results.append(SeedResult(seed, strong_seed_verdict(report, horizon, tail, eps), report))
    return ForecastReport(
        f"strongNC(depth={d})",
        aggregate_seeds([x.verdict for x in results]),
        tuple(results),
        {"mu": mu.name, "lambda": lam.name, "horizon": horizon, "depth": d, "epsilon": eps,
         "tail": tail, "seed_quorum": SEED_QUORUM, "caveat": MERGE_CAVEAT},
    )


def defeat_nc(nu: ConditionalLaw, budget: int = DEFAULT_DEFEAT_BUDGET) -> BitStream:
    """σ = 1^{n1}.0.1^{n2}.0... where each 0 arrives when ``nu`` gives a 1 more than 9/10."""
    require_forecaster(nu)
    return ones_zero_blocks(
        lambda w: nu.p1(w) > NINE_TENTHS, budget, f"defeat-nc({nu.name})", "conditional above 9/10"
    )
