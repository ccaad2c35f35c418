from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nflearn import forecasting as fc
from nflearn import measures as ms
from nflearn.extrapolation import CONSISTENT, INCONCLUSIVE, REFUTED, ConstructionError, zero_positions
from nflearn.seq_core import BitString, IndexSet, constant_stream
from oracles import strings, weight_plain

HALF = F(1, 2)
B = ms.bernoulli(HALF)
LAP = ms.laplace_bayes()
SPIKED = ms.spiked(B, IndexSet.powers(10), constant_stream(1))
GLUE = ms.glue_partition(["0", "10", "11"], [F(1, 10), F(2, 10), F(7, 10)], LAP)


def merge_oracle(mu, lam, prefix, d):
    pm, pl = weight_plain(mu.p1, prefix), weight_plain(lam.p1, prefix)
    return sum(abs(weight_plain(mu.p1, prefix + v) / pm - weight_plain(lam.p1, prefix + v) / pl)
               for v in strings(d)) / 2


def test_gap_trajectory_self_forecast():
    t = fc.gap_trajectory(B, B, ms.sample(B, 0, 500), F(1, 10))
    assert set(t.gaps) == {0} and t.good_set_density == 1


def test_gap_trajectory_spikes():
    path = ms.sample(SPIKED, 4, 10**4)
    t = fc.gap_trajectory(B, SPIKED, path, F(1, 4))
    assert [n for n, g in enumerate(t.gaps) if g] == [9, 99, 999, 9999]
    assert all(t.gaps[n] == HALF for n in (9, 99, 999, 9999))


def test_gap_trajectory_requires_full_support():
    with pytest.raises(ms.PreconditionError):
        fc.gap_trajectory(ms.delta(constant_stream(1)), B, BitString("1"), F(1, 10))


def test_check_nc_examples():
    assert fc.check_nc(LAP, LAP, range(3), 500, F(1, 100)).verdict == CONSISTENT
    assert fc.check_nc(LAP, ms.bernoulli(F(9, 10)), range(10), 10**4, F(1, 20)).verdict == CONSISTENT
    r = fc.check_nc(B, SPIKED, range(3), 10**4, F(1, 4))
    assert r.verdict != CONSISTENT
    assert all(s.trajectory.bad_positions() == [9, 99, 999, 9999] for s in r.per_seed)


def test_check_nc_refutes_constant_gap():
    r = fc.check_nc(B, ms.bernoulli(F(3, 4)), range(5), 1000, F(1, 10))
    assert r.verdict == REFUTED


def test_check_weak_nc_examples():
    assert fc.check_weak_nc(B, SPIKED, range(3), 10**4, F(1, 4), 1).verdict == CONSISTENT
    assert fc.check_weak_nc(ms.evil_forecaster(B), B, range(3), 2000, F(1, 10), 1).verdict == REFUTED
    for r in (F(1, 2), 1):
        assert fc.check_weak_nc(LAP, LAP, range(3), 300, F(1, 20), r).verdict == CONSISTENT


def test_evil_pair_disjointness():
    mu = LAP
    evil = ms.evil_forecaster(mu)
    for lam in (B, ms.bernoulli(F(9, 10)), LAP):
        for seed in range(3):
            path = ms.sample(lam, seed, 400)
            assert all(abs(mu.p1(path.prefix(n)) - evil.p1(path.prefix(n))) >= F(2, 5) for n in range(400))
        a = fc.check_weak_nc(mu, lam, range(3), 400, F(1, 6), 1)
        b = fc.check_weak_nc(evil, lam, range(3), 400, F(1, 6), 1)
        assert not (a.verdict == CONSISTENT and b.verdict == CONSISTENT)


def test_merge_depth_examples():
    for w in ("", "01", "1110"):
        assert fc.merge_depth(LAP, LAP, w, 5) == 0
    assert fc.merge_depth(B, ms.bernoulli(1), "1", 1) == HALF
    for prefix in ("0", "10", "11", "0110", "1011"):
        for d in range(1, 7):
            assert fc.merge_depth(LAP, GLUE, prefix, d) == 0


@given(st.text(alphabet="01", max_size=8), st.integers(1, 5),
       st.sampled_from(["lap-b", "b-markov", "lap-glue", "evil"]))
@settings(max_examples=40, deadline=None)
def test_merge_depth_matches_oracle_and_is_monotone(prefix, d, pair):
    mu, lam = {
        "lap-b": (LAP, B),
        "b-markov": (B, ms.markov(1, [F(1, 3), F(3, 4)])),
        "lap-glue": (LAP, GLUE),
        "evil": (LAP, ms.evil_forecaster(LAP)),
    }[pair]
    prof = fc.merge_profile(mu, lam, prefix, d + 1)
    assert prof[d - 1] == merge_oracle(mu, lam, prefix, d)
    assert all(a <= b for a, b in zip(prof, prof[1:]))
    assert all(0 <= v <= 1 for v in prof)
    assert prof[0] == abs(mu.p1(prefix) - lam.p1(prefix))


def test_merge_depth_zero_weight_prefix():
    with pytest.raises(ms.PreconditionError):
        fc.merge_depth(B, ms.delta(constant_stream(1)), "10", 2)


def test_check_strong_nc_examples():
    r = fc.check_strong_nc(LAP, GLUE, range(4), 400, 6, F(1, 100))
    assert r.verdict == CONSISTENT
    for s in r.per_seed:
        assert all(v == 0 for c, v in s.trajectory.trajectory if c >= 2)
    lap_b = fc.check_strong_nc(LAP, B, range(3), 10**4, 6, F(1, 10))
    assert lap_b.verdict == CONSISTENT
    assert "lower bound" in lap_b.params["caveat"]
    r = fc.check_strong_nc(B, ms.bernoulli(F(3, 4)), range(3), 1000, 1, F(1, 10))
    assert r.verdict == REFUTED
    assert all(v == F(1, 4) for s in r.per_seed for _, v in s.trajectory.trajectory)


def test_defeat_nc_examples():
    s = fc.defeat_nc(ms.bernoulli(F(19, 20)))
    zeros = zero_positions(s, 200)
    expected, pos = [], 0
    for j in range(1, 7):
        pos += 2**j + 2
        expected.append(pos)
    assert zeros == [z for z in expected if z <= 200]
    with pytest.raises(ConstructionError) as info:
        fc.defeat_nc(B, budget=4096).prefix(5)
    assert info.value.block == 1


def test_defeat_nc_gap_at_zeros():
    s = fc.defeat_nc(LAP)
    path = s.prefix(3000)
    truth = ms.delta(s)
    for z in zero_positions(path, 3000):
        before = path.prefix(z - 1)
        assert abs(LAP.p1(before) - truth.p1(before)) >= F(9, 10)


def test_seed_aggregation():
    assert fc.aggregate_seeds([CONSISTENT] * 9 + [REFUTED]) == CONSISTENT
    assert fc.aggregate_seeds([CONSISTENT] * 8 + [REFUTED] * 2) == INCONCLUSIVE
    assert fc.aggregate_seeds([REFUTED] * 10) == REFUTED


def test_evaluators_are_pure():
    a = fc.check_nc(LAP, B, [3, 1, 4], 800, F(1, 20))
    b = fc.check_nc(LAP, B, [3, 1, 4], 800, F(1, 20))
    assert a.to_record() == b.to_record()
    assert [s.trajectory.gaps for s in a.per_seed] == [s.trajectory.gaps for s in b.per_seed]
