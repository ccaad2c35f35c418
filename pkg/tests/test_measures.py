from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nflearn import measures as ms
from nflearn.seq_core import BitString, IndexSet, alternating_stream, constant_stream
from oracles import strings, weight_plain

HALF = F(1, 2)
MARKOV = ms.markov(1, [F(1, 3), F(3, 4)])


def registry_laws():
    lap = ms.laplace_bayes()
    return {
        "bernoulli(1/2)": ms.bernoulli(HALF),
        "bernoulli(1/4)": ms.bernoulli(F(1, 4)),
        "laplace": lap,
        "markov1": MARKOV,
        "markov2": ms.markov(2, {"00": F(1, 5), "01": F(1, 2), "10": F(2, 3), "11": F(9, 10)}),
        "delta-alt": ms.delta(alternating_stream()),
        "spiked": ms.spiked(ms.bernoulli(HALF), IndexSet.powers(2), constant_stream(1)),
        "mixture": ms.mixture([F(1, 3), F(2, 3)], [ms.bernoulli(F(1, 4)), lap]),
        "evil-lap": ms.evil_forecaster(lap),
        "glue": ms.glue_partition(["0", "10", "11"], [F(1, 10), F(2, 10), F(7, 10)], lap),
        "vanishing": ms.vanishing_zero_forecaster(),
    }


LAWS = registry_laws()
FULL = {k: v for k, v in LAWS.items() if v.full_support}
law_names = st.sampled_from(sorted(LAWS))
words = st.text(alphabet="01", max_size=14)


def test_cylinder_weight_examples():
    assert ms.cylinder_weight(ms.bernoulli(HALF), "101") == F(1, 8)
    assert ms.cylinder_weight(ms.laplace_bayes(), "11") == F(1, 3)
    assert ms.cylinder_weight(ms.delta(constant_stream(1)), "0") == 0
    assert ms.cylinder_weight(ms.laplace_bayes(), "") == 1


def test_laplace_examples():
    lap = ms.laplace_bayes()
    assert (lap.p1(""), lap.p1("1"), lap.p1("10")) == (HALF, F(2, 3), HALF)
    assert lap.full_support


def test_simple_law_examples():
    assert all(ms.bernoulli(HALF).p1(w) == HALF for w in strings(5))
    assert ms.delta(alternating_stream()).p1("0") == 1
    sp = ms.spiked(ms.bernoulli(HALF), IndexSet.powers(10), constant_stream(1))
    for n in range(0, 1200):
        assert sp.p1("0" * n) == (1 if n + 1 in (10, 100, 1000) else HALF)
    assert MARKOV.p1("") == HALF and MARKOV.p1("10") == F(1, 3) and MARKOV.p1("01") == F(3, 4)


@given(law_names, words)
def test_weight_matches_oracle_product(name, w):
    law = LAWS[name]
    assert law.weight(w) == weight_plain(law.p1, w)


@given(law_names, words)
def test_additivity(name, w):
    law = LAWS[name]
    assert law.weight(w) == law.weight(w + "0") + law.weight(w + "1")


@pytest.mark.parametrize("name", sorted(LAWS))
def test_normalization(name):
    law = LAWS[name]
    for k in (0, 3, 8, 12):
        assert sum(ms.cylinder_table(law, k).values()) == 1


def test_conditionals_in_unit_interval_and_full_support_checked():
    bad = ms.ConditionalLaw("bad", lambda w: F(3, 2))
    with pytest.raises(ValueError):
        bad.p1("")
    liar = ms.ConditionalLaw("liar", lambda w: 1, full_support=True)
    with pytest.raises(ms.FullSupportViolation):
        liar.p1("0")


def test_mixture_examples():
    lam = ms.laplace_bayes()
    one = ms.mixture([1], [lam])
    assert all(one.weight(w) == lam.weight(w) for w in strings(6))
    mix = ms.mixture([HALF, HALF], [ms.bernoulli(F(1, 4)), ms.bernoulli(F(3, 4))])
    assert mix.weight("1") == HALF
    assert mix.p1("1") == F(5, 8)


def test_mixture_matches_brute_force_tables():
    comps = [ms.bernoulli(F(1, 4)), ms.laplace_bayes(), MARKOV]
    weights = [F(1, 2), F(1, 3), F(1, 6)]
    mix = ms.mixture(weights, comps)
    for k in range(0, 11):
        for w in strings(k):
            assert mix.weight(w) == sum(a * weight_plain(c.p1, w) for a, c in zip(weights, comps))


def test_mixture_validation_and_zero_weight():
    with pytest.raises(ValueError):
        ms.mixture([F(1, 2)], [ms.bernoulli(HALF)])
    with pytest.raises(ValueError):
        ms.mixture([F(1, 2), F(1, 2)], [ms.bernoulli(HALF)])
    point = ms.mixture([1], [ms.delta(constant_stream(1))])
    with pytest.raises(ms.UndefinedConditional):
        point.p1("0")


def test_evil_forecaster_examples():
    b = ms.bernoulli(HALF)
    assert all(ms.evil_forecaster(b).p1(w) == F(1, 10) for w in strings(4))
    assert all(ms.evil_forecaster(ms.evil_forecaster(b)).p1(w) == F(9, 10) for w in strings(4))
    lap = ms.laplace_bayes()
    assert ms.evil_forecaster(lap).p1("1") == F(1, 10)
    assert lap.p1("1") - ms.evil_forecaster(lap).p1("1") == F(17, 30)
    with pytest.raises(ms.PreconditionError):
        ms.evil_forecaster(ms.delta(constant_stream(1)))


@pytest.mark.parametrize("name", sorted(FULL))
def test_evil_gap(name):
    mu = FULL[name]
    evil = ms.evil_forecaster(mu)
    for k in range(0, 11):
        for w in strings(k):
            assert abs(mu.p1(w) - evil.p1(w)) >= F(2, 5)


def test_glue_examples():
    b = ms.bernoulli(HALF)
    g = ms.glue_partition(["0", "1"], [HALF, HALF], b)
    assert all(g.weight(w) == b.weight(w) for w in strings(6))
    lap = ms.laplace_bayes()
    g = ms.glue_partition(["0", "10", "11"], [F(1, 10), F(2, 10), F(7, 10)], lap)
    assert g.weight("11") == F(7, 10)
    assert g.weight("110") == F(7, 40)


def test_glue_structure():
    lap = ms.laplace_bayes()
    parts = ["00", "01", "1"]
    weights = [F(1, 6), F(1, 3), F(1, 2)]
    g = ms.glue_partition(parts, weights, lap)
    for part, p in zip(parts, weights):
        assert g.weight(part) == p
    for k in range(2, 9):
        for w in strings(k):
            assert g.p1(w) == lap.p1(w)


def test_glue_preconditions():
    lap = ms.laplace_bayes()
    with pytest.raises(ms.PreconditionError):
        ms.glue_partition(["0", "01"], [HALF, HALF], lap)
    with pytest.raises(ms.PreconditionError):
        ms.glue_partition(["0", "10"], [HALF, HALF], lap)
    with pytest.raises(ms.PreconditionError):
        ms.glue_partition(["0", "1"], [F(1, 3), F(1, 3)], lap)


def family(k):
    members = [ms.bernoulli(F(1, 3)), ms.laplace_bayes(), MARKOV,
               ms.bernoulli(F(4, 5)), ms.evil_forecaster(ms.laplace_bayes()), ms.bernoulli(HALF)]
    return members[(k - 1) % len(members)]


def test_mixture_approx_identical_family():
    base = ms.bernoulli(F(1, 3))
    lam = ms.laplace_bayes()
    for w in ("", "0", "1101", "0000011"):
        for n in (1, 4, 9):
            a = ms.mixture_approx(base, lambda k: lam, w, n)
            target = HALF * base.weight(w) + HALF * lam.weight(w)
            assert abs(a.estimate - target) < F(1, 2**n)
            assert a.error_bound == F(1, 2**n)
            for part in ("alpha", "beta"):
                assert abs(a.components[part]) <= F(1, 2 ** (n + 2))


@given(st.text(alphabet="01", max_size=10), st.integers(1, 20))
@settings(max_examples=60, deadline=None)
def test_mixture_approx_intervals_overlap(w, n):
    a = ms.mixture_approx(ms.laplace_bayes(), family, w, n)
    b = ms.mixture_approx(ms.laplace_bayes(), family, w, n + 5)
    assert a.overlaps(b)
    assert abs(a.estimate - b.estimate) < F(1, 2**n) + F(1, 2 ** (n + 5))


def test_mixture_approx_total_mass():
    for n in (1, 5, 12):
        assert abs(ms.mixture_approx(ms.bernoulli(HALF), family, "", n).estimate - 1) < F(1, 2**n)


def test_sample_examples():
    assert ms.sample(ms.delta(constant_stream(1)), 3, 200) == "1" * 200
    sp = ms.spiked(ms.bernoulli(HALF), IndexSet.powers(10), constant_stream(1))
    for seed in range(10):
        path = ms.sample(sp, seed, 1000)
        assert path.bit(10) == path.bit(100) == path.bit(1000) == 1
    good = sum(F(48, 100) <= F(ms.sample(ms.bernoulli(HALF), s, 10**4).count_ones(), 10**4) <= F(52, 100)
               for s in range(30))
    assert good >= 27


@given(law_names, st.integers(0, 2**32), st.integers(1, 300), st.integers(0, 300))
@settings(max_examples=40, deadline=None)
def test_sample_determinism_and_prefix_property(name, seed, h, extra):
    law = LAWS[name]
    a = ms.sample(law, seed, h)
    assert a == ms.sample(law, seed, h)
    assert a.is_prefix_of(ms.sample(law, seed, h + extra))
    assert ms.sample_stream(law, seed).prefix(h) == a
    assert law.weight(a) > 0


def test_dyadic_approx():
    x = F(1, 3)
    for p in range(1, 30):
        assert abs(ms.dyadic_approx(x, p) - x) <= F(1, 2 ** (p + 1))
