import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nflearn import category as cat
from nflearn import extrapolation as ex
from nflearn import measures as ms
from nflearn.forecasting import merge_depth
from oracles import nasty_count, wicked_prefix_count

HALF = F(1, 2)
B = ms.bernoulli(HALF)
LEARNERS = [ex.always(0), ex.always(1), ex.last_bit(), ex.majority(3), ex.evil_twin(ex.majority(2))]
m1 = ex.always(1)


def test_wickedness_examples():
    assert cat.wickedness(m1, "111") == 0
    assert cat.wickedness(m1, "000") == 1
    assert cat.wickedness(m1, "10") == HALF


@given(st.sampled_from(LEARNERS), st.text(alphabet="01", min_size=1, max_size=40))
def test_wickedness_matches_oracle(m, w):
    assert cat.wickedness(m, w) == F(nasty_count(m, w), len(w))
    assert cat.count_wicked_prefixes(m, w) == wicked_prefix_count(m, w)


def test_witness_examples():
    F_ = cat.nwd_witness_weaknv(m1)
    assert F_(2, "1") == "1000"
    assert cat.wicked_prefix_lengths(m1, F_(2, "1"))[-3:] == [2, 3, 4]
    for m in LEARNERS:
        for w in ("", "0", "101", "1111"):
            out = cat.nwd_witness_weaknv(m)(0, w)
            expected_len = max(1, 2 * len(w))
            assert len(out) == expected_len and out.text.startswith(w)


@given(st.sampled_from(LEARNERS), st.text(alphabet="01", max_size=10), st.integers(0, 5),
       st.sampled_from(["double", "minimal"]), st.text(alphabet="01", max_size=20))
@settings(max_examples=150, deadline=None)
def test_witness_soundness(m, w, n, padding, tail):
    F_ = cat.nwd_witness_weaknv(m, padding)
    out = F_(n, w)
    assert len(out) > len(w) and out.text.startswith(w)
    assert wicked_prefix_count(m, out.text + tail) >= n


def test_witness_violation():
    lazy = cat.WitnessFamily("lazy", lambda n, w: w)
    with pytest.raises(cat.WitnessViolation):
        lazy(0, "01")


def test_game_examples():
    t = cat.play_banach_mazur(cat.constant_player("1"), cat.constant_player("1"), 3)
    assert t.realized_prefix == "111111" and len(t.moves) == 6
    with pytest.raises(cat.RuleViolation, match="Player II"):
        cat.play_banach_mazur(cat.constant_player("1"), lambda s: "", 2)
    answer0 = cat.bm_strategy_from_witness(cat.witness_from_suffix("zero", "0"))
    t = cat.play_banach_mazur(cat.constant_player("1"), answer0, 4)
    assert [mv.text for mv in t.moves[1::2]] == ["0"] * 4


@given(st.integers(0, 10**6), st.integers(1, 12), st.sampled_from(LEARNERS))
@settings(max_examples=40, deadline=None)
def test_game_witness_link(seed, rounds, m):
    F_ = cat.nwd_witness_weaknv(m, "minimal")
    t = cat.play_banach_mazur(cat.random_player(seed), cat.bm_strategy_from_witness(F_), rounds)
    assert len(t.moves) == 2 * rounds
    assert "".join(mv.text for mv in t.moves) == t.realized_prefix.text
    consumed = 0
    for k in range(1, rounds + 1):
        consumed += len(t.moves[2 * k - 2])
        before = t.realized_prefix.prefix(consumed)
        consumed += len(t.moves[2 * k - 1])
        assert F_(k, before) == t.realized_prefix.prefix(consumed)


def test_strategy_is_pure():
    F_ = cat.nwd_witness_weaknv(ex.majority(3))
    s = cat.bm_strategy_from_witness(F_)
    state = cat.GameState(3, ms.sample(B, 1, 12), ())
    assert s(state) == s(cat.GameState(3, ms.sample(B, 1, 12), ()))


def test_witness_plays_fail_weak_nv():
    F_ = cat.nwd_witness_weaknv(m1, "double")
    t = cat.play_banach_mazur(cat.random_player(5), cat.bm_strategy_from_witness(F_), 8)
    padded = t.realized_prefix.extend("1" * 64)
    r = ex.check_weak_nv(m1, padded, len(padded), 1, F(1, 100))
    assert r.verdict != ex.CONSISTENT and r.correct_density < F(99, 100)


def test_baire_escape_examples():
    append1 = cat.witness_from_suffix("append-1", "1")
    assert cat.baire_escape(append1, "0", 2) == "01010"
    assert cat.baire_escape(append1, "0", 1) == "010"
    F_ = cat.nwd_witness_weaknv(ex.last_bit())
    for steps in range(1, 6):
        w = cat.baire_escape(F_, "1", steps)
        assert wicked_prefix_count(ex.last_bit(), w.text) >= steps
        assert all(piece.is_prefix_of(w) for _, piece in cat.escape_trace(F_, "1", steps))


def _ball(depth, values, radius):
    return cat.BasisBall(depth, dict(zip(["".join(b) for b in __import__("itertools").product("01", repeat=depth)], values)), radius)


def test_ball_validation():
    with pytest.raises(ValueError):
        _ball(1, [HALF, F(1, 3)], F(1, 10))
    with pytest.raises(ValueError):
        _ball(1, [HALF, HALF], 0)
    with pytest.raises(ValueError):
        cat.BasisBall(2, {"0": 1}, HALF)


def test_ball_contains_examples():
    outer = _ball(1, [HALF, HALF], HALF)
    c = cat.ball_contains(outer, outer)
    assert c.ok and c.replay()
    inner = _ball(2, [F(9, 20), F(1, 20), F(1, 20), F(9, 20)], F(1, 100))
    c = cat.ball_contains(outer, inner)
    assert c.ok and c.replay()
    assert not cat.ball_contains(outer, _ball(2, inner.center.values(), 1)).ok
    with pytest.raises(ms.PreconditionError):
        cat.ball_contains(inner, outer)


def test_shrink_against_examples():
    W = cat.BasisBall.uniform(1, HALF)
    W1, contains, bad = cat.shrink_against(B, W)
    assert W1.center == {"00": F(1, 20), "01": F(9, 20), "10": F(1, 20), "11": F(9, 20)}
    assert W1.radius == F(1, 100)
    assert contains.replay() and bad.replay()
    lo = (F(9, 20) - W1.radius) / (HALF + 2 * W1.radius)
    assert lo == F(11, 13) and lo > F(7, 10)
    W2, c2, b2 = cat.shrink_against(B, W1)
    assert W2.depth == 3 and c2.replay() and b2.replay()


def test_bad_gap_rejections_and_mirror():
    W1, _, _ = cat.shrink_against(B, cat.BasisBall.uniform(1, HALF))
    huge = cat.BasisBall(2, W1.center, HALF)
    r = cat.bad_gap_certificate(B, huge)
    assert not r.ok and r.blocking is not None
    _, _, eb = cat.shrink_against(ms.evil_forecaster(B), cat.BasisBall.uniform(1, HALF))
    assert eb.replay()
    favours_one = ms.evil_forecaster(ms.evil_forecaster(B))
    M1, _, mb = cat.shrink_against(favours_one, cat.BasisBall.uniform(1, HALF))
    assert mb.replay()
    assert all(M1.center[w[:-1] + str(1 - int(w[-1]))] == v for w, v in W1.center.items())


def test_shrink_requires_positive_center():
    W = cat.BasisBall(1, {"0": 0, "1": 1}, HALF)
    with pytest.raises(ms.PreconditionError):
        cat.shrink_against(B, W)


def test_superbad_examples():
    assert cat.superbad_count(B, B, 8) == 0
    assert cat.superbad_count(B, ms.evil_forecaster(B), 8) == 8
    mixed = ms.ConditionalLaw("late-evil", lambda w: HALF if len(w) == 1 else F(1, 10), full_support=True)
    assert cat.superbad_count(B, mixed, 8) == 8 - 2


def test_superbad_matches_bad_depth_majority():
    nu = ms.ConditionalLaw("odd-evil", lambda w: F(1, 10) if len(w) % 3 else HALF, full_support=True)
    flags = cat.bad_depths(B, nu, 9)
    expected = sum(1 for k in range(1, 10) if 2 * sum(flags[:k]) > k)
    assert cat.superbad_count(B, nu, 9) == expected


def test_meagre_chain():
    W0 = cat.BasisBall.uniform(1, HALF)
    assert [link.ball for link in cat.meagre_chain(B, W0, 0)] == [W0]
    links = cat.meagre_chain(B, W0, 6)
    assert len(links) == 7
    for prev, link in zip(links, links[1:]):
        assert link.ball.depth == prev.ball.depth + 1
        assert link.containment.replay() and link.bad_gap.replay()
        again = cat.ball_contains(prev.ball, link.ball)
        assert again.ok
    center = cat.extension_law(links[-1].ball)
    assert cat.superbad_count(B, center, 7) >= 6 - 1 - 1
    rng = random.Random(1)
    for _ in range(5):
        table = cat.perturb_within(links[-1].ball, rng)
        law = cat.table_law(7, table)
        assert links[-1].ball.contains_law(law)
        assert cat.superbad_count(B, law, 7) >= 3


def test_depth_one_bridge():
    W = cat.BasisBall.uniform(1, HALF)
    for mu in (B, ms.laplace_bayes()):
        ball = W
        for _ in range(3):
            ball, _, _ = cat.shrink_against(mu, ball)
            ext = cat.extension_law(ball)
            for w in cat._strings(ball.depth - 1):
                assert merge_depth(mu, ext, w, 1) >= F(1, 5)


def test_certificate_text_round_trip_and_tamper():
    _, contains, bad = cat.shrink_against(B, cat.BasisBall.uniform(1, HALF))
    for cert in (contains, bad):
        back = cat.Certificate.from_text(cert.to_text())
        assert back == cert and back.replay()
    text = bad.to_text().splitlines()
    idx = next(i for i, line in enumerate(text) if " div " in line)
    parts = text[idx].split()
    parts[-2] = str(int(parts[-2]) + 1)
    text[idx] = " ".join(parts)
    assert not cat.Certificate.from_text("\n".join(text)).replay()


def test_superbad_certificate():
    cert = cat.superbad_certificate(B, ms.evil_forecaster(B), 5, 5)
    assert cert.ok and cert.replay() and cat.Certificate.from_text(cert.to_text()).replay()
    assert not cat.superbad_certificate(B, B, 5, 1).ok


def test_ball_text_round_trip():
    W1, _, _ = cat.shrink_against(B, cat.BasisBall.uniform(1, HALF))
    assert cat.BasisBall.from_text(W1.to_text()) == W1
    W0 = cat.BasisBall.uniform(0, HALF)
    assert cat.BasisBall.from_text(W0.to_text()) == W0
