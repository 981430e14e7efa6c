import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from smoothdp.dist import DistributionSet, FinitePMF, bernoulli_pmf
from smoothdp.mechanisms import MechanismDescriptor
from smoothdp.numeric import FLOAT, RATIONAL, Epsilon
from smoothdp.pointwise import pointwise_delta, worst_case_dp_delta
from smoothdp.smoothed import (
    EXACT_CAP,
    PrivacyQuery,
    database_law,
    smoothed_delta,
    smoothed_delta_enumerated,
    smoothed_delta_exact,
    smoothed_delta_mc,
    split_expectations,
)

F = Fraction


def bern_set(*ps, mode=RATIONAL):
    return DistributionSet([bernoulli_pmf(F(p), mode=mode) for p in ps])


def brute(n, T, factor, ps):
    members = [(F(p), 1 - F(p)) for p in ps]
    return oracles.brute_smoothed(lambda h: oracles.brute_shm_delta(h, T, factor), members, n)


def test_hand_value():
    q = PrivacyQuery(MechanismDescriptor.shm(1), Epsilon.log_of(2), 3, bern_set("1/2"), numeric=RATIONAL)
    assert F(smoothed_delta(q).exact_value) == F(1, 3)


@pytest.mark.parametrize("n,T,factor,ps", [
    (3, 1, 2, ("3/10", "7/10")),
    (4, 2, 1, ("1/4", "2/3")),
    (4, 3, 4, ("1/5", "1/2")),
    (5, 2, 3, ("1/10", "9/10")),
    (4, 2, 2, ("1/3",)),
])
def test_exact_matches_database_enumeration(n, T, factor, ps):
    expect = brute(n, T, F(factor), ps)
    q = PrivacyQuery(MechanismDescriptor.shm(T), Epsilon.log_of(factor), n, bern_set(*ps), numeric=RATIONAL)
    rep = smoothed_delta_exact(q)
    assert F(rep.exact_value) == expect
    qf = PrivacyQuery(MechanismDescriptor.shm(T), Epsilon.log_of(factor), n, bern_set(*ps, mode=FLOAT), numeric=FLOAT)
    assert math.isclose(smoothed_delta_exact(qf).delta, float(expect), rel_tol=1e-10)
    val, counts = smoothed_delta_enumerated(MechanismDescriptor.shm(T), Epsilon.log_of(factor), n, bern_set(*ps),
                                            RATIONAL)
    assert val == expect and sum(counts) == n


def test_three_type_enumeration_matches_brute_force():
    members = [(F(1, 2), F(1, 4), F(1, 4)), (F(1, 6), F(1, 3), F(1, 2))]
    pi = DistributionSet([FinitePMF((0, 1, 2), m) for m in members])
    n, T, factor = 3, 2, F(2)
    expect = oracles.brute_smoothed(lambda h: oracles.brute_shm_delta(h, T, factor), members, n)
    val, _ = smoothed_delta_enumerated(MechanismDescriptor.shm(T), Epsilon.log_of(2), n, pi, RATIONAL)
    assert val == expect


def test_counting_smoothed_matches_brute_force():
    n, T, factor = 4, 2, F(3)
    members = [(F(1, 4), F(3, 4)), (F(3, 5), F(2, 5))]
    law = lambda h: oracles.ordered_draws_pmf(h[0], n, T)
    expect = oracles.brute_smoothed(lambda h: oracles.brute_delta(law, h, factor), members, n)
    pi = DistributionSet([FinitePMF((0, 1), m) for m in members])
    q = PrivacyQuery(MechanismDescriptor.counting(T, 0), Epsilon.log_of(3), n, pi, numeric=RATIONAL)
    assert F(smoothed_delta_exact(q).exact_value) == expect


def test_database_law_is_a_distribution():
    pi = bern_set("1/4", "2/3")
    law = database_law(pi, (2, 1), RATIONAL)
    assert sum(law.values()) == 1
    assert law[(3, 0)] == F(1, 4) ** 2 * F(2, 3)


def test_split_expectations_endpoints():
    mech = MechanismDescriptor.shm(2)
    vals = split_expectations(mech, 6, Epsilon.log_of(2), F(3, 10), F(7, 10), RATIONAL)
    assert len(vals) == 7
    # all agents on one vertex: a plain binomial average of pointwise deltas
    from math import comb
    direct = sum(comb(6, a) * F(3, 10) ** a * F(7, 10) ** (6 - a) * pointwise_delta(mech, (a, 6 - a), Epsilon.log_of(2), RATIONAL).value
                 for a in range(7))
    assert vals[6] == direct


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.data(), st.sampled_from([1, 2, 4]),
       st.lists(st.integers(1, 9), min_size=2, max_size=3, unique=True))
def test_smoothed_below_worst_case_and_reduction(n, data, factor, tenths):
    T = data.draw(st.integers(1, n))
    mech = MechanismDescriptor.shm(T)
    eps = Epsilon.log_of(factor)
    ps = [F(t, 10) for t in sorted(tenths)]
    full = bern_set(*ps)
    q = PrivacyQuery(mech, eps, n, full, numeric=RATIONAL)
    val = F(smoothed_delta_exact(q).exact_value)
    assert val <= worst_case_dp_delta(mech, n, 2, eps, RATIONAL)
    hull = bern_set(ps[0], ps[-1])
    assert val == F(smoothed_delta_exact(PrivacyQuery(mech, eps, n, hull, numeric=RATIONAL)).exact_value)


def test_exact_caps_and_type_count():
    mech = MechanismDescriptor.shm(2)
    with pytest.raises(ValueError):
        smoothed_delta_exact(PrivacyQuery(mech, 1.0, EXACT_CAP[RATIONAL] + 1, bern_set("1/2"), numeric=RATIONAL))
    pi3 = DistributionSet([FinitePMF((0, 1, 2), (0.2, 0.3, 0.5))])
    with pytest.raises(ValueError):
        smoothed_delta_exact(PrivacyQuery(mech, 1.0, 5, pi3))


def test_query_validation():
    mech = MechanismDescriptor.shm(2)
    pi = bern_set("1/2")
    for bad in (dict(mode="guess"), dict(trials=0), dict(confidence=1.0), dict(seed=-1), dict(threads=0),
                dict(mixtures=((1, 1),))):
        with pytest.raises(ValueError):
            PrivacyQuery(mech, 1.0, 4, pi, **bad)
    with pytest.raises(ValueError):
        PrivacyQuery(MechanismDescriptor.shm(5), 1.0, 4, pi)


# ---------------------------------------------------------------------------
# Monte Carlo


def mc_query(**kw):
    base = dict(mech=MechanismDescriptor.shm(5), eps=Epsilon.log_of(2), n=20, pi=bern_set("3/10", "7/10", mode=FLOAT),
                mode="monte_carlo", trials=4000, seed=5)
    base.update(kw)
    return PrivacyQuery(**base)


def test_mc_is_reproducible_and_thread_independent():
    a = smoothed_delta_mc(mc_query())
    b = smoothed_delta_mc(mc_query())
    c = smoothed_delta_mc(mc_query(threads=4))
    assert a.to_json() == b.to_json() == c.to_json()
    assert smoothed_delta_mc(mc_query(seed=6)).delta != a.delta


def test_mc_interval_contains_exact_value():
    q = mc_query(trials=20000)
    exact = smoothed_delta_exact(PrivacyQuery(q.mech, q.eps, q.n, q.pi))
    rep = smoothed_delta_mc(q)
    assert rep.ci[0] <= exact.delta <= rep.ci[1]
    assert rep.hoeffding_ci[0] <= rep.ci[0] and rep.ci[1] <= rep.hoeffding_ci[1]
    assert rep.provenance["lower_bound_on_max"] is True


def test_mc_single_trial_interval():
    rep = smoothed_delta_mc(mc_query(trials=1))
    assert rep.ci == (0.0, 1.0)


def test_mc_mixtures_and_many_types():
    pi = DistributionSet([FinitePMF((0, 1, 2), (0.2, 0.3, 0.5)), FinitePMF((0, 1, 2), (0.6, 0.2, 0.2))])
    q = PrivacyQuery(MechanismDescriptor.shm(3), 1.0, 6, pi, mode="monte_carlo", trials=3000, seed=1,
                     mixtures=((3, 3),))
    rep = smoothed_delta_mc(q)
    labels = [c["label"] for c in rep.provenance["candidates"]]
    assert len(labels) == 3
    exact, _ = smoothed_delta_enumerated(q.mech, q.eps, 6, pi, FLOAT)
    assert rep.ci[0] <= exact + 1e-12
    # each candidate's interval should contain its own exact expectation
    for cand in rep.provenance["candidates"]:
        assert 0 <= cand["ci"][0] <= cand["mean"] <= cand["ci"][1] <= 1


def test_mc_candidate_means_match_enumeration_for_homogeneous_assignments():
    pi = bern_set("3/10", mode=FLOAT)
    q = mc_query(pi=pi, trials=30000, n=12)
    rep = smoothed_delta_mc(q)
    exact = smoothed_delta_exact(PrivacyQuery(q.mech, q.eps, q.n, pi)).delta
    assert rep.ci[0] <= exact <= rep.ci[1]


def test_mc_flags_heavy_tailed_samples():
    shm = MechanismDescriptor.shm
    skewed = PrivacyQuery(shm(9), 0.8, 45, DistributionSet([bernoulli_pmf(0.55)]), mode="monte_carlo", trials=10_000, seed=3)
    tame = PrivacyQuery(shm(10), math.log(2), 30, DistributionSet([bernoulli_pmf(0.3)]), mode="monte_carlo", trials=10_000,
                        seed=3)
    assert smoothed_delta_mc(skewed).provenance["normal_ci_reliable"] is False
    rep = smoothed_delta_mc(tame)
    assert rep.provenance["normal_ci_reliable"] is True
    assert rep.provenance["sample_skewness"] > 0
