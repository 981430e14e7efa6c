import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from smoothdp.adversary import (
    adjusted_utility,
    dp_error_tradeoff_check,
    error_pair,
    utility_bound_details,
    utility_threshold,
)
from smoothdp.mechanisms import MechanismDescriptor
from smoothdp.numeric import FLOAT, RATIONAL, Epsilon
from smoothdp.pointwise import directed_d

F = Fraction


def utility_oracle(shared, T, t):
    m = len(shared)
    laws = []
    for X in range(m):
        h = list(shared)
        h[X] += 1
        laws.append(oracles.subset_pmf(h, T))
    best = F(0)
    for law in laws:
        gain = F(0)
        for a, pa in law.items():
            probs = [l.get(a, F(0)) for l in laws]
            post = max(probs) / sum(probs)
            gain += pa * max(F(0), post - t)
        best = max(best, gain)
    return best / (1 - t)


@pytest.mark.parametrize("t", [F(3, 10), F(51, 100), F(7, 10)])
def test_coin_flip_truthful(t):
    assert adjusted_utility(MechanismDescriptor.coin_flip(F(1)), (0, 0), t, mode=RATIONAL).value == 1


@pytest.mark.parametrize("t", [F(51, 100), F(6, 10), F(7, 10)])
def test_coin_flip_fair(t):
    assert adjusted_utility(MechanismDescriptor.coin_flip(F(1, 2)), (0, 0), t, mode=RATIONAL).value == 0


def test_threshold():
    assert utility_threshold(Epsilon.log_of(3), RATIONAL) == F(3, 4)
    assert utility_threshold(0.0, FLOAT) == 0.5
    with pytest.raises(ValueError):
        adjusted_utility(MechanismDescriptor.coin_flip(F(1)), (0, 0), 1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=2, max_size=3).filter(lambda c: 1 <= sum(c) <= 6), st.data(),
       st.sampled_from([F(1, 2), F(2, 3), F(9, 10)]))
def test_utility_matches_oracle(shared, data, t):
    T = data.draw(st.integers(1, sum(shared) + 1))
    got = adjusted_utility(MechanismDescriptor.shm(T), shared, t, mode=RATIONAL).value
    assert got == utility_oracle(shared, T, t)


def test_error_pair_and_tradeoff_check_against_all_regions():
    p = {0: F(1, 2), 1: F(1, 3), 2: F(1, 6)}
    q = {0: F(1, 4), 1: F(1, 4), 2: F(1, 2)}
    factor = F(3, 2)
    eps = Epsilon.log_of(factor)
    need = max(directed_d(p, q, eps, RATIONAL), directed_d(q, p, eps, RATIONAL))
    worst = F(0)
    for r in range(4):
        for S in itertools.combinations(range(3), r):
            ep = error_pair(p, q, S, RATIONAL)
            assert ep.type1 == sum((p[a] for a in S), F(0))
            worst = max(worst, 1 - (factor * ep.type1 + ep.type2))
            ep2 = error_pair(q, p, S, RATIONAL)
            worst = max(worst, 1 - (factor * ep2.type1 + ep2.type2))
    assert worst == need
    assert dp_error_tradeoff_check(p, q, eps, need, RATIONAL)
    assert not dp_error_tradeoff_check(p, q, eps, need - F(1, 1000), RATIONAL)
    with pytest.raises(ValueError):
        error_pair(p, q, (7,), RATIONAL)


def test_utility_bound_known_instances():
    mech = MechanismDescriptor.shm(2)
    res = utility_bound_details(mech, (3, 2), (2, 3), Epsilon.log_of(2), RATIONAL)
    assert res.upper_holds and res.lower_holds
    with pytest.raises(ValueError):
        utility_bound_details(mech, (3, 2), (1, 4), 0.0, RATIONAL)


def test_equality_case_of_upper_bound():
    # one direction's mass sits entirely on outputs the neighbour cannot produce,
    # the other direction is zero: the two sides coincide
    res = utility_bound_details(MechanismDescriptor.shm(2), (2, 2), (1, 3), 3.0, RATIONAL)
    assert res.utility == res.d_sum == F(1, 6)
    assert not res.upper_holds


def test_third_type_can_exceed_the_bound():
    # with a prior over all three types, guessing the unrelated type 0 is perfectly accurate
    mech = MechanismDescriptor.shm(1)
    res = utility_bound_details(mech, (0, 1, 2), (0, 2, 1), 0.5, RATIONAL)
    assert res.utility == F(1, 3) and res.utility > res.d_sum
    pair = utility_bound_details(mech, (0, 1, 2), (0, 2, 1), 0.5, RATIONAL, pair_prior=True)
    assert pair.utility <= pair.d_sum


def _random_instances(rng, count):
    out = []
    while len(out) < count:
        m = rng.choice((2, 2, 3))
        n = rng.randint(2, 7)
        cuts = sorted(rng.randint(0, n) for _ in range(m - 1))
        x = [b - a for a, b in zip([0] + cuts, cuts + [n])]
        donors = [i for i in range(m) if x[i] > 0]
        i = rng.choice(donors)
        j = rng.choice([k for k in range(m) if k != i])
        xp = list(x)
        xp[i] -= 1
        xp[j] += 1
        T = rng.randint(1, n)
        eps = rng.choice((0.0, 0.5, 1.0, 2.0, 3.0))
        out.append((tuple(x), tuple(xp), T, eps))
    return out


def test_utility_bound_weak_form_and_lower_bound():
    rng = random.Random(1)
    checked = 0
    for x, xp, T, eps in _random_instances(rng, 400):
        res = utility_bound_details(MechanismDescriptor.shm(T), x, xp, eps, FLOAT, pair_prior=True)
        if res.d_sum <= 0:
            continue
        checked += 1
        assert res.utility <= res.d_sum + 1e-12
        if res.lower_holds is not None:
            assert res.lower_holds
        p = oracles.subset_pmf(x, T)
        q = oracles.subset_pmf(xp, T)
        f = Epsilon.of(eps).exp(RATIONAL)
        if oracles.d_direct(p, q, f) > 0 and oracles.d_direct(q, p, f) > 0:
            assert res.upper_holds
    assert checked > 100
