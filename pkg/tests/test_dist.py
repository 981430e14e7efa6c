import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

import oracles
from smoothdp.dist import (
    DistributionSet,
    FinitePMF,
    SGD_SETTINGS,
    bernoulli_pmf,
    in_convex_hull,
    quantization_grid,
    quantized_gaussian,
    quantized_laplacian,
    reduce_to_vertices,
    sgd_distribution_set,
    strict_positivity,
    vertex_indices,
)
from smoothdp.numeric import FLOAT, RATIONAL


def test_pmf_validation():
    with pytest.raises(ValueError):
        FinitePMF((0, 1), (Fraction(1, 2), Fraction(1, 3)))
    with pytest.raises(ValueError):
        FinitePMF((0, 0), (0.5, 0.5))
    with pytest.raises(ValueError):
        FinitePMF((0, 1), (1.5, -0.5))
    with pytest.raises(ValueError):
        FinitePMF((0, 1), (0.5,))
    with pytest.raises(ValueError):
        FinitePMF((), ())
    assert FinitePMF((0, 1), (Fraction(1, 3), Fraction(2, 3))).is_exact


def test_to_mode_fixes_decimal_drift():
    pmf = FinitePMF(("a", "b", "c"), (0.1, 0.2, 0.7))
    exact = pmf.to_mode(RATIONAL)
    assert exact.mass == (Fraction(1, 10), Fraction(1, 5), Fraction(7, 10))
    assert exact.to_mode(FLOAT).mass == (0.1, 0.2, 0.7)


def test_distribution_set_shared_support():
    with pytest.raises(ValueError):
        DistributionSet([bernoulli_pmf(0.3), bernoulli_pmf(0.3, support=(1, 0))])
    with pytest.raises(ValueError):
        DistributionSet([])


def test_json_round_trip(tmp_path):
    pi = DistributionSet([bernoulli_pmf(Fraction(3, 10), mode=RATIONAL), bernoulli_pmf(Fraction(7, 10), mode=RATIONAL)])
    path = tmp_path / "pi.json"
    pi.dump(path)
    data = json.loads(path.read_text())
    assert set(data) == {"support", "members"}
    back = DistributionSet.load(path, RATIONAL)
    assert back.fingerprint() == pi.fingerprint()
    assert [p.mass for p in back] == [p.mass for p in pi]


def test_fingerprint_is_mode_independent():
    a = DistributionSet([bernoulli_pmf(0.3), bernoulli_pmf(0.7)])
    assert a.fingerprint() == a.to_mode(RATIONAL).fingerprint()
    b = DistributionSet([bernoulli_pmf(0.3), bernoulli_pmf(0.6)])
    assert a.fingerprint() != b.fingerprint()


def test_strict_positivity():
    cert = strict_positivity(DistributionSet([bernoulli_pmf(0.3), bernoulli_pmf(0.7)]))
    assert cert.holds and math.isclose(cert.c, 0.3)
    cert = strict_positivity(DistributionSet([bernoulli_pmf(1.0), bernoulli_pmf(0.7)]))
    assert not cert.holds and cert.c == 0


# ---------------------------------------------------------------------------
# quantisation


def test_quantization_grid():
    g = quantization_grid()
    assert len(g) == 256 and g[0] == Fraction(-1, 2) and g[-1] == Fraction(127, 256)


@pytest.mark.parametrize("mu,sigma", [(0.0, 0.12), (0.2, 0.1), (-0.3, 0.05), (0.45, 0.2)])
def test_quantized_gaussian_matches_quadrature(mu, sigma):
    pmf = quantized_gaussian(mu, sigma)
    assert len(pmf) == 256
    assert abs(math.fsum(pmf.mass) - 1) <= 1e-12
    pdf = lambda x: math.exp(-((x - mu) ** 2) / (2 * sigma**2)) / (sigma * math.sqrt(2 * math.pi))
    z = integrate.quad(pdf, -0.5, 0.5, points=[mu], epsabs=1e-14)[0]
    for i in (0, 64, 128, 140, 200, 255):
        lo, hi = (i - 128) / 256, (i - 127) / 256
        cell = integrate.quad(pdf, lo, hi, epsabs=1e-15, epsrel=1e-12)[0] / z
        assert math.isclose(pmf.mass[i], cell, rel_tol=1e-7, abs_tol=1e-300)


@pytest.mark.parametrize("mu,sigma", [(0.0, 0.12), (0.2, 0.12)])
def test_quantized_laplacian_closed_form(mu, sigma):
    pmf = quantized_laplacian(mu, sigma)
    assert abs(math.fsum(pmf.mass) - 1) <= 1e-12
    b = sigma / math.sqrt(2)

    def cdf(x):
        return 0.5 * math.exp((x - mu) / b) if x < mu else 1 - 0.5 * math.exp(-(x - mu) / b)

    z = cdf(0.5) - cdf(-0.5)
    for i in range(0, 256, 17):
        lo, hi = (i - 128) / 256, (i - 127) / 256
        assert math.isclose(pmf.mass[i], (cdf(hi) - cdf(lo)) / z, rel_tol=1e-9, abs_tol=1e-300)


def test_laplacian_variance_parameter():
    # the untruncated law has standard deviation sigma
    sigma = 0.12
    b = sigma / math.sqrt(2)
    assert math.isclose(stats.laplace(scale=b).std(), sigma)


def test_sgd_sets():
    for name in SGD_SETTINGS:
        pi = sgd_distribution_set(name)
        assert len(pi) == 2 and pi.m == 256
        for pmf in pi:
            assert abs(math.fsum(pmf.mass) - 1) <= 1e-12
    assert strict_positivity(sgd_distribution_set("pi1")).holds
    with pytest.raises(ValueError):
        sgd_distribution_set("pi9")


# ---------------------------------------------------------------------------
# hull reduction


def test_bernoulli_reduction():
    pi = DistributionSet([bernoulli_pmf(0.3), bernoulli_pmf(0.5), bernoulli_pmf(0.7)])
    assert vertex_indices(pi, FLOAT) == [0, 2]
    assert vertex_indices(pi, RATIONAL) == [0, 2]
    assert [p.mass[0] for p in reduce_to_vertices(pi)] == [0.3, 0.7]


def test_duplicates_keep_first():
    pi = DistributionSet([bernoulli_pmf(0.3), bernoulli_pmf(0.3), bernoulli_pmf(0.7)])
    assert vertex_indices(pi, RATIONAL) == [0, 2]
    single = DistributionSet([bernoulli_pmf(0.4), bernoulli_pmf(0.4)])
    assert vertex_indices(single, RATIONAL) == [0]


_simplex_point = st.tuples(st.integers(0, 8), st.integers(0, 8)).filter(lambda t: t[0] + t[1] <= 8).map(
    lambda t: (Fraction(t[0], 8), Fraction(t[1], 8), 1 - Fraction(t[0] + t[1], 8))
)


@settings(max_examples=60, deadline=None)
@given(st.lists(_simplex_point, min_size=1, max_size=5), _simplex_point)
def test_hull_membership_matches_planar_oracle(others, point):
    expect = oracles.in_hull_2d(point[:2], [o[:2] for o in others])
    assert in_convex_hull(point, others, RATIONAL) == expect
    assert in_convex_hull([float(v) for v in point], [[float(v) for v in o] for o in others], FLOAT) == expect


@settings(max_examples=40, deadline=None)
@given(st.lists(_simplex_point, min_size=1, max_size=6, unique=True))
def test_vertex_indices_match_planar_oracle(points):
    pi = DistributionSet([FinitePMF((0, 1, 2), p) for p in points])
    expect = [
        i for i, p in enumerate(points)
        if not oracles.in_hull_2d(p[:2], [q[:2] for j, q in enumerate(points) if j != i])
    ] or [0]
    assert vertex_indices(pi, RATIONAL) == expect
