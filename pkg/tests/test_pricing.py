import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from nestedsearch.dist import PiecewisePDF, TruncatedNormal, UniformInterval, hazard
from nestedsearch.errors import DomainError, EquilibriumNonexistence, ValidationError
from nestedsearch.pricing import (BENCHMARK, STAGE1, STAGE2, DemandCurve, MarketModel, admissibility,
                                  duopoly_fixed_point, elasticity, equilibrium_report, excess_split_gap,
                                  foc_residuals, hazard_dominance_gap, market_to_dict, p_dagger, p_hat, p_star,
                                  parse_market, phi, random_market, regulation_report)

U = UniformInterval(0.0, 1.0)


@pytest.fixture(scope="module")
def example():
    return MarketModel(U, U, 0.05, 0.1)


@pytest.fixture(scope="module")
def duo():
    return MarketModel(U, U, 0.05, 0.1, n=2, L=1.0)


def test_uniform_thresholds(example):
    assert example.r == pytest.approx(1 - math.sqrt(0.2), abs=1e-12)
    assert example.sigma_hat == pytest.approx(2 - 0.9 ** (1 / 3), abs=1e-12)
    r = example.r

    def excess(s):
        # E[(X + min(Y, r) - s)^+] by direct double integration
        body = integrate.dblquad(lambda y, x: max(x + min(y, r) - s, 0.0), 0, 1, 0, 1,
                                 epsabs=1e-13, epsrel=1e-13)[0]
        return body - 0.05

    assert example.sigma == pytest.approx(optimize.brentq(excess, 0.9, 1.5, xtol=1e-12), abs=1e-8)
    assert example.sigma == pytest.approx(1.1393, abs=5e-4)


def test_uniform_prices(example):
    s, sh, r = example.sigma, example.sigma_hat, example.r
    # above r the density of X + min(Y, r) is 2 - w; survival by double integration
    surv = integrate.quad(lambda x: 1 - min(max(s - x, 0.0), 1.0) if s - x <= r else 0.0, 0, 1,
                          points=[s - r], epsabs=1e-13)[0]
    assert p_star(example) == pytest.approx(surv / (2 - s), abs=1e-6)
    assert p_hat(example) == pytest.approx((2 - sh) / 2, abs=1e-12)
    a = s - r
    closed = ((1 - s) * (1 - a) + (1 - a * a) / 2) / (1 - a)
    assert p_dagger(example) == pytest.approx(closed, abs=1e-12)
    assert p_star(example) < p_hat(example) < p_dagger(example)


def test_full_cost_gives_zero_reservation():
    m = MarketModel(U, U, 0.05, 0.5)
    assert m.r == pytest.approx(0.0, abs=1e-12)
    # W = X, so sigma solves (1 - s)^2 / 2 = 0.05
    assert m.sigma == pytest.approx(1 - math.sqrt(0.1), abs=1e-9)


def test_small_second_cost_approaches_benchmark():
    m = MarketModel(U, U, 0.05, 1e-8)
    assert m.r == pytest.approx(1.0, abs=1e-3)
    assert m.sigma == pytest.approx(m.sigma_hat, abs=1e-3)


def test_no_option_value_equality():
    m = MarketModel(UniformInterval(2.0, 3.0), U, 0.4, 0.1)
    assert m.F.lower + m.r >= m.sigma
    assert p_dagger(m) == pytest.approx(p_star(m), abs=1e-9)
    rep = regulation_report(m)
    assert rep.surplus_gain == pytest.approx(0.0, abs=1e-9)
    out = equilibrium_report(m)
    assert out.cs_stage1 == pytest.approx(out.cs_stage2, abs=1e-9)


def test_regulation_gain(example):
    rep = regulation_report(example)
    assert rep.regulated_price == pytest.approx(p_star(example))
    assert rep.surplus_gain > 0
    assert rep.flags.all


def test_non_log_concave_market_is_flagged():
    dip = PiecewisePDF((0.0, 0.5, 1.0), ((0.5,), (1.5,)))
    m = MarketModel(dip, U, 0.05, 0.1)
    assert not m.log_concave
    assert MarketModel(U, TruncatedNormal(0, 1, -1, 1), 0.05, 0.1).log_concave
    with pytest.raises(EquilibriumNonexistence):
        p_star(m)
    rep = regulation_report(m)
    assert rep.regulated_price is None and not rep.flags.log_concave
    assert equilibrium_report(m).p_star is None


def test_inactive_search_is_reported():
    m = MarketModel(U, U, 0.45, 0.1)
    flags = admissibility(m)
    assert not flags.stage1_active
    with pytest.raises(EquilibriumNonexistence):
        p_star(m)


def test_finite_n_needs_fixed_point(duo):
    with pytest.raises(DomainError):
        p_star(duo)


def test_phi_against_double_integral(example):
    ref = p_dagger(example)
    s, r = example.sigma, example.r
    for p in (0.4, ref, 0.8):
        t = s - ref + p
        direct = integrate.quad(lambda x: 1 - min(max(t - x, 0.0), 1.0), s - r, 1, points=[t - 1, t])[0]
        assert phi(example, s, p, ref) == pytest.approx(direct, abs=1e-10)


@pytest.mark.parametrize("regime", [STAGE1, STAGE2, BENCHMARK])
def test_demand_derivative_matches_differences(example, duo, regime):
    for m in (example, duo):
        curve = DemandCurve(m, regime, 0.5)
        for p in (0.3, 0.5, 0.62):
            h = 1e-6
            fd = (curve.demand(p + h) - curve.demand(p - h)) / (2 * h)
            assert curve.derivative(p) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_demand_rejects_negative_price(example):
    with pytest.raises(DomainError):
        DemandCurve(example, STAGE1, 0.5).demand(-0.1)


def test_foc_residuals(example):
    for v in foc_residuals(example).values():
        assert abs(v) <= 1e-8


def test_elasticity(example):
    assert elasticity(example, STAGE1, 0.5) == pytest.approx(0.5 / 1.75, abs=1e-9)
    for p in np.linspace(0.05, 1.0, 12):
        assert elasticity(example, STAGE1, p) >= elasticity(example, BENCHMARK, p) - 1e-9


def test_duopoly_candidates(duo):
    a = duopoly_fixed_point(duo, STAGE1)
    b = duopoly_fixed_point(duo, BENCHMARK)
    assert a.label == b.label == "candidate"
    assert a.price == pytest.approx(0.6989, abs=1e-3)
    assert b.price == pytest.approx(0.5671, abs=1e-3)
    assert a.price > b.price
    assert abs(a.residual) <= 1e-8 and abs(b.residual) <= 1e-8
    with pytest.raises(ValidationError):
        duopoly_fixed_point(duo, STAGE2)


def test_duopoly_needs_finite_market(example):
    with pytest.raises(DomainError):
        duopoly_fixed_point(example)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_random_market_relations(seed):
    m = random_market(np.random.default_rng(seed))
    assert m.sigma >= m.sigma_hat - 1e-9
    assert hazard_dominance_gap(m) >= -1e-9
    assert excess_split_gap(m, np.random.default_rng(seed), 2000) >= -1e-12
    ps, pd, ph = p_star(m), p_dagger(m), p_hat(m)
    assert ps <= ph + 1e-9 and ps <= pd + 1e-9
    assert m.sigma - ps >= m.sigma_hat - ph - 1e-9


def test_truncnormal_hazard_increasing():
    m = MarketModel(TruncatedNormal(0, 0.5, -1, 1), TruncatedNormal(0.2, 0.3, -0.5, 1), 0.05, 0.05)
    grid = np.linspace(m.H.lower, m.H.upper - 0.05, 400)
    lam = np.array([hazard(m.H, t) for t in grid])
    assert np.all(np.diff(lam) >= -1e-9)


def test_parse_market_round_trip(example):
    again = parse_market(market_to_dict(example))
    assert again.sigma == example.sigma
    assert parse_market({"F": {"uniform": [0, 1]}, "G": {"uniform": [0, 1]}, "cX": 0.05, "cY": 0.1,
                         "n": 2}).n == 2


@pytest.mark.parametrize("doc", [
    [],
    {"F": {"uniform": [0, 1]}, "G": {"uniform": [0, 1]}, "cX": 0.05},
    {"F": {"uniform": [0, 1]}, "G": {"uniform": [0, 1]}, "cX": 0.05, "cY": 0.1, "extra": 1},
    {"F": {"uniform": [0, 1]}, "G": {"uniform": [0, 1]}, "cX": 0.05, "cY": 0.1, "n": 1.5},
    {"F": {"uniform": [0, 1]}, "G": {"uniform": [0, 1]}, "cX": -1, "cY": 0.1},
    {"F": {"pmf": [[0, 1]]}, "G": {"uniform": [0, 1]}, "cX": 0.05, "cY": 0.1},
    {"F": {"uniform": [0, 1]}, "G": {"uniform": [0, 1]}, "cX": "x", "cY": 0.1},
])
def test_parse_market_errors(doc):
    with pytest.raises(ValidationError):
        parse_market(doc)
