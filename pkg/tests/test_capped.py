import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from nestedsearch.capped import QuadratureCappedLaw, capped_sum, sum_distribution
from nestedsearch.dist import DiscretePMF, PiecewisePDF, TruncatedNormal, UniformInterval
from nestedsearch.errors import UnsupportedOperation

R = 1 - 1 / math.sqrt(5)


def h_table(w):
    """Density of X + min(Y, r) for independent unit uniforms, piece by piece."""
    if w < 0 or w > 1 + R:
        return 0.0
    if w <= R:
        return w
    if w <= 1:
        return 1.0
    return 2 - w


def test_uniform_capped_sum_matches_table(unit):
    law = capped_sum(unit, unit, R).law
    assert isinstance(law, PiecewisePDF)
    np.testing.assert_allclose(law.breaks, (0.0, R, 1.0, 1 + R), atol=1e-14)
    for w in np.linspace(-0.1, 1.7, 37):
        assert law.pdf(w) == pytest.approx(h_table(w), abs=1e-12)
    # cdf branch on (1, 1 + r]
    w = 1.2
    assert law.cdf(w) == pytest.approx(-0.5 * w * w + 2 * w + 0.5 * R * R - R - 0.5, abs=1e-12)


def test_sum_of_uniforms_is_triangular(unit):
    k = sum_distribution(unit, unit).law
    np.testing.assert_allclose(k.breaks, (0.0, 1.0, 2.0))
    for z in (0.3, 1.0, 1.7):
        assert k.pdf(z) == pytest.approx(z if z <= 1 else 2 - z)


@given(st.floats(-1, 1), st.floats(0.3, 2), st.floats(-1, 1), st.floats(0.3, 2), st.floats(0.05, 0.95))
def test_exact_and_quadrature_routes_agree(a, wa, b, wb, frac):
    f, g = UniformInterval(a, a + wa), UniformInterval(b, b + wb)
    r = b + frac * wb
    exact = capped_sum(f, g, r).law
    quad = QuadratureCappedLaw(f, g, r)
    ws = np.linspace(exact.lower - 0.1, exact.upper + 0.1, 41)
    np.testing.assert_allclose(quad.cdf(ws), exact.cdf(ws), atol=1e-12)
    np.testing.assert_allclose(quad.expected_excess(ws), exact.expected_excess(ws), atol=1e-12)


def test_quadrature_law_against_scipy():
    f = TruncatedNormal(0.2, 0.5, -0.5, 1.0)
    g = TruncatedNormal(0.0, 0.7, -1.0, 1.2)
    r = 0.4
    law = capped_sum(f, g, r)
    atom = g.sf(r)

    def cdf(w):
        body = integrate.quad(lambda y: f.cdf(w - y) * g.pdf(y), g.lower, r, epsabs=1e-13, limit=200)[0]
        return body + atom * f.cdf(w - r)

    for w in (-0.8, 0.0, 0.5, 1.1):
        assert law.cdf(w) == pytest.approx(cdf(w), abs=1e-10)
    # density integrates to one and its derivative matches finite differences
    total = integrate.quad(law.pdf, law.lower, law.upper, points=law.breakpoints()[1:-1], limit=200)[0]
    assert total == pytest.approx(1.0, abs=1e-9)
    for w in (-0.3, 0.2, 0.9):
        fd = (law.pdf(w + 1e-6) - law.pdf(w - 1e-6)) / 2e-6
        assert law.dpdf(w) == pytest.approx(fd, abs=1e-5)


@pytest.mark.parametrize("families", [("u", "u"), ("n", "u"), ("n", "n")])
def test_capped_sum_has_increasing_hazard(families):
    make = {"u": lambda: UniformInterval(-0.2, 1.1), "n": lambda: TruncatedNormal(0.1, 0.6, -1.0, 1.4)}
    f, g = make[families[0]](), make[families[1]]()
    law = capped_sum(f, g, 0.5 * (g.lower + g.upper))
    grid = np.linspace(law.lower, law.upper, 1000)
    surv = law.sf(grid)
    keep = surv > 1e-9
    lam = law.pdf(grid[keep]) / surv[keep]
    assert np.all(np.diff(lam) >= -1e-9)


def test_discrete_capped_sum(coin):
    law = capped_sum(coin, coin, 0.5).law
    assert law.pairs() == [(0.0, 0.25), (0.5, 0.25), (1.0, 0.25), (1.5, 0.25)]


def test_mixed_inputs_rejected(coin, unit):
    with pytest.raises(UnsupportedOperation):
        capped_sum(coin, unit, 0.5)


def test_sampling_matches_law(unit):
    law = capped_sum(unit, unit, R)
    x = law.sample(np.random.default_rng(0), 200_000)
    assert np.mean(x <= 1.0) == pytest.approx(law.cdf(1.0), abs=5e-3)
