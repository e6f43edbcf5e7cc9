"""Two-stage inspection markets: thresholds, equilibrium prices and surplus.

Each product has match value X + Y.  A buyer pays ``c_x`` to learn X and then
``c_y`` to learn Y.  ``H`` is the law of W = X + min(Y, r) and ``K`` the law of
Z = X + Y.  Prices can be revealed with X (stage 1), with Y (stage 2), or in a
single-stage benchmark where one inspection at cost ``c_x + c_y`` reveals Z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize

from .capped import capped_sum, sum_distribution
from .dist import (Distribution, TruncatedNormal, UniformInterval, distribution_literal, hazard,
                   log_concavity_check, parse_distribution, positive_density_check, solve_threshold)
from .errors import DomainError, EquilibriumNonexistence, ValidationError
from .quadrature import integrate

STAGE1, STAGE2, BENCHMARK = "stage1", "stage2", "benchmark"
REGIMES = (STAGE1, STAGE2, BENCHMARK)
SURVIVAL_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class MarketModel:
    """Primitives of the search market.

    ``n`` is a firm count or ``math.inf``.  With infinitely many firms, ``L`` is
    read as the per-firm share ``s``; otherwise ``s = L / n``.
    """

    F: Distribution
    G: Distribution
    c_x: float
    c_y: float
    n: float = math.inf
    L: float = 1.0

    def __post_init__(self):
        problems = []
        for name, d in (("F", self.F), ("G", self.G)):
            if not isinstance(d, Distribution):
                problems.append(f"{name} is not a distribution")
            elif d.is_discrete:
                problems.append(f"{name} must be continuous")
            elif not positive_density_check(d):
                problems.append(f"{name} must have a positive density on its support")
        for name, c in (("c_x", self.c_x), ("c_y", self.c_y)):
            if not (isinstance(c, (int, float)) and math.isfinite(c) and c > 0):
                problems.append(f"{name} must be a positive number, got {c!r}")
        if not (self.n == math.inf or (float(self.n).is_integer() and self.n >= 1)):
            problems.append(f"n must be a positive integer or inf, got {self.n!r}")
        if not (math.isfinite(self.L) and self.L > 0):
            problems.append(f"L must be positive, got {self.L!r}")
        if not problems and self.F.upper + self.G.upper <= 0:
            problems.append("max X + max Y must be positive")
        if problems:
            raise ValidationError(f"{len(problems)} problem(s) in market", problems)

    @property
    def share(self):
        return self.L if self.n == math.inf else self.L / self.n

    # thresholds and laws ----------------------------------------------
    @cached_property
    def r(self):
        return solve_threshold(self.G, self.c_y)

    @cached_property
    def H(self):
        return capped_sum(self.F, self.G, self.r)

    @cached_property
    def K(self):
        return sum_distribution(self.F, self.G)

    @cached_property
    def sigma(self):
        return solve_threshold(self.H, self.c_x)

    @cached_property
    def sigma_hat(self):
        return solve_threshold(self.K, self.c_x + self.c_y)

    @cached_property
    def sigma_star(self):
        return hazard_threshold(self.H)

    @cached_property
    def sigma_hat_star(self):
        return hazard_threshold(self.K)

    @cached_property
    def stage2_threshold(self):
        """(1 - G(r)) / g(r), the bound above which stage-2 search stays active."""
        g = float(self.G.pdf(self.r))
        if g <= 0:
            return math.inf
        return float(self.G.sf(self.r)) / g

    @cached_property
    def log_concave(self):
        return log_concavity_check(self.F) and log_concavity_check(self.G)

    def law(self, regime):
        return self.K if regime == BENCHMARK else self.H

    def index(self, regime):
        return self.sigma_hat if regime == BENCHMARK else self.sigma


# --------------------------------------------------------------------------
# thresholds


def solve_r(m):
    return m.r


def solve_sigma(m):
    return m.sigma


def solve_sigma_hat(m):
    return m.sigma_hat


def _mills(d, w):
    return float(d.sf(w)) / float(d.pdf(w))


def hazard_threshold(d, grid=2001):
    """Point where w = (1 - D(w)) / d(w); the lower support end if w already dominates there."""
    lo = d.lower

    def gap(w):
        return w - _mills(d, w)

    pts = np.linspace(lo, d.upper, grid)[:-1]
    surv, dens = np.asarray(d.sf(pts)), np.asarray(d.pdf(pts))
    keep = (surv > SURVIVAL_FLOOR) & (dens > 0)
    pts = pts[keep]
    vals = pts - surv[keep] / dens[keep]
    if vals[0] >= 0:
        return float(lo)
    crossing = np.nonzero(vals >= 0)[0]
    if crossing.size == 0:
        return float(pts[-1])
    k = int(crossing[0])
    return float(optimize.brentq(gap, pts[k - 1], pts[k], xtol=1e-14, rtol=1e-15))


def sigma_star(m):
    return m.sigma_star


# --------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class Admissibility:
    log_concave: bool
    stage1_active: bool
    stage2_active: bool
    benchmark_active: bool

    @property
    def all(self):
        return self.log_concave and self.stage1_active and self.stage2_active and self.benchmark_active


def admissibility(m):
    return Admissibility(
        log_concave=m.log_concave,
        stage1_active=m.sigma > m.sigma_star,
        stage2_active=m.sigma > m.stage2_threshold,
        benchmark_active=m.sigma_hat > m.sigma_hat_star,
    )


def _require_monopolistic(m):
    if m.n != math.inf:
        raise DomainError("closed-form equilibrium prices need n = inf; use duopoly_fixed_point for finite n")


def _require_log_concave(m):
    if not m.log_concave:
        raise EquilibriumNonexistence("densities are not log-concave", reason="log-concavity")


# --------------------------------------------------------------------------
# equilibrium prices under monopolistic competition


def p_star(m):
    """Stage-1 price (1 - H(sigma)) / h(sigma)."""
    _require_monopolistic(m)
    _require_log_concave(m)
    if not m.sigma > m.sigma_star:
        raise EquilibriumNonexistence("search is not active at stage 1", sigma=m.sigma, sigma_star=m.sigma_star)
    return 1.0 / hazard(m.H, m.sigma)


def _phi_terms(m, w, shift):
    """Integrals over x >= w - r of [1 - G(w + shift - x)] f(x) and g(w + shift - x) f(x)."""
    F, G = m.F, m.G
    a, b = max(w - m.r, F.lower), F.upper
    t = w + shift
    breaks = list(F.breakpoints()) + [t - y for y in G.breakpoints()]
    num = integrate(lambda x: np.asarray(G.sf(t - x)) * np.asarray(F.pdf(x)), a, b, breaks)
    den = integrate(lambda x: np.asarray(G.pdf(t - x)) * np.asarray(F.pdf(x)), a, b, breaks)
    return num, den


def p_dagger(m):
    """Stage-2 price: ratio of the survival and density integrals at sigma."""
    _require_monopolistic(m)
    _require_log_concave(m)
    if not m.sigma > m.stage2_threshold:
        raise EquilibriumNonexistence("search is not active at stage 2", sigma=m.sigma,
                                      threshold=m.stage2_threshold)
    num, den = _phi_terms(m, m.sigma, 0.0)
    if den <= 0:
        raise DomainError("stage-2 density integral vanishes")
    return num / den


def p_hat(m):
    """Benchmark price (1 - K(sigma_hat)) / k(sigma_hat)."""
    _require_monopolistic(m)
    _require_log_concave(m)
    if not m.sigma_hat > m.sigma_hat_star:
        raise EquilibriumNonexistence("search is not active in the benchmark", sigma_hat=m.sigma_hat,
                                      sigma_hat_star=m.sigma_hat_star)
    return 1.0 / hazard(m.K, m.sigma_hat)


def equilibrium_price(m, regime):
    return {STAGE1: p_star, STAGE2: p_dagger, BENCHMARK: p_hat}[_regime(regime)](m)


def _regime(regime):
    if regime not in REGIMES:
        raise ValidationError(f"unknown regime {regime!r}; choose from {', '.join(REGIMES)}")
    return regime


# --------------------------------------------------------------------------
# demand


def phi(m, w, p, reference):
    """Pr(X + r >= w and X + Y >= w - reference + p)."""
    return _phi_terms(m, w, p - reference)[0]


def phi_dp(m, w, p, reference):
    return -_phi_terms(m, w, p - reference)[1]


@dataclass(frozen=True, eq=False)
class DemandCurve:
    """One firm's demand when every rival charges ``reference``.

    Stage 1 and the benchmark share a form, with (H, sigma) or (K, sigma_hat).
    Stage 2 uses the joint survival ``phi``.
    """

    market: MarketModel
    regime: str
    reference: float

    def __post_init__(self):
        _regime(self.regime)

    @property
    def _geometric(self):
        """(1/n) * sum_{j<n} H(sigma)^j, with the per-firm share folded in."""
        m = self.market
        s = float(m.law(self.regime).cdf(m.index(self.regime)))
        if m.n == math.inf:
            return m.share / (1.0 - s)
        return m.share * (1.0 - s ** m.n) / (1.0 - s)

    def _check(self, p):
        p = float(p)
        if p < 0:
            raise DomainError(f"price must be nonnegative, got {p}")
        return p

    def demand(self, p):
        p = self._check(p)
        m, q = self.market, self.reference
        if self.regime == STAGE2:
            return self._stage2(p, derivative=False)
        d, sig = m.law(self.regime), m.index(self.regime)
        first = float(d.sf(sig - q + p)) * self._geometric
        if m.n == math.inf or m.n == 1:
            return first
        n = m.n
        # rival-return term after the substitution u = w - p + q
        second = integrate(lambda u: np.asarray(d.cdf(u)) ** (n - 1) * np.asarray(d.pdf(u + p - q)),
                           q, sig, _shifted_breaks(d, p - q))
        return first + m.L * second

    def derivative(self, p):
        """Exact derivative in own price, including jumps of the density."""
        p = self._check(p)
        m, q = self.market, self.reference
        if self.regime == STAGE2:
            return self._stage2(p, derivative=True)
        d, sig = m.law(self.regime), m.index(self.regime)
        first = -float(d.pdf(sig - q + p)) * self._geometric
        if m.n == math.inf or m.n == 1:
            return first
        n = m.n
        smooth = integrate(lambda u: np.asarray(d.cdf(u)) ** (n - 1) * np.asarray(d.dpdf(u + p - q)),
                           q, sig, _shifted_breaks(d, p - q))
        jumps = sum(float(d.cdf(b - p + q)) ** (n - 1) * d.pdf_jump(b)
                    for b in d.breakpoints() if q < b - p + q < sig)
        return first + m.L * (smooth + jumps)

    def _stage2(self, p, derivative):
        m, q, sig = self.market, self.reference, self.market.sigma
        pick = (lambda w: phi_dp(m, w, p, q)) if derivative else (lambda w: phi(m, w, p, q))
        at_sigma = pick(sig)
        total = at_sigma * self._geometric
        if m.n == math.inf or m.n == 1 or q >= sig:
            return total
        n, H = m.n, m.H
        ws = _stage2_nodes(H, q, sig)
        vals = np.array([pick(w) - at_sigma for w in ws[0]])
        weight = (n - 1) * np.asarray(H.cdf(ws[0])) ** (n - 2) * np.asarray(H.pdf(ws[0]))
        return total + m.L * float(np.sum(vals * weight * ws[1]))

    def profit(self, p):
        return float(p) * self.demand(p)

    def profit_slope(self, p):
        return self.demand(p) + float(p) * self.derivative(p)


def _shifted_breaks(d, shift):
    return sorted(set(d.breakpoints()) | {b - shift for b in d.breakpoints()})


def _stage2_nodes(H, a, b):
    from .quadrature import _rule, ORDER, PANELS
    edges = [a, *[x for x in H.breakpoints() if a < x < b], b]
    t, wt = _rule(ORDER, PANELS)
    nodes, weights = [], []
    for lo, hi in zip(edges, edges[1:]):
        nodes.append(lo + (hi - lo) * t)
        weights.append((hi - lo) * wt)
    return np.concatenate(nodes), np.concatenate(weights)


def demand(curve, p):
    return curve.demand(p)


def elasticity(m, regime, p):
    """p times the hazard of H (stage 1 and 2) or K (benchmark) at p."""
    return float(p) * hazard(m.law(_regime(regime)), p)


# --------------------------------------------------------------------------
# small markets


@dataclass(frozen=True)
class DuopolyResult:
    """A root of the displayed first-order condition, labeled as a candidate."""

    regime: str
    price: float
    residual: float
    iterations: int
    method: str
    profit_slope: float
    profit_curvature: float
    best_response: float
    label: str = "candidate"

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def foc_ratio(m, regime, p):
    """Right-hand side of the displayed finite-n first-order condition at price p."""
    regime = _regime(regime)
    if regime == STAGE2:
        raise ValidationError("the small-market condition is available for stage1 and benchmark")
    n = m.n
    d, sig = m.law(regime), m.index(regime)
    s = float(d.cdf(sig))
    geo = (1.0 - s ** n) / (1.0 - s) / n
    num = float(d.sf(sig)) * geo + (s ** n - float(d.cdf(p)) ** n) / n
    brk = [x for x in d.breakpoints()]
    smooth = integrate(lambda w: np.asarray(d.cdf(w)) ** (n - 1) * np.asarray(d.dpdf(w)), p, sig, brk)
    # h' read as a Stieltjes derivative: add jumps of the density inside (p, sig)
    jumps = sum(float(d.cdf(b)) ** (n - 1) * d.pdf_jump(b) for b in brk if p < b < sig)
    den = float(d.pdf(sig)) * geo + smooth + jumps
    return num / den


def duopoly_fixed_point(m, regime=STAGE1, tol=1e-12, max_iter=500):
    """Solve p = foc_ratio(p) by damped iteration, falling back to Brent's method."""
    if m.n == math.inf or m.n < 2:
        raise DomainError("the small-market condition needs a finite n >= 2")
    regime = _regime(regime)
    sig = m.index(regime)
    lo, hi = 0.0, sig

    def resid(p):
        return p - foc_ratio(m, regime, p)

    p, method, it = 0.5 * (lo + hi), "damped", 0
    try:
        for it in range(1, max_iter + 1):
            nxt = 0.5 * p + 0.5 * foc_ratio(m, regime, p)
            if not math.isfinite(nxt) or not lo <= nxt <= hi:
                raise ArithmeticError
            if abs(nxt - p) <= tol:
                p = nxt
                break
            p = nxt
        else:
            raise ArithmeticError
    except (ArithmeticError, ZeroDivisionError):
        method = "brent"
        a, b = lo + 1e-12, hi
        if not resid(a) * resid(b) < 0:
            raise EquilibriumNonexistence("no fixed point of the first-order condition in the price range",
                                          lower=a, upper=b) from None
        p = optimize.brentq(resid, a, b, xtol=tol, rtol=1e-15)
    curve = DemandCurve(m, regime, p)
    step = 1e-5
    slope = curve.profit_slope(p)
    curvature = (curve.profit_slope(p + step) - curve.profit_slope(p - step)) / (2 * step)
    br = optimize.minimize_scalar(lambda x: -curve.profit(x), bounds=(0.0, hi), method="bounded",
                                  options={"xatol": 1e-10})
    return DuopolyResult(regime, float(p), float(resid(p)), it, method, slope, curvature, float(br.x))


# --------------------------------------------------------------------------
# surplus and reports


def consumer_surplus(m, regime):
    regime = _regime(regime)
    return m.index(regime) - equilibrium_price(m, regime)


@dataclass(frozen=True)
class RegulationReport:
    regulated_price: float | None
    unregulated_price: float | None
    surplus_gain: float | None
    flags: Admissibility

    def as_dict(self):
        return {"regulated_price": self.regulated_price, "unregulated_price": self.unregulated_price,
                "surplus_gain": self.surplus_gain, **_flag_dict(self.flags)}


def regulation_report(m):
    """Prices with (stage 1) and without (stage 2) mandatory early disclosure."""
    _require_monopolistic(m)
    flags = admissibility(m)
    if not flags.all:
        return RegulationReport(None, None, None, flags)
    reg, unreg = p_star(m), p_dagger(m)
    return RegulationReport(reg, unreg, unreg - reg, flags)


def _flag_dict(flags):
    return {"log_concave": flags.log_concave, "stage1_active": flags.stage1_active,
            "stage2_active": flags.stage2_active, "benchmark_active": flags.benchmark_active}


@dataclass(frozen=True)
class EquilibriumReport:
    r: float
    sigma: float
    sigma_hat: float
    sigma_star: float
    sigma_hat_star: float
    stage2_threshold: float
    flags: Admissibility
    p_star: float | None = None
    p_dagger: float | None = None
    p_hat: float | None = None
    cs_stage1: float | None = None
    cs_stage2: float | None = None
    cs_benchmark: float | None = None
    notes: tuple = field(default=())

    def as_dict(self):
        out = {k: getattr(self, k) for k in ("r", "sigma", "sigma_hat", "sigma_star", "sigma_hat_star",
                                             "stage2_threshold", "p_star", "p_dagger", "p_hat",
                                             "cs_stage1", "cs_stage2", "cs_benchmark")}
        out.update(_flag_dict(self.flags))
        out["notes"] = list(self.notes)
        return out


def equilibrium_report(m):
    """All thresholds, flags, and whichever prices their conditions allow."""
    _require_monopolistic(m)
    flags = admissibility(m)
    prices, notes = {}, []
    for key, fn in (("p_star", p_star), ("p_dagger", p_dagger), ("p_hat", p_hat)):
        try:
            prices[key] = fn(m)
        except EquilibriumNonexistence as exc:
            notes.append(f"{key}: {exc}")
    cs = {}
    if "p_star" in prices:
        cs["cs_stage1"] = m.sigma - prices["p_star"]
    if "p_dagger" in prices:
        cs["cs_stage2"] = m.sigma - prices["p_dagger"]
    if "p_hat" in prices:
        cs["cs_benchmark"] = m.sigma_hat - prices["p_hat"]
    return EquilibriumReport(m.r, m.sigma, m.sigma_hat, m.sigma_star, m.sigma_hat_star, m.stage2_threshold,
                             flags, **prices, **cs, notes=tuple(notes))


def foc_residuals(m):
    """p + D(p)/D'(p) at each equilibrium price, from the demand curves."""
    out = {}
    for regime, fn in ((STAGE1, p_star), (STAGE2, p_dagger), (BENCHMARK, p_hat)):
        p = fn(m)
        curve = DemandCurve(m, regime, p)
        out[regime] = p + curve.demand(p) / curve.derivative(p)
    return out


# --------------------------------------------------------------------------
# checks used by the order-relation suite


def hazard_dominance_gap(m, points=1000):
    """Smallest hazard(H) - hazard(K) on a shared grid where both survivals are non-negligible."""
    H, K = m.H, m.K
    grid = np.linspace(H.lower, H.upper, points + 1)[:-1]
    sH, sK = np.asarray(H.sf(grid)), np.asarray(K.sf(grid))
    keep = (sH > SURVIVAL_FLOOR) & (sK > SURVIVAL_FLOOR)
    grid = grid[keep]
    lam_h = np.asarray(H.pdf(grid)) / sH[keep]
    lam_k = np.asarray(K.pdf(grid)) / sK[keep]
    return float(np.min(lam_h - lam_k))


def excess_split_gap(m, rng, size=10_000):
    """Smallest value of (W - s)^+ + (Y - r)^+ - (Z - s)^+ over sampled (X, Y) and s = sigma."""
    x = m.F.sample(rng, size)
    y = m.G.sample(rng, size)
    w, z = x + np.minimum(y, m.r), x + y
    s = m.sigma
    return float(np.min(np.maximum(w - s, 0) + np.maximum(y - m.r, 0) - np.maximum(z - s, 0)))


def random_market(rng, families=("uniform", "truncnormal"), max_tries=200):
    """A random admissible market with n = inf."""
    for _ in range(max_tries):
        F = _random_dist(rng, families[int(rng.integers(len(families)))])
        G = _random_dist(rng, families[int(rng.integers(len(families)))])
        if F.upper + G.upper <= 0:
            continue
        c_y = float(rng.uniform(0.02, 0.4)) * (G.mean - G.lower)
        tmp = MarketModel(F, G, 1.0, c_y)
        span = tmp.H.mean - tmp.H.lower
        c_x = float(rng.uniform(0.01, 0.3)) * span
        m = MarketModel(F, G, c_x, c_y)
        try:
            if admissibility(m).all:
                return m
        except DomainError:
            continue
    raise RuntimeError("no admissible market found")


def _random_dist(rng, family):
    if family == "uniform":
        a = float(rng.uniform(-0.5, 0.5))
        return UniformInterval(a, a + float(rng.uniform(0.5, 2.0)))
    mu = float(rng.uniform(-0.5, 0.5))
    sd = float(rng.uniform(0.2, 1.0))
    return TruncatedNormal(mu, sd, mu - float(rng.uniform(0.5, 2.5)) * sd, mu + float(rng.uniform(0.5, 2.5)) * sd)


# --------------------------------------------------------------------------
# input


def parse_market(doc):
    """Market from ``{"F": ..., "G": ..., "cX": ..., "cY": ..., "n": int | "inf", "L": ...}``."""
    if not isinstance(doc, dict):
        raise ValidationError("market must be a JSON object")
    missing = [k for k in ("F", "G", "cX", "cY") if k not in doc]
    unknown = sorted(set(doc) - {"F", "G", "cX", "cY", "n", "L"})
    problems = [f"missing field {k!r}" for k in missing] + [f"unknown field {k!r}" for k in unknown]
    if problems:
        raise ValidationError(f"{len(problems)} problem(s) in market", problems)
    n = doc.get("n", "inf")
    if n in ("inf", "Infinite", "infinite"):
        n = math.inf
    elif isinstance(n, bool) or not isinstance(n, int):
        raise ValidationError(f"n must be an integer or \"inf\", got {n!r}")
    try:
        c_x, c_y, L = float(doc["cX"]), float(doc["cY"]), float(doc.get("L", 1.0))
    except (TypeError, ValueError):
        raise ValidationError("cX, cY and L must be numbers") from None
    return MarketModel(parse_distribution(doc["F"]), parse_distribution(doc["G"]), c_x, c_y, n, L)


def market_to_dict(m):
    return {"F": distribution_literal(m.F), "G": distribution_literal(m.G), "cX": m.c_x, "cY": m.c_y,
            "n": "inf" if m.n == math.inf else int(m.n), "L": m.L}
