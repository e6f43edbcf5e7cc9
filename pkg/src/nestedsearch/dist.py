"""Distributions on bounded supports and the scalar primitives built on them.

Every distribution exposes the same small surface: ``cdf``, ``sf``,
``expected_excess`` and ``sample``; continuous ones add ``pdf``, ``dpdf``,
``breakpoints`` (points where the density is not smooth) and ``pdf_jump``.
All methods accept scalars or arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize, special

from .errors import DomainError, UnsupportedOperation, ValidationError
from .quadrature import integrate

PMF_TOL = 1e-12
MASS_TOL = 1e-9
THRESHOLD_TOL = 1e-10


def _ret(x, out):
    return float(out) if np.ndim(x) == 0 else out


class Distribution:
    is_discrete = False
    lower: float
    upper: float

    @property
    def support(self):
        return (self.lower, self.upper)

    def sf(self, x):
        return _ret(x, 1.0 - np.asarray(self.cdf(x), dtype=float))


# --------------------------------------------------------------------------
# discrete


@dataclass(frozen=True, eq=False)
class DiscretePMF(Distribution):
    """Finite PMF in canonical form: sorted, distinct values."""

    values: np.ndarray
    probs: np.ndarray
    is_discrete = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.ndim != 1 or v.shape != p.shape or v.size == 0:
            raise ValidationError("pmf needs matching nonempty value/probability lists")
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(p)):
            raise ValidationError("pmf values and probabilities must be finite")
        if np.any(p < 0):
            raise ValidationError("pmf probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > PMF_TOL * max(1, v.size) ** 0.5:
            raise ValidationError(f"pmf probabilities sum to {p.sum()!r}, not 1")
        order = np.argsort(v, kind="stable")
        v, p = v[order], p[order]
        if v.size > 1 and np.any(np.diff(v) == 0):
            v, inv = np.unique(v, return_inverse=True)
            p = np.bincount(inv, weights=p)
        keep = p > 0
        if not keep.all():
            v, p = v[keep], p[keep]
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_pairs(cls, pairs):
        pairs = list(pairs)
        return cls(np.array([v for v, _ in pairs], float), np.array([q for _, q in pairs], float))

    @classmethod
    def point(cls, value):
        return cls(np.array([float(value)]), np.array([1.0]))

    @classmethod
    def empirical(cls, samples):
        s = np.asarray(samples, dtype=float)
        return cls(s, np.full(s.size, 1.0 / s.size))

    def pairs(self):
        return list(zip(self.values.tolist(), self.probs.tolist()))

    @property
    def lower(self):
        return float(self.values[0])

    @property
    def upper(self):
        return float(self.values[-1])

    @cached_property
    def mean(self):
        return float(self.values @ self.probs)

    @cached_property
    def _tails(self):
        # tail sums over values strictly above index k
        tp = np.concatenate([np.cumsum(self.probs[::-1])[::-1][1:], [0.0]])
        tv = np.concatenate([np.cumsum((self.values * self.probs)[::-1])[::-1][1:], [0.0]])
        return tp, tv

    def cdf(self, x):
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
        return _ret(x, np.minimum(out, 1.0))

    def expected_excess(self, t):
        t_arr = np.asarray(t, dtype=float)
        tp, tv = self._tails
        idx = np.searchsorted(self.values, t_arr, side="right") - 1
        inside = idx >= 0
        k = np.maximum(idx, 0)
        out = np.where(inside, tv[k] - t_arr * tp[k], self.mean - t_arr)
        return _ret(t, np.maximum(out, 0.0))

    def sample(self, rng, size):
        return self.values[rng.choice(self.values.size, size=size, p=self.probs)]

    def map(self, fn):
        return DiscretePMF(np.array([fn(v) for v in self.values], float), self.probs.copy())

    def __repr__(self):
        return f"DiscretePMF({self.pairs()!r})"


def pmf_mixture(weights, pmfs):
    vals = np.concatenate([d.values for d in pmfs])
    probs = np.concatenate([w * d.probs for w, d in zip(weights, pmfs)])
    return DiscretePMF(vals, probs)


def pmf_max(pmfs):
    """Law of the maximum of independent discrete variables."""
    if len(pmfs) == 1:
        return pmfs[0]
    grid = np.unique(np.concatenate([d.values for d in pmfs]))
    cdf = np.ones_like(grid)
    for d in pmfs:
        cdf = cdf * d.cdf(grid)
    probs = np.diff(np.concatenate([[0.0], cdf]))
    probs[-1] += 1.0 - cdf[-1]
    return DiscretePMF(grid, np.maximum(probs, 0.0))


def pmf_min_const(d, cap):
    return DiscretePMF(np.minimum(d.values, cap), d.probs.copy())


# --------------------------------------------------------------------------
# continuous


class ContinuousDistribution(Distribution):
    """Shared behaviour for densities on a bounded interval."""

    def breakpoints(self):
        return (self.lower, self.upper)

    def pdf_jump(self, x):
        """Right limit minus left limit of the density at ``x``."""
        eps = 1e-9 * max(1.0, abs(x))
        return float(self.pdf(x + eps) - self.pdf(x - eps))

    @cached_property
    def mean(self):
        return self.lower + float(self.expected_excess(self.lower))

    def expected_excess(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t_arr)
        for i, ti in enumerate(t_arr):
            lo = max(ti, self.lower)
            tail = integrate(self.sf, lo, self.upper, self.breakpoints())
            out[i] = tail + max(self.lower - ti, 0.0)
        return _ret(t, out.reshape(np.shape(t)))

    def sample(self, rng, size):
        u = rng.random(size)
        return self.ppf(u)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        lo = np.full(u.shape, self.lower)
        hi = np.full(u.shape, self.upper)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = np.asarray(self.cdf(mid)) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class UniformInterval(ContinuousDistribution):
    lower: float
    upper: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)) or self.lower >= self.upper:
            raise ValidationError(f"uniform needs finite lower < upper, got [{self.lower}, {self.upper}]")

    @property
    def width(self):
        return self.upper - self.lower

    @cached_property
    def mean(self):
        return 0.5 * (self.lower + self.upper)

    def pdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        return _ret(x, np.where((x_arr >= self.lower) & (x_arr <= self.upper), 1.0 / self.width, 0.0))

    def dpdf(self, x):
        return _ret(x, np.zeros(np.shape(x)))

    def cdf(self, x):
        return _ret(x, np.clip((np.asarray(x, dtype=float) - self.lower) / self.width, 0.0, 1.0))

    def pdf_jump(self, x):
        if x == self.lower:
            return 1.0 / self.width
        if x == self.upper:
            return -1.0 / self.width
        return 0.0

    def expected_excess(self, t):
        t_arr = np.asarray(t, dtype=float)
        inside = 0.5 * (self.upper - t_arr) ** 2 / self.width
        out = np.where(t_arr <= self.lower, self.mean - t_arr, np.where(t_arr >= self.upper, 0.0, inside))
        return _ret(t, out)

    def ppf(self, u):
        return self.lower + self.width * np.asarray(u, dtype=float)

    def to_piecewise(self):
        return PiecewisePDF((self.lower, self.upper), ((1.0 / self.width,),))


_SQRT2PI = math.sqrt(2.0 * math.pi)


def _phi(z):
    return np.exp(-0.5 * z * z) / _SQRT2PI


@dataclass(frozen=True)
class TruncatedNormal(ContinuousDistribution):
    mu: float
    sd: float
    lower: float
    upper: float

    def __post_init__(self):
        if not self.sd > 0:
            raise ValidationError("truncated normal needs sd > 0")
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)) or self.lower >= self.upper:
            raise ValidationError("truncated normal needs finite lower < upper")
        if self._z <= 1e-300:
            raise ValidationError("truncation interval carries no normal mass")

    @cached_property
    def _alpha(self):
        return (self.lower - self.mu) / self.sd

    @cached_property
    def _beta(self):
        return (self.upper - self.mu) / self.sd

    @cached_property
    def _z(self):
        return float(special.ndtr(self._beta) - special.ndtr(self._alpha))

    def _inside(self, x):
        return (x >= self.lower) & (x <= self.upper)

    def pdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        z = (x_arr - self.mu) / self.sd
        return _ret(x, np.where(self._inside(x_arr), _phi(z) / (self.sd * self._z), 0.0))

    def dpdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        return _ret(x, -(x_arr - self.mu) / self.sd**2 * np.asarray(self.pdf(x_arr)))

    def cdf(self, x):
        x_arr = np.clip(np.asarray(x, dtype=float), self.lower, self.upper)
        z = (x_arr - self.mu) / self.sd
        out = (special.ndtr(z) - special.ndtr(self._alpha)) / self._z
        return _ret(x, np.clip(out, 0.0, 1.0))

    def sf(self, x):
        x_arr = np.clip(np.asarray(x, dtype=float), self.lower, self.upper)
        z = (x_arr - self.mu) / self.sd
        # upper-tail form keeps precision near the right end
        out = (special.ndtr(-z) - special.ndtr(-self._beta)) / self._z
        return _ret(x, np.clip(out, 0.0, 1.0))

    def pdf_jump(self, x):
        if x == self.lower:
            return float(self.pdf(x))
        if x == self.upper:
            return -float(self.pdf(x))
        return 0.0

    @cached_property
    def mean(self):
        return self.mu + self.sd * float(_phi(self._alpha) - _phi(self._beta)) / self._z

    def expected_excess(self, t):
        t_arr = np.asarray(t, dtype=float)
        tc = np.clip(t_arr, self.lower, self.upper)
        tau = (tc - self.mu) / self.sd
        upper_mass = special.ndtr(-tau) - special.ndtr(-self._beta)
        first = self.mu * upper_mass + self.sd * (_phi(tau) - _phi(self._beta))
        inside = (first - tc * upper_mass) / self._z
        out = np.where(t_arr <= self.lower, self.mean - t_arr, np.where(t_arr >= self.upper, 0.0, inside))
        return _ret(t, np.maximum(out, 0.0))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        p = special.ndtr(self._alpha) + u * self._z
        return np.clip(self.mu + self.sd * special.ndtri(p), self.lower, self.upper)


@dataclass(frozen=True)
class PiecewisePDF(ContinuousDistribution):
    """Density that is a polynomial (ascending coefficients in x) on each piece.

    Piece ``i`` covers ``(breaks[i], breaks[i+1]]``; the first piece also owns
    its left endpoint.
    """

    breaks: tuple
    coeffs: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.breaks)
        c = tuple(tuple(float(a) for a in row) for row in self.coeffs)
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "coeffs", c)
        if len(b) < 2 or len(c) != len(b) - 1:
            raise ValidationError("piecewise density needs len(coeffs) == len(breaks) - 1 >= 1")
        if any(not math.isfinite(x) for x in b) or any(y <= x for x, y in zip(b, b[1:])):
            raise ValidationError("piecewise breakpoints must be finite and strictly increasing")
        for (lo, hi), poly in zip(zip(b, b[1:]), self._polys):
            grid = np.linspace(lo, hi, 65)
            if np.min(poly(grid)) < -1e-12:
                raise ValidationError(f"density is negative on [{lo}, {hi}]")
        mass = self._cum[-1]
        if abs(mass - 1.0) > MASS_TOL:
            raise ValidationError(f"density integrates to {mass!r}, not 1")

    @cached_property
    def _polys(self):
        return [Polynomial(row) for row in self.coeffs]

    @cached_property
    def _cum(self):
        out = [0.0]
        for (lo, hi), poly in zip(zip(self.breaks, self.breaks[1:]), self._polys):
            anti = poly.integ()
            out.append(out[-1] + anti(hi) - anti(lo))
        return out

    @cached_property
    def _cdf_polys(self):
        res = []
        for lo, poly, base in zip(self.breaks, self._polys, self._cum):
            anti = poly.integ()
            res.append(anti - anti(lo) + base)
        return res

    @cached_property
    def _sf_anti(self):
        # antiderivatives of the survival function and tail integrals from each break
        antis = [(1.0 - q).integ() for q in self._cdf_polys]
        tails = [0.0] * len(self.breaks)
        for i in range(len(antis) - 1, -1, -1):
            lo, hi = self.breaks[i], self.breaks[i + 1]
            tails[i] = tails[i + 1] + antis[i](hi) - antis[i](lo)
        return antis, tails

    @property
    def lower(self):
        return self.breaks[0]

    @property
    def upper(self):
        return self.breaks[-1]

    @property
    def pieces(self):
        return list(zip(self.breaks, self.breaks[1:], self._polys))

    def breakpoints(self):
        return self.breaks

    def _piece_index(self, x):
        idx = np.searchsorted(self.breaks, x, side="left") - 1
        return np.clip(idx, 0, len(self.coeffs) - 1)

    def _eval(self, polys, x, outside_left, outside_right):
        x_arr = np.asarray(x, dtype=float)
        idx = self._piece_index(x_arr)
        out = np.zeros(x_arr.shape)
        for i, poly in enumerate(polys):
            m = idx == i
            if np.any(m):
                out[m] = poly(x_arr[m])
        out = np.where(x_arr < self.lower, outside_left, out)
        out = np.where(x_arr > self.upper, outside_right, out)
        return _ret(x, out)

    def pdf(self, x):
        return self._eval(self._polys, x, 0.0, 0.0)

    def dpdf(self, x):
        return self._eval([p.deriv() for p in self._polys], x, 0.0, 0.0)

    def cdf(self, x):
        out = self._eval(self._cdf_polys, x, 0.0, 1.0)
        return _ret(x, np.clip(out, 0.0, 1.0))

    def pdf_jump(self, x):
        if x < self.lower or x > self.upper:
            return 0.0
        k = self.breaks.index(x) if x in self.breaks else None
        if k is None:
            return 0.0
        right = self._polys[k](x) if k < len(self._polys) else 0.0
        left = self._polys[k - 1](x) if k > 0 else 0.0
        return float(right - left)

    @cached_property
    def mean(self):
        return float(sum((Polynomial([0, 1]) * p).integ()(hi) - (Polynomial([0, 1]) * p).integ()(lo)
                         for lo, hi, p in self.pieces))

    def expected_excess(self, t):
        t_arr = np.asarray(t, dtype=float)
        antis, tails = self._sf_anti
        idx = self._piece_index(t_arr)
        out = np.zeros(t_arr.shape)
        for i, anti in enumerate(antis):
            m = idx == i
            if np.any(m):
                out[m] = anti(self.breaks[i + 1]) - anti(t_arr[m]) + tails[i + 1]
        out = np.where(t_arr <= self.lower, self.mean - t_arr, out)
        out = np.where(t_arr >= self.upper, 0.0, out)
        return _ret(t, np.maximum(out, 0.0))

    def to_piecewise(self):
        return self


# --------------------------------------------------------------------------
# operations


def _check(d):
    if not isinstance(d, Distribution):
        raise ValidationError(f"expected a Distribution, got {type(d).__name__}")


def expected_excess(d, t):
    """E[(X - t)^+]."""
    _check(d)
    if not np.all(np.isfinite(t)):
        raise DomainError("threshold must be finite")
    return d.expected_excess(t)


def solve_threshold(d, c, tol=THRESHOLD_TOL):
    """The unique t with E[(X - t)^+] = c."""
    _check(d)
    c = float(c)
    if not c > 0:
        raise DomainError(f"cost must be positive for a finite threshold, got {c}")
    full = d.mean - d.lower
    if c > full + 1e-12 * max(1.0, abs(full)):
        raise DomainError(f"cost {c} exceeds E[X - min X] = {full}")
    if c >= full:
        return d.lower
    if d.is_discrete:
        return _solve_threshold_pmf(d, c)
    return optimize.brentq(lambda s: float(d.expected_excess(s)) - c, d.lower - c, d.upper,
                           xtol=min(tol, 1e-13), rtol=4 * np.finfo(float).eps, maxiter=500)


def _solve_threshold_pmf(d, c):
    # E[(X-t)^+] is linear between consecutive atoms
    tp, tv = d._tails
    at_atoms = tv - d.values * tp
    k = int(np.searchsorted(-at_atoms, -c, side="right")) - 1
    if k < 0:
        return d.mean - c
    return float((tv[k] - c) / tp[k])


def hazard(d, t):
    """Density over survival at ``t``."""
    _check(d)
    if d.is_discrete:
        raise DomainError("hazard rate is defined for continuous distributions only")
    t = float(t)
    if not (d.lower <= t < d.upper):
        raise DomainError(f"t={t} is not inside the support [{d.lower}, {d.upper}]")
    surv = float(d.sf(t))
    if surv <= 1e-12:
        raise DomainError(f"survival {surv:.3g} vanishes at t={t}")
    return float(d.pdf(t)) / surv


def log_concavity_check(d, points=401, tol=1e-9):
    """Second differences of the log-density on an interior grid are all <= tol."""
    if d.is_discrete:
        return False
    grid = np.linspace(d.lower, d.upper, points + 2)[1:-1]
    dens = np.asarray(d.pdf(grid))
    if np.any(dens <= 0):
        return False
    second = np.diff(np.log(dens), 2)
    return bool(np.all(second <= tol))


def positive_density_check(d, points=401):
    if d.is_discrete:
        return False
    grid = np.linspace(d.lower, d.upper, points + 2)[1:-1]
    return bool(np.all(np.asarray(d.pdf(grid)) > 0))


# --------------------------------------------------------------------------
# literal syntax


def parse_distribution(obj):
    """Build a distribution from ``{"uniform": [a, b]}``-style literals."""
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValidationError(f"distribution literal must be a one-key object, got {obj!r}")
    (kind, args), = obj.items()
    try:
        if kind == "uniform":
            a, b = args
            return UniformInterval(float(a), float(b))
        if kind == "pmf":
            return DiscretePMF.from_pairs((float(v), float(p)) for v, p in args)
        if kind == "truncnormal":
            mu, sd, a, b = args
            return TruncatedNormal(float(mu), float(sd), float(a), float(b))
        if kind == "piecewise":
            return PiecewisePDF(tuple(args["breaks"]), tuple(tuple(r) for r in args["coeffs"]))
    except ValidationError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ValidationError(f"bad arguments for {kind!r}: {args!r} ({exc})") from None
    raise ValidationError(f"unknown distribution kind {kind!r}")


def distribution_literal(d):
    if isinstance(d, UniformInterval):
        return {"uniform": [d.lower, d.upper]}
    if isinstance(d, DiscretePMF):
        return {"pmf": [[v, p] for v, p in d.pairs()]}
    if isinstance(d, TruncatedNormal):
        return {"truncnormal": [d.mu, d.sd, d.lower, d.upper]}
    if isinstance(d, PiecewisePDF):
        return {"piecewise": {"breaks": list(d.breaks), "coeffs": [list(r) for r in d.coeffs]}}
    raise UnsupportedOperation(f"no literal form for {type(d).__name__}")
