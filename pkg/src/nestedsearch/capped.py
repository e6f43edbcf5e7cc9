"""Law of W = X + min(Y, r) for independent X and Y.

Polynomial densities (uniform, piecewise) are convolved exactly into a
:class:`PiecewisePDF`; other continuous inputs get a quadrature-backed law;
discrete inputs give a discrete PMF.  ``r`` at or above the top of Y's support
makes the cap vacuous, so the same code also builds the law of X + Y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.polynomial import Polynomial

from .dist import ContinuousDistribution, DiscretePMF, Distribution, PiecewisePDF, _ret
from .errors import UnsupportedOperation, ValidationError
from .quadrature import integrate_segments

_MERGE_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class CappedSumDistribution(Distribution):
    """X + min(Y, r), with the resolved law kept in ``law``."""

    x: Distribution
    y: Distribution
    r: float
    law: Distribution

    @property
    def is_discrete(self):
        return self.law.is_discrete

    @property
    def lower(self):
        return self.law.lower

    @property
    def upper(self):
        return self.law.upper

    @property
    def mean(self):
        return self.law.mean

    @property
    def cap_binds(self):
        return self.r < self.y.upper

    def cdf(self, w):
        return self.law.cdf(w)

    def sf(self, w):
        return self.law.sf(w)

    def pdf(self, w):
        return self.law.pdf(w)

    def dpdf(self, w):
        return self.law.dpdf(w)

    def pdf_jump(self, w):
        return self.law.pdf_jump(w)

    def breakpoints(self):
        return self.law.breakpoints()

    def expected_excess(self, t):
        return self.law.expected_excess(t)

    def sample(self, rng, size):
        xs = self.x.sample(rng, size)
        ys = self.y.sample(rng, size)
        return xs + np.minimum(ys, self.r)


def capped_sum(fx, gy, r=math.inf):
    """Distribution of X + min(Y, r)."""
    for d in (fx, gy):
        if not isinstance(d, Distribution):
            raise ValidationError(f"expected a Distribution, got {type(d).__name__}")
    r = float(r)
    if math.isnan(r):
        raise ValidationError("cap must be a number")
    if fx.is_discrete and gy.is_discrete:
        law = DiscretePMF(
            (fx.values[:, None] + np.minimum(gy.values, r)[None, :]).ravel(),
            (fx.probs[:, None] * gy.probs[None, :]).ravel(),
        )
    elif fx.is_discrete or gy.is_discrete:
        raise UnsupportedOperation("capped sum of a discrete and a continuous variable is not supported")
    elif hasattr(fx, "to_piecewise") and hasattr(gy, "to_piecewise"):
        law = _convolve_piecewise(fx.to_piecewise(), gy.to_piecewise(), r)
    else:
        law = QuadratureCappedLaw(fx, gy, r)
    return CappedSumDistribution(fx, gy, r, law)


def sum_distribution(fx, gy):
    """Law of X + Y."""
    return capped_sum(fx, gy, math.inf)


# --------------------------------------------------------------------------
# exact route


def _truncate_pieces(d, top):
    out = []
    for lo, hi, poly in d.pieces:
        if lo >= top:
            break
        out.append((lo, min(hi, top), poly))
    return out


def _pair_antiderivative(p, q):
    """Coefficients I[a, b] of w^a y^b for an antiderivative in y of p(w - y) q(y)."""
    pc, qc = p.coef, q.coef
    deg_p, deg_q = len(pc) - 1, len(qc) - 1
    b2 = np.zeros((deg_p + 1, deg_p + deg_q + 1))
    for k, pk in enumerate(pc):
        for s in range(k + 1):
            # p_k * C(k,s) w^(k-s) (-y)^s
            term = pk * comb(k, s) * (-1) ** s
            b2[k - s, s:s + deg_q + 1] += term * qc
    anti = np.zeros((deg_p + 1, deg_p + deg_q + 2))
    anti[:, 1:] = b2 / np.arange(1, deg_p + deg_q + 2)
    return anti


def _substitute(anti, alpha, beta):
    """Evaluate sum I[a,b] w^a y^b at y = alpha + beta*w as a polynomial in w."""
    lin = Polynomial([alpha, beta])
    out = Polynomial([0.0])
    power = Polynomial([1.0])
    for b in range(anti.shape[1]):
        col = anti[:, b]
        if np.any(col):
            out = out + Polynomial(col) * power
        power = power * lin
    return out


def _merge_points(points):
    pts = sorted(points)
    merged = [pts[0]]
    for p in pts[1:]:
        if p - merged[-1] > _MERGE_TOL * max(1.0, abs(p)):
            merged.append(p)
    return merged


def _convolve_piecewise(f, g, r):
    f_pieces = f.pieces
    top = min(r, g.upper)
    g_pieces = _truncate_pieces(g, top)
    atom = 1.0 - float(g.cdf(r)) if r < g.upper else 0.0

    pts = []
    for a, b, _ in f_pieces:
        for c, d, _ in g_pieces:
            pts += [a + c, a + d, b + c, b + d]
        if atom > 0:
            pts += [a + r, b + r]
    breaks = _merge_points(pts)

    antis = {(i, j): _pair_antiderivative(p, q)
             for i, (_, _, p) in enumerate(f_pieces) for j, (_, _, q) in enumerate(g_pieces)}
    shift = Polynomial([-r, 1.0])
    shifted = [p(shift) for _, _, p in f_pieces] if atom > 0 else []

    coeffs = []
    for u, v in zip(breaks, breaks[1:]):
        m = 0.5 * (u + v)
        total = Polynomial([0.0])
        for i, (a, b, _) in enumerate(f_pieces):
            for j, (c, d, _) in enumerate(g_pieces):
                lo_moving = m - b > c
                hi_moving = m - a < d
                lo_val = m - b if lo_moving else c
                hi_val = m - a if hi_moving else d
                if hi_val <= lo_val:
                    continue
                anti = antis[i, j]
                upper = _substitute(anti, -a if hi_moving else d, 1.0 if hi_moving else 0.0)
                lower = _substitute(anti, -b if lo_moving else c, 1.0 if lo_moving else 0.0)
                total = total + upper - lower
            if atom > 0 and a + r <= m <= b + r:
                total = total + atom * shifted[i]
        coeffs.append(tuple(np.trim_zeros(total.coef, "b")) or (0.0,))

    # drop zero-density slivers at the ends
    while len(coeffs) > 1 and _is_zero_piece(coeffs[0], breaks[0], breaks[1]):
        coeffs.pop(0)
        breaks.pop(0)
    while len(coeffs) > 1 and _is_zero_piece(coeffs[-1], breaks[-2], breaks[-1]):
        coeffs.pop()
        breaks.pop()
    return PiecewisePDF(tuple(breaks), tuple(coeffs))


def _is_zero_piece(coef, lo, hi):
    grid = np.linspace(lo, hi, 9)
    return bool(np.all(np.abs(Polynomial(coef)(grid)) < 1e-14))


# --------------------------------------------------------------------------
# quadrature route


class QuadratureCappedLaw(ContinuousDistribution):
    """Density and CDF of X + min(Y, r) by composite Gauss-Legendre over y.

    The y-integral is split where the integrand's pieces change: Y's own
    breakpoints below the cap and the moving points ``w - b`` for every
    breakpoint ``b`` of X.
    """

    def __init__(self, fx, gy, r):
        self.x, self.y, self.r = fx, gy, float(r)
        self.top = min(self.r, gy.upper)
        self.atom = 1.0 - float(gy.cdf(self.r)) if self.r < gy.upper else 0.0
        self.lower = fx.lower + min(gy.lower, self.top)
        self.upper = fx.upper + self.top
        self._gbreaks = np.array([b for b in gy.breakpoints() if b < self.top] + [self.top])
        self._xbreaks = np.array(fx.breakpoints())

    def __repr__(self):
        return f"QuadratureCappedLaw({self.x!r}, {self.y!r}, r={self.r!r})"

    def _edges(self, w):
        w = np.asarray(w, dtype=float)
        ylo = self._gbreaks[0]
        if self.top <= ylo:
            return None
        moving = w[..., None] - self._xbreaks
        fixed = np.broadcast_to(self._gbreaks, (*w.shape, self._gbreaks.size))
        edges = np.concatenate([fixed, np.clip(moving, ylo, self.top)], axis=-1)
        return np.sort(edges, axis=-1)

    def _atom_term(self, fn, w):
        # mass 1 - G(r) sits at Y = r; absent when the cap is vacuous
        if self.atom <= 0:
            return 0.0
        return self.atom * np.asarray(fn(w - self.r))

    def _conv(self, w, inner):
        w_arr = np.asarray(w, dtype=float)
        flat = np.atleast_1d(w_arr).ravel()
        edges = self._edges(flat)
        if edges is None:
            out = np.zeros(flat.shape)
        else:
            out = integrate_segments(lambda y: inner(flat[:, None] - y) * self.y.pdf(y), edges)
        return out, flat, w_arr.shape

    def cdf(self, w):
        body, flat, shape = self._conv(w, self.x.cdf)
        out = body + self._atom_term(self.x.cdf, flat)
        # below the cap Y < top, so the integral over y covers P(Y < top) = 1 - atom
        return _ret(w, np.clip(out, 0.0, 1.0).reshape(shape))

    def sf(self, w):
        body, flat, shape = self._conv(w, self.x.sf)
        out = body + self._atom_term(self.x.sf, flat)
        return _ret(w, np.clip(out, 0.0, 1.0).reshape(shape))

    def pdf(self, w):
        body, flat, shape = self._conv(w, self.x.pdf)
        out = body + self._atom_term(self.x.pdf, flat)
        return _ret(w, out.reshape(shape))

    def dpdf(self, w):
        body, flat, shape = self._conv(w, self.x.dpdf)
        out = body + self._atom_term(self.x.dpdf, flat)
        ylo = self._gbreaks[0]
        for b in self._xbreaks:
            jump = self.x.pdf_jump(float(b))
            if jump:
                y = flat - b
                inside = (y > ylo) & (y < self.top)
                out = out + np.where(inside, jump * np.asarray(self.y.pdf(np.clip(y, ylo, self.top))), 0.0)
        return _ret(w, out.reshape(shape))

    def pdf_jump(self, w):
        if self.atom <= 0:
            return 0.0
        return sum(self.atom * self.x.pdf_jump(float(b)) for b in self._xbreaks if b + self.r == w)

    def breakpoints(self):
        pts = {self.lower, self.upper}
        ys = [b for b in self._gbreaks]
        for b in self._xbreaks:
            pts.update(b + y for y in ys)
            if self.atom > 0:
                pts.add(b + self.r)
        return tuple(sorted(p for p in pts if self.lower <= p <= self.upper))

    def expected_excess(self, t):
        body, flat, shape = self._conv(t, self.x.expected_excess)
        out = body + self._atom_term(self.x.expected_excess, flat)
        return _ret(t, np.maximum(out, 0.0).reshape(shape))

    def sample(self, rng, size):
        return self.x.sample(rng, size) + np.minimum(self.y.sample(rng, size), self.r)


__all__ = ["CappedSumDistribution", "QuadratureCappedLaw", "capped_sum", "sum_distribution"]
