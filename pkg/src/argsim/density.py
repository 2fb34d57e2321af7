"""Breakpoint-locus densities on (0, 1).

A density provides pdf/cdf/inverse-cdf plus truncated sampling by
inversion. Densities must be strictly positive almost everywhere on (0, 1)
so the inverse CDF is well defined; Uniform and Beta(a, b) both qualify.

Densities are specified on the command line as tagged strings
("uniform", "beta:2,2") and parsed through a small registry so new
families can be added without touching the engines.
"""

from __future__ import annotations

import math

from scipy.special import betainc

_BISECT_TOL = 1e-12


class UniformDensity:
    """The uniform density on (0, 1)."""

    spec = "uniform"

    def pdf(self, s):
        return 1.0 if 0.0 < s < 1.0 else 0.0

    def cdf(self, s):
        if s <= 0.0:
            return 0.0
        if s >= 1.0:
            return 1.0
        return s

    def ppf(self, q):
        assert 0.0 <= q <= 1.0
        return q

    def mass(self, lo, hi):
        """Integral of the pdf over (lo, hi)."""
        return max(0.0, self.cdf(hi) - self.cdf(lo))

    def sample_truncated(self, rng, lo, hi):
        """Inverse-CDF draw from the density restricted to (lo, hi)."""
        a, b = self.cdf(lo), self.cdf(hi)
        assert b > a
        return self.ppf(a + rng.uniform() * (b - a))

    def __eq__(self, other):
        return isinstance(other, UniformDensity)

    def __repr__(self):
        return "UniformDensity()"


class BetaDensity:
    """Beta(a, b) density; cdf via the regularized incomplete beta function."""

    def __init__(self, a, b):
        if not (a > 0.0 and b > 0.0):
            raise ValueError("beta shapes must be positive, got %r, %r" % (a, b))
        self.a = a
        self.b = b
        self._log_norm = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)

    @property
    def spec(self):
        return "beta:%g,%g" % (self.a, self.b)

    def pdf(self, s):
        if not 0.0 < s < 1.0:
            return 0.0
        return math.exp(
            (self.a - 1.0) * math.log(s) + (self.b - 1.0) * math.log1p(-s) - self._log_norm
        )

    def cdf(self, s):
        if s <= 0.0:
            return 0.0
        if s >= 1.0:
            return 1.0
        return float(betainc(self.a, self.b, s))

    def ppf(self, q):
        """Inverse CDF by bracketed bisection to 1e-12 absolute tolerance."""
        assert 0.0 <= q <= 1.0
        if q <= 0.0:
            return 0.0
        if q >= 1.0:
            return 1.0
        lo, hi = 0.0, 1.0
        while hi - lo > _BISECT_TOL:
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) < q:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def mass(self, lo, hi):
        return max(0.0, self.cdf(hi) - self.cdf(lo))

    def sample_truncated(self, rng, lo, hi):
        a, b = self.cdf(lo), self.cdf(hi)
        assert b > a
        q = a + rng.uniform() * (b - a)
        # bisect inside (lo, hi) directly: tighter bracket than ppf's (0, 1)
        x0, x1 = lo, hi
        while x1 - x0 > _BISECT_TOL:
            mid = 0.5 * (x0 + x1)
            if self.cdf(mid) < q:
                x0 = mid
            else:
                x1 = mid
        return 0.5 * (x0 + x1)

    def __eq__(self, other):
        return isinstance(other, BetaDensity) and self.a == other.a and self.b == other.b

    def __repr__(self):
        return "BetaDensity(%g, %g)" % (self.a, self.b)


def _parse_beta(args):
    parts = args.split(",")
    if len(parts) != 2:
        raise ValueError("beta density takes two shapes, e.g. beta:2,2")
    return BetaDensity(float(parts[0]), float(parts[1]))


DENSITIES = {
    "uniform": lambda args: UniformDensity(),
    "beta": _parse_beta,
}


def parse_density(spec):
    """Parse a tagged density spec string like "uniform" or "beta:2,2"."""
    tag, _, args = spec.partition(":")
    tag = tag.strip().lower()
    if tag not in DENSITIES:
        raise ValueError("unknown density %r (known: %s)" % (spec, ", ".join(sorted(DENSITIES))))
    return DENSITIES[tag](args)
