"""Latent count distributions: pmf, pgf, and support truncation.

These are the hidden non-negative integer variables whose totals are only
observed through a rounded average.  All probability evaluations go through
the log domain (log-gamma for factorials) so that large counts and large
rate parameters do not overflow.  Generating functions accept complex
arguments because the rounding machinery evaluates them at roots of unity.
"""

from __future__ import annotations

import numpy as np
from scipy import special, stats

__all__ = ["CountDistribution", "Poisson", "Binomial", "NegativeBinomial"]


def _integer_power(z, k: int):
    """z**k for complex z via the complex log, safe for very large k."""
    z = np.asarray(z, dtype=complex)
    if k == 0:
        return np.ones_like(z)
    out = np.zeros_like(z)
    nz = z != 0
    out[nz] = np.exp(k * np.log(z[nz]))
    return out


class CountDistribution:
    """Common interface for the supported latent count distributions."""

    kind: str

    def mean(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        raise NotImplementedError

    def logpmf(self, k):
        raise NotImplementedError

    def pmf(self, k):
        """P(Y = k), evaluated in the log domain."""
        return np.exp(self.logpmf(k))

    def cdf(self, k):
        raise NotImplementedError

    def sf(self, k):
        """P(Y > k)."""
        raise NotImplementedError

    def pgf(self, s):
        """E(s**Y) as a complex number (closed form)."""
        raise NotImplementedError

    def pgf_derivative(self, s):
        """d/ds E(s**Y) as a complex number; equals the mean at s=1."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def upper_support(self) -> int | None:
        """Largest support point, or None when the support is unbounded."""
        return None

    def support_bound(self, tail_eps: float) -> int:
        """Smallest k_max with P(Y > k_max) < tail_eps.

        Bounded distributions return their largest support point outright.
        """
        if not 0.0 < tail_eps < 1.0:
            raise ValueError("tail_eps must be in (0, 1)")
        top = self.upper_support()
        if top is not None:
            return top
        hi = max(1, int(self.mean() + 10.0 * np.sqrt(self.variance()) + 10.0))
        while self.sf(hi) >= tail_eps:
            hi *= 2
        lo = 0
        while lo < hi:
            mid = (lo + hi) // 2
            if self.sf(mid) < tail_eps:
                hi = mid
            else:
                lo = mid + 1
        return lo


class Poisson(CountDistribution):
    """Poisson with mean ``theta`` (strictly positive)."""

    kind = "poisson"

    def __init__(self, theta: float):
        if not theta > 0 or not np.isfinite(theta):
            raise ValueError(f"Poisson mean must be positive, got {theta}")
        self.theta = float(theta)

    def __repr__(self):
        return f"Poisson(theta={self.theta})"

    def mean(self):
        return self.theta

    def variance(self):
        return self.theta

    def logpmf(self, k):
        k = np.asarray(k, dtype=float)
        out = special.xlogy(k, self.theta) - self.theta - special.gammaln(k + 1.0)
        return np.where(k >= 0, out, -np.inf)[()]

    def cdf(self, k):
        return stats.poisson.cdf(k, self.theta)

    def sf(self, k):
        return stats.poisson.sf(k, self.theta)

    def pgf(self, s):
        s = np.asarray(s, dtype=complex)
        return np.exp(self.theta * (s - 1.0))[()]

    def pgf_derivative(self, s):
        s = np.asarray(s, dtype=complex)
        return (self.theta * np.exp(self.theta * (s - 1.0)))[()]

    def sample(self, rng, size=None):
        return rng.poisson(self.theta, size=size)


class Binomial(CountDistribution):
    """Binomial with ``trials`` total draws and success probability ``prob``."""

    kind = "binomial"

    def __init__(self, trials: int, prob: float):
        if trials < 1 or int(trials) != trials:
            raise ValueError(f"trials must be a positive integer, got {trials}")
        if not 0.0 <= prob <= 1.0:
            raise ValueError(f"prob must lie in [0, 1], got {prob}")
        self.trials = int(trials)
        self.prob = float(prob)

    def __repr__(self):
        return f"Binomial(trials={self.trials}, prob={self.prob})"

    def mean(self):
        return self.trials * self.prob

    def variance(self):
        return self.trials * self.prob * (1.0 - self.prob)

    def logpmf(self, k):
        k = np.asarray(k, dtype=float)
        n, p = self.trials, self.prob
        with np.errstate(invalid="ignore", divide="ignore"):
            choose = special.gammaln(n + 1.0) - special.gammaln(k + 1.0) - special.gammaln(n - k + 1.0)
            out = choose + special.xlogy(k, p) + special.xlog1py(n - k, -p)
        return np.where((k >= 0) & (k <= n), out, -np.inf)[()]

    def cdf(self, k):
        return stats.binom.cdf(k, self.trials, self.prob)

    def sf(self, k):
        return stats.binom.sf(k, self.trials, self.prob)

    def pgf(self, s):
        s = np.asarray(s, dtype=complex)
        return _integer_power(1.0 - self.prob + self.prob * s, self.trials)[()]

    def pgf_derivative(self, s):
        s = np.asarray(s, dtype=complex)
        base = _integer_power(1.0 - self.prob + self.prob * s, self.trials - 1)
        return (self.trials * self.prob * base)[()]

    def sample(self, rng, size=None):
        return rng.binomial(self.trials, self.prob, size=size)

    def upper_support(self):
        return self.trials


class NegativeBinomial(CountDistribution):
    """Failures before the ``size``-th success, each success with probability ``prob``."""

    kind = "negbinomial"

    def __init__(self, size: float, prob: float):
        if not size > 0 or not np.isfinite(size):
            raise ValueError(f"size must be positive, got {size}")
        if not 0.0 < prob <= 1.0:
            raise ValueError(f"prob must lie in (0, 1], got {prob}")
        self.size = float(size)
        self.prob = float(prob)

    def __repr__(self):
        return f"NegativeBinomial(size={self.size}, prob={self.prob})"

    def mean(self):
        return self.size * (1.0 - self.prob) / self.prob

    def variance(self):
        return self.size * (1.0 - self.prob) / self.prob**2

    def logpmf(self, k):
        k = np.asarray(k, dtype=float)
        r, p = self.size, self.prob
        out = (
            special.gammaln(k + r)
            - special.gammaln(r)
            - special.gammaln(k + 1.0)
            + r * np.log(p)
            + special.xlog1py(k, -p)
        )
        return np.where(k >= 0, out, -np.inf)[()]

    def cdf(self, k):
        return stats.nbinom.cdf(k, self.size, self.prob)

    def sf(self, k):
        return stats.nbinom.sf(k, self.size, self.prob)

    def pgf(self, s):
        # E(s**Y) = (p / (1 - (1-p) s))**size, analytic for |s| < 1/(1-p).
        s = np.asarray(s, dtype=complex)
        q = 1.0 - self.prob
        if q > 0 and np.any(np.abs(s) >= 1.0 / q - 1e-12):
            raise ValueError("pgf argument outside the radius of convergence")
        return np.exp(self.size * (np.log(self.prob) - np.log(1.0 - q * s)))[()]

    def pgf_derivative(self, s):
        s = np.asarray(s, dtype=complex)
        q = 1.0 - self.prob
        return (self.size * q / (1.0 - q * s) * self.pgf(s))[()]

    def sample(self, rng, size=None):
        return rng.negative_binomial(self.size, self.prob, size=size)
