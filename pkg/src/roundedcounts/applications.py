"""Applied workflows built on the rounded-total distribution.

Two use cases: contrasting event totals between a before and an after
period when each period's total is only available as a rounded average
(excess-deaths estimation), and testing a success probability when the
total success count is only available rounded (true significance of the
misspecified normal test, and an exact conservative test binned on the
rounded lattice).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .distributions import Binomial
from .estimation import poisson_mle_closed
from .rounding import (
    HALF_UP,
    RoundingScheme,
    _check_lattice,
    rounded_moments_poisson,
    rounded_pmf,
)

__all__ = [
    "ExcessDeathsDesign",
    "ExcessMoments",
    "SignificanceCurve",
    "BinnedTestResult",
    "MODE_EXACT_Y",
    "MODE_MISSPECIFIED_U",
    "MODE_BINNED_U",
    "excess_point_estimates",
    "excess_moments",
    "true_significance",
    "binned_binomial_test",
]

MODE_EXACT_Y = "exact-y"
MODE_MISSPECIFIED_U = "misspecified-u"
MODE_BINNED_U = "binned-u"
_MODES = (MODE_EXACT_Y, MODE_MISSPECIFIED_U, MODE_BINNED_U)


@dataclass(frozen=True)
class ExcessDeathsDesign:
    """Before/after design: totals over n1 pre-period and n2 post-period
    measurements, with pre-period rate ``theta`` and excess ``beta``."""

    n1: int
    n2: int
    theta: float
    beta: float

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("n1 and n2 must be positive integers")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not self.theta + self.beta > 0:
            raise ValueError("theta + beta must be positive")


def excess_point_estimates(u1, u2, n1: int, n2: int) -> tuple[float, float]:
    """Point estimates of the excess from two rounded totals.

    Returns the plain contrast u2 - (n2/n1) u1 and the contrast of the
    product-form rate estimates fitted to each rounded total, which
    compensates the rounding bias of the plain contrast when the rates are
    small relative to the group counts.
    """
    u1 = _check_lattice(u1, n1)
    u2 = _check_lattice(u2, n2)
    ratio = n2 / n1
    plain = u2 - ratio * u1
    fitted = poisson_mle_closed(u2, n2).value - ratio * poisson_mle_closed(u1, n1).value
    return float(plain), float(fitted)


@dataclass
class ExcessMoments:
    """Mean and variance of the excess contrast with and without rounding."""

    mean_rounded: float
    var_rounded: float
    mean_unrounded: float
    var_unrounded: float


def excess_moments(design: ExcessDeathsDesign) -> ExcessMoments:
    """Exact moments of the excess contrast.

    The rounded contrast u2 - (n2/n1) u1 has mean E(U2) - (n2/n1) E(U1) and,
    by independence of the periods, variance Var(U2) + (n2/n1)^2 Var(U1),
    each period's moments coming from the Poisson closed form.  The
    unrounded reference values are beta + theta (1 - n2/n1) and
    beta + theta (1 + n2^2/n1^2).
    """
    post = rounded_moments_poisson(design.theta + design.beta, design.n2)
    pre = rounded_moments_poisson(design.theta, design.n1)
    ratio = design.n2 / design.n1
    return ExcessMoments(
        mean_rounded=post.mean - ratio * pre.mean,
        var_rounded=post.variance + ratio**2 * pre.variance,
        mean_unrounded=design.beta + design.theta * (1.0 - ratio),
        var_unrounded=design.beta + design.theta * (1.0 + ratio**2),
    )


def _acceptance_bounds(total: int, phi0: float, alpha: float) -> tuple[float, float]:
    """Bounds of the normal-test acceptance region for the success count."""
    center = total * phi0
    half = stats.norm.ppf(1.0 - alpha / 2.0) * np.sqrt(total * phi0 * (1.0 - phi0))
    return center - half, center + half


@dataclass
class SignificanceCurve:
    """True significance level across a grid of null success probabilities."""

    m: int
    n: int
    phi0_grid: np.ndarray
    nominal_alpha: float
    true_level: np.ndarray
    mode: str


def true_significance(m: int, n: int, phi0_grid, alpha: float, mode: str,
                      tie_rule: str = HALF_UP) -> SignificanceCurve:
    """Exact rejection probability under the null of the nominal-level test.

    ``m`` is the per-measurement trial count and ``n`` the number of
    measurements, so the latent success total has m*n trials.  Modes:

    * ``exact-y``: the normal test applied to the true total.
    * ``misspecified-u``: the same test applied to the rounded total as if
      it were the true total; the coarse lattice inflates the level.
    * ``binned-u``: the exact equal-tail test on the rounded lattice, which
      is conservative by construction.

    Everything is computed by exact tail summation; no simulation.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    phi0_grid = np.asarray(list(phi0_grid), dtype=float)
    if np.any((phi0_grid <= 0.0) | (phi0_grid >= 1.0)):
        raise ValueError("phi0 values must lie strictly inside (0, 1)")
    total = int(m) * int(n)
    scheme = RoundingScheme(int(n), tie_rule)

    levels = np.empty(phi0_grid.size)
    for idx, phi0 in enumerate(phi0_grid):
        lo, hi = _acceptance_bounds(total, phi0, alpha)
        if mode == MODE_EXACT_Y:
            dist = stats.binom(total, phi0)
            levels[idx] = float(dist.cdf(np.ceil(lo) - 1.0) + dist.sf(np.floor(hi)))
        elif mode == MODE_MISSPECIFIED_U:
            table = rounded_pmf(Binomial(total, phi0), scheme)
            support = table.support
            outside = (support < lo) | (support > hi)
            levels[idx] = float(np.sum(table.probs[outside]))
        else:
            result = _binned_region(total, scheme, float(phi0), alpha)
            levels[idx] = result[2]
    return SignificanceCurve(m=int(m), n=int(n), phi0_grid=phi0_grid,
                             nominal_alpha=float(alpha), true_level=levels, mode=mode)


@dataclass
class BinnedTestResult:
    """Outcome of the exact equal-tail test on the rounded lattice."""

    reject: bool
    true_level: float
    lower_cut: int | None
    upper_cut: int | None


def _binned_region(total: int, scheme: RoundingScheme, phi0: float, alpha: float):
    """Equal-tail rejection cuts on the rounded lattice and the exact level.

    The lower cut is the largest support point whose lower tail holds at
    most alpha/2; the upper cut is the smallest support point whose upper
    tail holds at most alpha/2.  The attained level therefore never exceeds
    alpha.
    """
    table = rounded_pmf(Binomial(total, phi0), scheme)
    probs = table.probs
    support = table.support
    lower_tail = np.cumsum(probs)
    upper_tail = (np.cumsum(probs[::-1])[::-1]) + table.truncation_mass

    lower_ok = np.nonzero(lower_tail <= alpha / 2.0)[0]
    upper_ok = np.nonzero(upper_tail <= alpha / 2.0)[0]
    lower_cut = int(support[lower_ok[-1]]) if lower_ok.size else None
    upper_cut = int(support[upper_ok[0]]) if upper_ok.size else None
    level = 0.0
    if lower_cut is not None:
        level += float(lower_tail[lower_ok[-1]])
    if upper_cut is not None:
        level += float(upper_tail[upper_ok[0]])
    return lower_cut, upper_cut, level


def binned_binomial_test(u, m: int, n: int, phi0: float, alpha: float,
                         tie_rule: str = HALF_UP) -> BinnedTestResult:
    """Exact two-sided test of the success probability from a rounded total.

    The rejection region accumulates at most alpha/2 of the rounded-total
    distribution in each tail, so the attained (true) level is at most the
    nominal alpha.  At n = 1 this is the usual exact equal-tail test on the
    latent count itself.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not 0.0 < phi0 < 1.0:
        raise ValueError(f"phi0 must lie strictly inside (0, 1), got {phi0}")
    scheme = RoundingScheme(int(n), tie_rule)
    u = _check_lattice(u, scheme.n)
    total = int(m) * int(n)
    lower_cut, upper_cut, level = _binned_region(total, scheme, float(phi0), float(alpha))
    reject = (lower_cut is not None and u <= lower_cut) or (
        upper_cut is not None and u >= upper_cut
    )
    return BinnedTestResult(reject=bool(reject), true_level=level,
                            lower_cut=lower_cut, upper_cut=upper_cut)
