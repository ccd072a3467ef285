"""Closed-form fairness/welfare guarantees and their empirical verification.

Every guarantee is parameterized by a bound lambda on the utility's
inequality aversion: an upper bound caps the welfare loss, a lower bound
caps the egalitarian loss and floors individual/group shares.  The
verification harness pairs each applicable guarantee with the measured
quantity on a solved instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .axioms import cohesive_groups
from .core import Allocation, Profile, UtilityFunction, iav_bound_of, overlap
from .solver import SolveReport

_SLACK = 1e-6


@dataclass(frozen=True)
class BoundReport:
    """One evaluated closed-form bound with its parameters."""

    kind: str
    params: dict[str, Any]
    value: float


@dataclass(frozen=True)
class BoundCheck:
    """A guarantee paired with the measured quantity it must dominate."""

    kind: str
    bound: float
    empirical: float
    satisfied: bool
    params: dict[str, Any] = field(default_factory=dict)


def welfare(profile: Profile, x: Allocation) -> float:
    """Total satisfaction across agents."""
    return float(overlap(profile.prefs, x.shares).sum())


def welfare_loss(profile: Profile, x: Allocation, util_reference: SolveReport) -> float:
    """Relative welfare shortfall 1 - W(x)/W*, clamped to [0, 1]."""
    if not util_reference.converged:
        raise ValueError("utilitarian reference did not converge")
    w_ref = util_reference.objective
    return float(np.clip(1.0 - welfare(profile, x) / w_ref, 0.0, 1.0))


def egalitarian_loss(profile: Profile, x: Allocation, egal_reference: SolveReport) -> float:
    """Relative maxmin shortfall 1 - min_i pi_i(x) / maxmin, clamped to [0, 1]."""
    if not egal_reference.converged:
        raise ValueError("egalitarian reference did not converge")
    maxmin = egal_reference.objective
    min_sat = float(overlap(profile.prefs, x.shares).min())
    return float(np.clip(1.0 - min_sat / maxmin, 0.0, 1.0))


def wl_bound(lambda_upper: float, m: int) -> float:
    """Welfare-loss cap for rules with inequality aversion at most lambda."""
    if lambda_upper <= 0:
        raise ValueError("lambda must be positive")
    lam = lambda_upper
    return lam * m**lam / (lam * m**lam + lam + 1.0)


def wl_bound_single_minded(lambda_upper: float, m: int) -> float:
    """Tighter welfare-loss cap on single-minded profiles."""
    if lambda_upper <= 0:
        raise ValueError("lambda must be positive")
    lam = lambda_upper
    return (m - 1.0) / m * lam / (lam + 1.0)


def ifs_share_bound(lambda_lower: float, m: int, n: int) -> float:
    """Individual satisfaction floor for rules with IAV at least lambda."""
    if lambda_lower <= 0:
        raise ValueError("lambda must be positive")
    if n < 2:
        raise ValueError("needs at least two agents")
    return 1.0 / (1.0 + (m - 1.0) * (n - 1.0) ** (1.0 / lambda_lower))


def el_bound_single_minded(lambda_lower: float, m: int, n: int) -> float:
    """Egalitarian-loss cap on single-minded profiles (uniform is maxmin)."""
    if lambda_lower <= 0:
        raise ValueError("lambda must be positive")
    val = 1.0 - m / (1.0 + (m - 1.0) * (n - 1.0) ** (1.0 / lambda_lower))
    return float(np.clip(val, 0.0, 1.0))


def min_agent_bound(lambda_lower: float, m: int, n: int) -> float:
    """Coarser individual floor (1/m)(1/n)^(1/lambda)."""
    if lambda_lower <= 0:
        raise ValueError("lambda must be positive")
    return (1.0 / m) * (1.0 / n) ** (1.0 / lambda_lower)


def afs_bound(alpha: float, lambda_lower: float) -> float:
    """Group mean-satisfaction floor alpha^(1/lambda) for cohesion alpha."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if not 0.0 < lambda_lower <= 1.0:
        raise ValueError("lambda must lie in (0, 1]")
    return alpha ** (1.0 / lambda_lower)


def gamma(m: int, n: int, lambda_lower: float) -> tuple[float, float]:
    """Egalitarian-loss cap for general profiles, with its maximin argument.

    Maximizes min(m*w, 1 - (w/(n-1))^(1/lambda)) over w in [0, 1].  The
    first term increases and the second decreases, so the maximin sits at
    their crossing; bisection finds it to 1e-10.  Returns (value, w*).
    """
    if m < 2 or n < 2:
        raise ValueError("gamma needs m >= 2 and n >= 2")
    if lambda_lower <= 0:
        raise ValueError("lambda must be positive")
    inv = 1.0 / lambda_lower

    def h(w: float) -> float:
        return m * w - (1.0 - (w / (n - 1.0)) ** inv)

    lo, hi = 0.0, 1.0 / m
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if h(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    w_star = 0.5 * (lo + hi)
    return m * w_star, w_star


def verify_bounds(
    profile: Profile,
    f: UtilityFunction,
    ctr_report: SolveReport,
    util_reference: SolveReport | None = None,
    egal_reference: SolveReport | None = None,
) -> list[BoundCheck]:
    """Pair every applicable guarantee with the measured loss or share.

    Which guarantees apply depends on which side of the IAV is certified
    for f: welfare-loss caps need an upper bound, share floors and the
    egalitarian cap need a lower bound, and the group-share guarantee
    additionally needs the IAV to sit at or below 1.  Raises when no side
    is certified at all (the quadratic kind).
    """
    bound = iav_bound_of(f)
    if bound.lower is None and bound.upper is None:
        raise ValueError(f"utility kind {f.kind!r} has no certified IAV bound")

    n, m = profile.n, profile.m
    x = ctr_report.allocation
    min_sat = ctr_report.satisfactions.min()
    single_minded = profile.is_single_minded()
    checks: list[BoundCheck] = []

    if bound.upper is not None and util_reference is not None:
        wl = welfare_loss(profile, x, util_reference)
        b = wl_bound(bound.upper, m)
        checks.append(BoundCheck("WL", b, wl, wl <= b + _SLACK, {"lambda": bound.upper, "m": m}))
        if single_minded:
            b = wl_bound_single_minded(bound.upper, m)
            checks.append(
                BoundCheck("WL-single-minded", b, wl, wl <= b + _SLACK, {"lambda": bound.upper, "m": m})
            )

    if bound.lower is not None:
        lam = bound.lower
        if n >= 2:
            b = ifs_share_bound(lam, m, n)
            checks.append(
                BoundCheck("IFS-share", b, min_sat, min_sat >= b - _SLACK, {"lambda": lam, "m": m, "n": n})
            )
        b = min_agent_bound(lam, m, n)
        checks.append(
            BoundCheck("minAgent", b, min_sat, min_sat >= b - _SLACK, {"lambda": lam, "m": m, "n": n})
        )
        if egal_reference is not None and n >= 2:
            el = egalitarian_loss(profile, x, egal_reference)
            b, _ = gamma(m, n, lam)
            checks.append(
                BoundCheck("EL-gamma", b, el, el <= b + _SLACK, {"lambda": lam, "m": m, "n": n})
            )
            if single_minded:
                b = el_bound_single_minded(lam, m, n)
                checks.append(
                    BoundCheck(
                        "EL-single-minded", b, el, el <= b + _SLACK, {"lambda": lam, "m": m, "n": n}
                    )
                )
        if lam <= 1.0 and n <= 20:
            worst = None
            sats = ctr_report.satisfactions.values
            for group in cohesive_groups(profile, min_alpha=1e-12):
                alpha = min(group.alpha, len(group.members) / n)
                if alpha <= 0.0:
                    continue
                b = afs_bound(alpha, lam)
                mean = float(sats[list(group.members)].mean())
                if worst is None or mean - b < worst[0]:
                    worst = (mean - b, b, mean, alpha)
            if worst is not None:
                margin, b, mean, alpha = worst
                checks.append(
                    BoundCheck(
                        "AFS-exponent",
                        b,
                        mean,
                        margin >= -_SLACK,
                        {"lambda": lam, "alpha": alpha, "n": n},
                    )
                )

    return checks
