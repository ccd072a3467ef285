"""Domain types and overlap-satisfaction primitives.

Agents report ideal budget distributions over m alternatives; an outcome is
itself a distribution.  The satisfaction of agent i with ideal ``x^i`` under
outcome ``x`` is the overlap ``sum_j min(x^i_j, x_j)``, which equals
``1 - 0.5 * l1(x^i, x)``.  This module holds the profile/allocation types,
the support sets that drive first-order analysis, marginal contributions,
and the concave utility family (with its inequality-aversion analytics) that
parameterizes the rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

# Tolerance that separates strict from weak support-set membership.  Inputs
# perturbed by more than this move agents between the up and down sets.
EQUALITY_TOL = 1e-12

# Overflow guards for the exponential utility kind: the inner exponent is
# clipped at _EXP_CLIP and full log-magnitudes just under float max, so
# derivatives stay finite (and correctly ordered) when a satisfaction is
# floored near zero.  Clipping the inner exponent equally on both sides of a
# derivative ratio can only increase the ratio, so the lower-bound analytics
# survive the clip.
_EXP_CLIP = 690.0
_LOG_MAG_CLIP = 705.0

UtilityKind = Literal["log", "power", "negpower", "negexppower", "quadratic", "identity"]

_KINDS_WITH_P = {"power", "negpower", "negexppower"}


class GuardError(RuntimeError):
    """A search or enumeration exceeds its configured size guard."""


def _as_matrix(prefs: Iterable) -> np.ndarray:
    arr = np.array(prefs, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"preference profile must be 2-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Profile:
    """An n x m matrix of ideal distributions, one row per agent.

    Rows must be stochastic: nonnegative entries summing to 1 within 1e-9.
    """

    prefs: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.prefs)
        n, m = arr.shape
        if n < 1:
            raise ValueError("profile needs at least one agent")
        if m < 2:
            raise ValueError("profile needs at least two alternatives")
        if np.any(arr < -1e-12) or np.any(arr > 1 + 1e-12):
            raise ValueError("preference entries must lie in [0, 1]")
        sums = arr.sum(axis=1)
        bad = np.abs(sums - 1.0) > 1e-9
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValueError(f"row {i} sums to {sums[i]!r}, expected 1 within 1e-9")
        arr.flags.writeable = False
        object.__setattr__(self, "prefs", arr)

    @property
    def n(self) -> int:
        return self.prefs.shape[0]

    @property
    def m(self) -> int:
        return self.prefs.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.prefs[i]

    def without(self, agents: int | Iterable[int]) -> "Profile":
        """Partial profile with the given agent (or agents) removed."""
        drop = {agents} if isinstance(agents, (int, np.integer)) else set(int(a) for a in agents)
        keep = [i for i in range(self.n) if i not in drop]
        if not keep:
            raise ValueError("cannot remove every agent")
        return Profile(self.prefs[keep])

    def replace_row(self, i: int, row: Iterable[float]) -> "Profile":
        arr = self.prefs.copy()
        arr[i] = np.asarray(row, dtype=float)
        return Profile(arr)

    def is_single_minded(self, tol: float = 1e-9) -> bool:
        """True when every agent puts the whole budget on one alternative."""
        return bool(np.all(self.prefs.max(axis=1) >= 1.0 - tol))


@dataclass(frozen=True)
class Allocation:
    """A point on the m-simplex: the collective outcome."""

    shares: np.ndarray

    def __post_init__(self):
        arr = np.array(self.shares, dtype=float)
        if arr.ndim != 1:
            raise ValueError("allocation must be a flat vector")
        if np.any(arr < -1e-12):
            raise ValueError("allocation shares must be nonnegative")
        if abs(arr.sum() - 1.0) > 1e-9:
            raise ValueError(f"allocation sums to {arr.sum()!r}, expected 1 within 1e-9")
        arr.flags.writeable = False
        object.__setattr__(self, "shares", arr)

    @property
    def m(self) -> int:
        return self.shares.shape[0]

    @staticmethod
    def uniform(m: int) -> "Allocation":
        return Allocation(np.full(m, 1.0 / m))


@dataclass(frozen=True)
class SatisfactionVector:
    """Per-agent overlap satisfactions for one (profile, allocation) pair."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def min(self) -> float:
        return float(self.values.min())

    def sum(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class SupportSets:
    """Strict (up) and weak (down) supporter masks, shape (n, m).

    ``up[i, j]`` means raising alternative j improves agent i; ``down[i, j]``
    means lowering j hurts agent i.  ``up`` is always a subset of ``down``;
    they differ exactly on ties ``x^i_j == x_j`` (within EQUALITY_TOL).
    """

    up: np.ndarray
    down: np.ndarray

    def __post_init__(self):
        for name in ("up", "down"):
            arr = np.array(getattr(self, name), dtype=bool)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def up_agents(self, j: int) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.up[:, j]))

    def down_agents(self, j: int) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.down[:, j]))

    def sigma_up(self, i: int) -> frozenset[int]:
        """Alternatives where agent i strictly supports growth."""
        return frozenset(int(j) for j in np.flatnonzero(self.up[i]))

    def sigma_down(self, i: int) -> frozenset[int]:
        return frozenset(int(j) for j in np.flatnonzero(self.down[i]))


@dataclass(frozen=True)
class IavBound:
    """Certified range for a utility's inequality aversion (lambda)."""

    lower: float | None
    upper: float | None

    def __post_init__(self):
        if self.lower is not None and self.lower < 0:
            raise ValueError("lower IAV bound must be nonnegative")
        if self.upper is not None and self.upper <= 0:
            raise ValueError("upper IAV bound must be positive")
        if self.lower is not None and self.upper is not None and self.lower > self.upper:
            raise ValueError("lower IAV bound exceeds upper")


def _safe_exp(z: np.ndarray | float):
    return np.exp(np.minimum(z, _EXP_CLIP))


@dataclass(frozen=True)
class UtilityFunction:
    """A member of the concave utility family applied to satisfactions.

    Kinds (p is the family parameter where applicable):

    ====================  ==================  =========================
    kind                  f(t)                inequality aversion
    ====================  ==================  =========================
    log                   ln t                1 everywhere
    power (0<p<1)         t^p                 1 - p everywhere
    negpower (p>0)        -t^-p               1 + p everywhere
    negexppower (p>0)     -exp(t^-p)          >= 1 + p
    quadratic             t(2-t)              t/(1-t), uncertified
    identity              t                   0 (utilitarian baseline)
    ====================  ==================  =========================

    Evaluation at t below ``floor`` uses t = floor, so the singular kinds
    stay finite when an agent's overlap is 0.  Exponential-kind outputs are
    additionally clipped to stay inside float range; the clip only engages
    for satisfactions below roughly (1/690)^(1/p).

    The identity kind exists so the utilitarian baseline can share solver
    code; it is not strictly concave and is rejected wherever that matters.
    """

    kind: UtilityKind
    p: float | None = None
    floor: float = 1e-9

    def _t(self, t):
        return np.maximum(np.asarray(t, dtype=float), self.floor)

    def value(self, t):
        t = self._t(t)
        match self.kind:
            case "log":
                return np.log(t)
            case "power":
                return t**self.p
            case "negpower":
                return -(t**-self.p)
            case "negexppower":
                return -_safe_exp(t**-self.p)
            case "quadratic":
                return t * (2.0 - t)
            case "identity":
                return t

    def deriv(self, t):
        t = self._t(t)
        match self.kind:
            case "log":
                return 1.0 / t
            case "power":
                return self.p * t ** (self.p - 1.0)
            case "negpower":
                return self.p * t ** (-self.p - 1.0)
            case "negexppower":
                # assembled in log space so floored inputs stay finite
                logmag = np.log(self.p) - (self.p + 1.0) * np.log(t) + np.minimum(t**-self.p, _EXP_CLIP)
                return np.exp(np.minimum(logmag, _LOG_MAG_CLIP))
            case "quadratic":
                return 2.0 - 2.0 * t
            case "identity":
                return np.ones_like(t)

    def second(self, t):
        t = self._t(t)
        match self.kind:
            case "log":
                return -1.0 / t**2
            case "power":
                return self.p * (self.p - 1.0) * t ** (self.p - 2.0)
            case "negpower":
                return -self.p * (self.p + 1.0) * t ** (-self.p - 2.0)
            case "negexppower":
                # d/dt [p t^-(p+1) e^(t^-p)] = -p e^(t^-p) t^-(p+2) ((p+1) + p t^-p)
                logmag = (
                    np.log(self.p)
                    - (self.p + 2.0) * np.log(t)
                    + np.minimum(t**-self.p, _EXP_CLIP)
                    + np.log((self.p + 1.0) + self.p * t**-self.p)
                )
                return -np.exp(np.minimum(logmag, _LOG_MAG_CLIP))
            case "quadratic":
                return np.full_like(t, -2.0)
            case "identity":
                return np.zeros_like(t)

    @property
    def strictly_concave(self) -> bool:
        return self.kind != "identity"


def make_utility(kind: UtilityKind, p: float | None = None, floor: float = 1e-9) -> UtilityFunction:
    """Build a family member, validating the parameter range for the kind."""
    if not 0.0 < floor <= 1e-3:
        raise ValueError(f"floor must lie in (0, 1e-3], got {floor!r}")
    if kind in _KINDS_WITH_P:
        if p is None:
            raise ValueError(f"kind {kind!r} requires a parameter p")
        if kind == "power" and not 0.0 < p < 1.0:
            raise ValueError(f"power utilities need p in (0, 1), got {p!r}")
        if kind in ("negpower", "negexppower") and p <= 0.0:
            raise ValueError(f"kind {kind!r} needs p > 0, got {p!r}")
    elif kind in ("log", "quadratic", "identity"):
        if p is not None:
            raise ValueError(f"kind {kind!r} takes no parameter")
    else:
        raise ValueError(f"unknown utility kind {kind!r}")
    return UtilityFunction(kind=kind, p=p, floor=floor)


def iav(f: UtilityFunction, t: float) -> float:
    """Inequality aversion -t f''(t) / f'(t) at a point.

    Requires t at or above the evaluation floor and f'(t) > 0; a nonpositive
    derivative signals an invalid family member at that point.
    """
    if t < f.floor:
        raise ValueError(f"t={t!r} is below the evaluation floor {f.floor!r}")
    fp = float(f.deriv(t))
    if fp <= 0.0:
        raise ValueError(f"f'({t!r}) = {fp!r} is not positive")
    return -t * float(f.second(t)) / fp


def iav_bound_of(f: UtilityFunction) -> IavBound:
    """Certified IAV range for a family member (catalog lookup).

    The quadratic kind carries no certified bound: its pointwise IAV
    t/(1-t) is unbounded on (0, 1).
    """
    match f.kind:
        case "log":
            return IavBound(1.0, 1.0)
        case "power":
            return IavBound(1.0 - f.p, 1.0 - f.p)
        case "negpower":
            return IavBound(1.0 + f.p, 1.0 + f.p)
        case "negexppower":
            return IavBound(1.0 + f.p, None)
        case "quadratic":
            return IavBound(None, None)
        case "identity":
            raise ValueError("the identity baseline has no inequality-aversion bound")


# ---------------------------------------------------------------------------
# Overlap satisfaction and first-order quantities
# ---------------------------------------------------------------------------


def overlap(prefs: np.ndarray, shares: np.ndarray) -> np.ndarray:
    """Vector of overlaps sum_j min(prefs[i, j], shares[j]) for all agents."""
    return np.minimum(prefs, shares).sum(axis=1)


def satisfaction(profile: Profile, x: Allocation, i: int) -> float:
    """Overlap satisfaction of agent i under allocation x."""
    if not 0 <= i < profile.n:
        raise IndexError(f"agent index {i} out of range for n={profile.n}")
    return float(np.minimum(profile.prefs[i], x.shares).sum())


def satisfaction_vector(profile: Profile, x: Allocation) -> SatisfactionVector:
    return SatisfactionVector(overlap(profile.prefs, x.shares))


def support_masks(prefs: np.ndarray, shares: np.ndarray, tol: float = EQUALITY_TOL):
    d = prefs - shares
    return d > tol, d >= -tol


def support_sets(profile: Profile, x: Allocation) -> SupportSets:
    """Strict and weak supporter sets of every alternative at x."""
    up, down = support_masks(profile.prefs, x.shares)
    return SupportSets(up=up, down=down)


def marginal_contribution(
    profile: Profile,
    x: Allocation,
    f: UtilityFunction,
    j: int,
    direction: Literal["up", "down"],
) -> float:
    """Sum of f'(satisfaction) over the chosen support set of alternative j.

    This is the one-sided partial derivative of the rule objective in the
    direction of alternative j (up: increase x_j, down: decrease it).
    """
    if not 0 <= j < profile.m:
        raise IndexError(f"alternative index {j} out of range for m={profile.m}")
    up, down = support_masks(profile.prefs, x.shares)
    mask = up[:, j] if direction == "up" else down[:, j]
    if not mask.any():
        return 0.0
    pi = overlap(profile.prefs, x.shares)
    return float(f.deriv(pi[mask]).sum())
