"""Brute-force grid search over the simplex, for certifying solver outputs.

Enumerates every nonnegative vector with entries that are multiples of a
fixed resolution and a fixed total, in lexicographic order, and maximizes a
chosen objective over that grid.  Only meant for small m; the point count is
the stars-and-bars binomial and grows combinatorially.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np

from .core import GuardError, Profile, UtilityFunction

DEFAULT_MAX_POINTS = 10_000_000
_ENV_GUARD = "CTR_MAX_GRID"

Objective = Literal["ctr", "welfare", "maxmin"]


def max_grid_points() -> int:
    """Size guard for grid enumeration; overridable via CTR_MAX_GRID."""
    raw = os.environ.get(_ENV_GUARD)
    if raw is None:
        return DEFAULT_MAX_POINTS
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"{_ENV_GUARD} must be an integer, got {raw!r}") from exc


@dataclass(frozen=True)
class GridSpec:
    """Grid over {y >= 0, sum y = budget} with the given step.

    The budget must be an integer multiple of the resolution (within 1e-9)
    and the stars-and-bars point count C(steps + m - 1, m - 1) must respect
    the size guard.
    """

    m: int
    resolution: float
    budget: float = 1.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("grid dimension must be at least 1")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        k = round(self.budget / self.resolution)
        if k < 0 or abs(k * self.resolution - self.budget) > 1e-9:
            raise ValueError(
                f"budget {self.budget!r} is not an integer multiple of resolution {self.resolution!r}"
            )
        guard = max_grid_points()
        if self.num_points() > guard:
            raise GuardError(
                f"grid has {self.num_points()} points, exceeding the guard of {guard}"
            )

    @property
    def steps(self) -> int:
        return round(self.budget / self.resolution)

    def num_points(self) -> int:
        return math.comb(self.steps + self.m - 1, self.m - 1)


_TRIANGLE_ROW_CAP = 100_000


def _line_block(prefix: list[int], remaining: int, parts: int, scale: float) -> np.ndarray:
    t = np.arange(remaining + 1)
    block = np.empty((remaining + 1, parts))
    if prefix:
        block[:, : len(prefix)] = np.array(prefix) * scale
    block[:, -2] = t * scale
    block[:, -1] = (remaining - t) * scale
    return block


def _triangle_block(prefix: list[int], remaining: int, parts: int, scale: float) -> np.ndarray:
    counts = np.arange(remaining + 1, 0, -1)
    a = np.repeat(np.arange(remaining + 1), counts)
    starts = np.repeat(np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
    b = np.arange(a.size) - starts
    block = np.empty((a.size, parts))
    if prefix:
        block[:, : len(prefix)] = np.array(prefix) * scale
    block[:, -3] = a * scale
    block[:, -2] = b * scale
    block[:, -1] = (remaining - a - b) * scale
    return block


def _composition_chunks(k: int, parts: int, scale: float) -> Iterator[np.ndarray]:
    """Yield blocks of compositions of k into `parts` parts, scaled, in lex order.

    The last two or three coordinates of each prefix are vectorized into one
    block (triangles capped in size) so enumeration stays fast without
    materializing the whole grid.
    """
    if parts == 1:
        yield np.array([[k * scale]])
        return

    def rec(prefix: list[int], remaining: int, left: int) -> Iterator[np.ndarray]:
        if left == 2:
            yield _line_block(prefix, remaining, parts, scale)
            return
        if left == 3 and (remaining + 1) * (remaining + 2) // 2 <= _TRIANGLE_ROW_CAP:
            yield _triangle_block(prefix, remaining, parts, scale)
            return
        for a in range(remaining + 1):
            yield from rec(prefix + [a], remaining - a, left - 1)

    yield from rec([], k, parts)


def enumerate_grid(spec: GridSpec) -> Iterator[np.ndarray]:
    """Stream every grid vector exactly once, lexicographically ascending."""
    for block in _composition_chunks(spec.steps, spec.m, spec.resolution):
        yield from block


def brute_force_best(
    profile: Profile,
    objective: Objective,
    spec: GridSpec,
    f: UtilityFunction | None = None,
) -> tuple[np.ndarray, float]:
    """Grid argmax of the chosen objective; ties go to the lexicographically
    smallest vector.

    Objectives: "ctr" is sum_i f(satisfaction_i) and requires f; "welfare"
    is the satisfaction total; "maxmin" the satisfaction minimum.
    """
    if spec.m != profile.m:
        raise ValueError(f"grid dimension {spec.m} does not match profile m={profile.m}")
    if objective == "ctr":
        if f is None:
            raise ValueError("objective 'ctr' requires a utility function")
        floor = f.floor

    prefs = profile.prefs
    best_val = -np.inf
    best_vec: np.ndarray | None = None
    for block in _composition_chunks(spec.steps, spec.m, spec.resolution):
        pi = np.minimum(block[:, None, :], prefs[None, :, :]).sum(axis=2)
        if objective == "ctr":
            vals = f.value(np.maximum(pi, floor)).sum(axis=1)
        elif objective == "welfare":
            vals = pi.sum(axis=1)
        elif objective == "maxmin":
            vals = pi.min(axis=1)
        else:
            raise ValueError(f"unknown objective {objective!r}")
        idx = int(np.argmax(vals))
        # strict > keeps the first (lexicographically smallest) maximizer
        if vals[idx] > best_val:
            best_val = float(vals[idx])
            best_vec = block[idx].copy()
    assert best_vec is not None
    return best_vec, best_val
