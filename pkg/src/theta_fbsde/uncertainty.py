"""Non-convex control-feasible sets: finite unions of disjoint closed intervals.

The feasible set may depend on the law of the value process through a scalar
ambiguity parameter; :class:`AmbiguityMap` carries that dependence and realizes
a concrete :class:`IntervalUnion` for a given law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .measures import EmpiricalMeasure, moments


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted union of disjoint closed intervals on the real line.

    Degenerate intervals (single points) are allowed.  Endpoints must be
    finite, each pair ordered, and consecutive intervals strictly disjoint.
    """

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pairs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        if not pairs:
            raise ConfigurationError("an interval union needs at least one interval")
        for lo, hi in pairs:
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ConfigurationError(f"interval endpoints must be finite, got [{lo}, {hi}]")
            if lo > hi:
                raise ConfigurationError(f"interval [{lo}, {hi}] has lo > hi")
        for (_, hi), (lo_next, _) in zip(pairs, pairs[1:]):
            if not hi < lo_next:
                raise ConfigurationError(
                    f"intervals must be sorted and strictly disjoint ({hi} meets {lo_next})"
                )
        object.__setattr__(self, "intervals", pairs)

    @property
    def lower(self) -> float:
        return self.intervals[0][0]

    @property
    def upper(self) -> float:
        return self.intervals[-1][1]

    def contains(self, a: float) -> bool:
        """Membership, endpoints included."""
        return any(lo <= a <= hi for lo, hi in self.intervals)

    def distance_to(self, x: float) -> float:
        """Distance from ``x`` to the set."""
        return min(abs(min(max(x, lo), hi) - x) for lo, hi in self.intervals)

    def project_info(self, w0: float) -> tuple[float, bool]:
        """Nearest member to ``w0`` plus a flag for gap-equidistant ties.

        Ties are broken toward the smaller candidate; the flag lets callers
        exclude tie neighborhoods where the projection map is discontinuous.
        """
        best = math.inf
        best_d = math.inf
        tie = False
        for lo, hi in self.intervals:
            cand = min(max(w0, lo), hi)
            d = abs(cand - w0)
            if d < best_d:
                best, best_d, tie = cand, d, False
            elif d == best_d and cand != best:
                tie = True
        return best, tie

    def project(self, w0: float) -> float:
        """Nearest member to ``w0`` (smaller value on ties)."""
        return self.project_info(w0)[0]

    def convex_hull(self) -> "IntervalUnion":
        """Single interval spanning the set."""
        return IntervalUnion(((self.lower, self.upper),))

    def midpoint(self) -> float:
        """Member of the set nearest to the hull midpoint."""
        return self.project(0.5 * (self.lower + self.upper))


def hausdorff(a: IntervalUnion, b: IntervalUnion) -> float:
    """Exact Hausdorff distance between two interval unions.

    The directed distance ``sup_{x in a} d(x, b)`` is piecewise linear in x,
    so its maximum is attained either at an endpoint of ``a`` or at the
    midpoint of a gap of ``b`` that lies inside ``a``.  Evaluating only those
    candidates is therefore exact.
    """
    return max(_directed(a, b), _directed(b, a))


def _directed(a: IntervalUnion, b: IntervalUnion) -> float:
    candidates = [p for pair in a.intervals for p in pair]
    for (_, hi), (lo_next, _) in zip(b.intervals, b.intervals[1:]):
        mid = 0.5 * (hi + lo_next)
        if a.contains(mid):
            candidates.append(mid)
    return max(b.distance_to(x) for x in candidates)


@dataclass(frozen=True)
class ConstantTheta:
    """Fixed ambiguity parameter; the law is ignored."""

    value: float = 0.0

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.value, self.value)

    def __call__(self, law: EmpiricalMeasure) -> float:
        return self.value


@dataclass(frozen=True)
class AffineTheta:
    """theta = clip(alpha * mean + beta * stddev, lo, hi).

    Clamping keeps theta in a compact range; mean and stddev are both
    1-Lipschitz under the quadratic transport distance, so the rule is
    Lipschitz in the law.
    """

    alpha: float
    beta: float
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ConfigurationError("theta bounds must be finite")
        if self.lo > self.hi:
            raise ConfigurationError(f"theta bounds out of order: [{self.lo}, {self.hi}]")

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def __call__(self, law: EmpiricalMeasure) -> float:
        mean, std = moments(law)
        return min(max(self.alpha * mean + self.beta * std, self.lo), self.hi)


@dataclass(frozen=True)
class AmbiguityMap:
    """Law-dependent feasible set: a base union with affine endpoint motion.

    Each endpoint moves as ``base + shift * theta``.  Affine motion keeps the
    family Lipschitz in theta with respect to the Hausdorff distance, and a
    disjointness violation anywhere in the theta range would already show at
    one of the two extremes, which the constructor checks.
    """

    base: IntervalUnion
    endpoint_shifts: tuple[float, ...] = ()
    theta_rule: ConstantTheta | AffineTheta = field(default_factory=ConstantTheta)

    def __post_init__(self):
        shifts = tuple(float(s) for s in self.endpoint_shifts)
        if not shifts:
            shifts = (0.0,) * (2 * len(self.base.intervals))
        if len(shifts) != 2 * len(self.base.intervals):
            raise ConfigurationError(
                f"need one shift per endpoint ({2 * len(self.base.intervals)}), got {len(shifts)}"
            )
        if not all(math.isfinite(s) for s in shifts):
            raise ConfigurationError("endpoint shifts must be finite")
        object.__setattr__(self, "endpoint_shifts", shifts)
        for theta in self.theta_bounds:
            self.realize_at(theta)

    @property
    def theta_bounds(self) -> tuple[float, float]:
        return self.theta_rule.bounds

    @property
    def is_static(self) -> bool:
        lo, hi = self.theta_bounds
        return lo == hi or all(s == 0.0 for s in self.endpoint_shifts)

    def realize_at(self, theta: float) -> IntervalUnion:
        """Set realized for one value of the ambiguity parameter."""
        shifted = []
        for (lo, hi), s_lo, s_hi in zip(
            self.base.intervals, self.endpoint_shifts[0::2], self.endpoint_shifts[1::2]
        ):
            shifted.append((lo + s_lo * theta, hi + s_hi * theta))
        try:
            return IntervalUnion(tuple(shifted))
        except ConfigurationError as exc:
            raise ConfigurationError(f"realized set invalid at theta={theta}: {exc}") from exc

    def realize(self, law: EmpiricalMeasure) -> IntervalUnion:
        """Set realized for the given law of the value process."""
        return self.realize_at(self.theta_rule(law))

    def control_range(self) -> tuple[float, float]:
        """Extreme feasible controls over the whole theta range.

        Endpoints are affine in theta, so the extremes occur at the theta
        bounds.
        """
        lows, highs = [], []
        for theta in self.theta_bounds:
            u = self.realize_at(theta)
            lows.append(u.lower)
            highs.append(u.upper)
        return min(lows), max(highs)


def static_set(intervals) -> AmbiguityMap:
    """Ambiguity map with a fixed set and no law dependence."""
    return AmbiguityMap(base=IntervalUnion(tuple(intervals)))
