"""Analytical approximation of the packet loss rate in the error-floor region.

At low to medium load, losses are dominated by small groups of users whose
replicas block each other so thoroughly that interference cancellation never
gets started: unresolvable collision patterns. The machinery here

* reduces the two-packet collision geometry to a vulnerable fraction ``phi``
  and a number ``n_v`` of disjoint vulnerable periods per virtual frame,
* carries a catalog of the dominant patterns with up to four replica-collision
  sets, each described by its per-degree user profile, its number of
  replica-collision sets and the count of labeled configurations realising it
  over a fixed set of periods,
* combines selection, placement and configuration counts into the probability
  that a tagged user is caught in a pattern, and mixes over the Poisson number
  of users sharing a virtual-frame span,
* validates every configuration count against a brute-force enumeration over
  a small number of labeled periods.

Combinatorial quantities are evaluated with exact integer arithmetic
(arbitrary precision) and divided as late as possible; only the Poisson
weights go through log space.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations

from .model import DegreeDistribution, ModelError, SystemConfig

TAIL_EPS = 1e-15
TERM_REL_EPS = 1e-13


class FloorError(ValueError):
    """Analytical machinery left its domain of validity."""


class InfeasiblePattern(FloorError):
    pass


class DegenerateVulnerablePeriod(FloorError):
    pass


class NonconvergentTruncation(FloorError):
    pass


class EnumerationTooLarge(FloorError):
    pass


class CollisionChannelRegimeWarning(UserWarning):
    """The rate meets or exceeds the clean-packet capacity: any overlap kills
    a replica and the vulnerable period saturates at two packet durations."""


@dataclass(frozen=True)
class CollisionPattern:
    """One unresolvable collision pattern.

    ``profile[i]`` counts the users of degree ``i + 1`` taking part;
    ``num_sets`` is the number of replica-collision sets (maximal groups of
    mutually interfering replicas) and ``iso_count`` the number of distinct
    labeled configurations realising the pattern over a fixed, labeled set of
    ``num_sets`` vulnerable periods.
    """

    name: str
    profile: tuple[int, ...]
    num_sets: int
    iso_count: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "profile", tuple(int(c) for c in self.profile))
        if any(c < 0 for c in self.profile):
            raise InfeasiblePattern(f"negative user count in profile {self.profile}")
        if self.profile and self.profile[0] != 0:
            raise InfeasiblePattern("degree-1 users cannot occur, the protocol floor is two replicas")
        if self.num_users < 1:
            raise InfeasiblePattern("pattern must involve at least one user")
        if self.num_sets < 1:
            raise InfeasiblePattern("pattern must occupy at least one vulnerable period")
        if self.total_replicas < 2 * self.num_sets:
            raise InfeasiblePattern(
                "every replica-collision set holds at least two replicas, "
                f"but profile {self.profile} has {self.total_replicas} replicas "
                f"for {self.num_sets} sets"
            )
        if self.iso_count < 1:
            raise InfeasiblePattern("configuration count must be at least 1")

    @property
    def num_users(self) -> int:
        return sum(self.profile)

    @property
    def total_replicas(self) -> int:
        return sum(l * c for l, c in enumerate(self.profile, start=1))

    @property
    def max_degree(self) -> int:
        return max((l for l, c in enumerate(self.profile, start=1) if c), default=0)

    def degree_list(self) -> list[int]:
        return [l for l, c in enumerate(self.profile, start=1) for _ in range(c)]


@dataclass(frozen=True)
class FloorParams:
    """Derived floor geometry for one scenario."""

    phi: float
    t_v: float
    n_v: int
    n_p: float
    collision_regime: bool


_BUILTIN_ROWS = (
    # name, profile (degree 1..4), replica-collision sets, labeled configurations
    ("d22-m2", (0, 2, 0, 0), 2, 1),
    ("d33-m3", (0, 0, 2, 0), 3, 1),
    ("d222-m3", (0, 3, 0, 0), 3, 6),
    ("d223-m3", (0, 2, 1, 0), 3, 6),
    ("d44-m4", (0, 0, 0, 2), 4, 1),
    ("d224-m4", (0, 2, 0, 1), 4, 6),
    ("d233-m4", (0, 1, 2, 0), 4, 12),
    ("d234-m4", (0, 1, 1, 1), 4, 12),
    ("d333-m4", (0, 0, 3, 0), 4, 24),
    ("d334-m4", (0, 0, 2, 1), 4, 12),
    ("d2224-m4", (0, 3, 0, 1), 4, 24),
    ("d2222-m4", (0, 4, 0, 0), 4, 72),
)


def builtin_catalog() -> tuple[CollisionPattern, ...]:
    """The twelve dominant patterns with at most four replica-collision sets."""
    return tuple(CollisionPattern(n, p, mu, c) for n, p, mu, c in _BUILTIN_ROWS)


def two_user_pattern(degree: int) -> CollisionPattern:
    """The pattern of two degree-``degree`` users whose replicas all pair up."""
    profile = [0] * degree
    profile[degree - 1] = 2
    return CollisionPattern(f"d{degree}{degree}-m{degree}", tuple(profile), degree, 1)


def vulnerable_fraction(snr_linear: float, rate: float) -> float:
    """Fraction ``phi`` of a packet that must stay clean for decoding.

    ``phi`` solves ``phi * I0 + (1 - phi) * I1 = rate`` where ``I0`` is the
    interference-free MI and ``I1`` the MI under one equal-power interferer,
    clamped to ``[0, 1]``. A single interferer is fatal exactly when it starts
    within ``phi`` packet durations of either packet edge, so the vulnerable
    period spans ``2 * phi`` packet durations. ``phi = 0`` means one
    interferer can never kill a packet; ``phi = 1`` (flagged by a
    :class:`CollisionChannelRegimeWarning`) means even a clean packet carries
    no rate margin and the model degenerates to the collision channel.
    """
    if not snr_linear > 0:
        raise ModelError(f"snr must be positive, got {snr_linear}")
    if not rate > 0:
        raise ModelError(f"rate must be positive, got {rate}")
    i0 = math.log2(1.0 + snr_linear)
    i1 = math.log2(1.0 + snr_linear / (1.0 + snr_linear))
    if rate >= i0:
        warnings.warn(
            f"rate {rate} >= clean-packet capacity {i0:.6g}; collision channel regime",
            CollisionChannelRegimeWarning,
            stacklevel=2,
        )
        return 1.0
    return max(0.0, (rate - i1) / (i0 - i1))


def vp_count(vf_span: float, phi: float, packet_duration: float = 1.0) -> int:
    """Number of disjoint vulnerable periods inside one virtual frame."""
    if phi <= 0.0:
        raise DegenerateVulnerablePeriod(
            "phi = 0: a single interferer is never fatal and no floor exists"
        )
    return int(math.floor(vf_span * packet_duration / (2.0 * phi * packet_duration)))


def floor_params(cfg: SystemConfig) -> FloorParams:
    phi = vulnerable_fraction(cfg.snr_linear, cfg.rate)
    collision = phi >= 1.0
    t_v = 2.0 * phi * cfg.packet_duration
    n_v = vp_count(cfg.vf_span, phi, cfg.packet_duration) if phi > 0.0 else 0
    return FloorParams(phi=phi, t_v=t_v, n_v=n_v, n_p=cfg.vf_span, collision_regime=collision)


def profile_selection_count(m: int, profile, dist: DegreeDistribution) -> float:
    """Expected number of ways to pick the pattern's users out of ``m``.

    Counts ordered choices of ``nu`` users from ``m`` and weighs them by the
    probability that the chosen users carry exactly the profile's degrees.
    Returns 0 when ``m`` is too small or a required degree has no mass.
    """
    profile = tuple(int(c) for c in profile)
    nu = sum(profile)
    if m < nu:
        return 0.0
    acc = float(math.comb(m, nu) * math.factorial(nu))
    for l, cnt in enumerate(profile, start=1):
        if cnt == 0:
            continue
        p = dist.prob(l)
        if p <= 0.0:
            return 0.0
        acc *= p**cnt / math.factorial(cnt)
    return acc


def period_choice_count(n_v: int, num_sets: int) -> int:
    """Ways to choose the pattern's vulnerable periods around the tagged user."""
    if num_sets < 1 or num_sets > n_v:
        raise InfeasiblePattern(
            f"{num_sets} replica-collision sets cannot occupy {n_v} vulnerable periods"
        )
    return math.comb(n_v - 1, num_sets - 1)


def edge_assignment_count(n_v: int, profile) -> int | float:
    """Total ways the profile's users can attach replicas to ``n_v`` periods."""
    profile = tuple(int(c) for c in profile)
    prod = 1
    for l, cnt in enumerate(profile, start=1):
        if cnt:
            prod *= (n_v * math.comb(n_v - 1, l - 1)) ** cnt
    if sum(profile) == 0:
        return 1.0 / n_v
    # every factor carries one power of n_v, so this division is exact
    return prod // n_v


# diagnostic: how often the per-term probability had to be clamped into [0, 1]
_CLAMP_KEY = "clamped_terms"


def prob_user_in_pattern(
    m: int,
    pattern: CollisionPattern,
    n_v: int,
    dist: DegreeDistribution,
    diagnostics: dict | None = None,
) -> float:
    """Probability that a tagged user (one of ``m``) is caught in ``pattern``."""
    sel = profile_selection_count(m, pattern.profile, dist)
    if sel == 0.0:
        return 0.0
    periods = period_choice_count(n_v, pattern.num_sets)
    total = edge_assignment_count(n_v, pattern.profile)
    # exact big-integer ratio, converted to float only at the end
    pr = sel * pattern.iso_count * pattern.num_users * (periods / (m * total))
    if pr > 1.0 or pr < 0.0:
        if diagnostics is not None:
            diagnostics[_CLAMP_KEY] = diagnostics.get(_CLAMP_KEY, 0) + 1
        pr = min(1.0, max(0.0, pr))
    return pr


def pattern_feasible(pattern: CollisionPattern, dist: DegreeDistribution, n_v: int) -> bool:
    """A pattern contributes only if every needed degree has mass and its
    replica-collision sets fit the available vulnerable periods."""
    if pattern.num_sets > n_v:
        return False
    for l, cnt in enumerate(pattern.profile, start=1):
        if cnt and dist.prob(l) <= 0.0:
            return False
    return True


def _poisson_log_pmf(m: int, lam: float) -> float:
    return m * math.log(lam) - lam - math.lgamma(m + 1)


def _mix_over_poisson(lam: float, per_m, margin_terms: int, diagnostics: dict | None) -> float:
    """Sum ``per_m(m) * Poisson(m; lam)`` for m >= 2 with adaptive truncation.

    Terms are accumulated until the Poisson tail mass beyond m (bounded by a
    geometric series once m exceeds the mean) drops below ``TAIL_EPS`` and
    the last increment contributes less than ``TERM_REL_EPS`` of the running
    sum, then ``margin_terms`` extra terms are added. A hard cap guards
    against runaway sums.
    """
    total = 0.0
    m_cap = int(lam + 12.0 * math.sqrt(lam) + 50.0)
    m = 2
    remaining_margin = -1
    while True:
        pm = math.exp(_poisson_log_pmf(m, lam))
        inc = pm * per_m(m)
        total += inc
        if remaining_margin < 0:
            ratio = lam / (m + 2.0)
            if ratio < 1.0:
                tail_bound = pm * (lam / (m + 1.0)) / (1.0 - ratio)
                if tail_bound < TAIL_EPS and inc <= TERM_REL_EPS * total:
                    remaining_margin = margin_terms
        if remaining_margin == 0:
            break
        if remaining_margin > 0:
            remaining_margin -= 1
        elif m >= m_cap:
            raise NonconvergentTruncation(
                f"load mixture did not converge within {m_cap} terms (lambda={lam})"
            )
        m += 1
    if diagnostics is not None:
        diagnostics["m_terms"] = m - 1
    return total


def plr_floor(
    load: float,
    cfg: SystemConfig,
    dist: DegreeDistribution,
    catalog: tuple[CollisionPattern, ...] | None = None,
    *,
    margin_terms: int = 0,
    diagnostics: dict | None = None,
) -> float:
    """Error-floor approximation of the packet loss rate at ``load``.

    Sums, over the feasible catalog patterns and the Poisson-distributed
    number of users per virtual-frame span, the probability that a tagged
    user belongs to an unresolvable pattern. Returns 0 when one interferer
    can never kill a packet (``phi = 0``).
    """
    if catalog is None:
        catalog = builtin_catalog()
    if not catalog:
        raise FloorError("pattern catalog is empty")
    phi = vulnerable_fraction(cfg.snr_linear, cfg.rate)
    if phi == 0.0:
        return 0.0
    n_v = vp_count(cfg.vf_span, phi, cfg.packet_duration)
    feasible = [s for s in catalog if pattern_feasible(s, dist, n_v)]
    if diagnostics is not None:
        diagnostics["phi"] = phi
        diagnostics["n_v"] = n_v
        diagnostics["patterns"] = [s.name for s in feasible]
    if not feasible:
        return 0.0
    lam = cfg.vf_span * load

    def per_m(m: int) -> float:
        return sum(prob_user_in_pattern(m, s, n_v, dist, diagnostics) for s in feasible)

    return _mix_over_poisson(lam, per_m, margin_terms, diagnostics)


def plr_regular(
    load: float,
    cfg: SystemConfig,
    degree: int,
    catalog: tuple[CollisionPattern, ...] | None = None,
    *,
    margin_terms: int = 0,
    diagnostics: dict | None = None,
) -> float:
    """Specialisation of :func:`plr_floor` to the regular distribution where
    every user transmits exactly ``degree`` replicas.

    The user-selection and placement counts collapse to pure binomials, and
    every per-term probability becomes an exact integer ratio.
    """
    if catalog is None:
        catalog = builtin_catalog()
    dist = DegreeDistribution.regular(degree)
    phi = vulnerable_fraction(cfg.snr_linear, cfg.rate)
    if phi == 0.0:
        return 0.0
    n_v = vp_count(cfg.vf_span, phi, cfg.packet_duration)
    feasible = [s for s in catalog if pattern_feasible(s, dist, n_v)]
    if not feasible:
        return 0.0
    lam = cfg.vf_span * load
    placements = n_v * math.comb(n_v - 1, degree - 1)

    def per_m(m: int) -> float:
        acc = 0.0
        for s in feasible:
            nu = s.num_users
            num = nu * math.comb(m, nu) * math.comb(n_v - 1, s.num_sets - 1) * s.iso_count * n_v
            den = m * placements**nu
            pr = num / den
            if pr > 1.0:
                if diagnostics is not None:
                    diagnostics[_CLAMP_KEY] = diagnostics.get(_CLAMP_KEY, 0) + 1
                pr = 1.0
            acc += pr
        return acc

    return _mix_over_poisson(lam, per_m, margin_terms, diagnostics)


def plr_two_user(
    load: float,
    cfg: SystemConfig,
    degree: int,
    *,
    margin_terms: int = 0,
    diagnostics: dict | None = None,
) -> float:
    """Loss floor when only the two-user pattern is considered for a regular
    degree: two users whose ``degree`` replicas collide pairwise.

    For ``degree = 2`` this sum has the closed form
    ``(n_p G - 1 + exp(-n_p G)) / (n_v (n_v - 1))``.
    """
    phi = vulnerable_fraction(cfg.snr_linear, cfg.rate)
    if phi == 0.0:
        return 0.0
    n_v = vp_count(cfg.vf_span, phi, cfg.packet_duration)
    if degree > n_v:
        return 0.0
    lam = cfg.vf_span * load
    den_base = n_v * math.comb(n_v - 1, degree - 1)

    def per_m(m: int) -> float:
        pr = (2 * math.comb(m, 2)) / (m * den_base)
        if pr > 1.0:
            if diagnostics is not None:
                diagnostics[_CLAMP_KEY] = diagnostics.get(_CLAMP_KEY, 0) + 1
            pr = 1.0
        return pr

    return _mix_over_poisson(lam, per_m, margin_terms, diagnostics)


# -- brute-force validation of the configuration counts ----------------------

_MAX_ENUM_PERIODS = 10


def count_configurations(pattern: CollisionPattern, n_periods: int) -> int:
    """Exhaustively count labeled assignments realising ``pattern``.

    Every user of degree ``l`` picks an ``l``-subset of ``n_periods`` labeled
    vulnerable periods. An assignment realises the pattern when exactly
    ``num_sets`` periods are occupied, every occupied period holds at least
    two replicas, the occupancy graph is connected, and no proper nonempty
    user subset is already stuck on its own (no user of the subset keeps a
    replica alone in a period). The result equals
    ``comb(n_periods, num_sets) * iso_count`` when ``iso_count`` is correct.
    """
    if n_periods > _MAX_ENUM_PERIODS:
        raise EnumerationTooLarge(
            f"exhaustive enumeration over {n_periods} periods is not tractable"
        )
    degrees = pattern.degree_list()
    mu = pattern.num_sets
    if mu > n_periods or max(degrees) > n_periods:
        return 0
    nu = len(degrees)

    masks_by_degree: dict[int, list[int]] = {}
    for d in set(degrees):
        masks_by_degree[d] = [
            sum(1 << b for b in combo) for combo in combinations(range(n_periods), d)
        ]

    # enumerate users in descending degree order; pruning on the occupied-set
    # size cuts most branches early, the count itself is order-independent
    order = sorted(range(nu), key=lambda i: -degrees[i])
    chosen = [0] * nu
    count = 0

    def occupancy_ok(union: int) -> bool:
        for b in range(n_periods):
            if union >> b & 1:
                if sum(chosen[i] >> b & 1 for i in range(nu)) < 2:
                    return False
        return True

    def connected(union: int) -> bool:
        comp = chosen[0]
        grew = True
        while grew:
            grew = False
            for i in range(1, nu):
                if chosen[i] & comp and chosen[i] | comp != comp:
                    comp |= chosen[i]
                    grew = True
        return all(chosen[i] & comp for i in range(nu))

    def dominant() -> bool:
        # reject if some proper nonempty user subset is itself stuck
        for sub in range(1, (1 << nu) - 1):
            members = [i for i in range(nu) if sub >> i & 1]
            union = 0
            for i in members:
                union |= chosen[i]
            stuck = True
            for b in range(n_periods):
                if union >> b & 1:
                    if sum(chosen[i] >> b & 1 for i in members) == 1:
                        stuck = False
                        break
            if stuck:
                return False
        return True

    def rec(pos: int, union: int) -> None:
        nonlocal count
        if pos == nu:
            if (
                union.bit_count() == mu
                and occupancy_ok(union)
                and connected(union)
                and dominant()
            ):
                count += 1
            return
        user = order[pos]
        for mask in masks_by_degree[degrees[user]]:
            u2 = union | mask
            if u2.bit_count() <= mu:
                chosen[user] = mask
                rec(pos + 1, u2)
        chosen[user] = 0

    rec(0, 0)
    return count


# -- catalog files ------------------------------------------------------------


def load_catalog(path) -> tuple[CollisionPattern, ...]:
    """Read a pattern catalog from a text file.

    Each non-comment line holds ``name profile num_sets iso_count`` with the
    profile as comma-separated per-degree user counts starting at degree 1,
    e.g. ``d222-m3 0,3,0,0 3 6``.
    """
    patterns = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FloorError(f"{path}:{lineno}: expected 'name profile num_sets iso_count'")
            name, profile_s, mu_s, c_s = parts
            try:
                profile = tuple(int(x) for x in profile_s.split(","))
                patterns.append(CollisionPattern(name, profile, int(mu_s), int(c_s)))
            except ValueError as exc:
                raise FloorError(f"{path}:{lineno}: {exc}") from exc
    if not patterns:
        raise FloorError(f"{path}: catalog file holds no patterns")
    return tuple(patterns)


def write_catalog(path, catalog) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# name profile num_sets iso_count\n")
        for s in catalog:
            fh.write(f"{s.name} {','.join(str(c) for c in s.profile)} {s.num_sets} {s.iso_count}\n")
