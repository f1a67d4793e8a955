"""Continuous-time traffic generation: Poisson arrivals, degree sampling and
self-interference-free replica placement inside each user's virtual frame.

All randomness flows through an explicit :class:`numpy.random.Generator`;
independently seeded generators may produce traces concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    DegreeDistribution,
    ModelError,
    SystemConfig,
    T_P,
    UserTransmission,
    validate_config,
)


class PlacementInfeasible(ModelError):
    pass


class HorizonTooShort(ModelError):
    pass


_ARRIVAL_CHUNK = 8192


def sample_degree(dist: DegreeDistribution, rng: np.random.Generator) -> int:
    """Draw one repetition degree from ``dist``."""
    return int(sample_degrees(dist, 1, rng)[0])


def sample_degrees(dist: DegreeDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` repetition degrees by inverting the distribution's CDF."""
    degrees = np.asarray(dist.degrees, dtype=np.int64)
    cum = np.cumsum(np.asarray(dist.probabilities))
    u = rng.random(n)
    idx = np.searchsorted(cum, u, side="right")
    np.clip(idx, 0, len(degrees) - 1, out=idx)
    return degrees[idx]


def place_replicas(
    t0: float, degree: int, cfg: SystemConfig, rng: np.random.Generator
) -> np.ndarray:
    """Start times for ``degree`` replicas of a user arriving at ``t0``.

    The first replica starts at ``t0``; the remaining ``degree - 1`` starts are
    distributed uniformly over the region of ``[t0, t0 + T_f - T_p]`` where all
    pairwise separations (including to the first replica) stay >= one packet.
    The draw uses the spacing construction: sorted i.i.d. uniforms on the
    shrunken range plus one packet of mandatory gap per replica, which realises
    exactly the separation-conditioned uniform law and also covers the
    degenerate case where the frame fits the replicas with zero slack.
    """
    rel = _relative_offsets(degree, 1, cfg, rng)[0]
    return t0 + np.concatenate(([0.0], rel))


def _relative_offsets(
    degree: int, count: int, cfg: SystemConfig, rng: np.random.Generator
) -> np.ndarray:
    """(count, degree-1) matrix of offsets from the arrival, sorted per row."""
    t_p = cfg.packet_duration
    slack = cfg.vf_duration - degree * t_p
    if slack < 0:
        raise PlacementInfeasible(
            f"{degree} replicas cannot fit a virtual frame of {cfg.vf_duration}"
        )
    y = np.sort(rng.uniform(0.0, slack, size=(count, degree - 1)), axis=1)
    return y + np.arange(1, degree) * t_p


@dataclass
class TrafficTrace:
    """A generated trace in flat array form.

    ``arrival`` and ``degree`` are per-user (sorted by arrival); replica start
    times are stored user-major in ``rep_start`` with CSR offsets ``rep_ptr``
    (user ``u`` owns ``rep_start[rep_ptr[u]:rep_ptr[u+1]]``, sorted).
    """

    arrival: np.ndarray
    degree: np.ndarray
    rep_ptr: np.ndarray
    rep_start: np.ndarray
    horizon: float
    load: float
    vf_span: float
    _users: list[UserTransmission] | None = field(default=None, repr=False)

    @property
    def n_users(self) -> int:
        return len(self.arrival)

    @property
    def n_replicas(self) -> int:
        return len(self.rep_start)

    def user(self, i: int) -> UserTransmission:
        starts = self.rep_start[self.rep_ptr[i]: self.rep_ptr[i + 1]]
        return UserTransmission(
            user_id=i,
            arrival=float(self.arrival[i]),
            degree=int(self.degree[i]),
            replica_starts=tuple(float(t) for t in starts),
        )

    @property
    def users(self) -> list[UserTransmission]:
        if self._users is None:
            self._users = [self.user(i) for i in range(self.n_users)]
        return self._users

    @property
    def complete_mask(self) -> np.ndarray:
        """True for users whose whole virtual frame lies inside the horizon.

        Users arriving close to the horizon are still generated (they provide
        interference) but flagged here for exclusion from loss statistics.
        """
        return self.arrival + self.vf_span * T_P <= self.horizon

    def dump_replicas(self, stream) -> None:
        """One line per replica: ``user_id,degree,replica_index,start_time``."""
        stream.write("user_id,degree,replica_index,start_time\n")
        for u in range(self.n_users):
            deg = int(self.degree[u])
            base = int(self.rep_ptr[u])
            for r in range(deg):
                stream.write(f"{u},{deg},{r},{self.rep_start[base + r]:.12g}\n")


def generate_trace(
    cfg: SystemConfig,
    dist: DegreeDistribution,
    load: float,
    horizon: float,
    rng: np.random.Generator,
) -> TrafficTrace:
    """Poisson arrivals of intensity ``load`` over ``[0, horizon]`` with
    independently sampled degrees and replica placements."""
    if not load > 0:
        raise ModelError(f"load must be positive, got {load}")
    validate_config(cfg, dist)
    if horizon < cfg.window_length:
        raise HorizonTooShort(
            f"horizon {horizon} shorter than one receiver window {cfg.window_length}"
        )

    parts = []
    last = 0.0
    scale = 1.0 / load
    while last <= horizon:
        gaps = rng.exponential(scale, _ARRIVAL_CHUNK)
        chunk = np.cumsum(gaps) + last
        parts.append(chunk)
        last = float(chunk[-1])
    arrival = np.concatenate(parts)
    arrival = arrival[arrival <= horizon]
    n = len(arrival)

    degree = sample_degrees(dist, n, rng)
    rep_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degree, out=rep_ptr[1:])
    rep_start = np.empty(int(rep_ptr[-1]), dtype=np.float64)

    # fill per degree class, ascending, so the rng call order is fixed
    for d in sorted(set(int(x) for x in np.unique(degree))):
        idx = np.nonzero(degree == d)[0]
        rel = _relative_offsets(d, len(idx), cfg, rng)
        block = np.concatenate([np.zeros((len(idx), 1)), rel], axis=1) + arrival[idx][:, None]
        flat_idx = rep_ptr[idx][:, None] + np.arange(d)[None, :]
        rep_start[flat_idx.ravel()] = block.ravel()

    return TrafficTrace(
        arrival=arrival,
        degree=degree,
        rep_ptr=rep_ptr,
        rep_start=rep_start,
        horizon=float(horizon),
        load=float(load),
        vf_span=cfg.vf_span,
    )
