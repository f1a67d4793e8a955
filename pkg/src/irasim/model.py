"""Domain types shared by the traffic generator, the receiver and the
analytical error-floor machinery.

Conventions
-----------
Time is measured in packet durations: one replica occupies exactly one time
unit. A virtual frame spans ``vf_span`` packet durations, the channel load is
given in packet arrivals per packet duration, and the signal-to-noise ratio is
a linear power ratio (use :meth:`SystemConfig.from_db` for dB input).

All types here are immutable after construction and safe to share across
concurrent Monte Carlo workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

#: The packet duration, i.e. the time unit everything is normalised to.
T_P = 1.0

#: Absolute tolerance on the degree distribution normalisation.
PROB_TOL = 1e-12

# Replica starts are assembled as t0 + relative offset; allow one part in 1e9
# of rounding slack when re-checking the minimum separation.
_GAP_TOL = 1e-9


class ModelError(ValueError):
    """A physical parameter or distribution violates the system model."""


class InvalidPhysicalParameter(ModelError):
    pass


class NonNormalizedDistribution(ModelError):
    pass


class DegreeTooLargeForVF(ModelError):
    pass


@dataclass(frozen=True)
class TimeInterval:
    """A span ``[begin, end]`` on the continuous time axis, packet units."""

    begin: float
    end: float

    def __post_init__(self) -> None:
        if not self.begin < self.end:
            raise InvalidPhysicalParameter(
                f"interval must have begin < end, got [{self.begin}, {self.end}]"
            )

    @property
    def length(self) -> float:
        return self.end - self.begin

    def overlaps(self, other: "TimeInterval") -> bool:
        return self.begin < other.end and other.begin < self.end

    def overlap_length(self, other: "TimeInterval") -> float:
        lo = max(self.begin, other.begin)
        hi = min(self.end, other.end)
        return hi - lo if hi > lo else 0.0

    def shifted(self, dt: float) -> "TimeInterval":
        return TimeInterval(self.begin + dt, self.end + dt)


@dataclass(frozen=True)
class SystemConfig:
    """Physical and receiver parameters of one scenario.

    ``snr_linear`` is the received power over noise power ratio (equal for all
    users, perfect power control), ``rate`` the code rate in bits per symbol,
    ``vf_span`` the virtual frame duration in packet units. The receiver
    operates on a sliding window of ``window_span`` virtual frames, advanced
    by ``window_step`` virtual frames whenever decoding stalls.
    """

    snr_linear: float
    rate: float
    vf_span: float
    packet_duration: float = T_P
    window_span: float = 3.0
    window_step: float = 0.1

    def __post_init__(self) -> None:
        self.validate()

    @classmethod
    def from_db(cls, snr_db: float, rate: float, vf_span: float, **kwargs) -> "SystemConfig":
        """Build a config from an SNR quoted in dB."""
        return cls(snr_linear=10.0 ** (snr_db / 10.0), rate=rate, vf_span=vf_span, **kwargs)

    def validate(self) -> None:
        if not (math.isfinite(self.snr_linear) and self.snr_linear > 0):
            raise InvalidPhysicalParameter(f"snr_linear must be positive, got {self.snr_linear}")
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise InvalidPhysicalParameter(f"rate must be positive, got {self.rate}")
        if self.packet_duration != T_P:
            raise InvalidPhysicalParameter(
                "times are normalised to the packet duration; packet_duration must be 1.0"
            )
        if not (math.isfinite(self.vf_span) and self.vf_span >= 2.0):
            # a virtual frame must fit at least two non-overlapping replicas
            raise InvalidPhysicalParameter(f"vf_span must be >= 2 packet durations, got {self.vf_span}")
        if self.window_span < 1.0 + 1.0 / self.vf_span:
            raise InvalidPhysicalParameter(
                "window must contain at least one full virtual frame plus a packet"
            )
        if not (0.0 < self.window_step <= self.window_span):
            raise InvalidPhysicalParameter(f"window_step must lie in (0, window_span], got {self.window_step}")

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr_linear)

    @property
    def vf_duration(self) -> float:
        """Virtual frame duration in absolute time units."""
        return self.vf_span * self.packet_duration

    @property
    def window_length(self) -> float:
        return self.window_span * self.vf_duration

    @property
    def step_length(self) -> float:
        return self.window_step * self.vf_duration


@dataclass(frozen=True)
class DegreeDistribution:
    """Probabilities over the number of replicas a user transmits.

    ``entries`` holds ``(degree, probability)`` pairs with distinct degrees
    >= 2 and probabilities summing to one.
    """

    entries: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        norm = tuple(sorted((int(d), float(p)) for d, p in self.entries))
        object.__setattr__(self, "entries", norm)
        self.validate()

    @classmethod
    def from_pairs(cls, pairs) -> "DegreeDistribution":
        return cls(tuple(pairs))

    @classmethod
    def regular(cls, degree: int) -> "DegreeDistribution":
        """Every user transmits exactly ``degree`` replicas."""
        return cls(((degree, 1.0),))

    def validate(self) -> None:
        if not self.entries:
            raise NonNormalizedDistribution("degree distribution has no entries")
        degrees = [d for d, _ in self.entries]
        if len(set(degrees)) != len(degrees):
            raise InvalidPhysicalParameter(f"duplicate degrees in {degrees}")
        for d, p in self.entries:
            if d < 2:
                raise InvalidPhysicalParameter(f"repetition degree must be >= 2, got {d}")
            if not (0.0 < p <= 1.0):
                raise InvalidPhysicalParameter(f"probability for degree {d} must be in (0, 1], got {p}")
        total = math.fsum(p for _, p in self.entries)
        if abs(total - 1.0) > PROB_TOL:
            raise NonNormalizedDistribution(f"degree probabilities sum to {total!r}, expected 1")

    @property
    def d_m(self) -> int:
        """Largest degree with positive probability."""
        return self.entries[-1][0]

    @cached_property
    def mean_degree(self) -> float:
        return math.fsum(d * p for d, p in self.entries)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(d for d, _ in self.entries)

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(p for _, p in self.entries)

    def prob(self, degree: int) -> float:
        for d, p in self.entries:
            if d == degree:
                return p
        return 0.0


@dataclass(frozen=True)
class UserTransmission:
    """One user's arrival and the start times of all its replicas.

    The first replica goes out at the arrival instant; the remaining ones lie
    inside the user's virtual frame, pairwise separated by at least one packet
    duration so the user never interferes with itself.
    """

    user_id: int
    arrival: float
    degree: int
    replica_starts: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "replica_starts", tuple(float(t) for t in self.replica_starts))
        if self.degree < 2:
            raise InvalidPhysicalParameter(f"repetition degree must be >= 2, got {self.degree}")
        if len(self.replica_starts) != self.degree:
            raise InvalidPhysicalParameter(
                f"expected {self.degree} replica starts, got {len(self.replica_starts)}"
            )
        if self.replica_starts[0] != self.arrival:
            raise InvalidPhysicalParameter("first replica must start at the arrival instant")
        prev = self.replica_starts[0]
        for t in self.replica_starts[1:]:
            if t - prev < T_P - _GAP_TOL:
                raise InvalidPhysicalParameter(
                    f"replica starts {prev} and {t} closer than one packet duration"
                )
            prev = t

    def intervals(self, packet_duration: float = T_P) -> tuple[TimeInterval, ...]:
        return tuple(TimeInterval(t, t + packet_duration) for t in self.replica_starts)

    def fits_virtual_frame(self, vf_span: float, packet_duration: float = T_P) -> bool:
        """All replicas lie within ``[arrival, arrival + vf_span - 1]`` starts."""
        last = self.replica_starts[-1]
        return last <= self.arrival + vf_span * packet_duration - packet_duration + _GAP_TOL


def validate_config(cfg: SystemConfig, dist: DegreeDistribution) -> None:
    """Re-check all invariants of a (config, distribution) pair.

    Raises :class:`InvalidPhysicalParameter`, :class:`NonNormalizedDistribution`
    or :class:`DegreeTooLargeForVF`; returns ``None`` when everything holds.
    """
    cfg.validate()
    dist.validate()
    if dist.d_m * cfg.packet_duration > cfg.vf_duration + PROB_TOL:
        raise DegreeTooLargeForVF(
            f"{dist.d_m} replicas of duration {cfg.packet_duration} cannot fit "
            f"a virtual frame of {cfg.vf_duration}"
        )
