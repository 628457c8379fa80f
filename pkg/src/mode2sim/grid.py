"""Time-frequency grid primitives: resource blocks, control messages, schedules.

Everything here is a plain value type shared by the channel, reception,
selection and engine layers. Invariants are enforced at construction so a
malformed message or schedule can never circulate inside a simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class UsageError(Exception):
    """An operation was called outside its contract (caller bug)."""


class ConfigError(Exception):
    """A configuration value violates an invariant."""


@dataclass(frozen=True)
class GridConfig:
    """Slot/subchannel layout of the sidelink resource pool."""

    slot_duration: float = 500e-6        # seconds
    num_subchannels: int = 4
    subchannels_per_tx: int = 1
    reservation_horizon: int = 32        # a reservation may point at most this many slots ahead (exclusive)

    def __post_init__(self):
        if self.slot_duration <= 0:
            raise ConfigError("slot_duration must be positive")
        if self.num_subchannels < 1:
            raise ConfigError("num_subchannels must be >= 1")
        if not 1 <= self.subchannels_per_tx <= self.num_subchannels:
            raise ConfigError(
                f"subchannels_per_tx={self.subchannels_per_tx} must be in "
                f"[1, num_subchannels={self.num_subchannels}]"
            )
        if self.reservation_horizon < 2:
            raise ConfigError("reservation_horizon must be >= 2")

    @property
    def num_start_positions(self) -> int:
        """Number of valid starting subchannels for one transmission."""
        return self.num_subchannels - self.subchannels_per_tx + 1


def slot_of(time: float, cfg: GridConfig) -> int:
    """Map an absolute time (seconds) to its slot index."""
    if time < 0:
        raise UsageError("time must be >= 0")
    return int(math.floor(time / cfg.slot_duration))


@dataclass(frozen=True, order=True)
class ResourceBlockRef:
    """One (slot, contiguous subchannel range) cell of the grid."""

    slot: int
    first_subchannel: int
    width: int

    def __post_init__(self):
        if self.slot < 0:
            raise ConfigError("slot must be >= 0")
        if self.first_subchannel < 0 or self.width < 1:
            raise ConfigError("invalid subchannel range")

    @property
    def last_subchannel(self) -> int:
        return self.first_subchannel + self.width - 1

    def overlaps(self, other: "ResourceBlockRef") -> bool:
        """True when the two blocks share a slot and at least one subchannel."""
        return (
            self.slot == other.slot
            and self.first_subchannel <= other.last_subchannel
            and other.first_subchannel <= self.last_subchannel
        )

    def validate_against(self, cfg: GridConfig) -> None:
        if self.first_subchannel + self.width > cfg.num_subchannels:
            raise ConfigError(
                f"block {self} does not fit in {cfg.num_subchannels} subchannels"
            )


@dataclass
class Packet:
    """One broadcast safety message (DENM)."""

    id: int
    source_ue: int
    arrival_time: float
    size: int = 300                      # bytes
    delay_budget: float = 10e-3          # seconds

    @property
    def deadline(self) -> float:
        return self.arrival_time + self.delay_budget


@dataclass(frozen=True)
class SciMessage:
    """Sidelink control information announcing a transmission and its reservations.

    Carries the descriptor of the current transmission plus up to two
    reservations for later attempts of the same packet, each strictly in the
    future and less than the reservation horizon away.
    """

    source_ue: int
    packet_id: int
    current: ResourceBlockRef
    reservations: tuple[ResourceBlockRef, ...]
    attempt_index: int
    horizon: int = field(default=32, compare=False)

    def __post_init__(self):
        res = self.reservations
        if len(res) > 2:
            raise ConfigError("an SCI may carry at most 2 reservations")
        if len(res) == 2 and res[0].slot == res[1].slot:
            raise ConfigError("reserved slots must be pairwise distinct")
        cur = self.current.slot
        for r in res:
            gap = r.slot - cur
            if gap < 1 or gap > self.horizon - 1:
                raise ConfigError(
                    f"reservation at slot {r.slot} is {gap} slots from the current "
                    f"slot {cur}; must be within [1, {self.horizon - 1}]"
                )
        if self.attempt_index < 1:
            raise ConfigError("attempt_index starts at 1")


@dataclass(frozen=True)
class TransmissionSchedule:
    """The K resource blocks selected for one packet, in transmission order."""

    packet_id: int
    attempts: tuple[ResourceBlockRef, ...]
    horizon: int = field(default=32, compare=False)

    def __post_init__(self):
        if len(self.attempts) < 1:
            raise ConfigError("a schedule needs at least one attempt")
        slots = [a.slot for a in self.attempts]
        for prev, nxt in zip(slots, slots[1:]):
            if nxt <= prev:
                raise ConfigError("attempt slots must be strictly increasing")
            if nxt - prev > self.horizon - 1:
                raise ConfigError(
                    f"gap of {nxt - prev} slots between consecutive attempts exceeds "
                    f"the signalling horizon ({self.horizon - 1})"
                )

    @property
    def k(self) -> int:
        return len(self.attempts)


def sci_for_attempt(
    schedule: TransmissionSchedule, attempt_index: int, source_ue: int = -1
) -> SciMessage:
    """Build the SCI transmitted with the given attempt (1-based).

    The SCI reserves the next two attempts of the schedule when they exist;
    the list is truncated at the end of the schedule, so the union of all
    reservations over attempts 1..K-1 covers attempts 2..K exactly.
    """
    if not 1 <= attempt_index <= schedule.k:
        raise UsageError(
            f"attempt_index {attempt_index} out of range 1..{schedule.k}"
        )
    current = schedule.attempts[attempt_index - 1]
    upcoming = schedule.attempts[attempt_index : attempt_index + 2]
    return SciMessage(
        source_ue=source_ue,
        packet_id=schedule.packet_id,
        current=current,
        reservations=tuple(upcoming),
        attempt_index=attempt_index,
        horizon=schedule.horizon,
    )
