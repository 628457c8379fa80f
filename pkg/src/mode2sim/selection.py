"""Sensing database and resource selection.

Three selector flavours share one draw core:

* ra  — ignores sensing entirely, uniform draws over the whole window;
* srs — excludes resources reserved by neighbours above an RSRP threshold,
        then draws K distinct slots uniformly over the window;
* qfa — like srs for retransmissions, but the first attempt goes into the
        earliest window slot that still has a free position.

The exclusion threshold escalates in 3 dB steps until a configurable
fraction of the window is free, so selection always terminates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import ConfigError, GridConfig, ResourceBlockRef, SciMessage, TransmissionSchedule

ALGORITHMS = ("ra", "srs", "qfa")

P_TH_ESCALATION_DB = 3.0


class SchedulingError(Exception):
    """No feasible schedule in the selection window; the packet is dropped."""


@dataclass(frozen=True)
class SelectionConfig:
    k: int = 1
    t1: int = 1
    t2: int = 20
    p_th_dbm: float = -110.0
    free_fraction_target: float = 0.2
    algorithm: str = "srs"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
        if self.t1 < 0 or self.t1 > self.t2:
            raise ConfigError("need 0 <= t1 <= t2")
        if self.k < 1 or self.k > self.t2 - self.t1 + 1:
            raise ConfigError(
                f"k={self.k} does not fit in the {self.t2 - self.t1 + 1}-slot window"
            )
        if not 0.0 <= self.free_fraction_target <= 1.0:
            raise ConfigError("free_fraction_target must be in [0, 1]")


@dataclass(frozen=True)
class SensingEntry:
    block: ResourceBlockRef
    rsrp_dbm: float
    source_ue: int


class SensingDatabase:
    """Overheard reservations of one UE, keyed by the slot they point at."""

    def __init__(self):
        self.entries: list[SensingEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def ingest_sci(self, sci: SciMessage, rsrp_dbm: float) -> None:
        """Store the SCI's reservations (its current block is already past)."""
        for block in sci.reservations:
            self.entries.append(SensingEntry(block, rsrp_dbm, sci.source_ue))

    def purge(self, now: int) -> None:
        """Drop entries whose slot has passed; the database only looks ahead."""
        self.entries = [e for e in self.entries if e.block.slot > now]


@dataclass
class ExclusionMap:
    """Free starting positions per window slot, after threshold escalation."""

    window_start: int
    free: np.ndarray                 # bool (window_len, n_positions)
    busy_rsrp: np.ndarray            # max RSRP per cell, -inf where unreserved
    final_p_th_dbm: float
    escalations: int
    counts: np.ndarray | None = None  # per-slot free-position counts, if precomputed

    @property
    def window_len(self) -> int:
        return int(self.free.shape[0])


def busy_rsrp_from_entries(
    entries: list[SensingEntry], window_start: int, window_len: int, grid: GridConfig
) -> np.ndarray:
    """Max entry RSRP overlapping each (slot, starting subchannel) cell."""
    width_tx = grid.subchannels_per_tx
    n_pos = grid.num_start_positions
    busy = np.full((window_len, n_pos), -np.inf)
    for e in entries:
        s = e.block.slot - window_start
        if not 0 <= s < window_len:
            continue
        p_lo = max(0, e.block.first_subchannel - width_tx + 1)
        p_hi = min(n_pos - 1, e.block.last_subchannel)
        if p_lo > p_hi:
            continue
        row = busy[s]
        row[p_lo : p_hi + 1] = np.maximum(row[p_lo : p_hi + 1], e.rsrp_dbm)
    return busy


def escalate_threshold(
    busy_rsrp: np.ndarray, p_th_dbm: float, free_fraction_target: float
) -> tuple[np.ndarray, float, int]:
    """Raise the threshold in 3 dB steps until enough positions are free.

    A cell is busy iff its strongest overlapping reservation exceeds the
    threshold; always terminates because every cell frees up once the
    threshold passes its RSRP.
    """
    total = busy_rsrp.size
    escalations = 0
    p_th = p_th_dbm
    while True:
        free = busy_rsrp <= p_th
        if total == 0 or free.sum() >= free_fraction_target * total:
            return free, p_th, escalations
        p_th += P_TH_ESCALATION_DB
        escalations += 1


def build_exclusion_map(
    db: SensingDatabase,
    now: int,
    cfg: SelectionConfig,
    grid: GridConfig,
    last_slot: int | None = None,
) -> ExclusionMap:
    """Free-position map over [now+T1, min(now+T2, last_slot)].

    Purges stale database entries first; the ra algorithm bypasses this map
    entirely.
    """
    window_start = now + cfg.t1
    window_last = now + cfg.t2 if last_slot is None else min(now + cfg.t2, last_slot)
    window_len = window_last - window_start + 1
    if window_len < 1:
        raise SchedulingError("empty selection window")
    db.purge(now)
    busy = busy_rsrp_from_entries(db.entries, window_start, window_len, grid)
    free, p_th, n_esc = escalate_threshold(busy, cfg.p_th_dbm, cfg.free_fraction_target)
    return ExclusionMap(
        window_start=window_start,
        free=free,
        busy_rsrp=busy,
        final_p_th_dbm=p_th,
        escalations=n_esc,
    )


def _floyd_sample(u, pool_size: int, k: int) -> list[int]:
    """Sorted uniform k-subset of range(pool_size), consuming u[0..k-1]."""
    chosen: set[int] = set()
    idx = 0
    for i in range(pool_size - k, pool_size):
        j = int(u[idx] * (i + 1))
        idx += 1
        chosen.add(i if j in chosen else j)
    return sorted(chosen)


def draw_schedule(
    rng: np.random.Generator,
    exclusion: ExclusionMap,
    cfg: SelectionConfig,
    grid: GridConfig,
    packet_id: int,
) -> TransmissionSchedule:
    """Draw K attempt blocks from the free map according to the algorithm.

    One batched rng call per selection (slot draws, then one position draw
    per chosen slot in ascending slot order), so runs are reproducible across
    engine pipelines.
    """
    free = exclusion.free
    window_len, n_pos = free.shape
    k = cfg.k
    u = rng.random(2 * k)

    if cfg.algorithm == "ra":
        if window_len < k:
            raise SchedulingError(f"only {window_len} window slots for k={k}")
        chosen = _floyd_sample(u, window_len, k)
        positions = [int(u[k + i] * n_pos) for i in range(k)]
    else:
        counts = exclusion.counts if exclusion.counts is not None else free.sum(axis=1)
        good = np.flatnonzero(counts)
        if cfg.algorithm == "qfa":
            if good.size == 0 or good.size - 1 < k - 1:
                raise SchedulingError(
                    f"{good.size} usable slots cannot host the first attempt plus {k - 1} more"
                )
            chosen = [int(good[0])]
            if k > 1:
                chosen += [int(good[1 + s]) for s in _floyd_sample(u, good.size - 1, k - 1)]
        else:
            if good.size < k:
                raise SchedulingError(f"only {good.size} usable slots for k={k}")
            chosen = [int(good[s]) for s in _floyd_sample(u, good.size, k)]
        positions = []
        for i, s in enumerate(chosen):
            target = int(u[k + i] * counts[s])
            row = free[s]
            pos = 0
            while True:
                if row[pos]:
                    if target == 0:
                        break
                    target -= 1
                pos += 1
            positions.append(pos)

    width = grid.subchannels_per_tx
    window_start = exclusion.window_start
    attempts = tuple(
        ResourceBlockRef(slot=window_start + chosen[i],
                         first_subchannel=positions[i], width=width)
        for i in range(k)
    )
    return TransmissionSchedule(
        packet_id=packet_id, attempts=attempts, horizon=grid.reservation_horizon
    )


def _select(
    db: SensingDatabase,
    now: int,
    cfg: SelectionConfig,
    grid: GridConfig,
    rng: np.random.Generator,
    packet_id: int = 0,
    last_slot: int | None = None,
    algorithm: str | None = None,
) -> tuple[TransmissionSchedule, ExclusionMap]:
    eff = cfg if algorithm is None else SelectionConfig(
        k=cfg.k,
        t1=cfg.t1,
        t2=cfg.t2,
        p_th_dbm=cfg.p_th_dbm,
        free_fraction_target=cfg.free_fraction_target,
        algorithm=algorithm,
    )
    exclusion = build_exclusion_map(db, now, eff, grid, last_slot)
    return draw_schedule(rng, exclusion, eff, grid, packet_id), exclusion


def select_srs(db, now, cfg, grid, rng, packet_id=0, last_slot=None) -> TransmissionSchedule:
    return _select(db, now, cfg, grid, rng, packet_id, last_slot, "srs")[0]


def select_qfa(db, now, cfg, grid, rng, packet_id=0, last_slot=None) -> TransmissionSchedule:
    return _select(db, now, cfg, grid, rng, packet_id, last_slot, "qfa")[0]


def select_ra(db, now, cfg, grid, rng, packet_id=0, last_slot=None) -> TransmissionSchedule:
    return _select(db, now, cfg, grid, rng, packet_id, last_slot, "ra")[0]
