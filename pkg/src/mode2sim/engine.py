"""Slot-synchronous simulation loop, metrics, and capacity search.

Per slot: (1) new packets arrive, (2) UEs starting service select resources
from their slot-start sensing state, (3) due transmissions go on the air,
(4) every UE runs the reception pipeline, (5) decoded control messages feed
the sensing state, (6) deliveries inside the relevance area are recorded.

Two pipelines produce identical results for identical (config, seed):

* fast       — array kernels; sensing state is the rolling record of decoded
               control masks over the signalling horizon;
* reference  — the object-level phy/selection modules, one SensingDatabase
               per UE. Readable and traceable, used for validation.

The slot loop only visits slots where something happens, so near-idle runs
cost per packet, not per slot.
"""

from __future__ import annotations

import heapq
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.stats

from . import kernels
from .channel import (
    PropagationConfig,
    Topology,
    db_to_lin,
    gain_matrix_dbm,
    generate_topology,
    noise_power_dbm,
)
from .grid import ConfigError, GridConfig, Packet, SciMessage, TransmissionSchedule, sci_for_attempt
from .phy import PhyConfig, ReceptionPipeline, Transmission
from .selection import (
    P_TH_ESCALATION_DB,
    ExclusionMap,
    SchedulingError,
    SelectionConfig,
    SensingDatabase,
    build_exclusion_map,
    draw_schedule,
)

TRAFFIC_MODES = ("poisson", "single_burst")


class StatisticsError(Exception):
    """Not enough runs (or no packets) to estimate a metric."""


class BracketError(Exception):
    """A capacity bracket could not be validated by measurement."""


@dataclass(frozen=True)
class TopologyConfig:
    n_ues: int = 200
    mean_gap_m: float = 10.0
    wraparound: bool = False
    positions: tuple[float, ...] | None = None   # explicit layout overrides generation

    def __post_init__(self):
        if self.positions is not None:
            if len(self.positions) < 2:
                raise ConfigError("need at least 2 UEs")
        elif self.n_ues < 2:
            raise ConfigError("need at least 2 UEs")
        if self.mean_gap_m <= 0:
            raise ConfigError("mean_gap_m must be positive")


@dataclass(frozen=True)
class TrafficConfig:
    per_ue_rate: float = 1.0        # Poisson arrivals per second per UE
    warmup: float = 1.0             # seconds excluded from metrics
    duration: float = 20.0          # seconds of arrivals
    mode: str = "poisson"           # single_burst: one packet per UE at t=0

    def __post_init__(self):
        if self.per_ue_rate < 0:
            raise ConfigError("per_ue_rate must be >= 0")
        if self.mode == "poisson" and self.duration <= self.warmup:
            raise ConfigError("duration must exceed warmup")
        if self.mode not in TRAFFIC_MODES:
            raise ConfigError(f"traffic mode must be one of {TRAFFIC_MODES}")


@dataclass(frozen=True)
class QosConfig:
    relevance_radius_m: float = 200.0
    delay_budget_s: float = 10e-3

    def __post_init__(self):
        if self.relevance_radius_m <= 0 or self.delay_budget_s <= 0:
            raise ConfigError("relevance radius and delay budget must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    qos: QosConfig = field(default_factory=QosConfig)

    def budget_slots(self) -> int:
        return int(math.floor(self.qos.delay_budget_s / self.grid.slot_duration))

    def validate(self) -> None:
        eff_t2 = min(self.selection.t2, self.budget_slots())
        window = eff_t2 - self.selection.t1 + 1
        if self.selection.k > window:
            raise ConfigError(
                f"k={self.selection.k} exceeds the effective selection window of "
                f"{window} slots (t1={self.selection.t1}, t2={self.selection.t2}, "
                f"delay budget {self.budget_slots()} slots)"
            )
        if self.selection.k >= 2 and eff_t2 - self.selection.t1 > self.grid.reservation_horizon - 1:
            raise ConfigError(
                "selection window wider than the signalling horizon cannot "
                "guarantee chained reservations"
            )


def mean_first_attempt_delay_formula(k: int, t1: int, t2: int):
    """Expected offset (slots) of the first attempt from the window start
    under uniform selection of k distinct slots, as an exact Fraction."""
    from fractions import Fraction

    if k < 1 or k > t2 - t1 + 1:
        raise ConfigError(f"k={k} infeasible for window [{t1}, {t2}]")
    return Fraction(t2 - t1 - k + 1, k + 1)


@dataclass
class RunResult:
    plr: float
    plr_confidence_halfwidth: float
    mean_first_attempt_delay: float      # slots from window start
    scheduling_failures: int
    seed: int
    n_packets: int = 0
    n_observations: int = 0              # receiver-packet pairs inside the relevance area
    n_lost: int = 0
    backend: str = ""
    runtime_s: float = 0.0
    per_ue_plr: np.ndarray | None = field(default=None, repr=False)
    offset_histogram: np.ndarray | None = field(default=None, repr=False)


class _PacketState:
    __slots__ = (
        "packet", "in_range", "delivered", "counted", "schedule",
        "window_start", "last_slot_cap", "next_attempt", "att_slot", "att_sub0",
    )

    def __init__(self, packet, in_range, counted, last_slot_cap):
        self.packet = packet
        self.in_range = in_range                      # np.int64 receiver ids
        self.delivered = np.zeros(in_range.size, dtype=bool)
        self.counted = counted
        self.schedule: TransmissionSchedule | None = None
        self.window_start = -1
        self.last_slot_cap = last_slot_cap
        self.next_attempt = 0
        self.att_slot: list[int] | None = None        # attempt slots, -1 padded
        self.att_sub0: list[int] | None = None        # starting subchannels, 0 padded


class _Metrics:
    def __init__(self, n_ues, window_len):
        self.counts = np.zeros(n_ues, dtype=np.int64)
        self.loss_frac_sum = np.zeros(n_ues)
        self.offset_counts = np.zeros(max(window_len, 1), dtype=np.int64)
        self.n_offsets = 0
        self.offset_sum = 0
        self.scheduling_failures = 0
        self.n_observations = 0
        self.n_lost = 0

    def record_packet(self, src, n_in_range, n_delivered):
        if n_in_range == 0:
            return
        self.counts[src] += 1
        self.loss_frac_sum[src] += (n_in_range - n_delivered) / n_in_range
        self.n_observations += n_in_range
        self.n_lost += n_in_range - n_delivered

    def record_offset(self, offset):
        self.offset_counts[offset] += 1
        self.offset_sum += offset
        self.n_offsets += 1


class Simulation:
    """One seeded run of a scenario. Use :func:`run_simulation` normally."""

    def __init__(self, scenario: ScenarioConfig, seed: int,
                 reference_pipeline: bool = False, trace=None):
        scenario.validate()
        self.sc = scenario
        self.seed = seed
        self.reference = reference_pipeline
        self.trace = trace

        ss = np.random.SeedSequence(seed)
        topo_ss, main_ss = ss.spawn(2)
        topo_cfg = scenario.topology
        if topo_cfg.positions is not None:
            self.topo = Topology(np.array(topo_cfg.positions), wraparound=topo_cfg.wraparound)
        else:
            self.topo = generate_topology(
                topo_cfg.n_ues, topo_cfg.mean_gap_m, np.random.default_rng(topo_ss),
                wraparound=topo_cfg.wraparound,
            )
        self.rng = np.random.default_rng(main_ss)
        self.n = self.topo.n

        self.gain_dbm = gain_matrix_dbm(self.topo, scenario.propagation)
        gain_mw = db_to_lin(self.gain_dbm)
        np.fill_diagonal(gain_mw, 0.0)
        self.gain_rx = np.ascontiguousarray(gain_mw.T)           # [j, i] = power of i at j
        self.gain_dbm_t = np.ascontiguousarray(self.gain_dbm.T)  # row j = RSRP of all at j
        self.noise_1sub_mw = float(db_to_lin(noise_power_dbm(scenario.propagation, 1)))

        d = self.topo.distance_matrix()
        np.fill_diagonal(d, np.inf)
        self.in_range = [
            np.flatnonzero(d[i] <= scenario.qos.relevance_radius_m).astype(np.int64)
            for i in range(self.n)
        ]

        self.duplex_code = kernels.DUPLEX_CODES[scenario.phy.duplex]
        self.decoder_code = kernels.DECODER_CODES[scenario.phy.decoder]
        self.pscch_thr_lin = float(db_to_lin(scenario.phy.pscch_sinr_threshold_db))
        self.pssch_thr_lin = float(db_to_lin(scenario.phy.pssch_sinr_threshold_db))
        self.width_tx = scenario.grid.subchannels_per_tx
        self.width_arr = np.full(self.n, self.width_tx, dtype=np.int32)
        self.n_pos = scenario.grid.num_start_positions
        self.horizon = scenario.grid.reservation_horizon

        sel = scenario.selection
        self.window_len_max = sel.t2 - sel.t1 + 1
        self.metrics = _Metrics(self.n, self.window_len_max)

        # per-UE state
        self.queues = [deque() for _ in range(self.n)]
        self.serving: list[_PacketState | None] = [None] * self.n
        if self.reference:
            self.dbs = [SensingDatabase() for _ in range(self.n)]
            self.pipeline = ReceptionPipeline(self.topo, scenario.propagation, scenario.phy)

        # agendas keyed by slot
        self.arrivals: dict[int, list[tuple[int, float]]] = {}
        self.tx_agenda: dict[int, list[int]] = {}
        self.svc_agenda: dict[int, list[int]] = {}
        self.records: deque = deque()    # (slot, src, res_slot, res_sub0, res_width, pscch_ok)
        self.heap: list[int] = []
        self._next_packet_id = 0

        self._generate_arrivals()

    # ------------------------------------------------------------------ setup

    def _generate_arrivals(self):
        tr = self.sc.traffic
        dt = self.sc.grid.slot_duration
        if tr.mode == "single_burst":
            for ue in range(self.n):
                self.arrivals.setdefault(0, []).append((ue, 0.0))
            heapq.heappush(self.heap, 0)
            return
        if tr.per_ue_rate == 0.0:
            return
        for ue in range(self.n):
            count = self.rng.poisson(tr.per_ue_rate * tr.duration)
            if count == 0:
                continue
            times = np.sort(tr.duration * self.rng.random(count))
            for t in times:
                slot = int(t / dt)
                self.arrivals.setdefault(slot, []).append((ue, float(t)))
        for slot in self.arrivals:
            heapq.heappush(self.heap, slot)

    # ------------------------------------------------------------- slot phases

    def _start_service(self, ue: int, now: int):
        st = self.queues[ue].popleft()
        sel = self.sc.selection
        window_start = now + sel.t1
        if window_start > st.last_slot_cap:
            self._scheduling_failure(ue, st, now)
            return
        try:
            exclusion = self._exclusion_map(ue, now, st.last_slot_cap)
            schedule = draw_schedule(self.rng, exclusion, sel, self.sc.grid, st.packet.id)
        except SchedulingError:
            self._scheduling_failure(ue, st, now)
            return
        st.schedule = schedule
        st.window_start = window_start
        self.serving[ue] = st
        if st.counted:
            self.metrics.record_offset(schedule.attempts[0].slot - window_start)
        att_slot = []
        att_sub0 = []
        for block in schedule.attempts:
            assert block.slot <= st.last_slot_cap, "attempt scheduled past the deadline"
            att_slot.append(block.slot)
            att_sub0.append(block.first_subchannel)
            self.tx_agenda.setdefault(block.slot, []).append(ue)
            heapq.heappush(self.heap, block.slot)
        att_slot += [-1, -1]
        att_sub0 += [0, 0]
        st.att_slot = att_slot
        st.att_sub0 = att_sub0
        if self.trace is not None:
            blocks = ",".join(f"{b.slot}:{b.first_subchannel}" for b in schedule.attempts)
            self.trace.write(
                f"sel slot={now} ue={ue} packet={st.packet.id} alg={sel.algorithm} "
                f"escalations={exclusion.escalations} p_th={exclusion.final_p_th_dbm:.1f} "
                f"blocks={blocks}\n"
            )

    def _exclusion_map(self, ue: int, now: int, last_slot_cap: int) -> ExclusionMap:
        sel = self.sc.selection
        if self.reference:
            return build_exclusion_map(self.dbs[ue], now, sel, self.sc.grid, last_slot_cap)
        window_start = now + sel.t1
        window_last = min(now + sel.t2, last_slot_cap)
        window_len = window_last - window_start + 1
        if window_len < 1:
            raise SchedulingError("empty selection window")
        if sel.algorithm == "ra":
            # reservations are ignored; skip the busy-map work entirely
            busy = np.full((window_len, self.n_pos), -np.inf)
            free = np.ones((window_len, self.n_pos), dtype=bool)
            return ExclusionMap(window_start, free, busy, sel.p_th_dbm, 0)
        # records older than the horizon may linger until the next prune, but
        # their reservations cannot reach the window, so they contribute nothing
        busy = kernels.build_busy_map(
            self.records, ue, window_start, window_len, self.width_tx, self.n_pos,
            self.gain_dbm_t[ue],
        )
        p_th = sel.p_th_dbm
        n_esc = 0
        need = sel.free_fraction_target * busy.size
        free, counts, total_free = kernels.free_map_at(busy, p_th)
        while total_free < need:
            p_th += P_TH_ESCALATION_DB
            n_esc += 1
            free, counts, total_free = kernels.free_map_at(busy, p_th)
        return ExclusionMap(window_start, free, busy, p_th, n_esc, counts)

    def _scheduling_failure(self, ue: int, st: _PacketState, now: int):
        if st.counted:
            self.metrics.scheduling_failures += 1
            self.metrics.record_packet(ue, st.in_range.size, 0)
        self._service_done(ue, now)

    def _service_done(self, ue: int, now: int):
        self.serving[ue] = None
        if self.queues[ue]:
            self.svc_agenda.setdefault(now + 1, []).append(ue)
            heapq.heappush(self.heap, now + 1)

    def _finalize(self, ue: int, now: int):
        st = self.serving[ue]
        if st.counted:
            self.metrics.record_packet(ue, st.in_range.size, int(st.delivered.sum()))
        self._service_done(ue, now)

    def _process_transmissions(self, now: int, ues: list[int]):
        ues.sort()
        n_tx = len(ues)
        sub0_list = []
        pk_rows = []
        states = []
        attempt_rows = []
        w = self.width_tx
        for ue in ues:
            st = self.serving[ue]
            idx = st.next_attempt          # 0-based
            st.next_attempt += 1
            states.append(st)
            attempt_rows.append(idx)
            sl = st.att_slot
            su = st.att_sub0
            assert sl[idx] == now
            sub0_list.append(su[idx])
            pk_rows.append((ue, sl[idx + 1], su[idx + 1], w, sl[idx + 2], su[idx + 2], w))
        src = np.array(ues, dtype=np.int32)
        sub0 = np.array(sub0_list, dtype=np.int32)
        packed = np.empty((n_tx, 7 + self.n), dtype=np.int32)
        packed[:, :7] = pk_rows

        if self.reference:
            scis = [
                sci_for_attempt(st.schedule, idx + 1, ue)
                for st, idx, ue in zip(states, attempt_rows, ues)
            ]
            pscch_ok, pssch_ok, miss, sinr_lin = self._reference_decode(now, ues, scis)
            for j in range(self.n):
                col = pscch_ok[:, j]
                for i in np.flatnonzero(col):
                    self.dbs[j].ingest_sci(scis[i], float(self.gain_dbm[ues[i], j]))
        else:
            pscch_ok, pssch_ok, miss, sinr_lin = kernels.decode_slot(
                src, sub0, self.width_arr[:n_tx], self.gain_rx, self.noise_1sub_mw,
                self.pscch_thr_lin, self.pssch_thr_lin,
                self.duplex_code, self.decoder_code, self.sc.grid.num_subchannels,
                want_detail=self.trace is not None,
            )
            packed[:, 7:] = pscch_ok
            self.records.append((now, packed))
            floor = now - (self.horizon - 1)
            while self.records and self.records[0][0] < floor:
                self.records.popleft()

        # deliveries and packet completion
        for i, ue in enumerate(ues):
            st = states[i]
            ids = st.in_range
            if ids.size:
                np.logical_or(st.delivered, pssch_ok[i, ids], out=st.delivered)
            if st.next_attempt == st.schedule.k:
                self._finalize(ue, now)

        if self.trace is not None:
            self._write_rx_trace(now, ues, [st.packet.id for st in states], miss, sinr_lin)

    def _reference_decode(self, now, ues, scis):
        """Object-pipeline decode producing kernel-shaped outcome matrices."""
        from .phy import MISS_HALF_DUPLEX, MISS_OUT_OF_MODEL, MISS_PSCCH, MISS_PSSCH, OUTCOME_OK

        n_tx = len(ues)
        transmissions = [Transmission(ue, sci) for ue, sci in zip(ues, scis)]
        pscch_ok = np.zeros((n_tx, self.n), dtype=np.uint8)
        pssch_ok = np.zeros((n_tx, self.n), dtype=np.uint8)
        miss = np.zeros((n_tx, self.n), dtype=np.uint8)
        sinr = np.full((n_tx, self.n), np.nan)
        code = {
            OUTCOME_OK: kernels.MISS_NONE,
            MISS_HALF_DUPLEX: kernels.MISS_HALF_DUPLEX,
            MISS_PSCCH: kernels.MISS_PSCCH,
            MISS_PSSCH: kernels.MISS_PSSCH,
            MISS_OUT_OF_MODEL: kernels.MISS_SELF,
        }
        for j in range(self.n):
            report = self.pipeline.slot_report(j, now, transmissions)
            decoded = {id(s) for s in report.decoded_scis}
            for i, t in enumerate(transmissions):
                miss[i, j] = code[report.outcomes[i]]
                if id(t.sci) in decoded:
                    pscch_ok[i, j] = 1
                if report.outcomes[i] == OUTCOME_OK:
                    pssch_ok[i, j] = 1
                if not math.isnan(report.pssch_sinr_db[i]):
                    sinr[i, j] = db_to_lin(report.pssch_sinr_db[i])
        return pscch_ok, pssch_ok, miss, sinr

    def _write_rx_trace(self, now, ues, packet_ids, miss, sinr_lin):
        names = {
            kernels.MISS_NONE: "ok",
            kernels.MISS_HALF_DUPLEX: "half_duplex",
            kernels.MISS_PSCCH: "pscch_fail",
            kernels.MISS_PSSCH: "pssch_fail",
            kernels.MISS_SELF: "out_of_model",
        }
        for j in range(self.n):
            for i, ue in enumerate(ues):
                s = sinr_lin[i, j]
                sdb = f"{10.0 * math.log10(s):.2f}" if s > 0 and not math.isnan(s) else "nan"
                self.trace.write(
                    f"rx slot={now} receiver={j} tx={ue} packet={packet_ids[i]} "
                    f"outcome={names[int(miss[i, j])]} sinr_db={sdb}\n"
                )

    # ------------------------------------------------------------------- run

    def run(self) -> RunResult:
        t0 = time.perf_counter()
        tr = self.sc.traffic
        budget_slots = self.sc.budget_slots()
        dt = self.sc.grid.slot_duration

        while self.heap:
            now = heapq.heappop(self.heap)
            while self.heap and self.heap[0] == now:
                heapq.heappop(self.heap)

            for ue, tau in self.arrivals.pop(now, ()):
                counted = tau >= tr.warmup or tr.mode == "single_burst"
                pkt = Packet(
                    id=self._next_packet_id, source_ue=ue, arrival_time=tau,
                    delay_budget=self.sc.qos.delay_budget_s,
                )
                self._next_packet_id += 1
                # last slot whose start is strictly before the deadline
                cap = now + budget_slots - (1 if tau <= now * dt else 0)
                state = _PacketState(pkt, self.in_range[ue], counted, cap)
                self.queues[ue].append(state)
                if self.serving[ue] is None and len(self.queues[ue]) == 1:
                    self._start_service(ue, now)

            for ue in self.svc_agenda.pop(now, ()):
                if self.serving[ue] is None and self.queues[ue]:
                    self._start_service(ue, now)

            txs = self.tx_agenda.pop(now, None)
            if txs:
                self._process_transmissions(now, txs)

        m = self.metrics
        with_data = m.counts > 0
        if with_data.any():
            per_ue = np.full(self.n, np.nan)
            per_ue[with_data] = m.loss_frac_sum[with_data] / m.counts[with_data]
            vals = per_ue[with_data]
            plr = float(vals.mean())
            if vals.size >= 2 and vals.std(ddof=1) > 0:
                half = float(
                    scipy.stats.t.ppf(0.975, vals.size - 1)
                    * vals.std(ddof=1) / math.sqrt(vals.size)
                )
            else:
                half = 0.0
        else:
            per_ue = np.full(self.n, np.nan)
            plr = float("nan")
            half = float("nan")

        mean_offset = m.offset_sum / m.n_offsets if m.n_offsets else float("nan")
        return RunResult(
            plr=plr,
            plr_confidence_halfwidth=half,
            mean_first_attempt_delay=mean_offset,
            scheduling_failures=m.scheduling_failures,
            seed=self.seed,
            n_packets=int(m.counts.sum()),
            n_observations=m.n_observations,
            n_lost=m.n_lost,
            backend="reference" if self.reference else kernels.BACKEND,
            runtime_s=time.perf_counter() - t0,
            per_ue_plr=per_ue,
            offset_histogram=m.offset_counts.copy(),
        )


def run_simulation(scenario: ScenarioConfig, seed: int,
                   reference_pipeline: bool = False, trace=None) -> RunResult:
    """Execute one seeded run; bit-reproducible for fixed (scenario, seed)."""
    return Simulation(scenario, seed, reference_pipeline, trace).run()


def measure_plr(results: list[RunResult]) -> tuple[float, float]:
    """Mean and Student-t 95% half-width of PLR over independent runs."""
    if len(results) < 2:
        raise StatisticsError("need at least 2 runs with distinct seeds")
    vals = np.array([r.plr for r in results])
    if np.isnan(vals).any():
        raise StatisticsError("a run produced no packets; PLR undefined")
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1))
    if sd == 0.0:
        return mean, 0.0
    half = float(scipy.stats.t.ppf(0.975, len(vals) - 1) * sd / math.sqrt(len(vals)))
    return mean, half


@dataclass
class CapacityResult:
    capacity: float                  # packets/s per UE
    bracket_lo: float
    bracket_hi: float
    plr_target: float
    probes: list[tuple[float, float, float]] = field(default_factory=list)  # (load, plr, ci)
    monotonic: bool = True

    def probe_plr(self, load: float) -> float | None:
        for probed, plr, _ in self.probes:
            if probed == load:
                return plr
        return None


def _with_load(scenario: ScenarioConfig, load: float) -> ScenarioConfig:
    return replace(scenario, traffic=replace(scenario.traffic, per_ue_rate=load))


def capacity_search(
    scenario: ScenarioConfig,
    plr_target: float,
    load_lo: float,
    load_hi: float,
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4),
    rel_tol: float = 0.05,
    widen_rounds: int = 8,
    run_mapper=map,
) -> CapacityResult:
    """Geometric bisection for the largest load with mean PLR <= target.

    The same seed set is reused at every probe (common random numbers).
    PLR is assumed to grow with load; probes violating that beyond their
    combined confidence intervals clear the ``monotonic`` flag.
    """
    if load_lo > load_hi or load_lo <= 0:
        raise BracketError(f"invalid bracket [{load_lo}, {load_hi}]")
    probes: list[tuple[float, float, float]] = []

    def plr_at(load: float) -> tuple[float, float]:
        results = list(run_mapper(_run_cell, [(_with_load(scenario, load), s) for s in seeds]))
        mean, half = measure_plr(results)
        probes.append((load, mean, half))
        return mean, half

    if plr_target >= 1.0:
        return CapacityResult(load_hi, load_lo, load_hi, plr_target, probes)
    if load_lo == load_hi:
        return CapacityResult(load_lo, load_lo, load_hi, plr_target, probes)

    lo, hi = load_lo, load_hi
    plr_lo, _ = plr_at(lo)
    for _ in range(widen_rounds):
        if plr_lo <= plr_target:
            break
        hi = lo
        lo = lo / 4.0
        plr_lo, _ = plr_at(lo)
    if plr_lo > plr_target:
        raise BracketError(
            f"PLR({lo}) = {plr_lo:.4g} > target {plr_target:.4g}; no satisfying load found"
        )
    plr_hi, _ = plr_at(hi)
    for _ in range(widen_rounds):
        if plr_hi > plr_target:
            break
        lo = hi
        hi = hi * 4.0
        plr_hi, _ = plr_at(hi)
    if plr_hi <= plr_target:
        raise BracketError(
            f"PLR({hi}) = {plr_hi:.4g} <= target {plr_target:.4g}; bracket upper end too low"
        )

    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        plr_mid, _ = plr_at(mid)
        if plr_mid <= plr_target:
            lo = mid
        else:
            hi = mid

    ordered = sorted(probes)
    monotonic = all(
        p1 <= p2 + c1 + c2
        for (_, p1, c1), (_, p2, c2) in zip(ordered, ordered[1:])
    )
    return CapacityResult(
        capacity=math.sqrt(lo * hi),
        bracket_lo=lo,
        bracket_hi=hi,
        plr_target=plr_target,
        probes=probes,
        monotonic=monotonic,
    )


def _run_cell(args) -> RunResult:
    scenario, seed = args
    return run_simulation(scenario, seed)


def runresult_csv_row(result: RunResult) -> str:
    """One CSV data row for a run (see header in :data:`RUNRESULT_CSV_HEADER`)."""
    return ",".join(
        [
            repr(result.plr),
            repr(result.plr_confidence_halfwidth),
            repr(result.mean_first_attempt_delay),
            str(result.scheduling_failures),
            str(result.seed),
            str(result.n_packets),
            str(result.n_observations),
            str(result.n_lost),
            result.backend,
        ]
    )


RUNRESULT_CSV_HEADER = (
    "plr,plr_ci95,mean_first_attempt_delay_slots,scheduling_failures,"
    "seed,n_packets,n_observations,n_lost,backend"
)
