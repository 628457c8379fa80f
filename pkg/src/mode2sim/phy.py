"""Per-slot reception: duplex constraints, PSCCH decoding, PSSCH decoding.

This is the object-level pipeline. It defines the semantics; the array
kernels in ``_kernels*`` reimplement the same rules for speed and are tested
for exact agreement against this module.

Decoding model (step thresholds, no BLER curves):

* A transmission carries its control message (PSCCH) on the same subchannels
  as its data (PSSCH).
* MPPD: in each region of mutually overlapping control resources the receiver
  locks onto the strongest observable signal only; it is decoded iff its SINR
  (co-channel interference plus noise) clears the control threshold. All
  weaker overlapping signals are lost.
* IPD: interference-free bound; every observable control message is decoded
  iff its power over noise alone clears the control threshold.
* PSSCH: decodable only after its PSCCH, against full co-channel interference
  under either decoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .channel import PropagationConfig, Topology, db_to_lin, noise_power_dbm, rx_power_dbm
from .grid import ConfigError, ResourceBlockRef, SciMessage, UsageError

DECODERS = ("mppd", "ipd")
DUPLEX_MODES = ("hd", "sbfd", "ibfd")

OUTCOME_OK = "ok"
MISS_HALF_DUPLEX = "half_duplex"
MISS_PSCCH = "pscch_fail"
MISS_PSSCH = "pssch_fail"
MISS_OUT_OF_MODEL = "out_of_model"   # the receiver is the transmitter


@dataclass(frozen=True)
class PhyConfig:
    pscch_sinr_threshold_db: float = 0.0
    pssch_sinr_threshold_db: float = 5.0
    decoder: str = "mppd"
    duplex: str = "hd"

    def __post_init__(self):
        if self.decoder not in DECODERS:
            raise ConfigError(f"decoder must be one of {DECODERS}")
        if self.duplex not in DUPLEX_MODES:
            raise ConfigError(f"duplex must be one of {DUPLEX_MODES}")
        if self.pscch_sinr_threshold_db > self.pssch_sinr_threshold_db:
            raise ConfigError(
                "control threshold must not exceed the data threshold "
                "(control uses the most robust MCS)"
            )


@dataclass(frozen=True)
class Transmission:
    """A transmission on the air in one slot: source plus its control message."""

    source_ue: int
    sci: SciMessage

    @property
    def block(self) -> ResourceBlockRef:
        return self.sci.current


@dataclass
class SlotReceptionReport:
    """Decoding outcome of one slot at one receiver.

    ``outcomes[i]`` tags the i-th transmission of the slot; data is decodable
    only when the matching control message was.
    """

    receiver: int
    slot: int
    decoded_scis: list[SciMessage]
    decoded_packets: list[int]
    outcomes: list[str]
    pssch_sinr_db: list[float] = field(default_factory=list)

    def __post_init__(self):
        decodable = {sci.packet_id for sci in self.decoded_scis}
        if not set(self.decoded_packets) <= decodable:
            raise ConfigError("decoded packet without its decoded control message")


def _overlap_subchannels(a: ResourceBlockRef, b: ResourceBlockRef) -> int:
    lo = max(a.first_subchannel, b.first_subchannel)
    hi = min(a.last_subchannel, b.last_subchannel)
    return max(0, hi - lo + 1)


def receivable_transmissions(
    receiver: int, slot_transmissions: list[Transmission], duplex: str
) -> list[Transmission]:
    """Filter a slot's transmissions down to what the receiver can observe.

    HD: nothing while transmitting. SBFD: only subchannels disjoint from the
    receiver's own transmission. IBFD: everything, own signal fully cancelled.
    A UE never receives its own transmission in any mode.
    """
    own = [t for t in slot_transmissions if t.source_ue == receiver]
    others = [t for t in slot_transmissions if t.source_ue != receiver]
    if not own or duplex == "ibfd":
        return others
    if duplex == "hd":
        return []
    # sbfd: drop anything overlapping the receiver's own subchannels
    return [
        t
        for t in others
        if all(_overlap_subchannels(t.block, o.block) == 0 for o in own)
    ]


def _interference_mw(
    target: Transmission,
    candidates: list[tuple[Transmission, float]],
    extra_interferers: list[tuple[ResourceBlockRef, float]],
) -> float:
    """Co-channel interference power (mW) falling into the target's subchannels.

    An interferer's power is spread uniformly over its own subchannels; only
    the overlapping share counts.
    """
    total = 0.0
    for tx, p_dbm in candidates:
        if tx is target:
            continue
        ov = _overlap_subchannels(tx.block, target.block)
        if ov:
            total += db_to_lin(p_dbm) * ov / tx.block.width
    for block, p_dbm in extra_interferers:
        ov = _overlap_subchannels(block, target.block)
        if ov:
            total += db_to_lin(p_dbm) * ov / block.width
    return total


def _stronger(a: tuple[float, int], b: tuple[float, int]) -> bool:
    """Capture order: higher power wins, ties broken by lower UE id."""
    return a[0] > b[0] or (a[0] == b[0] and a[1] < b[1])


def decode_pscch_mppd(
    receiver: int,
    candidates: list[tuple[Transmission, float]],
    phy: PhyConfig,
    prop: PropagationConfig,
    extra_interferers: list[tuple[ResourceBlockRef, float]] | None = None,
) -> list[SciMessage]:
    """Strongest-capture control decoding.

    A candidate is decoded iff it is the strongest observable signal among
    all candidates overlapping its control resource and its SINR clears the
    control threshold. Everything it overlaps is lost, so at most one control
    message survives per subchannel position.
    """
    extra = extra_interferers or []
    decoded = []
    for tx, p_dbm in candidates:
        key = (p_dbm, tx.source_ue)
        dominated = any(
            other is not tx
            and _overlap_subchannels(other.block, tx.block) > 0
            and _stronger((q_dbm, other.source_ue), key)
            for other, q_dbm in candidates
        )
        if dominated:
            continue
        noise_mw = db_to_lin(noise_power_dbm(prop, tx.block.width))
        sinr = db_to_lin(p_dbm) / (noise_mw + _interference_mw(tx, candidates, extra))
        if sinr >= db_to_lin(phy.pscch_sinr_threshold_db):
            decoded.append(tx.sci)
    return decoded


def decode_pscch_ipd(
    receiver: int,
    candidates: list[tuple[Transmission, float]],
    phy: PhyConfig,
    prop: PropagationConfig,
    extra_interferers: list[tuple[ResourceBlockRef, float]] | None = None,
) -> list[SciMessage]:
    """Interference-free control decoding bound: noise is the only limit."""
    decoded = []
    for tx, p_dbm in candidates:
        noise_mw = db_to_lin(noise_power_dbm(prop, tx.block.width))
        if db_to_lin(p_dbm) / noise_mw >= db_to_lin(phy.pscch_sinr_threshold_db):
            decoded.append(tx.sci)
    return decoded


def decode_pssch(
    receiver: int,
    sci: SciMessage,
    candidates: list[tuple[Transmission, float]],
    decoded_scis: list[SciMessage],
    phy: PhyConfig,
    prop: PropagationConfig,
    extra_interferers: list[tuple[ResourceBlockRef, float]] | None = None,
) -> tuple[bool, float]:
    """Data decoding for one control-decoded transmission.

    Returns (success, sinr_db). Interference is never cancelled on data, so
    both decoders see the same data-plane SINR.
    """
    if sci not in decoded_scis:
        raise UsageError("data decoding requires the decoded control message")
    tx, p_dbm = next((tx, p) for tx, p in candidates if tx.sci == sci)
    noise_mw = db_to_lin(noise_power_dbm(prop, tx.block.width))
    denom = noise_mw + _interference_mw(tx, candidates, extra_interferers or [])
    sinr_lin = db_to_lin(p_dbm) / denom
    return sinr_lin >= db_to_lin(phy.pssch_sinr_threshold_db), 10.0 * math.log10(sinr_lin)


class ReceptionPipeline:
    """Full per-receiver slot pipeline over a static topology."""

    def __init__(
        self,
        topo: Topology,
        prop: PropagationConfig,
        phy: PhyConfig,
    ):
        self.topo = topo
        self.prop = prop
        self.phy = phy

    def rx_power(self, tx: int, rx: int) -> float:
        return rx_power_dbm(tx, rx, self.topo, self.prop)

    def slot_report(
        self, receiver: int, slot: int, transmissions: list[Transmission]
    ) -> SlotReceptionReport:
        receivable = receivable_transmissions(receiver, transmissions, self.phy.duplex)
        receivable_set = {id(t) for t in receivable}
        candidates = [(t, self.rx_power(t.source_ue, receiver)) for t in receivable]
        # signals the receiver cannot observe still radiate interference
        extra = [
            (t.block, self.rx_power(t.source_ue, receiver))
            for t in transmissions
            if t.source_ue != receiver and id(t) not in receivable_set
        ]

        if self.phy.decoder == "mppd":
            decoded_scis = decode_pscch_mppd(receiver, candidates, self.phy, self.prop, extra)
        else:
            decoded_scis = decode_pscch_ipd(receiver, candidates, self.phy, self.prop, extra)

        decoded_ids = {id(sci) for sci in decoded_scis}
        outcomes = []
        decoded_packets = []
        sinrs = []
        for t in transmissions:
            if t.source_ue == receiver:
                outcomes.append(MISS_OUT_OF_MODEL)
                sinrs.append(float("nan"))
                continue
            if id(t) not in receivable_set:
                outcomes.append(MISS_HALF_DUPLEX)
                sinrs.append(float("nan"))
                continue
            if id(t.sci) not in decoded_ids:
                outcomes.append(MISS_PSCCH)
                sinrs.append(float("nan"))
                continue
            ok, sinr = decode_pssch(
                receiver, t.sci, candidates, decoded_scis, self.phy, self.prop, extra
            )
            sinrs.append(sinr)
            if ok:
                outcomes.append(OUTCOME_OK)
                decoded_packets.append(t.sci.packet_id)
            else:
                outcomes.append(MISS_PSSCH)
        return SlotReceptionReport(
            receiver=receiver,
            slot=slot,
            decoded_scis=decoded_scis,
            decoded_packets=decoded_packets,
            outcomes=outcomes,
            pssch_sinr_db=sinrs,
        )
