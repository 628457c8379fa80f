"""mode2sim: slot-level simulator of sidelink Mode 2 broadcast with
autonomous resource selection, reservation sensing, and SINR-based reception.
"""

from .channel import PropagationConfig, Topology, generate_topology
from .engine import (
    QosConfig,
    RunResult,
    ScenarioConfig,
    TopologyConfig,
    TrafficConfig,
    capacity_search,
    measure_plr,
    run_simulation,
)
from .grid import GridConfig, Packet, ResourceBlockRef, SciMessage, TransmissionSchedule
from .kernels import BACKEND
from .phy import PhyConfig
from .selection import SelectionConfig

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "GridConfig",
    "Packet",
    "PhyConfig",
    "PropagationConfig",
    "QosConfig",
    "ResourceBlockRef",
    "RunResult",
    "ScenarioConfig",
    "SciMessage",
    "SelectionConfig",
    "Topology",
    "TopologyConfig",
    "TrafficConfig",
    "TransmissionSchedule",
    "capacity_search",
    "generate_topology",
    "measure_plr",
    "run_simulation",
    "__version__",
]
