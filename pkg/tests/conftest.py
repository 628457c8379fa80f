import numpy as np
import pytest

from mode2sim.channel import PropagationConfig, Topology
from mode2sim.engine import ScenarioConfig, TopologyConfig, TrafficConfig
from mode2sim.grid import GridConfig, ResourceBlockRef, TransmissionSchedule
from mode2sim.phy import PhyConfig
from mode2sim.selection import SelectionConfig


@pytest.fixture
def grid():
    return GridConfig()


@pytest.fixture
def prop():
    return PropagationConfig()


def small_scenario(**kwargs):
    """A 12-UE scenario that runs in well under a second."""
    defaults = dict(
        topology=TopologyConfig(n_ues=12, mean_gap_m=25.0),
        traffic=TrafficConfig(per_ue_rate=10.0, warmup=0.1, duration=1.0),
        selection=SelectionConfig(k=2, algorithm="srs"),
        phy=PhyConfig(),
    )
    defaults.update(kwargs)
    return ScenarioConfig(**defaults)


def schedule_of(slots, packet_id=0, width=1, positions=None):
    positions = positions or [0] * len(slots)
    return TransmissionSchedule(
        packet_id=packet_id,
        attempts=tuple(
            ResourceBlockRef(slot=s, first_subchannel=p, width=width)
            for s, p in zip(slots, positions)
        ),
    )


def random_line_topology(rng, n, mean_gap=50.0):
    gaps = rng.exponential(mean_gap, size=n - 1) + 1e-3
    return Topology(positions=np.concatenate(([0.0], np.cumsum(gaps))))
