"""Highway topology and deterministic radio propagation.

Log-distance path loss with no fading: received power doubles as RSRP.
All link-budget helpers accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ConfigError, UsageError

THERMAL_NOISE_DBM_PER_HZ = -174.0


@dataclass(frozen=True)
class PropagationConfig:
    l0_db: float = 46.7                  # reference loss at d0
    d0_m: float = 1.0
    pathloss_exp: float = 3.0
    tx_power_dbm: float = 23.0
    noise_figure_db: float = 5.0
    subchannel_bandwidth_hz: float = 3.6e6

    def __post_init__(self):
        if self.l0_db <= 0 or self.d0_m <= 0 or self.pathloss_exp <= 0:
            raise ConfigError("l0_db, d0_m and pathloss_exp must be positive")
        if self.subchannel_bandwidth_hz <= 0:
            raise ConfigError("subchannel_bandwidth_hz must be positive")


@dataclass
class Topology:
    """Static positions of the UEs along a line (meters), strictly increasing."""

    positions: np.ndarray
    wraparound: bool = False

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 1 or self.positions.size < 2:
            raise ConfigError("a topology needs at least 2 UE positions")
        if not np.all(np.diff(self.positions) > 0):
            raise ConfigError("positions must be strictly increasing")

    @property
    def n(self) -> int:
        return int(self.positions.size)

    @property
    def span(self) -> float:
        return float(self.positions[-1] - self.positions[0])

    def distance(self, a: int, b: int) -> float:
        d = abs(float(self.positions[a] - self.positions[b]))
        if self.wraparound:
            d = min(d, self.span - d)
        return d

    def distance_matrix(self) -> np.ndarray:
        d = np.abs(self.positions[:, None] - self.positions[None, :])
        if self.wraparound:
            d = np.minimum(d, self.span - d)
        return d


def generate_topology(
    n: int, mean_gap: float, rng_seed, wraparound: bool = False
) -> Topology:
    """Place UE 0 at x=0 and draw i.i.d. exponential gaps with the given mean."""
    if n < 2:
        raise ConfigError("need at least 2 UEs")
    if mean_gap <= 0:
        raise ConfigError("mean_gap must be positive")
    rng = np.random.default_rng(rng_seed)
    gaps = rng.exponential(mean_gap, size=n - 1)
    positions = np.concatenate(([0.0], np.cumsum(gaps)))
    return Topology(positions=positions, wraparound=wraparound)


def save_topology(topo: Topology, path) -> None:
    """Write the layout as a two-column text table (ue_id, position_m)."""
    with open(path, "w") as fh:
        for i, x in enumerate(topo.positions):
            fh.write(f"{i} {x!r}\n")


def load_topology(path, wraparound: bool = False) -> Topology:
    ids = []
    xs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a, b = line.split()
            ids.append(int(a))
            xs.append(float(b))
    if ids != list(range(len(ids))):
        raise ConfigError("topology file must list consecutive ue_ids from 0")
    return Topology(positions=np.array(xs), wraparound=wraparound)


def path_loss_db(d, cfg: PropagationConfig):
    """Log-distance loss; clamped to the reference loss below d0."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d <= 0):
        raise UsageError("distance must be positive")
    loss = cfg.l0_db + 10.0 * cfg.pathloss_exp * np.log10(np.maximum(d, cfg.d0_m) / cfg.d0_m)
    return float(loss) if loss.ndim == 0 else loss


def rx_power_dbm(tx: int, rx: int, topo: Topology, cfg: PropagationConfig) -> float:
    """Received power (= RSRP, deterministic channel) of tx's signal at rx."""
    if tx == rx:
        raise UsageError("tx and rx must differ")
    return cfg.tx_power_dbm - path_loss_db(topo.distance(tx, rx), cfg)


def noise_power_dbm(cfg: PropagationConfig, width: int = 1) -> float:
    """Thermal noise plus noise figure over `width` subchannels."""
    if width < 1:
        raise UsageError("width must be >= 1")
    bw = width * cfg.subchannel_bandwidth_hz
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * np.log10(bw) + cfg.noise_figure_db


def db_to_lin(x):
    return 10.0 ** (np.asarray(x, dtype=np.float64) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(x)


def sinr_db(target_power_dbm: float, interferer_powers_dbm, noise_dbm: float) -> float:
    """SINR of one signal against a set of interferers plus noise (all dBm)."""
    denom = db_to_lin(noise_dbm) + sum(db_to_lin(p) for p in interferer_powers_dbm)
    return float(lin_to_db(db_to_lin(target_power_dbm) / denom))


def gain_matrix_dbm(topo: Topology, cfg: PropagationConfig) -> np.ndarray:
    """Pairwise received power gain[i, j] in dBm; the diagonal is -inf (unused)."""
    d = topo.distance_matrix()
    np.fill_diagonal(d, cfg.d0_m)  # placeholder, overwritten below
    g = cfg.tx_power_dbm - path_loss_db(d, cfg)
    np.fill_diagonal(g, -np.inf)
    return g
