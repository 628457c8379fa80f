"""Flat key=value scenario configuration.

Format: one ``section.key = value`` per line, ``#`` comments, blank lines
ignored. Unset keys fall back to the default highway scenario (200 UEs at a
10 m mean gap, 23 dBm, 5 dB noise figure, 500 us slots, 300-byte packets,
log-distance loss with 46.7 dB at 1 m and exponent 3, 200 m relevance
radius, 10 ms delay budget). ``selection.t2`` is derived from the delay
budget when not given explicitly.
"""

from __future__ import annotations

import math
from dataclasses import replace

from .channel import PropagationConfig
from .engine import QosConfig, ScenarioConfig, TopologyConfig, TrafficConfig
from .grid import ConfigError, GridConfig
from .phy import PhyConfig
from .selection import SelectionConfig


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (section, field, parser); None parser marks derived-by-default keys
KEYS: dict[str, tuple[str, str, object]] = {
    "grid.slot_duration_s": ("grid", "slot_duration", float),
    "grid.num_subchannels": ("grid", "num_subchannels", int),
    "grid.subchannels_per_tx": ("grid", "subchannels_per_tx", int),
    "grid.reservation_horizon": ("grid", "reservation_horizon", int),
    "topology.n_ues": ("topology", "n_ues", int),
    "topology.mean_gap_m": ("topology", "mean_gap_m", float),
    "topology.wraparound": ("topology", "wraparound", _bool),
    "propagation.l0_db": ("propagation", "l0_db", float),
    "propagation.d0_m": ("propagation", "d0_m", float),
    "propagation.pathloss_exp": ("propagation", "pathloss_exp", float),
    "propagation.tx_power_dbm": ("propagation", "tx_power_dbm", float),
    "propagation.noise_figure_db": ("propagation", "noise_figure_db", float),
    "propagation.subchannel_bandwidth_hz": ("propagation", "subchannel_bandwidth_hz", float),
    "phy.pscch_sinr_threshold_db": ("phy", "pscch_sinr_threshold_db", float),
    "phy.pssch_sinr_threshold_db": ("phy", "pssch_sinr_threshold_db", float),
    "phy.decoder": ("phy", "decoder", str),
    "phy.duplex": ("phy", "duplex", str),
    "selection.k": ("selection", "k", int),
    "selection.t1": ("selection", "t1", int),
    "selection.t2": ("selection", "t2", int),
    "selection.p_th_dbm": ("selection", "p_th_dbm", float),
    "selection.free_fraction_target": ("selection", "free_fraction_target", float),
    "selection.algorithm": ("selection", "algorithm", str),
    "traffic.per_ue_rate_pps": ("traffic", "per_ue_rate", float),
    "traffic.warmup_s": ("traffic", "warmup", float),
    "traffic.duration_s": ("traffic", "duration", float),
    "traffic.mode": ("traffic", "mode", str),
    "qos.relevance_radius_m": ("qos", "relevance_radius_m", float),
    "qos.delay_budget_s": ("qos", "delay_budget_s", float),
}

_SECTION_TYPES = {
    "grid": GridConfig,
    "topology": TopologyConfig,
    "propagation": PropagationConfig,
    "phy": PhyConfig,
    "selection": SelectionConfig,
    "traffic": TrafficConfig,
    "qos": QosConfig,
}


def parse_config_text(text: str) -> tuple[dict[str, str], list[str]]:
    """Raw key -> value strings plus syntax/unknown-key errors."""
    raw: dict[str, str] = {}
    errors: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errors.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in raw:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        raw[key] = value
    return raw, errors


def build_scenario(values: dict[str, object]) -> tuple[ScenarioConfig | None, list[str]]:
    """Typed values -> validated ScenarioConfig, collecting every violation."""
    errors: list[str] = []
    parsed: dict[str, object] = {}
    for key, value in values.items():
        if key not in KEYS:
            errors.append(f"{key}: unknown key")
            continue
        _, _, parser = KEYS[key]
        if isinstance(value, str) and parser is not str:
            try:
                value = parser(value)
            except ValueError as exc:
                errors.append(f"{key}: {exc}")
                continue
        parsed[key] = value

    section_kwargs: dict[str, dict[str, object]] = {s: {} for s in _SECTION_TYPES}
    for key, value in parsed.items():
        section, fieldname, _ = KEYS[key]
        section_kwargs[section][fieldname] = value

    # t2 defaults to the delay budget expressed in slots
    if "t2" not in section_kwargs["selection"]:
        slot = section_kwargs["grid"].get("slot_duration", GridConfig.slot_duration)
        budget = section_kwargs["qos"].get("delay_budget_s", QosConfig.delay_budget_s)
        section_kwargs["selection"]["t2"] = int(math.floor(budget / slot))

    sections: dict[str, object] = {}
    for name, cls in _SECTION_TYPES.items():
        try:
            sections[name] = cls(**section_kwargs[name])
        except ConfigError as exc:
            errors.append(f"{name}: {exc}")
    if errors:
        return None, errors
    scenario = ScenarioConfig(**sections)
    try:
        scenario.validate()
    except ConfigError as exc:
        errors.append(f"selection: {exc}")
        return None, errors
    return scenario, errors


def load_config(path) -> tuple[ScenarioConfig | None, list[str]]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        return None, [f"cannot read config: {exc}"]
    raw, errors = parse_config_text(text)
    scenario, more = build_scenario(raw)
    return (scenario if not errors else None), errors + more


def scenario_to_flat(scenario: ScenarioConfig) -> dict[str, object]:
    """Full key=value echo of a scenario, in canonical key order."""
    out: dict[str, object] = {}
    for key, (section, fieldname, _) in KEYS.items():
        out[key] = getattr(getattr(scenario, section), fieldname)
    return out


def format_flat(flat: dict[str, object]) -> str:
    lines = []
    for key, value in flat.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def scenario_overrides(scenario: ScenarioConfig) -> dict[str, object]:
    """Keys whose values differ from the defaults; enough to rebuild the scenario."""
    base = scenario_to_flat(default_scenario())
    flat = scenario_to_flat(scenario)
    return {k: v for k, v in flat.items() if v != base[k]}


def default_scenario() -> ScenarioConfig:
    scenario, errors = build_scenario({})
    assert scenario is not None and not errors
    return scenario


def apply_overrides(scenario: ScenarioConfig, values: dict[str, object]) -> ScenarioConfig:
    """Return a scenario with the given flat keys replaced."""
    flat = scenario_to_flat(scenario)
    for key in values:
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
    flat.update(values)
    rebuilt, errors = build_scenario(flat)
    if rebuilt is None:
        raise ConfigError("; ".join(errors))
    return rebuilt
