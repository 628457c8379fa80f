"""Experiment presets, sweep orchestration, and CSV emission.

A spec expands into independent cells: PLR measurements at fixed loads, or
capacity searches at fixed PLR targets. Cells are dispatched to a mapper
(serial or a process pool), collected, sorted, and written as one CSV row
each. Rows are reproducible for fixed seeds; only the runtime column varies
between reruns.
"""

from __future__ import annotations

import logging
import sys
import time
from dataclasses import dataclass, field

from . import configio
from .engine import (
    BracketError,
    CapacityResult,
    ScenarioConfig,
    StatisticsError,
    capacity_search,
    measure_plr,
    run_simulation,
)
from .grid import ConfigError

log = logging.getLogger("mode2sim")

CSV_SCHEMA = "m2s-1"
CSV_HEADER = (
    "schema,preset,algorithm,decoder,duplex,k,load_pps_per_ue,plr,plr_ci95,"
    "plr_target,capacity_pps_per_ue,capacity_lo,capacity_hi,seeds,n_runs,"
    "runtime_s,overrides"
)

PRESETS = {
    "plr_vs_load": "packet loss rate vs offered load for the ra/srs/qfa selectors (k=5, mppd, hd)",
    "capacity_vs_k": "capacity vs number of attempts for the baseline and enhanced stacks, both QoS targets",
    "custom": "cells built entirely from the config file and command-line sets",
}

# (algorithm, decoder, duplex) curves for the capacity preset
CAPACITY_CURVES = (
    ("srs", "mppd", "hd"),
    ("qfa", "mppd", "hd"),
    ("qfa", "ipd", "hd"),
    ("qfa", "mppd", "sbfd"),
    ("qfa", "mppd", "ibfd"),
    ("qfa", "ipd", "ibfd"),
)

DEFAULT_LOAD_GRID = (0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0)
DEFAULT_BRACKET = (0.02, 40.0)


@dataclass
class ExperimentSpec:
    preset: str = "custom"
    algorithms: tuple[str, ...] = ("srs",)
    decoders: tuple[str, ...] = ("mppd",)
    duplexes: tuple[str, ...] = ("hd",)
    k_values: tuple[int, ...] = (5,)
    combos: tuple[tuple[str, str, str], ...] | None = None  # overrides the cartesian sets
    loads: tuple[float, ...] = ()
    plr_targets: tuple[float, ...] = ()
    bracket: tuple[float, float] = DEFAULT_BRACKET
    capacity_rel_tol: float = 0.05
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    overrides: dict = field(default_factory=dict)   # flat scenario keys applied to every cell


@dataclass
class Cell:
    algorithm: str
    decoder: str
    duplex: str
    k: int
    scenario: ScenarioConfig
    load: float | None = None          # PLR cell
    plr_target: float | None = None    # capacity cell

    def sort_key(self):
        return (
            self.algorithm, self.decoder, self.duplex, self.k,
            self.load if self.load is not None else -1.0,
            self.plr_target if self.plr_target is not None else -1.0,
        )


@dataclass
class Row:
    cell: Cell
    plr: float | None = None
    plr_ci: float | None = None
    capacity: CapacityResult | None = None
    n_runs: int = 0
    runtime_s: float = 0.0

    def to_csv(self, preset: str, seeds: tuple[int, ...]) -> str:
        c = self.cell
        base_keys = {
            "selection.algorithm", "phy.decoder", "phy.duplex",
            "selection.k", "traffic.per_ue_rate_pps",
        }
        ov = configio.scenario_overrides(c.scenario)
        ov_text = ";".join(f"{k}={v}" for k, v in sorted(ov.items()) if k not in base_keys)
        fields = [
            CSV_SCHEMA,
            preset,
            c.algorithm,
            c.decoder,
            c.duplex,
            str(c.k),
            repr(c.load) if c.load is not None else "",
            repr(self.plr) if self.plr is not None else "",
            repr(self.plr_ci) if self.plr_ci is not None else "",
            repr(c.plr_target) if c.plr_target is not None else "",
            repr(self.capacity.capacity) if self.capacity else "",
            repr(self.capacity.bracket_lo) if self.capacity else "",
            repr(self.capacity.bracket_hi) if self.capacity else "",
            "|".join(str(s) for s in seeds),
            str(self.n_runs),
            f"{self.runtime_s:.2f}",
            ov_text,
        ]
        return ",".join(fields)


def expand_cells(spec: ExperimentSpec) -> tuple[list[Cell], list[str]]:
    """All (combo, k, load-or-target) cells plus descriptions of invalid ones."""
    cells: list[Cell] = []
    invalid: list[str] = []
    combos = spec.combos
    if combos is None:
        combos = tuple(
            (a, dec, dup)
            for a in spec.algorithms
            for dec in spec.decoders
            for dup in spec.duplexes
        )
    base = configio.default_scenario()
    for algorithm, decoder, duplex in combos:
        for k in spec.k_values:
            values = dict(spec.overrides)
            values.update(
                {
                    "selection.algorithm": algorithm,
                    "phy.decoder": decoder,
                    "phy.duplex": duplex,
                    "selection.k": k,
                }
            )
            try:
                scenario = configio.apply_overrides(base, values)
            except ConfigError as exc:
                invalid.append(f"{algorithm}/{decoder}/{duplex}/k={k}: {exc}")
                continue
            for load in spec.loads:
                try:
                    cells.append(
                        Cell(
                            algorithm, decoder, duplex, k,
                            configio.apply_overrides(scenario, {"traffic.per_ue_rate_pps": load}),
                            load=load,
                        )
                    )
                except ConfigError as exc:
                    invalid.append(f"{algorithm}/{decoder}/{duplex}/k={k}/load={load}: {exc}")
            for target in spec.plr_targets:
                cells.append(
                    Cell(algorithm, decoder, duplex, k, scenario, plr_target=target)
                )
    return cells, invalid


def _run_one(args):
    scenario, seed = args
    return run_simulation(scenario, seed)


def run_cell(cell: Cell, spec: ExperimentSpec, run_mapper=map) -> Row:
    t0 = time.perf_counter()
    if cell.load is not None:
        results = list(
            run_mapper(_run_one, [(cell.scenario, s) for s in spec.seeds])
        )
        plr, ci = measure_plr(results)
        return Row(
            cell, plr=plr, plr_ci=ci, n_runs=len(results),
            runtime_s=time.perf_counter() - t0,
        )
    cap = capacity_search(
        cell.scenario,
        cell.plr_target,
        spec.bracket[0],
        spec.bracket[1],
        seeds=spec.seeds,
        rel_tol=spec.capacity_rel_tol,
        run_mapper=run_mapper,
    )
    return Row(
        cell, capacity=cap, n_runs=len(cap.probes) * len(spec.seeds),
        runtime_s=time.perf_counter() - t0,
    )


def run_experiment(spec: ExperimentSpec, run_mapper=map) -> tuple[list[Row], list[str]]:
    """Execute every cell; returns sorted rows plus invalid-combination notes."""
    cells, invalid = expand_cells(spec)
    for note in invalid:
        log.warning("skipping invalid combination: %s", note)
    rows = []
    for i, cell in enumerate(sorted(cells, key=Cell.sort_key)):
        what = (
            f"load={cell.load}" if cell.load is not None else f"target={cell.plr_target}"
        )
        log.info(
            "cell %d/%d: %s/%s/%s k=%d %s",
            i + 1, len(cells), cell.algorithm, cell.decoder, cell.duplex, cell.k, what,
        )
        rows.append(run_cell(cell, spec, run_mapper))
    rows.sort(key=lambda r: r.cell.sort_key())
    return rows, invalid


def write_csv(rows: list[Row], spec: ExperimentSpec, path) -> None:
    """Data rows to ``path``; the full scenario echo goes to ``path``.meta.txt."""
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.to_csv(spec.preset, spec.seeds) + "\n")
    meta_path = str(path) + ".meta.txt"
    base = configio.apply_overrides(configio.default_scenario(), spec.overrides)
    with open(meta_path, "w") as fh:
        fh.write(f"# mode2sim experiment provenance (schema {CSV_SCHEMA})\n")
        fh.write(f"# preset: {spec.preset}\n")
        fh.write(f"# seeds: {','.join(str(s) for s in spec.seeds)}\n")
        fh.write(f"# combos: algorithms={spec.algorithms} decoders={spec.decoders} duplexes={spec.duplexes} k={spec.k_values}\n")
        if spec.combos is not None:
            fh.write(f"# explicit curves: {spec.combos}\n")
        fh.write(f"# loads: {spec.loads}\n")
        fh.write(f"# plr_targets: {spec.plr_targets} bracket={spec.bracket} rel_tol={spec.capacity_rel_tol}\n")
        fh.write("# base scenario (cells override algorithm/decoder/duplex/k/load):\n")
        fh.write(configio.format_flat(configio.scenario_to_flat(base)))


def make_preset(name: str, seeds: tuple[int, ...] = (0, 1, 2, 3, 4),
                overrides: dict | None = None) -> ExperimentSpec:
    ov = overrides or {}
    if name == "plr_vs_load":
        return ExperimentSpec(
            preset=name,
            algorithms=("ra", "srs", "qfa"),
            decoders=("mppd",),
            duplexes=("hd",),
            k_values=(5,),
            loads=DEFAULT_LOAD_GRID,
            seeds=seeds,
            overrides=ov,
        )
    if name == "capacity_vs_k":
        return ExperimentSpec(
            preset=name,
            combos=CAPACITY_CURVES,
            k_values=tuple(range(1, 9)),
            plr_targets=(0.1, 1e-3),
            seeds=seeds,
            overrides=ov,
        )
    if name == "custom":
        return ExperimentSpec(preset=name, seeds=seeds, overrides=ov)
    raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
