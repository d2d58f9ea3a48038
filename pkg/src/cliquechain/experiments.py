"""Drivers for the shipped experiments.

Every run in a sweep gets its seed from a pure function of the master seed
and the cell index, so sweeps are reproducible, cells are independent, and
the two protocols in a comparison share identical random numbers per cell.
Cells can be farmed out to worker processes; results are merged by cell
index, so parallel and serial execution produce the same output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from multiprocessing import Pool

import numpy as np

from .engine import (
    ConfigError,
    MinerSpec,
    SimConfig,
    SimRecord,
    Strategy,
    derive_seed,
    simulate,
)

DEFAULT_ETA_GRID = tuple(float(v) for v in np.logspace(0.0, -3.0, 10))
DEFAULT_BUBKA_TARGETS = (1, 2, 5)
DEFAULT_BUBKA_SEEDS = 20


# ---------------------------------------------------------------------------
# Record statistics
# ---------------------------------------------------------------------------

def solution_fraction(records: list[SimRecord]) -> float:
    """Fraction of blocks that published a solution."""
    return records[-1].cum_solution / len(records)


def win_fraction(records: list[SimRecord], miner_id: int) -> float:
    wins = sum(1 for r in records if r.miner_id == miner_id)
    return wins / len(records)


def max_consecutive_wins(records: list[SimRecord], miner_id: int) -> int:
    best = run = 0
    for r in records:
        run = run + 1 if r.miner_id == miner_id else 0
        best = max(best, run)
    return best


# ---------------------------------------------------------------------------
# Single-run trajectory experiments
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryResult:
    """Per-height series extracted from one run."""

    config: SimConfig
    records: list[SimRecord]
    d_b: tuple[float, ...]
    d_r: tuple[float, ...]
    cum_classical: tuple[int, ...]
    cum_solution: tuple[int, ...]
    replacement_heights: tuple[int, ...]

    @property
    def diagonal(self) -> tuple[int, ...]:
        """All-classical reference line: block count equals height + 1."""
        return tuple(r.height + 1 for r in self.records)


def _trajectory_from_run(config: SimConfig) -> TrajectoryResult:
    result = simulate(config)
    recs = result.records
    return TrajectoryResult(
        config=result.config, records=recs,
        d_b=tuple(r.d_b for r in recs),
        d_r=tuple(r.d_r for r in recs),
        cum_classical=tuple(r.cum_classical for r in recs),
        cum_solution=tuple(r.cum_solution for r in recs),
        replacement_heights=tuple(result.replacement_heights))


def run_block_growth_experiment(config: SimConfig) -> TrajectoryResult:
    """Cumulative classical/solution block counts under the independent
    policy, with problem replacement active."""
    if config.policy != "v2":
        raise ConfigError("block-growth experiment runs the v2 policy")
    if config.saturation_window < 1:
        raise ConfigError("block-growth experiment needs problem "
                          "replacement (saturation_window >= 1)")
    return _trajectory_from_run(config)


def run_difficulty_trajectories(config: SimConfig) -> TrajectoryResult:
    """d_b / d_r trajectories for either retargeting policy."""
    if config.policy not in ("v1", "v2"):
        raise ConfigError("difficulty trajectories need policy v1 or v2")
    return _trajectory_from_run(config)


# ---------------------------------------------------------------------------
# Eta sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepCell:
    protocol: str
    eta_index: int
    instance: int
    seed: int
    fraction: float
    records: tuple[SimRecord, ...]


@dataclass
class EtaSweepResult:
    """Solution-block fractions for both protocols over an eta grid.

    ``v1_fractions[i][j]`` is instance j at eta_values[i]; same shape for
    v2.  ``v2_mean_line`` pools every v2 cell, the reference line the v1
    curve should approach as eta shrinks.
    """

    eta_values: tuple[float, ...]
    instances: int
    chain_height: int
    v1_fractions: tuple[tuple[float, ...], ...]
    v2_fractions: tuple[tuple[float, ...], ...]
    cells: tuple[SweepCell, ...]

    def mean_sd(self, protocol: str) -> tuple[tuple[float, ...],
                                              tuple[float, ...]]:
        rows = self.v1_fractions if protocol == "v1" else self.v2_fractions
        means = tuple(float(np.mean(row)) for row in rows)
        sds = tuple(float(np.std(row, ddof=1)) if len(row) > 1 else 0.0
                    for row in rows)
        return means, sds

    @property
    def v2_mean_line(self) -> float:
        return float(np.mean([f for row in self.v2_fractions for f in row]))


def _sweep_cell_config(base: SimConfig, protocol: str, eta: float,
                       seed: int) -> SimConfig:
    if protocol == "v1":
        # The coupled policy starts at its own equilibrium ratio,
        # initial_dr = eta * initial_db.
        return replace(base, policy="v1", eta=float(eta), initial_dr=None,
                       seed=seed)
    # eta is not an independent-policy parameter, so v2 cells must not let
    # it leak in through the initial condition: every v2 run starts from
    # the base config's reduced difficulty regardless of the grid value.
    return replace(base, policy="v2", eta=float(eta),
                   initial_dr=base.resolve().initial_dr, seed=seed)


def _run_sweep_cell(cell: tuple[str, int, int, SimConfig]) -> SweepCell:
    protocol, eta_index, instance, config = cell
    result = simulate(config)
    return SweepCell(protocol=protocol, eta_index=eta_index,
                     instance=instance, seed=config.seed,
                     fraction=solution_fraction(result.records),
                     records=tuple(result.records))


def _run_cells(cells, workers: int):
    if workers <= 1:
        return [_run_sweep_cell(c) for c in cells]
    with Pool(workers) as pool:
        return pool.map(_run_sweep_cell, cells)


def run_eta_sweep(base_config: SimConfig,
                  eta_values=DEFAULT_ETA_GRID,
                  instances: int = 10,
                  workers: int = 1) -> EtaSweepResult:
    """Run both protocols over the eta grid with common random numbers.

    Each (eta, instance) cell derives one seed from the master seed and
    reuses it for the v1 and the v2 run, so protocol differences are not
    drowned in sampling noise.
    """
    if instances < 1:
        raise ConfigError("instances must be >= 1")
    eta_values = tuple(float(v) for v in eta_values)
    cells = []
    for protocol in ("v1", "v2"):
        for i, eta in enumerate(eta_values):
            for j in range(instances):
                seed = derive_seed(base_config.seed, i, j)
                cells.append((protocol, i, j,
                              _sweep_cell_config(base_config, protocol,
                                                 eta, seed)))
    outputs = _run_cells(cells, workers)

    by_key = {(c.protocol, c.eta_index, c.instance): c for c in outputs}
    v1 = tuple(tuple(by_key[("v1", i, j)].fraction for j in range(instances))
               for i in range(len(eta_values)))
    v2 = tuple(tuple(by_key[("v2", i, j)].fraction for j in range(instances))
               for i in range(len(eta_values)))
    ordered = tuple(sorted(outputs,
                           key=lambda c: (c.protocol, c.eta_index,
                                          c.instance)))
    return EtaSweepResult(eta_values=eta_values, instances=instances,
                          chain_height=base_config.max_blocks,
                          v1_fractions=v1, v2_fractions=v2, cells=ordered)


# ---------------------------------------------------------------------------
# Hoard-and-release attacker
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BubkaRow:
    hoard_target: int
    win_fraction: float
    max_consecutive: float
    win_fractions: tuple[float, ...]
    max_consecutives: tuple[int, ...]


@dataclass
class BubkaResult:
    """Attacker statistics per hoard target, plus an honest baseline.

    The baseline swaps the attacker for an honest solver with the same
    hashrate and solver speed, run on the same seeds.
    """

    rows: tuple[BubkaRow, ...]
    honest_win_fractions: tuple[float, ...]
    attacker_id: int
    seeds: tuple[int, ...]
    cells: tuple[SweepCell, ...]

    @property
    def honest_win_fraction(self) -> float:
        return float(np.mean(self.honest_win_fractions))


def _attacker_index(config: SimConfig) -> int:
    idx = [i for i, m in enumerate(config.miners)
           if m.strategy is Strategy.BUBKA]
    if len(idx) != 1:
        raise ConfigError("bubka experiment needs exactly one "
                          "bubka-attacker in the miner list")
    return idx[0]


def run_bubka_experiment(base_config: SimConfig,
                         hoard_targets=DEFAULT_BUBKA_TARGETS,
                         num_seeds: int = DEFAULT_BUBKA_SEEDS,
                         workers: int = 1) -> BubkaResult:
    """Sweep the attacker's hoard target over a set of seeded runs.

    All hoard targets and the honest baseline share the same per-seed
    random numbers.  Reports the attacker's win fraction and its longest
    consecutive block run, averaged over seeds.
    """
    if num_seeds < 1:
        raise ConfigError("num_seeds must be >= 1")
    base = base_config.resolve()
    attacker_idx = _attacker_index(base)
    attacker = base.miners[attacker_idx]
    seeds = tuple(derive_seed(base.seed, s) for s in range(num_seeds))

    cells = []
    for t, target in enumerate(hoard_targets):
        specs = list(base.miners)
        specs[attacker_idx] = replace(attacker, hoard_target=int(target))
        cfg = replace(base, miners=tuple(specs))
        for s, seed in enumerate(seeds):
            cells.append((f"target={int(target)}", t, s,
                          replace(cfg, seed=seed)))
    honest_specs = list(base.miners)
    honest_specs[attacker_idx] = MinerSpec(
        id=attacker.id, hashrate=attacker.hashrate, strategy=Strategy.SOLVER,
        solver_steps_per_second=attacker.solver_steps_per_second)
    honest_cfg = replace(base, miners=tuple(honest_specs))
    for s, seed in enumerate(seeds):
        cells.append(("honest", len(hoard_targets), s,
                      replace(honest_cfg, seed=seed)))

    outputs = _run_cells(cells, workers)
    by_key = {(c.protocol, c.instance): c for c in outputs}

    rows = []
    for t, target in enumerate(hoard_targets):
        fracs = []
        runs = []
        for s in range(num_seeds):
            recs = list(by_key[(f"target={int(target)}", s)].records)
            fracs.append(win_fraction(recs, attacker.id))
            runs.append(max_consecutive_wins(recs, attacker.id))
        rows.append(BubkaRow(hoard_target=int(target),
                             win_fraction=float(np.mean(fracs)),
                             max_consecutive=float(np.mean(runs)),
                             win_fractions=tuple(fracs),
                             max_consecutives=tuple(runs)))
    honest = tuple(
        win_fraction(list(by_key[("honest", s)].records), attacker.id)
        for s in range(num_seeds))
    ordered = tuple(sorted(outputs,
                           key=lambda c: (c.eta_index, c.instance)))
    return BubkaResult(rows=tuple(rows), honest_win_fractions=honest,
                       attacker_id=attacker.id, seeds=seeds, cells=ordered)
