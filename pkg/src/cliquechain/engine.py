"""Event-driven mining simulation.

Each round is an exponential race: every miner draws a waiting time with
mean (its difficulty / its hashrate), the minimum wins the block, and by
memorylessness the losers simply redraw next round.  A miner sitting on an
unpublished improvement races at the reduced difficulty d_r and its win
becomes a solution block; everyone else races at d_b.

Between blocks the solver miners push their clique enumerations forward in
proportion to elapsed simulated time.  Solved-out or stagnant problem
instances are swapped for fresh graphs; the difficulty state carries over.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .chain import Block, BlockKind, Chain, append_block
from .clique import (
    INITIAL_BEST_SCORE,
    CliqueSolution,
    Graph,
    ProblemInstance,
    SolverCursor,
    gen_random_graph,
)
from .difficulty import (
    DEFAULT_MAX_UPDATE_FACTOR,
    DifficultyPolicy,
    DifficultyState,
    PolicyParamsV1,
    PolicyParamsV2,
)

DEFAULT_HASHRATE = 1000.0
# Full enumeration of a default 60-vertex instance takes ~4800 steps, so at
# 100 steps/s one default solver exhausts it in roughly 500 block times at
# the default 0.1 s target.
DEFAULT_SOLVER_STEPS_PER_SECOND = 100.0
DEFAULT_ETA = 1.0 / 200.0


class ConfigError(Exception):
    """Simulation configuration is structurally or semantically invalid."""


class Strategy(str, enum.Enum):
    CLASSICAL = "classical"
    SOLVER = "solver"
    BUBKA = "bubka-attacker"


@dataclass(frozen=True)
class MinerSpec:
    """Static description of one miner."""

    id: int
    hashrate: float
    strategy: Strategy
    solver_steps_per_second: float = 0.0
    hoard_target: int | None = None

    def __post_init__(self):
        if self.hashrate <= 0:
            raise ConfigError("hashrate must be positive")
        if self.strategy in (Strategy.SOLVER, Strategy.BUBKA):
            if self.solver_steps_per_second <= 0:
                raise ConfigError(
                    f"{self.strategy.value} miner needs "
                    "solver_steps_per_second > 0")
        if self.strategy is Strategy.BUBKA:
            if self.hoard_target is None or self.hoard_target < 1:
                raise ConfigError("bubka-attacker needs hoard_target >= 1")
        elif self.hoard_target is not None:
            raise ConfigError("hoard_target only applies to bubka-attacker")


@dataclass
class MinerState:
    """Mutable per-miner simulation state.

    ``carry`` is the fractional solver step left over from the previous
    round.  An attacker's ``hoard`` is kept ascending by score and pruned
    whenever the published best overtakes an entry; ``releasing`` flips on
    once the hoard reaches its target and stays on until it drains.
    """

    spec: MinerSpec
    cursor: SolverCursor | None = None
    held_solution: CliqueSolution | None = None
    hoard: list[CliqueSolution] = field(default_factory=list)
    carry: float = 0.0
    releasing: bool = False

    def mines_reduced(self) -> bool:
        if self.spec.strategy is Strategy.SOLVER:
            return self.held_solution is not None
        if self.spec.strategy is Strategy.BUBKA:
            return self.releasing and bool(self.hoard)
        return False


@dataclass(frozen=True)
class SimConfig:
    """Full simulation setup; field names match the config-file keys.

    ``initial_dr = None`` resolves to eta * initial_db, and an empty miner
    list resolves to the stock population: 10 classical miners under the
    bitcoin baseline, 10 classical plus 10 solvers otherwise.
    """

    policy: str
    seed: int
    eta: float = DEFAULT_ETA
    n1: int = 10
    target_time: float = 0.1
    n2_classical: int = 10
    n2_solution: int = 5
    t2_classical: float = 0.1
    t2_solution: float = 0.1
    max_update_factor: float = DEFAULT_MAX_UPDATE_FACTOR
    initial_db: float = 1000.0
    initial_dr: float | None = None
    graph_n: int = 60
    graph_p: float = 0.5
    max_blocks: int = 200
    saturation_window: int = 50
    miners: tuple[MinerSpec, ...] = ()

    def resolve(self) -> "SimConfig":
        """Fill defaults and validate; raises ConfigError."""
        if self.policy not in ("bitcoin", "v1", "v2"):
            raise ConfigError(f"unknown policy {self.policy!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta must lie in (0, 1]")
        for name in ("n1", "n2_classical", "n2_solution"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("target_time", "t2_classical", "t2_solution",
                     "initial_db"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_update_factor <= 1.0:
            raise ConfigError("max_update_factor must exceed 1")
        if self.graph_n < 1:
            raise ConfigError("graph_n must be >= 1")
        if not 0.0 < self.graph_p < 1.0:
            raise ConfigError("graph_p must lie strictly between 0 and 1")
        if self.max_blocks < 1:
            raise ConfigError("max_blocks must be >= 1")
        if self.saturation_window < 0:
            raise ConfigError("saturation_window must be >= 0")

        initial_dr = self.initial_dr
        if initial_dr is None:
            initial_dr = self.eta * self.initial_db
        if initial_dr <= 0:
            raise ConfigError("initial_dr must be positive")

        miners = self.miners
        if not miners:
            miners = default_miners(self.policy)
        for i, spec in enumerate(miners):
            if spec.id != i:
                raise ConfigError("miner ids must run 0..m-1 in order")
        return replace(self, initial_dr=initial_dr, miners=tuple(miners))


def default_miners(policy: str) -> tuple[MinerSpec, ...]:
    """Stock population: 10 classical miners, plus 10 solvers when the
    policy actually pays for solutions."""
    specs = [MinerSpec(id=i, hashrate=DEFAULT_HASHRATE,
                       strategy=Strategy.CLASSICAL) for i in range(10)]
    if policy != "bitcoin":
        specs.extend(
            MinerSpec(id=10 + i, hashrate=DEFAULT_HASHRATE,
                      strategy=Strategy.SOLVER,
                      solver_steps_per_second=DEFAULT_SOLVER_STEPS_PER_SECOND)
            for i in range(10))
    return tuple(specs)


@dataclass(frozen=True)
class SimRecord:
    """One per-block log row; difficulties are post-update values."""

    height: int
    sim_time: float
    kind: str
    miner_id: int
    d_b: float
    d_r: float
    best_score: int
    problem_epoch: int
    cum_classical: int
    cum_solution: int


@dataclass
class SimResult:
    """Everything a run produced, for writers and experiments."""

    config: SimConfig
    records: list[SimRecord]
    chain: Chain
    graphs: list[Graph]
    replacement_heights: list[int]
    final_state: DifficultyState
    miners: list[MinerState]


# ---------------------------------------------------------------------------
# Deterministic seed plumbing
# ---------------------------------------------------------------------------

_MINING_STREAM = 0
_PROBLEM_STREAM = 1
_PERMUTATION_STREAM = 2


def derive_seed(master: int, *key: int) -> int:
    """Pure (master, key...) -> seed map used for sweep cells and runs."""
    seq = np.random.SeedSequence(entropy=master, spawn_key=tuple(key))
    return int(seq.generate_state(1, np.uint64)[0])


def _stream_rng(master: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=master, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(seq))


def _solver_order(master: int, miner_id: int, epoch: int, n: int) -> list[int]:
    rng = _stream_rng(master, _PERMUTATION_STREAM, miner_id, epoch)
    return [int(v) for v in rng.permutation(n)]


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------

def sample_block_winner(miners: list[MinerState], d_b: float, d_r: float,
                        rng: np.random.Generator,
                        ) -> tuple[int, BlockKind, float]:
    """Run one exponential race and return (miner_id, kind, waiting time).

    Each miner's time is exponential with mean difficulty/hashrate, where
    the difficulty is d_r for miners currently working a held solution and
    d_b otherwise.  Ties go to the lowest miner id.
    """
    reduced = [st.mines_reduced() for st in miners]
    scales = np.array([(d_r if red else d_b) / st.spec.hashrate
                       for st, red in zip(miners, reduced)])
    times = rng.exponential(scales)
    idx = int(np.argmin(times))
    kind = BlockKind.SOLUTION if reduced[idx] else BlockKind.CLASSICAL
    return miners[idx].spec.id, kind, float(times[idx])


def advance_solvers(miners: list[MinerState], dt: float,
                    problem: ProblemInstance) -> list[MinerState]:
    """Advance every solving miner by floor(steps_per_second * dt + carry)
    enumeration steps, preserving the fractional carry.

    A solver banks each improvement it finds: honest solvers replace their
    held solution, attackers push onto the hoard.  The report threshold is
    the published best or the miner's own best find, whichever is higher,
    so successive finds within one interval keep improving.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    for st in miners:
        if st.cursor is None:
            continue
        total = st.spec.solver_steps_per_second * dt + st.carry
        budget = int(math.floor(total))
        st.carry = total - budget
        while budget > 0 and not st.cursor.exhausted:
            threshold = problem.best_score
            if st.held_solution is not None:
                threshold = max(threshold, st.held_solution.score)
            if st.hoard:
                threshold = max(threshold, st.hoard[-1].score)
            before = st.cursor.steps_consumed
            found = st.cursor.advance(problem.graph, budget, threshold)
            budget -= st.cursor.steps_consumed - before
            if found is None:
                break
            if st.spec.strategy is Strategy.BUBKA:
                st.hoard.append(found)
                if len(st.hoard) >= st.spec.hoard_target:
                    st.releasing = True
            else:
                st.held_solution = found
    return miners


def bubka_strategy_step(attacker: MinerState, chain_best: int) -> MinerState:
    """Prune the attacker's hoard against the published best and update its
    release flag.

    Entries that no longer beat the published best are worthless and are
    dropped.  Release mode starts when the hoard reaches its target and
    persists until the hoard drains, even if pruning shrinks it midway.
    """
    st = attacker
    st.hoard = [sol for sol in st.hoard if sol.score > chain_best]
    if len(st.hoard) >= st.spec.hoard_target:
        st.releasing = True
    if not st.hoard:
        st.releasing = False
    return st


def check_saturation_and_replace(problem: ProblemInstance, chain: Chain,
                                 config: SimConfig,
                                 rng: np.random.Generator,
                                 ) -> ProblemInstance | None:
    """Decide whether the active problem is spent; if so build its successor.

    Two triggers: the enumeration finished and the published best caught up
    with the proven optimum, or the best score has been frozen for a full
    saturation window of blocks.  The replacement is a fresh graph at
    epoch + 1; difficulties are not touched.
    """
    height = chain.height
    done = (problem.optimum is not None
            and problem.best_score >= problem.optimum)
    stagnant = (config.saturation_window > 0
                and height - problem.last_improvement_height
                >= config.saturation_window)
    if not (done or stagnant):
        return None
    seed = int(rng.integers(0, 2 ** 63))
    graph = gen_random_graph(config.graph_n, config.graph_p, seed)
    return ProblemInstance(graph=graph, epoch=problem.epoch + 1,
                           best_score=INITIAL_BEST_SCORE,
                           activated_height=height)


def _reseed_solvers(miners: list[MinerState], problem: ProblemInstance,
                    master_seed: int) -> None:
    for st in miners:
        if st.spec.strategy in (Strategy.SOLVER, Strategy.BUBKA):
            order = _solver_order(master_seed, st.spec.id, problem.epoch,
                                  problem.graph.n)
            st.cursor = SolverCursor(problem.graph, problem.epoch, order)
            st.held_solution = None
            st.hoard.clear()
            st.releasing = False


def _maybe_prove_optimum(problem: ProblemInstance,
                         miners: list[MinerState]) -> None:
    # Once every cursor has exhausted, the best score seen anywhere in the
    # network is the exact optimum of this instance.
    if problem.optimum is not None:
        return
    solverish = [st for st in miners if st.cursor is not None]
    if not solverish or not all(st.cursor.exhausted for st in solverish):
        return
    best = problem.best_score
    for st in solverish:
        if st.held_solution is not None:
            best = max(best, st.held_solution.score)
        if st.hoard:
            best = max(best, st.hoard[-1].score)
    problem.optimum = best


def simulate(config: SimConfig) -> SimResult:
    """Run the full event loop and return records plus final state."""
    cfg = config.resolve()
    policy = _policy_from_config(cfg)
    state = policy.initial_state(cfg.initial_db, cfg.initial_dr)
    mining_rng = _stream_rng(cfg.seed, _MINING_STREAM)
    problem_rng = _stream_rng(cfg.seed, _PROBLEM_STREAM)

    problem = ProblemInstance(
        graph=gen_random_graph(cfg.graph_n, cfg.graph_p,
                               int(problem_rng.integers(0, 2 ** 63))),
        epoch=0)
    chain = Chain()
    miners = [MinerState(spec=spec) for spec in cfg.miners]
    if policy.uses_solutions:
        _reseed_solvers(miners, problem, cfg.seed)

    records: list[SimRecord] = []
    graphs = [problem.graph]
    replacement_heights: list[int] = []
    cum_classical = 0
    cum_solution = 0
    now = 0.0

    while len(chain.blocks) < cfg.max_blocks:
        miner_id, kind, dt = sample_block_winner(miners, state.d_b,
                                                 state.d_r, mining_rng)
        # Long droughts can push d_r so low that a waiting time drops under
        # the clock's float resolution; advance by at least one ulp so block
        # times stay strictly increasing.
        now = max(now + dt, math.nextafter(now, math.inf))
        if policy.uses_solutions:
            advance_solvers(miners, dt, problem)
            _maybe_prove_optimum(problem, miners)

        winner = miners[miner_id]
        solution = None
        if kind is BlockKind.SOLUTION:
            if winner.spec.strategy is Strategy.BUBKA:
                solution = winner.hoard.pop(0)
            else:
                solution = winner.held_solution
                winner.held_solution = None

        height = len(chain.blocks)
        block = Block(height=height, kind=kind, miner_id=miner_id,
                      sim_time=now,
                      difficulty_used=(state.d_r if kind is BlockKind.SOLUTION
                                       else state.d_b),
                      problem_epoch=problem.epoch, solution=solution)
        append_block(chain, block, problem.graph, state)

        if kind is BlockKind.SOLUTION:
            cum_solution += 1
            problem.best_score = solution.score
            problem.last_improvement_height = height
            for st in miners:
                if (st.held_solution is not None
                        and st.held_solution.score <= solution.score):
                    st.held_solution = None
                if st.spec.strategy is Strategy.BUBKA:
                    bubka_strategy_step(st, solution.score)
        else:
            cum_classical += 1

        state = policy.on_block(state, block)
        records.append(SimRecord(
            height=height, sim_time=now, kind=kind.value, miner_id=miner_id,
            d_b=state.d_b, d_r=state.d_r, best_score=problem.best_score,
            problem_epoch=problem.epoch, cum_classical=cum_classical,
            cum_solution=cum_solution))

        fresh = check_saturation_and_replace(problem, chain, cfg, problem_rng)
        if fresh is not None:
            replacement_heights.append(height)
            chain.begin_epoch(fresh.epoch)
            problem = fresh
            graphs.append(problem.graph)
            if policy.uses_solutions:
                _reseed_solvers(miners, problem, cfg.seed)

    return SimResult(config=cfg, records=records, chain=chain, graphs=graphs,
                     replacement_heights=replacement_heights,
                     final_state=state, miners=miners)


def run_simulation(config: SimConfig) -> list[SimRecord]:
    """Run the event loop and return the per-block records."""
    return simulate(config).records


def _policy_from_config(cfg: SimConfig) -> DifficultyPolicy:
    if cfg.policy == "v1":
        return DifficultyPolicy(
            "v1", v1=PolicyParamsV1(
                eta=cfg.eta, epoch_length=cfg.n1,
                target_block_time=cfg.target_time,
                max_update_factor=cfg.max_update_factor))
    if cfg.policy == "v2":
        return DifficultyPolicy(
            "v2", v2=PolicyParamsV2(
                classical_epoch=cfg.n2_classical,
                solution_epoch=cfg.n2_solution,
                classical_target_time=cfg.t2_classical,
                solution_target_time=cfg.t2_solution,
                max_update_factor=cfg.max_update_factor))
    return DifficultyPolicy("bitcoin", epoch_length=cfg.n1,
                            target_time=cfg.target_time,
                            max_update_factor=cfg.max_update_factor)
