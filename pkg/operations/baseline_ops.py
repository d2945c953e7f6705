"""
Baseline optimizer operations for the AP deployment optimizer
Category 6: Exhaustive grid oracle, random search and cross-entropy method
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from operations.env_ops import decode_actions
from operations.metric_ops import ObjectiveSpec, evaluate, evaluate_batch
from operations.scenario_ops import (
    ConfigError, Deployment, Scenario, fixed_ue_draw, sample_trajectory,
)

logger = logging.getLogger(__name__)

DEFAULT_BUDGET_CAP = 5_000_000
CHUNK_SIZE = 16384
PAIR_BLOCK_LIMIT = 1_000_000
REFINE_START_STEP = 0.05
REFINE_TOLERANCE = 1e-9
REFINE_MAX_ROUNDS = 10_000


class BudgetExceededError(ValueError):
    """Raised when an exhaustive search would exceed its evaluation cap"""
    pass


@dataclass
class OracleResult:
    """Best deployment found by a baseline"""
    best_deployment: Deployment
    best_value: float
    evaluations: int
    method: str = ""
    history: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "best_value": self.best_value,
            "evaluations": self.evaluations,
            "best_deployment": {
                "tx": [[p.x, p.y] for p in self.best_deployment.tx],
                "rx": [[p.x, p.y] for p in self.best_deployment.rx],
            },
            "history": list(self.history),
        }


@dataclass(frozen=True)
class CemConfig:
    population: int = 64
    elite_fraction: float = 0.125
    iterations: int = 30
    initial_std: float = 0.5
    std_decay: float = 1.0
    min_std: float = 1e-3
    grid_resolution: int = 0
    refine: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.population < 1 or self.iterations < 1:
            raise ConfigError("solver.cem.population and solver.cem.iterations must be >= 1")
        if not 0.0 < self.elite_fraction < 1.0:
            raise ConfigError(f"solver.cem.elite_fraction must be in (0, 1), got {self.elite_fraction}")
        if self.population * self.elite_fraction < 1:
            raise ConfigError(
                f"solver.cem.population * elite_fraction must be >= 1, got {self.population * self.elite_fraction}"
            )
        if self.initial_std < 0 or self.min_std < 0:
            raise ConfigError("solver.cem.initial_std and solver.cem.min_std must be >= 0")
        if self.grid_resolution < 0 or self.grid_resolution == 1:
            raise ConfigError(
                f"solver.cem.grid_resolution must be 0 (continuous) or >= 2, got {self.grid_resolution}"
            )

    @property
    def num_elite(self) -> int:
        return int(self.population * self.elite_fraction)


def _problem(scenario: Scenario, ues: Optional[Sequence]):
    ues = fixed_ue_draw(scenario) if ues is None else ues
    return np.asarray(ues, dtype=float).reshape(-1, 2), np.asarray(sample_trajectory(scenario.trajectory))


def _finish(scenario: Scenario, spec: ObjectiveSpec, ues: np.ndarray, targets: np.ndarray,
            tx: np.ndarray, rx: np.ndarray, evaluations: int, method: str,
            history: List[float]) -> OracleResult:
    # best_value is recomputed with evaluate() so it matches the scalar path exactly
    deployment = Deployment.from_arrays(tx, rx)
    value = evaluate(deployment, ues, targets, spec).objective_value
    return OracleResult(best_deployment=deployment, best_value=value, evaluations=evaluations,
                        method=method, history=history)


def grid_evaluation_count(scenario: Scenario, grid_points_per_axis: int) -> int:
    return grid_points_per_axis ** (2 * scenario.num_aps)


def grid_oracle(scenario: Scenario, spec: ObjectiveSpec, grid_points_per_axis: int,
                ues: Optional[Sequence] = None, budget_cap: int = DEFAULT_BUDGET_CAP) -> OracleResult:
    """
    Exhaustive maximization over the joint grid of all AP coordinates

    Candidates are enumerated in lexicographic order of their coordinate tuple
    (tx pairs first) and only a strictly better value replaces the incumbent,
    so ties resolve to the lexicographically smallest tuple.

    Args:
        scenario: Scenario (UEs fixed by fixed_ue_draw unless given)
        spec: Objective spec
        grid_points_per_axis: G >= 2
        ues: Optional explicit UE positions
        budget_cap: Maximum number of evaluations

    Returns:
        OracleResult

    Raises:
        BudgetExceededError: when G**(2(M+N)) exceeds budget_cap
    """
    g = grid_points_per_axis
    if g < 2:
        raise ConfigError(f"solver.grid.points_per_axis must be >= 2, got {g}")
    dims = 2 * scenario.num_aps
    count = grid_evaluation_count(scenario, g)
    if count > budget_cap:
        raise BudgetExceededError(
            f"Grid oracle needs {count} evaluations ({g}^{dims}), cap is {budget_cap}"
        )
    if scenario.num_aps > 3 or g > 9:
        logger.warning("Grid oracle beyond the recommended size (M+N <= 3, G <= 9): %d evaluations", count)

    ues_a, targets = _problem(scenario, ues)
    r = scenario.region
    axis = [np.linspace(r.x_min, r.x_max, g), np.linspace(r.y_min, r.y_max, g)]
    for values, hi in zip(axis, (r.x_max, r.y_max)):
        values[-1] = hi
    m = scenario.num_tx

    best_value = -np.inf
    best_coords = None
    history: List[float] = []
    logger.info("Grid oracle: %d evaluations (G=%d, %d coordinates)", count, g, dims)
    for start in range(0, count, CHUNK_SIZE):
        idx = np.arange(start, min(start + CHUNK_SIZE, count))
        digits = np.unravel_index(idx, (g,) * dims)
        coords = np.stack([axis[d % 2][digits[d]] for d in range(dims)], axis=1).reshape(len(idx), -1, 2)
        values = evaluate_batch(coords[:, :m], coords[:, m:], ues_a, targets, spec)
        i = int(np.argmax(values))
        if values[i] > best_value:
            best_value = float(values[i])
            best_coords = coords[i].copy()
        history.append(best_value)
    return _finish(scenario, spec, ues_a, targets, best_coords[:m], best_coords[m:], count, "grid", history)


def random_search(scenario: Scenario, spec: ObjectiveSpec, budget: int, rng: np.random.Generator,
                  ues: Optional[Sequence] = None) -> OracleResult:
    """
    Best of `budget` deployments drawn uniformly in the region

    Draws are consumed from rng in order, so a larger budget extends the same
    candidate sequence and the result never gets worse.
    """
    if budget < 1:
        raise ConfigError(f"solver.random.budget must be >= 1, got {budget}")
    ues_a, targets = _problem(scenario, ues)
    dims = 2 * scenario.num_aps
    m = scenario.num_tx

    best_value = -np.inf
    best = None
    history: List[float] = []
    for start in range(0, budget, CHUNK_SIZE):
        n = min(CHUNK_SIZE, budget - start)
        actions = rng.uniform(-1.0, 1.0, size=(n, dims))
        tx, rx = decode_actions(actions, scenario.region, 0, m)
        values = evaluate_batch(tx, rx, ues_a, targets, spec)
        i = int(np.argmax(values))
        if values[i] > best_value:
            best_value = float(values[i])
            best = (tx[i].copy(), rx[i].copy())
        history.append(best_value)
    return _finish(scenario, spec, ues_a, targets, best[0], best[1], budget, "random", history)


def _scorer(scenario: Scenario, spec: ObjectiveSpec, ues: np.ndarray, targets: np.ndarray,
            grid_resolution: int) -> Callable[[np.ndarray], np.ndarray]:
    """Objective values of normalized action rows, evaluated in chunks"""
    def score(actions: np.ndarray) -> np.ndarray:
        values = np.empty(len(actions))
        for start in range(0, len(actions), CHUNK_SIZE):
            chunk = actions[start:start + CHUNK_SIZE]
            tx, rx = decode_actions(chunk, scenario.region, grid_resolution, scenario.num_tx)
            values[start:start + len(chunk)] = evaluate_batch(tx, rx, ues, targets, spec)
        return values
    return score


def refine_on_grid(x: np.ndarray, value: float, score: Callable[[np.ndarray], np.ndarray],
                   grid_resolution: int, num_aps: int) -> Tuple[np.ndarray, float, int]:
    """
    Block coordinate ascent over grid cells

    Each pass tries every cell for one AP at a time, then every pair of cells
    for each AP pair while that pass stays under PAIR_BLOCK_LIMIT evaluations.
    Only strict improvements are taken, so the loop ends at a point no block
    move can improve.

    Returns:
        (action, value, evaluations)
    """
    levels = np.linspace(-1.0, 1.0, grid_resolution)
    cells = np.array(list(itertools.product(levels, repeat=2)))
    blocks: List[Tuple[int, ...]] = [(j,) for j in range(num_aps)]
    pairs = list(itertools.combinations(range(num_aps), 2))
    if len(cells) ** 2 * len(pairs) <= PAIR_BLOCK_LIMIT:
        blocks += pairs

    evaluations = 0
    improved = True
    while improved:
        improved = False
        for block in blocks:
            choice = np.array(list(itertools.product(range(len(cells)), repeat=len(block))))
            candidates = np.repeat(x[None, :], len(choice), axis=0)
            for col, j in enumerate(block):
                candidates[:, 2 * j:2 * j + 2] = cells[choice[:, col]]
            values = score(candidates)
            evaluations += len(candidates)
            i = int(np.argmax(values))
            if values[i] > value:
                x, value, improved = candidates[i].copy(), float(values[i]), True
    return x, value, evaluations


def refine_continuous(x: np.ndarray, value: float, score: Callable[[np.ndarray], np.ndarray],
                      step: float, num_aps: int,
                      tolerance: float = REFINE_TOLERANCE) -> Tuple[np.ndarray, float, int]:
    """
    Compass search: move one AP along one of 8 directions, halve the step when nothing improves

    Returns:
        (action, value, evaluations)
    """
    compass = np.array([d for d in itertools.product((-1.0, 0.0, 1.0), repeat=2) if d != (0.0, 0.0)])
    moves = np.zeros((num_aps * len(compass), 2 * num_aps))
    for j in range(num_aps):
        moves[j * len(compass):(j + 1) * len(compass), 2 * j:2 * j + 2] = compass

    evaluations = 0
    rounds = 0
    while step > tolerance and rounds < REFINE_MAX_ROUNDS:
        rounds += 1
        candidates = np.clip(x + step * moves, -1.0, 1.0)
        values = score(candidates)
        evaluations += len(candidates)
        i = int(np.argmax(values))
        if values[i] > value:
            x, value = candidates[i].copy(), float(values[i])
        else:
            step *= 0.5
    return x, value, evaluations


def cem_optimize(scenario: Scenario, spec: ObjectiveSpec, cfg: CemConfig,
                 ues: Optional[Sequence] = None) -> OracleResult:
    """
    Cross-entropy method over normalized deployment vectors

    A diagonal Gaussian starts at the region center (normalized 0) with
    cfg.initial_std; each iteration samples cfg.population candidates, clips
    them into [-1, 1], evaluates them and refits mean/std to the elites. On a
    grid the std never drops below one cell width. With cfg.refine the best
    candidate is then polished by local search (refine_on_grid or
    refine_continuous) and one more history entry records the result.

    Args:
        scenario: Scenario
        spec: Objective spec
        cfg: CEM configuration
        ues: Optional explicit UE positions

    Returns:
        OracleResult with the best-ever candidate and its per-iteration history
    """
    rng = np.random.default_rng(cfg.seed)
    ues_a, targets = _problem(scenario, ues)
    dims = 2 * scenario.num_aps
    score = _scorer(scenario, spec, ues_a, targets, cfg.grid_resolution)

    std_floor = cfg.min_std
    if cfg.grid_resolution > 0:
        std_floor = max(std_floor, 2.0 / (cfg.grid_resolution - 1))

    mean = np.zeros(dims)
    std = np.full(dims, cfg.initial_std)
    best_value = -np.inf
    best = None
    history: List[float] = []
    for it in range(cfg.iterations):
        candidates = np.clip(mean + std * rng.standard_normal((cfg.population, dims)), -1.0, 1.0)
        values = score(candidates)

        i = int(np.argmax(values))
        if values[i] > best_value:
            best_value = float(values[i])
            best = candidates[i].copy()
        history.append(best_value)

        elite = candidates[np.argsort(-values, kind="stable")[:cfg.num_elite]]
        mean = elite.mean(axis=0)
        std = np.maximum(std_floor, cfg.std_decay * elite.std(axis=0))
        logger.debug("CEM iteration %d: best=%.6g elite_mean=%.6g mean_std=%.4g",
                     it, best_value, float(np.mean(np.sort(values)[::-1][:cfg.num_elite])), float(std.mean()))

    evaluations = cfg.population * cfg.iterations
    if cfg.refine:
        if cfg.grid_resolution > 0:
            best, best_value, extra = refine_on_grid(best, best_value, score, cfg.grid_resolution,
                                                     scenario.num_aps)
        else:
            step = max(float(std.max()), REFINE_START_STEP)
            best, best_value, extra = refine_continuous(best, best_value, score, step, scenario.num_aps)
        evaluations += extra
        history.append(best_value)
        logger.info("CEM refinement: %d extra evaluations, best=%.6g", extra, best_value)

    tx, rx = decode_actions(best[None, :], scenario.region, cfg.grid_resolution, scenario.num_tx)
    return _finish(scenario, spec, ues_a, targets, tx[0], rx[0], evaluations, "cem", history)
