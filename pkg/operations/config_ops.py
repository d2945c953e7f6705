"""
Configuration operations for the AP deployment optimizer
Experiment documents: scenario + objective + environment + solver + sweep + report options
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import toml

from operations.baseline_ops import DEFAULT_BUDGET_CAP, CemConfig
from operations.env_ops import EnvConfig, RewardTransform
from operations.metric_ops import ObjectiveKind, ObjectiveSpec
from operations.sac_ops import SacConfig
from operations.scenario_ops import (
    ConfigError, Scenario, check_keys, parse_document, scenario_from_document, scenario_to_document,
)

logger = logging.getLogger(__name__)

SOLVERS = ("sac", "cem", "random", "grid")

_SAC_KEYS = tuple(f.name for f in dataclasses.fields(SacConfig) if f.name != "seed")
_CEM_KEYS = tuple(f.name for f in dataclasses.fields(CemConfig) if f.name != "seed")


@dataclass(frozen=True)
class SweepSpec:
    """AP-count pairs, objective kinds and/or seeds to sweep over"""
    ap_pairs: Tuple[Tuple[int, int], ...] = ()
    objectives: Tuple[ObjectiveKind, ...] = ()
    seeds: Tuple[int, ...] = ()

    def __post_init__(self):
        if not self.ap_pairs and not self.objectives and not self.seeds:
            raise ConfigError("sweep must list at least one of 'ap_pairs', 'objectives' or 'seeds'")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"sweep.seeds must be distinct, got {list(self.seeds)}")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        pairs = []
        for i, pair in enumerate(self.ap_pairs):
            try:
                m, n = (int(v) for v in pair)
            except (TypeError, ValueError):
                raise ConfigError(f"sweep.ap_pairs[{i}] must be a pair [num_tx, num_rx], got {pair!r}")
            if m < 1 or n < 1:
                raise ConfigError(f"sweep.ap_pairs[{i}] needs num_tx >= 1 and num_rx >= 1, got {pair!r}")
            pairs.append((m, n))
        object.__setattr__(self, "ap_pairs", tuple(pairs))
        kinds = []
        for k in self.objectives:
            try:
                kinds.append(ObjectiveKind(k))
            except ValueError:
                raise ConfigError(f"Invalid sweep objective {k!r}. Use: {[o.value for o in ObjectiveKind]}")
        object.__setattr__(self, "objectives", tuple(kinds))


@dataclass(frozen=True)
class SolverSpec:
    name: str = "sac"
    sac: SacConfig = field(default_factory=SacConfig)
    cem: CemConfig = field(default_factory=CemConfig)
    random_budget: int = 100_000
    grid_points: int = 9
    grid_budget_cap: int = DEFAULT_BUDGET_CAP

    def __post_init__(self):
        if self.name not in SOLVERS:
            raise ConfigError(f"Invalid solver.name: {self.name!r}. Use: {list(SOLVERS)}")


@dataclass(frozen=True)
class ReportOptions:
    record_timing: bool = True
    svg_size: int = 600


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run needs, parsed from a single TOML document"""
    scenario: Scenario
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    grid_resolution: int = 0
    reward_transform: RewardTransform = RewardTransform.LOG1P
    solver: SolverSpec = field(default_factory=SolverSpec)
    sweep: Optional[SweepSpec] = None
    report: ReportOptions = field(default_factory=ReportOptions)

    @property
    def seed(self) -> int:
        return self.scenario.seed

    def env_config(self) -> EnvConfig:
        return EnvConfig(self.scenario, self.objective, self.grid_resolution, self.reward_transform)


def _table(doc: Dict[str, Any], key: str, allowed, path: str) -> Dict[str, Any]:
    table = doc.get(key, {})
    if not isinstance(table, dict):
        raise ConfigError(f"'{path}' must be a table")
    check_keys(table, allowed, path)
    return table


def _build(cls, values: Dict[str, Any], path: str):
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"Invalid '{path}' section: {e}")


def config_from_document(doc: Dict[str, Any], allow_degenerate: bool = False) -> ExperimentConfig:
    """
    Build an ExperimentConfig from a parsed document

    Args:
        doc: Output of parse_document
        allow_degenerate: Accept num_tx + num_rx < 3

    Returns:
        ExperimentConfig
    """
    scenario = scenario_from_document(doc, allow_degenerate=allow_degenerate)
    seed = scenario.seed

    objective = _build(ObjectiveSpec, _table(
        doc, "objective", ("kind", "weight", "log_base", "distance_floor", "aggregation"), "objective"
    ), "objective")

    env_t = _table(doc, "env", ("grid_resolution", "reward_transform"), "env")

    solver_t = _table(doc, "solver", ("name", "sac", "cem", "random", "grid"), "solver")
    sac_t = _table(solver_t, "sac", _SAC_KEYS, "solver.sac")
    if "hidden_sizes" in sac_t:
        sac_t = {**sac_t, "hidden_sizes": tuple(sac_t["hidden_sizes"])}
    cem_t = _table(solver_t, "cem", _CEM_KEYS, "solver.cem")
    random_t = _table(solver_t, "random", ("budget",), "solver.random")
    grid_t = _table(solver_t, "grid", ("points_per_axis", "budget_cap"), "solver.grid")
    solver = SolverSpec(
        name=solver_t.get("name", "sac"),
        sac=_build(SacConfig, {**sac_t, "seed": seed}, "solver.sac"),
        cem=_build(CemConfig, {**cem_t, "seed": seed}, "solver.cem"),
        random_budget=int(random_t.get("budget", 100_000)),
        grid_points=int(grid_t.get("points_per_axis", 9)),
        grid_budget_cap=int(grid_t.get("budget_cap", DEFAULT_BUDGET_CAP)),
    )

    sweep = None
    if "sweep" in doc:
        sweep_t = _table(doc, "sweep", ("ap_pairs", "objectives", "seeds"), "sweep")
        sweep = SweepSpec(
            ap_pairs=tuple(tuple(p) for p in sweep_t.get("ap_pairs", [])),
            objectives=tuple(sweep_t.get("objectives", [])),
            seeds=tuple(sweep_t.get("seeds", [])),
        )

    report_t = _table(doc, "report", ("record_timing", "svg_size"), "report")
    report = _build(ReportOptions, report_t, "report")

    config = ExperimentConfig(
        scenario=scenario,
        objective=objective,
        grid_resolution=int(env_t.get("grid_resolution", 0)),
        reward_transform=env_t.get("reward_transform", RewardTransform.LOG1P.value),
        solver=solver,
        sweep=sweep,
        report=report,
    )
    config.env_config()  # validates grid_resolution and reward_transform
    return dataclasses.replace(config, reward_transform=RewardTransform(config.reward_transform))


def load_config(config_text: str, allow_degenerate: bool = False) -> ExperimentConfig:
    """Parse and validate a full experiment document"""
    return config_from_document(parse_document(config_text), allow_degenerate=allow_degenerate)


def with_overrides(config: ExperimentConfig, seed: Optional[int] = None, objective: Optional[str] = None,
                   solver: Optional[str] = None) -> ExperimentConfig:
    """
    Apply CLI overrides; every seeded component follows an overridden seed

    Args:
        config: Parsed config
        seed: New seed
        objective: New objective kind
        solver: New solver name

    Returns:
        Updated ExperimentConfig
    """
    if seed is not None:
        config = dataclasses.replace(
            config,
            scenario=dataclasses.replace(config.scenario, seed=seed),
            solver=dataclasses.replace(
                config.solver,
                sac=dataclasses.replace(config.solver.sac, seed=seed),
                cem=dataclasses.replace(config.solver.cem, seed=seed),
            ),
        )
    if objective is not None:
        config = dataclasses.replace(config, objective=dataclasses.replace(config.objective, kind=objective))
    if solver is not None:
        config = dataclasses.replace(config, solver=dataclasses.replace(config.solver, name=solver))
    return config


def config_to_document(config: ExperimentConfig) -> Dict[str, Any]:
    """Nested dict accepted by config_from_document"""
    doc = scenario_to_document(config.scenario)
    o = config.objective
    doc["objective"] = {
        "kind": o.kind.value, "weight": o.weight, "log_base": o.log_base,
        "distance_floor": o.distance_floor, "aggregation": o.aggregation.value,
    }
    doc["env"] = {"grid_resolution": config.grid_resolution,
                  "reward_transform": RewardTransform(config.reward_transform).value}
    sac = {k: v for k, v in dataclasses.asdict(config.solver.sac).items() if k != "seed" and v is not None}
    sac["hidden_sizes"] = list(sac["hidden_sizes"])
    cem = {k: v for k, v in dataclasses.asdict(config.solver.cem).items() if k != "seed"}
    doc["solver"] = {
        "name": config.solver.name,
        "sac": sac,
        "cem": cem,
        "random": {"budget": config.solver.random_budget},
        "grid": {"points_per_axis": config.solver.grid_points, "budget_cap": config.solver.grid_budget_cap},
    }
    if config.sweep is not None:
        doc["sweep"] = {
            "ap_pairs": [list(p) for p in config.sweep.ap_pairs],
            "objectives": [k.value for k in config.sweep.objectives],
            "seeds": list(config.sweep.seeds),
        }
    doc["report"] = dataclasses.asdict(config.report)
    return doc


def render_config(config: ExperimentConfig) -> str:
    return toml.dumps(config_to_document(config))
