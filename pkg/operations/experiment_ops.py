"""
Experiment operations for the AP deployment optimizer
Pipelines behind the CLI: evaluate, train, oracle, compare and sweep
"""

import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from operations.baseline_ops import (
    OracleResult, cem_optimize, grid_evaluation_count, grid_oracle, random_search,
)
from operations.config_ops import ExperimentConfig, config_to_document, load_config, with_overrides
from operations.env_ops import DeploymentEnv, encode_state
from operations.metric_ops import MetricReport, ObjectiveKind, evaluate
from operations.report_ops import (
    BAND_COLUMNS, COMPARE_COLUMNS, CURVE_COLUMNS, SWEEP_COLUMNS, RunManifest, append_csv_row, curve_rows,
    render_deployment_svg, seed_band_rows, start_csv, write_csv, write_json, write_manifest, write_svg,
)
from operations.sac_ops import (
    AgentState, LearningCurvePoint, greedy_action, save_checkpoint, train,
)
from operations.scenario_ops import (
    ConfigError, Deployment, deployment_to_dict, fixed_ue_draw, load_deployment,
    sample_trajectory, validate_scenario,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

COMPARE_METHODS = ("sac", "cem", "random", "grid")


@dataclass
class SolverOutcome:
    """Deployment produced by one solver run and its metrics on the fixed UE draw"""
    method: str
    deployment: Deployment
    report: MetricReport
    evaluations: int
    wall_time: float
    curve: List[LearningCurvePoint] = field(default_factory=list)
    agent: Optional[AgentState] = None
    oracle: Optional[OracleResult] = None
    trace: List[Dict[str, Any]] = field(default_factory=list)


@dataclass
class CommandResult:
    manifest: RunManifest
    payload: Any


def _elapsed(t0: float, record_timing: bool) -> float:
    return round(time.perf_counter() - t0, 6) if record_timing else 0.0


def prepare_config(config_path: PathLike, seed: Optional[int] = None, objective: Optional[str] = None,
                   solver: Optional[str] = None,
                   allow_degenerate: bool = False) -> Tuple[ExperimentConfig, Dict[str, Any]]:
    """
    Read a config file and apply CLI overrides

    Args:
        config_path: TOML experiment document
        seed: Optional seed override
        objective: Optional objective kind override
        solver: Optional solver name override
        allow_degenerate: Accept num_tx + num_rx < 3

    Returns:
        (config, overrides actually applied)
    """
    text = Path(config_path).read_text(encoding="utf-8")
    config = load_config(text, allow_degenerate=allow_degenerate)
    overrides = {k: v for k, v in (("seed", seed), ("objective", objective), ("solver", solver)) if v is not None}
    return with_overrides(config, **overrides), overrides


class RunRecorder:
    """Writes the manifest before any result and keeps it current"""

    def __init__(self, command: str, config: ExperimentConfig, overrides: Dict[str, Any],
                 out_dir: PathLike, record_timing: Optional[bool] = None):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.record_timing = config.report.record_timing if record_timing is None else record_timing
        self.manifest = RunManifest(
            command=command,
            seed=config.seed,
            config=config_to_document(config),
            overrides=dict(overrides),
        )
        self._t0 = time.perf_counter()
        write_manifest(self.out_dir, self.manifest)
        logger.info("Starting %s (seed=%d) -> %s", command, config.seed, self.out_dir)

    def path(self, name: str) -> Path:
        if name not in self.manifest.outputs:
            self.manifest.outputs.append(name)
        return self.out_dir / name

    def elapsed(self, t0: float) -> float:
        return _elapsed(t0, self.record_timing)

    def finish(self, **timings: float) -> RunManifest:
        self.manifest.timings = {**timings, "total": self.elapsed(self._t0)}
        self.manifest.status = "complete"
        write_manifest(self.out_dir, self.manifest)
        logger.info("Finished %s: %d outputs", self.manifest.command, len(self.manifest.outputs))
        return self.manifest


def run_solver(config: ExperimentConfig, method: Optional[str] = None, progress: bool = False,
               record_trace: bool = False, record_timing: bool = True) -> SolverOutcome:
    """
    Run one solver on the configured scenario

    Every method is scored on the same fixed UE draw (fixed_ue_draw) so their
    values are directly comparable.

    Args:
        config: Experiment config
        method: sac, cem, random or grid (default: config.solver.name)
        progress: Show progress bars
        record_trace: Keep the per-step environment trace (sac only)
        record_timing: Measure wall time (0.0 otherwise)

    Returns:
        SolverOutcome
    """
    method = method or config.solver.name
    scenario = config.scenario
    objective = config.objective
    ues = fixed_ue_draw(scenario)
    trajectory_points = sample_trajectory(scenario.trajectory)
    t0 = time.perf_counter()

    outcome_extra: Dict[str, Any] = {}
    if method == "sac":
        env = DeploymentEnv(config.env_config(), record_trace=record_trace)
        agent, curve = train(env, config.solver.sac, progress=progress)
        state = encode_state(ues, scenario.trajectory.center, scenario.region)
        deployment = env.decode(greedy_action(agent, state))
        evaluations = config.solver.sac.total_steps
        outcome_extra = {"curve": curve, "agent": agent, "trace": env.trace}
    else:
        if method == "cem":
            result = cem_optimize(scenario, objective, config.solver.cem, ues=ues)
        elif method == "random":
            result = random_search(scenario, objective, config.solver.random_budget,
                                   np.random.default_rng(config.seed), ues=ues)
        elif method == "grid":
            result = grid_oracle(scenario, objective, config.solver.grid_points, ues=ues,
                                 budget_cap=config.solver.grid_budget_cap)
        else:
            raise ConfigError(f"Unknown solver: {method}")
        deployment = result.best_deployment
        evaluations = result.evaluations
        outcome_extra = {"oracle": result}

    report = evaluate(deployment, ues, trajectory_points, objective)
    wall_time = _elapsed(t0, record_timing)
    logger.info("%s: objective=%.6g after %d evaluations", method, report.objective_value, evaluations)
    return SolverOutcome(method=method, deployment=deployment, report=report, evaluations=evaluations,
                         wall_time=wall_time, **outcome_extra)


def _svg(config: ExperimentConfig, deployment: Deployment, title: str) -> str:
    scenario = config.scenario
    return render_deployment_svg(scenario, deployment, fixed_ue_draw(scenario),
                                 sample_trajectory(scenario.trajectory), config.report.svg_size, title)


def cmd_evaluate(config_path: PathLike, deployment_path: PathLike, out_dir: PathLike,
                 seed: Optional[int] = None, objective: Optional[str] = None,
                 record_timing: Optional[bool] = None) -> CommandResult:
    """
    Score a deployment file under the configured objective

    Writes evaluation.json (full MetricReport) and evaluation.csv (one row).
    Scenarios with num_tx + num_rx < 3 are accepted here with a warning.
    """
    config, overrides = prepare_config(config_path, seed=seed, objective=objective, allow_degenerate=True)
    deployment = load_deployment(Path(deployment_path).read_text(encoding="utf-8"), config.scenario)
    run = RunRecorder("evaluate", config, overrides, out_dir, record_timing)
    t0 = time.perf_counter()

    scenario = config.scenario
    report = evaluate(deployment, fixed_ue_draw(scenario), sample_trajectory(scenario.trajectory), config.objective)
    write_json(run.path("evaluation.json"), {
        "deployment": deployment_to_dict(deployment),
        "metrics": report.to_dict(),
    })
    write_csv(run.path("evaluation.csv"), [report.to_row()])
    manifest = run.finish(evaluate=run.elapsed(t0))
    return CommandResult(manifest, report)


def cmd_train(config_path: PathLike, out_dir: PathLike, seed: Optional[int] = None,
              objective: Optional[str] = None, record_timing: Optional[bool] = None,
              trace: bool = False, progress: bool = False) -> CommandResult:
    """
    Train the SAC agent and emit its artifacts

    Outputs: checkpoint.json, learning_curve.csv, deployment.svg, report.json
    and, with trace=True, trace.csv (one row per environment step).
    """
    config, overrides = prepare_config(config_path, seed=seed, objective=objective)
    run = RunRecorder("train", config, overrides, out_dir, record_timing)

    outcome = run_solver(config, "sac", progress=progress, record_trace=trace, record_timing=run.record_timing)
    write_json(run.path("checkpoint.json"), save_checkpoint(outcome.agent, config.solver.sac))
    write_csv(run.path("learning_curve.csv"), curve_rows(outcome.curve), CURVE_COLUMNS)
    write_svg(run.path("deployment.svg"), _svg(config, outcome.deployment, "sac"))
    write_json(run.path("report.json"), {
        "method": "sac",
        "evaluations": outcome.evaluations,
        "final_eval_reward": outcome.curve[-1].eval_reward if outcome.curve else None,
        "deployment": deployment_to_dict(outcome.deployment),
        "metrics": outcome.report.to_dict(),
        "wall_time": outcome.wall_time,
    })
    if trace:
        trace_columns = list(outcome.trace[0].keys()) if outcome.trace else ["episode", "reward"]
        write_csv(run.path("trace.csv"), outcome.trace, trace_columns)
    manifest = run.finish(train=outcome.wall_time)
    return CommandResult(manifest, outcome)


def cmd_oracle(config_path: PathLike, out_dir: PathLike, seed: Optional[int] = None,
               objective: Optional[str] = None, solver: Optional[str] = None,
               record_timing: Optional[bool] = None) -> CommandResult:
    """
    Run a baseline (grid unless the configured solver is cem or random)

    Outputs: oracle.json (OracleResult plus metrics) and deployment.svg.
    """
    config, overrides = prepare_config(config_path, seed=seed, objective=objective, solver=solver)
    method = config.solver.name if config.solver.name in ("cem", "random", "grid") else "grid"
    run = RunRecorder("oracle", config, overrides, out_dir, record_timing)

    outcome = run_solver(config, method, record_timing=run.record_timing)
    write_json(run.path("oracle.json"), {
        **outcome.oracle.to_dict(),
        "metrics": outcome.report.to_dict(),
        "wall_time": outcome.wall_time,
    })
    write_svg(run.path("deployment.svg"), _svg(config, outcome.deployment, method))
    manifest = run.finish(oracle=outcome.wall_time)
    return CommandResult(manifest, outcome.oracle)


def cmd_compare(config_path: PathLike, out_dir: PathLike, seed: Optional[int] = None,
                objective: Optional[str] = None, record_timing: Optional[bool] = None,
                progress: bool = False) -> CommandResult:
    """
    Run every solver on the same scenario and tabulate the results

    Outputs: compare.csv plus deployment_<method>.svg per method run. The grid
    oracle is skipped with a warning when it would exceed its budget cap.
    """
    config, overrides = prepare_config(config_path, seed=seed, objective=objective)
    run = RunRecorder("compare", config, overrides, out_dir, record_timing)

    rows = []
    timings = {}
    for method in COMPARE_METHODS:
        if method == "grid":
            count = grid_evaluation_count(config.scenario, config.solver.grid_points)
            if count > config.solver.grid_budget_cap:
                logger.warning("Skipping grid oracle: %d evaluations exceed the cap of %d",
                               count, config.solver.grid_budget_cap)
                continue
        outcome = run_solver(config, method, progress=progress, record_timing=run.record_timing)
        rows.append({
            "method": method,
            "objective_kind": config.objective.kind.value,
            "value": outcome.report.objective_value,
            "evaluations": outcome.evaluations,
            "wall_time": outcome.wall_time,
        })
        timings[method] = outcome.wall_time
        write_svg(run.path(f"deployment_{method}.svg"), _svg(config, outcome.deployment, method))
    write_csv(run.path("compare.csv"), rows, COMPARE_COLUMNS)
    manifest = run.finish(**timings)
    return CommandResult(manifest, pd.DataFrame(rows, columns=COMPARE_COLUMNS))


Cell = Tuple[int, int, ObjectiveKind, int]


def sweep_cells(config: ExperimentConfig) -> List[Cell]:
    """
    Cells of the configured sweep in deterministic order (AP pairs outer, then objectives, seeds inner)

    Raises:
        ConfigError: when the config carries no sweep
    """
    if config.sweep is None:
        raise ConfigError("empty sweep: the config has no [sweep] table")
    pairs = config.sweep.ap_pairs or ((config.scenario.num_tx, config.scenario.num_rx),)
    kinds = config.sweep.objectives or (config.objective.kind,)
    seeds = config.sweep.seeds or (config.seed,)
    return [(m, n, k, s) for m, n in pairs for k in kinds for s in seeds]


def cell_config(config: ExperimentConfig, m: int, n: int, kind: ObjectiveKind,
                seed: Optional[int] = None) -> ExperimentConfig:
    scenario = dataclasses.replace(config.scenario, num_tx=m, num_rx=n)
    validate_scenario(scenario, allow_degenerate=True)
    cell = dataclasses.replace(config, scenario=scenario,
                               objective=dataclasses.replace(config.objective, kind=kind))
    return with_overrides(cell, seed=seed)


def curve_file(m: int, n: int, kind: ObjectiveKind, seed: Optional[int] = None) -> str:
    stem = f"m{m}_n{n}_{ObjectiveKind(kind).value}"
    return f"curve_band_{stem}.csv" if seed is None else f"curve_{stem}_seed{seed}.csv"


def _run_cell(job: Tuple[ExperimentConfig, Cell, bool]) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    config, (m, n, kind, seed), record_timing = job
    cell = cell_config(config, m, n, kind, seed)
    outcome = run_solver(cell, record_timing=record_timing)
    r = outcome.report
    row = {
        "m": m,
        "n": n,
        "objective_kind": ObjectiveKind(kind).value,
        "solver": outcome.method,
        "seed": cell.seed,
        "mean_rate": r.mean_rate,
        "mean_fim_det": r.mean_fim_det,
        "min_rate": r.min_rate,
        "min_fim_det": r.min_fim_det,
        "objective_value": r.objective_value,
        "evaluations": outcome.evaluations,
        "wall_time": outcome.wall_time,
    }
    return row, curve_rows(outcome.curve)


def cmd_sweep(config_path: PathLike, out_dir: PathLike, seed: Optional[int] = None,
              solver: Optional[str] = None, record_timing: Optional[bool] = None,
              workers: int = 1, progress: bool = False) -> CommandResult:
    """
    Run the configured solver on every sweep cell

    sweep.csv gets its header first and one row per finished cell, in cell
    order, so partial results survive an interrupted sweep. SAC cells also
    write their learning curve (curve_m<M>_n<N>_<kind>_seed<S>.csv) and, once
    every seed of an (M, N, kind) group is done, the per-step mean/min/max
    band over those seeds (curve_band_m<M>_n<N>_<kind>.csv).

    Args:
        config_path: TOML experiment document with a [sweep] table
        out_dir: Output directory
        seed: Optional seed override (ignored for cells when [sweep] lists seeds)
        solver: Optional solver override
        record_timing: Override the config's report.record_timing
        workers: Worker processes (1 runs in-process)
        progress: Show a progress bar over cells

    Returns:
        CommandResult whose payload is the sweep DataFrame
    """
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    config, overrides = prepare_config(config_path, seed=seed, solver=solver)
    cells = sweep_cells(config)
    run = RunRecorder("sweep", config, overrides, out_dir, record_timing)
    t0 = time.perf_counter()

    csv_path = start_csv(run.path("sweep.csv"), SWEEP_COLUMNS)
    jobs = [(config, cell, run.record_timing) for cell in cells]
    logger.info("Sweep: %d cells with solver %s, %d worker(s)", len(jobs), config.solver.name, workers)

    rows = []
    curves: Dict[Tuple[int, int, ObjectiveKind], List[List[Dict[str, Any]]]] = {}
    bar = tqdm(total=len(jobs), disable=not progress, desc="sweep", unit="cell")

    def collect(cell: Cell, row: Dict[str, Any], curve: List[Dict[str, Any]]) -> None:
        append_csv_row(csv_path, row, SWEEP_COLUMNS)
        rows.append(row)
        if curve:
            m, n, kind, _ = cell
            write_csv(run.path(curve_file(m, n, kind, row["seed"])), curve, CURVE_COLUMNS)
            curves.setdefault((m, n, kind), []).append(curve)
        bar.update(1)

    if workers == 1:
        for cell, (row, curve) in zip(cells, map(_run_cell, jobs)):
            collect(cell, row, curve)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map yields in submission order; files are written only from this process
            for cell, (row, curve) in zip(cells, pool.map(_run_cell, jobs)):
                collect(cell, row, curve)
    bar.close()

    for (m, n, kind), group in curves.items():
        write_csv(run.path(curve_file(m, n, kind)), seed_band_rows(group), BAND_COLUMNS)

    manifest = run.finish(sweep=run.elapsed(t0))
    return CommandResult(manifest, pd.DataFrame(rows, columns=SWEEP_COLUMNS))
