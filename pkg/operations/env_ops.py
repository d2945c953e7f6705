"""
Environment operations for the AP deployment optimizer
Category 3: One-step MDP over deployments (state encoding, action decoding, rewards)
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from operations.metric_ops import MetricReport, ObjectiveSpec, evaluate, objective_value
from operations.scenario_ops import (
    ConfigError, Deployment, Point2D, Region, Scenario, sample_trajectory, sample_ues,
)

logger = logging.getLogger(__name__)


class RewardTransform(str, Enum):
    IDENTITY = "identity"
    LOG1P = "log1p"

    def apply(self, value: float) -> float:
        if self is RewardTransform.LOG1P:
            return math.log1p(value)
        return value


@dataclass(frozen=True)
class EnvConfig:
    """Scenario, objective and action discretization for the environment"""
    scenario: Scenario
    objective: ObjectiveSpec
    grid_resolution: int = 0
    reward_transform: RewardTransform = RewardTransform.LOG1P

    def __post_init__(self):
        if self.grid_resolution < 0 or self.grid_resolution == 1:
            raise ConfigError(
                f"env.grid_resolution must be 0 (continuous) or >= 2, got {self.grid_resolution}"
            )
        try:
            object.__setattr__(self, "reward_transform", RewardTransform(self.reward_transform))
        except ValueError:
            raise ConfigError(
                f"Invalid env.reward_transform: {self.reward_transform!r}. Use: ['identity', 'log1p']"
            )

    @property
    def state_dim(self) -> int:
        return 2 * self.scenario.ue_spec.count + 2

    @property
    def action_dim(self) -> int:
        return 2 * self.scenario.num_aps


@dataclass(frozen=True)
class Transition:
    """One replay record"""
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool = True

    def __post_init__(self):
        if not math.isfinite(self.reward):
            raise ValueError(f"Transition reward must be finite, got {self.reward}")


def _normalize(points: np.ndarray, region: Region) -> np.ndarray:
    c = np.array(region.center)
    h = np.array(region.half_extent)
    return np.clip((points - c) / h, -1.0, 1.0)


def encode_state(ues: Sequence, target_center: Sequence[float], region: Region) -> np.ndarray:
    """
    Encode UE positions and the trajectory center as a state vector

    Args:
        ues: K UE positions
        target_center: Trajectory center
        region: Region used for normalization

    Returns:
        Vector of 2K + 2 entries in [-1, 1]
    """
    pts = np.vstack([np.asarray(ues, dtype=float).reshape(-1, 2),
                     np.asarray(target_center, dtype=float).reshape(1, 2)])
    return _normalize(pts, region).reshape(-1)


def _snap(values: np.ndarray, lo: float, hi: float, grid_resolution: int) -> np.ndarray:
    step = (hi - lo) / (grid_resolution - 1)
    idx = np.clip(np.floor((values - lo) / step + 0.5), 0, grid_resolution - 1)
    return np.where(idx == grid_resolution - 1, hi, lo + idx * step)


def decode_actions(actions: np.ndarray, region: Region, grid_resolution: int,
                   num_tx: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Batched decode of normalized actions

    Args:
        actions: (B, 2(M+N)) entries in [-1, 1]
        region: Deployment region
        grid_resolution: 0 for continuous, otherwise grid values per axis
        num_tx: Number of transmitter pairs at the front of each row

    Returns:
        (tx (B, M, 2), rx (B, N, 2)) coordinates inside the region
    """
    a = np.clip(np.asarray(actions, dtype=float), -1.0, 1.0)
    pairs = a.reshape(a.shape[0], -1, 2)
    t = 0.5 * (pairs + 1.0)
    xs = np.where(pairs[..., 0] >= 1.0, region.x_max, region.x_min + t[..., 0] * (region.x_max - region.x_min))
    ys = np.where(pairs[..., 1] >= 1.0, region.y_max, region.y_min + t[..., 1] * (region.y_max - region.y_min))
    xs = np.clip(xs, region.x_min, region.x_max)
    ys = np.clip(ys, region.y_min, region.y_max)
    if grid_resolution > 0:
        xs = _snap(xs, region.x_min, region.x_max, grid_resolution)
        ys = _snap(ys, region.y_min, region.y_max, grid_resolution)
    coords = np.stack([xs, ys], axis=-1)
    return coords[:, :num_tx], coords[:, num_tx:]


def decode_action(a: Sequence[float], region: Region, grid_resolution: int = 0, *,
                  num_tx: int) -> Deployment:
    """
    Map a normalized action onto AP coordinates

    Args:
        a: 2(M+N) entries in [-1, 1], tx coordinate pairs first
        region: Deployment region
        grid_resolution: 0 for continuous, otherwise number of grid values per axis
        num_tx: Number of transmitter pairs at the front of the vector

    Returns:
        Deployment inside the region

    Raises:
        ValueError: when the width is odd or leaves no receiver pair
    """
    a = np.asarray(a, dtype=float).reshape(1, -1)
    pairs, odd = divmod(a.shape[1], 2)
    if odd or not 1 <= num_tx < pairs:
        raise ValueError(f"Action of width {a.shape[1]} cannot hold {num_tx} tx pairs and at least one rx pair")
    tx, rx = decode_actions(a, region, grid_resolution, num_tx)
    return Deployment.from_arrays(tx[0], rx[0])


def encode_deployment(deployment: Deployment, region: Region) -> np.ndarray:
    """Inverse of decode_action in continuous mode"""
    coords = np.vstack([deployment.tx_array, deployment.rx_array])
    lo = np.array([region.x_min, region.y_min])
    width = np.array([region.x_max - region.x_min, region.y_max - region.y_min])
    return np.clip(2.0 * (coords - lo) / width - 1.0, -1.0, 1.0).reshape(-1)


class DeploymentEnv:
    """
    Contextual-bandit environment: observe UEs and target, place all APs, get one reward

    Every episode lasts one step. Randomness only comes from the generator
    passed to reset/step.
    """

    def __init__(self, config: EnvConfig, record_trace: bool = False):
        self.config = config
        self.scenario = config.scenario
        self.region = config.scenario.region
        self.trajectory_points: List[Point2D] = sample_trajectory(config.scenario.trajectory)
        self.record_trace = record_trace
        self.trace: List[Dict[str, Any]] = []
        self.episode = 0
        self.last_report: Optional[MetricReport] = None
        self._ues: Optional[List[Point2D]] = None
        self._state: Optional[np.ndarray] = None

    @property
    def state_dim(self) -> int:
        return self.config.state_dim

    @property
    def action_dim(self) -> int:
        return self.config.action_dim

    @property
    def ues(self) -> List[Point2D]:
        if self._ues is None:
            raise RuntimeError("Environment has not been reset")
        return list(self._ues)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        """
        Start an episode with a fresh UE draw

        Args:
            rng: Seeded generator

        Returns:
            Encoded state
        """
        self._ues = sample_ues(self.scenario.ue_spec, rng, self.region)
        self._state = encode_state(self._ues, self.scenario.trajectory.center, self.region)
        return self._state.copy()

    def decode(self, action: Sequence[float]) -> Deployment:
        return decode_action(action, self.region, self.config.grid_resolution, num_tx=self.scenario.num_tx)

    def evaluate_action(self, action: Sequence[float]) -> MetricReport:
        """Metric report of an action under the current UE draw"""
        return evaluate(self.decode(action), self.ues, self.trajectory_points, self.config.objective)

    def step(self, state: np.ndarray, action: Sequence[float],
             rng: np.random.Generator) -> Tuple[float, np.ndarray, bool]:
        """
        Apply an action to the current state

        Args:
            state: State returned by the last reset
            action: Normalized action
            rng: Generator used to reset for the next episode

        Returns:
            (reward, next_state, done); done is always True
        """
        if self._state is None or not np.array_equal(np.asarray(state), self._state):
            raise ValueError("step() called with a state not produced by this environment")
        action = np.asarray(action, dtype=float)
        if action.shape != (self.action_dim,):
            raise ValueError(f"Action must have shape ({self.action_dim},), got {action.shape}")

        deployment = self.decode(action)
        report = evaluate(deployment, self._ues, self.trajectory_points, self.config.objective)
        raw = objective_value(report, self.config.objective, scaled=False)
        reward = self.config.reward_transform.apply(raw)
        self.last_report = report

        if self.record_trace:
            row = {"episode": self.episode, "reward": reward}
            for role, points in (("tx", deployment.tx), ("rx", deployment.rx)):
                for i, p in enumerate(points):
                    row[f"{role}_{i}_x"] = p.x
                    row[f"{role}_{i}_y"] = p.y
            self.trace.append(row)
        self.episode += 1

        next_state = self.reset(rng)
        return reward, next_state, True
