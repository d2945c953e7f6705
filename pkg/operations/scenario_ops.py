"""
Scenario operations for the AP deployment optimizer
Category 1: Geometry, trajectory sampling, UE placement and scenario ingestion
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import toml

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Every key the experiment document may carry at top level
TOP_LEVEL_KEYS = (
    "schema_version", "seed", "region", "trajectory", "ue_spec", "counts",
    "objective", "env", "solver", "sweep", "report",
)


class ConfigError(ValueError):
    """Raised when a configuration document fails to parse or validate"""
    pass


class DeploymentError(ValueError):
    """Raised when a deployment is malformed or leaves the region"""
    pass


class Point2D(NamedTuple):
    """A point in the deployment plane (meters)"""
    x: float
    y: float


@dataclass(frozen=True)
class Region:
    """Axis-aligned deployment area"""
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "x_max", "y_min", "y_max"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"region.{name} must be finite")
        if not self.x_min < self.x_max:
            raise ConfigError(f"region.x_min ({self.x_min}) must be < region.x_max ({self.x_max})")
        if not self.y_min < self.y_max:
            raise ConfigError(f"region.y_min ({self.y_min}) must be < region.y_max ({self.y_max})")

    @property
    def center(self) -> Point2D:
        return Point2D(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    @property
    def half_extent(self) -> Tuple[float, float]:
        return 0.5 * (self.x_max - self.x_min), 0.5 * (self.y_max - self.y_min)

    def contains(self, p: Sequence[float]) -> bool:
        return self.x_min <= p[0] <= self.x_max and self.y_min <= p[1] <= self.y_max


@dataclass(frozen=True)
class CircularTrajectory:
    """Circular target path sampled at Q points uniform in angle"""
    center: Point2D
    radius: float
    sample_count: int

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ConfigError(f"trajectory.radius must be > 0, got {self.radius}")
        if self.sample_count < 1:
            raise ConfigError(f"trajectory.sample_count must be >= 1, got {self.sample_count}")


@dataclass(frozen=True)
class UEPlacementSpec:
    """Gaussian placement of K UEs around fixed centers"""
    centers: Tuple[Point2D, ...]
    variance: float = 2.0

    def __post_init__(self):
        if len(self.centers) < 1:
            raise ConfigError("ue_spec.centers must hold at least one UE center")
        if not (math.isfinite(self.variance) and self.variance >= 0):
            raise ConfigError(f"ue_spec.variance must be >= 0, got {self.variance}")

    @property
    def count(self) -> int:
        return len(self.centers)


@dataclass(frozen=True)
class Scenario:
    """Complete geometric description of one deployment problem"""
    region: Region
    trajectory: CircularTrajectory
    ue_spec: UEPlacementSpec
    num_tx: int
    num_rx: int
    seed: int = 0

    def __post_init__(self):
        if self.num_tx < 1:
            raise ConfigError(f"counts.num_tx must be >= 1, got {self.num_tx}")
        if self.num_rx < 1:
            raise ConfigError(f"counts.num_rx must be >= 1, got {self.num_rx}")

    @property
    def num_aps(self) -> int:
        return self.num_tx + self.num_rx


@dataclass(frozen=True)
class Deployment:
    """Transmitter and receiver AP coordinates, the decision variable"""
    tx: Tuple[Point2D, ...]
    rx: Tuple[Point2D, ...] = field(default_factory=tuple)

    @classmethod
    def from_arrays(cls, tx: np.ndarray, rx: np.ndarray) -> "Deployment":
        tx = np.asarray(tx, dtype=float).reshape(-1, 2)
        rx = np.asarray(rx, dtype=float).reshape(-1, 2)
        return cls(
            tx=tuple(Point2D(float(x), float(y)) for x, y in tx),
            rx=tuple(Point2D(float(x), float(y)) for x, y in rx),
        )

    @property
    def tx_array(self) -> np.ndarray:
        return np.asarray(self.tx, dtype=float).reshape(-1, 2)

    @property
    def rx_array(self) -> np.ndarray:
        return np.asarray(self.rx, dtype=float).reshape(-1, 2)


def sample_trajectory(traj: CircularTrajectory) -> List[Point2D]:
    """
    Sample the target trajectory uniformly in angle, starting at angle 0

    Args:
        traj: Circular trajectory

    Returns:
        List of Q points, point q at center + radius*(cos(2*pi*q/Q), sin(2*pi*q/Q))
    """
    q = np.arange(traj.sample_count)
    angles = 2.0 * np.pi * q / traj.sample_count
    xs = traj.center.x + traj.radius * np.cos(angles)
    ys = traj.center.y + traj.radius * np.sin(angles)
    return [Point2D(float(x), float(y)) for x, y in zip(xs, ys)]


def clamp_to_region(p: Sequence[float], region: Region) -> Point2D:
    """Coordinate-wise clamp of a point into the region"""
    x = min(max(float(p[0]), region.x_min), region.x_max)
    y = min(max(float(p[1]), region.y_min), region.y_max)
    return Point2D(x, y)


def sample_ues(spec: UEPlacementSpec, rng: np.random.Generator, region: Region) -> List[Point2D]:
    """
    Draw one UE placement

    Every UE is its center plus an independent N(0, variance) offset per axis,
    then clamped into the region. The generator is always advanced by 2K
    normals so the stream does not depend on the variance value.

    Args:
        spec: UE placement spec
        rng: Seeded generator (advanced in place)
        region: Deployment region used for clamping

    Returns:
        List of K points
    """
    centers = np.asarray(spec.centers, dtype=float).reshape(-1, 2)
    offsets = rng.standard_normal(size=centers.shape) * math.sqrt(spec.variance)
    return [clamp_to_region(p, region) for p in centers + offsets]


def fixed_ue_draw(scenario: Scenario) -> List[Point2D]:
    """
    The single UE draw shared by oracles and reports

    Args:
        scenario: Scenario

    Returns:
        The UE centers when the variance is 0, otherwise one draw seeded by scenario.seed
    """
    if scenario.ue_spec.variance == 0:
        return [clamp_to_region(c, scenario.region) for c in scenario.ue_spec.centers]
    return sample_ues(scenario.ue_spec, np.random.default_rng(scenario.seed), scenario.region)


def check_keys(table: Dict[str, Any], allowed: Sequence[str], path: str) -> None:
    """Reject keys not in allowed, naming the dotted path"""
    for key in table:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"Unknown config key '{where}'")


def require(table: Dict[str, Any], key: str, path: str) -> Any:
    """Fetch a required key or raise a ConfigError naming it"""
    if not isinstance(table, dict):
        raise ConfigError(f"'{path}' must be a table")
    if key not in table:
        where = f"{path}.{key}" if path else key
        raise ConfigError(f"Missing required config field '{where}'")
    return table[key]


def _point(value: Any, path: str) -> Point2D:
    try:
        x, y = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{path}' must be a pair [x, y], got {value!r}")
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ConfigError(f"'{path}' must be finite, got {value!r}")
    return Point2D(x, y)


def _number(table: Dict[str, Any], key: str, path: str, cast=float, default: Any = None) -> Any:
    if key not in table and default is not None:
        return default
    value = require(table, key, path)
    if isinstance(value, bool):
        raise ConfigError(f"'{path}.{key}' must be a number, got {value!r}")
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{path}.{key}' must be a number, got {value!r}")


def parse_document(config_text: str) -> Dict[str, Any]:
    """
    Parse a TOML experiment document and check its envelope

    Args:
        config_text: TOML text

    Returns:
        Parsed document

    Raises:
        ConfigError: on malformed TOML, wrong schema_version or unknown top-level keys
    """
    try:
        doc = toml.loads(config_text)
    except toml.TomlDecodeError as e:
        raise ConfigError(f"Malformed config: {e}")
    check_keys(doc, TOP_LEVEL_KEYS, "")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"Unsupported schema_version {version} (expected {SCHEMA_VERSION})")
    return doc


def scenario_from_document(doc: Dict[str, Any], allow_degenerate: bool = False) -> Scenario:
    """
    Build and validate a Scenario from a parsed document

    Args:
        doc: Parsed config document
        allow_degenerate: Accept num_tx + num_rx < 3 (sweeps over AP counts need it)

    Returns:
        Validated Scenario
    """
    region_t = require(doc, "region", "")
    check_keys(region_t, ("x_min", "x_max", "y_min", "y_max"), "region")
    region = Region(*(_number(region_t, k, "region") for k in ("x_min", "x_max", "y_min", "y_max")))

    traj_t = require(doc, "trajectory", "")
    check_keys(traj_t, ("center", "radius", "sample_count"), "trajectory")
    trajectory = CircularTrajectory(
        center=_point(require(traj_t, "center", "trajectory"), "trajectory.center"),
        radius=_number(traj_t, "radius", "trajectory"),
        sample_count=_number(traj_t, "sample_count", "trajectory", cast=int),
    )

    ue_t = require(doc, "ue_spec", "")
    check_keys(ue_t, ("count", "centers", "variance"), "ue_spec")
    centers_raw = require(ue_t, "centers", "ue_spec")
    if not isinstance(centers_raw, list):
        raise ConfigError("'ue_spec.centers' must be a list of [x, y] pairs")
    centers = tuple(_point(c, f"ue_spec.centers[{i}]") for i, c in enumerate(centers_raw))
    ue_spec = UEPlacementSpec(centers=centers, variance=_number(ue_t, "variance", "ue_spec", default=2.0))
    if "count" in ue_t and int(ue_t["count"]) != len(centers):
        raise ConfigError(f"ue_spec.count ({ue_t['count']}) does not match {len(centers)} centers")

    counts_t = require(doc, "counts", "")
    check_keys(counts_t, ("num_tx", "num_rx"), "counts")
    scenario = Scenario(
        region=region,
        trajectory=trajectory,
        ue_spec=ue_spec,
        num_tx=_number(counts_t, "num_tx", "counts", cast=int),
        num_rx=_number(counts_t, "num_rx", "counts", cast=int),
        seed=_number(doc, "seed", "", cast=int, default=0),
    )
    validate_scenario(scenario, allow_degenerate=allow_degenerate)
    return scenario


def validate_scenario(scenario: Scenario, allow_degenerate: bool = False) -> None:
    """
    Check the cross-field scenario invariants

    Raises:
        ConfigError: trajectory outside region, UE center outside region, too few APs
    """
    for i, p in enumerate(sample_trajectory(scenario.trajectory)):
        if not scenario.region.contains(p):
            raise ConfigError(
                f"trajectory outside region: sample {i} at ({p.x:.6g}, {p.y:.6g})"
            )
    for i, c in enumerate(scenario.ue_spec.centers):
        if not scenario.region.contains(c):
            raise ConfigError(f"ue_spec.centers[{i}] at ({c.x}, {c.y}) is outside region")
    if scenario.num_aps < 3:
        if not allow_degenerate:
            raise ConfigError(
                f"counts.num_tx + counts.num_rx must be >= 3 for a non-degenerate sensing "
                f"objective, got {scenario.num_tx} + {scenario.num_rx}"
            )
        logger.warning("Scenario with M=%d, N=%d has a degenerate (zero) sensing objective",
                       scenario.num_tx, scenario.num_rx)


def load_scenario(config_text: str) -> Scenario:
    """
    Parse and validate the scenario part of a config document

    Args:
        config_text: TOML experiment document

    Returns:
        Scenario
    """
    return scenario_from_document(parse_document(config_text))


def scenario_to_document(scenario: Scenario) -> Dict[str, Any]:
    """Scenario as the nested dict layout of the config document"""
    r = scenario.region
    t = scenario.trajectory
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": scenario.seed,
        "region": {"x_min": r.x_min, "x_max": r.x_max, "y_min": r.y_min, "y_max": r.y_max},
        "trajectory": {
            "center": [t.center.x, t.center.y],
            "radius": t.radius,
            "sample_count": t.sample_count,
        },
        "ue_spec": {
            "centers": [[c.x, c.y] for c in scenario.ue_spec.centers],
            "variance": scenario.ue_spec.variance,
        },
        "counts": {"num_tx": scenario.num_tx, "num_rx": scenario.num_rx},
    }


def render_scenario(scenario: Scenario) -> str:
    """Render a scenario as TOML text accepted by load_scenario"""
    return toml.dumps(scenario_to_document(scenario))


def deployment_to_dict(deployment: Deployment) -> Dict[str, List[List[float]]]:
    return {
        "tx": [[p.x, p.y] for p in deployment.tx],
        "rx": [[p.x, p.y] for p in deployment.rx],
    }


def validate_deployment(deployment: Deployment, scenario: Scenario) -> None:
    """
    Check AP counts and region membership

    Raises:
        DeploymentError: naming the first offending AP index
    """
    if len(deployment.tx) != scenario.num_tx:
        raise DeploymentError(f"Deployment has {len(deployment.tx)} tx APs, scenario expects {scenario.num_tx}")
    if len(deployment.rx) != scenario.num_rx:
        raise DeploymentError(f"Deployment has {len(deployment.rx)} rx APs, scenario expects {scenario.num_rx}")
    for role, points in (("tx", deployment.tx), ("rx", deployment.rx)):
        for i, p in enumerate(points):
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise DeploymentError(f"{role}[{i}] has non-finite coordinates ({p.x}, {p.y})")
            if not scenario.region.contains(p):
                raise DeploymentError(f"{role}[{i}] at ({p.x}, {p.y}) is outside region")


def load_deployment(text: str, scenario: Optional[Scenario] = None) -> Deployment:
    """
    Parse a deployment JSON document

    Args:
        text: JSON text {"tx": [[x, y], ...], "rx": [[x, y], ...]}
        scenario: When given, counts and region membership are validated

    Returns:
        Deployment
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DeploymentError(f"Malformed deployment JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(doc, dict):
        raise DeploymentError("Deployment document must be a JSON object")
    for key in doc:
        if key not in ("tx", "rx"):
            raise DeploymentError(f"Unknown deployment key '{key}'")
    points = {}
    for role in ("tx", "rx"):
        if role not in doc:
            raise DeploymentError(f"Missing deployment field '{role}'")
        try:
            points[role] = tuple(Point2D(float(x), float(y)) for x, y in doc[role])
        except (TypeError, ValueError):
            raise DeploymentError(f"'{role}' must be a list of [x, y] pairs")
    deployment = Deployment(tx=points["tx"], rx=points["rx"])
    if scenario is not None:
        validate_deployment(deployment, scenario)
    return deployment
