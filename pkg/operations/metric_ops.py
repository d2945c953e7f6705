"""
ISAC metric operations for the AP deployment optimizer
Category 2: FIM determinant (sensing), SNR and rate (communication), scalarized objectives
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Sequence

import numpy as np

from operations.scenario_ops import ConfigError, Deployment

logger = logging.getLogger(__name__)


class ObjectiveKind(str, Enum):
    MAX_SUM = "max_sum"
    MAX_MIN = "max_min"
    COMM_ONLY = "comm_only"
    SENSING_ONLY = "sensing_only"
    WEIGHTED_SUM = "weighted_sum"


class Aggregation(str, Enum):
    SUM = "sum"
    MIN = "min"


@dataclass(frozen=True)
class ObjectiveSpec:
    """Which scalarization to optimize and its constants"""
    kind: ObjectiveKind = ObjectiveKind.MAX_SUM
    weight: float = 0.5
    log_base: float = 2.0
    distance_floor: float = 1e-3
    # Only read by the single-objective comparators and the weighted sum
    aggregation: Aggregation = Aggregation.SUM

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", ObjectiveKind(self.kind))
        except ValueError:
            valid = [k.value for k in ObjectiveKind]
            raise ConfigError(f"Invalid objective.kind: {self.kind!r}. Use: {valid}")
        try:
            object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        except ValueError:
            raise ConfigError(f"Invalid objective.aggregation: {self.aggregation!r}. Use: ['sum', 'min']")
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise ConfigError(f"objective.weight must be finite and >= 0, got {self.weight}")
        if not (math.isfinite(self.log_base) and self.log_base > 1):
            raise ConfigError(f"objective.log_base must be > 1, got {self.log_base}")
        if not (math.isfinite(self.distance_floor) and self.distance_floor > 0):
            raise ConfigError(f"objective.distance_floor must be > 0, got {self.distance_floor}")


@dataclass
class MetricReport:
    """Communication and sensing statistics of one deployment"""
    per_ue_rate: List[float]
    sum_rate: float
    min_rate: float
    per_sample_fim_det: List[float]
    sum_fim_det: float
    min_fim_det: float
    objective_value: float
    objective_kind: str = ObjectiveKind.MAX_SUM.value

    @property
    def mean_rate(self) -> float:
        return self.sum_rate / len(self.per_sample_fim_det)

    @property
    def mean_fim_det(self) -> float:
        return self.sum_fim_det / len(self.per_sample_fim_det)

    def to_dict(self) -> Dict[str, Any]:
        """JSON layout with stable field names"""
        return {
            "objective_kind": self.objective_kind,
            "objective_value": self.objective_value,
            "per_ue_rate": list(self.per_ue_rate),
            "sum_rate": self.sum_rate,
            "min_rate": self.min_rate,
            "mean_rate": self.mean_rate,
            "per_sample_fim_det": list(self.per_sample_fim_det),
            "sum_fim_det": self.sum_fim_det,
            "min_fim_det": self.min_fim_det,
            "mean_fim_det": self.mean_fim_det,
        }

    def to_row(self) -> Dict[str, Any]:
        """Flat CSV row; list fields are spread into indexed columns"""
        row = {k: v for k, v in self.to_dict().items() if not isinstance(v, list)}
        for k, r in enumerate(self.per_ue_rate):
            row[f"rate_ue_{k}"] = r
        for q, d in enumerate(self.per_sample_fim_det):
            row[f"fim_det_sample_{q}"] = d
        return row


def _points(values: Any) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1, 2)


def _unit_vectors(target: np.ndarray, aps: np.ndarray, distance_floor: float) -> np.ndarray:
    # (p - a) / max(|p - a|, floor), broadcast over leading axes
    diff = target - aps
    dist = np.sqrt(np.sum(diff * diff, axis=-1, keepdims=True))
    return diff / np.maximum(dist, distance_floor)


def _fim_from_units(ut: np.ndarray, ur: np.ndarray) -> np.ndarray:
    # ut (..., M, 2), ur (..., N, 2) -> determinant over the M x N bistatic pairs
    s = ut[..., :, None, :] + ur[..., None, :, :]
    sx = s[..., 0]
    sy = s[..., 1]
    a = np.sum(sx * sx, axis=(-2, -1))
    b = np.sum(sy * sy, axis=(-2, -1))
    c = np.sum(sx * sy, axis=(-2, -1))
    return np.maximum(a * b - c * c, 0.0)


def fim_determinant(tx: Sequence, rx: Sequence, target: Sequence[float], distance_floor: float = 1e-3) -> float:
    """
    Determinant of the angular FIM for one target position

    Args:
        tx: Transmitter AP positions (M x 2)
        rx: Receiver AP positions (N x 2)
        target: Target position
        distance_floor: Lower bound on AP-target distance before division

    Returns:
        A*B - C**2 clamped to >= 0
    """
    tx = _points(tx)
    rx = _points(rx)
    if len(tx) == 0 or len(rx) == 0:
        raise ValueError("fim_determinant needs at least one tx and one rx AP")
    p = np.asarray(target, dtype=float).reshape(2)
    return float(_fim_from_units(_unit_vectors(p, tx, distance_floor), _unit_vectors(p, rx, distance_floor)))


def fim_determinants(tx: Sequence, rx: Sequence, targets: Sequence, distance_floor: float = 1e-3) -> np.ndarray:
    """FIM determinant for every trajectory sample, shape (Q,)"""
    tx = _points(tx)
    rx = _points(rx)
    p = _points(targets)[:, None, :]
    return _fim_from_units(_unit_vectors(p, tx, distance_floor), _unit_vectors(p, rx, distance_floor))


def snr(ue: Sequence[float], tx: Sequence, rx: Sequence, distance_floor: float = 1e-3) -> float:
    """
    Asymptotic zero-forcing SNR of one UE by the Euclidean distance criterion

    Args:
        ue: UE position
        tx: Transmitter AP positions
        rx: Receiver AP positions
        distance_floor: Lower bound on UE-AP distance

    Returns:
        Sum over all APs of 1 / max(distance, floor)**2
    """
    if len(_points(tx)) + len(_points(rx)) == 0:
        raise ValueError("snr needs at least one AP")
    return float(snrs([ue], tx, rx, distance_floor)[0])


def snrs(ues: Sequence, tx: Sequence, rx: Sequence, distance_floor: float = 1e-3) -> np.ndarray:
    """SNR of every UE, shape (K,)"""
    aps = np.vstack([_points(tx), _points(rx)])
    diff = _points(ues)[:, None, :] - aps[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return np.sum(1.0 / np.maximum(dist, distance_floor) ** 2, axis=-1)


def rate(snr_value, log_base: float = 2.0):
    """log_base(1 + snr); accepts scalars or arrays"""
    value = np.log1p(snr_value) / math.log(log_base)
    return float(value) if np.ndim(value) == 0 else value


def _combine(spec: ObjectiveSpec, sum_rate, min_rate, sum_fim, min_fim, q: int, scaled: bool):
    # Shared by the scalar and batched paths so both agree bit for bit
    scale = 1.0 / q if scaled else 1.0
    kind = spec.kind
    if kind == ObjectiveKind.MAX_SUM:
        return (sum_rate * scale) * (sum_fim * scale)
    if kind == ObjectiveKind.MAX_MIN:
        return min_rate * min_fim
    use_min = spec.aggregation == Aggregation.MIN
    comm = min_rate if use_min else sum_rate * scale
    sensing = min_fim if use_min else sum_fim * scale
    if kind == ObjectiveKind.COMM_ONLY:
        return comm
    if kind == ObjectiveKind.SENSING_ONLY:
        return sensing
    return spec.weight * comm + (1.0 - spec.weight) * sensing


def objective_value(report: MetricReport, spec: ObjectiveSpec, scaled: bool = True) -> float:
    """
    Scalarized objective of a report

    Args:
        report: Metric report
        spec: Objective spec
        scaled: True for the reporting form (sums divided by Q), False for the reward form

    Returns:
        Objective value
    """
    return float(_combine(spec, report.sum_rate, report.min_rate, report.sum_fim_det,
                          report.min_fim_det, len(report.per_sample_fim_det), scaled))


def evaluate(deployment: Deployment, ues: Sequence, trajectory_points: Sequence,
             spec: ObjectiveSpec) -> MetricReport:
    """
    Evaluate a deployment against fixed UEs and trajectory samples

    Args:
        deployment: AP positions
        ues: K UE positions
        trajectory_points: Q target samples
        spec: Objective spec

    Returns:
        MetricReport with the reporting-scale objective
    """
    rates = rate(snrs(ues, deployment.tx_array, deployment.rx_array, spec.distance_floor), spec.log_base)
    rates = np.atleast_1d(rates)
    dets = fim_determinants(deployment.tx_array, deployment.rx_array, trajectory_points, spec.distance_floor)
    report = MetricReport(
        per_ue_rate=[float(r) for r in rates],
        sum_rate=float(np.sum(rates)),
        min_rate=float(np.min(rates)),
        per_sample_fim_det=[float(d) for d in dets],
        sum_fim_det=float(np.sum(dets)),
        min_fim_det=float(np.min(dets)),
        objective_value=0.0,
        objective_kind=spec.kind.value,
    )
    report.objective_value = objective_value(report, spec, scaled=True)
    return report


def evaluate_batch(tx: np.ndarray, rx: np.ndarray, ues: Sequence, targets: Sequence,
                   spec: ObjectiveSpec, scaled: bool = True) -> np.ndarray:
    """
    Objective values for a batch of deployments

    Args:
        tx: (B, M, 2) transmitter positions
        rx: (B, N, 2) receiver positions
        ues: (K, 2) UE positions
        targets: (Q, 2) trajectory samples
        spec: Objective spec
        scaled: Reporting form when True, reward form when False

    Returns:
        (B,) objective values
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    ues = _points(ues)
    targets = _points(targets)
    floor = spec.distance_floor

    aps = np.concatenate([tx, rx], axis=1)                      # (B, L, 2)
    diff = ues[None, :, None, :] - aps[:, None, :, :]            # (B, K, L, 2)
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    rates = np.log1p(np.sum(1.0 / np.maximum(dist, floor) ** 2, axis=-1)) / math.log(spec.log_base)

    p = targets[None, :, None, :]                                # (1, Q, 1, 2)
    ut = _unit_vectors(p, tx[:, None, :, :], floor)              # (B, Q, M, 2)
    ur = _unit_vectors(p, rx[:, None, :, :], floor)              # (B, Q, N, 2)
    dets = _fim_from_units(ut, ur)                               # (B, Q)

    return _combine(spec, rates.sum(axis=1), rates.min(axis=1), dets.sum(axis=1),
                    dets.min(axis=1), len(targets), scaled)
