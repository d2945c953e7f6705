"""
Report operations for the AP deployment optimizer
Artifact emission: run manifest, JSON documents, CSV tables and SVG deployment plots
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from operations import __version__
from operations.scenario_ops import Deployment, Scenario

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["step", "eval_reward", "train_reward", "actor_loss", "critic_loss", "omega"]
COMPARE_COLUMNS = ["method", "objective_kind", "value", "evaluations", "wall_time"]
SWEEP_COLUMNS = [
    "m", "n", "objective_kind", "solver", "seed", "mean_rate", "mean_fim_det",
    "min_rate", "min_fim_det", "objective_value", "evaluations", "wall_time",
]
BAND_COLUMNS = [
    "step", "runs", "eval_mean", "eval_min", "eval_max", "train_mean", "train_min", "train_max",
]


@dataclass
class RunManifest:
    """What was run, with which inputs, and what it produced"""
    command: str
    seed: int
    config: Dict[str, Any]
    overrides: Dict[str, Any] = field(default_factory=dict)
    tool_version: str = __version__
    status: str = "running"
    outputs: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _json_safe(value: Any) -> Any:
    # JSON has no NaN/inf
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return _json_safe(value.item())
    return value


def render_json(doc: Any) -> str:
    return json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"


def write_json(path: Path, doc: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_json(doc), encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def write_manifest(out_dir: Path, manifest: RunManifest) -> Path:
    return write_json(Path(out_dir) / "manifest.json", manifest.to_dict())


def write_csv(path: Path, rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> Path:
    """
    Write rows as CSV with a fixed column order

    Args:
        path: Output file
        rows: Row dicts
        columns: Column order (default: keys of the first row)

    Returns:
        Path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(list(rows), columns=columns)
    df.to_csv(path, index=False)
    logger.info("Wrote %s (%d rows)", path, len(df))
    return path


def start_csv(path: Path, columns: List[str]) -> Path:
    """Create a CSV holding only the header"""
    return write_csv(path, [], columns)


def append_csv_row(path: Path, row: Dict[str, Any], columns: List[str]) -> None:
    pd.DataFrame([row], columns=columns).to_csv(path, mode="a", header=False, index=False)


def curve_rows(curve: Sequence[Any]) -> List[Dict[str, Any]]:
    return [asdict(p) for p in curve]


def seed_band_rows(curves: Sequence[Sequence[Dict[str, Any]]]) -> List[Dict[str, Any]]:
    """
    Per-step spread of learning curves from several seeds

    Args:
        curves: One list of curve rows (CURVE_COLUMNS) per seed

    Returns:
        Rows in BAND_COLUMNS order, one per evaluation step, sorted by step
    """
    frames = [pd.DataFrame(list(c), columns=CURVE_COLUMNS) for c in curves if c]
    if not frames:
        return []
    table = pd.concat(frames, ignore_index=True)
    band = table.groupby("step", sort=True).agg(
        runs=("eval_reward", "size"),
        eval_mean=("eval_reward", "mean"),
        eval_min=("eval_reward", "min"),
        eval_max=("eval_reward", "max"),
        train_mean=("train_reward", "mean"),
        train_min=("train_reward", "min"),
        train_max=("train_reward", "max"),
    ).reset_index()
    return band[BAND_COLUMNS].to_dict("records")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    """Maps region coordinates onto an SVG viewport (y axis pointing up)"""

    def __init__(self, scenario: Scenario, size: int):
        self.region = scenario.region
        self.size = size
        self.margin = 0.08 * size
        r = self.region
        span = max(r.x_max - r.x_min, r.y_max - r.y_min)
        self.scale = (size - 2 * self.margin) / span

    def x(self, v: float) -> str:
        return _fmt(self.margin + (v - self.region.x_min) * self.scale)

    def y(self, v: float) -> str:
        return _fmt(self.size - self.margin - (v - self.region.y_min) * self.scale)

    def length(self, v: float) -> str:
        return _fmt(v * self.scale)


def _triangle(cx: float, cy: float, r: float) -> str:
    pts = [(cx, cy - r), (cx - 0.866 * r, cy + 0.5 * r), (cx + 0.866 * r, cy + 0.5 * r)]
    return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)


def render_deployment_svg(scenario: Scenario, deployment: Deployment, ues: Sequence,
                          trajectory_points: Sequence, size: int = 600, title: str = "") -> str:
    """
    Static SVG plot of one deployment

    The scene group holds exactly one primitive per UE, one circle for the
    trajectory, one dot per trajectory sample and one glyph per AP
    (triangles for tx, squares for rx). The region boundary lives in the axes
    group and the legend in its own group.

    Args:
        scenario: Scenario (region and trajectory)
        deployment: AP positions
        ues: UE positions
        trajectory_points: Trajectory samples
        size: Width and height in pixels
        title: Optional caption

    Returns:
        SVG document text
    """
    c = _Canvas(scenario, size)
    r = scenario.region
    t = scenario.trajectory
    glyph = 0.018 * size
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg width="{size}" height="{size}" viewBox="0 0 {size} {size}" xmlns="http://www.w3.org/2000/svg">',
        "<defs>",
        "<style>",
        ".region { fill:none; stroke:#333; stroke-width:1.5; }",
        ".tick { font-family:Arial,sans-serif; font-size:10px; fill:#666; }",
        ".trajectory { fill:none; stroke:#888; stroke-width:1; stroke-dasharray:4,3; }",
        ".sample { fill:#888; }",
        ".ue { fill:#2e7d32; }",
        ".tx { fill:#d32f2f; }",
        ".rx { fill:#1976d2; }",
        ".label { font-family:Arial,sans-serif; font-size:11px; fill:#333; }",
        "</style>",
        "</defs>",
        '<g id="axes">',
        f'<rect x="{c.x(r.x_min)}" y="{c.y(r.y_max)}" width="{c.length(r.x_max - r.x_min)}" '
        f'height="{c.length(r.y_max - r.y_min)}" class="region" />',
        f'<text x="{c.x(r.x_min)}" y="{_fmt(size - c.margin + 14)}" class="tick">{r.x_min:g}</text>',
        f'<text x="{c.x(r.x_max)}" y="{_fmt(size - c.margin + 14)}" class="tick" text-anchor="end">{r.x_max:g}</text>',
        f'<text x="{_fmt(c.margin - 4)}" y="{c.y(r.y_min)}" class="tick" text-anchor="end">{r.y_min:g}</text>',
        f'<text x="{_fmt(c.margin - 4)}" y="{c.y(r.y_max)}" class="tick" text-anchor="end">{r.y_max:g}</text>',
    ]
    if title:
        lines.append(f'<text x="{_fmt(size / 2)}" y="{_fmt(c.margin / 2)}" class="label" '
                     f'text-anchor="middle">{title}</text>')
    lines.append("</g>")

    lines.append('<g id="scene">')
    lines.append(f'<circle cx="{c.x(t.center.x)}" cy="{c.y(t.center.y)}" r="{c.length(t.radius)}" class="trajectory" />')
    for p in trajectory_points:
        lines.append(f'<circle cx="{c.x(p[0])}" cy="{c.y(p[1])}" r="{_fmt(0.25 * glyph)}" class="sample" />')
    for p in ues:
        x, y = float(c.x(p[0])), float(c.y(p[1]))
        lines.append(f'<polygon points="{_fmt(x)},{_fmt(y - glyph)} {_fmt(x + glyph)},{_fmt(y)} '
                     f'{_fmt(x)},{_fmt(y + glyph)} {_fmt(x - glyph)},{_fmt(y)}" class="ue" />')
    for p in deployment.tx:
        lines.append(f'<polygon points="{_triangle(float(c.x(p.x)), float(c.y(p.y)), glyph)}" class="tx" />')
    for p in deployment.rx:
        lines.append(f'<rect x="{_fmt(float(c.x(p.x)) - 0.8 * glyph)}" y="{_fmt(float(c.y(p.y)) - 0.8 * glyph)}" '
                     f'width="{_fmt(1.6 * glyph)}" height="{_fmt(1.6 * glyph)}" class="rx" />')
    lines.append("</g>")

    lx = size - c.margin - 90
    ly = c.margin / 2
    lines.append('<g id="legend">')
    for i, (cls, name) in enumerate((("tx", "tx AP"), ("rx", "rx AP"), ("ue", "UE"), ("sample", "target"))):
        yy = ly + 14 * i
        lines.append(f'<circle cx="{_fmt(lx)}" cy="{_fmt(yy)}" r="4" class="{cls}" />')
        lines.append(f'<text x="{_fmt(lx + 10)}" y="{_fmt(yy + 4)}" class="label">{name}</text>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(path: Path, svg: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg, encoding="utf-8")
    logger.info("Wrote %s", path)
    return path
