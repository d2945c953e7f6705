"""
Create a sample deployment JSON for an experiment config
APs are spread on a ring around the trajectory center, tx and rx alternating
"""

import json
import math
import sys
from pathlib import Path

from operations.scenario_ops import Deployment, Point2D, deployment_to_dict, load_scenario, validate_deployment

config_file = sys.argv[1] if len(sys.argv) > 1 else "configs/default.toml"
output_file = sys.argv[2] if len(sys.argv) > 2 else "sample_deployment.json"

scenario = load_scenario(Path(config_file).read_text(encoding="utf-8"))
center = scenario.trajectory.center
r = scenario.region
# Halfway between the trajectory and the nearest region edge
edge = min(center.x - r.x_min, r.x_max - center.x, center.y - r.y_min, r.y_max - center.y)
radius = 0.5 * (scenario.trajectory.radius + edge)

points = []
for i in range(scenario.num_aps):
    angle = 2.0 * math.pi * i / scenario.num_aps
    points.append(Point2D(round(center.x + radius * math.cos(angle), 3),
                          round(center.y + radius * math.sin(angle), 3)))
order = points[0::2] + points[1::2]
deployment = Deployment(tx=tuple(order[:scenario.num_tx]), rx=tuple(order[scenario.num_tx:]))
validate_deployment(deployment, scenario)

Path(output_file).write_text(json.dumps(deployment_to_dict(deployment), indent=2) + "\n", encoding="utf-8")

print(f"Created {output_file} for {config_file}:")
print(f"   tx: {len(deployment.tx)} APs")
print(f"   rx: {len(deployment.rx)} APs")
print(f"   ring radius {radius:.2f} around ({center.x}, {center.y})")
