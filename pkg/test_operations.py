"""
Comprehensive Test Suite for AP Deployment Optimizer Operations
Tests all operation categories (scenario, metrics, environment, neural, SAC, baselines, config, reports)
"""

import dataclasses
import itertools
import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from operations import (
    baseline_ops, config_ops, env_ops, metric_ops, neural_ops, report_ops, sac_ops, scenario_ops,
)
from operations.metric_ops import MetricReport, ObjectiveKind, ObjectiveSpec
from operations.scenario_ops import (
    CircularTrajectory, ConfigError, Deployment, Point2D, Region, Scenario, UEPlacementSpec,
)

CONFIG_DIR = Path(__file__).parent / "configs"

coords = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)
points = st.tuples(coords, coords)

SCENARIO_TEXT = """
schema_version = 1
seed = 7

[region]
x_min = -10.0
x_max = 10.0
y_min = -10.0
y_max = 10.0

[trajectory]
center = [0.0, 0.0]
radius = 3.0
sample_count = 8

[ue_spec]
centers = [[5.0, 5.0], [-4.0, 2.0], [0.0, -6.0]]
variance = 2.0

[counts]
num_tx = 2
num_rx = 2
"""


def make_scenario(num_tx=2, num_rx=1, centers=((5.0, 5.0),), variance=0.0, q=8, half=10.0,
                  radius=3.0, seed=0):
    return Scenario(
        region=Region(-half, half, -half, half),
        trajectory=CircularTrajectory(Point2D(0.0, 0.0), radius, q),
        ue_spec=UEPlacementSpec(tuple(Point2D(*c) for c in centers), variance),
        num_tx=num_tx,
        num_rx=num_rx,
        seed=seed,
    )


def make_report(rates, dets):
    return MetricReport(
        per_ue_rate=list(rates), sum_rate=float(sum(rates)), min_rate=float(min(rates)),
        per_sample_fim_det=list(dets), sum_fim_det=float(sum(dets)), min_fim_det=float(min(dets)),
        objective_value=0.0,
    )


def max_relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


def finite_differences(loss_fn, arrays, h=1e-5):
    """Central differences of loss_fn() with respect to every entry of arrays (perturbed in place)"""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            old = a[idx]
            a[idx] = old + h
            plus = loss_fn()
            a[idx] = old - h
            minus = loss_fn()
            a[idx] = old
            g[idx] = (plus - minus) / (2 * h)
        grads.append(g)
    return grads


class TestCategory1Scenario:
    """Test Category 1: Geometry, trajectory sampling, UE placement, ingestion"""

    def setup_method(self):
        self.region = Region(-10.0, 10.0, -10.0, 10.0)

    def test_trajectory_quarter_points(self):
        """Test Q=4 samples land on the axes"""
        pts = scenario_ops.sample_trajectory(CircularTrajectory(Point2D(0.0, 0.0), 10.0, 4))
        expected = [(10, 0), (0, 10), (-10, 0), (0, -10)]
        for p, e in zip(pts, expected):
            assert p.x == pytest.approx(e[0], abs=1e-12)
            assert p.y == pytest.approx(e[1], abs=1e-12)

    def test_trajectory_single_sample(self):
        """Test a single sample sits at angle 0"""
        pts = scenario_ops.sample_trajectory(CircularTrajectory(Point2D(5.0, 5.0), 0.001, 1))
        assert len(pts) == 1
        assert pts[0].x == pytest.approx(5.001, abs=1e-12)
        assert pts[0].y == pytest.approx(5.0, abs=1e-12)

    def test_trajectory_eighth_point(self):
        """Test the 45 degree sample"""
        pts = scenario_ops.sample_trajectory(CircularTrajectory(Point2D(0.0, 0.0), 10.0, 8))
        assert pts[1].x == pytest.approx(7.0711, abs=1e-4)
        assert pts[1].y == pytest.approx(7.0711, abs=1e-4)

    def test_sample_ues_zero_variance(self):
        """Test variance 0 returns the centers"""
        spec = UEPlacementSpec((Point2D(1.0, 2.0),), 0.0)
        assert scenario_ops.sample_ues(spec, np.random.default_rng(0), self.region) == [Point2D(1.0, 2.0)]

    def test_sample_ues_deterministic(self):
        """Test the same seed gives the same draw"""
        spec = UEPlacementSpec((Point2D(0.0, 0.0), Point2D(3.0, 3.0), Point2D(-3.0, 1.0)), 2.0)
        a = scenario_ops.sample_ues(spec, np.random.default_rng(11), self.region)
        b = scenario_ops.sample_ues(spec, np.random.default_rng(11), self.region)
        assert a == b
        assert len(a) == 3

    @settings(deadline=None)
    @given(center=points, variance=st.floats(0.0, 25.0), seed=st.integers(0, 2 ** 32 - 1))
    def test_sample_ues_clamped(self, center, variance, seed):
        """Test every drawn UE stays in the region"""
        spec = UEPlacementSpec((Point2D(*center),), variance)
        (p,) = scenario_ops.sample_ues(spec, np.random.default_rng(seed), self.region)
        assert -10.0 <= p.x <= 10.0
        assert -10.0 <= p.y <= 10.0

    def test_clamp_to_region(self):
        """Test coordinate-wise clamping"""
        assert scenario_ops.clamp_to_region((15, 3), self.region) == Point2D(10.0, 3.0)
        assert scenario_ops.clamp_to_region((0, 0), self.region) == Point2D(0.0, 0.0)
        assert scenario_ops.clamp_to_region((-12, -12), self.region) == Point2D(-10.0, -10.0)

    @given(x=st.floats(-1e6, 1e6), y=st.floats(-1e6, 1e6))
    def test_clamp_idempotent(self, x, y):
        """Test clamping twice equals clamping once and lands in the region"""
        once = scenario_ops.clamp_to_region((x, y), self.region)
        assert scenario_ops.clamp_to_region(once, self.region) == once
        assert -10.0 <= once.x <= 10.0 and -10.0 <= once.y <= 10.0

    @given(center=points, radius=st.floats(1e-3, 50.0), count=st.integers(1, 64))
    def test_trajectory_on_circle(self, center, radius, count):
        """Test every sample sits at the trajectory radius from the center"""
        traj = CircularTrajectory(Point2D(*center), radius, count)
        pts = scenario_ops.sample_trajectory(traj)
        assert len(pts) == count
        for p in pts:
            assert math.hypot(p.x - center[0], p.y - center[1]) == pytest.approx(radius, abs=1e-9)

    def test_load_scenario_valid(self):
        """Test a valid document echoes its values"""
        scenario = scenario_ops.load_scenario(SCENARIO_TEXT)
        assert scenario.num_tx == 2
        assert scenario.num_rx == 2
        assert scenario.ue_spec.count == 3
        assert scenario.seed == 7
        assert scenario.trajectory.sample_count == 8

    def test_load_scenario_trajectory_outside(self):
        """Test a trajectory leaving the region is rejected"""
        text = SCENARIO_TEXT.replace("radius = 3.0", "radius = 20.0")
        with pytest.raises(ConfigError, match="trajectory outside region"):
            scenario_ops.load_scenario(text)

    def test_load_scenario_missing_region(self):
        """Test a missing table is named in the error"""
        text = SCENARIO_TEXT.replace("[region]\nx_min = -10.0\nx_max = 10.0\ny_min = -10.0\ny_max = 10.0\n", "")
        with pytest.raises(ConfigError, match="region"):
            scenario_ops.load_scenario(text)

    def test_load_scenario_malformed(self):
        """Test malformed TOML is a ConfigError"""
        with pytest.raises(ConfigError, match="Malformed"):
            scenario_ops.load_scenario("[region\nx_min = ")

    def test_load_scenario_unknown_key(self):
        """Test unknown keys name their dotted path"""
        text = SCENARIO_TEXT.replace("radius = 3.0", "radius = 3.0\nradious = 3.0")
        with pytest.raises(ConfigError, match="trajectory.radious"):
            scenario_ops.load_scenario(text)

    def test_load_scenario_too_few_aps(self):
        """Test M + N < 3 is rejected at load time"""
        text = SCENARIO_TEXT.replace("num_tx = 2", "num_tx = 1").replace("num_rx = 2", "num_rx = 1")
        with pytest.raises(ConfigError, match=">= 3"):
            scenario_ops.load_scenario(text)

    def test_render_scenario_round_trip(self):
        """Test render_scenario is accepted by load_scenario"""
        scenario = scenario_ops.load_scenario(SCENARIO_TEXT)
        assert scenario_ops.load_scenario(scenario_ops.render_scenario(scenario)) == scenario

    def test_load_deployment_outside_region(self):
        """Test an AP outside the region is named by index"""
        scenario = make_scenario(num_tx=2, num_rx=1)
        text = json.dumps({"tx": [[0.0, 0.0], [12.0, 0.0]], "rx": [[1.0, 1.0]]})
        with pytest.raises(scenario_ops.DeploymentError, match=r"tx\[1\]"):
            scenario_ops.load_deployment(text, scenario)

    def test_load_deployment_count_mismatch(self):
        """Test AP counts are checked against the scenario"""
        scenario = make_scenario(num_tx=2, num_rx=1)
        text = json.dumps({"tx": [[0.0, 0.0]], "rx": [[1.0, 1.0]]})
        with pytest.raises(scenario_ops.DeploymentError, match="tx APs"):
            scenario_ops.load_deployment(text, scenario)

    def test_fixed_ue_draw(self):
        """Test the fixed draw is the centers at variance 0 and seeded otherwise"""
        assert scenario_ops.fixed_ue_draw(make_scenario()) == [Point2D(5.0, 5.0)]
        noisy = make_scenario(variance=2.0, seed=4)
        assert scenario_ops.fixed_ue_draw(noisy) == scenario_ops.fixed_ue_draw(noisy)


class TestCategory2Metrics:
    """Test Category 2: FIM determinant, SNR, rate and objectives"""

    @given(tx=points, rx=points, target=points)
    def test_fim_single_pair_is_zero(self, tx, rx, target):
        """Test M=N=1 cannot localize"""
        assert abs(metric_ops.fim_determinant([tx], [rx], target)) < 1e-12

    def test_fim_closed_form(self):
        """Test the hand-evaluated configuration gives 3 + 2*sqrt(2)"""
        h = math.sqrt(2) / 2
        det = metric_ops.fim_determinant([(1, 0), (0, 1)], [(h, h)], (0, 0))
        assert det == pytest.approx(3 + 2 * math.sqrt(2), abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(
        aps=st.lists(points, min_size=2, max_size=8),
        m=st.integers(1, 4),
        target=st.tuples(st.floats(-5.0, 5.0), st.floats(-5.0, 5.0)),
        angle=st.floats(0.0, 2 * math.pi),
        shift=st.tuples(st.floats(-20.0, 20.0), st.floats(-20.0, 20.0)),
        scales=st.lists(st.floats(0.5, 3.0), min_size=8, max_size=8),
    )
    def test_fim_invariance_suite(self, aps, m, target, angle, shift, scales):
        """Test rotation, translation and radial rescaling leave the determinant unchanged"""
        aps = np.array(aps)
        target = np.array(target)
        assume(m < len(aps) <= m + 4)
        assume(np.min(np.linalg.norm(aps - target, axis=1)) >= 0.1)
        base = metric_ops.fim_determinant(aps[:m], aps[m:], target)
        tol = 1e-9 * max(abs(base), 1.0)

        rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        rotated = target + (aps - target) @ rot.T
        assert abs(metric_ops.fim_determinant(rotated[:m], rotated[m:], target) - base) < tol

        shift = np.array(shift)
        assert abs(metric_ops.fim_determinant(aps[:m] + shift, aps[m:] + shift, target + shift) - base) < tol

        scaled = target + (aps - target) * np.array(scales[:len(aps)])[:, None]
        assert abs(metric_ops.fim_determinant(scaled[:m], scaled[m:], target) - base) < tol

    def test_fim_determinants_matches_scalar(self):
        """Test the per-sample vector agrees with the scalar form"""
        targets = scenario_ops.sample_trajectory(CircularTrajectory(Point2D(0.0, 0.0), 3.0, 8))
        tx, rx = [(5, 5), (-5, 2)], [(0, -7)]
        dets = metric_ops.fim_determinants(tx, rx, targets)
        for p, d in zip(targets, dets):
            assert d == pytest.approx(metric_ops.fim_determinant(tx, rx, p), rel=1e-12)

    def test_snr_unit_distances(self):
        """Test four APs at unit distance give 4"""
        assert metric_ops.snr((0, 0), [(1, 0), (0, 1)], [(-1, 0), (0, -1)]) == pytest.approx(4.0)

    def test_snr_single_ap(self):
        """Test one AP at distance 2 gives 0.25"""
        assert metric_ops.snr((0, 0), [(2, 0)], []) == pytest.approx(0.25)

    def test_snr_distance_floor(self):
        """Test a coincident AP contributes 1/floor**2"""
        value = metric_ops.snr((1, 1), [(1, 1)], [(9, 9)], distance_floor=1e-3)
        assert value == pytest.approx(1e6 + 1.0 / 128.0)

    def test_rate_values(self):
        """Test log base 2 rates"""
        assert metric_ops.rate(4.0) == pytest.approx(2.32193, abs=1e-5)
        assert metric_ops.rate(0.0) == 0.0
        assert metric_ops.rate(1.0) == pytest.approx(1.0)

    @given(ue=points, angle=st.floats(0.0, 2 * math.pi), near=st.floats(0.01, 50.0), far=st.floats(0.01, 50.0))
    def test_snr_decreases_with_distance(self, ue, angle, near, far):
        """Test moving an AP away from the UE strictly lowers the SNR"""
        assume(far > near * 1.001)
        direction = np.array([math.cos(angle), math.sin(angle)])
        other = [(ue[0] + 30.0, ue[1] - 40.0)]
        close = metric_ops.snr(ue, [np.array(ue) + near * direction], other)
        distant = metric_ops.snr(ue, [np.array(ue) + far * direction], other)
        assert close > distant

    @given(low=st.floats(0.0, 1e6), high=st.floats(0.0, 1e6))
    def test_rate_increases_with_snr(self, low, high):
        """Test the rate is strictly increasing in the SNR"""
        assume(high - low > 1e-6 * max(1.0, low))
        assert metric_ops.rate(high) > metric_ops.rate(low)

    def test_objective_max_sum(self):
        """Test MaxSum with K=1, Q=1"""
        report = make_report([2.0], [5.0])
        assert metric_ops.objective_value(report, ObjectiveSpec()) == pytest.approx(10.0)

    def test_objective_max_min(self):
        """Test MaxMin multiplies the minima"""
        report = make_report([1.0, 3.0], [4.0, 2.0])
        assert metric_ops.objective_value(report, ObjectiveSpec(kind="max_min")) == pytest.approx(2.0)

    def test_objective_scaled_and_unscaled(self):
        """Test the reward form drops the 1/Q factors"""
        report = make_report([1.0, 3.0], [4.0, 2.0])
        spec = ObjectiveSpec()
        assert metric_ops.objective_value(report, spec, scaled=True) == pytest.approx((4 / 2) * (6 / 2))
        assert metric_ops.objective_value(report, spec, scaled=False) == pytest.approx(24.0)

    @settings(deadline=None)
    @given(first=st.lists(points, min_size=3, max_size=3), second=st.lists(points, min_size=3, max_size=3),
           factor=st.floats(1e-3, 1e3))
    def test_max_sum_ranking_survives_scaling(self, first, second, factor):
        """Test positive rescaling of MaxSum never changes which deployment wins"""
        targets = scenario_ops.sample_trajectory(CircularTrajectory(Point2D(0.0, 0.0), 3.0, 8))
        ues = [(5.0, 5.0), (-4.0, 2.0)]
        spec = ObjectiveSpec()
        reports = [metric_ops.evaluate(Deployment(tuple(Point2D(*p) for p in aps[:2]), (Point2D(*aps[2]),)),
                                       ues, targets, spec) for aps in (first, second)]
        scaled = [metric_ops.objective_value(r, spec, scaled=True) for r in reports]
        unscaled = [metric_ops.objective_value(r, spec, scaled=False) for r in reports]
        assume(abs(unscaled[0] - unscaled[1]) > 1e-9 * max(abs(unscaled[0]), abs(unscaled[1]), 1e-12))
        winner = unscaled[0] > unscaled[1]
        assert (scaled[0] > scaled[1]) == winner
        assert (factor * scaled[0] > factor * scaled[1]) == winner

    def test_objective_comparators(self):
        """Test single objectives, weighted sum and min aggregation"""
        report = make_report([1.0, 3.0], [4.0, 2.0])
        assert metric_ops.objective_value(report, ObjectiveSpec(kind="comm_only")) == pytest.approx(2.0)
        assert metric_ops.objective_value(report, ObjectiveSpec(kind="sensing_only")) == pytest.approx(3.0)
        weighted = ObjectiveSpec(kind="weighted_sum", weight=0.25)
        assert metric_ops.objective_value(report, weighted) == pytest.approx(0.25 * 2.0 + 0.75 * 3.0)
        comm_min = ObjectiveSpec(kind="comm_only", aggregation="min")
        assert metric_ops.objective_value(report, comm_min) == pytest.approx(1.0)

    def test_invalid_objective_kind(self):
        """Test an unknown objective kind is a ConfigError"""
        with pytest.raises(ConfigError, match="objective.kind"):
            ObjectiveSpec(kind="max_product")

    def test_evaluate_degenerate_max_sum(self):
        """Test M=N=1 gives a zero MaxSum objective"""
        deployment = Deployment((Point2D(1.0, 2.0),), (Point2D(-3.0, 4.0),))
        targets = scenario_ops.sample_trajectory(CircularTrajectory(Point2D(0.0, 0.0), 3.0, 8))
        report = metric_ops.evaluate(deployment, [(5, 5)], targets, ObjectiveSpec())
        assert report.objective_value == pytest.approx(0.0, abs=1e-12)
        assert report.sum_rate > 0

    def test_evaluate_batch_agrees(self):
        """Test the batched path matches evaluate to 1e-12 relative"""
        rng = np.random.default_rng(5)
        targets = scenario_ops.sample_trajectory(CircularTrajectory(Point2D(0.0, 0.0), 3.0, 8))
        ues = [(5.0, 5.0), (-2.0, 7.0)]
        tx = rng.uniform(-10, 10, size=(6, 2, 2))
        rx = rng.uniform(-10, 10, size=(6, 2, 2))
        for kind in ObjectiveKind:
            spec = ObjectiveSpec(kind=kind)
            batch = metric_ops.evaluate_batch(tx, rx, ues, targets, spec)
            for b in range(6):
                single = metric_ops.evaluate(Deployment.from_arrays(tx[b], rx[b]), ues, targets, spec)
                assert batch[b] == pytest.approx(single.objective_value, rel=1e-12, abs=1e-15)

    def test_report_row_layout(self):
        """Test the flat row spreads per-UE and per-sample values"""
        row = make_report([1.0, 3.0], [4.0, 2.0]).to_row()
        assert row["rate_ue_1"] == 3.0
        assert row["fim_det_sample_0"] == 4.0
        assert row["mean_rate"] == pytest.approx(2.0)


class TestCategory3Environment:
    """Test Category 3: State encoding, action decoding, rewards"""

    def setup_method(self):
        self.region = Region(-10.0, 10.0, -10.0, 10.0)
        self.scenario = make_scenario()
        self.config = env_ops.EnvConfig(self.scenario, ObjectiveSpec())

    def test_dimensions(self):
        """Test state and action widths"""
        assert self.config.state_dim == 4
        assert self.config.action_dim == 6

    def test_decode_zero_action(self):
        """Test the zero action puts every AP at the region center"""
        deployment = env_ops.decode_action(np.zeros(6), self.region, num_tx=2)
        assert all(p == Point2D(0.0, 0.0) for p in deployment.tx + deployment.rx)

    def test_decode_upper_edge(self):
        """Test an entry of 1.0 maps to x_max"""
        deployment = env_ops.decode_action([1.0, 0.0, 0.0, 0.0, 0.0, 0.0], self.region, num_tx=2)
        assert deployment.tx[0].x == 10.0

    def test_decode_grid_snap(self):
        """Test snapping 0.26 on an 11-point grid gives 2.0"""
        deployment = env_ops.decode_action([0.26, 0.0, 0.0, 0.0, 0.0, 0.0], self.region, 11, num_tx=2)
        assert deployment.tx[0].x == pytest.approx(2.0)

    def test_decode_grid_endpoints(self):
        """Test snapped extremes hit the region bounds exactly"""
        deployment = env_ops.decode_action([1.0, -1.0, 0.999, -0.999, 0.0, 0.0], self.region, 9, num_tx=2)
        assert deployment.tx[0] == Point2D(10.0, -10.0)
        assert deployment.tx[1] == Point2D(10.0, -10.0)

    def test_decode_requires_num_tx(self):
        """Test the tx/rx split is never guessed from the width"""
        with pytest.raises(TypeError):
            env_ops.decode_action(np.zeros(6), self.region)

    def test_decode_uneven_split(self):
        """Test M=3, N=1 splits an 8-wide action into three tx and one rx"""
        a = [0.1, 0.0, 0.2, 0.0, 0.3, 0.0, -0.5, 0.5]
        deployment = env_ops.decode_action(a, self.region, num_tx=3)
        assert [p.x for p in deployment.tx] == pytest.approx([1.0, 2.0, 3.0])
        assert deployment.rx == (Point2D(-5.0, 5.0),)

    def test_decode_invalid_num_tx(self):
        """Test a split leaving no rx pair or an odd width raises"""
        with pytest.raises(ValueError, match="cannot hold"):
            env_ops.decode_action(np.zeros(6), self.region, num_tx=3)
        with pytest.raises(ValueError, match="cannot hold"):
            env_ops.decode_action(np.zeros(6), self.region, num_tx=0)
        with pytest.raises(ValueError, match="cannot hold"):
            env_ops.decode_action(np.zeros(7), self.region, num_tx=2)

    def test_encode_deployment_inverse(self):
        """Test encode_deployment inverts decode_action"""
        a = np.array([0.5, -0.25, 0.0, 1.0, -1.0, 0.75])
        deployment = env_ops.decode_action(a, self.region, num_tx=2)
        assert np.allclose(env_ops.encode_deployment(deployment, self.region), a)

    def test_encode_state_corner(self):
        """Test a UE at the corner encodes to (1, 1)"""
        state = env_ops.encode_state([(10.0, 10.0)], (0.0, 0.0), self.region)
        assert list(state[:2]) == [1.0, 1.0]
        assert list(state[2:]) == [0.0, 0.0]

    def test_reset_zero_variance(self):
        """Test variance 0 gives the same state every reset"""
        env = env_ops.DeploymentEnv(self.config)
        rng = np.random.default_rng(0)
        first = env.reset(rng)
        for _ in range(5):
            assert np.array_equal(env.reset(rng), first)

    def test_reset_reproducible(self):
        """Test two environments with the same seed stream agree"""
        config = env_ops.EnvConfig(make_scenario(variance=2.0), ObjectiveSpec())
        a, b = env_ops.DeploymentEnv(config), env_ops.DeploymentEnv(config)
        ra, rb = np.random.default_rng(9), np.random.default_rng(9)
        for _ in range(3):
            assert np.array_equal(a.reset(ra), b.reset(rb))

    def test_step_degenerate_reward(self):
        """Test M=N=1 gives reward_transform(0) for any action"""
        config = env_ops.EnvConfig(make_scenario(num_tx=1, num_rx=1), ObjectiveSpec())
        env = env_ops.DeploymentEnv(config)
        rng = np.random.default_rng(1)
        state = env.reset(rng)
        for _ in range(5):
            reward, state, done = env.step(state, rng.uniform(-1, 1, size=4), rng)
            assert reward == pytest.approx(0.0, abs=1e-12)
            assert done is True

    def test_reward_transforms(self):
        """Test identity and log1p transforms"""
        assert env_ops.RewardTransform.IDENTITY.apply(10.0) == 10.0
        assert env_ops.RewardTransform.LOG1P.apply(10.0) == pytest.approx(2.3979, abs=1e-4)

    def test_step_reward_is_unscaled_objective(self):
        """Test the reward equals the transformed reward-form objective"""
        config = env_ops.EnvConfig(self.scenario, ObjectiveSpec(), reward_transform="identity")
        env = env_ops.DeploymentEnv(config)
        rng = np.random.default_rng(2)
        state = env.reset(rng)
        action = np.array([0.5, 0.5, -0.5, 0.5, 0.0, -0.5])
        expected = metric_ops.objective_value(env.evaluate_action(action), ObjectiveSpec(), scaled=False)
        reward, _, _ = env.step(state, action, rng)
        assert reward == pytest.approx(expected)

    def test_step_rejects_foreign_state(self):
        """Test step refuses a state it did not produce"""
        env = env_ops.DeploymentEnv(self.config)
        rng = np.random.default_rng(0)
        state = env.reset(rng)
        with pytest.raises(ValueError):
            env.step(state + 0.5, np.zeros(6), rng)

    def test_trace_rows(self):
        """Test the optional trace records decoded coordinates"""
        env = env_ops.DeploymentEnv(self.config, record_trace=True)
        rng = np.random.default_rng(0)
        state = env.reset(rng)
        env.step(state, np.zeros(6), rng)
        assert env.trace[0]["episode"] == 0
        assert env.trace[0]["rx_0_y"] == 0.0

    def test_invalid_grid_resolution(self):
        """Test a grid of one point is rejected"""
        with pytest.raises(ConfigError, match="grid_resolution"):
            env_ops.EnvConfig(self.scenario, ObjectiveSpec(), grid_resolution=1)


class TestCategory4Neural:
    """Test Category 4: MLP, tanh-Gaussian policy head, Adam"""

    def setup_method(self):
        self.rng = np.random.default_rng(42)

    def test_zero_network(self):
        """Test all-zero parameters give zero output"""
        params = neural_ops.MlpParams([np.zeros((3, 4)), np.zeros((4, 2))], [np.zeros(4), np.zeros(2)])
        assert np.array_equal(neural_ops.mlp_forward(params, np.ones(3)), np.zeros(2))

    def test_single_path_by_hand(self):
        """Test a one-unit-wide path against a hand trace"""
        params = neural_ops.MlpParams([np.array([[2.0]]), np.array([[3.0]])], [np.array([0.5]), np.array([-1.0])])
        assert neural_ops.mlp_forward(params, np.array([1.0]))[0] == pytest.approx(6.5)

    def test_forward_deterministic(self):
        """Test repeated forward passes agree"""
        params = neural_ops.init_mlp(5, 3, self.rng)
        x = self.rng.standard_normal(5)
        assert np.array_equal(neural_ops.mlp_forward(params, x), neural_ops.mlp_forward(params, x))

    def test_default_hidden_sizes(self):
        """Test the default architecture is 64-32"""
        params = neural_ops.init_mlp(4, 2, self.rng)
        assert [w.shape for w in params.weights] == [(4, 64), (64, 32), (32, 2)]

    def test_shape_mismatch(self):
        """Test a wrong input width raises"""
        params = neural_ops.init_mlp(4, 2, self.rng, hidden_sizes=(3,))
        with pytest.raises(ValueError, match="shape mismatch"):
            neural_ops.mlp_forward(params, np.ones(5))

    def test_backward_finite_differences(self):
        """Test analytic MLP gradients against central differences on 20 random nets"""
        for _ in range(20):
            params = neural_ops.init_mlp(4, 2, self.rng, hidden_sizes=(8, 8))
            x = self.rng.standard_normal((4, 4))
            upstream = self.rng.standard_normal((4, 2))

            def loss():
                return float(np.sum(upstream * neural_ops.mlp_forward(params, x)))

            analytic = neural_ops.backward(params, x, upstream).arrays()
            numeric = finite_differences(loss, params.arrays())
            for a, n in zip(analytic, numeric):
                assert max_relative_error(a, n) < 1e-4

    def test_backward_zero_upstream(self):
        """Test zero upstream gives zero gradients"""
        params = neural_ops.init_mlp(3, 2, self.rng, hidden_sizes=(4,))
        grads = neural_ops.backward(params, np.ones((2, 3)), np.zeros((2, 2)))
        assert all(not np.any(g) for g in grads.arrays())

    def test_backward_linear_net(self):
        """Test the weight gradient of a linear net is its input"""
        params = neural_ops.MlpParams([self.rng.standard_normal((3, 1))], [np.zeros(1)])
        x = np.array([0.5, -1.5, 2.0])
        grads = neural_ops.backward(params, x, np.array([1.0]))
        assert np.allclose(grads.weights[0][:, 0], x)

    def test_policy_sample_vanishing_std(self):
        """Test log_std at the floor gives tanh(mean)"""
        out = neural_ops.PolicyOutput(mean=np.array([0.3, -0.7]), log_std=np.array([-20.0, -20.0]))
        action, _ = neural_ops.policy_sample(out, np.array([1.5, -2.0]))
        assert np.allclose(action, np.tanh([0.3, -0.7]), atol=1e-8)

    @given(
        mean=st.lists(st.floats(-50.0, 50.0), min_size=3, max_size=3),
        log_std=st.lists(st.floats(-20.0, 2.0), min_size=3, max_size=3),
        noise=st.lists(st.floats(-10.0, 10.0), min_size=3, max_size=3),
    )
    def test_policy_sample_strictly_inside(self, mean, log_std, noise):
        """Test sampled actions stay strictly inside (-1, 1) with a finite log-density"""
        out = neural_ops.PolicyOutput(mean=np.array(mean), log_std=np.array(log_std))
        action, log_prob = neural_ops.policy_sample(out, np.array(noise))
        assert np.all(np.abs(action) < 1.0)
        assert math.isfinite(log_prob)

    def test_policy_sample_origin(self):
        """Test mean 0, log_std 0, noise 0"""
        out = neural_ops.PolicyOutput(mean=np.zeros(3), log_std=np.zeros(3))
        action, log_prob = neural_ops.policy_sample(out, np.zeros(3))
        assert np.array_equal(action, np.zeros(3))
        expected = 3 * math.log(1 / math.sqrt(2 * math.pi)) - 3 * math.log(1 + 1e-6)
        assert log_prob == pytest.approx(expected, abs=1e-12)

    def test_policy_density_integrates_to_one(self):
        """Test the squashed density integrates to one in 1-D"""
        eps = np.linspace(-8.0, 8.0, 20001)
        n = len(eps)
        log_std = -0.5
        out = neural_ops.PolicyOutput(mean=np.full((n, 1), 0.3), log_std=np.full((n, 1), log_std))
        action, log_prob = neural_ops.policy_sample(out, eps[:, None])
        a = action[:, 0]
        # da = (1 - a**2) * std * d(eps)
        integrand = np.exp(log_prob) * (1.0 - a * a) * math.exp(log_std)
        total = float(np.sum(integrand) * (eps[1] - eps[0]))
        assert total == pytest.approx(1.0, abs=1e-3)

    def test_log_std_clamped(self):
        """Test raw log_std outside [-20, 2] is clamped and passes no gradient"""
        raw = np.array([0.1, -0.2, 5.0, -30.0])
        out = neural_ops.split_policy_output(raw)
        assert list(out.log_std) == [2.0, -20.0]
        d_raw = neural_ops.policy_output_backward(raw, np.ones(2), np.ones(2))
        assert list(d_raw) == [1.0, 1.0, 0.0, 0.0]

    def test_adam_zero_gradient(self):
        """Test zero gradients leave parameters unchanged"""
        params = neural_ops.init_mlp(3, 2, self.rng, hidden_sizes=(4,))
        state = neural_ops.adam_init(params, 1e-3)
        zeros = [np.zeros_like(a) for a in params.arrays()]
        new_params, _ = neural_ops.adam_step(state, params, zeros)
        assert all(np.array_equal(a, b) for a, b in zip(new_params.arrays(), params.arrays()))

    def test_adam_first_step_magnitude(self):
        """Test the first step moves each entry by about the learning rate"""
        p = [np.array([1.0, -2.0, 3.0])]
        state = neural_ops.adam_init(p, 1e-3)
        new_p, new_state = neural_ops.adam_step(state, p, [np.array([5.0, -0.1, 200.0])])
        assert np.allclose(p[0] - new_p[0], [1e-3, -1e-3, 1e-3], rtol=1e-5)
        assert new_state.step == 1
        assert state.step == 0

    def test_adam_deterministic(self):
        """Test identical calls give identical results"""
        p = [np.array([1.0, 2.0])]
        g = [np.array([0.3, -0.4])]
        state = neural_ops.adam_init(p, 1e-2)
        a, _ = neural_ops.adam_step(state, p, g)
        b, _ = neural_ops.adam_step(state, p, g)
        assert np.array_equal(a[0], b[0])

    def test_params_dict_round_trip(self):
        """Test checkpoint layout restores parameters bit-exactly"""
        params = neural_ops.init_mlp(3, 2, self.rng, hidden_sizes=(4,))
        doc = json.loads(json.dumps(neural_ops.params_to_dict(params)))
        restored = neural_ops.params_from_dict(doc)
        assert all(np.array_equal(a, b) for a, b in zip(params.arrays(), restored.arrays()))


def constant_critic(input_dim, value):
    """Critic whose output is `value` for every input"""
    return neural_ops.MlpParams(
        [np.zeros((input_dim, 3)), np.zeros((3, 1))],
        [np.zeros(3), np.array([float(value)])],
    )


class TestCategory5Sac:
    """Test Category 5: Replay buffer, critic/actor/temperature updates, training"""

    def setup_method(self):
        self.rng = np.random.default_rng(0)
        self.config = sac_ops.SacConfig(hidden_sizes=(6,), learning_rate=1e-3, buffer_capacity=64, batch_size=8)
        self.agent = sac_ops.init_agent(4, 2, self.config, np.random.default_rng(1))

    def make_batch(self, n=8, done=True):
        return sac_ops.TransitionBatch(
            states=self.rng.uniform(-1, 1, size=(n, 4)),
            actions=self.rng.uniform(-1, 1, size=(n, 2)),
            rewards=self.rng.uniform(0, 2, size=n),
            next_states=self.rng.uniform(-1, 1, size=(n, 4)),
            dones=np.full(n, 1.0 if done else 0.0),
        )

    def transition(self, reward):
        return env_ops.Transition(np.zeros(4), np.zeros(2), float(reward), np.zeros(4), True)

    def test_default_config_matches_table(self):
        """Test default hyperparameters"""
        cfg = sac_ops.SacConfig()
        assert cfg.buffer_capacity == 2 ** 21
        assert cfg.batch_size == 2 ** 9
        assert cfg.discount == 0.98
        assert cfg.tau == 0.005
        assert cfg.learning_rate == 1e-5

    def test_buffer_fifo(self):
        """Test capacity 4, push 5 drops the oldest"""
        buf = sac_ops.ReplayBuffer(4, 4, 2)
        for r in range(1, 6):
            sac_ops.buffer_push(buf, self.transition(r))
        assert len(buf) == 4
        assert list(buf.contents().rewards) == [2.0, 3.0, 4.0, 5.0]

    def test_buffer_single_push(self):
        """Test pushing into an empty buffer"""
        buf = sac_ops.ReplayBuffer(4, 4, 2)
        sac_ops.buffer_push(buf, self.transition(1.0))
        assert len(buf) == 1

    def test_buffer_growth_keeps_order(self):
        """Test storage growth past the initial allocation keeps every transition"""
        buf = sac_ops.ReplayBuffer(3000, 4, 2)
        for r in range(2500):
            buf.push(self.transition(r))
        assert np.array_equal(buf.contents().rewards, np.arange(2500, dtype=float))

    def test_buffer_sample_insufficient(self):
        """Test sampling more than stored is an error"""
        buf = sac_ops.ReplayBuffer(4, 4, 2)
        buf.push(self.transition(1.0))
        with pytest.raises(sac_ops.InsufficientDataError):
            sac_ops.buffer_sample(buf, 3, self.rng)

    def test_buffer_sample_default_batch_needs_warmup(self):
        """Test 100 transitions cannot serve the default batch of 512"""
        buf = sac_ops.ReplayBuffer(sac_ops.SacConfig().buffer_capacity, 4, 2)
        for r in range(100):
            buf.push(self.transition(r))
        with pytest.raises(sac_ops.InsufficientDataError):
            buf.sample(sac_ops.SacConfig().batch_size, self.rng)

    def test_buffer_sample_reproducible(self):
        """Test the same seed samples the same batch"""
        buf = sac_ops.ReplayBuffer(64, 4, 2)
        for r in range(50):
            buf.push(self.transition(r))
        a = buf.sample(10, np.random.default_rng(3))
        b = buf.sample(10, np.random.default_rng(3))
        assert np.array_equal(a.rewards, b.rewards)

    def test_critic_targets_done(self):
        """Test done rows get y = r exactly"""
        batch = self.make_batch(done=True)
        y = sac_ops.critic_targets(self.agent, batch, self.rng.standard_normal((8, 2)), 0.98)
        assert np.array_equal(y, batch.rewards)

    def test_critic_targets_twin_min(self):
        """Test the bootstrap uses the smaller target critic and the entropy term"""
        agent = dataclasses.replace(
            self.agent, target1=constant_critic(6, 3.0), target2=constant_critic(6, 5.0), log_temperature=math.log(0.2)
        )
        batch = self.make_batch(n=1, done=False)
        noise = np.array([[0.4, -1.1]])
        _, logp, _, _ = sac_ops.sample_actions(agent.actor, batch.next_states, noise)
        y = sac_ops.critic_targets(agent, batch, noise, 0.9)
        expected = batch.rewards[0] + 0.9 * (3.0 - 0.2 * logp[0])
        assert abs(y[0] - expected) < 1e-12

    def test_critic_perfect_fit(self):
        """Test a critic matching its targets has zero loss and zero gradient"""
        batch = self.make_batch(n=4)
        critic = constant_critic(6, 1.5)
        loss, grads = sac_ops.critic_loss_and_grads(critic, batch, np.full(4, 1.5))
        assert loss == 0.0
        assert all(not np.any(g) for g in grads.arrays())

    def test_critic_gradient_finite_differences(self):
        """Test critic loss gradients against central differences"""
        batch = self.make_batch(n=6)
        targets = self.rng.uniform(-1, 1, size=6)
        critic = self.agent.critic1.copy()

        def loss():
            return sac_ops.critic_loss_and_grads(critic, batch, targets)[0]

        analytic = sac_ops.critic_loss_and_grads(critic, batch, targets)[1].arrays()
        numeric = finite_differences(loss, critic.arrays())
        for a, n in zip(analytic, numeric):
            assert max_relative_error(a, n) < 1e-4

    def test_actor_gradient_finite_differences(self):
        """Test actor loss gradients against central differences"""
        agent = dataclasses.replace(self.agent, log_temperature=math.log(0.3))
        states = self.rng.uniform(-1, 1, size=(5, 4))
        noise = self.rng.standard_normal((5, 2))

        def loss():
            return sac_ops.actor_loss_and_grads(agent, states, noise)[0]

        analytic = sac_ops.actor_loss_and_grads(agent, states, noise)[1].arrays()
        numeric = finite_differences(loss, agent.actor.arrays())
        for a, n in zip(analytic, numeric):
            assert max_relative_error(a, n) < 1e-4

    def test_actor_constant_critics_zero_temperature(self):
        """Test omega 0 and constant Q give zero gradient and loss -min(Q)"""
        agent = dataclasses.replace(
            self.agent, critic1=constant_critic(6, 2.0), critic2=constant_critic(6, 4.0), log_temperature=-800.0
        )
        states = self.rng.uniform(-1, 1, size=(5, 4))
        loss, grads, _ = sac_ops.actor_loss_and_grads(agent, states, self.rng.standard_normal((5, 2)))
        assert loss == pytest.approx(-2.0)
        assert all(np.allclose(g, 0.0) for g in grads.arrays())

    def test_actor_loss_increases_with_omega(self):
        """Test the entropy term weight when log-probabilities are positive"""
        states = self.rng.uniform(-1, 1, size=(5, 4))
        noise = self.rng.standard_normal((5, 2))
        # Narrow policy: log pi is large and positive
        actor = self.agent.actor.copy()
        actor.biases[-1][2:] = -5.0
        agent = dataclasses.replace(self.agent, actor=actor)
        low = sac_ops.actor_loss_and_grads(dataclasses.replace(agent, log_temperature=math.log(0.5)), states, noise)
        high = sac_ops.actor_loss_and_grads(dataclasses.replace(agent, log_temperature=math.log(1.0)), states, noise)
        assert np.all(low[2] > 0)
        assert high[0] > low[0]

    def test_temperature_stationary_at_target(self):
        """Test entropy equal to the target gives zero gradient"""
        _, grad = sac_ops.temperature_loss_and_grad(0.3, np.array([2.0, 2.0]), -2.0)
        assert grad == 0.0

    def test_temperature_raised_when_entropy_low(self):
        """Test entropy below target pushes omega up"""
        log_probs = np.array([5.0, 6.0])     # entropy estimate -5.5 < target -2
        _, grad = sac_ops.temperature_loss_and_grad(0.0, log_probs, -2.0)
        assert grad < 0
        batch = self.make_batch(n=2)
        updated, _ = sac_ops.temperature_update(self.agent, batch, -2.0, log_probs=log_probs)
        assert updated.log_temperature > self.agent.log_temperature

    def test_entropy_target_default(self):
        """Test the default target is -action_dim"""
        assert sac_ops.SacConfig().entropy_target(8) == -8.0

    def test_soft_update_extremes(self):
        """Test tau=1 copies critics and tau=0 keeps targets"""
        agent = dataclasses.replace(self.agent, critic1=constant_critic(6, 1.0), target1=constant_critic(6, 0.0))
        copied = sac_ops.soft_update(agent, 1.0)
        assert all(np.array_equal(a, b) for a, b in zip(copied.target1.arrays(), agent.critic1.arrays()))
        kept = sac_ops.soft_update(agent, 0.0)
        assert all(np.array_equal(a, b) for a, b in zip(kept.target1.arrays(), agent.target1.arrays()))

    def test_soft_update_arithmetic(self):
        """Test phi=1, phi_bar=0, tau=0.005 gives 0.005"""
        ones = neural_ops.MlpParams.from_arrays([np.ones_like(a) for a in self.agent.critic1.arrays()])
        zeros = neural_ops.MlpParams.from_arrays([np.zeros_like(a) for a in self.agent.critic1.arrays()])
        agent = dataclasses.replace(self.agent, critic1=ones, target1=zeros)
        updated = sac_ops.soft_update(agent, 0.005)
        assert all(np.all(a == 0.005) for a in updated.target1.arrays())

    def test_sac_update_touches_every_part(self):
        """Test a full update changes actor, critics, targets and temperature"""
        batch = self.make_batch(n=8)
        updated, stats = sac_ops.sac_update(self.agent, batch, self.rng, self.config)
        assert not np.array_equal(updated.actor.weights[0], self.agent.actor.weights[0])
        assert not np.array_equal(updated.critic1.weights[0], self.agent.critic1.weights[0])
        assert not np.array_equal(updated.target2.weights[0], self.agent.target2.weights[0])
        assert updated.log_temperature != self.agent.log_temperature
        assert set(stats) == {"critic_loss", "actor_loss", "temperature_loss"}

    def test_train_zero_steps(self):
        """Test total_steps 0 returns an initialized agent and an empty curve"""
        env = env_ops.DeploymentEnv(env_ops.EnvConfig(make_scenario(), ObjectiveSpec()))
        agent, curve = sac_ops.train(env, sac_ops.SacConfig(total_steps=0))
        assert curve == []
        assert agent.actor.input_dim == env.state_dim

    def test_train_deterministic(self):
        """Test the same seed gives identical curves and weights"""
        config = sac_ops.SacConfig(hidden_sizes=(8,), learning_rate=1e-3, buffer_capacity=256, batch_size=16,
                                   total_steps=60, warmup_steps=20, eval_every=30, eval_episodes=1, seed=3)
        env_config = env_ops.EnvConfig(make_scenario(variance=1.0), ObjectiveSpec(), grid_resolution=9)
        a_agent, a_curve = sac_ops.train(env_ops.DeploymentEnv(env_config), config)
        b_agent, b_curve = sac_ops.train(env_ops.DeploymentEnv(env_config), config)
        assert [dataclasses.asdict(p) for p in a_curve] == [dataclasses.asdict(p) for p in b_curve]
        assert [p.step for p in a_curve] == [30, 60]
        assert np.array_equal(a_agent.actor.weights[0], b_agent.actor.weights[0])

    def test_train_keep_best(self):
        """Test keep_best returns the weights behind the highest evaluation"""
        config = sac_ops.SacConfig(hidden_sizes=(8,), learning_rate=1e-3, buffer_capacity=256, batch_size=16,
                                   total_steps=90, warmup_steps=20, eval_every=15, eval_episodes=1, seed=5,
                                   keep_best=True)
        env_config = env_ops.EnvConfig(make_scenario(), ObjectiveSpec(), grid_resolution=9)
        agent, curve = sac_ops.train(env_ops.DeploymentEnv(env_config), config)
        assert len(curve) == 6
        eval_seq = np.random.SeedSequence(5).spawn(5)[4]
        value = sac_ops.evaluate_greedy(agent, env_ops.DeploymentEnv(env_config), eval_seq, 1)
        assert value == max(p.eval_reward for p in curve)

        final, _ = sac_ops.train(env_ops.DeploymentEnv(env_config), dataclasses.replace(config, keep_best=False))
        final_value = sac_ops.evaluate_greedy(final, env_ops.DeploymentEnv(env_config), eval_seq, 1)
        assert final_value == curve[-1].eval_reward

    def test_checkpoint_round_trip(self):
        """Test checkpoints restore every network bit-exactly"""
        doc = json.loads(json.dumps(sac_ops.save_checkpoint(self.agent, self.config)))
        agent, config = sac_ops.load_checkpoint(doc)
        assert config == self.config
        assert agent.log_temperature == self.agent.log_temperature
        for name in ("actor", "critic1", "critic2", "target1", "target2"):
            for a, b in zip(getattr(agent, name).arrays(), getattr(self.agent, name).arrays()):
                assert np.array_equal(a, b)

    def test_invalid_config(self):
        """Test out-of-range hyperparameters are rejected"""
        with pytest.raises(ConfigError, match="tau"):
            sac_ops.SacConfig(tau=0.0)
        with pytest.raises(ConfigError, match="batch_size"):
            sac_ops.SacConfig(buffer_capacity=4, batch_size=8)


class TestCategory6Baselines:
    """Test Category 6: Grid oracle, random search, CEM"""

    def setup_method(self):
        self.scenario = make_scenario()
        self.spec = ObjectiveSpec()

    def test_grid_degenerate(self):
        """Test M=N=1 gives best value 0"""
        scenario = make_scenario(num_tx=1, num_rx=1)
        for g in (2, 3, 5):
            assert baseline_ops.grid_oracle(scenario, self.spec, g).best_value == pytest.approx(0.0, abs=1e-12)

    def test_grid_mirror_symmetry(self):
        """Test mirroring the scenario about the x-axis keeps the optimum"""
        upper = make_scenario(centers=((3.0, 4.0),))
        lower = make_scenario(centers=((3.0, -4.0),))
        a = baseline_ops.grid_oracle(upper, self.spec, 5)
        b = baseline_ops.grid_oracle(lower, self.spec, 5)
        assert a.best_value == pytest.approx(b.best_value, rel=1e-9)
        assert a.evaluations == 5 ** 6

    def test_grid_value_matches_evaluate(self):
        """Test the reported value is the evaluate() value of the deployment"""
        result = baseline_ops.grid_oracle(self.scenario, self.spec, 3)
        report = metric_ops.evaluate(result.best_deployment, [(5.0, 5.0)],
                                     scenario_ops.sample_trajectory(self.scenario.trajectory), self.spec)
        assert result.best_value == report.objective_value

    def test_grid_self_check(self):
        """Test re-evaluating every grid point independently reproduces best_value"""
        result = baseline_ops.grid_oracle(self.scenario, self.spec, 3)
        targets = scenario_ops.sample_trajectory(self.scenario.trajectory)
        axis = (-10.0, 0.0, 10.0)
        best = -np.inf
        for c in itertools.product(axis, repeat=6):
            deployment = Deployment((Point2D(c[0], c[1]), Point2D(c[2], c[3])), (Point2D(c[4], c[5]),))
            best = max(best, metric_ops.evaluate(deployment, [(5.0, 5.0)], targets, self.spec).objective_value)
        assert result.best_value == pytest.approx(best, rel=1e-12)

    def test_grid_budget_cap(self):
        """Test the cap raises with the computed count"""
        with pytest.raises(baseline_ops.BudgetExceededError, match="729"):
            baseline_ops.grid_oracle(self.scenario, self.spec, 3, budget_cap=100)

    def test_random_search_single_draw(self):
        """Test budget 1 returns the value of that draw"""
        result = baseline_ops.random_search(self.scenario, self.spec, 1, np.random.default_rng(5))
        a = np.random.default_rng(5).uniform(-1.0, 1.0, size=(1, 6))
        tx, rx = env_ops.decode_actions(a, self.scenario.region, 0, 2)
        targets = scenario_ops.sample_trajectory(self.scenario.trajectory)
        expected = metric_ops.evaluate_batch(tx, rx, [(5.0, 5.0)], targets, self.spec)[0]
        assert result.best_value == pytest.approx(expected, rel=1e-12)
        assert result.evaluations == 1

    def test_random_search_monotone_in_budget(self):
        """Test a larger budget never does worse on the same seed stream"""
        values = [baseline_ops.random_search(self.scenario, self.spec, b, np.random.default_rng(8)).best_value
                  for b in (10, 100, 1000)]
        assert values == sorted(values)

    def test_cem_zero_std(self):
        """Test initial_std 0 returns the initial mean's value"""
        cfg = baseline_ops.CemConfig(population=8, elite_fraction=0.25, iterations=1, initial_std=0.0)
        result = baseline_ops.cem_optimize(self.scenario, self.spec, cfg)
        center = env_ops.decode_action(np.zeros(6), self.scenario.region, num_tx=2)
        report = metric_ops.evaluate(center, [(5.0, 5.0)],
                                     scenario_ops.sample_trajectory(self.scenario.trajectory), self.spec)
        assert result.best_value == pytest.approx(report.objective_value, abs=1e-12)

    def test_cem_history_monotone(self):
        """Test best-ever history never decreases"""
        cfg = baseline_ops.CemConfig(population=32, iterations=15, seed=2)
        result = baseline_ops.cem_optimize(self.scenario, self.spec, cfg)
        assert len(result.history) == 15
        assert all(b >= a for a, b in zip(result.history, result.history[1:]))
        assert result.evaluations == 32 * 15

    def test_snapped_cem_bounded_by_grid(self):
        """Test CEM restricted to the G-grid never beats the G-grid oracle"""
        grid = baseline_ops.grid_oracle(self.scenario, self.spec, 5)
        cfg = baseline_ops.CemConfig(population=64, iterations=20, initial_std=0.6, grid_resolution=5, seed=1)
        cem = baseline_ops.cem_optimize(self.scenario, self.spec, cfg)
        assert cem.best_value <= grid.best_value * (1 + 1e-12)
        assert cem.best_value > 0

    def test_refined_cem_matches_grid_oracle(self):
        """Test refined CEM on a 5-point grid reaches the 5-point grid optimum"""
        grid = baseline_ops.grid_oracle(self.scenario, self.spec, 5)
        cfg = baseline_ops.CemConfig(population=64, iterations=20, initial_std=0.6, grid_resolution=5,
                                     refine=True, seed=1)
        cem = baseline_ops.cem_optimize(self.scenario, self.spec, cfg)
        assert cem.best_value <= grid.best_value * (1 + 1e-12)
        assert cem.best_value >= 0.99 * grid.best_value
        assert len(cem.history) == 21
        assert cem.evaluations > 64 * 20

    def test_grid_refinement_has_no_improving_move(self):
        """Test no single AP moved to another grid cell beats a refined result"""
        cfg = baseline_ops.CemConfig(population=16, iterations=2, grid_resolution=5, refine=True, seed=4)
        result = baseline_ops.cem_optimize(self.scenario, self.spec, cfg)
        targets = scenario_ops.sample_trajectory(self.scenario.trajectory)
        aps = list(result.best_deployment.tx + result.best_deployment.rx)
        for j in range(len(aps)):
            for x, y in itertools.product(np.linspace(-10.0, 10.0, 5), repeat=2):
                moved = aps[:j] + [Point2D(float(x), float(y))] + aps[j + 1:]
                deployment = Deployment(tuple(moved[:2]), tuple(moved[2:]))
                value = metric_ops.evaluate(deployment, [(5.0, 5.0)], targets, self.spec).objective_value
                assert value <= result.best_value * (1 + 1e-9)

    def test_continuous_refinement_never_worse(self):
        """Test continuous refinement starts from the CEM best and only climbs"""
        cfg = baseline_ops.CemConfig(population=32, iterations=5, seed=6)
        plain = baseline_ops.cem_optimize(self.scenario, self.spec, cfg)
        refined = baseline_ops.cem_optimize(self.scenario, self.spec, dataclasses.replace(cfg, refine=True))
        assert refined.best_value >= plain.best_value * (1 - 1e-12)
        assert refined.history[:5] == plain.history
        assert refined.history[-1] == pytest.approx(refined.best_value, rel=1e-12)

    def test_refine_on_grid_reaches_block_optimum(self):
        """Test grid refinement from the center finds the best single-AP cell"""
        values = {(0.5, -0.5): 3.0, (1.0, 1.0): 2.0}

        def score(actions):
            return np.array([values.get((round(a[0], 6), round(a[1], 6)), 0.0) + float(a[2] == 0.0)
                             for a in actions])

        x, value, evaluations = baseline_ops.refine_on_grid(np.zeros(4), 1.0, score, 5, 2)
        assert list(x[:2]) == [0.5, -0.5]
        assert value == 4.0
        assert evaluations > 0

    def test_invalid_cem_config(self):
        """Test an elite set of zero members is rejected"""
        with pytest.raises(ConfigError, match="elite_fraction"):
            baseline_ops.CemConfig(population=4, elite_fraction=0.1)
        with pytest.raises(ConfigError, match="grid_resolution"):
            baseline_ops.CemConfig(grid_resolution=1)


class TestConfigOperations:
    """Test experiment configuration documents"""

    def test_shipped_configs_load(self):
        """Test every shipped config parses"""
        for path in sorted(CONFIG_DIR.glob("*.toml")):
            config = config_ops.load_config(path.read_text(encoding="utf-8"))
            assert config.scenario.num_aps >= 3

    def test_toy_config_values(self):
        """Test the toy acceptance scenario"""
        config = config_ops.load_config((CONFIG_DIR / "toy_acceptance.toml").read_text(encoding="utf-8"))
        assert (config.scenario.num_tx, config.scenario.num_rx) == (2, 1)
        assert config.scenario.ue_spec.variance == 0.0
        assert config.grid_resolution == 9
        assert config.solver.sac.learning_rate == 3e-4
        assert config.solver.sac.seed == config.seed
        assert config.solver.sac.keep_best
        assert config.solver.cem.refine

    def test_sweep_seeds(self):
        """Test a seeds-only sweep parses and echoes through render_config"""
        config = config_ops.load_config(SCENARIO_TEXT + "\n[sweep]\nseeds = [3, 1, 2]\n")
        assert config.sweep.seeds == (3, 1, 2)
        assert config.sweep.ap_pairs == ()
        assert config_ops.load_config(config_ops.render_config(config)) == config

    def test_sweep_seeds_distinct(self):
        """Test repeated sweep seeds are rejected"""
        with pytest.raises(ConfigError, match="sweep.seeds"):
            config_ops.load_config(SCENARIO_TEXT + "\n[sweep]\nseeds = [1, 1]\n")


    def test_render_round_trip(self):
        """Test render_config is accepted by load_config unchanged"""
        config = config_ops.load_config((CONFIG_DIR / "ap_sweep.toml").read_text(encoding="utf-8"))
        assert config_ops.load_config(config_ops.render_config(config)) == config

    def test_unknown_solver_key(self):
        """Test a typo inside a solver table is named"""
        text = SCENARIO_TEXT + "\n[solver.sac]\nlearning_rat = 0.1\n"
        with pytest.raises(ConfigError, match="solver.sac.learning_rat"):
            config_ops.load_config(text)

    def test_unknown_top_level_key(self):
        """Test unknown top-level keys are rejected"""
        with pytest.raises(ConfigError, match="solvers"):
            config_ops.load_config(SCENARIO_TEXT + "\n[solvers]\nname = 'sac'\n")

    def test_empty_sweep(self):
        """Test an empty sweep table is a validation error"""
        with pytest.raises(ConfigError, match="sweep"):
            config_ops.load_config(SCENARIO_TEXT + "\n[sweep]\nap_pairs = []\n")

    def test_overrides_follow_seed(self):
        """Test a seed override reaches every seeded component"""
        config = config_ops.with_overrides(config_ops.load_config(SCENARIO_TEXT), seed=99, objective="max_min",
                                           solver="cem")
        assert config.seed == 99
        assert config.solver.sac.seed == 99
        assert config.solver.cem.seed == 99
        assert config.objective.kind == ObjectiveKind.MAX_MIN
        assert config.solver.name == "cem"

    def test_invalid_solver_name(self):
        """Test unknown solver names are rejected"""
        with pytest.raises(ConfigError, match="solver.name"):
            config_ops.load_config(SCENARIO_TEXT + "\n[solver]\nname = 'ppo'\n")


class TestReportOperations:
    """Test JSON, CSV and SVG emission"""

    def setup_method(self):
        self.scenario = make_scenario(num_tx=2, num_rx=2, centers=((5.0, 5.0), (-5.0, 2.0), (0.0, -7.0)))
        self.deployment = Deployment((Point2D(1.0, 1.0), Point2D(-2.0, 3.0)),
                                     (Point2D(4.0, -4.0), Point2D(-6.0, -6.0)))
        self.ues = scenario_ops.fixed_ue_draw(self.scenario)
        self.points = scenario_ops.sample_trajectory(self.scenario.trajectory)

    def test_svg_primitive_count(self):
        """Test the scene holds M + N + K + Q + 1 primitives and the axes and legend groups exist"""
        svg = report_ops.render_deployment_svg(self.scenario, self.deployment, self.ues, self.points, 400)
        root = ET.fromstring(svg.split("\n", 1)[1])
        ns = {"svg": "http://www.w3.org/2000/svg"}
        groups = {g.get("id"): g for g in root.findall("svg:g", ns)}
        assert set(groups) == {"axes", "scene", "legend"}
        assert len(list(groups["scene"])) == 2 + 2 + 3 + 8 + 1

    def test_svg_deterministic(self):
        """Test identical inputs give identical SVG text"""
        a = report_ops.render_deployment_svg(self.scenario, self.deployment, self.ues, self.points)
        b = report_ops.render_deployment_svg(self.scenario, self.deployment, self.ues, self.points)
        assert a == b

    def test_json_nan_becomes_null(self):
        """Test non-finite floats are written as null"""
        doc = json.loads(report_ops.render_json({"a": float("nan"), "b": [1.0, float("inf")]}))
        assert doc == {"a": None, "b": [1.0, None]}

    def test_csv_header_only(self, tmp_path):
        """Test an empty table still carries its header"""
        path = report_ops.write_csv(tmp_path / "curve.csv", [], report_ops.CURVE_COLUMNS)
        assert path.read_text().strip() == ",".join(report_ops.CURVE_COLUMNS)

    def test_csv_append_rows(self, tmp_path):
        """Test rows are appended one at a time under the header"""
        path = report_ops.start_csv(tmp_path / "sweep.csv", ["a", "b"])
        report_ops.append_csv_row(path, {"a": 1, "b": 2.5}, ["a", "b"])
        report_ops.append_csv_row(path, {"a": 2, "b": 3.5}, ["a", "b"])
        assert path.read_text().splitlines() == ["a,b", "1,2.5", "2,3.5"]

    def test_seed_band_rows(self):
        """Test per-step mean, min and max across seeds"""
        def row(step, eval_reward, train_reward):
            return {"step": step, "eval_reward": eval_reward, "train_reward": train_reward,
                    "actor_loss": 0.0, "critic_loss": 0.0, "omega": 1.0}

        curves = [[row(10, 1.0, 0.5), row(20, 4.0, 2.0)], [row(10, 3.0, 1.5), row(20, 2.0, 1.0)], []]
        band = report_ops.seed_band_rows(curves)
        assert [list(r) for r in band] == [report_ops.BAND_COLUMNS] * 2
        assert [r["step"] for r in band] == [10, 20]
        assert [r["runs"] for r in band] == [2, 2]
        assert (band[0]["eval_mean"], band[0]["eval_min"], band[0]["eval_max"]) == (2.0, 1.0, 3.0)
        assert (band[1]["train_mean"], band[1]["train_min"], band[1]["train_max"]) == (1.5, 1.0, 2.0)

    def test_seed_band_rows_empty(self):
        """Test no curves give no band rows"""
        assert report_ops.seed_band_rows([[], []]) == []



if __name__ == '__main__':
    pytest.main([__file__, '-v'])
