import math

import numpy as np
import pytest

from splatplan import mission as mission_mod
from splatplan.evaluation import build_gt_cloud
from splatplan.geometry import SceneModel, generate_scene, _box
from splatplan.mission import (MappingConfig, MissionConfig, inject_pose_noise,
                               run_mission)
from splatplan.planner import ActionSpace, PlannerConfig, TrappedError
from splatplan.splat import RenderConfig
from splatplan.geometry import CameraModel, pose_from_yaw_pitch


def _setup(scene_kind="room-with-pillars", scene_seed=0):
    scene = generate_scene(scene_kind, scene_seed)
    diag = scene.diagonal()
    cam = CameraModel(48, 27, 90.0, 60.0, 0.1, diag)
    space = ActionSpace("wheeled", translation_step=diag / 40.0, yaw_step=10.0,
                        fixed_height=1.25)
    rcfg = RenderConfig.for_scene(cam, diag)
    mapping = MappingConfig(n_proxy_points=600, n_gt_views=60)
    return scene, cam, space, rcfg, mapping


SMALL_PLANNER = PlannerConfig(n_beams=3, horizon=3, execute=1)


class TestMissionConfig:
    def test_rejects_zero_steps(self):
        with pytest.raises(ValueError):
            MissionConfig(total_steps=0)

    def test_rejects_negative_noise(self):
        with pytest.raises(ValueError):
            MissionConfig(total_steps=5, noise_sigma_t=-0.1)

    def test_rejects_unknown_start_policy(self):
        with pytest.raises(ValueError):
            MissionConfig(total_steps=5, start="teleport")


class TestRunMission:
    def test_single_step_mission(self):
        scene, cam, space, rcfg, mapping = _setup()
        gt = build_gt_cloud(scene, cam, 40, 0)
        log = run_mission(scene, cam, space, SMALL_PLANNER, rcfg,
                          MissionConfig(total_steps=1, seed=0), mapping,
                          gt_cloud=gt)
        assert len(log.records) == 1
        assert log.records[0].step == 1
        assert not log.trapped

    def test_deterministic_per_seed(self):
        scene, cam, space, rcfg, mapping = _setup()
        gt = build_gt_cloud(scene, cam, 40, 0)
        logs = [run_mission(scene, cam, space, SMALL_PLANNER, rcfg,
                            MissionConfig(total_steps=6, seed=11), mapping,
                            gt_cloud=gt) for _ in range(2)]
        a, b = logs
        assert len(a.records) == len(b.records)
        for ra, rb in zip(a.records, b.records):
            assert np.array_equal(ra.position, rb.position)
            assert np.array_equal(ra.quat, rb.quat)
            assert ra.coverage == rb.coverage
            assert ra.planned_gain == rb.planned_gain

    def test_coverage_curve_non_decreasing(self):
        scene, cam, space, rcfg, mapping = _setup()
        gt = build_gt_cloud(scene, cam, 40, 0)
        log = run_mission(scene, cam, space, SMALL_PLANNER, rcfg,
                          MissionConfig(total_steps=8, seed=2), mapping,
                          gt_cloud=gt)
        curve = log.coverage_curve
        assert np.all(np.diff(curve) >= 0)

    def test_plan_once_execute_all_terminates(self):
        scene, cam, space, rcfg, mapping = _setup()
        gt = build_gt_cloud(scene, cam, 40, 0)
        pcfg = PlannerConfig(n_beams=2, horizon=3, execute=3)
        log = run_mission(scene, cam, space, pcfg, rcfg,
                          MissionConfig(total_steps=7, replan_every=3, seed=3),
                          mapping, gt_cloud=gt)
        assert len(log.records) == 7
        assert [r.step for r in log.records] == list(range(1, 8))

    def test_consecutive_poses_differ_by_one_action(self):
        scene, cam, space, rcfg, mapping = _setup()
        gt = build_gt_cloud(scene, cam, 40, 0)
        log = run_mission(scene, cam, space, SMALL_PLANNER, rcfg,
                          MissionConfig(total_steps=6, seed=4), mapping,
                          gt_cloud=gt)
        positions = [r.position for r in log.records]
        for a, b in zip(positions, positions[1:]):
            d = np.linalg.norm(b - a)
            assert d == pytest.approx(0.0, abs=1e-12) or \
                d == pytest.approx(space.translation_step, abs=1e-9)

    def test_random_policy_runs_and_logs(self):
        scene, cam, space, rcfg, mapping = _setup()
        gt = build_gt_cloud(scene, cam, 40, 0)
        log = run_mission(scene, cam, space, SMALL_PLANNER, rcfg,
                          MissionConfig(total_steps=10, seed=5), mapping,
                          policy="random", gt_cloud=gt)
        assert len(log.records) == 10
        assert all(r.planned_gain == 0.0 for r in log.records)

    def test_unknown_policy_rejected(self):
        scene, cam, space, rcfg, mapping = _setup()
        with pytest.raises(ValueError):
            run_mission(scene, cam, space, SMALL_PLANNER, rcfg,
                        MissionConfig(total_steps=1), mapping, policy="oracle")

    def test_start_pose_in_collision_rejected(self):
        # a pillar occupying the room center blocks the canonical start
        tris = np.asarray(_box((0, 0, 0), (4.0, 4.0, 2.5))
                          + _box((1.8, 1.8, 0.0), (2.2, 2.2, 2.5)))
        scene = SceneModel.from_triangles(tris)
        cam = CameraModel(48, 27, 90.0, 60.0, 0.1, scene.diagonal())
        space = ActionSpace("wheeled", translation_step=0.2, yaw_step=10.0,
                            fixed_height=1.25)
        rcfg = RenderConfig.for_scene(cam, scene.diagonal())
        with pytest.raises(ValueError, match="collision"):
            run_mission(scene, cam, space, SMALL_PLANNER, rcfg,
                        MissionConfig(total_steps=1),
                        MappingConfig(n_proxy_points=100, n_gt_views=5))

    def test_trapped_planner_ends_mission_with_marker(self, monkeypatch):
        scene, cam, space, rcfg, mapping = _setup()
        gt = build_gt_cloud(scene, cam, 40, 0)
        calls = {"n": 0}
        real_plan = mission_mod.plan

        def plan_then_trap(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] >= 3:
                raise TrappedError("boxed in")
            return real_plan(*args, **kwargs)

        monkeypatch.setattr(mission_mod, "plan", plan_then_trap)
        log = run_mission(scene, cam, space, SMALL_PLANNER, rcfg,
                          MissionConfig(total_steps=10, seed=6), mapping,
                          gt_cloud=gt)
        assert log.trapped
        assert len(log.records) == 2

    def test_random_free_start_is_free_and_seeded(self):
        scene, cam, space, rcfg, mapping = _setup()
        gt = build_gt_cloud(scene, cam, 40, 0)
        logs = [run_mission(scene, cam, space, SMALL_PLANNER, rcfg,
                            MissionConfig(total_steps=1, seed=9, start="random-free"),
                            mapping, gt_cloud=gt) for _ in range(2)]
        assert np.array_equal(logs[0].records[0].position, logs[1].records[0].position)

    def test_export_records_have_no_timing_fields(self):
        scene, cam, space, rcfg, mapping = _setup()
        gt = build_gt_cloud(scene, cam, 40, 0)
        log = run_mission(scene, cam, space, SMALL_PLANNER, rcfg,
                          MissionConfig(total_steps=2, seed=7), mapping,
                          gt_cloud=gt)
        rec = log.to_records()[0]
        assert set(rec) == {"step", "position", "quat", "planned_gain", "coverage"}


class TestNoiseChannel:
    def test_noise_only_affects_mapping_not_motion(self):
        scene, cam, space, rcfg, mapping = _setup()
        gt = build_gt_cloud(scene, cam, 40, 0)
        log = run_mission(scene, cam, space, SMALL_PLANNER, rcfg,
                          MissionConfig(total_steps=6, seed=8,
                                        noise_sigma_t=0.2, noise_sigma_r=3.0),
                          mapping, gt_cloud=gt)
        # executed positions remain exact action compositions
        positions = [r.position for r in log.records]
        for a, b in zip(positions, positions[1:]):
            d = np.linalg.norm(b - a)
            assert d == pytest.approx(0.0, abs=1e-12) or \
                d == pytest.approx(space.translation_step, abs=1e-9)


class TestInjectPoseNoise:
    def test_zero_sigma_is_identity(self):
        rng = np.random.default_rng(0)
        pose = pose_from_yaw_pitch([1.0, 2.0, 3.0], 0.5, 0.2)
        out = inject_pose_noise(pose, 0.0, 0.0, rng)
        assert np.array_equal(out.position, pose.position)
        assert np.array_equal(out.quat, pose.quat)

    def test_translation_standard_deviation(self):
        rng = np.random.default_rng(1)
        pose = pose_from_yaw_pitch([0.0, 0.0, 0.0], 0.0, 0.0)
        sigma = 0.5
        offsets = np.array([inject_pose_noise(pose, sigma, 0.0, rng).position
                            for _ in range(10000)])
        rms_norm = np.sqrt(np.mean(np.sum(offsets ** 2, axis=1)))
        assert rms_norm == pytest.approx(sigma * math.sqrt(3.0), rel=0.05)
        assert offsets.std(axis=0) == pytest.approx([sigma] * 3, rel=0.05)

    def test_output_quaternion_unit_norm(self):
        rng = np.random.default_rng(2)
        pose = pose_from_yaw_pitch([0.0, 0.0, 0.0], 1.2, -0.4)
        for _ in range(100):
            out = inject_pose_noise(pose, 0.1, 5.0, rng)
            assert abs(np.linalg.norm(out.quat) - 1.0) < 1e-9
