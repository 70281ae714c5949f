import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from splatplan import geometry as geom
from splatplan.evaluation import build_gt_cloud
from splatplan.mission import MappingConfig, MissionConfig, run_mission
from splatplan.planner import ActionSpace, PlannerConfig
from splatplan.splat import RenderConfig


@pytest.fixture(scope="session")
def pillars_scene():
    return geom.generate_scene("room-with-pillars", 0)


@pytest.fixture(scope="session")
def planning_cam(pillars_scene):
    return geom.CameraModel(64, 36, 90.0, 60.0, 0.1, pillars_scene.diagonal())


class MissionRunner:
    """Session cache so acceptance criteria can share paired mission runs."""

    def __init__(self):
        self._scenes = {}
        self._gt = {}
        self._logs = {}

    def scene(self, kind, seed=0):
        key = (kind, seed)
        if key not in self._scenes:
            self._scenes[key] = geom.generate_scene(kind, seed)
        return self._scenes[key]

    def setup(self, kind, scene_seed=0):
        scene = self.scene(kind, scene_seed)
        diag = scene.diagonal()
        cam = geom.CameraModel(64, 36, 90.0, 60.0, 0.1, diag)
        space = ActionSpace("wheeled", translation_step=diag / 40.0,
                            yaw_step=10.0, fixed_height=1.25)
        rcfg = RenderConfig.for_scene(cam, diag)
        key = (kind, scene_seed)
        if key not in self._gt:
            self._gt[key] = build_gt_cloud(scene, cam, 200, 0)
        return scene, cam, space, rcfg, self._gt[key]

    def run(self, kind, policy, seed, *, n_beams=10, horizon=10, execute=1,
            steps=100, noise=(0.0, 0.0), scene_seed=0, n_proxy_points=2000):
        key = (kind, policy, seed, n_beams, horizon, execute, steps, noise,
               scene_seed, n_proxy_points)
        if key not in self._logs:
            scene, cam, space, rcfg, gt = self.setup(kind, scene_seed)
            pcfg = PlannerConfig(n_beams=n_beams, horizon=horizon, execute=execute)
            mcfg = MissionConfig(total_steps=steps, replan_every=execute,
                                 noise_sigma_t=noise[0], noise_sigma_r=noise[1],
                                 seed=seed, check_monotone=(policy == "magician"))
            self._logs[key] = run_mission(scene, cam, space, pcfg, rcfg, mcfg,
                                          MappingConfig(n_proxy_points=n_proxy_points),
                                          policy=policy, gt_cloud=gt)
        return self._logs[key]


@pytest.fixture(scope="session")
def mission_runner():
    return MissionRunner()
