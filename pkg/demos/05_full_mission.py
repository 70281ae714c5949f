"""Run short closed-loop missions and compare the three policies.

The beam-search planner ("magician"), the single-step greedy baseline, and a
collision-aware random walk all share the same ground-truth cloud and seed,
so differences in the coverage curves come from planning alone.
"""

from splatplan.evaluation import CoverageReport, build_gt_cloud
from splatplan.geometry import CameraModel, generate_scene
from splatplan.mission import MappingConfig, MissionConfig, run_mission
from splatplan.planner import ActionSpace, PlannerConfig
from splatplan.splat import RenderConfig

scene = generate_scene("room-with-pillars", seed=0)
diag = scene.diagonal()
cam = CameraModel(64, 36, 90.0, 60.0, 0.1, diag)
space = ActionSpace("wheeled", translation_step=diag / 40, yaw_step=10.0,
                    fixed_height=1.25)
pcfg = PlannerConfig(n_beams=10, horizon=10, execute=1)
rcfg = RenderConfig.for_scene(cam, diag)
mapping = MappingConfig()

gt = build_gt_cloud(scene, cam, n_views=200, seed=0)
print(f"ground-truth cloud: {gt.points.shape[0]} visible surface points")

steps = 40
for policy in ("random", "greedy", "magician"):
    log = run_mission(scene, cam, space, pcfg, rcfg,
                      MissionConfig(total_steps=steps, seed=1), mapping,
                      policy=policy, gt_cloud=gt)
    rep = CoverageReport.from_curve(log.coverage_curve)
    bar = "#" * int(50 * rep.final_coverage)
    print(f"{policy:9s} final {rep.final_coverage:.3f}  auc {rep.auc:.3f}  {bar}")
