"""Active depth-sensor mapping with splat-rendered coverage gain.

The package simulates a depth camera exploring an unknown triangle scene,
maintains a probabilistic occupancy field from its observations, converts the
field into a set of proxy Gaussians whose opacities encode occupancy and whose
scalar color encodes per-surface novelty, and plans long-horizon trajectories
with beam search by rendering those Gaussians to estimate how much new surface
each candidate viewpoint would cover.
"""

from .geometry import (CameraModel, DepthImage, MeshLoadError, Pose,
                       SceneModel, backproject, generate_scene, load_scene,
                       look_at, pose_from_yaw_pitch, render_depth_gt,
                       save_scene)
from .occupancy import (OccupancyField, OccupancyPredictor, SurfaceCloud,
                        integrate_observation, is_path_free, query_occupancy,
                        sample_proxy_points)
from .gaussians import (GaussianProxySet, NoveltyOverlay, build_gaussians,
                        fork_overlay, mark_observed, refresh_after_observation)
from .splat import (NoveltyRender, RenderConfig, StaleOverlayError,
                    coverage_gain, depth_weight, gain_for_pose, render_novelty)
from .planner import (ActionSpace, Beam, PlannerConfig, PlanResult,
                      TrappedError, enumerate_actions, greedy_baseline, plan,
                      random_walk_baseline)
from .mission import (MappingConfig, MissionConfig, MissionLog,
                      inject_pose_noise, run_mission)
from .evaluation import (CoverageReport, GroundTruthCloud, auc,
                         benchmark_gain_speed, build_gt_cloud,
                         coverage_fraction, mc_gain_oracle)
from .config import ConfigError, RunConfig, load_config

__version__ = "0.1.0"
