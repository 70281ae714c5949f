"""Closed perception-planning-action loop.

Each cycle refreshes (or periodically rebuilds) the proxy Gaussians from the
carved occupancy field, plans with beam search, executes the first N_f steps
of the best trajectory, and senses + integrates after every executed step.
Optional pose noise corrupts only the mapping channel: observations are
rendered at the true pose but registered under the perturbed one, while
motion and realized-coverage accounting always use true poses.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .evaluation import CoverageTracker, GroundTruthCloud, build_gt_cloud
from .gaussians import build_gaussians, refresh_after_observation, seed_overlay_from_cloud
from .geometry import (CameraModel, Pose, SceneModel, free_space_grid,
                       pose_from_yaw_pitch, quat_from_axis_angle, quat_multiply,
                       quat_normalize, render_depth_gt)
from .occupancy import OccupancyField, SurfaceCloud, integrate_observation, sample_proxy_points
from .planner import (ActionSpace, PlannerConfig, TrappedError, plan,
                      random_walk_baseline)
from .splat import RenderConfig

POLICIES = ("magician", "greedy", "random")


@dataclass(frozen=True)
class MissionConfig:
    total_steps: int
    replan_every: int = 1          # N_f: steps executed per planning phase
    rebuild_every: int = 10        # Gaussian rebuild period, in cycles
    noise_sigma_t: float = 0.0     # meters
    noise_sigma_r: float = 0.0     # degrees
    seed: int = 0
    start: str = "fixed"           # "fixed" | "random-free"
    check_monotone: bool = False

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if self.noise_sigma_t < 0 or self.noise_sigma_r < 0:
            raise ValueError("noise sigmas must be >= 0")
        if self.start not in ("fixed", "random-free"):
            raise ValueError(f"unknown start policy {self.start!r}")
        if self.rebuild_every < 1 or self.replan_every < 1:
            raise ValueError("cadences must be >= 1")


@dataclass(frozen=True)
class MappingConfig:
    """Field and Gaussian construction knobs, resolved against the scene scale."""

    resolution: float | None = None        # default: diagonal / 128
    prior: float = 0.3
    n_proxy_points: int = 2000
    interior_fraction: float = 0.9
    shell_margin: float | None = None
    merge_radius: float | None = None      # default: one voxel
    eps_d: float | None = None             # default: two voxels
    hit_thickness: float | None = None     # default: six voxels
    n_gt_views: int = 200
    gt_seed: int = 0

    def resolved(self, scene: SceneModel) -> "ResolvedMapping":
        res = self.resolution if self.resolution is not None else scene.diagonal() / 128.0
        return ResolvedMapping(
            resolution=res,
            prior=self.prior,
            n_proxy_points=self.n_proxy_points,
            interior_fraction=self.interior_fraction,
            shell_margin=self.shell_margin,
            merge_radius=self.merge_radius if self.merge_radius is not None else res,
            eps_d=self.eps_d if self.eps_d is not None else 2.0 * res,
            hit_thickness=self.hit_thickness if self.hit_thickness is not None else 6.0 * res,
            n_gt_views=self.n_gt_views,
            gt_seed=self.gt_seed,
        )


@dataclass(frozen=True)
class ResolvedMapping:
    resolution: float
    prior: float
    n_proxy_points: int
    interior_fraction: float
    shell_margin: float | None
    merge_radius: float
    eps_d: float
    hit_thickness: float
    n_gt_views: int
    gt_seed: int


@dataclass
class StepRecord:
    step: int
    position: np.ndarray
    quat: np.ndarray
    planned_gain: float
    coverage: float
    sense_seconds: float = 0.0   # wall time, in-memory only (never exported)
    plan_seconds: float = 0.0


@dataclass
class MissionLog:
    policy: str
    records: list = dc_field(default_factory=list)
    trapped: bool = False
    monotone_violations: int = 0

    @property
    def coverage_curve(self) -> np.ndarray:
        return np.array([r.coverage for r in self.records])

    def to_records(self) -> list[dict]:
        """Deterministic export form; wall times are deliberately omitted."""
        out = []
        for r in self.records:
            out.append({
                "step": r.step,
                "position": [float(v) for v in r.position],
                "quat": [float(v) for v in r.quat],
                "planned_gain": float(r.planned_gain),
                "coverage": float(r.coverage),
            })
        return out


def inject_pose_noise(pose: Pose, sigma_t: float, sigma_r_deg: float,
                      rng: np.random.Generator) -> Pose:
    """Isotropic Gaussian translation offset plus a random-axis rotation of
    Gaussian magnitude; exact identity at zero sigmas."""
    dp = rng.standard_normal(3) * sigma_t
    axis = rng.standard_normal(3)
    n = np.linalg.norm(axis)
    axis = axis / n if n > 1e-12 else np.array([0.0, 0.0, 1.0])
    angle = rng.standard_normal() * math.radians(sigma_r_deg)
    if angle == 0.0:
        return Pose(pose.position + dp, pose.quat.copy())
    q = quat_normalize(quat_multiply(quat_from_axis_angle(axis, angle), pose.quat))
    return Pose(pose.position + dp, q)


def default_start_pose(scene: SceneModel, space: ActionSpace) -> Pose:
    c = scene.center()
    if space.kind == "wheeled":
        c = np.array([c[0], c[1], space.fixed_height])
    return pose_from_yaw_pitch(c, 0.0, 0.0)


def _random_start(scene: SceneModel, space: ActionSpace, agent_radius: float,
                  rng: np.random.Generator) -> Pose:
    grid = free_space_grid(scene, clearance=agent_radius)
    centers = grid.cell_centers()
    if space.kind == "wheeled":
        layer = np.abs(centers[:, 2] - space.fixed_height) <= grid.resolution
        if layer.any():
            centers = centers[layer]
    pos = centers[int(rng.integers(centers.shape[0]))].copy()
    if space.kind == "wheeled":
        pos[2] = space.fixed_height
    yaw = rng.uniform(0.0, 2.0 * math.pi)
    return pose_from_yaw_pitch(pos, yaw, 0.0)


def run_mission(scene: SceneModel, cam: CameraModel, space: ActionSpace,
                planner_cfg: PlannerConfig, rcfg: RenderConfig,
                mission_cfg: MissionConfig, mapping_cfg: MappingConfig | None = None,
                policy: str = "magician", gt_cloud: GroundTruthCloud | None = None,
                trace: list | None = None, debug_dump=None) -> MissionLog:
    """Run one seeded mission and log pose, planned gain, and realized coverage
    per executed step. Deterministic for a fixed configuration and seed."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    mapping = (mapping_cfg or MappingConfig()).resolved(scene)

    ss = np.random.SeedSequence(mission_cfg.seed)
    start_ss, noise_ss, proxy_ss, walk_ss = ss.spawn(4)
    noise_rng = np.random.default_rng(noise_ss)
    proxy_rng = np.random.default_rng(proxy_ss)
    walk_rng = np.random.default_rng(walk_ss)
    noisy = mission_cfg.noise_sigma_t > 0 or mission_cfg.noise_sigma_r > 0

    if mission_cfg.start == "fixed":
        pose = default_start_pose(scene, space)
    else:
        pose = _random_start(scene, space, planner_cfg.agent_radius,
                             np.random.default_rng(start_ss))
    try:
        start_grid = free_space_grid(scene, clearance=planner_cfg.agent_radius)
        start_ok = start_grid.contains(pose.position)
    except ValueError:
        start_ok = False
    if not start_ok:
        raise ValueError("start pose is in collision")

    field = OccupancyField(scene.bounds, mapping.resolution, mapping.prior)
    cloud = SurfaceCloud(merge_radius=mapping.merge_radius)
    if gt_cloud is None:
        gt_cloud = build_gt_cloud(scene, cam, mapping.n_gt_views, mapping.gt_seed)
    tracker = CoverageTracker(gt_cloud, scene, cam)

    def sense(at: Pose, source: int):
        depth = render_depth_gt(scene, at, cam)
        believed = at
        if noisy:
            believed = inject_pose_noise(at, mission_cfg.noise_sigma_t,
                                         mission_cfg.noise_sigma_r, noise_rng)
        integrate_observation(field, cloud, depth, believed, cam, source,
                              hit_thickness=mapping.hit_thickness)
        return depth, believed

    log = MissionLog(policy=policy)
    t0 = time.perf_counter()
    last_depth, last_believed = sense(pose, 0)
    tracker.update(pose, last_depth.values)
    boot_seconds = time.perf_counter() - t0

    if policy == "greedy":
        planner_cfg = PlannerConfig(n_beams=1, horizon=1, execute=1,
                                    collision_threshold=planner_cfg.collision_threshold,
                                    agent_radius=planner_cfg.agent_radius,
                                    tie_epsilon=planner_cfg.tie_epsilon)
    n_exec_cfg = 1 if policy in ("greedy", "random") else mission_cfg.replan_every

    gset = overlay = None
    generation = 0
    executed = 0
    cycle = 0
    while executed < mission_cfg.total_steps:
        t_plan0 = time.perf_counter()
        if policy == "random":
            try:
                step_seed = int(walk_rng.integers(2 ** 62))
                nxt = random_walk_baseline(space, field, pose, step_seed,
                                           agent_radius=planner_cfg.agent_radius,
                                           collision_threshold=planner_cfg.collision_threshold)
            except TrappedError:
                log.trapped = True
                break
            step_poses, step_gains = [nxt], [0.0]
        else:
            if cycle % mission_cfg.rebuild_every == 0:
                generation += 1
                pts = sample_proxy_points(field, mapping.n_proxy_points,
                                          mapping.interior_fraction,
                                          int(proxy_rng.integers(2 ** 62)),
                                          mapping.shell_margin)
                gset, overlay = build_gaussians(field, pts, generation)
                seed_overlay_from_cloud(gset, overlay, cloud, mapping.eps_d)
            else:
                refresh_after_observation(gset, overlay, field, last_believed,
                                          cam, last_depth, mapping.eps_d)
            try:
                result = plan(gset, overlay, field, pose, space, planner_cfg,
                              rcfg, eps_d=mapping.eps_d, trace=trace,
                              check_monotone=mission_cfg.check_monotone)
            except TrappedError:
                log.trapped = True
                break
            log.monotone_violations += result.monotone_violations
            step_poses, step_gains = result.poses, result.gains
        plan_seconds = time.perf_counter() - t_plan0

        n_exec = min(n_exec_cfg, mission_cfg.total_steps - executed, len(step_poses))
        for j in range(n_exec):
            pose = step_poses[j]
            t_s0 = time.perf_counter()
            last_depth, last_believed = sense(pose, executed + 1)
            cov = tracker.update(pose, last_depth.values)
            sense_seconds = time.perf_counter() - t_s0
            if executed == 0:
                sense_seconds += boot_seconds
            executed += 1
            log.records.append(StepRecord(
                step=executed, position=pose.position.copy(), quat=pose.quat.copy(),
                planned_gain=float(step_gains[j]), coverage=cov,
                sense_seconds=sense_seconds,
                plan_seconds=plan_seconds if j == 0 else 0.0))
            if debug_dump is not None and gset is not None:
                debug_dump(executed, pose, gset, overlay)
        cycle += 1
    return log
