"""Receding-horizon beam search over candidate camera trajectories.

Each beam owns a forked novelty overlay: when a candidate pose would observe a
Gaussian (its center distance matches the beam's own rendered depth within
eps_d), the bit is consumed in that beam only, so later steps of the same
hypothetical trajectory no longer score the same surface. Trajectory value is
the accumulated rendered coverage gain over the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .gaussians import GaussianProxySet, NoveltyOverlay, fork_overlay, mark_observed
from .geometry import (DepthImage, Pose, quat_from_axis_angle,
                       quat_multiply, quat_normalize)
from .occupancy import OccupancyField, is_path_free
from .splat import RenderConfig, gain_for_pose

ACTION_SPACE_KINDS = ("drone-6dof", "wheeled")


class TrappedError(RuntimeError):
    """No collision-free action exists from the current pose."""


@dataclass(frozen=True)
class ActionSpace:
    """Discrete motion primitives.

    drone-6dof: world-axis translations +-x/+-y/+-z, yaw +-, pitch +-
    (10 actions; pitch moves beyond the limit are dropped).
    wheeled: forward along the heading, yaw +- (3 actions) at a pinned height.
    """

    kind: str
    translation_step: float
    yaw_step: float               # degrees
    pitch_step: float = 15.0      # degrees (drone)
    pitch_limit: float = 60.0     # degrees (drone)
    fixed_height: float = 1.25    # meters (wheeled)

    def __post_init__(self):
        if self.kind not in ACTION_SPACE_KINDS:
            raise ValueError(f"unknown action space kind {self.kind!r}")
        if self.translation_step <= 0:
            raise ValueError("translation_step must be positive")


def _yawed(pose: Pose, delta_deg: float) -> Pose:
    q = quat_multiply(quat_from_axis_angle([0.0, 0.0, 1.0], math.radians(delta_deg)), pose.quat)
    return Pose(pose.position.copy(), quat_normalize(q))


def _pitched(pose: Pose, delta_deg: float) -> Pose:
    # rotate about the camera's own right axis (keeps roll at zero for
    # yaw/pitch-built poses)
    q = quat_multiply(pose.quat, quat_from_axis_angle([1.0, 0.0, 0.0], math.radians(delta_deg)))
    return Pose(pose.position.copy(), quat_normalize(q))


def enumerate_actions(space: ActionSpace, pose: Pose) -> list[Pose]:
    """Candidate poses reachable in one move, in canonical action order."""
    if space.kind == "wheeled":
        fwd = pose.forward().copy()
        fwd[2] = 0.0
        n = np.linalg.norm(fwd)
        if n < 1e-12:
            raise ValueError("wheeled pose has a vertical heading")
        p = pose.position + space.translation_step * (fwd / n)
        p[2] = space.fixed_height
        return [Pose(p, pose.quat.copy()),
                _yawed(pose, space.yaw_step),
                _yawed(pose, -space.yaw_step)]

    out: list[Pose] = []
    for axis in range(3):
        for sign in (1.0, -1.0):
            p = pose.position.copy()
            p[axis] += sign * space.translation_step
            out.append(Pose(p, pose.quat.copy()))
    out.append(_yawed(pose, space.yaw_step))
    out.append(_yawed(pose, -space.yaw_step))
    limit = math.radians(space.pitch_limit) + 1e-9
    for sign in (1.0, -1.0):
        cand = _pitched(pose, sign * space.pitch_step)
        if abs(cand.pitch()) <= limit:
            out.append(cand)
    return out


@dataclass
class Beam:
    poses: list = dc_field(default_factory=list)
    actions: list = dc_field(default_factory=list)
    gains: list = dc_field(default_factory=list)
    overlay: NoveltyOverlay = None
    score: float = 0.0


@dataclass(frozen=True)
class PlannerConfig:
    n_beams: int = 10
    horizon: int = 10
    execute: int = 1
    collision_threshold: float = 0.5
    agent_radius: float = 0.15
    tie_epsilon: float = 1e-9

    def __post_init__(self):
        if self.n_beams < 1:
            raise ValueError("n_beams must be >= 1")
        if not (1 <= self.execute <= self.horizon):
            raise ValueError("require 1 <= execute <= horizon")


@dataclass
class PlanResult:
    poses: list            # executedable trajectory, length <= horizon
    actions: list          # action index per step
    gains: list            # rendered gain per step
    score: float
    monotone_violations: int = 0


def _select_top(candidates: list, scores: list, k: int, eps: float) -> list:
    """Indices of the k best scores; near-ties (within eps) resolve to the
    earliest expansion (parent order, then action order)."""
    chosen: list[int] = []
    taken = np.zeros(len(scores), dtype=bool)
    for _ in range(min(k, len(scores))):
        best = -1
        best_score = -math.inf
        for i in range(len(scores)):
            if taken[i]:
                continue
            if scores[i] > best_score + eps:
                best = i
                best_score = scores[i]
        taken[best] = True
        chosen.append(best)
    return chosen


def plan(gset: GaussianProxySet, canonical_overlay: NoveltyOverlay,
         field: OccupancyField, start: Pose, space: ActionSpace,
         cfg: PlannerConfig, rcfg: RenderConfig, *, eps_d: float | None = None,
         trace: list | None = None, check_monotone: bool = False) -> PlanResult:
    """Beam search for the highest-gain trajectory of up to ``horizon`` moves.

    Raises TrappedError when no collision-free move exists at depth 1; returns
    the best partial trajectory when expansion becomes fully blocked later.
    """
    if canonical_overlay.generation != gset.generation:
        raise ValueError("stale overlay: generation mismatch")
    if eps_d is None:
        eps_d = 2.0 * field.resolution

    beams = [Beam(overlay=fork_overlay(canonical_overlay))]
    violations = 0

    for depth in range(cfg.horizon):
        expansions = []  # (parent_idx, action_idx, pose, gain, render)
        for b_idx, beam in enumerate(beams):
            end = beam.poses[-1] if beam.poses else start
            for a_idx, cand in enumerate(enumerate_actions(space, end)):
                moved = not np.array_equal(cand.position, end.position)
                if moved and not is_path_free(field, end, cand, cfg.agent_radius,
                                              cfg.collision_threshold):
                    continue
                gain, render = gain_for_pose(gset, beam.overlay, cand, rcfg)
                expansions.append((b_idx, a_idx, cand, gain, render))
        if not expansions:
            if depth == 0:
                raise TrappedError("no collision-free action from the start pose")
            break

        totals = [beams[p].score + g for p, a, _, g, _ in expansions]
        keep = _select_top(expansions, totals, cfg.n_beams, cfg.tie_epsilon)

        next_beams = []
        for rank, i in enumerate(keep):
            p_idx, a_idx, pose, gain, render = expansions[i]
            parent = beams[p_idx]
            overlay = fork_overlay(parent.overlay)
            if check_monotone:
                before = gset.novelty_mass(overlay)
            mark_observed(gset, overlay, pose, rcfg.cam, DepthImage(render.depth), eps_d)
            if check_monotone and gset.novelty_mass(overlay) > before + 1e-9:
                violations += 1
            nb = Beam(poses=parent.poses + [pose],
                      actions=parent.actions + [a_idx],
                      gains=parent.gains + [gain],
                      overlay=overlay,
                      score=parent.score + gain)
            next_beams.append(nb)
            if trace is not None:
                trace.append({"depth": depth, "beam": rank, "parent": p_idx,
                              "action": a_idx, "gain": gain, "score": nb.score})
        beams = next_beams

    best = 0
    for i in range(1, len(beams)):
        if beams[i].score > beams[best].score + cfg.tie_epsilon:
            best = i
    b = beams[best]
    return PlanResult(b.poses, b.actions, b.gains, b.score, violations)


def greedy_baseline(gset: GaussianProxySet, canonical_overlay: NoveltyOverlay,
                    field: OccupancyField, start: Pose, space: ActionSpace,
                    cfg: PlannerConfig, rcfg: RenderConfig, *,
                    eps_d: float | None = None) -> Pose:
    """Single-step next-best-view: exactly plan() with one beam and horizon 1."""
    one = PlannerConfig(n_beams=1, horizon=1, execute=1,
                        collision_threshold=cfg.collision_threshold,
                        agent_radius=cfg.agent_radius,
                        tie_epsilon=cfg.tie_epsilon)
    return plan(gset, canonical_overlay, field, start, space, one, rcfg,
                eps_d=eps_d).poses[0]


def random_walk_baseline(space: ActionSpace, field: OccupancyField, pose: Pose,
                         seed: int, *, agent_radius: float = 0.15,
                         collision_threshold: float = 0.5) -> Pose:
    """Uniform choice among collision-free actions, deterministic per seed."""
    frees = []
    for cand in enumerate_actions(space, pose):
        moved = not np.array_equal(cand.position, pose.position)
        if moved and not is_path_free(field, pose, cand, agent_radius, collision_threshold):
            continue
        frees.append(cand)
    if not frees:
        raise TrappedError("no collision-free action from the current pose")
    rng = np.random.default_rng(seed)
    return frees[int(rng.integers(len(frees)))]
