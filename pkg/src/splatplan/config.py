"""Run configuration: a single JSON document with a versioned schema.

Every knob of a run lives in one diffable file; unknown keys are rejected by
name so typos cannot silently fall back to defaults. Scale-dependent defaults
(far plane, step sizes, voxel size, target density) resolve against the scene
diagonal at load time.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

from .geometry import CameraModel, SceneModel, generate_scene, load_scene
from .mission import MappingConfig, MissionConfig
from .planner import ActionSpace, PlannerConfig
from .splat import RenderConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


_DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "scene": {"kind": "room-with-pillars", "seed": 0, "path": None},
    "camera": {"width": 64, "height": 36, "fov_h": 90.0, "fov_v": 60.0,
               "near": 0.1, "far": None},
    "action_space": {"kind": "wheeled", "translation_step": None,
                     "yaw_step": None, "pitch_step": 15.0, "pitch_limit": 60.0,
                     "fixed_height": 1.25},
    "planner": {"n_beams": 10, "horizon": 10, "execute": 1,
                "collision_threshold": 0.5, "agent_radius": 0.15,
                "tie_epsilon": 1e-9},
    "render": {"r_target": None, "alpha_cutoff": 1.0 / 255.0, "t_min": 1e-3,
               "valid_alpha": 0.5},
    "occupancy": {"resolution": None, "prior": 0.3, "n_proxy_points": 2000,
                  "interior_fraction": 0.9, "shell_margin": None,
                  "merge_radius": None, "eps_d": None, "hit_thickness": None,
                  "n_gt_views": 200,
                  "gt_seed": 0},
    "mission": {"total_steps": 100, "replan_every": 1, "rebuild_every": 10,
                "noise_sigma_t": 0.0, "noise_sigma_r": 0.0, "start": "fixed",
                "seeds": [0, 1, 2, 3, 4]},
    "output_dir": "runs",
}


def _merge(defaults: dict, user: dict, path: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key: {where!r}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a table of settings")
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    """A fully resolved experiment: scene plus every module configuration."""

    raw: dict
    scene: SceneModel
    cam: CameraModel
    space: ActionSpace
    planner: PlannerConfig
    render: RenderConfig
    mapping: MappingConfig
    mission: MissionConfig
    seeds: list
    output_dir: str

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    def mission_for_seed(self, seed: int) -> MissionConfig:
        m = self.raw["mission"]
        return MissionConfig(total_steps=m["total_steps"],
                             replan_every=m["replan_every"],
                             rebuild_every=m["rebuild_every"],
                             noise_sigma_t=m["noise_sigma_t"],
                             noise_sigma_r=m["noise_sigma_r"],
                             seed=seed, start=m["start"])


def _build(table: dict) -> RunConfig:
    merged = _merge(_DEFAULTS, table, "")
    if merged["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")

    sc = merged["scene"]
    try:
        if sc["path"] is not None:
            scene = load_scene(sc["path"])
        else:
            scene = generate_scene(sc["kind"], int(sc["seed"]))
    except (ValueError, OSError) as exc:
        raise ConfigError(f"scene: {exc}") from exc
    diag = scene.diagonal()

    c = dict(merged["camera"])
    if c["far"] is None:
        c["far"] = diag
    try:
        cam = CameraModel(int(c["width"]), int(c["height"]), float(c["fov_h"]),
                          float(c["fov_v"]), float(c["near"]), float(c["far"]))
    except ValueError as exc:
        raise ConfigError(f"camera: {exc}") from exc

    a = dict(merged["action_space"])
    if a["translation_step"] is None:
        a["translation_step"] = diag / 40.0
    if a["yaw_step"] is None:
        a["yaw_step"] = 10.0 if a["kind"] == "wheeled" else 15.0
    try:
        space = ActionSpace(a["kind"], float(a["translation_step"]),
                            float(a["yaw_step"]), float(a["pitch_step"]),
                            float(a["pitch_limit"]), float(a["fixed_height"]))
    except ValueError as exc:
        raise ConfigError(f"action_space: {exc}") from exc

    p = merged["planner"]
    try:
        planner = PlannerConfig(int(p["n_beams"]), int(p["horizon"]),
                                int(p["execute"]), float(p["collision_threshold"]),
                                float(p["agent_radius"]), float(p["tie_epsilon"]))
    except ValueError as exc:
        raise ConfigError(f"planner: {exc}") from exc

    r = dict(merged["render"])
    try:
        if r["r_target"] is None:
            render = RenderConfig.for_scene(cam, diag,
                                            alpha_cutoff=float(r["alpha_cutoff"]),
                                            t_min=float(r["t_min"]),
                                            valid_alpha=float(r["valid_alpha"]))
        else:
            render = RenderConfig(cam, float(r["r_target"]),
                                  float(r["alpha_cutoff"]), float(r["t_min"]),
                                  float(r["valid_alpha"]))
    except ValueError as exc:
        raise ConfigError(f"render: {exc}") from exc

    o = merged["occupancy"]
    try:
        mapping = MappingConfig(
            resolution=None if o["resolution"] is None else float(o["resolution"]),
            prior=float(o["prior"]),
            n_proxy_points=int(o["n_proxy_points"]),
            interior_fraction=float(o["interior_fraction"]),
            shell_margin=None if o["shell_margin"] is None else float(o["shell_margin"]),
            merge_radius=None if o["merge_radius"] is None else float(o["merge_radius"]),
            eps_d=None if o["eps_d"] is None else float(o["eps_d"]),
            hit_thickness=None if o["hit_thickness"] is None else float(o["hit_thickness"]),
            n_gt_views=int(o["n_gt_views"]),
            gt_seed=int(o["gt_seed"]))
    except ValueError as exc:
        raise ConfigError(f"occupancy: {exc}") from exc

    m = merged["mission"]
    seeds = list(m["seeds"])
    if not seeds:
        raise ConfigError("mission.seeds must not be empty")
    try:
        mission = MissionConfig(total_steps=int(m["total_steps"]),
                                replan_every=int(m["replan_every"]),
                                rebuild_every=int(m["rebuild_every"]),
                                noise_sigma_t=float(m["noise_sigma_t"]),
                                noise_sigma_r=float(m["noise_sigma_r"]),
                                seed=int(seeds[0]), start=str(m["start"]))
    except ValueError as exc:
        raise ConfigError(f"mission: {exc}") from exc
    if mission.replan_every != planner.execute:
        raise ConfigError("mission.replan_every must equal planner.execute")

    return RunConfig(raw=merged, scene=scene, cam=cam, space=space,
                     planner=planner, render=render, mapping=mapping,
                     mission=mission, seeds=[int(s) for s in seeds],
                     output_dir=str(merged["output_dir"]))


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            table = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(table, dict):
        raise ConfigError("config root must be a JSON object")
    return _build(table)


def config_from_dict(table: dict) -> RunConfig:
    return _build(copy.deepcopy(table))
