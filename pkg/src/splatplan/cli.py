"""Command-line entry points: run missions, compare policies, sweep ablations,
and verify the cross-implementation properties.

Exit codes: 0 success, 1 configuration error, 2 runtime failure,
3 verification failure. Artifacts are written atomically (temp file + rename)
into ``<out>/<config-hash>/`` and named by seed, so identical configurations
land in identical places.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import config as config_mod
from . import evaluation as ev
from . import gaussians as ga
from . import geometry as geom
from . import occupancy as occ
from . import planner as pl
from . import splat
from .config import ConfigError, RunConfig, load_config
from .evaluation import CoverageReport, build_gt_cloud
from .mission import MissionLog, run_mission

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3


def _atomic_write(path: str, data: str | bytes) -> None:
    tmp = path + ".tmp"
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def _write_mission_artifacts(out_dir: str, seed: int, log: MissionLog) -> CoverageReport:
    lines = [json.dumps(rec, sort_keys=True) for rec in log.to_records()]
    if log.trapped:
        lines.append(json.dumps({"trapped": True}))
    _atomic_write(os.path.join(out_dir, f"seed{seed}.jsonl"), "\n".join(lines) + "\n")
    curve = log.coverage_curve
    csv = "step,coverage\n" + "".join(
        f"{r.step},{r.coverage!r}\n" for r in log.records)
    _atomic_write(os.path.join(out_dir, f"seed{seed}_coverage.csv"), csv)
    return CoverageReport.from_curve(curve)


def _policy_stats(reports: dict) -> dict:
    finals = np.array([r.final_coverage for r in reports.values()])
    aucs = np.array([r.auc for r in reports.values()])
    return {
        "final_coverage_mean": float(finals.mean()),
        "final_coverage_std": float(finals.std()),
        "auc_mean": float(aucs.mean()),
        "auc_std": float(aucs.std()),
        "per_seed": {str(s): {"final_coverage": r.final_coverage, "auc": r.auc}
                     for s, r in reports.items()},
    }


def _run_policy(cfg: RunConfig, policy: str, seeds: list, gt_cloud,
                out_dir: str | None = None, trace_planner: bool = False,
                dump_debug_images: bool = False) -> dict:
    reports = {}
    for seed in seeds:
        trace = [] if trace_planner else None
        debug_dump = None
        if dump_debug_images and out_dir is not None:
            dbg = os.path.join(out_dir, f"debug_seed{seed}")
            os.makedirs(dbg, exist_ok=True)

            def debug_dump(step, pose, gset, overlay, _dbg=dbg):
                render = splat.render_novelty(gset, overlay, pose, cfg.render)
                splat.save_pgm(render.novelty, os.path.join(_dbg, f"step{step:04d}_novelty.pgm"), vmax=1.0)
                splat.save_pgm(render.depth, os.path.join(_dbg, f"step{step:04d}_depth.pgm"),
                               vmax=cfg.scene.diagonal())

        log = run_mission(cfg.scene, cfg.cam, cfg.space, cfg.planner, cfg.render,
                          cfg.mission_for_seed(seed), cfg.mapping, policy=policy,
                          gt_cloud=gt_cloud, trace=trace, debug_dump=debug_dump)
        if out_dir is not None:
            reports[seed] = _write_mission_artifacts(out_dir, seed, log)
            if trace_planner:
                _atomic_write(os.path.join(out_dir, f"seed{seed}_trace.jsonl"),
                              "".join(json.dumps(t, sort_keys=True) + "\n" for t in trace))
        else:
            reports[seed] = CoverageReport.from_curve(log.coverage_curve)
    return reports


def cmd_run(cfg: RunConfig, out_root: str, seeds: list, trace_planner: bool,
            dump_debug_images: bool) -> int:
    out_dir = os.path.join(out_root, cfg.config_hash())
    os.makedirs(out_dir, exist_ok=True)
    gt = build_gt_cloud(cfg.scene, cfg.cam, cfg.mapping.n_gt_views, cfg.mapping.gt_seed)
    reports = _run_policy(cfg, "magician", seeds, gt, out_dir,
                          trace_planner, dump_debug_images)
    summary = {"config_hash": cfg.config_hash(), "policy": "magician"}
    summary.update(_policy_stats(reports))
    _atomic_write(os.path.join(out_dir, "summary.json"),
                  json.dumps(summary, sort_keys=True, indent=2) + "\n")
    for seed, r in sorted(reports.items()):
        print(f"seed {seed}: final coverage {r.final_coverage:.3f}, AUC {r.auc:.3f}")
    print(f"artifacts: {out_dir}")
    return EXIT_OK


def cmd_compare(cfg: RunConfig, out_root: str, seeds: list, policies: list) -> int:
    out_dir = os.path.join(out_root, cfg.config_hash())
    os.makedirs(out_dir, exist_ok=True)
    gt = build_gt_cloud(cfg.scene, cfg.cam, cfg.mapping.n_gt_views, cfg.mapping.gt_seed)
    table = {}
    for policy in policies:
        reports = _run_policy(cfg, policy, seeds, gt)
        table[policy] = _policy_stats(reports)
    _atomic_write(os.path.join(out_dir, "compare.json"),
                  json.dumps(table, sort_keys=True, indent=2) + "\n")
    header = f"{'policy':<10} {'cov mean':>9} {'cov std':>8} {'auc mean':>9} {'auc std':>8}"
    lines = [header, "-" * len(header)]
    for policy in policies:
        s = table[policy]
        lines.append(f"{policy:<10} {s['final_coverage_mean']:>9.3f} "
                     f"{s['final_coverage_std']:>8.3f} {s['auc_mean']:>9.3f} "
                     f"{s['auc_std']:>8.3f}")
    text = "\n".join(lines)
    _atomic_write(os.path.join(out_dir, "compare.txt"), text + "\n")
    print(text)
    return EXIT_OK


_ABLATE_AXES = ("n_beams", "horizon", "replan", "proxy_density")


def _override_for_axis(raw: dict, axis: str, value: float) -> dict:
    import copy

    table = copy.deepcopy(raw)
    if axis == "n_beams":
        table["planner"]["n_beams"] = int(value)
    elif axis == "horizon":
        table["planner"]["horizon"] = int(value)
        table["planner"]["execute"] = min(table["planner"]["execute"], int(value))
        table["mission"]["replan_every"] = table["planner"]["execute"]
    elif axis == "replan":
        table["planner"]["execute"] = int(value)
        table["mission"]["replan_every"] = int(value)
        table["planner"]["horizon"] = max(table["planner"]["horizon"], int(value))
    elif axis == "proxy_density":
        base = table["occupancy"]["n_proxy_points"]
        table["occupancy"]["n_proxy_points"] = max(16, int(round(base * value)))
    else:
        raise ConfigError(f"unknown ablation axis {axis!r}")
    return table


def cmd_ablate(cfg: RunConfig, out_root: str, seeds: list, axis: str,
               values: list) -> int:
    if axis not in _ABLATE_AXES:
        raise ConfigError(f"ablation axis must be one of {_ABLATE_AXES}")
    out_dir = os.path.join(out_root, cfg.config_hash())
    os.makedirs(out_dir, exist_ok=True)
    gt = build_gt_cloud(cfg.scene, cfg.cam, cfg.mapping.n_gt_views, cfg.mapping.gt_seed)
    rows = []
    for value in values:
        sub = config_mod.config_from_dict(_override_for_axis(cfg.raw, axis, value))
        reports = _run_policy(sub, "magician", seeds, gt)
        stats = _policy_stats(reports)
        rows.append({"value": value,
                     "auc_mean": stats["auc_mean"],
                     "final_coverage_mean": stats["final_coverage_mean"]})
    payload = {"axis": axis, "rows": rows}
    _atomic_write(os.path.join(out_dir, f"ablate_{axis}.json"),
                  json.dumps(payload, sort_keys=True, indent=2) + "\n")
    header = f"{axis:<14} {'auc mean':>9} {'cov mean':>9}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(f"{row['value']:<14} {row['auc_mean']:>9.3f} "
                     f"{row['final_coverage_mean']:>9.3f}")
    text = "\n".join(lines)
    _atomic_write(os.path.join(out_dir, f"ablate_{axis}.txt"), text + "\n")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification suite
# ---------------------------------------------------------------------------

def _verify_scene():
    rng = np.random.default_rng(5)
    n = 12
    ys, zs = np.meshgrid(np.linspace(0.5, 3.5, n), np.linspace(0.5, 3.5, n))
    centers = np.stack([np.full(n * n, 3.0), ys.ravel(), zs.ravel()], axis=1)
    spacing = 3.0 / (n - 1)
    gset = ga.GaussianProxySet(centers, np.full(n * n, 0.75 * spacing),
                               np.full(n * n, 0.995), 0)
    overlay = ga.NoveltyOverlay(0, np.ones(n * n, dtype=np.uint8))
    bounds = np.array([[0.0, 0.0, 0.0], [4.0, 4.0, 4.0]])
    cam = geom.CameraModel(64, 36, 90.0, 60.0, 0.05, 12.0)
    rcfg = splat.RenderConfig.for_scene(cam, float(np.linalg.norm(bounds[1] - bounds[0])))
    return gset, overlay, bounds, cam, rcfg, rng


def verify_properties() -> list[tuple[str, bool, str]]:
    """Fast cross-checks of the core numerical contracts; each property is
    listed exactly once."""
    results: list[tuple[str, bool, str]] = []

    def check(name: str, ok: bool, detail: str = "") -> None:
        results.append((name, bool(ok), detail))

    cam = geom.CameraModel(64, 36, 90.0, 60.0, 0.1, 10.0)
    rcfg = splat.RenderConfig(cam, r_target=64.0)
    d_th = rcfg.d_th
    check("threshold_depth_focal_relation",
          abs(d_th - cam.focal / math.sqrt(64.0)) <= 1e-6, f"d_th={d_th}")
    w_half = float(splat.depth_weight(d_th / 2.0, d_th))
    check("depth_weight_quarter_at_half_threshold",
          abs(w_half - 0.25) <= 1e-12, f"w={w_half}")
    w1 = float(splat.depth_weight(d_th, d_th))
    w2 = float(splat.depth_weight(2.0 * d_th, d_th))
    check("depth_weight_saturation", w1 == 1.0 and w2 == 1.0, f"w={w1},{w2}")

    a1 = ev.auc([0.5] * 7)
    a2 = ev.auc(np.linspace(0.0, 1.0, 11))
    a3 = ev.auc([0.0, 1.0, 1.0])
    check("auc_reference_cases",
          abs(a1 - 0.5) < 1e-12 and abs(a2 - 0.5) < 1e-12 and abs(a3 - 0.75) < 1e-12,
          f"{a1},{a2},{a3}")

    gset, overlay, bounds, vcam, vrcfg, rng = _verify_scene()
    field = ev.field_from_gaussians(gset, bounds, 4.0 / 160)
    lookup = ev.gaussian_novelty_lookup(gset, overlay)
    rels = []
    pairs = []
    for i in range(6):
        pos = np.array([rng.uniform(0.3, 1.5), rng.uniform(0.8, 3.2), rng.uniform(0.8, 3.2)])
        pose = geom.look_at(pos, gset.centers[int(rng.integers(len(gset)))])
        s, _ = splat.gain_for_pose(gset, overlay, pose, vrcfg)
        m = ev.mc_gain_oracle(field, lookup, pose, vcam, 80_000, 100 + i, vrcfg)
        rels.append(abs(s - m) / max(m, 1e-9))
        pairs.append((s, m))
    check("splat_matches_monte_carlo", max(rels) <= 0.15,
          f"max rel err {max(rels):.3f}")

    occ_field = occ.OccupancyField(bounds, 4.0 / 32)
    space = pl.ActionSpace("drone-6dof", translation_step=0.4, yaw_step=15.0)
    start = geom.pose_from_yaw_pitch(np.array([1.0, 2.0, 2.0]), 0.0, 0.0)
    pcfg = pl.PlannerConfig(n_beams=1, horizon=1, execute=1)
    best = pl.plan(gset, overlay, occ_field, start, space, pcfg, vrcfg).poses[0]
    greedy = pl.greedy_baseline(gset, overlay, occ_field, start, space, pcfg, vrcfg)
    check("beam_width_one_equals_greedy",
          np.array_equal(best.position, greedy.position)
          and np.array_equal(best.quat, greedy.quat))

    masses = [gset.novelty_mass(overlay)]
    work = overlay.fork()
    ok = True
    for i in range(5):
        pos = np.array([rng.uniform(0.3, 1.5), rng.uniform(0.8, 3.2), rng.uniform(0.8, 3.2)])
        pose = geom.look_at(pos, gset.centers[int(rng.integers(len(gset)))])
        render = splat.render_novelty(gset, work, pose, vrcfg)
        ga.mark_observed(gset, work, pose, vcam, geom.DepthImage(render.depth), 0.2)
        masses.append(gset.novelty_mass(work))
        ok = ok and masses[-1] <= masses[-2] + 1e-9
    check("novelty_monotone_under_marking", ok, f"masses={np.round(masses, 2)}")

    forked = work.fork()
    before = work.bits.copy()
    forked.bits[:] = 0
    check("overlay_fork_isolation", np.array_equal(work.bits, before))

    return results


def cmd_verify() -> int:
    results = verify_properties()
    failed = False
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail and not ok else ""
        print(f"{status} {name}{suffix}")
        failed = failed or not ok
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _parse_seeds(text: str) -> list:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad --seeds value {text!r}; expected e.g. 0,1,2") from None


def _parse_values(text: str) -> list:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(float(tok) if "." in tok else int(tok))
    if not out:
        raise ConfigError("--values must list at least one value")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splatplan",
        description="Active mapping missions with splat-rendered coverage gain.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="path to a JSON run configuration")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seeds", default=None, help="comma-separated seed list override")

    p_run = sub.add_parser("run", help="run missions for every seed")
    add_common(p_run)
    p_run.add_argument("--trace-planner", action="store_true",
                       help="write per-iteration beam search records")
    p_run.add_argument("--dump-debug-images", action="store_true",
                       help="write per-step novelty/depth PGM images")

    p_cmp = sub.add_parser("compare", help="compare policies with paired seeds")
    add_common(p_cmp)
    p_cmp.add_argument("--policies", default="magician,greedy,random",
                       help="comma-separated subset of magician,greedy,random")

    p_abl = sub.add_parser("ablate", help="sweep one parameter axis")
    add_common(p_abl)
    p_abl.add_argument("--axis", required=True, choices=_ABLATE_AXES)
    p_abl.add_argument("--values", required=True,
                       help="comma-separated values for the axis")

    sub.add_parser("verify", help="run the fast property-verification suite")
    return parser


def main(argv=None) -> int:
    if os.environ.get("SPLATPLAN_WORKERS"):
        import numba

        numba.set_num_threads(max(1, int(os.environ["SPLATPLAN_WORKERS"])))
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify()
        cfg = load_config(args.config)
        out_root = args.out if args.out is not None else cfg.output_dir
        seeds = _parse_seeds(args.seeds) if args.seeds else cfg.seeds
        if args.command == "run":
            return cmd_run(cfg, out_root, seeds, args.trace_planner,
                           args.dump_debug_images)
        if args.command == "compare":
            policies = [p.strip() for p in args.policies.split(",") if p.strip()]
            bad = [p for p in policies if p not in ("magician", "greedy", "random")]
            if bad or not policies:
                raise ConfigError(f"unknown policy in --policies: {bad}")
            return cmd_compare(cfg, out_root, seeds, policies)
        if args.command == "ablate":
            return cmd_ablate(cfg, out_root, seeds, args.axis,
                              _parse_values(args.values))
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
