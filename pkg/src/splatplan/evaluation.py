"""Ground-truth coverage metrics and the Monte Carlo coverage-gain oracle.

The oracle estimates the same quantity as the splat renderer by a different
route: stratified volumetric samples inside the camera frustum, weighted by
occupancy, discrete transmittance along each pixel's sample sequence, novelty
at the sample point, and the near-range depth discount. Per-pixel compositing
of the samples normalizes the estimate to pixel units, so a fully opaque,
fully novel wall beyond the threshold depth scores roughly one per pixel.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from scipy.spatial import cKDTree

from .gaussians import GaussianProxySet, NoveltyOverlay
from .geometry import CameraModel, Pose, SceneModel, free_space_grid, random_quaternion, render_depth_gt, backproject
from .occupancy import OccupancyField, SurfaceCloud
from .splat import RenderConfig, gain_for_pose


# ---------------------------------------------------------------------------
# ground-truth surface cloud
# ---------------------------------------------------------------------------

@dataclass
class GroundTruthCloud:
    """Sensor-visible surface samples plus the poses that generated them."""

    points: np.ndarray
    source: np.ndarray
    poses: list
    merge_radius: float


def build_gt_cloud(scene: SceneModel, cam: CameraModel, n_views: int,
                   seed: int, merge_radius: float | None = None,
                   clearance: float | None = None) -> GroundTruthCloud:
    """Render depth from collision-free viewpoints spread over the reachable
    free space and backproject; only surface a sensor can reach enters."""
    if n_views < 1:
        raise ValueError("n_views must be >= 1")
    if merge_radius is None:
        merge_radius = scene.diagonal() / 200.0
    if clearance is None:
        clearance = scene.diagonal() / 50.0
    rng = np.random.default_rng(seed)
    grid = free_space_grid(scene, clearance=clearance)
    centers = grid.cell_centers()
    if centers.shape[0] == 0:
        raise ValueError("scene has no reachable free space")
    picks = rng.choice(centers.shape[0], size=n_views,
                       replace=centers.shape[0] < n_views)
    cloud = SurfaceCloud(merge_radius=merge_radius)
    poses = []
    for k, ci in enumerate(picks):
        pose = Pose(centers[ci], random_quaternion(rng))
        poses.append(pose)
        depth = render_depth_gt(scene, pose, cam)
        cloud.append(backproject(depth, pose, cam), k)
    return GroundTruthCloud(cloud.points, cloud.source, poses, merge_radius)


def _covered_by(points: np.ndarray, pose: Pose, depth_values: np.ndarray,
                cam: CameraModel, eps_gt: float) -> np.ndarray:
    p_cam = (points - pose.position) @ pose.rotation()
    z = p_cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        col = np.floor(cam.fx * p_cam[:, 0] / z + cam.width / 2.0).astype(np.int64)
        row = np.floor(cam.fy * p_cam[:, 1] / z + cam.height / 2.0).astype(np.int64)
    ok = (z > 0) & (col >= 0) & (col < cam.width) & (row >= 0) & (row < cam.height)
    out = np.zeros(points.shape[0], dtype=bool)
    idx = np.nonzero(ok)[0]
    if idx.size == 0:
        return out
    d_img = depth_values[row[idx], col[idx]]
    dist = np.linalg.norm(points[idx] - pose.position, axis=1)
    out[idx] = (d_img > 0.0) & (np.abs(dist - d_img) <= eps_gt)
    return out


class CoverageTracker:
    """Incremental coverage over a fixed ground-truth cloud."""

    def __init__(self, gt: GroundTruthCloud, scene: SceneModel,
                 cam: CameraModel, eps_gt: float | None = None):
        self.gt = gt
        self.scene = scene
        self.cam = cam
        self.eps_gt = 2.0 * gt.merge_radius if eps_gt is None else eps_gt
        self.covered = np.zeros(gt.points.shape[0], dtype=bool)

    def update(self, pose: Pose, depth_values: np.ndarray | None = None) -> float:
        """Fold one executed pose into the covered set; returns the fraction."""
        if depth_values is None:
            depth_values = render_depth_gt(self.scene, pose, self.cam).values
        self.covered |= _covered_by(self.gt.points, pose, depth_values,
                                    self.cam, self.eps_gt)
        return self.fraction()

    def fraction(self) -> float:
        return float(np.count_nonzero(self.covered)) / self.covered.size


def coverage_fraction(gt: GroundTruthCloud, executed_poses: list,
                      scene: SceneModel, cam: CameraModel,
                      eps_gt: float | None = None) -> float:
    """Fraction of GT points visible and unoccluded from at least one pose."""
    tracker = CoverageTracker(gt, scene, cam, eps_gt)
    for pose in executed_poses:
        tracker.update(pose)
    return tracker.fraction()


# ---------------------------------------------------------------------------
# coverage curves
# ---------------------------------------------------------------------------

def auc(curve) -> float:
    """Normalized trapezoidal area of a coverage-vs-step curve."""
    c = np.asarray(curve, dtype=np.float64)
    if c.size == 0:
        raise ValueError("curve must be non-empty")
    if np.any(c < 0) or np.any(c > 1):
        raise ValueError("curve values must lie in [0, 1]")
    if c.size == 1:
        return float(c[0])
    return float(np.sum((c[:-1] + c[1:]) / 2.0) / (c.size - 1))


@dataclass
class CoverageReport:
    curve: np.ndarray
    final_coverage: float
    auc: float

    @classmethod
    def from_curve(cls, curve) -> "CoverageReport":
        c = np.asarray(curve, dtype=np.float64)
        return cls(c, float(c[-1]), auc(c))


# ---------------------------------------------------------------------------
# Monte Carlo gain oracle
# ---------------------------------------------------------------------------

@njit(cache=True)
def _march_kernel(origin, rot, W, H, tan_h, tan_v, near, far, K, jit_u, jit_v,
                  jit_t, values, bmin, res, nx, ny, nz, d_th, positions, weights):
    span = far - near
    for p in prange(W * H):
        row = p // W
        col = p - row * W
        T = 1.0
        base = p * K
        for k in range(K):
            u = (col + jit_u[base + k])
            v = (row + jit_v[base + k])
            dx = (2.0 * u / W - 1.0) * tan_h
            dy = (2.0 * v / H - 1.0) * tan_v
            dz = 1.0
            inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
            dx *= inv
            dy *= inv
            dz *= inv
            wx = rot[0, 0] * dx + rot[0, 1] * dy + rot[0, 2] * dz
            wy = rot[1, 0] * dx + rot[1, 1] * dy + rot[1, 2] * dz
            wz = rot[2, 0] * dx + rot[2, 1] * dy + rot[2, 2] * dz
            s = near + (k + jit_t[base + k]) / K * span
            x = origin[0] + s * wx
            y = origin[1] + s * wy
            z = origin[2] + s * wz
            positions[base + k, 0] = x
            positions[base + k, 1] = y
            positions[base + k, 2] = z
            # trilinear occupancy; exactly 0 outside the box
            gx = (x - bmin[0]) / res - 0.5
            gy = (y - bmin[1]) / res - 0.5
            gz = (z - bmin[2]) / res - 0.5
            if (x < bmin[0] or y < bmin[1] or z < bmin[2]
                    or x > bmin[0] + nx * res or y > bmin[1] + ny * res
                    or z > bmin[2] + nz * res):
                occ = 0.0
            else:
                if gx < 0.0: gx = 0.0
                if gy < 0.0: gy = 0.0
                if gz < 0.0: gz = 0.0
                if gx > nx - 1.0: gx = nx - 1.0
                if gy > ny - 1.0: gy = ny - 1.0
                if gz > nz - 1.0: gz = nz - 1.0
                ix = int(gx)
                iy = int(gy)
                iz = int(gz)
                if ix > nx - 2: ix = nx - 2
                if iy > ny - 2: iy = ny - 2
                if iz > nz - 2: iz = nz - 2
                if ix < 0: ix = 0
                if iy < 0: iy = 0
                if iz < 0: iz = 0
                fx = gx - ix
                fy = gy - iy
                fz = gz - iz
                occ = 0.0
                for cx in range(2):
                    wxf = fx if cx == 1 else 1.0 - fx
                    for cy in range(2):
                        wyf = fy if cy == 1 else 1.0 - fy
                        for cz in range(2):
                            wzf = fz if cz == 1 else 1.0 - fz
                            occ += wxf * wyf * wzf * values[ix + cx, iy + cy, iz + cz]
            wd = s / d_th
            wd = wd * wd
            if wd > 1.0:
                wd = 1.0
            weights[base + k] = occ * T * wd
            T *= (1.0 - occ)
            if T < 1e-7:
                for kk in range(k + 1, K):
                    weights[base + kk] = 0.0
                    positions[base + kk, 0] = x
                    positions[base + kk, 1] = y
                    positions[base + kk, 2] = z
                break


def mc_gain_oracle(field: OccupancyField, novelty_lookup, pose: Pose,
                   cam: CameraModel, n_samples: int, seed: int,
                   rcfg: RenderConfig) -> float:
    """Volumetric Monte Carlo estimate of the coverage gain for one pose.

    ``novelty_lookup`` maps an (M, 3) array of world points to novelty values
    in {0, 1}. Samples are stratified per pixel along depth, with sub-pixel
    jitter, between the camera's near and far planes.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    W, H = cam.width, cam.height
    K = max(1, int(math.ceil(n_samples / (W * H))))
    rng = np.random.default_rng(seed)
    jit = rng.random((3, W * H * K))
    positions = np.empty((W * H * K, 3))
    weights = np.empty(W * H * K)
    nx, ny, nz = (int(v) for v in field.dims)
    _march_kernel(pose.position, np.ascontiguousarray(pose.rotation()), W, H,
                  math.tan(math.radians(cam.fov_h) / 2.0),
                  math.tan(math.radians(cam.fov_v) / 2.0),
                  cam.near, cam.far, K, jit[0], jit[1], jit[2],
                  field.values, field.bounds[0], field.resolution,
                  nx, ny, nz, rcfg.d_th, positions, weights)
    mask = weights > 1e-12
    if not mask.any():
        return 0.0
    gamma = np.asarray(novelty_lookup(positions[mask]), dtype=np.float64)
    return float(np.sum(weights[mask] * gamma))


def gaussian_novelty_lookup(gset: GaussianProxySet, overlay: NoveltyOverlay):
    """Novelty of the nearest Gaussian, zero outside every 3-sigma support."""
    tree = cKDTree(gset.centers)

    def lookup(points: np.ndarray) -> np.ndarray:
        d, idx = tree.query(np.atleast_2d(points), k=1)
        inside = d <= 3.0 * gset.radii[idx]
        return np.where(inside, overlay.bits[idx], 0).astype(np.float64)

    return lookup


@njit(cache=True)
def _mixture_kernel(centers, radii, opac, bmin, res, nx, ny, nz, out):
    for i in range(centers.shape[0]):
        r = radii[i]
        lim = 3.0 * r
        x0 = max(0, int((centers[i, 0] - lim - bmin[0]) / res))
        y0 = max(0, int((centers[i, 1] - lim - bmin[1]) / res))
        z0 = max(0, int((centers[i, 2] - lim - bmin[2]) / res))
        x1 = min(nx - 1, int((centers[i, 0] + lim - bmin[0]) / res))
        y1 = min(ny - 1, int((centers[i, 1] + lim - bmin[1]) / res))
        z1 = min(nz - 1, int((centers[i, 2] + lim - bmin[2]) / res))
        inv = 1.0 / (2.0 * r * r)
        for ix in range(x0, x1 + 1):
            cx = bmin[0] + (ix + 0.5) * res - centers[i, 0]
            for iy in range(y0, y1 + 1):
                cy = bmin[1] + (iy + 0.5) * res - centers[i, 1]
                for iz in range(z0, z1 + 1):
                    cz = bmin[2] + (iz + 0.5) * res - centers[i, 2]
                    q = cx * cx + cy * cy + cz * cz
                    if q <= lim * lim:
                        out[ix, iy, iz] += opac[i] * math.exp(-q * inv)


def field_from_gaussians(gset: GaussianProxySet, bounds: np.ndarray,
                         resolution: float) -> OccupancyField:
    """Independent volumetric stand-in for a Gaussian scene: the mixture
    density sampled at voxel centers, clipped to [0, 1]."""
    f = OccupancyField(bounds, resolution, prior=0.5)
    acc = np.zeros(tuple(f.dims))
    nx, ny, nz = (int(v) for v in f.dims)
    _mixture_kernel(gset.centers, gset.radii, gset.opacities,
                    f.bounds[0], f.resolution, nx, ny, nz, acc)
    p = np.clip(acc, 0.0, 1.0)
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    f.log_odds = np.log(p / (1.0 - p))
    return f


# ---------------------------------------------------------------------------
# speed benchmark
# ---------------------------------------------------------------------------

@dataclass
class GainSpeedReport:
    splat_seconds: float
    oracle_seconds: float
    ratio: float


def benchmark_gain_speed(gset: GaussianProxySet, overlay: NoveltyOverlay,
                         field: OccupancyField, poses: list, rcfg: RenderConfig,
                         mc_n_samples: int, novelty_lookup=None) -> GainSpeedReport:
    """Median per-pose timing of the splat gain vs the Monte Carlo oracle."""
    if len(poses) < 10:
        raise ValueError("need at least 10 poses for a stable median")
    if novelty_lookup is None:
        novelty_lookup = gaussian_novelty_lookup(gset, overlay)
    # warm-up excluded from timing (JIT, caches)
    gain_for_pose(gset, overlay, poses[0], rcfg)
    mc_gain_oracle(field, novelty_lookup, poses[0], rcfg.cam, mc_n_samples, 0, rcfg)
    t_splat, t_oracle = [], []
    for i, pose in enumerate(poses):
        t0 = time.perf_counter()
        gain_for_pose(gset, overlay, pose, rcfg)
        t1 = time.perf_counter()
        mc_gain_oracle(field, novelty_lookup, pose, rcfg.cam, mc_n_samples, i, rcfg)
        t2 = time.perf_counter()
        t_splat.append(t1 - t0)
        t_oracle.append(t2 - t1)
    ms = float(np.median(t_splat))
    mo = float(np.median(t_oracle))
    return GainSpeedReport(ms, mo, mo / ms)


def save_gt_cloud(gt: GroundTruthCloud, path) -> None:
    """Same line format as the Gaussian debug dump (radius 0, opacity 1, novelty 0)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# splatplan-gaussians v1 count={gt.points.shape[0]} generation=-1\n")
        fh.write("# x y z radius opacity novelty\n")
        for p in gt.points:
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r} 0.0 1.0 0\n")
