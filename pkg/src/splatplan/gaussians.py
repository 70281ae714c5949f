"""Proxy Gaussians over the occupancy field, with per-beam novelty state.

Each Gaussian sits on a sampled proxy point; its isotropic radius is half the
distance to its nearest neighbor (the radius is the 1-sigma extent, rendered
out to 3 sigma), its opacity mirrors the occupancy field, and a binary novelty
bit says whether the surface it stands for has already been observed. Novelty
lives in a separate overlay so that planner beams can fork and consume it
independently while sharing the frozen geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import CameraModel, DepthImage, Pose
from .occupancy import OccupancyField, SurfaceCloud, query_occupancy


@dataclass
class GaussianProxySet:
    """Frozen Gaussian geometry for one build generation."""

    centers: np.ndarray    # (N, 3)
    radii: np.ndarray      # (N,)
    opacities: np.ndarray  # (N,)
    generation: int = 0

    def __len__(self) -> int:
        return self.centers.shape[0]

    def novelty_mass(self, overlay: "NoveltyOverlay") -> float:
        """Total remaining gain potential: sum of opacity over novel Gaussians."""
        return float(np.dot(self.opacities, overlay.bits.astype(np.float64)))


@dataclass
class NoveltyOverlay:
    """Per-Gaussian novelty bits for one generation; bits only ever drop 1 -> 0."""

    generation: int
    bits: np.ndarray  # (N,) uint8 in {0, 1}

    def fork(self) -> "NoveltyOverlay":
        return NoveltyOverlay(self.generation, self.bits.copy())


def fork_overlay(overlay: NoveltyOverlay) -> NoveltyOverlay:
    """Independent copy; mutations to the copy never touch the original."""
    return overlay.fork()


def build_gaussians(field: OccupancyField, proxy_points: np.ndarray,
                    generation: int = 0) -> tuple[GaussianProxySet, NoveltyOverlay]:
    """Create Gaussians on the proxy points with half-nearest-neighbor radii.

    Exact duplicate points are dropped (they would force a zero radius).
    Returns the set and a fresh all-novel overlay of the same generation.
    """
    pts = np.asarray(proxy_points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("proxy_points must have shape (N, 3)")
    pts = np.unique(pts, axis=0)
    if pts.shape[0] < 2:
        raise ValueError("need at least 2 distinct proxy points")
    d, _ = cKDTree(pts).query(pts, k=2)
    radii = 0.5 * d[:, 1]
    opac = np.asarray(query_occupancy(field, pts), dtype=np.float64)
    gset = GaussianProxySet(pts, radii, opac, generation)
    return gset, NoveltyOverlay(generation, np.ones(pts.shape[0], dtype=np.uint8))


def _project_centers(gset: GaussianProxySet, pose: Pose, cam: CameraModel):
    """Pixel indices, camera distance, and in-image mask for every center."""
    p_cam = (gset.centers - pose.position) @ pose.rotation()
    z = p_cam[:, 2]
    dist = np.linalg.norm(gset.centers - pose.position, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.fx * p_cam[:, 0] / z + cam.width / 2.0
        v = cam.fy * p_cam[:, 1] / z + cam.height / 2.0
    col = np.floor(u).astype(np.int64)
    row = np.floor(v).astype(np.int64)
    in_image = (z > 0) & (col >= 0) & (col < cam.width) & (row >= 0) & (row < cam.height)
    return col, row, dist, in_image


def mark_observed(gset: GaussianProxySet, overlay: NoveltyOverlay, pose: Pose,
                  cam: CameraModel, rendered_depth: DepthImage,
                  eps_d: float, behind: float = 0.0) -> tuple[NoveltyOverlay, int]:
    """Consume novelty of Gaussians whose center matches the rendered depth.

    A Gaussian is observed when its center projects inside the image, the
    depth at that pixel is valid, and the camera-to-center distance agrees
    with it within eps_d. When the occupancy side models surfaces with an
    assumed thickness, ``behind`` extends the match that far past the depth
    reading: the band standing in for the solid interior counts as observed
    along with its surface. Returns the overlay and the count of flipped bits.
    """
    if overlay.generation != gset.generation:
        raise ValueError("stale overlay: generation mismatch")
    col, row, dist, ok = _project_centers(gset, pose, cam)
    idx = np.nonzero(ok)[0]
    if idx.size == 0:
        return overlay, 0
    d_img = rendered_depth.values[row[idx], col[idx]]
    lo = d_img - eps_d
    hi = d_img + max(eps_d, behind)
    observed = (d_img > 0.0) & (dist[idx] >= lo) & (dist[idx] <= hi)
    hit = idx[observed]
    newly = int(np.count_nonzero(overlay.bits[hit]))
    overlay.bits[hit] = 0
    return overlay, newly


def refresh_after_observation(gset: GaussianProxySet, overlay: NoveltyOverlay,
                              field: OccupancyField, executed_pose: Pose,
                              cam: CameraModel, gt_depth: DepthImage,
                              eps_d: float) -> tuple[GaussianProxySet, NoveltyOverlay]:
    """Re-read every opacity from the updated field and consume novelty of
    Gaussians confirmed by the real observation. Geometry is untouched."""
    gset.opacities = np.asarray(query_occupancy(field, gset.centers), dtype=np.float64)
    mark_observed(gset, overlay, executed_pose, cam, gt_depth, eps_d)
    return gset, overlay


def seed_overlay_from_cloud(gset: GaussianProxySet, overlay: NoveltyOverlay,
                            cloud: SurfaceCloud, eps_d: float) -> NoveltyOverlay:
    """After a rebuild, clear novelty of Gaussians sitting on already-mapped
    surface (centers within eps_d of the surface cloud)."""
    if len(cloud) == 0 or len(gset) == 0:
        return overlay
    d, _ = cKDTree(cloud.points).query(gset.centers, k=1)
    overlay.bits[d <= eps_d] = 0
    return overlay


def save_gaussians(gset: GaussianProxySet, overlay: NoveltyOverlay, path) -> None:
    """Line-oriented debug dump: ``x y z radius opacity novelty`` per Gaussian."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# splatplan-gaussians v1 count={len(gset)} generation={gset.generation}\n")
        fh.write("# x y z radius opacity novelty\n")
        for c, r, o, b in zip(gset.centers, gset.radii, gset.opacities, overlay.bits):
            fh.write(f"{float(c[0])!r} {float(c[1])!r} {float(c[2])!r} "
                     f"{float(r)!r} {float(o)!r} {int(b)}\n")
