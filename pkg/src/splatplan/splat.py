"""Software splat renderer for the proxy Gaussians and the coverage-gain sum.

Per pixel, Gaussians are composited front-to-back in order of Euclidean
center distance: alpha_i = opacity_i * exp(-u^2 / (2 sigma2d^2)) with u the
pixel-center distance to the projected Gaussian center (pixels) and
sigma2d = f * radius / depth the projected 1-sigma footprint, evaluated out
to 3 sigma. Transmittance is the running product of (1 - alpha); the rendered
"color" is the novelty bit. Pixel depth is the alpha-weighted expected depth
and counts as valid once the accumulated alpha clears a threshold.

The per-pixel compositing order is fixed, so results are independent of any
internal parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .gaussians import GaussianProxySet, NoveltyOverlay
from .geometry import CameraModel, Pose

DEFAULT_ALPHA_CUTOFF = 1.0 / 255.0
DEFAULT_T_MIN = 1e-3
DEFAULT_VALID_ALPHA = 0.5


class StaleOverlayError(ValueError):
    """Novelty overlay belongs to a different Gaussian generation."""


@dataclass(frozen=True)
class RenderConfig:
    """Rendering and gain parameters; d_th derives from the focal length and
    the target surface density (points per square meter)."""

    cam: CameraModel
    r_target: float
    alpha_cutoff: float = DEFAULT_ALPHA_CUTOFF
    t_min: float = DEFAULT_T_MIN
    valid_alpha: float = DEFAULT_VALID_ALPHA

    def __post_init__(self):
        if self.r_target <= 0:
            raise ValueError("r_target must be positive")
        if not (0.0 < self.valid_alpha < 1.0):
            raise ValueError("valid_alpha must lie in (0, 1)")
        if not (0.0 <= self.t_min < 1.0):
            raise ValueError("t_min must lie in [0, 1)")

    @property
    def d_th(self) -> float:
        """Threshold depth below which pixels oversample the surface."""
        return self.cam.focal / math.sqrt(self.r_target)

    @classmethod
    def for_scene(cls, cam: CameraModel, scene_diagonal: float, **kw) -> "RenderConfig":
        """Pick r_target so d_th equals half the scene scale."""
        d_th = scene_diagonal / 2.0
        return cls(cam=cam, r_target=(cam.focal / d_th) ** 2, **kw)


@dataclass
class NoveltyRender:
    novelty: np.ndarray    # (H, W) accumulated novelty in [0, 1]
    depth: np.ndarray      # (H, W) alpha-weighted depth, 0.0 where invalid
    acc_alpha: np.ndarray  # (H, W) accumulated opacity in [0, 1]


@njit(cache=True)
def _bin_and_composite(u, v, dist, sig, opac, gamma, W, H, cutoff, t_min,
                       valid_alpha, novelty, depth, acc):
    n = u.shape[0]
    npix = W * H

    # pass 1: count footprint pixels per image pixel
    counts = np.zeros(npix + 1, dtype=np.int64)
    for i in range(n):
        r3 = 3.0 * sig[i]
        c0 = int(math.ceil(u[i] - r3 - 0.5))
        c1 = int(math.floor(u[i] + r3 - 0.5))
        r0 = int(math.ceil(v[i] - r3 - 0.5))
        r1 = int(math.floor(v[i] + r3 - 0.5))
        if c0 < 0: c0 = 0
        if r0 < 0: r0 = 0
        if c1 >= W: c1 = W - 1
        if r1 >= H: r1 = H - 1
        lim = r3 * r3
        for row in range(r0, r1 + 1):
            dv = (row + 0.5) - v[i]
            for col in range(c0, c1 + 1):
                du = (col + 0.5) - u[i]
                if du * du + dv * dv <= lim:
                    counts[row * W + col + 1] += 1
    for p in range(npix):
        counts[p + 1] += counts[p]
    entries = np.empty(counts[npix], dtype=np.int64)
    cursor = counts[:npix].copy()

    # pass 2: fill per-pixel entry lists; iteration in depth order keeps each
    # pixel's list sorted front-to-back
    for i in range(n):
        r3 = 3.0 * sig[i]
        c0 = int(math.ceil(u[i] - r3 - 0.5))
        c1 = int(math.floor(u[i] + r3 - 0.5))
        r0 = int(math.ceil(v[i] - r3 - 0.5))
        r1 = int(math.floor(v[i] + r3 - 0.5))
        if c0 < 0: c0 = 0
        if r0 < 0: r0 = 0
        if c1 >= W: c1 = W - 1
        if r1 >= H: r1 = H - 1
        lim = r3 * r3
        for row in range(r0, r1 + 1):
            dv = (row + 0.5) - v[i]
            for col in range(c0, c1 + 1):
                du = (col + 0.5) - u[i]
                if du * du + dv * dv <= lim:
                    p = row * W + col
                    entries[cursor[p]] = i
                    cursor[p] += 1

    # pass 3: front-to-back compositing, independent per pixel
    for p in prange(npix):
        row = p // W
        col = p - row * W
        T = 1.0
        nov = 0.0
        a_sum = 0.0
        d_num = 0.0
        for k in range(counts[p], counts[p + 1]):
            i = entries[k]
            du = (col + 0.5) - u[i]
            dv = (row + 0.5) - v[i]
            q = du * du + dv * dv
            s2 = sig[i] * sig[i]
            a = opac[i] * math.exp(-q / (2.0 * s2))
            if a < cutoff:
                continue
            nov += T * a * gamma[i]
            a_sum += T * a
            d_num += T * a * dist[i]
            T *= (1.0 - a)
            if T < t_min:
                break
        novelty[row, col] = nov
        acc[row, col] = a_sum
        depth[row, col] = d_num / a_sum if a_sum >= valid_alpha else 0.0


def render_novelty(gset: GaussianProxySet, overlay: NoveltyOverlay,
                   pose: Pose, cfg: RenderConfig) -> NoveltyRender:
    """Render novelty, accumulated alpha, and expected depth for one pose."""
    if overlay.generation != gset.generation:
        raise StaleOverlayError(
            f"overlay generation {overlay.generation} != set generation {gset.generation}")
    cam = cfg.cam
    H, W = cam.height, cam.width
    novelty = np.zeros((H, W))
    depth = np.zeros((H, W))
    acc = np.zeros((H, W))
    if len(gset) == 0:
        return NoveltyRender(novelty, depth, acc)

    p_cam = (gset.centers - pose.position) @ pose.rotation()
    z = p_cam[:, 2]
    dist = np.sqrt(np.einsum("ij,ij->i", p_cam, p_cam))
    keep = (z > 1e-9) & (dist >= cam.near)
    if not keep.any():
        return NoveltyRender(novelty, depth, acc)
    p_cam, z, dist = p_cam[keep], z[keep], dist[keep]
    u = cam.fx * p_cam[:, 0] / z + W / 2.0
    v = cam.fy * p_cam[:, 1] / z + H / 2.0
    sig = cam.focal * (gset.radii[keep] / dist)
    opac = gset.opacities[keep]
    gamma = overlay.bits[keep].astype(np.float64)

    # cheap screen-space cull, then front-to-back order by center distance
    r3 = 3.0 * sig
    onscreen = (u + r3 >= 0) & (u - r3 < W) & (v + r3 >= 0) & (v - r3 < H)
    if not onscreen.any():
        return NoveltyRender(novelty, depth, acc)
    order = np.argsort(dist[onscreen], kind="stable")
    sel = np.nonzero(onscreen)[0][order]

    _bin_and_composite(u[sel], v[sel], dist[sel], sig[sel], opac[sel], gamma[sel],
                       W, H, cfg.alpha_cutoff, cfg.t_min, cfg.valid_alpha,
                       novelty, depth, acc)
    return NoveltyRender(novelty, depth, acc)


def depth_weight(depth, d_th: float):
    """Near-range discount: quadratically down-weight pixels closer than d_th."""
    d = np.asarray(depth, dtype=np.float64)
    return np.minimum(1.0, (d / d_th) ** 2)


def coverage_gain(render: NoveltyRender, cfg: RenderConfig) -> float:
    """Depth-weighted novelty summed over pixels with valid depth."""
    mask = render.depth > 0.0
    if not mask.any():
        return 0.0
    return float(np.sum(depth_weight(render.depth[mask], cfg.d_th) * render.novelty[mask]))


def gain_for_pose(gset: GaussianProxySet, overlay: NoveltyOverlay, pose: Pose,
                  cfg: RenderConfig) -> tuple[float, NoveltyRender]:
    """Coverage gain for a candidate pose plus the render that produced it,
    so callers can feed the depth map to mark_observed without re-rendering."""
    render = render_novelty(gset, overlay, pose, cfg)
    return coverage_gain(render, cfg), render


def save_pgm(values: np.ndarray, path, vmax: float | None = None) -> None:
    """Dump a 2D array as an 8-bit binary PGM image (debug aid)."""
    v = np.asarray(values, dtype=np.float64)
    if vmax is None:
        vmax = float(v.max()) or 1.0
    img = np.clip(v / vmax * 255.0, 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
