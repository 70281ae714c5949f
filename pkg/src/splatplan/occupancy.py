"""Probabilistic occupancy over a bounded workspace, built by visibility carving.

The field stores per-voxel log-odds on a regular grid spanning the exploration
box. Each depth observation drives voxels between the camera and a surface hit
toward free and the voxel containing the hit toward occupied; space that was
never traversed keeps the unknown-space prior so that it still contributes
expected gain during planning. Everything outside the box is free by fiat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .geometry import CameraModel, DepthImage, Pose

# Log-odds steps sized so one observation of a cell crosses the 0.1 / 0.9
# decision bands from the 0.3 prior.
LOG_ODDS_FREE = -2.5
LOG_ODDS_OCC = 3.5
PROB_MIN = 0.02
PROB_MAX = 0.98
DEFAULT_PRIOR = 0.3


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


@dataclass
class OccupancyField:
    """Voxel grid of occupancy probabilities over an axis-aligned box."""

    bounds: np.ndarray          # (2, 3)
    resolution: float
    prior: float = DEFAULT_PRIOR
    log_odds: np.ndarray = None

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=np.float64)
        if not (0.0 < self.prior < 1.0):
            raise ValueError("prior must lie strictly inside (0, 1)")
        size = self.bounds[1] - self.bounds[0]
        if np.any(size <= 0):
            raise ValueError("bounds box must have positive extent")
        self.dims = np.maximum(1, np.ceil(size / self.resolution - 1e-9)).astype(np.int64)
        if self.log_odds is None:
            self.log_odds = np.full(tuple(self.dims), _logit(self.prior))

    @property
    def values(self) -> np.ndarray:
        """Per-voxel probabilities in [0, 1]."""
        return 1.0 / (1.0 + np.exp(-self.log_odds))

    def voxel_centers(self) -> np.ndarray:
        idx = np.stack(np.meshgrid(*[np.arange(n) for n in self.dims], indexing="ij"), axis=-1)
        return self.bounds[0] + (idx.reshape(-1, 3) + 0.5) * self.resolution

    def voxel_index(self, p) -> tuple[int, int, int]:
        i = np.floor((np.asarray(p) - self.bounds[0]) / self.resolution).astype(int)
        return tuple(np.clip(i, 0, self.dims - 1))


@dataclass
class SurfaceCloud:
    """Deduplicated world-frame surface points with their source pose index."""

    merge_radius: float
    points: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    source: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __len__(self) -> int:
        return self.points.shape[0]

    def append(self, pts: np.ndarray, source_index: int) -> int:
        """Add points at least merge_radius away from everything stored; returns count added."""
        pts = np.atleast_2d(pts)
        if pts.shape[0] == 0:
            return 0
        if len(self):
            d, _ = cKDTree(self.points).query(pts, k=1)
            pts = pts[d >= self.merge_radius]
        if pts.shape[0] == 0:
            return 0
        keep = _greedy_thin(pts, self.merge_radius)
        pts = pts[keep]
        self.points = np.concatenate([self.points, pts], axis=0)
        self.source = np.concatenate([self.source, np.full(pts.shape[0], source_index, dtype=np.int64)])
        return pts.shape[0]


def _greedy_thin(pts: np.ndarray, radius: float) -> np.ndarray:
    """Indices of a subset of pts that is pairwise >= radius apart (first-come order)."""
    tree = cKDTree(pts)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    keep = np.ones(pts.shape[0], dtype=bool)
    for i, j in pairs:  # pairs are sorted with i < j: earlier point wins
        if keep[i]:
            keep[j] = False
    return np.nonzero(keep)[0]


class OccupancyPredictor(Protocol):
    """Behavioral contract for pluggable occupancy sources.

    Implementations map (surface cloud, visited poses, query points) to
    occupancy probabilities, clamped to [0, 1] and deterministic for
    identical inputs.
    """

    def predict(self, cloud: SurfaceCloud, poses: list, points: np.ndarray) -> np.ndarray:
        ...


class CarvingPredictor:
    """Baseline predictor backed by the visibility-carved field."""

    def __init__(self, field_: OccupancyField):
        self.field = field_

    def predict(self, cloud: SurfaceCloud, poses: list, points: np.ndarray) -> np.ndarray:
        return np.clip(query_occupancy(self.field, points), 0.0, 1.0)


# ---------------------------------------------------------------------------
# observation integration (free-space carving)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _carve_counts(origin, dirs, tvals, t_nohit, thickness, bmin, res, nx, ny, nz,
                  free_cnt, occ_cnt):
    for r in range(dirs.shape[0]):
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        t_hit = tvals[r]
        t_end = t_hit if t_hit > 0.0 else t_nohit

        # clip [0, t_end] against the grid box
        t0, t1 = 0.0, t_end
        ok = True
        for ax in range(3):
            if ax == 0:
                o, d, lo = origin[0], dx, bmin[0]
                hi = lo + nx * res
            elif ax == 1:
                o, d, lo = origin[1], dy, bmin[1]
                hi = lo + ny * res
            else:
                o, d, lo = origin[2], dz, bmin[2]
                hi = lo + nz * res
            if abs(d) < 1e-15:
                if o < lo or o > hi:
                    ok = False
                    break
            else:
                a = (lo - o) / d
                b = (hi - o) / d
                if a > b:
                    a, b = b, a
                if a > t0:
                    t0 = a
                if b < t1:
                    t1 = b
                if t0 > t1:
                    ok = False
                    break
        if not ok:
            continue

        hx = hy = hz = -1
        if t_hit > 0.0:
            # tolerate hits that land a rounding error outside the box
            # (surfaces often sit exactly on the bounds planes)
            eps_b = 1e-9 * res
            px = origin[0] + dx * t_hit - bmin[0]
            py = origin[1] + dy * t_hit - bmin[1]
            pz = origin[2] + dz * t_hit - bmin[2]
            if (-eps_b <= px <= nx * res + eps_b and -eps_b <= py <= ny * res + eps_b
                    and -eps_b <= pz <= nz * res + eps_b):
                hx = int(px / res)
                hy = int(py / res)
                hz = int(pz / res)
                if hx < 0: hx = 0
                if hy < 0: hy = 0
                if hz < 0: hz = 0
                if hx >= nx: hx = nx - 1
                if hy >= ny: hy = ny - 1
                if hz >= nz: hz = nz - 1

        # DDA from the entry point
        eps = 1e-9
        t = t0 + eps
        ix = int((origin[0] + dx * t - bmin[0]) / res)
        iy = int((origin[1] + dy * t - bmin[1]) / res)
        iz = int((origin[2] + dz * t - bmin[2]) / res)
        if ix < 0: ix = 0
        if iy < 0: iy = 0
        if iz < 0: iz = 0
        if ix >= nx: ix = nx - 1
        if iy >= ny: iy = ny - 1
        if iz >= nz: iz = nz - 1

        step_x = 1 if dx > 0 else -1
        step_y = 1 if dy > 0 else -1
        step_z = 1 if dz > 0 else -1
        big = 1e30
        if abs(dx) < 1e-15:
            tmax_x, tdelta_x = big, big
        else:
            nxt = bmin[0] + (ix + (1 if dx > 0 else 0)) * res
            tmax_x = (nxt - origin[0]) / dx
            tdelta_x = res / abs(dx)
        if abs(dy) < 1e-15:
            tmax_y, tdelta_y = big, big
        else:
            nxt = bmin[1] + (iy + (1 if dy > 0 else 0)) * res
            tmax_y = (nxt - origin[1]) / dy
            tdelta_y = res / abs(dy)
        if abs(dz) < 1e-15:
            tmax_z, tdelta_z = big, big
        else:
            nxt = bmin[2] + (iz + (1 if dz > 0 else 0)) * res
            tmax_z = (nxt - origin[2]) / dz
            tdelta_z = res / abs(dz)

        t_stop = t1
        max_steps = (nx + ny + nz) * 3 + 9
        for _ in range(max_steps):
            if ix == hx and iy == hy and iz == hz:
                break
            free_cnt[ix, iy, iz] += 1
            if tmax_x <= tmax_y and tmax_x <= tmax_z:
                if tmax_x >= t_stop:
                    break
                ix += step_x
                if ix < 0 or ix >= nx:
                    break
                tmax_x += tdelta_x
            elif tmax_y <= tmax_z:
                if tmax_y >= t_stop:
                    break
                iy += step_y
                if iy < 0 or iy >= ny:
                    break
                tmax_y += tdelta_y
            else:
                if tmax_z >= t_stop:
                    break
                iz += step_z
                if iz < 0 or iz >= nz:
                    break
                tmax_z += tdelta_z

        if hx >= 0:
            # assumed obstacle thickness: the surface occupies a band behind
            # the hit, so observed walls occlude as volumes, not paper sheets
            n_occ = 1 + int(thickness / res)
            px = origin[0] + dx * t_hit - bmin[0]
            py = origin[1] + dy * t_hit - bmin[1]
            pz = origin[2] + dz * t_hit - bmin[2]
            step = res * 0.5
            for j in range(2 * n_occ + 1):
                qx = int((px + dx * step * j) / res)
                qy = int((py + dy * step * j) / res)
                qz = int((pz + dz * step * j) / res)
                if qx < 0 or qx >= nx or qy < 0 or qy >= ny or qz < 0 or qz >= nz:
                    break
                occ_cnt[qx, qy, qz] += 1


def integrate_observation(field_: OccupancyField, cloud: SurfaceCloud,
                          depth: DepthImage, pose: Pose, cam: CameraModel,
                          source_index: int = 0,
                          hit_thickness: float | None = None) -> tuple[OccupancyField, SurfaceCloud]:
    """Carve the field along the observation's rays and grow the surface cloud.

    Voxels traversed strictly before a hit move toward free; the voxel
    containing a hit, and an assumed-thickness band behind it, move toward
    occupied (space behind a surface is not observable, and treating it as
    solid is what lets observed walls occlude the proxy rendering); rays
    without a hit carve up to the far plane. Each voxel takes at most one
    log-odds step per observation (the usual inverse sensor model), with a
    hit outranking a traversal, so grazing rays cannot erode a surface cell
    that the same image confirms. The update is accumulated per voxel before
    being applied and is therefore independent of pixel order.
    """
    if hit_thickness is None:
        hit_thickness = 6.0 * field_.resolution
    dirs = cam.ray_directions() @ pose.rotation().T
    tvals = depth.values.reshape(-1)
    free_cnt = np.zeros(tuple(field_.dims), dtype=np.int64)
    occ_cnt = np.zeros(tuple(field_.dims), dtype=np.int64)
    nx, ny, nz = (int(v) for v in field_.dims)
    _carve_counts(pose.position, np.ascontiguousarray(dirs), tvals, cam.far,
                  float(hit_thickness), field_.bounds[0], field_.resolution,
                  nx, ny, nz, free_cnt, occ_cnt)
    occ_seen = occ_cnt > 0
    free_seen = (free_cnt > 0) & ~occ_seen
    field_.log_odds += occ_seen * LOG_ODDS_OCC + free_seen * LOG_ODDS_FREE
    np.clip(field_.log_odds, _logit(PROB_MIN), _logit(PROB_MAX), out=field_.log_odds)

    from .geometry import backproject

    cloud.append(backproject(depth, pose, cam), source_index)
    return field_, cloud


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------

def query_occupancy(field_: OccupancyField, x: np.ndarray) -> np.ndarray | float:
    """Trilinear occupancy at world points; exactly 0 outside the bounds box.

    Implemented as staged lerps, so a constant field interpolates to exactly
    its value and voxel-center queries return the stored value.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    inside = np.all((pts >= field_.bounds[0]) & (pts <= field_.bounds[1]), axis=1)
    out = np.zeros(pts.shape[0])
    if inside.any():
        vals = field_.values
        g = (pts[inside] - field_.bounds[0]) / field_.resolution - 0.5
        g = np.clip(g, 0.0, np.asarray(field_.dims, dtype=np.float64) - 1.0)
        i0 = np.maximum(np.floor(g).astype(np.int64), 0)
        f = g - i0
        ix0, iy0, iz0 = i0[:, 0], i0[:, 1], i0[:, 2]
        ix1 = np.minimum(ix0 + 1, field_.dims[0] - 1)
        iy1 = np.minimum(iy0 + 1, field_.dims[1] - 1)
        iz1 = np.minimum(iz0 + 1, field_.dims[2] - 1)

        def lerp(a, b, t):
            return a + t * (b - a)

        c00 = lerp(vals[ix0, iy0, iz0], vals[ix1, iy0, iz0], f[:, 0])
        c10 = lerp(vals[ix0, iy1, iz0], vals[ix1, iy1, iz0], f[:, 0])
        c01 = lerp(vals[ix0, iy0, iz1], vals[ix1, iy0, iz1], f[:, 0])
        c11 = lerp(vals[ix0, iy1, iz1], vals[ix1, iy1, iz1], f[:, 0])
        c0 = lerp(c00, c10, f[:, 1])
        c1 = lerp(c01, c11, f[:, 1])
        out[inside] = lerp(c0, c1, f[:, 2])
    if np.asarray(x).ndim == 1:
        return float(out[0])
    return out


def sample_proxy_points(field_: OccupancyField, n_total: int,
                        interior_fraction: float, seed: int,
                        shell_margin: float | None = None) -> np.ndarray:
    """Random proxy points: dense inside the box, the rest in a margin shell."""
    if n_total < 1:
        raise ValueError("n_total must be >= 1")
    if not (0.0 < interior_fraction <= 1.0):
        raise ValueError("interior_fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    n_in = int(math.ceil(interior_fraction * n_total))
    n_out = n_total - n_in
    lo, hi = field_.bounds
    pts = [rng.uniform(lo, hi, size=(n_in, 3))]
    if n_out > 0:
        if shell_margin is None:
            shell_margin = 0.1 * float(np.linalg.norm(hi - lo))
        elo, ehi = lo - shell_margin, hi + shell_margin
        shell = np.empty((n_out, 3))
        got = 0
        while got < n_out:
            cand = rng.uniform(elo, ehi, size=(max(16, 2 * (n_out - got)), 3))
            outside = ~np.all((cand >= lo) & (cand <= hi), axis=1)
            cand = cand[outside]
            take = min(cand.shape[0], n_out - got)
            shell[got:got + take] = cand[:take]
            got += take
        pts.append(shell)
    return np.concatenate(pts, axis=0)


_PROBE_OFFSETS = np.array([
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0], [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0], [0.0, 0.0, -1.0],
])


def is_path_free(field_: OccupancyField, a: Pose, b: Pose,
                 agent_radius: float, threshold: float) -> bool:
    """True iff the straight segment a->b, inflated by the agent radius, stays
    below the occupancy threshold at samples spaced half a voxel apart."""
    pa, pb = a.position, b.position
    length = float(np.linalg.norm(pb - pa))
    n = max(2, int(math.ceil(length / (field_.resolution / 2.0))) + 1)
    ts = np.linspace(0.0, 1.0, n)
    centers = pa + ts[:, None] * (pb - pa)
    probes = (centers[:, None, :] + agent_radius * _PROBE_OFFSETS[None, :, :]).reshape(-1, 3)
    occ = query_occupancy(field_, probes)
    return bool(np.all(occ < threshold))


# ---------------------------------------------------------------------------
# debug dump
# ---------------------------------------------------------------------------

def save_field(field_: OccupancyField, path) -> None:
    """Write the grid: one ASCII header line, then raw little-endian float64
    probabilities in C order (x fastest-varying last)."""
    lo = [float(v) for v in field_.bounds[0]]
    hi = [float(v) for v in field_.bounds[1]]
    header = ("splatplan-occupancy v1 "
              f"{field_.dims[0]} {field_.dims[1]} {field_.dims[2]} "
              f"{lo[0]!r} {lo[1]!r} {lo[2]!r} {hi[0]!r} {hi[1]!r} {hi[2]!r} "
              f"{float(field_.resolution)!r} {float(field_.prior)!r}\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(field_.values.astype("<f8").tobytes())


def load_field(path) -> OccupancyField:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if header[:2] != ["splatplan-occupancy", "v1"]:
            raise ValueError("not a splatplan occupancy dump")
        nx, ny, nz = (int(v) for v in header[2:5])
        lo = [float(v) for v in header[5:8]]
        hi = [float(v) for v in header[8:11]]
        res = float(header[11])
        prior = float(header[12])
        values = np.frombuffer(fh.read(), dtype="<f8").reshape(nx, ny, nz)
    f = OccupancyField(np.array([lo, hi]), res, prior)
    p = np.clip(values, 1e-9, 1 - 1e-9)
    f.log_odds = np.log(p / (1 - p))
    return f
