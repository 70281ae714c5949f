"""Independent oracles used across the test suite.

These deliberately re-derive results by brute force (all-pairs, dense
sampling, exhaustive enumeration) so that the fast implementations are
checked against a second, simpler route.
"""

import numpy as np


def brute_force_depths(tris: np.ndarray, origin: np.ndarray, dirs: np.ndarray,
                       near: float, far: float) -> np.ndarray:
    """All-triangles first-hit depth per ray, mirroring the production
    intersection arithmetic (same epsilons, same operation order)."""
    v0 = tris[:, 0]
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    out = np.zeros(dirs.shape[0])
    for r in range(dirs.shape[0]):
        dx, dy, dz = dirs[r]
        px = dy * e2[:, 2] - dz * e2[:, 1]
        py = dz * e2[:, 0] - dx * e2[:, 2]
        pz = dx * e2[:, 1] - dy * e2[:, 0]
        det = e1[:, 0] * px + e1[:, 1] * py + e1[:, 2] * pz
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_det = 1.0 / det
            tx = origin[0] - v0[:, 0]
            ty = origin[1] - v0[:, 1]
            tz = origin[2] - v0[:, 2]
            u = (tx * px + ty * py + tz * pz) * inv_det
            qx = ty * e1[:, 2] - tz * e1[:, 1]
            qy = tz * e1[:, 0] - tx * e1[:, 2]
            qz = tx * e1[:, 1] - ty * e1[:, 0]
            v = (dx * qx + dy * qy + dz * qz) * inv_det
            t = (e2[:, 0] * qx + e2[:, 1] * qy + e2[:, 2] * qz) * inv_det
        ok = ((np.abs(det) >= 1e-14) & (u >= -1e-10) & (u <= 1.0 + 1e-10)
              & (v >= -1e-10) & (u + v <= 1.0 + 1e-10) & (t >= near) & (t < far))
        if ok.any():
            out[r] = t[ok].min()
    return out


def point_to_mesh_distance(points: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Exact distance from each point to the closest triangle (Ericson's
    closest-point-on-triangle, vectorized over points, looped over faces)."""
    points = np.atleast_2d(points)
    best = np.full(points.shape[0], np.inf)
    for tri in tris:
        a, b, c = tri
        ab, ac = b - a, c - a
        ap = points - a
        d1 = ap @ ab
        d2 = ap @ ac
        bp = points - b
        d3 = bp @ ab
        d4 = bp @ ac
        cp = points - c
        d5 = cp @ ab
        d6 = cp @ ac
        va = d3 * d6 - d5 * d4
        vb = d5 * d2 - d1 * d6
        vc = d1 * d4 - d3 * d2
        denom_v = np.where(vc != 0, 1.0 / np.maximum(d1 - d3, 1e-300), 0.0)
        # region tests
        closest = np.empty_like(points)
        # vertex a
        m = (d1 <= 0) & (d2 <= 0)
        closest[m] = a
        # vertex b
        m2 = (~m) & (d3 >= 0) & (d4 <= d3)
        closest[m2] = b
        done = m | m2
        # edge ab
        with np.errstate(divide="ignore", invalid="ignore"):
            v_ab = d1 / (d1 - d3)
        m3 = (~done) & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        closest[m3] = a + v_ab[m3, None] * ab
        done |= m3
        # vertex c
        m4 = (~done) & (d6 >= 0) & (d5 <= d6)
        closest[m4] = c
        done |= m4
        # edge ac
        with np.errstate(divide="ignore", invalid="ignore"):
            w_ac = d2 / (d2 - d6)
        m5 = (~done) & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        closest[m5] = a + w_ac[m5, None] * ac
        done |= m5
        # edge bc
        with np.errstate(divide="ignore", invalid="ignore"):
            w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        m6 = (~done) & (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        closest[m6] = b + w_bc[m6, None] * (c - b)
        done |= m6
        # interior
        m7 = ~done
        if m7.any():
            denom = 1.0 / (va + vb + vc)
            v = vb * denom
            w = vc * denom
            closest[m7] = a + v[m7, None] * ab + w[m7, None] * ac
        d = np.linalg.norm(points - closest, axis=1)
        best = np.minimum(best, d)
    return best


def coarse_free_grid(tris: np.ndarray, bounds: np.ndarray, resolution: float):
    """Occupied/free voxel classification straight from point-to-mesh
    distances (no flood fill); independent of the library's grid builder."""
    dims = np.maximum(1, np.ceil((bounds[1] - bounds[0]) / resolution)).astype(int)
    idx = np.stack(np.meshgrid(*[np.arange(n) for n in dims], indexing="ij"), axis=-1)
    centers = bounds[0] + (idx.reshape(-1, 3) + 0.5) * resolution
    d = point_to_mesh_distance(centers, tris)
    free = (d > resolution * 0.75).reshape(tuple(dims))
    return free, centers.reshape(tuple(dims) + (3,))
