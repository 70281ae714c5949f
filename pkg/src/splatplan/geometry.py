"""Scene geometry, camera model, and depth-sensor simulation.

Conventions used by every module in this package:

- the world frame is right-handed with +z up; all lengths are meters
- a pose stores a position plus a unit quaternion (w, x, y, z) encoding the
  camera-to-world rotation; camera axes are +x right, +y down, +z forward
- depth is measured along the ray (Euclidean camera-to-hit distance), never
  z-depth
- pixel (row, col) covers the unit square [col, col+1) x [row, row+1) on the
  image plane; rays are cast through pixel centers (col+0.5, row+0.5)
- invalid / no-hit depth is encoded as 0.0 (``NO_DEPTH``); valid depths are
  strictly positive and lie in [near, far]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit, prange

NO_DEPTH = 0.0

SCENE_KINDS = ("room-with-pillars", "courtyard", "two-room-corridor")


class MeshLoadError(ValueError):
    """Raised when a mesh file cannot be parsed into a valid triangle scene."""


# ---------------------------------------------------------------------------
# quaternions (w, x, y, z)
# ---------------------------------------------------------------------------

def quat_normalize(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=np.float64) / np.linalg.norm(q)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_axis_angle(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle_rad
    s = math.sin(half)
    return np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_quaternion(rng: np.random.Generator) -> np.ndarray:
    # Shoemake's uniform quaternion construction.
    u1, u2, u3 = rng.random(3)
    a, b = math.sqrt(1.0 - u1), math.sqrt(u1)
    return np.array([
        a * math.sin(2 * math.pi * u2),
        a * math.cos(2 * math.pi * u2),
        b * math.sin(2 * math.pi * u3),
        b * math.cos(2 * math.pi * u3),
    ])


# Camera-to-world rotation of the reference heading: forward = +x (world),
# right = -y, down = -z; yaw/pitch poses are built relative to this basis.
_BASE_CAM = np.array([[0.0, 0.0, 1.0],
                      [-1.0, 0.0, 0.0],
                      [0.0, -1.0, 0.0]])


def _matrix_to_quat(m: np.ndarray) -> np.ndarray:
    w = math.sqrt(max(0.0, 1.0 + m[0, 0] + m[1, 1] + m[2, 2])) / 2.0
    if w > 1e-8:
        return quat_normalize(np.array([
            w,
            (m[2, 1] - m[1, 2]) / (4 * w),
            (m[0, 2] - m[2, 0]) / (4 * w),
            (m[1, 0] - m[0, 1]) / (4 * w),
        ]))
    # fall back on the largest diagonal element
    i = int(np.argmax(np.diag(m)))
    j, k = (i + 1) % 3, (i + 2) % 3
    s = math.sqrt(max(1e-12, 1.0 + m[i, i] - m[j, j] - m[k, k])) * 2.0
    q = np.zeros(4)
    q[0] = (m[k, j] - m[j, k]) / s
    q[1 + i] = 0.25 * s
    q[1 + j] = (m[j, i] + m[i, j]) / s
    q[1 + k] = (m[k, i] + m[i, k]) / s
    return quat_normalize(q)


_BASE_QUAT = _matrix_to_quat(_BASE_CAM)


@dataclass(frozen=True)
class Pose:
    """Rigid camera pose: world position + unit quaternion (w, x, y, z)."""

    position: np.ndarray
    quat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "quat", np.asarray(self.quat, dtype=np.float64))
        if abs(np.linalg.norm(self.quat) - 1.0) > 1e-6:
            raise ValueError("pose quaternion must be unit norm")

    def rotation(self) -> np.ndarray:
        """Camera-to-world rotation matrix (columns = camera axes in world)."""
        return quat_to_matrix(self.quat)

    def forward(self) -> np.ndarray:
        return self.rotation()[:, 2]

    def right(self) -> np.ndarray:
        return self.rotation()[:, 0]

    def pitch(self) -> float:
        """Elevation of the optical axis above the horizontal plane (radians)."""
        fz = float(np.clip(self.forward()[2], -1.0, 1.0))
        return math.asin(fz)

    def yaw(self) -> float:
        f = self.forward()
        return math.atan2(f[1], f[0])

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.position) @ self.rotation()

    def to_world(self, points_cam: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points_cam) @ self.rotation().T + self.position

    def inverse(self) -> "Pose":
        qc = quat_conjugate(self.quat)
        return Pose(-(quat_to_matrix(qc) @ self.position), qc)

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.rotation() @ other.position + self.position,
                    quat_normalize(quat_multiply(self.quat, other.quat)))


def pose_from_yaw_pitch(position, yaw_rad: float, pitch_rad: float = 0.0) -> Pose:
    """Roll-free pose: yaw about world +z, then pitch about the camera's right axis."""
    q = quat_multiply(quat_from_axis_angle([0, 0, 1], yaw_rad),
                      quat_multiply(_BASE_QUAT, quat_from_axis_angle([1, 0, 0], pitch_rad)))
    return Pose(np.asarray(position, dtype=np.float64), quat_normalize(q))


def look_at(position, target, up=(0.0, 0.0, 1.0)) -> Pose:
    position = np.asarray(position, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - position
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise ValueError("look_at target coincides with position")
    fwd = fwd / n
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    rn = np.linalg.norm(right)
    if rn < 1e-9:  # looking straight up/down: pick an arbitrary horizontal right
        right = np.cross(fwd, np.array([1.0, 0.0, 0.0]))
        rn = np.linalg.norm(right)
        if rn < 1e-9:
            right = np.cross(fwd, np.array([0.0, 1.0, 0.0]))
            rn = np.linalg.norm(right)
    right = right / rn
    down = np.cross(fwd, right)
    m = np.stack([right, down, fwd], axis=1)
    return Pose(position, _matrix_to_quat(m))


# ---------------------------------------------------------------------------
# camera
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CameraModel:
    width: int
    height: int
    fov_h: float  # degrees
    fov_v: float  # degrees
    near: float
    far: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("camera resolution must be at least 1x1")
        if not (0.0 < self.fov_h < 180.0 and 0.0 < self.fov_v < 180.0):
            raise ValueError("field of view must lie in (0, 180) degrees")
        if not (0.0 < self.near < self.far):
            raise ValueError("require 0 < near < far")

    @property
    def fx(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.fov_h) / 2.0)

    @property
    def fy(self) -> float:
        return (self.height / 2.0) / math.tan(math.radians(self.fov_v) / 2.0)

    @property
    def focal(self) -> float:
        """Reference focal length in pixels (horizontal)."""
        return self.fx

    def ray_directions(self) -> np.ndarray:
        """Unit ray directions through all pixel centers, camera frame, (H*W, 3)."""
        return _ray_grid(self.width, self.height, self.fov_h, self.fov_v)


@lru_cache(maxsize=32)
def _ray_grid(width: int, height: int, fov_h: float, fov_v: float) -> np.ndarray:
    tan_h = math.tan(math.radians(fov_h) / 2.0)
    tan_v = math.tan(math.radians(fov_v) / 2.0)
    cols = (2.0 * (np.arange(width) + 0.5) / width - 1.0) * tan_h
    rows = (2.0 * (np.arange(height) + 0.5) / height - 1.0) * tan_v
    xs, ys = np.meshgrid(cols, rows)
    dirs = np.stack([xs, ys, np.ones_like(xs)], axis=-1).reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs.setflags(write=False)
    return dirs


@dataclass
class DepthImage:
    """Per-pixel ray depths (meters); 0.0 marks pixels with no hit."""

    values: np.ndarray  # (H, W) float64

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return self.values > 0.0


# ---------------------------------------------------------------------------
# triangle scenes + BVH
# ---------------------------------------------------------------------------

@njit(cache=True)
def _build_ray_data(tris):
    n = tris.shape[0]
    v0 = np.empty((n, 3))
    e1 = np.empty((n, 3))
    e2 = np.empty((n, 3))
    for i in range(n):
        for k in range(3):
            v0[i, k] = tris[i, 0, k]
            e1[i, k] = tris[i, 1, k] - tris[i, 0, k]
            e2[i, k] = tris[i, 2, k] - tris[i, 0, k]
    return v0, e1, e2


@njit(cache=True)
def _raycast_kernel(origin, dirs, node_min, node_max, node_child, node_start,
                    node_count, v0, e1, e2, t_min, t_max, out):
    nrays = dirs.shape[0]
    for r in prange(nrays):
        ox, oy, oz = origin[0], origin[1], origin[2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        best = t_max
        hit = False
        stack = np.empty(64, dtype=np.int64)
        sp = 0
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            # slab test against node AABB
            tn = 0.0
            tf = best
            skip = False
            for ax in range(3):
                if ax == 0:
                    o, d, lo, hi = ox, dx, node_min[node, 0], node_max[node, 0]
                elif ax == 1:
                    o, d, lo, hi = oy, dy, node_min[node, 1], node_max[node, 1]
                else:
                    o, d, lo, hi = oz, dz, node_min[node, 2], node_max[node, 2]
                if abs(d) < 1e-15:
                    if o < lo or o > hi:
                        skip = True
                        break
                else:
                    inv = 1.0 / d
                    t0 = (lo - o) * inv
                    t1 = (hi - o) * inv
                    if t0 > t1:
                        t0, t1 = t1, t0
                    if t0 > tn:
                        tn = t0
                    if t1 < tf:
                        tf = t1
                    if tn > tf:
                        skip = True
                        break
            if skip:
                continue
            c = node_child[node]
            if c >= 0:
                stack[sp] = c
                stack[sp + 1] = c + 1
                sp += 2
                continue
            start = node_start[node]
            for i in range(start, start + node_count[node]):
                # Moller-Trumbore, two-sided
                px = dy * e2[i, 2] - dz * e2[i, 1]
                py = dz * e2[i, 0] - dx * e2[i, 2]
                pz = dx * e2[i, 1] - dy * e2[i, 0]
                det = e1[i, 0] * px + e1[i, 1] * py + e1[i, 2] * pz
                if abs(det) < 1e-14:
                    continue
                inv_det = 1.0 / det
                tx = ox - v0[i, 0]
                ty = oy - v0[i, 1]
                tz = oz - v0[i, 2]
                u = (tx * px + ty * py + tz * pz) * inv_det
                if u < -1e-10 or u > 1.0 + 1e-10:
                    continue
                qx = ty * e1[i, 2] - tz * e1[i, 1]
                qy = tz * e1[i, 0] - tx * e1[i, 2]
                qz = tx * e1[i, 1] - ty * e1[i, 0]
                v = (dx * qx + dy * qy + dz * qz) * inv_det
                if v < -1e-10 or u + v > 1.0 + 1e-10:
                    continue
                t = (e2[i, 0] * qx + e2[i, 1] * qy + e2[i, 2] * qz) * inv_det
                if t_min <= t < best:
                    best = t
                    hit = True
        out[r] = best if hit else 0.0


class _Bvh:
    """Flat binary BVH over triangles; children of node n sit at contiguous indices."""

    __slots__ = ("node_min", "node_max", "node_child", "node_start",
                 "node_count", "v0", "e1", "e2", "order")

    LEAF_SIZE = 4

    def __init__(self, tris: np.ndarray):
        n = tris.shape[0]
        lo = tris.min(axis=1)
        hi = tris.max(axis=1)
        centroids = tris.mean(axis=1)
        order = np.arange(n)

        node_min, node_max, node_child, node_start, node_count = [], [], [], [], []

        def emit(a: int, b: int) -> int:
            idx = len(node_min)
            sel = order[a:b]
            node_min.append(lo[sel].min(axis=0))
            node_max.append(hi[sel].max(axis=0))
            node_child.append(-1)
            node_start.append(a)
            node_count.append(b - a)
            return idx

        # iterative build to avoid recursion limits on large meshes
        root = emit(0, n)
        stack = [(root, 0, n)]
        while stack:
            idx, a, b = stack.pop()
            if b - a <= self.LEAF_SIZE:
                continue
            sel = order[a:b]
            cen = centroids[sel]
            axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
            mid = (a + b) // 2
            part = np.argsort(cen[:, axis], kind="stable")
            order[a:b] = sel[part]
            left = emit(a, mid)
            right = emit(mid, b)
            node_child[idx] = left
            node_start[idx] = -1
            node_count[idx] = 0
            assert right == left + 1
            stack.append((left, a, mid))
            stack.append((right, mid, b))

        self.node_min = np.asarray(node_min)
        self.node_max = np.asarray(node_max)
        self.node_child = np.asarray(node_child, dtype=np.int64)
        self.node_start = np.asarray(node_start, dtype=np.int64)
        self.node_count = np.asarray(node_count, dtype=np.int64)
        self.order = order
        v0, e1, e2 = _build_ray_data(np.ascontiguousarray(tris[order]))
        self.v0, self.e1, self.e2 = v0, e1, e2


@dataclass
class SceneModel:
    """Immutable ground-truth triangle scene with a BVH for ray queries."""

    triangles: np.ndarray  # (N, 3, 3) float64
    bounds: np.ndarray     # (2, 3): [min, max]
    _bvh: _Bvh = field(repr=False, default=None)

    def __post_init__(self):
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.float64)
        if self.triangles.ndim != 3 or self.triangles.shape[1:] != (3, 3):
            raise ValueError("triangles must have shape (N, 3, 3)")
        if self.triangles.shape[0] == 0:
            raise ValueError("scene contains no triangles")
        areas = 0.5 * np.linalg.norm(
            np.cross(self.triangles[:, 1] - self.triangles[:, 0],
                     self.triangles[:, 2] - self.triangles[:, 0]), axis=1)
        bad = np.nonzero(areas < 1e-12)[0]
        if bad.size:
            raise ValueError(f"degenerate zero-area face {bad[0]}")
        self.bounds = np.asarray(self.bounds, dtype=np.float64)
        if self._bvh is None:
            self._bvh = _Bvh(self.triangles)

    @classmethod
    def from_triangles(cls, tris: np.ndarray) -> "SceneModel":
        tris = np.asarray(tris, dtype=np.float64)
        pts = tris.reshape(-1, 3)
        bounds = np.stack([pts.min(axis=0), pts.max(axis=0)])
        return cls(tris, bounds)

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def diagonal(self) -> float:
        return float(np.linalg.norm(self.bounds[1] - self.bounds[0]))

    def center(self) -> np.ndarray:
        return 0.5 * (self.bounds[0] + self.bounds[1])

    def raycast(self, origin: np.ndarray, dirs: np.ndarray,
                t_min: float, t_max: float) -> np.ndarray:
        """First-hit distance per unit-length ray; 0.0 where nothing is hit."""
        dirs = np.ascontiguousarray(dirs, dtype=np.float64)
        out = np.empty(dirs.shape[0])
        b = self._bvh
        _raycast_kernel(np.asarray(origin, dtype=np.float64), dirs,
                        b.node_min, b.node_max, b.node_child, b.node_start,
                        b.node_count, b.v0, b.e1, b.e2,
                        float(t_min), float(t_max), out)
        return out


# ---------------------------------------------------------------------------
# mesh file IO (ASCII v/f records, OBJ-compatible)
# ---------------------------------------------------------------------------

def load_scene(path, format: str = "ascii-mesh") -> SceneModel:
    """Parse an ASCII triangle mesh (``v x y z`` / ``f i j k`` records)."""
    if format != "ascii-mesh":
        raise ValueError(f"unsupported scene format: {format!r}")
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tag, *rest = line.split()
            if tag == "v":
                if len(rest) < 3:
                    raise MeshLoadError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    verts.append([float(x) for x in rest[:3]])
                except ValueError as exc:
                    raise MeshLoadError(f"{path}:{lineno}: bad vertex coordinate ({exc})") from None
            elif tag == "f":
                if len(rest) != 3:
                    raise MeshLoadError(f"{path}:{lineno}: only triangle faces are supported")
                try:
                    idx = [int(tok.split("/")[0]) for tok in rest]
                except ValueError:
                    raise MeshLoadError(f"{path}:{lineno}: bad face index") from None
                if any(i < 1 or i > len(verts) for i in idx):
                    raise MeshLoadError(f"{path}:{lineno}: face index out of range")
                faces.append([i - 1 for i in idx])
            # other record types (vn, vt, o, ...) are ignored
    if not faces:
        raise MeshLoadError(f"{path}: no faces found")
    v = np.asarray(verts)
    tris = v[np.asarray(faces)]
    areas = 0.5 * np.linalg.norm(
        np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1)
    bad = np.nonzero(areas < 1e-12)[0]
    if bad.size:
        raise MeshLoadError(f"{path}: zero-area face {bad[0]}")
    return SceneModel.from_triangles(tris)


def save_scene(scene: SceneModel, path) -> None:
    tris = scene.triangles
    verts = tris.reshape(-1, 3)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# splatplan ascii mesh: {tris.shape[0]} triangles\n")
        for p in verts:
            fh.write(f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
        for i in range(tris.shape[0]):
            fh.write(f"f {3 * i + 1} {3 * i + 2} {3 * i + 3}\n")


# ---------------------------------------------------------------------------
# procedural scenes
# ---------------------------------------------------------------------------

def _quad(p0, p1, p2, p3) -> list:
    return [[p0, p1, p2], [p0, p2, p3]]


def _box(lo, hi) -> list:
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    tris = []
    tris += _quad((x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0))  # bottom
    tris += _quad((x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1))  # top
    tris += _quad((x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1))  # y0
    tris += _quad((x0, y1, z0), (x1, y1, z0), (x1, y1, z1), (x0, y1, z1))  # y1
    tris += _quad((x0, y0, z0), (x0, y1, z0), (x0, y1, z1), (x0, y0, z1))  # x0
    tris += _quad((x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1))  # x1
    return tris


def _wall_x(x, y0, y1, z0, z1) -> list:
    return _quad((x, y0, z0), (x, y1, z0), (x, y1, z1), (x, y0, z1))


def _wall_y(y, x0, x1, z0, z1) -> list:
    return _quad((x0, y, z0), (x1, y, z0), (x1, y, z1), (x0, y, z1))


def _floor(x0, x1, y0, y1, z) -> list:
    return _quad((x0, y0, z), (x1, y0, z), (x1, y1, z), (x0, y1, z))


def _room_with_pillars(rng: np.random.Generator) -> np.ndarray:
    w, d, h = 6.0, 4.5, 2.5
    tris = []
    tris += _floor(0, w, 0, d, 0.0)
    tris += _floor(0, w, 0, d, h)
    tris += _wall_y(0.0, 0, w, 0, h)
    tris += _wall_y(d, 0, w, 0, h)
    tris += _wall_x(0.0, 0, d, 0, h)
    tris += _wall_x(w, 0, d, 0, h)
    center = np.array([w / 2, d / 2])
    placed: list[np.ndarray] = []
    side = 0.35
    attempts = 0
    while len(placed) < 3 and attempts < 1000:
        attempts += 1
        c = rng.uniform([0.8, 0.8], [w - 0.8, d - 0.8])
        if np.linalg.norm(c - center) < 1.3:
            continue  # keep the canonical start at the room center clear
        if any(np.linalg.norm(c - p) < 1.1 for p in placed):
            continue
        placed.append(c)
        tris += _box((c[0] - side / 2, c[1] - side / 2, 0.0),
                     (c[0] + side / 2, c[1] + side / 2, h))
    return np.asarray(tris)


def _courtyard(rng: np.random.Generator) -> np.ndarray:
    w, h = 7.0, 2.2  # open top: walls + floor only
    tris = []
    tris += _floor(0, w, 0, w, 0.0)
    tris += _wall_y(0.0, 0, w, 0, h)
    tris += _wall_y(w, 0, w, 0, h)
    tris += _wall_x(0.0, 0, w, 0, h)
    tris += _wall_x(w, 0, w, 0, h)
    center = np.array([w / 2, w / 2])
    quadrants = [(1.1, 1.1), (w - 2.5, 1.1), (1.1, w - 2.5), (w - 2.5, w - 2.5)]
    for qx, qy in quadrants:
        sx, sy = rng.uniform(0.7, 1.3, size=2)
        bh = rng.uniform(0.8, 1.6)
        ox, oy = rng.uniform(0.0, 0.3, size=2)
        lo = np.array([qx + ox, qy + oy])
        hi = lo + [sx, sy]
        if np.linalg.norm(np.clip(center, lo, hi) - center) < 1.4:
            continue  # leave the central start area open
        tris += _box((lo[0], lo[1], 0.0), (hi[0], hi[1], bh))
    return np.asarray(tris)


def _two_room_corridor(rng: np.random.Generator) -> np.ndarray:
    # two rooms joined by a transverse corridor strip with staggered doors,
    # so every interior point is reachable (no sealed pockets of fog for the
    # planner to stare at through walls)
    # the canonical start (the bounds center) falls inside room A
    w, d, h = 8.0, 4.0, 2.5
    xa = 4.9 + rng.uniform(-0.15, 0.15)   # room A / corridor divider
    xb = 5.9 + rng.uniform(-0.15, 0.15)   # corridor / room B divider
    door = rng.uniform(1.0, 1.2)
    tris = []
    tris += _floor(0, w, 0, d, 0.0)
    tris += _floor(0, w, 0, d, h)
    tris += _wall_y(0.0, 0, w, 0, h)
    tris += _wall_y(d, 0, w, 0, h)
    tris += _wall_x(0.0, 0, d, 0, h)
    tris += _wall_x(w, 0, d, 0, h)
    tris += _wall_x(xa, 0, d - door, 0, h)   # door at the +y end
    tris += _wall_x(xb, door, d, 0, h)       # door at the -y end
    return np.asarray(tris)


_GENERATORS = {
    "room-with-pillars": _room_with_pillars,
    "courtyard": _courtyard,
    "two-room-corridor": _two_room_corridor,
}


def generate_scene(kind: str, seed: int) -> SceneModel:
    """Deterministic procedural desk-scale scene; the bounds center is kept free."""
    if kind not in _GENERATORS:
        raise ValueError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")
    tris = _GENERATORS[kind](np.random.default_rng(seed))
    return SceneModel.from_triangles(tris)


# ---------------------------------------------------------------------------
# depth sensing
# ---------------------------------------------------------------------------

def render_depth_gt(scene: SceneModel, pose: Pose, cam: CameraModel) -> DepthImage:
    """Ray-cast first-hit depth along each pixel's central ray."""
    dirs_cam = cam.ray_directions()
    dirs_world = dirs_cam @ pose.rotation().T
    t = scene.raycast(pose.position, dirs_world, cam.near, cam.far)
    return DepthImage(t.reshape(cam.height, cam.width))


def backproject(depth: DepthImage, pose: Pose, cam: CameraModel) -> np.ndarray:
    """World-frame 3D point per valid pixel, shape (M, 3)."""
    mask = depth.valid.reshape(-1)
    if not mask.any():
        return np.empty((0, 3))
    dirs_world = cam.ray_directions() @ pose.rotation().T
    t = depth.values.reshape(-1)[mask]
    return pose.position + dirs_world[mask] * t[:, None]


# ---------------------------------------------------------------------------
# ground-truth free space (simulator side: uses the mesh, not the belief field)
# ---------------------------------------------------------------------------

@dataclass
class FreeSpaceGrid:
    """Coarse boolean grid of reachable free space, for spawning and GT views."""

    free: np.ndarray      # (nx, ny, nz) bool
    origin: np.ndarray
    resolution: float

    def cell_centers(self) -> np.ndarray:
        idx = np.argwhere(self.free)
        return self.origin + (idx + 0.5) * self.resolution

    def contains(self, p: np.ndarray) -> bool:
        i = np.floor((np.asarray(p) - self.origin) / self.resolution).astype(int)
        if np.any(i < 0) or np.any(i >= self.free.shape):
            return False
        return bool(self.free[tuple(i)])


def surface_samples(scene: SceneModel, spacing: float) -> np.ndarray:
    """Quasi-uniform points on the mesh surface at roughly the given spacing."""
    out = []
    for tri in scene.triangles:
        e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
        n = max(1, int(math.ceil(max(np.linalg.norm(e1), np.linalg.norm(e2)) / spacing)))
        u, v = np.meshgrid(np.arange(n + 1) / n, np.arange(n + 1) / n)
        keep = u + v <= 1.0 + 1e-12
        u, v = u[keep], v[keep]
        out.append(tri[0] + u[:, None] * e1 + v[:, None] * e2)
    return np.concatenate(out, axis=0)


def free_space_grid(scene: SceneModel, resolution: float | None = None,
                    clearance: float = 0.0, start: np.ndarray | None = None) -> FreeSpaceGrid:
    """Flood-filled free space reachable from ``start`` (default: bounds center)."""
    from scipy import ndimage

    if resolution is None:
        resolution = scene.diagonal() / 64.0
    origin = scene.bounds[0].copy()
    dims = np.maximum(1, np.ceil((scene.bounds[1] - scene.bounds[0]) / resolution - 1e-9)).astype(int)
    occupied = np.zeros(tuple(dims), dtype=bool)
    pts = surface_samples(scene, resolution / 2.0)
    idx = np.floor((pts - origin) / resolution).astype(int)
    idx = np.clip(idx, 0, dims - 1)
    occupied[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    if clearance > 0:
        occupied = ndimage.binary_dilation(occupied, iterations=max(1, int(math.ceil(clearance / resolution))))
    labels, _ = ndimage.label(~occupied)
    if start is None:
        start = scene.center()
    si = np.clip(np.floor((np.asarray(start) - origin) / resolution).astype(int), 0, dims - 1)
    lab = labels[tuple(si)]
    if lab == 0:
        raise ValueError("start position is not in free space")
    return FreeSpaceGrid(labels == lab, origin, float(resolution))
