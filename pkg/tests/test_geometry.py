import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splatplan.geometry import (CameraModel, DepthImage, MeshLoadError, Pose,
                                SceneModel, backproject, generate_scene,
                                load_scene, pose_from_yaw_pitch,
                                render_depth_gt, save_scene)

from helpers import brute_force_depths, point_to_mesh_distance

CUBE_OBJ = """\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""


def _wall_scene(z: float = 2.0) -> SceneModel:
    tris = np.array([
        [[-10, -10, z], [10, -10, z], [10, 10, z]],
        [[-10, -10, z], [10, 10, z], [-10, 10, z]],
    ], dtype=float)
    return SceneModel.from_triangles(tris)


class TestPose:
    def test_quaternion_must_be_unit(self):
        with pytest.raises(ValueError):
            Pose(np.zeros(3), np.array([1.0, 0.5, 0.0, 0.0]))

    @given(st.floats(-math.pi, math.pi), st.floats(-1.0, 1.0),
           st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
    @settings(max_examples=50, deadline=None)
    def test_compose_with_inverse_is_identity(self, yaw, pitch, x, y, z):
        p = pose_from_yaw_pitch([x, y, z], yaw, pitch)
        ident = p.compose(p.inverse())
        assert np.allclose(ident.position, 0.0, atol=1e-6)
        # identity rotation up to quaternion sign
        assert min(np.abs(ident.quat - [1, 0, 0, 0]).max(),
                   np.abs(ident.quat + [1, 0, 0, 0]).max()) < 1e-6

    def test_yaw_pitch_orientation(self):
        p = pose_from_yaw_pitch([0, 0, 0], 0.0, 0.0)
        assert np.allclose(p.forward(), [1, 0, 0], atol=1e-12)
        up = pose_from_yaw_pitch([0, 0, 0], 0.0, math.radians(30))
        assert up.forward()[2] == pytest.approx(math.sin(math.radians(30)))
        yawed = pose_from_yaw_pitch([0, 0, 0], math.pi / 2, 0.0)
        assert np.allclose(yawed.forward(), [0, 1, 0], atol=1e-12)

    def test_round_trip_world_camera(self):
        p = pose_from_yaw_pitch([1.0, -2.0, 0.5], 0.7, -0.3)
        pts = np.random.default_rng(0).normal(size=(10, 3))
        assert np.allclose(p.to_world(p.to_camera(pts)), pts, atol=1e-12)


class TestCameraModel:
    def test_focal_from_fov(self):
        cam = CameraModel(64, 36, 90.0, 60.0, 0.1, 10.0)
        assert cam.focal == pytest.approx(32.0 / math.tan(math.radians(45.0)))
        assert math.isfinite(cam.focal) and cam.focal > 0

    @pytest.mark.parametrize("kw", [
        dict(width=0), dict(fov_h=0.0), dict(fov_h=180.0), dict(near=0.0),
        dict(near=5.0, far=1.0),
    ])
    def test_invalid_parameters_rejected(self, kw):
        base = dict(width=64, height=36, fov_h=90.0, fov_v=60.0, near=0.1, far=10.0)
        base.update(kw)
        with pytest.raises(ValueError):
            CameraModel(**base)

    def test_ray_directions_unit_norm(self):
        cam = CameraModel(16, 9, 90.0, 60.0, 0.1, 10.0)
        dirs = cam.ray_directions()
        assert dirs.shape == (16 * 9, 3)
        assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)


class TestLoadScene:
    def test_unit_cube(self, tmp_path):
        path = tmp_path / "cube.obj"
        path.write_text(CUBE_OBJ)
        scene = load_scene(path)
        assert scene.n_triangles == 12
        assert np.allclose(scene.bounds, [[0, 0, 0], [1, 1, 1]])

    def test_zero_area_face_names_the_face(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n")
        with pytest.raises(MeshLoadError, match="face 0"):
            load_scene(path)

    def test_parse_error_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nv 1 0 x\n")
        with pytest.raises(MeshLoadError, match=":2"):
            load_scene(path)

    def test_no_faces_is_an_error(self, tmp_path):
        path = tmp_path / "empty.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\n")
        with pytest.raises(MeshLoadError):
            load_scene(path)

    def test_procedural_scene_round_trips(self, tmp_path):
        scene = generate_scene("room-with-pillars", 3)
        path = tmp_path / "room.obj"
        save_scene(scene, path)
        again = load_scene(path)
        assert again.n_triangles == scene.n_triangles
        assert np.allclose(again.triangles, scene.triangles)


class TestGenerateScene:
    def test_deterministic_for_seed(self):
        a = generate_scene("room-with-pillars", 0)
        b = generate_scene("room-with-pillars", 0)
        assert np.array_equal(a.triangles, b.triangles)

    def test_courtyard_faces_within_bounds(self):
        scene = generate_scene("courtyard", 0)
        pts = scene.triangles.reshape(-1, 3)
        assert np.all(pts >= scene.bounds[0] - 1e-12)
        assert np.all(pts <= scene.bounds[1] + 1e-12)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            generate_scene("nonexistent", 0)

    def test_two_room_corridor_topology(self):
        """Flood-fill oracle: two room volumes joined by exactly the corridor."""
        from scipy import ndimage

        scene = generate_scene("two-room-corridor", 1)
        res = 0.2
        dims = np.ceil((scene.bounds[1] - scene.bounds[0]) / res).astype(int)
        idx = np.stack(np.meshgrid(*[np.arange(n) for n in dims], indexing="ij"), axis=-1)
        centers = scene.bounds[0] + (idx.reshape(-1, 3) + 0.5) * res
        d = point_to_mesh_distance(centers, scene.triangles).reshape(tuple(dims))
        free = d > res * 0.6

        def cell(p):
            return tuple(np.floor((np.array(p) - scene.bounds[0]) / res).astype(int))

        room_a = cell([1.5, 2.0, 1.25])
        room_b = cell([6.5, 2.0, 1.25])
        labels, _ = ndimage.label(free)
        assert labels[room_a] != 0 and labels[room_a] == labels[room_b]

        # removing the corridor slab separates the rooms into exactly 2 volumes
        xs = scene.bounds[0][0] + (np.arange(dims[0]) + 0.5) * res
        blocked = free.copy()
        blocked[(xs > 3.0) & (xs < 5.0), :, :] = False
        labels2, n2 = ndimage.label(blocked)
        assert labels2[room_a] != labels2[room_b]
        sizes = np.bincount(labels2.reshape(-1))[1:]
        assert int(np.sum(sizes > 50)) == 2


class TestRenderDepth:
    def test_perpendicular_wall_center_pixel(self):
        scene = _wall_scene(z=2.0)
        cam = CameraModel(65, 37, 90.0, 60.0, 0.1, 10.0)  # odd: exact center ray
        pose = Pose(np.zeros(3), np.array([1.0, 0, 0, 0]))  # +z forward
        depth = render_depth_gt(scene, pose, cam)
        assert depth.values[18, 32] == pytest.approx(2.0, abs=1e-4)

    def test_open_sky_yields_sentinel(self):
        scene = generate_scene("courtyard", 0)
        cam = CameraModel(32, 24, 90.0, 70.0, 0.1, scene.diagonal())
        pose = pose_from_yaw_pitch(scene.center() + [0, 0, 0.5], 0.0, math.radians(60))
        depth = render_depth_gt(scene, pose, cam)
        assert np.any(~depth.valid)

    def test_matches_brute_force_exactly(self, pillars_scene, planning_cam):
        pose = pose_from_yaw_pitch(pillars_scene.center(), 0.4, 0.1)
        depth = render_depth_gt(pillars_scene, pose, planning_cam)
        dirs = planning_cam.ray_directions() @ pose.rotation().T
        expected = brute_force_depths(pillars_scene.triangles, pose.position,
                                      dirs, planning_cam.near, planning_cam.far)
        assert np.array_equal(depth.values.reshape(-1), expected)

    def test_independent_of_triangle_order(self, pillars_scene, planning_cam):
        pose = pose_from_yaw_pitch(pillars_scene.center(), 1.1, -0.2)
        base = render_depth_gt(pillars_scene, pose, planning_cam)
        perm = np.random.default_rng(7).permutation(pillars_scene.n_triangles)
        shuffled = SceneModel.from_triangles(pillars_scene.triangles[perm])
        again = render_depth_gt(shuffled, pose, planning_cam)
        assert np.array_equal(base.values, again.values)

    def test_deterministic(self, pillars_scene, planning_cam):
        pose = pose_from_yaw_pitch(pillars_scene.center(), -0.9, 0.0)
        a = render_depth_gt(pillars_scene, pose, planning_cam)
        b = render_depth_gt(pillars_scene, pose, planning_cam)
        assert np.array_equal(a.values, b.values)


class TestBackproject:
    def test_center_pixel_lands_on_optical_axis(self):
        cam = CameraModel(65, 37, 90.0, 60.0, 0.1, 10.0)
        vals = np.zeros((37, 65))
        vals[18, 32] = 3.0
        pose = Pose(np.zeros(3), np.array([1.0, 0, 0, 0]))
        pts = backproject(DepthImage(vals), pose, cam)
        assert pts.shape == (1, 3)
        assert np.allclose(pts[0], [0, 0, 3.0], atol=1e-12)

    def test_points_lie_on_surface(self, pillars_scene, planning_cam):
        pose = pose_from_yaw_pitch(pillars_scene.center(), 2.2, 0.15)
        depth = render_depth_gt(pillars_scene, pose, planning_cam)
        pts = backproject(depth, pose, planning_cam)
        d = point_to_mesh_distance(pts, pillars_scene.triangles)
        assert d.max() < 1e-3

    def test_all_sentinel_gives_empty(self):
        cam = CameraModel(8, 6, 90.0, 60.0, 0.1, 10.0)
        pose = Pose(np.zeros(3), np.array([1.0, 0, 0, 0]))
        pts = backproject(DepthImage(np.zeros((6, 8))), pose, cam)
        assert pts.shape == (0, 3)


class TestSceneModel:
    def test_rejects_degenerate_triangles(self):
        tris = np.array([[[0, 0, 0], [1, 0, 0], [2, 0, 0]]], dtype=float)
        with pytest.raises(ValueError, match="face 0"):
            SceneModel.from_triangles(tris)

    def test_vertices_inside_bounds(self, pillars_scene):
        pts = pillars_scene.triangles.reshape(-1, 3)
        assert np.all(pts >= pillars_scene.bounds[0] - 1e-12)
        assert np.all(pts <= pillars_scene.bounds[1] + 1e-12)
