"""Render the proxy Gaussians and score viewpoints by coverage gain.

The Gaussians sit on random proxy points; opacity mirrors the occupancy
field and the rendered "color" is a binary novelty flag. Observing from a
pose consumes novelty at matching depths, so re-rendering the same view
afterwards scores far lower: this differential is what drives exploration.
"""

from splatplan.gaussians import build_gaussians, mark_observed
from splatplan.geometry import (CameraModel, DepthImage, generate_scene,
                                pose_from_yaw_pitch, render_depth_gt)
from splatplan.occupancy import (OccupancyField, SurfaceCloud,
                                 integrate_observation, sample_proxy_points)
from splatplan.splat import RenderConfig, gain_for_pose, save_pgm

scene = generate_scene("room-with-pillars", seed=0)
cam = CameraModel(64, 36, 90.0, 60.0, 0.1, scene.diagonal())
field = OccupancyField(scene.bounds, scene.diagonal() / 128, prior=0.3)
cloud = SurfaceCloud(merge_radius=field.resolution)

# one bootstrap observation so part of the room is already known
start = pose_from_yaw_pitch(scene.center(), 0.0, 0.0)
integrate_observation(field, cloud, render_depth_gt(scene, start, cam), start, cam)

pts = sample_proxy_points(field, n_total=2000, interior_fraction=0.9, seed=3)
gset, overlay = build_gaussians(field, pts)
print(f"{len(gset)} Gaussians, radii {gset.radii.min():.3f}..{gset.radii.max():.3f} m, "
      f"mean opacity {gset.opacities.mean():.2f}")

rcfg = RenderConfig.for_scene(cam, scene.diagonal())
print(f"threshold depth d_th = {rcfg.d_th:.2f} m")

pose = pose_from_yaw_pitch(scene.center(), 1.2, 0.0)
gain, render = gain_for_pose(gset, overlay, pose, rcfg)
print(f"gain before observing: {gain:.1f} (of {cam.width * cam.height} px)")

save_pgm(render.novelty, "demo_novelty.pgm", vmax=1.0)
save_pgm(render.depth, "demo_splat_depth.pgm", vmax=scene.diagonal())

# consume what this view would see, then re-score the same pose
_, flipped = mark_observed(gset, overlay, pose, cam,
                           DepthImage(render.depth), eps_d=2 * field.resolution)
gain_after, _ = gain_for_pose(gset, overlay, pose, rcfg)
print(f"marked {flipped} Gaussians observed; gain after: {gain_after:.1f}")
print("wrote demo_novelty.pgm and demo_splat_depth.pgm")
