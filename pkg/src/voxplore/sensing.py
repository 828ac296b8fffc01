"""Depth sensor projection model, scan simulation, and visibility queries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from voxplore import kernels
from voxplore.geometry import Pose
from voxplore.grid import GroundTruthWorld, GridError, VoxelMap


class SensorError(ValueError):
    pass


@dataclass(frozen=True)
class SensorModel:
    """Pinhole-style depth sensor: angular apertures, ray grid, max range.

    ``pitch`` is the fixed boresight elevation; the planner controls yaw
    only.
    """

    h_fov: float
    v_fov: float
    rays_x: int = 49
    rays_y: int = 33
    max_range: float = 5.0
    pitch: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.h_fov <= 2.0 * math.pi):
            raise SensorError(f"horizontal FoV {self.h_fov} outside (0, 2*pi]")
        if not (0.0 < self.v_fov <= 2.0 * math.pi):
            raise SensorError(f"vertical FoV {self.v_fov} outside (0, 2*pi]")
        if self.rays_x < 2 or self.rays_y < 2:
            raise SensorError("ray counts must be at least 2 per axis")
        if self.max_range <= 0.0:
            raise SensorError("max range must be positive")

    def ray_directions(self, yaw: float) -> np.ndarray:
        """Unit directions of the scan ray grid for a given yaw, (n, 3)."""
        h = np.linspace(-self.h_fov / 2.0, self.h_fov / 2.0, self.rays_x)
        v = np.linspace(-self.v_fov / 2.0, self.v_fov / 2.0, self.rays_y)
        hh, vv = np.meshgrid(h, v, indexing="ij")
        heading = yaw + hh.reshape(-1)
        elev = self.pitch + vv.reshape(-1)
        ce = np.cos(elev)
        dirs = np.stack(
            (ce * np.cos(heading), ce * np.sin(heading), np.sin(elev)), axis=1
        )
        return np.ascontiguousarray(dirs)


@dataclass(frozen=True)
class ViewPose:
    """A candidate sensor placement: pose plus projection model."""

    pose: Pose
    sensor: SensorModel


@dataclass
class DepthScan:
    """One simulated sensor frame: per-ray direction and hit distance."""

    origin: Pose
    dirs: np.ndarray
    dists: np.ndarray
    hits: np.ndarray
    max_range: float


def simulate_scan(world: GroundTruthWorld, view: ViewPose) -> DepthScan:
    """Ray-cast the ground-truth boxes over the view's full ray grid.

    Each ray reports the distance to the first obstacle face, or a miss
    when nothing lies within range.
    """
    p = view.pose.position
    if world.point_in_obstacle(p):
        raise SensorError(f"scan origin {p.tolist()} inside an obstacle")
    dirs = view.sensor.ray_directions(view.pose.yaw)
    boxes = world.obstacle_array()
    dists, hits = kernels.ray_box_hits(
        float(p[0]), float(p[1]), float(p[2]), dirs, boxes, view.sensor.max_range
    )
    return DepthScan(
        origin=view.pose.copy(),
        dirs=dirs,
        dists=dists,
        hits=hits,
        max_range=view.sensor.max_range,
    )


def in_view_volume(vmap: VoxelMap, view: ViewPose, target) -> bool:
    """Range plus angular aperture test for a voxel center, no occlusion."""
    c = vmap.voxel_center(target)
    d = c - view.pose.position
    dist = float(np.linalg.norm(d))
    if dist > view.sensor.max_range:
        return False
    if dist <= 1e-12:
        return True
    dh = _wrap(math.atan2(d[1], d[0]) - view.pose.yaw)
    if abs(dh) > view.sensor.h_fov / 2.0:
        return False
    dv = math.atan2(d[2], math.hypot(d[0], d[1])) - view.sensor.pitch
    return abs(dv) <= view.sensor.v_fov / 2.0


def _wrap(a: float) -> float:
    return a - 2.0 * math.pi * math.floor((a + math.pi) / (2.0 * math.pi))


def is_visible(vmap: VoxelMap, view: ViewPose, target) -> bool:
    """Whether a voxel center is observable from a view pose.

    True when the center lies inside the view volume and no occupied voxel
    sits strictly between the origin and the target. Unknown voxels do not
    block; occlusion is tested at voxel-center resolution.
    """
    if not vmap.in_bounds_index(target):
        raise IndexError(f"target {tuple(target)} outside map dims {vmap.dims}")
    targets = np.array([target], dtype=np.int32)
    return bool(visible_targets(vmap, view, targets)[0])


def visible_targets(vmap: VoxelMap, view: ViewPose, targets: np.ndarray) -> np.ndarray:
    """Vector form of :func:`is_visible` over an (n, 3) index array."""
    og = vmap.to_grid(view.pose.position)
    if targets.size == 0:
        return np.zeros(0, dtype=np.uint8)
    return kernels.visible_filter(
        vmap.states,
        float(og[0]),
        float(og[1]),
        float(og[2]),
        view.pose.yaw,
        view.sensor.pitch,
        view.sensor.h_fov / 2.0,
        view.sensor.v_fov / 2.0,
        view.sensor.max_range / vmap.resolution,
        np.ascontiguousarray(targets, dtype=np.int32),
    )
