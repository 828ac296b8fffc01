"""Ground-truth world model, voxel occupancy map, and the change journal."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from voxplore import kernels
from voxplore.geometry import Aabb, BoundsAccumulator, Pose

UNKNOWN = kernels.UNKNOWN
FREE = kernels.FREE
OCCUPIED = kernels.OCCUPIED

STATE_NAMES = {UNKNOWN: "unknown", FREE: "free", OCCUPIED: "occupied"}


class GridError(ValueError):
    pass


@dataclass
class GroundTruthWorld:
    """Bounded world of axis-aligned box obstacles plus a start pose."""

    bounds: Aabb
    obstacles: list
    start: Pose

    def __post_init__(self):
        for ob in self.obstacles:
            if not self.bounds.contains_box(ob):
                raise GridError(f"obstacle {ob} extends outside world bounds")
        if not self.bounds.contains(self.start.position):
            raise GridError("start pose lies outside world bounds")
        if self.point_in_obstacle(self.start.position):
            raise GridError("start pose lies inside an obstacle")

    def point_in_obstacle(self, p) -> bool:
        return any(ob.contains(p) for ob in self.obstacles)

    def min_obstacle_distance(self, p) -> float:
        if not self.obstacles:
            return math.inf
        return min(ob.distance_to_point(p) for ob in self.obstacles)

    def check_start_clearance(self, d_safe: float) -> None:
        if self.min_obstacle_distance(self.start.position) < d_safe:
            raise GridError(
                f"start pose closer than {d_safe} m to an obstacle"
            )

    def obstacle_array(self) -> np.ndarray:
        """Obstacles as an (n, 6) array of min/max corners for the kernels."""
        if not self.obstacles:
            return np.empty((0, 6), dtype=np.float64)
        return np.array(
            [list(ob.min) + list(ob.max) for ob in self.obstacles],
            dtype=np.float64,
        )

    def to_json(self) -> dict:
        return {
            "bounds": self.bounds.to_json(),
            "obstacles": [ob.to_json() for ob in self.obstacles],
            "start": {
                "position": list(self.start.position),
                "yaw": self.start.yaw,
            },
        }

    @staticmethod
    def from_json(obj: dict) -> "GroundTruthWorld":
        try:
            bounds = Aabb.from_json(obj["bounds"])
            obstacles = [Aabb.from_json(o) for o in obj.get("obstacles", [])]
            start = Pose(
                np.array(obj["start"]["position"], dtype=np.float64),
                float(obj["start"].get("yaw", 0.0)),
            )
        except (KeyError, TypeError) as exc:
            raise GridError(f"malformed world document: {exc}") from exc
        return GroundTruthWorld(bounds, obstacles, start)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True))

    @staticmethod
    def load(path) -> "GroundTruthWorld":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise GridError(f"cannot read world file {path}: {exc}") from exc
        return GroundTruthWorld.from_json(obj)


@dataclass
class ChangeSet:
    """State-changed voxels of one or more map updates plus their hull.

    Each entry maps a voxel index to ``(old_state, new_state)``; merging
    keeps the earliest old state and the latest new state. The bounds box
    encloses the centers of all changed voxels (None while empty).
    """

    changed: dict = field(default_factory=dict)
    bounds: Aabb | None = None

    def __len__(self) -> int:
        return len(self.changed)

    @property
    def empty(self) -> bool:
        return not self.changed

    def merged(self, incoming: "ChangeSet") -> "ChangeSet":
        out = ChangeSet(dict(self.changed), self.bounds)
        for idx, (old, new) in incoming.changed.items():
            if idx in out.changed:
                first_old = out.changed[idx][0]
                out.changed[idx] = (first_old, new)
            else:
                out.changed[idx] = (old, new)
        if out.bounds is None:
            out.bounds = incoming.bounds
        elif incoming.bounds is not None:
            out.bounds = out.bounds.hull(incoming.bounds)
        return out


def accumulate(changes: ChangeSet, incoming: ChangeSet) -> ChangeSet:
    """Union of two change sets from the same map epoch."""
    return changes.merged(incoming)


class VoxelMap:
    """Dense tri-state occupancy grid over the world bounds.

    Starts all-unknown. Scan integration is the only writer; it returns the
    exact set of state-changed voxels and appends it to the journal.
    """

    def __init__(self, bounds: Aabb, resolution: float):
        if resolution <= 0:
            raise GridError("resolution must be positive")
        self.bounds = bounds
        self.resolution = float(resolution)
        size = bounds.size()
        self.dims = tuple(
            max(1, int(math.ceil(size[i] / self.resolution - 1e-9)))
            for i in range(3)
        )
        self.origin = np.array(bounds.min, dtype=np.float64)
        self.states = np.zeros(self.dims, dtype=np.uint8)
        self.counts = {
            UNKNOWN: int(np.prod(self.dims)),
            FREE: 0,
            OCCUPIED: 0,
        }
        self.journal: list[ChangeSet] = []

    # ---- coordinate conversions -------------------------------------

    def to_grid(self, p) -> np.ndarray:
        return (np.asarray(p, dtype=np.float64) - self.origin) / self.resolution

    def voxel_center(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=np.float64) + 0.5) * self.resolution

    def voxel_of(self, p) -> tuple:
        g = self.to_grid(p)
        return tuple(int(math.floor(g[i])) for i in range(3))

    def in_bounds_index(self, idx) -> bool:
        return all(0 <= idx[i] < self.dims[i] for i in range(3))

    def contains_point(self, p) -> bool:
        return self.bounds.contains(p)

    # ---- queries ------------------------------------------------------

    def state(self, idx) -> int:
        if not self.in_bounds_index(idx):
            raise IndexError(f"voxel index {tuple(idx)} outside dims {self.dims}")
        return int(self.states[idx[0], idx[1], idx[2]])

    def count(self, state: int) -> int:
        return self.counts[state]

    def rescan_counts(self) -> dict:
        vals, counts = np.unique(self.states, return_counts=True)
        out = {UNKNOWN: 0, FREE: 0, OCCUPIED: 0}
        for v, c in zip(vals, counts):
            out[int(v)] = int(c)
        return out

    # ---- integration ----------------------------------------------------

    def integrate_scan(self, scan) -> ChangeSet:
        """Fold a depth scan into the map and journal the state changes.

        Cells strictly between a ray's origin cell and its surface cell
        become free; the surface cell becomes occupied. Occupied wins when
        one cell receives both within a single scan. Misses free every
        traversed cell past the origin cell.
        """
        opos = scan.origin.position
        if not self.contains_point(opos):
            raise GridError(
                f"scan origin {opos.tolist()} outside map bounds "
                f"{self.bounds.min}..{self.bounds.max}"
            )
        og = self.to_grid(opos)
        t_end = scan.dists / self.resolution
        hits = scan.hits.astype(np.uint8)
        t_end = np.where(hits.astype(bool), t_end + kernels.HIT_EPS, t_end)
        cells, old, new = kernels.integrate_rays(
            self.states,
            float(og[0]),
            float(og[1]),
            float(og[2]),
            np.ascontiguousarray(scan.dirs, dtype=np.float64),
            np.ascontiguousarray(t_end, dtype=np.float64),
            np.ascontiguousarray(hits),
        )
        order = np.lexsort((cells[:, 2], cells[:, 1], cells[:, 0]))
        cs = ChangeSet()
        acc = BoundsAccumulator()
        for q in order:
            idx = (int(cells[q, 0]), int(cells[q, 1]), int(cells[q, 2]))
            o, n = int(old[q]), int(new[q])
            cs.changed[idx] = (o, n)
            acc.add(self.voxel_center(idx))
            self.counts[o] -= 1
            self.counts[n] += 1
        if not acc.empty:
            cs.bounds = acc.as_box()
        self.journal.append(cs)
        return cs

    def apply_changes(self, cs: ChangeSet) -> None:
        """Replay a journaled change set onto this map (snapshot restore)."""
        for idx, (_, new) in cs.changed.items():
            old = int(self.states[idx])
            self.states[idx] = new
            self.counts[old] -= 1
            self.counts[new] += 1

    def copy(self) -> "VoxelMap":
        out = VoxelMap.__new__(VoxelMap)
        out.bounds = self.bounds
        out.resolution = self.resolution
        out.dims = self.dims
        out.origin = self.origin.copy()
        out.states = self.states.copy()
        out.counts = dict(self.counts)
        out.journal = []
        return out

    # ---- snapshot -----------------------------------------------------

    def to_snapshot(self) -> dict:
        flat = self.states.reshape(-1)
        runs = []
        if flat.size:
            edges = np.flatnonzero(np.diff(flat)) + 1
            starts = np.concatenate(([0], edges))
            ends = np.concatenate((edges, [flat.size]))
            for s, e in zip(starts, ends):
                runs.append([int(e - s), int(flat[s])])
        return {
            "dims": list(self.dims),
            "resolution": self.resolution,
            "origin": [float(v) for v in self.origin],
            "bounds": self.bounds.to_json(),
            "rle": runs,
        }

    def save_snapshot(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_snapshot(), sort_keys=True))

    @staticmethod
    def from_snapshot(obj: dict) -> "VoxelMap":
        m = VoxelMap(Aabb.from_json(obj["bounds"]), float(obj["resolution"]))
        if list(m.dims) != list(obj["dims"]):
            raise GridError("snapshot dims do not match bounds/resolution")
        flat = np.empty(int(np.prod(m.dims)), dtype=np.uint8)
        at = 0
        for count, state in obj["rle"]:
            flat[at : at + count] = state
            at += count
        if at != flat.size:
            raise GridError("snapshot run-length data does not fill the grid")
        m.states = flat.reshape(m.dims)
        m.counts = m.rescan_counts()
        return m

    @staticmethod
    def load_snapshot(path) -> "VoxelMap":
        return VoxelMap.from_snapshot(json.loads(Path(path).read_text()))


def full_observation_map(world: GroundTruthWorld, resolution: float) -> VoxelMap:
    """Map with every voxel classified from ground truth (no unknowns).

    A voxel is occupied when its volume overlaps an obstacle, else free.
    """
    m = VoxelMap(world.bounds, resolution)
    m.states[:] = FREE
    r = m.resolution
    for ob in world.obstacles:
        lo = m.to_grid(ob.min)
        hi = m.to_grid(ob.max)
        lo_i = [max(0, int(math.floor(lo[i] + 1e-9))) for i in range(3)]
        hi_i = [
            min(m.dims[i] - 1, int(math.ceil(hi[i] - 1e-9)) - 1) for i in range(3)
        ]
        if any(lo_i[i] > hi_i[i] for i in range(3)):
            continue
        m.states[
            lo_i[0] : hi_i[0] + 1, lo_i[1] : hi_i[1] + 1, lo_i[2] : hi_i[2] + 1
        ] = OCCUPIED
    m.counts = m.rescan_counts()
    return m
