"""Per-cycle roadmap regulation driven by map change sets.

Each cycle reconditions stale visibility data near the changed volume,
samples new coverage views for non-covered frontiers, prunes views that
stopped contributing gain, expands the traversal network, and reclusters
the graph. All randomness flows through one seeded generator consumed in a
fixed documented order (frontier queue admission, pose draws, edge
admission), so cycles replay bit-identically.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from voxplore import kernels
from voxplore.frontiers import FrontierSet
from voxplore.geometry import Aabb, Pose
from voxplore.grid import UNKNOWN, ChangeSet, VoxelMap
from voxplore.roadmap import (
    EDGE_FREE,
    EDGE_OCC,
    EDGE_UNK,
    Cluster,
    Roadmap,
    _pair,
)
from voxplore.sensing import SensorModel, ViewPose, visible_targets


@dataclass
class RegulationConfig:
    """Tuning knobs of the regulation cycle."""

    p_local: float = 0.8
    p_global: float = 0.1
    n_attempt: int = 30
    n_traversal_samples: int = 3
    n_traversal_attempts: int = 20
    d_sep: float = 2.0
    p_edge_update: float = 0.7
    d_edge_max: float = 10.5
    rho_c: int = 4
    d_c: float = 7.0
    keyframe_dist: float = 2.0
    agent_link_radius: float = 4.0
    prune_gain_threshold: int = 0

    def __post_init__(self):
        if not (0.0 < self.p_local <= 1.0):
            raise ValueError("p_local must be in (0, 1]")
        if not (0.0 < self.p_global <= 1.0):
            raise ValueError("p_global must be in (0, 1]")
        if not (0.0 <= self.p_edge_update < 1.0):
            raise ValueError("p_edge_update must be in [0, 1)")
        if self.d_sep <= 0 or self.d_edge_max <= 0 or self.d_c <= 0:
            raise ValueError("distances must be positive")


class VisibilityIndex:
    """Bidirectional view/frontier visibility mapping.

    ``gamma`` maps a view uid to the frontier voxels it can observe,
    ``upsilon`` is the exact inverse. Entries exist only for live views
    and frontiers.
    """

    def __init__(self):
        self.gamma: dict = {}
        self.upsilon: dict = {}

    def frontiers_of(self, uid: int) -> set:
        return self.gamma.get(uid, set())

    def observers_of(self, f) -> set:
        return self.upsilon.get(f, set())

    def set_view_frontiers(self, uid: int, frontiers: set) -> set:
        """Replace a view's visible set; returns other views that now share
        a frontier with it (their exclusive gain may have dropped)."""
        old = self.gamma.get(uid, set())
        added = frontiers - old
        removed = old - frontiers
        for f in removed:
            obs = self.upsilon.get(f)
            if obs is not None:
                obs.discard(uid)
                if not obs:
                    del self.upsilon[f]
        affected = set()
        for f in added:
            obs = self.upsilon.setdefault(f, set())
            affected |= obs
            obs.add(uid)
        if frontiers:
            self.gamma[uid] = set(frontiers)
        else:
            self.gamma.pop(uid, None)
        affected.discard(uid)
        return affected

    def remove_view(self, uid: int) -> None:
        self.set_view_frontiers(uid, set())

    def remove_frontier(self, f) -> None:
        obs = self.upsilon.pop(f, None)
        if obs:
            for uid in obs:
                self.gamma[uid].discard(f)
                if not self.gamma[uid]:
                    del self.gamma[uid]

    def covered_frontiers(self) -> set:
        return set(self.upsilon.keys())

    def check_consistency(self) -> bool:
        for uid, fs in self.gamma.items():
            for f in fs:
                if uid not in self.upsilon.get(f, ()):
                    return False
        for f, obs in self.upsilon.items():
            if not obs:
                return False
            for uid in obs:
                if f not in self.gamma.get(uid, ()):
                    return False
        return True


def gain_individual(vindex: VisibilityIndex, uid: int) -> int:
    """Number of frontiers the view observes."""
    return len(vindex.frontiers_of(uid))


def gain_joint(vindex: VisibilityIndex, uids) -> int:
    """Number of distinct frontiers observed by the view set."""
    seen: set = set()
    for uid in uids:
        seen |= vindex.frontiers_of(uid)
    return len(seen)


def gain_exclusive(vindex: VisibilityIndex, uid: int) -> int:
    """Number of frontiers only this view observes."""
    count = 0
    for f in vindex.frontiers_of(uid):
        if len(vindex.upsilon[f]) == 1:
            count += 1
    return count


class RegulationCycle:
    """Owns the roadmap, visibility index, and their per-cycle updates."""

    def __init__(
        self,
        graph: Roadmap,
        vindex: VisibilityIndex,
        fset: FrontierSet,
        vmap: VoxelMap,
        sensor: SensorModel,
        cfg: RegulationConfig,
        d_safe: float,
        rng: np.random.Generator,
        check_margin_voxels: float = 0.9,
    ):
        self.graph = graph
        self.vindex = vindex
        self.fset = fset
        self.vmap = vmap
        self.sensor = sensor
        self.cfg = cfg
        self.d_safe = d_safe
        self.rng = rng
        # Map-side clearance checks sample voxel centers, so pad the robot
        # margin by a fraction of the voxel diagonal to keep the true
        # clearance at d_safe.
        self.check_radius = d_safe + check_margin_voxels * vmap.resolution
        self.dirty: set = set()

    # ---- shared helpers -------------------------------------------------

    def _check_radius_vox(self) -> float:
        return self.check_radius / self.vmap.resolution

    def position_clear(self, p) -> bool:
        """All voxel centers within the padded safety radius are free."""
        g = self.vmap.to_grid(p)
        code = kernels.sphere_state(
            self.vmap.states,
            float(g[0]),
            float(g[1]),
            float(g[2]),
            self._check_radius_vox(),
        )
        return code == 0

    def evaluate_segment(self, a, b):
        """Collision state of the swept box between two positions."""
        ga = self.vmap.to_grid(a)
        gb = self.vmap.to_grid(b)
        code, unk = kernels.box_state(
            self.vmap.states,
            float(ga[0]), float(ga[1]), float(ga[2]),
            float(gb[0]), float(gb[1]), float(gb[2]),
            self._check_radius_vox(),
        )
        return code, [tuple(int(v) for v in row) for row in unk]

    def view_of(self, uid: int) -> ViewPose:
        return ViewPose(self.graph.nodes[uid].pose, self.sensor)

    def compute_view_frontiers(self, pose: Pose) -> set:
        """Exact visible-frontier set of a pose over the current map."""
        g = self.vmap.to_grid(pose.position)
        reach = self.sensor.max_range / self.vmap.resolution
        lo = [g[i] - reach for i in range(3)]
        hi = [g[i] + reach for i in range(3)]
        cand = self.fset.candidates_in_box(lo, hi)
        if not cand:
            return set()
        cand = sorted(cand)
        targets = np.array(cand, dtype=np.int32)
        mask = visible_targets(self.vmap, ViewPose(pose, self.sensor), targets)
        return {cand[i] for i in np.nonzero(mask)[0]}

    def _assign_view(self, uid: int, frontiers: set) -> None:
        affected = self.vindex.set_view_frontiers(uid, frontiers)
        self.graph.nodes[uid].gain = len(frontiers)
        self.dirty.add(uid)
        self.dirty |= affected
        self.fset.covered = self.vindex.covered_frontiers()

    def close_view(self, uid: int) -> None:
        """Mark a view visited: it no longer predicts or covers anything."""
        node = self.graph.nodes.get(uid)
        if node is None:
            return
        self.vindex.remove_view(uid)
        node.open = False
        node.gain = 0
        node.has_view = False
        self.fset.covered = self.vindex.covered_frontiers()

    # ---- reconditioning -------------------------------------------------

    def recondition(self, changes: ChangeSet, agent_pose: Pose, trace=None) -> None:
        """Refresh agent state, keyframes, and visibility near the changes.

        Every open view whose predictions the changed volume could have
        touched is recomputed exactly; views farther than sensing range
        from the changed volume cannot be affected and are left alone.
        """
        graph = self.graph
        graph.move_agent(agent_pose)
        graph.refresh_edge_geometry(graph.agent_uid)
        self._relink_agent()
        self._update_keyframes(agent_pose, trace or [])

        for f in list(self.vindex.upsilon.keys()):
            if f not in self.fset:
                self.vindex.remove_frontier(f)

        if not changes.empty:
            hood = changes.bounds.inflate(
                self.sensor.max_range + self.vmap.resolution
            )
            for uid in sorted(graph.nodes):
                node = graph.nodes[uid]
                if not (node.open and node.has_view):
                    continue
                if not hood.contains(node.pose.position):
                    continue
                self._assign_view(uid, self.compute_view_frontiers(node.pose))
        self.fset.covered = self.vindex.covered_frontiers()

    def _relink_agent(self) -> None:
        graph = self.graph
        agent = graph.nodes[graph.agent_uid]
        graph.drop_edges_of(graph.agent_uid)
        cand = graph.nodes_within(agent.pose.position, self.cfg.agent_link_radius)
        cand = [u for u in cand if u != graph.agent_uid]
        cand.sort(
            key=lambda u: (agent.pose.distance_to(graph.nodes[u].pose), u)
        )
        linked = 0
        for u in cand[:16]:
            code, _ = self.evaluate_segment(
                agent.pose.position, graph.nodes[u].pose.position
            )
            if code == 0:
                graph.add_edge(graph.agent_uid, u, EDGE_FREE)
                linked += 1
            if linked >= 6:
                break

    def _update_keyframes(self, agent_pose: Pose, trace) -> None:
        graph = self.graph
        last = graph.nodes[graph.keyframes[-1]]
        if agent_pose.distance_to(last.pose) < self.cfg.keyframe_dist:
            return
        # Chain through the traversed polyline when the direct chord is not
        # provably clear; every sub-segment was physically flown.
        code, _ = self.evaluate_segment(
            last.pose.position, agent_pose.position
        )
        points = [agent_pose] if code == 0 else [
            Pose(np.asarray(p, dtype=np.float64), agent_pose.yaw) for p in trace
        ] + [agent_pose]
        prev = last.uid
        for pose in points:
            if pose.distance_to(self.graph.nodes[prev].pose) < 1e-9:
                continue
            uid = graph.add_node(pose.copy(), role="keyframe", open=False)
            graph.add_edge(prev, uid, EDGE_FREE)
            graph.keyframes.append(uid)
            prev = uid

    # ---- coverage sampling ----------------------------------------------

    def sample_coverage_views(
        self, changes: ChangeSet, global_only: bool = False
    ) -> list:
        """Sample poses that observe non-covered frontiers.

        Frontier targets are admitted with the local probability inside the
        changed volume and the global one elsewhere; each target gets a
        bounded number of pose draws from a shell around it, accepted when
        the padded safety ball is free and the target is actually visible.
        A success covers every frontier the new view sees.
        """
        cfg = self.cfg
        local_box = None
        if changes.bounds is not None:
            local_box = changes.bounds.inflate(self.vmap.resolution)
        queue = []
        for f in sorted(self.fset.frontiers):
            if f in self.fset.covered:
                continue
            if global_only:
                p = cfg.p_global
            elif local_box is not None and local_box.contains(
                self.vmap.voxel_center(f)
            ):
                p = cfg.p_local
            else:
                p = cfg.p_global
            if self.rng.random() < p:
                queue.append(f)

        added = []
        for f in queue:
            if f in self.fset.covered or f not in self.fset:
                continue
            uid = self._sample_for_target(f)
            if uid is not None:
                added.append(uid)
        return added

    def _sample_for_target(self, f):
        cfg = self.cfg
        center = self.vmap.voxel_center(f)
        r_lo = 2.0 * self.vmap.resolution
        r_hi = 0.9 * self.sensor.max_range
        lo3 = r_lo**3
        hi3 = r_hi**3
        targets = np.array([f], dtype=np.int32)
        for _ in range(cfg.n_attempt):
            d = self.rng.standard_normal(3)
            norm = math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
            if norm < 1e-12:
                continue
            radius = (self.rng.random() * (hi3 - lo3) + lo3) ** (1.0 / 3.0)
            p = center + d / norm * radius
            if not self.vmap.contains_point(p):
                continue
            if not self.position_clear(p):
                continue
            yaw = math.atan2(center[1] - p[1], center[0] - p[0])
            pose = Pose(p, yaw)
            seen = visible_targets(
                self.vmap, ViewPose(pose, self.sensor), targets
            )
            if not seen[0]:
                continue
            uid = self.graph.add_node(pose, open=True, has_view=True)
            self._assign_view(uid, self.compute_view_frontiers(pose))
            return uid
        return None

    # ---- pruning ----------------------------------------------------------

    def prune_views(self) -> list:
        """Drop open views that stopped adding individual or exclusive gain.

        Only views whose visibility sets were touched since the last prune
        are candidates. A candidate that would disconnect the graph keeps
        its node but loses its view role; either way the joint gain of the
        surviving views is unchanged.
        """
        thr = self.cfg.prune_gain_threshold
        candidates = sorted(
            (
                uid
                for uid in self.dirty
                if uid in self.graph.nodes
                and self.graph.nodes[uid].open
                and self.graph.nodes[uid].has_view
            ),
            reverse=True,
        )
        removed = []
        for uid in candidates:
            k = gain_individual(self.vindex, uid)
            ex = gain_exclusive(self.vindex, uid)
            if k > thr and ex > thr:
                continue
            if self.graph.is_articulation(uid):
                self.vindex.remove_view(uid)
                node = self.graph.nodes[uid]
                node.has_view = False
                node.gain = 0
            else:
                self.vindex.remove_view(uid)
                self.graph.remove_node(uid)
                removed.append(uid)
        self.dirty.clear()
        self.fset.covered = self.vindex.covered_frontiers()
        return removed

    # ---- reachability expansion -----------------------------------------

    def expand_reachability(self, changes: ChangeSet) -> None:
        """Densify traversal nodes and edges around the changed volume.

        Node samples keep a minimum separation from the existing graph.
        Edge candidates with a null or unknown state are re-evaluated with
        a probability gate; unknown results cache their blocking voxels so
        later cycles can recheck just those, and occupied results are
        blacklisted permanently.
        """
        if changes.bounds is None:
            return
        cfg = self.cfg
        vol = changes.bounds.inflate(cfg.d_sep)
        lo = np.maximum(np.array(vol.min), np.array(self.vmap.bounds.min))
        hi = np.minimum(np.array(vol.max), np.array(self.vmap.bounds.max))
        if np.any(lo >= hi):
            return
        clipped = Aabb.of(lo, hi)

        accepted = 0
        attempts = 0
        while attempts < cfg.n_traversal_attempts and accepted < cfg.n_traversal_samples:
            attempts += 1
            p = np.array(
                [
                    self.rng.uniform(clipped.min[i], clipped.max[i])
                    for i in range(3)
                ]
            )
            if not self.position_clear(p):
                continue
            near = self.graph.nearest_node(p)
            if self.graph.nodes[near].pose.distance_to(Pose(p)) <= cfg.d_sep:
                continue
            self.graph.add_node(Pose(p, 0.0), open=True, has_view=False)
            accepted += 1

        inside = [
            uid
            for uid in sorted(self.graph.nodes)
            if uid != self.graph.agent_uid
            and clipped.contains(self.graph.nodes[uid].pose.position)
        ]
        pairs = set()
        for u in inside:
            pos = self.graph.nodes[u].pose.position
            for w in self.graph.nodes_within(pos, cfg.d_edge_max):
                if w == u or w == self.graph.agent_uid:
                    continue
                key = _pair(u, w)
                if self.graph.edge_status(*key) in (None, EDGE_UNK):
                    pairs.add(key)
        for key in sorted(pairs):
            if self.rng.random() >= cfg.p_edge_update:
                continue
            self._evaluate_edge(key)

    def _evaluate_edge(self, key: tuple) -> None:
        u, w = key
        pending = self.graph.pending.get(key)
        if pending is not None:
            if all(
                self.vmap.states[c] == UNKNOWN for c in pending.obs_cache
            ):
                return
        code, unk = self.evaluate_segment(
            self.graph.nodes[u].pose.position,
            self.graph.nodes[w].pose.position,
        )
        if code == 0:
            self.graph.add_edge(u, w, EDGE_FREE)
        elif code == 1:
            self.graph.add_edge(u, w, EDGE_UNK, obs_cache=sorted(unk))
        else:
            self.graph.add_edge(u, w, EDGE_OCC)

    # ---- clustering ---------------------------------------------------------

    def recluster(self) -> dict:
        """Density clustering over edge-connected near neighbors.

        A node is core when enough free-edge neighbors lie within the
        clustering distance; clusters grow from cores through such
        neighbors, and everything else becomes a singleton cluster.
        """
        graph = self.graph
        cfg = self.cfg
        near = {}
        for uid in graph.nodes:
            pos = graph.nodes[uid].pose
            near[uid] = sorted(
                w
                for w in graph.adjacency[uid]
                if graph.edges[_pair(uid, w)].d_pos <= cfg.d_c
            )
        core = {uid for uid, nb in near.items() if len(nb) >= cfg.rho_c}

        labels: dict = {}
        next_cid = 0
        for seed in sorted(graph.nodes):
            if seed in labels or seed not in core:
                continue
            labels[seed] = next_cid
            queue = deque([seed])
            while queue:
                p = queue.popleft()
                if p not in core:
                    continue
                for q in near[p]:
                    if q not in labels:
                        labels[q] = next_cid
                        queue.append(q)
            next_cid += 1
        for uid in sorted(graph.nodes):
            if uid not in labels:
                labels[uid] = next_cid
                next_cid += 1

        members: dict = {}
        for uid, cid in labels.items():
            members.setdefault(cid, set()).add(uid)
        clusters = {}
        for cid, uids in members.items():
            pts = np.array(
                [graph.nodes[u].pose.position for u in sorted(uids)]
            )
            centroid = pts.mean(axis=0)
            clusters[cid] = Cluster(
                cid=cid,
                members=set(uids),
                centroid=centroid,
                bounds=Aabb.of(pts.min(axis=0), pts.max(axis=0)),
            )
        for uid, cid in labels.items():
            graph.nodes[uid].cluster = cid
        graph.clusters = clusters
        return clusters
