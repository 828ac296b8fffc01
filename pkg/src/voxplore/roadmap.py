"""Perception roadmap: view nodes, traversal edges, cluster hyperedges.

Nodes carry a pose, an expected-gain count, and a visitation flag; edges
cache traversal geometry and the collision state of their swept volume.
Clusters partition the nodes into subgraph regions for coarse planning.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from voxplore.geometry import Aabb, Pose, yaw_distance

AGENT = "agent"
HOME = "home"
KEYFRAME = "keyframe"
NBV = "nbv"
TRAVERSAL = "traversal"

EDGE_FREE = "free"
EDGE_UNK = "unk"
EDGE_OCC = "occ"


class RoadmapError(ValueError):
    pass


def edge_cost(d_pos: float, d_yaw: float, v_max: float, yawrate_max: float) -> float:
    """Traversal time bound: slower of the translation and rotation legs."""
    if v_max <= 0.0 or yawrate_max <= 0.0:
        raise RoadmapError("velocity and yaw-rate limits must be positive")
    return max(d_pos / v_max, d_yaw / yawrate_max)


@dataclass
class RoadmapNode:
    uid: int
    pose: Pose
    gain: int = 0
    open: bool = True
    role: str | None = None
    has_view: bool = False
    cluster: int | None = None

    @property
    def kind(self) -> str:
        if self.role is not None:
            return self.role
        return NBV if (self.open and self.gain > 0) else TRAVERSAL


@dataclass
class EdgeRecord:
    u: int
    w: int
    d_pos: float
    d_yaw: float
    cost: float
    state: str = EDGE_FREE
    obs_cache: list = field(default_factory=list)


@dataclass
class Cluster:
    cid: int
    members: set
    centroid: np.ndarray
    bounds: Aabb


def _pair(u: int, w: int) -> tuple:
    return (u, w) if u < w else (w, u)


class Roadmap:
    """Undirected roadmap with cached edge states and a blacklist.

    Free edges are traversable; pending edges were last seen blocked only
    by unknown space and keep the unknown-voxel cache for cheap rechecks;
    blacklisted pairs hit occupied space and are never re-evaluated.
    """

    def __init__(self, v_max: float, yawrate_max: float):
        if v_max <= 0.0 or yawrate_max <= 0.0:
            raise RoadmapError("velocity and yaw-rate limits must be positive")
        self.v_max = v_max
        self.yawrate_max = yawrate_max
        self.nodes: dict = {}
        self.edges: dict = {}
        self.pending: dict = {}
        self.blocked: set = set()
        self.adjacency: dict = {}
        self.pending_adjacency: dict = {}
        self.clusters: dict = {}
        self.keyframes: list = []
        self.agent_uid: int | None = None
        self.home_uid: int | None = None
        self._next_uid = 0
        self._pos_cache = None

    # ---- nodes -------------------------------------------------------

    def init_anchor_nodes(self, start: Pose) -> None:
        """Create the fixed home node and the dynamic agent node."""
        if self.home_uid is not None:
            raise RoadmapError("anchor nodes already initialized")
        self.home_uid = self.add_node(start.copy(), role=HOME, open=False)
        self.agent_uid = self.add_node(start.copy(), role=AGENT, open=False)
        self.keyframes = [self.home_uid]

    def add_node(
        self,
        pose: Pose,
        role: str | None = None,
        open: bool = True,
        has_view: bool = False,
    ) -> int:
        uid = self._next_uid
        self._next_uid += 1
        self.nodes[uid] = RoadmapNode(
            uid=uid, pose=pose, open=open, role=role, has_view=has_view
        )
        self.adjacency[uid] = set()
        self.pending_adjacency[uid] = set()
        self._pos_cache = None
        return uid

    def remove_node(self, uid: int) -> None:
        node = self.nodes.get(uid)
        if node is None:
            raise RoadmapError(f"no node {uid}")
        if node.role in (AGENT, HOME):
            raise RoadmapError(f"cannot remove the {node.role} node")
        for nb in list(self.adjacency[uid]):
            self._drop_free_edge(_pair(uid, nb))
        for nb in list(self.pending_adjacency[uid]):
            self.pending.pop(_pair(uid, nb), None)
            self.pending_adjacency[nb].discard(uid)
        self.blocked = {p for p in self.blocked if uid not in p}
        if node.cluster is not None and node.cluster in self.clusters:
            self.clusters[node.cluster].members.discard(uid)
        del self.nodes[uid]
        del self.adjacency[uid]
        del self.pending_adjacency[uid]
        self._pos_cache = None

    def move_agent(self, pose: Pose) -> None:
        self.nodes[self.agent_uid].pose = pose.copy()
        self._pos_cache = None

    # ---- edges -------------------------------------------------------

    def _geometry(self, u: int, w: int) -> tuple:
        pu = self.nodes[u].pose
        pw = self.nodes[w].pose
        d_pos = pu.distance_to(pw)
        d_yaw = yaw_distance(pu.yaw, pw.yaw)
        return d_pos, d_yaw, edge_cost(d_pos, d_yaw, self.v_max, self.yawrate_max)

    def add_edge(self, u: int, w: int, state: str = EDGE_FREE, obs_cache=None):
        if u == w:
            raise RoadmapError("self-loop edges are not allowed")
        if u not in self.nodes or w not in self.nodes:
            raise RoadmapError(f"edge endpoints {u},{w} must exist")
        key = _pair(u, w)
        if state == EDGE_FREE:
            if key in self.edges:
                return self.edges[key]
            self.pending.pop(key, None)
            self.pending_adjacency[u].discard(w)
            self.pending_adjacency[w].discard(u)
            d_pos, d_yaw, cost = self._geometry(u, w)
            rec = EdgeRecord(key[0], key[1], d_pos, d_yaw, cost, EDGE_FREE)
            self.edges[key] = rec
            self.adjacency[u].add(w)
            self.adjacency[w].add(u)
            return rec
        if state == EDGE_UNK:
            d_pos, d_yaw, cost = self._geometry(u, w)
            rec = EdgeRecord(
                key[0], key[1], d_pos, d_yaw, cost, EDGE_UNK,
                obs_cache=list(obs_cache or []),
            )
            self.pending[key] = rec
            self.pending_adjacency[u].add(w)
            self.pending_adjacency[w].add(u)
            return rec
        if state == EDGE_OCC:
            self.pending.pop(key, None)
            self.pending_adjacency[u].discard(w)
            self.pending_adjacency[w].discard(u)
            self.blocked.add(key)
            return None
        raise RoadmapError(f"unknown edge state {state!r}")

    def _drop_free_edge(self, key: tuple) -> None:
        if key in self.edges:
            del self.edges[key]
            self.adjacency[key[0]].discard(key[1])
            self.adjacency[key[1]].discard(key[0])

    def drop_edges_of(self, uid: int) -> None:
        """Remove all free and pending edges incident to a node."""
        for nb in list(self.adjacency[uid]):
            self._drop_free_edge(_pair(uid, nb))
        for nb in list(self.pending_adjacency[uid]):
            self.pending.pop(_pair(uid, nb), None)
            self.pending_adjacency[nb].discard(uid)
        self.pending_adjacency[uid].clear()

    def edge_between(self, u: int, w: int):
        return self.edges.get(_pair(u, w))

    def edge_status(self, u: int, w: int) -> str | None:
        """'free' | 'unk' | 'occ' for known pairs, None for null edges."""
        key = _pair(u, w)
        if key in self.edges:
            return EDGE_FREE
        if key in self.pending:
            return EDGE_UNK
        if key in self.blocked:
            return EDGE_OCC
        return None

    def refresh_edge_geometry(self, uid: int) -> None:
        """Recompute cached distances of edges touching a moved node."""
        for nb in self.adjacency[uid]:
            rec = self.edges[_pair(uid, nb)]
            rec.d_pos, rec.d_yaw, rec.cost = self._geometry(rec.u, rec.w)
        for nb in self.pending_adjacency[uid]:
            rec = self.pending[_pair(uid, nb)]
            rec.d_pos, rec.d_yaw, rec.cost = self._geometry(rec.u, rec.w)

    # ---- queries -------------------------------------------------------

    def nbv_nodes(self) -> list:
        return [
            n.uid for n in self.nodes.values() if n.open and n.gain > 0
        ]

    def open_view_nodes(self) -> list:
        return [
            n.uid for n in self.nodes.values() if n.open and n.has_view
        ]

    def _positions(self):
        if self._pos_cache is None:
            uids = sorted(self.nodes)
            mat = np.array(
                [self.nodes[u].pose.position for u in uids], dtype=np.float64
            ).reshape(-1, 3)
            self._pos_cache = (uids, mat)
        return self._pos_cache

    def nearest_node(self, position) -> int:
        if not self.nodes:
            raise RoadmapError("roadmap is empty")
        uids, mat = self._positions()
        d = mat - np.asarray(position, dtype=np.float64)
        dist2 = np.einsum("ij,ij->i", d, d)
        return uids[int(np.argmin(dist2))]

    def nodes_within(self, position, radius: float) -> list:
        if not self.nodes:
            return []
        uids, mat = self._positions()
        d = mat - np.asarray(position, dtype=np.float64)
        dist2 = np.einsum("ij,ij->i", d, d)
        hit = dist2 <= radius * radius
        return [uids[i] for i in np.nonzero(hit)[0]]

    def shortest_path(self, u: int, w: int, traversable_only: bool = True):
        """Minimum-cost path and its total cost, or (None, inf).

        Ties between equal-cost paths resolve to the lexicographically
        smallest uid sequence.
        """
        if u not in self.nodes or w not in self.nodes:
            raise RoadmapError(f"path endpoints {u},{w} must exist")
        if u == w:
            return [u], 0.0
        heap = [(0.0, (u,))]
        settled = set()
        while heap:
            cost, path = heapq.heappop(heap)
            node = path[-1]
            if node in settled:
                continue
            settled.add(node)
            if node == w:
                return list(path), cost
            neighbors = set(self.adjacency[node])
            if not traversable_only:
                neighbors |= self.pending_adjacency[node]
            for nb in sorted(neighbors):
                if nb in settled:
                    continue
                key = _pair(node, nb)
                rec = self.edges.get(key) or self.pending.get(key)
                heapq.heappush(heap, (cost + rec.cost, path + (nb,)))
        return None, math.inf

    def dijkstra_costs(self, source: int) -> dict:
        """Cost of the cheapest free-edge path from source to every node."""
        dist = {source: 0.0}
        heap = [(0.0, source)]
        while heap:
            cost, node = heapq.heappop(heap)
            if cost > dist.get(node, math.inf):
                continue
            for nb in self.adjacency[node]:
                nc = cost + self.edges[_pair(node, nb)].cost
                if nc < dist.get(nb, math.inf):
                    dist[nb] = nc
                    heapq.heappush(heap, (nc, nb))
        return dist

    def is_articulation(self, uid: int) -> bool:
        """Whether removing the node disconnects its free-edge component."""
        neighbors = self.adjacency[uid]
        if len(neighbors) <= 1:
            return False
        start = min(neighbors)
        seen = {uid, start}
        stack = [start]
        while stack:
            n = stack.pop()
            for nb in self.adjacency[n]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return any(nb not in seen for nb in neighbors)

    # ---- snapshot ------------------------------------------------------

    def snapshot(self) -> dict:
        nodes = [
            {
                "uid": n.uid,
                "position": [float(v) for v in n.pose.position],
                "yaw": n.pose.yaw,
                "gain": n.gain,
                "open": n.open,
                "class": n.kind,
                "cluster": n.cluster,
            }
            for n in sorted(self.nodes.values(), key=lambda n: n.uid)
        ]
        edges = [
            {"u": rec.u, "w": rec.w, "L": rec.cost, "state": rec.state}
            for key, rec in sorted({**self.edges, **self.pending}.items())
        ]
        edges.extend(
            {"u": p[0], "w": p[1], "L": None, "state": EDGE_OCC}
            for p in sorted(self.blocked)
        )
        clusters = [
            {
                "id": c.cid,
                "members": sorted(c.members),
                "centroid": [float(v) for v in c.centroid],
            }
            for c in sorted(self.clusters.values(), key=lambda c: c.cid)
        ]
        return {"nodes": nodes, "edges": edges, "clusters": clusters}

    def save_snapshot(self, path) -> None:
        Path(path).write_text(json.dumps(self.snapshot(), sort_keys=True))
