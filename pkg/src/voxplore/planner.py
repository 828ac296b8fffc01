"""Hierarchical exploration planning over the clustered roadmap.

Stage one orders the clusters from the agent's cluster toward the home
cluster; stage two orders the open candidate views of the first cluster
holding any. Both stages run the memetic tour solver, warm-started from
the previous cycle's solution, and the selected goal carries hysteresis
against flip-flopping between near-equal plans.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from voxplore.roadmap import Roadmap
from voxplore.tour import GaConfig, cheapest_insertion, path_cost, solve_open_tour

log = logging.getLogger(__name__)


@dataclass
class CostMatrix:
    """Dense symmetric pairwise costs over cluster ids or node uids."""

    ids: list
    matrix: np.ndarray

    def __post_init__(self):
        self.pos = {x: q for q, x in enumerate(self.ids)}

    def cost(self, a, b) -> float:
        return float(self.matrix[self.pos[a], self.pos[b]])


@dataclass
class ExplorationPlan:
    cluster_seq: list = field(default_factory=list)
    view_seq: list = field(default_factory=list)
    cluster_cost: float = 0.0
    view_cost: float = 0.0
    generations: int = 0
    target_cluster: int | None = None
    view_matrix: CostMatrix | None = None

    @property
    def empty(self) -> bool:
        return len(self.view_seq) < 2

    def trace(self, cycle: int, goal) -> dict:
        return {
            "cycle": cycle,
            "cluster_seq": list(self.cluster_seq),
            "view_seq": list(self.view_seq),
            "costs": {"clusters": self.cluster_cost, "views": self.view_cost},
            "generations": self.generations,
            "goal": goal,
        }


def centroid_view(graph: Roadmap, cluster) -> int:
    """Cluster member closest to the cluster's geometric centroid."""
    best = None
    best_key = None
    for uid in sorted(cluster.members):
        d = graph.nodes[uid].pose.position - cluster.centroid
        key = (float(np.dot(d, d)), uid)
        if best_key is None or key < best_key:
            best_key = key
            best = uid
    return best


def build_cluster_cost_matrix(graph: Roadmap) -> CostMatrix:
    """Pairwise shortest-path costs between cluster centroid views."""
    ids = sorted(graph.clusters)
    anchors = {cid: centroid_view(graph, graph.clusters[cid]) for cid in ids}
    n = len(ids)
    m = np.zeros((n, n), dtype=np.float64)
    for qi in range(n):
        costs = graph.dijkstra_costs(anchors[ids[qi]])
        for qj in range(qi + 1, n):
            c = costs.get(anchors[ids[qj]], math.inf)
            m[qi, qj] = c
            m[qj, qi] = c
    return CostMatrix(ids, m)


def build_view_cost_matrix(graph: Roadmap, uids: list) -> CostMatrix:
    """Pairwise view travel costs: the direct edge where one exists, else
    the cheapest free-edge path."""
    n = len(uids)
    m = np.zeros((n, n), dtype=np.float64)
    path_costs = {}
    for qi in range(n):
        for qj in range(qi + 1, n):
            rec = graph.edge_between(uids[qi], uids[qj])
            if rec is not None:
                c = rec.cost
            else:
                if qi not in path_costs:
                    path_costs[qi] = graph.dijkstra_costs(uids[qi])
                c = path_costs[qi].get(uids[qj], math.inf)
            m[qi, qj] = c
            m[qj, qi] = c
    return CostMatrix(uids, m)


def warm_start_sequence(prev: list, current_set, cmatrix: CostMatrix, start, end=None):
    """Previous ordering filtered to the current set, newcomers inserted
    where they add the least cost."""
    kept = [x for x in prev if x in current_set]
    new = sorted(x for x in current_set if x not in set(prev))
    base = [cmatrix.pos[x] for x in kept]
    items = [cmatrix.pos[x] for x in new]
    s = cmatrix.pos[start]
    e = cmatrix.pos[end] if end is not None else None
    seq = cheapest_insertion(cmatrix.matrix, s, e, base, items)
    return [cmatrix.ids[q] for q in seq]


def _cluster_nbvs(graph: Roadmap, cid: int) -> list:
    return sorted(
        uid
        for uid in graph.clusters[cid].members
        if graph.nodes[uid].open and graph.nodes[uid].gain > 0
    )


def plan_cycle(
    graph: Roadmap,
    prev_plan: ExplorationPlan | None,
    ga: GaConfig,
    rng: np.random.Generator,
) -> ExplorationPlan:
    """Two-stage tour planning; empty plan when no open candidate remains."""
    plan = ExplorationPlan()
    if not graph.clusters:
        return plan
    prev_plan = prev_plan or ExplorationPlan()

    agent_cluster = graph.nodes[graph.agent_uid].cluster
    home_cluster = graph.nodes[graph.home_uid].cluster
    cmat = build_cluster_cost_matrix(graph)

    apos = cmat.pos[agent_cluster]
    reachable = [
        cid
        for cid in cmat.ids
        if cid == agent_cluster or math.isfinite(cmat.matrix[apos, cmat.pos[cid]])
    ]
    dropped = set(cmat.ids) - set(reachable)
    if dropped:
        log.warning("excluding unreachable clusters from the tour: %s", sorted(dropped))
        keep = [cmat.pos[c] for c in reachable]
        cmat = CostMatrix(reachable, cmat.matrix[np.ix_(keep, keep)])

    end_cluster = home_cluster if (
        home_cluster in cmat.pos and home_cluster != agent_cluster
    ) else None
    warm_ids = warm_start_sequence(
        [c for c in prev_plan.cluster_seq if c != agent_cluster and c != end_cluster],
        [c for c in cmat.ids if c != agent_cluster and c != end_cluster],
        cmat,
        agent_cluster,
        end_cluster,
    )
    res = solve_open_tour(
        cmat.matrix,
        cmat.pos[agent_cluster],
        cmat.pos[end_cluster] if end_cluster is not None else None,
        warm=[cmat.pos[c] for c in warm_ids],
        ga=ga,
        rng=rng,
    )
    plan.cluster_seq = [cmat.ids[q] for q in res.order]
    plan.cluster_cost = res.cost
    plan.generations = res.generations

    target = None
    nbvs: list = []
    for cid in plan.cluster_seq:
        cand = _cluster_nbvs(graph, cid)
        if not cand:
            continue
        vmat = build_view_cost_matrix(graph, [graph.agent_uid] + cand)
        a = vmat.pos[graph.agent_uid]
        usable = [u for u in cand if math.isfinite(vmat.matrix[a, vmat.pos[u]])]
        if len(usable) < len(cand):
            log.warning(
                "cluster %s: dropping views unreachable from the agent: %s",
                cid,
                sorted(set(cand) - set(usable)),
            )
        if not usable:
            continue
        if len(usable) < len(cand):
            vmat = build_view_cost_matrix(graph, [graph.agent_uid] + usable)
        target = cid
        nbvs = usable
        plan.view_matrix = vmat
        break

    if target is None:
        return plan

    vmat = plan.view_matrix
    warm_views = warm_start_sequence(
        [u for u in prev_plan.view_seq[1:] if u in set(nbvs)],
        nbvs,
        vmat,
        graph.agent_uid,
    )
    res = solve_open_tour(
        vmat.matrix,
        vmat.pos[graph.agent_uid],
        None,
        warm=[vmat.pos[u] for u in warm_views],
        ga=ga,
        rng=rng,
    )
    plan.view_seq = [vmat.ids[q] for q in res.order]
    plan.view_cost = res.cost
    plan.generations += res.generations
    plan.target_cluster = target
    return plan


def select_goal(
    plan: ExplorationPlan,
    prev_goal: int | None,
    graph: Roadmap,
    hysteresis: float = 0.85,
) -> int | None:
    """First view of the plan, unless keeping the previous goal is close
    enough in cost to avoid a direction flip."""
    if plan.empty:
        return None
    candidate = plan.view_seq[1]
    if prev_goal is None or prev_goal == candidate:
        return candidate
    node = graph.nodes.get(prev_goal)
    vmat = plan.view_matrix
    if (
        node is None
        or not node.open
        or node.gain <= 0
        or vmat is None
        or prev_goal not in vmat.pos
    ):
        return candidate

    a = vmat.pos[graph.agent_uid]
    rest = [vmat.pos[u] for u in plan.view_seq[1:]]
    cost_candidate = path_cost(vmat.matrix, a, None, rest)
    prev_first = [vmat.pos[prev_goal]] + [
        q for q in rest if q != vmat.pos[prev_goal]
    ]
    cost_prev = path_cost(vmat.matrix, a, None, prev_first)
    if cost_candidate < hysteresis * cost_prev:
        return candidate
    return prev_goal
