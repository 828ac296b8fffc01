"""Fixed-ended open tour optimization with a memetic evolutionary loop.

Solves for the cheapest visiting order over a symmetric cost matrix with a
fixed start (and optionally fixed end), no return leg. The population
evolves with pairwise swap mutation and partially mapped crossover, plus a
2-opt improvement pass on the elite each generation. Warm starts seed the
population, so the result never regresses below them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GaConfig:
    population: int = 32
    max_generations: int = 200
    stall_limit: int = 20
    mutation_prob: float = 0.3
    crossover_prob: float = 0.9

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.stall_limit > self.max_generations:
            raise ValueError("stall limit cannot exceed the generation cap")


@dataclass
class TourResult:
    order: list
    cost: float
    generations: int
    history: list = field(default_factory=list)


def path_cost(matrix: np.ndarray, start: int, end, middles) -> float:
    mid = np.asarray(middles, dtype=np.int64)
    if mid.size == 0:
        return float(matrix[start, end]) if end is not None else 0.0
    c = float(matrix[start, mid[0]])
    if mid.size > 1:
        c += float(matrix[mid[:-1], mid[1:]].sum())
    if end is not None:
        c += float(matrix[mid[-1], end])
    return c


def nearest_neighbor_order(matrix: np.ndarray, start: int, middles, end=None):
    """Greedy construction: always hop to the cheapest unvisited index."""
    remaining = list(middles)
    order = []
    at = start
    while remaining:
        best = min(remaining, key=lambda x: (matrix[at, x], x))
        order.append(best)
        remaining.remove(best)
        at = best
    return order


def pmx(parent_a, parent_b, rng: np.random.Generator):
    """Partially mapped crossover; always yields a valid permutation."""
    n = len(parent_a)
    child = [-1] * n
    i = int(rng.integers(0, n))
    j = int(rng.integers(0, n))
    if i > j:
        i, j = j, i
    pos_in_b = {v: q for q, v in enumerate(parent_b)}
    child[i : j + 1] = parent_a[i : j + 1]
    taken = set(child[i : j + 1])
    for q in range(i, j + 1):
        v = parent_b[q]
        if v in taken:
            continue
        spot = q
        while i <= spot <= j:
            spot = pos_in_b[parent_a[spot]]
        child[spot] = v
        taken.add(v)
    for q in range(n):
        if child[q] == -1:
            child[q] = parent_b[q]
    return child


def _two_opt(matrix, start, end, mid):
    """Single first-improvement sweep of segment reversals."""
    n = len(mid)
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            a = start if i == 0 else mid[i - 1]
            for j in range(i + 1, n):
                b = end if j == n - 1 else mid[j + 1]
                before = matrix[a, mid[i]]
                after = matrix[a, mid[j]]
                if b is not None:
                    before = before + matrix[mid[j], b]
                    after = after + matrix[mid[i], b]
                if after < before - 1e-12:
                    mid[i : j + 1] = mid[i : j + 1][::-1]
                    improved = True
    return mid


def solve_open_tour(
    matrix: np.ndarray,
    start: int,
    end: int | None = None,
    warm=None,
    ga: GaConfig | None = None,
    rng: np.random.Generator | None = None,
) -> TourResult:
    """Best visiting order over matrix rows, starting (and ending) as fixed.

    ``warm`` is a previous ordering of the middle indices; it enters the
    initial population verbatim alongside its shuffles and a greedy
    construction, and elitism keeps the result at least as good as both.
    """
    if ga is None:
        ga = GaConfig()
    if rng is None:
        rng = np.random.default_rng(0)
    n = matrix.shape[0]
    fixed = {start} | ({end} if end is not None else set())
    middles = [q for q in range(n) if q not in fixed]
    if warm is None:
        warm = list(middles)
    else:
        warm = [q for q in warm if q in set(middles)]
        missing = [q for q in middles if q not in set(warm)]
        warm = warm + missing

    def full(mid):
        out = [start] + list(mid)
        if end is not None:
            out.append(end)
        return out

    if len(middles) <= 1:
        mid = list(middles)
        return TourResult(full(mid), path_cost(matrix, start, end, mid), 0, [])

    pop = [list(warm)]
    pop.append(nearest_neighbor_order(matrix, start, middles, end))
    while len(pop) < ga.population:
        pop.append([warm[i] for i in rng.permutation(len(warm))])

    costs = [path_cost(matrix, start, end, ind) for ind in pop]
    best_idx = int(np.argmin(costs))
    best = list(pop[best_idx])
    best_cost = costs[best_idx]
    history = [best_cost]

    stall = 0
    generations = 0
    n_mid = len(middles)
    for _ in range(ga.max_generations):
        if stall >= ga.stall_limit:
            break
        generations += 1
        improved = False

        elite = _two_opt(matrix, start, end, list(best))
        elite_cost = path_cost(matrix, start, end, elite)
        if elite_cost < best_cost - 1e-12:
            best, best_cost = list(elite), elite_cost
            improved = True

        new_pop = [list(elite)]
        while len(new_pop) < ga.population:
            pa = _tournament(pop, costs, rng)
            if rng.random() < ga.crossover_prob:
                pb = _tournament(pop, costs, rng)
                child = pmx(pa, pb, rng)
            else:
                child = list(pa)
            if rng.random() < ga.mutation_prob:
                i = int(rng.integers(0, n_mid))
                j = int(rng.integers(0, n_mid))
                child[i], child[j] = child[j], child[i]
            new_pop.append(child)
        pop = new_pop
        costs = [path_cost(matrix, start, end, ind) for ind in pop]
        gen_best = int(np.argmin(costs))
        if costs[gen_best] < best_cost - 1e-12:
            best = list(pop[gen_best])
            best_cost = costs[gen_best]
            improved = True
        stall = 0 if improved else stall + 1
        history.append(best_cost)

    return TourResult(full(best), best_cost, generations, history)


def _tournament(pop, costs, rng: np.random.Generator):
    a = int(rng.integers(0, len(pop)))
    b = int(rng.integers(0, len(pop)))
    return pop[a] if costs[a] <= costs[b] else pop[b]


def cheapest_insertion(
    matrix: np.ndarray, start: int, end: int | None, base, new_items
) -> list:
    """Insert each new index at the position of least added path cost."""
    seq = list(base)
    for x in new_items:
        best_slot = 0
        best_delta = None
        for s in range(len(seq) + 1):
            a = start if s == 0 else seq[s - 1]
            b = None if s == len(seq) else seq[s]
            if b is None and end is not None:
                b = end
            delta = matrix[a, x]
            if b is not None:
                delta = delta + matrix[x, b] - matrix[a, b]
            if best_delta is None or delta < best_delta - 1e-12:
                best_delta = delta
                best_slot = s
        seq.insert(best_slot, x)
    return seq
