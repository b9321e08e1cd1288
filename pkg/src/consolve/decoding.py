"""Greedy feasibility decoding of probability fields, plus 2-opt refinement.

Decoding always returns a feasible solution no matter how uninformative the
field is: tours fall back to cheapest feasible edges once confident entries
are exhausted, independent sets simply skip conflicting nodes. Ties are
broken toward the lexicographically smaller entry so decoding is a pure
function of (heat, instance).
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from .errors import ContractError, DimensionError
from .instances import Instance
from .objectives import FeasibleSolution, canonical_tour, mis_solution, tour_solution
from .state import BernoulliField, DecisionState, num_entries


def _heat_to_selected(heat, inst: Instance) -> np.ndarray:
    """Normalize any heat representation to per-entry confidences (N,)."""
    N = num_entries(inst.kind, inst.n)
    if isinstance(heat, (BernoulliField, DecisionState)):
        if (heat.kind, heat.n) != (inst.kind, inst.n):
            raise ContractError("heat does not match instance")
        sel = heat.selected if isinstance(heat, BernoulliField) else heat.selected.astype(np.float64)
        return np.asarray(sel, dtype=np.float64)
    arr = np.asarray(heat, dtype=np.float64)
    if arr.shape == (N, 2):
        arr = arr[:, 1]
    elif inst.kind == "tsp" and arr.shape == (inst.n, inst.n):
        arr = arr.reshape(N)
    if arr.shape != (N,):
        raise DimensionError(f"heat shape {np.shape(heat)} invalid for this instance")
    if not np.all(np.isfinite(arr)):
        raise ContractError("heat must be finite")
    return arr


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        self.parent[self.find(a)] = self.find(b)


def _tour_from_edges(n: int, neighbors) -> Tuple[int, ...]:
    tour = [0]
    prev = -1
    cur = 0
    for _ in range(n - 1):
        a, b = neighbors[cur]
        nxt = b if a == prev else a
        tour.append(nxt)
        prev, cur = cur, nxt
    return tuple(tour)


def _greedy_tour(conf: np.ndarray, inst: Instance) -> Tuple[int, ...]:
    n = inst.n
    if n == 2:
        return (0, 1)
    sym = (conf + conf.T) / 2.0
    iu, iv = np.triu_indices(n, k=1)
    order = np.lexsort((iv, iu, -sym[iu, iv]))

    deg = [0] * n
    neighbors = [[] for _ in range(n)]
    ds = _DisjointSet(n)
    added = 0

    def try_add(i: int, j: int) -> bool:
        nonlocal added
        if deg[i] >= 2 or deg[j] >= 2:
            return False
        closing = added == n - 1
        if not closing and ds.find(i) == ds.find(j):
            return False
        deg[i] += 1
        deg[j] += 1
        neighbors[i].append(j)
        neighbors[j].append(i)
        ds.union(i, j)
        added += 1
        return True

    for k in order:
        if added == n:
            break
        try_add(int(iu[k]), int(iv[k]))

    if added < n:
        # Confidences exhausted without completing the cycle: close the
        # remaining fragments with the cheapest feasible edges.
        d = inst.dist
        cost_order = np.lexsort((iv, iu, d[iu, iv]))
        while added < n:
            progressed = False
            for k in cost_order:
                if try_add(int(iu[k]), int(iv[k])):
                    progressed = True
                    if added == n:
                        break
            if not progressed:
                raise ContractError("greedy tour construction stalled")

    return canonical_tour(_tour_from_edges(n, neighbors))


def _greedy_members(conf: np.ndarray, inst: Instance) -> Tuple[int, ...]:
    order = np.lexsort((np.arange(inst.n), -conf))
    adj = inst.adjacency
    chosen = np.zeros(inst.n, dtype=bool)
    for v in order:
        if not np.any(chosen & (adj[v] > 0)):
            chosen[v] = True
    return tuple(int(v) for v in np.nonzero(chosen)[0])


def _two_opt_tour(inst: Instance, tour: Sequence[int], max_passes: int) -> Tuple[int, ...]:
    d = inst.dist
    t = list(tour)
    n = len(t)
    for _ in range(max_passes):
        improved = False
        for a in range(n - 1):
            for c in range(a + 1, n):
                if a == 0 and c == n - 1:
                    continue
                b, nxt = t[a], t[(c + 1) % n]
                delta = d[b, t[c]] + d[t[a + 1], nxt] - d[b, t[a + 1]] - d[t[c], nxt]
                if delta < -1e-12:
                    t[a + 1 : c + 1] = reversed(t[a + 1 : c + 1])
                    improved = True
        if not improved:
            break
    return canonical_tour(t)


def two_opt(solution: FeasibleSolution, inst: Instance, max_passes: int = 100) -> FeasibleSolution:
    """First-improvement 2-opt until a full pass finds nothing or the pass
    budget is spent. The returned objective never exceeds the input's."""
    if inst.kind != "tsp" or solution.kind != "tsp":
        raise ContractError("two_opt applies to tsp solutions only")
    if max_passes < 1:
        raise ContractError("max_passes must be positive")
    return tour_solution(inst, _two_opt_tour(inst, solution.tour, max_passes))


def greedy_decode(
    heat,
    inst: Instance,
    two_opt: bool = False,
    max_passes: int = 100,
) -> FeasibleSolution:
    """Decode a probability field into a feasible solution.

    Tours: insert edges by descending confidence, skipping any edge that
    would raise a degree above 2 or close a premature subcycle, then finish
    with cheapest feasible edges. Sets: take nodes by descending confidence,
    skipping neighbors of chosen nodes. Set two_opt=True to refine tours.
    """
    conf = _heat_to_selected(heat, inst)
    if inst.kind == "tsp":
        tour = _greedy_tour(conf.reshape(inst.n, inst.n), inst)
        if two_opt:
            tour = _two_opt_tour(inst, tour, max_passes)
        return tour_solution(inst, tour)
    return mis_solution(inst, _greedy_members(conf, inst))
