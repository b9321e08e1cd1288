"""Exact solvers for small instances, used for labels and ground truth.

These run in float64 and are deliberately independent of the learned
pipeline: dynamic programming over subsets for tours, branch and bound with
a counting bound for independent sets, plus brute-force enumerators used to
cross-validate both. Hard size limits keep runtimes desk-scale.
"""

from __future__ import annotations

import itertools
from typing import List, Tuple

import numpy as np

from .errors import SizeLimitError
from .instances import Instance, LabeledSample
from .objectives import FeasibleSolution, canonical_tour, mis_solution, tour_solution

HELD_KARP_MAX_N = 16
BRUTE_FORCE_MAX_N = 10
MIS_BB_MAX_N = 30
MIS_ENUM_MAX_N = 20


def held_karp(inst: Instance) -> FeasibleSolution:
    """Exact tour via subset dynamic programming, O(n^2 2^n).

    Ties break toward the lowest final city and then follow parent pointers,
    so the result is deterministic for a given distance matrix.
    """
    if inst.kind != "tsp":
        raise SizeLimitError("held_karp solves tsp instances only")
    n = inst.n
    if n > HELD_KARP_MAX_N:
        raise SizeLimitError(f"held_karp limited to {HELD_KARP_MAX_N} cities, got {n}")
    d = inst.dist
    if n == 2:
        return tour_solution(inst, (0, 1))

    size = 1 << n
    dp = np.full((size, n), np.inf, dtype=np.float64)
    parent = np.full((size, n), -1, dtype=np.int8)
    dp[1, 0] = 0.0

    for mask in range(1, size, 2):  # masks containing city 0
        row = dp[mask]
        finite = np.isfinite(row)
        if not finite.any():
            continue
        cand = np.where(finite[:, None], row[:, None] + d, np.inf)
        best = cand.min(axis=0)
        arg = cand.argmin(axis=0)
        for j in range(1, n):
            if not mask & (1 << j):
                m2 = mask | (1 << j)
                dp[m2, j] = best[j]
                parent[m2, j] = arg[j]

    full = size - 1
    totals = dp[full] + d[:, 0]
    totals[0] = np.inf
    j = int(np.argmin(totals))

    path = []
    mask = full
    while j != 0:
        path.append(j)
        k = int(parent[mask, j])
        mask ^= 1 << j
        j = k
    path.append(0)
    return tour_solution(inst, tuple(reversed(path)))


def tsp_brute_force(inst: Instance) -> FeasibleSolution:
    """Exhaustive minimum over all (n-1)! tours fixing city 0 first."""
    if inst.kind != "tsp":
        raise SizeLimitError("tsp_brute_force solves tsp instances only")
    n = inst.n
    if n > BRUTE_FORCE_MAX_N:
        raise SizeLimitError(f"tsp_brute_force limited to {BRUTE_FORCE_MAX_N} cities, got {n}")
    d = inst.dist
    perms = np.array(list(itertools.permutations(range(1, n))), dtype=np.int64)
    tours = np.hstack([np.zeros((perms.shape[0], 1), dtype=np.int64), perms])
    lengths = d[tours, np.roll(tours, -1, axis=1)].sum(axis=1)
    best = int(np.argmin(lengths))  # first minimum: lexicographically smallest
    return tour_solution(inst, tuple(int(v) for v in tours[best]))


def mis_branch_and_bound(inst: Instance) -> FeasibleSolution:
    """Exact maximum independent set via branch and bound.

    Bound: current size plus count of remaining candidates. Pivot: the
    remaining node of highest remaining degree (lowest index on ties);
    isolated leftovers are taken wholesale.
    """
    if inst.kind != "mis":
        raise SizeLimitError("mis_branch_and_bound solves mis instances only")
    n = inst.n
    if n > MIS_BB_MAX_N:
        raise SizeLimitError(f"mis_branch_and_bound limited to {MIS_BB_MAX_N} nodes, got {n}")
    masks = inst.neighbor_masks
    best_size = -1
    best_set = 0

    def rec(avail: int, cur: int, cur_size: int) -> None:
        nonlocal best_size, best_set
        if cur_size + avail.bit_count() <= best_size:
            return
        if avail == 0:
            best_size, best_set = cur_size, cur
            return
        v = -1
        vdeg = -1
        a = avail
        while a:
            b = a & -a
            i = b.bit_length() - 1
            a ^= b
            dg = (masks[i] & avail).bit_count()
            if dg > vdeg:
                vdeg, v = dg, i
        if vdeg == 0:
            total = cur_size + avail.bit_count()
            if total > best_size:
                best_size, best_set = total, cur | avail
            return
        bit = 1 << v
        rec(avail & ~bit & ~masks[v], cur | bit, cur_size + 1)
        rec(avail & ~bit, cur, cur_size)

    rec((1 << n) - 1, 0, 0)
    members = [i for i in range(n) if best_set & (1 << i)]
    return mis_solution(inst, members)


def mis_enumerate(inst: Instance) -> FeasibleSolution:
    """Exhaustive maximum over all 2^n subsets (cross-validation oracle)."""
    if inst.kind != "mis":
        raise SizeLimitError("mis_enumerate solves mis instances only")
    n = inst.n
    if n > MIS_ENUM_MAX_N:
        raise SizeLimitError(f"mis_enumerate limited to {MIS_ENUM_MAX_N} nodes, got {n}")
    subsets = np.arange(1 << n, dtype=np.uint64)
    feasible = np.ones(1 << n, dtype=bool)
    for u, v in inst.edges:
        feasible &= ((subsets >> np.uint64(u)) & (subsets >> np.uint64(v)) & np.uint64(1)) == 0
    sizes = np.where(feasible, np.bitwise_count(subsets), 0)
    best = int(np.argmax(sizes))  # first maximum: smallest subset mask
    members = [i for i in range(n) if best & (1 << i)]
    return mis_solution(inst, members)


def oracle_solve(inst: Instance) -> FeasibleSolution:
    """Route to the exact solver for this instance kind, enforcing limits."""
    if inst.kind == "tsp":
        return held_karp(inst)
    return mis_branch_and_bound(inst)


def label(instances) -> List[LabeledSample]:
    """Attach exact solutions to every instance."""
    return [LabeledSample(instance=i, solution=oracle_solve(i)) for i in instances]
