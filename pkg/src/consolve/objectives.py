"""Objective functions, feasibility validation, and solution records.

All objectives follow minimization convention: tour length for tours, minus
set size for independent sets. Soft inputs (probability fields) are accepted
everywhere a hard state is, which is what makes gradient guidance possible;
for independent sets the soft objective adds a quadratic penalty
beta * sum_{(u,v) in E} p_u p_v for simultaneous endpoint inclusion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ContractError, DimensionError
from .instances import Instance
from .state import BernoulliField, DecisionState, num_entries

DEFAULT_PENALTY_BETA = 2.0


@dataclass(frozen=True)
class FeasibleSolution:
    """A validated solution with its minimization objective."""

    kind: str
    tour: Optional[Tuple[int, ...]]
    members: Optional[Tuple[int, ...]]
    objective: float

    @property
    def size(self) -> int:
        """Set size for independent sets."""
        if self.kind != "mis":
            raise ContractError("size is only defined for mis solutions")
        return len(self.members)


def validate_tour(inst: Instance, tour: Sequence[int]) -> None:
    """Raise ContractError unless tour is a Hamiltonian cycle on inst."""
    if inst.kind != "tsp":
        raise ContractError("tours only apply to tsp instances")
    if len(tour) != inst.n or sorted(tour) != list(range(inst.n)):
        raise ContractError(f"tour must visit each of {inst.n} cities exactly once")


def validate_members(inst: Instance, members: Sequence[int]) -> None:
    """Raise ContractError unless members form an independent set on inst."""
    if inst.kind != "mis":
        raise ContractError("member sets only apply to mis instances")
    ms = set(int(v) for v in members)
    if len(ms) != len(members):
        raise ContractError("duplicate members")
    if ms and (min(ms) < 0 or max(ms) >= inst.n):
        raise ContractError("member out of range")
    for u, v in inst.edges:
        if u in ms and v in ms:
            raise ContractError(f"members {u} and {v} are adjacent")


def tour_length(inst: Instance, tour: Sequence[int]) -> float:
    t = np.asarray(tour, dtype=np.int64)
    d = inst.dist
    return float(d[t, np.roll(t, -1)].sum())


def tour_solution(inst: Instance, tour: Sequence[int]) -> FeasibleSolution:
    validate_tour(inst, tour)
    return FeasibleSolution(
        kind="tsp", tour=canonical_tour(tour), members=None,
        objective=tour_length(inst, tour),
    )


def mis_solution(inst: Instance, members: Sequence[int]) -> FeasibleSolution:
    validate_members(inst, members)
    members = tuple(sorted(int(v) for v in members))
    return FeasibleSolution(kind="mis", tour=None, members=members, objective=-float(len(members)))


def canonical_tour(tour: Sequence[int]) -> Tuple[int, ...]:
    """Rotate to start at city 0 and orient toward the smaller neighbor."""
    t = list(tour)
    k = t.index(0)
    t = t[k:] + t[:k]
    if len(t) > 2 and t[-1] < t[1]:
        t = [t[0]] + t[:0:-1]
    return tuple(t)


def _selected_vector(x, inst: Instance) -> np.ndarray:
    N = num_entries(inst.kind, inst.n)
    if isinstance(x, DecisionState):
        if (x.kind, x.n) != (inst.kind, inst.n):
            raise ContractError("state does not match instance")
        return x.selected.astype(np.float64)
    if isinstance(x, BernoulliField):
        if (x.kind, x.n) != (inst.kind, inst.n):
            raise ContractError("field does not match instance")
        return x.selected.astype(np.float64)
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape == (N, 2):
        arr = arr[:, 1]
    if arr.shape != (N,):
        raise DimensionError(f"expected {N} decision entries, got shape {arr.shape}")
    return arr


def objective(x, inst: Instance, penalty_beta: float = DEFAULT_PENALTY_BETA) -> float:
    """Minimization objective of a hard or soft assignment.

    tsp: sum of selected directed edge slots weighted by distance, halved,
    so a symmetric tour encoding evaluates to the tour length. mis: minus
    expected set size plus penalty_beta per expected violated edge.
    """
    sel = _selected_vector(x, inst)
    if inst.kind == "tsp":
        return float((sel.reshape(inst.n, inst.n) * inst.dist).sum() / 2.0)
    total = -float(sel.sum())
    for u, v in inst.edges:
        total += penalty_beta * float(sel[u] * sel[v])
    return total
