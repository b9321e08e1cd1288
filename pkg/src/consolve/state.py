"""Binary decision states and Bernoulli probability fields.

A problem instance induces N binary decision entries: N = n*n directed edge
slots for tours (the symmetric convention sets both (i,j) and (j,i)), N = n
node slots for independent sets. A DecisionState is a hard 0/1 assignment; a
BernoulliField stores per-entry inclusion probabilities as (N, 2) rows
(not-included, included) summing to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError

KINDS = ("tsp", "mis")


def num_entries(kind: str, n: int) -> int:
    if kind not in KINDS:
        raise ContractError(f"unknown problem kind {kind!r}")
    if n < 2:
        raise ContractError(f"need at least 2 nodes, got {n}")
    return n * n if kind == "tsp" else n


@dataclass(frozen=True)
class DecisionState:
    """Hard 0/1 assignment over the decision entries of one instance."""

    kind: str
    n: int
    selected: np.ndarray  # uint8, shape (N,)

    def __post_init__(self):
        sel = np.ascontiguousarray(self.selected, dtype=np.uint8)
        if sel.shape != (num_entries(self.kind, self.n),):
            raise DimensionError(
                f"selected has shape {sel.shape}, expected ({num_entries(self.kind, self.n)},)"
            )
        if not np.all((sel == 0) | (sel == 1)):
            raise ContractError("selected entries must be 0 or 1")
        object.__setattr__(self, "selected", sel)

    @property
    def num_selected(self) -> int:
        return int(self.selected.sum())

    def one_hot(self, dtype=np.float32) -> np.ndarray:
        """(N, 2) rows: (1,0) = not included, (0,1) = included."""
        sel = self.selected.astype(dtype)
        return np.stack([1.0 - sel, sel], axis=1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DecisionState):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.n == other.n
            and np.array_equal(self.selected, other.selected)
        )

    __hash__ = None


@dataclass(frozen=True)
class BernoulliField:
    """Per-entry inclusion probabilities, rows of (not-included, included)."""

    kind: str
    n: int
    probs: np.ndarray  # float, shape (N, 2), rows sum to 1

    def __post_init__(self):
        p = np.ascontiguousarray(self.probs)
        if p.shape != (num_entries(self.kind, self.n), 2):
            raise DimensionError(
                f"probs has shape {p.shape}, expected ({num_entries(self.kind, self.n)}, 2)"
            )
        if not np.all(np.isfinite(p)):
            raise ContractError("field probabilities must be finite")
        if p.min() < -1e-6 or p.max() > 1 + 1e-6:
            raise ContractError("field probabilities must lie in [0, 1]")
        if np.abs(p.sum(axis=1) - 1.0).max() > 1e-4:
            raise ContractError("field rows must sum to 1")
        object.__setattr__(self, "probs", p)

    @property
    def selected(self) -> np.ndarray:
        """Inclusion probability per entry, shape (N,)."""
        return self.probs[:, 1]

    @classmethod
    def from_selected(cls, kind: str, n: int, p_sel: np.ndarray) -> "BernoulliField":
        p_sel = np.asarray(p_sel, dtype=np.float64)
        return cls(kind, n, np.stack([1.0 - p_sel, p_sel], axis=1))

    @classmethod
    def uniform(cls, kind: str, n: int) -> "BernoulliField":
        N = num_entries(kind, n)
        return cls(kind, n, np.full((N, 2), 0.5))


def edge_slot(i: int, j: int, n: int) -> int:
    """Flat index of directed edge slot (i, j) in a tour state."""
    return i * n + j


def solution_to_state(inst, solution) -> DecisionState:
    """Encode a feasible solution as a DecisionState.

    Tours set both directed slots of each undirected tour edge, so a cycle on
    n cities selects exactly 2n entries. Independent sets set member slots.
    """
    n = inst.n
    sel = np.zeros(num_entries(inst.kind, n), dtype=np.uint8)
    if inst.kind == "tsp":
        tour = solution.tour if hasattr(solution, "tour") else tuple(solution)
        for k in range(len(tour)):
            i, j = tour[k], tour[(k + 1) % len(tour)]
            sel[edge_slot(i, j, n)] = 1
            sel[edge_slot(j, i, n)] = 1
    else:
        members = solution.members if hasattr(solution, "members") else tuple(solution)
        for v in members:
            sel[v] = 1
    return DecisionState(inst.kind, n, sel)
