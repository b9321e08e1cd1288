"""Problem instances, random generators, and JSON-lines serialization.

File format, one record per line:

    {"id": "tsp10-s7-00000", "kind": "tsp", "coords": [[x, y], ...]}
    {"id": "mis20-s7-00000", "kind": "mis", "n": 20, "edges": [[u, v], ...]}

Labeled records additionally carry {"opt": {"tour": [...] | "members": [...],
"objective": <float>}}. Objectives are stored in minimization convention
(tour length for tours, minus set size for independent sets).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import rng as rngmod
from .errors import ContractError, DataError
from .state import KINDS


@dataclass(frozen=True)
class Instance:
    """One problem instance. Distances are derived, never serialized."""

    kind: str
    id: str
    n: int
    coords: Optional[np.ndarray] = None  # (n, 2) float64, tsp only
    edges: Optional[Tuple[Tuple[int, int], ...]] = None  # sorted (u, v) u < v, mis only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown problem kind {self.kind!r}")
        if self.n < 2:
            raise ContractError(f"instance needs at least 2 nodes, got n={self.n}")
        if self.kind == "tsp":
            if self.coords is None:
                raise ContractError("tsp instance requires coords")
            c = np.ascontiguousarray(self.coords, dtype=np.float64)
            if c.shape != (self.n, 2):
                raise ContractError(f"coords shape {c.shape} != ({self.n}, 2)")
            if not np.all(np.isfinite(c)):
                raise ContractError("coords must be finite")
            object.__setattr__(self, "coords", c)
            if self.edges is not None:
                raise ContractError("tsp instance must not carry edges")
        else:
            if self.edges is None:
                raise ContractError("mis instance requires an edge list")
            seen = set()
            norm = []
            for e in self.edges:
                u, v = int(e[0]), int(e[1])
                if u == v:
                    raise ContractError(f"self-loop ({u},{v}) not allowed")
                if not (0 <= u < self.n and 0 <= v < self.n):
                    raise ContractError(f"edge ({u},{v}) out of range for n={self.n}")
                if u > v:
                    u, v = v, u
                if (u, v) in seen:
                    raise ContractError(f"duplicate edge ({u},{v})")
                seen.add((u, v))
                norm.append((u, v))
            object.__setattr__(self, "edges", tuple(sorted(norm)))
            if self.coords is not None:
                raise ContractError("mis instance must not carry coords")

    @cached_property
    def dist(self) -> np.ndarray:
        """(n, n) Euclidean distance matrix (tsp only)."""
        if self.kind != "tsp":
            raise ContractError("dist is only defined for tsp instances")
        d = self.coords[:, None, :] - self.coords[None, :, :]
        return np.sqrt((d * d).sum(axis=2))

    @cached_property
    def adjacency(self) -> np.ndarray:
        """(n, n) symmetric 0/1 float adjacency (mis only)."""
        if self.kind != "mis":
            raise ContractError("adjacency is only defined for mis instances")
        a = np.zeros((self.n, self.n), dtype=np.float64)
        for u, v in self.edges:
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a

    @cached_property
    def neighbor_masks(self) -> List[int]:
        """Per-node neighbor bitmasks (mis only)."""
        if self.kind != "mis":
            raise ContractError("neighbor_masks is only defined for mis instances")
        masks = [0] * self.n
        for u, v in self.edges:
            masks[u] |= 1 << v
            masks[v] |= 1 << u
        return masks


@dataclass(frozen=True)
class LabeledSample:
    """Instance paired with an optional reference solution."""

    instance: Instance
    solution: Optional["FeasibleSolution"] = None  # noqa: F821  (see objectives)


def generate(
    kind: str,
    n: int,
    count: int,
    seed: int,
    er_edge_prob: float = 0.15,
) -> List[Instance]:
    """Generate `count` instances deterministically from (kind, n, seed).

    tsp: n points uniform in the unit square. mis: Erdos-Renyi G(n, p) with
    p = er_edge_prob. Instance i draws from its own stream, so subsets of a
    dataset are reproducible regardless of count.
    """
    if count < 0:
        raise ContractError("count must be non-negative")
    if not 0.0 <= er_edge_prob <= 1.0:
        raise ContractError(f"er_edge_prob must lie in [0, 1], got {er_edge_prob}")
    out = []
    for i in range(count):
        g = rngmod.stream(seed, rngmod.GENERATE, i)
        iid = f"{kind}{n}-s{seed}-{i:05d}"
        if kind == "tsp":
            coords = g.random((n, 2))
            out.append(Instance(kind="tsp", id=iid, n=n, coords=coords))
        elif kind == "mis":
            iu, iv = np.triu_indices(n, k=1)
            mask = g.random(iu.shape[0]) < er_edge_prob
            edges = tuple((int(u), int(v)) for u, v in zip(iu[mask], iv[mask]))
            out.append(Instance(kind="mis", id=iid, n=n, edges=edges))
        else:
            raise ContractError(f"unknown problem kind {kind!r}")
    return out


def _instance_to_record(sample: LabeledSample) -> dict:
    inst = sample.instance
    rec: dict = {"id": inst.id, "kind": inst.kind}
    if inst.kind == "tsp":
        rec["coords"] = [[float(x), float(y)] for x, y in inst.coords]
    else:
        rec["n"] = inst.n
        rec["edges"] = [[u, v] for u, v in inst.edges]
    sol = sample.solution
    if sol is not None:
        opt: dict = {"objective": float(sol.objective)}
        if inst.kind == "tsp":
            opt["tour"] = list(sol.tour)
        else:
            opt["members"] = list(sol.members)
        rec["opt"] = opt
    return rec


def write_jsonl(path, samples: Iterable) -> None:
    """Write instances (or labeled samples) to a JSON-lines file."""
    from .objectives import FeasibleSolution  # local to avoid cycle

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            if isinstance(s, Instance):
                s = LabeledSample(instance=s, solution=None)
            if not isinstance(s, LabeledSample):
                raise ContractError(f"cannot serialize {type(s).__name__}")
            if s.solution is not None and not isinstance(s.solution, FeasibleSolution):
                raise ContractError("label must be a FeasibleSolution")
            fh.write(json.dumps(_instance_to_record(s), separators=(",", ":")))
            fh.write("\n")


def read_jsonl(path) -> List[LabeledSample]:
    """Read a JSON-lines instance file; malformed records raise DataError."""
    from .objectives import FeasibleSolution, validate_members, validate_tour

    samples: List[LabeledSample] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON: {e}") from e
            try:
                inst = _record_to_instance(rec)
            except (KeyError, TypeError, ContractError) as e:
                raise DataError(f"{path}:{lineno}: bad instance record: {e}") from e
            sol = None
            if "opt" in rec:
                try:
                    opt = rec["opt"]
                    if inst.kind == "tsp":
                        tour = tuple(int(v) for v in opt["tour"])
                        validate_tour(inst, tour)
                        sol = FeasibleSolution(
                            kind="tsp", tour=tour, members=None,
                            objective=float(opt["objective"]),
                        )
                    else:
                        members = tuple(int(v) for v in opt["members"])
                        validate_members(inst, members)
                        sol = FeasibleSolution(
                            kind="mis", tour=None, members=members,
                            objective=float(opt["objective"]),
                        )
                except (KeyError, TypeError, ContractError) as e:
                    raise DataError(f"{path}:{lineno}: bad label: {e}") from e
            samples.append(LabeledSample(instance=inst, solution=sol))
    return samples


def _record_to_instance(rec: dict) -> Instance:
    kind = rec["kind"]
    iid = str(rec["id"])
    if kind == "tsp":
        coords = np.asarray(rec["coords"], dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise DataError(f"coords must be (n, 2), got {coords.shape}")
        return Instance(kind="tsp", id=iid, n=coords.shape[0], coords=coords)
    if kind == "mis":
        n = int(rec["n"])
        edges = tuple((int(u), int(v)) for u, v in rec["edges"])
        return Instance(kind="mis", id=iid, n=n, edges=edges)
    raise DataError(f"unknown kind {kind!r}")
