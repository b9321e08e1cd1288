"""Input validation helpers shared by the estimator facade and the CLI."""

from __future__ import annotations

from typing import List, Optional, Sequence

from .errors import ContractError, DataError
from .instances import Instance, LabeledSample
from .objectives import FeasibleSolution, validate_members, validate_tour
from .oracles import label as oracle_label


def ensure_instances(X, kind: Optional[str] = None) -> List[Instance]:
    """Coerce X to a homogeneous, non-empty list of instances.

    Accepts instances or labeled samples (labels are dropped).  All items
    must share one problem kind, which must equal ``kind`` when given.
    """
    items = list(X) if not isinstance(X, Instance) else [X]
    if not items:
        raise ContractError("expected at least one instance")
    insts: List[Instance] = []
    for i, item in enumerate(items):
        if isinstance(item, LabeledSample):
            item = item.instance
        if not isinstance(item, Instance):
            raise ContractError(f"item {i} is {type(item).__name__}, expected an instance")
        insts.append(item)
    kinds = {inst.kind for inst in insts}
    if len(kinds) > 1:
        raise ContractError(f"mixed problem kinds {sorted(kinds)}; expected one")
    if kind is not None and insts[0].kind != kind:
        raise ContractError(f"expected {kind!r} instances, got {insts[0].kind!r}")
    return insts


def ensure_labeled(
    X,
    y: Optional[Sequence[FeasibleSolution]] = None,
    auto_label: bool = True,
) -> List[LabeledSample]:
    """Coerce (X, y) to labeled samples, solving exactly when labels are missing.

    X may already be labeled samples (y must then be None); otherwise y
    supplies one solution per instance, or ``auto_label`` fills in oracle
    solutions.  Provided solutions are feasibility-checked against their
    instances.
    """
    items = list(X)
    if not items:
        raise ContractError("expected at least one training sample")
    if all(isinstance(item, LabeledSample) for item in items):
        if y is not None:
            raise ContractError("labels given twice: X already carries solutions")
        missing = [s.instance.id for s in items if s.solution is None]
        if not missing:
            return items
        if not auto_label:
            raise DataError(f"samples without solutions (first: {missing[0]}) and auto-labeling is disabled")
        return [s if s.solution is not None else oracle_label([s.instance])[0] for s in items]
    insts = ensure_instances(items)
    if y is None:
        if not auto_label:
            raise DataError("instances are unlabeled and auto-labeling is disabled")
        return oracle_label(insts)
    solutions = list(y)
    if len(solutions) != len(insts):
        raise ContractError(f"{len(insts)} instances but {len(solutions)} labels")
    out: List[LabeledSample] = []
    for inst, sol in zip(insts, solutions):
        if not isinstance(sol, FeasibleSolution):
            raise ContractError(f"label for {inst.id} is {type(sol).__name__}")
        if sol.kind != inst.kind:
            raise ContractError(f"label kind {sol.kind!r} != instance kind {inst.kind!r}")
        if inst.kind == "tsp":
            validate_tour(inst, sol.tour)
        else:
            validate_members(inst, sol.members)
        out.append(LabeledSample(instance=inst, solution=sol))
    return out
