"""Input-validation helpers used by the estimator facade."""
import pytest

from consolve.errors import ContractError, DataError
from consolve.instances import LabeledSample, generate
from consolve.objectives import mis_solution, tour_solution
from consolve.oracles import label
from consolve.validation import ensure_instances, ensure_labeled


def test_ensure_instances_accepts_plain_instances():
    insts = generate("tsp", 5, 3, seed=1)
    out = ensure_instances(insts)
    assert [i.id for i in out] == [i.id for i in insts]


def test_ensure_instances_unwraps_samples():
    samples = label(generate("mis", 6, 3, seed=2))
    out = ensure_instances(samples)
    assert [i.id for i in out] == [s.instance.id for s in samples]


def test_ensure_instances_mixed_input_ok():
    insts = generate("tsp", 5, 2, seed=3)
    mixed = [insts[0], LabeledSample(insts[1], None)]
    out = ensure_instances(mixed)
    assert len(out) == 2


def test_ensure_instances_rejects_kind_mismatch():
    t = generate("tsp", 5, 1, seed=4)
    m = generate("mis", 5, 1, seed=4)
    with pytest.raises(ContractError):
        ensure_instances(t + m)
    ensure_instances(t, kind="tsp")
    with pytest.raises(ContractError):
        ensure_instances(t, kind="mis")


def test_ensure_instances_rejects_empty_and_garbage():
    with pytest.raises(ContractError):
        ensure_instances([])
    with pytest.raises(ContractError):
        ensure_instances(["not an instance"])


def test_ensure_labeled_auto_labels():
    insts = generate("tsp", 5, 2, seed=5)
    out = ensure_labeled(insts)
    assert all(s.solution is not None for s in out)
    oracle = label(insts)
    for got, want in zip(out, oracle):
        assert got.solution.objective == pytest.approx(want.solution.objective)


def test_ensure_labeled_no_auto_label_raises():
    insts = generate("tsp", 5, 2, seed=6)
    with pytest.raises(DataError):
        ensure_labeled(insts, auto_label=False)


def test_ensure_labeled_keeps_existing_labels():
    samples = label(generate("mis", 6, 2, seed=7))
    out = ensure_labeled(samples, auto_label=False)
    for got, want in zip(out, samples):
        assert got.solution is want.solution


def test_ensure_labeled_accepts_y_solutions():
    insts = generate("tsp", 5, 2, seed=8)
    y = [tour_solution(i, tuple(range(5))) for i in insts]
    out = ensure_labeled(insts, y=y)
    for got, want in zip(out, y):
        assert got.solution.objective == pytest.approx(want.objective)


def test_ensure_labeled_rejects_infeasible_y():
    insts = generate("mis", 5, 1, seed=9, er_edge_prob=1.0)  # complete graph
    good = [mis_solution(insts[0], (0,))]
    ensure_labeled(insts, y=good)
    bad_sol = mis_solution(generate("mis", 5, 1, seed=10, er_edge_prob=0.0)[0], (0, 1))
    with pytest.raises(ContractError):
        ensure_labeled(insts, y=[bad_sol])


def test_ensure_labeled_length_mismatch():
    insts = generate("tsp", 5, 2, seed=11)
    with pytest.raises(ContractError):
        ensure_labeled(insts, y=[])
