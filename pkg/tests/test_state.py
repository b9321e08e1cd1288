"""Decision-state containers: entry counts, one-hot layout, field bounds."""
import numpy as np
import pytest

from consolve.errors import ContractError, DimensionError
from consolve.objectives import mis_solution, tour_solution
from consolve.state import (
    BernoulliField,
    DecisionState,
    edge_slot,
    num_entries,
    solution_to_state,
)

from conftest import make_corners, make_path_graph


def test_num_entries():
    assert num_entries("tsp", 4) == 16  # n*n directed edge slots
    assert num_entries("tsp", 10) == 100
    assert num_entries("mis", 4) == 4  # one per node
    assert num_entries("mis", 20) == 20
    with pytest.raises(ContractError):
        num_entries("qap", 4)
    with pytest.raises(ContractError):
        num_entries("tsp", 1)


def test_edge_slot_layout():
    n = 6
    slots = [edge_slot(i, j, n) for i in range(n) for j in range(n)]
    assert slots == list(range(num_entries("tsp", n)))
    assert edge_slot(2, 5, n) != edge_slot(5, 2, n)  # directed slots


def test_state_roundtrip_one_hot():
    sel = np.array([1, 0, 1, 1], dtype=np.uint8)
    s = DecisionState("mis", 4, sel)
    oh = s.one_hot()
    assert oh.shape == (4, 2)
    assert np.array_equal(oh[:, 1], sel.astype(oh.dtype))
    assert np.array_equal(oh.sum(axis=1), np.ones(4, dtype=oh.dtype))
    assert s.num_selected == 3


def test_state_equality():
    a = DecisionState("mis", 3, np.array([1, 0, 1], dtype=np.uint8))
    b = DecisionState("mis", 3, np.array([1, 0, 1], dtype=np.uint8))
    c = DecisionState("mis", 3, np.array([0, 0, 1], dtype=np.uint8))
    assert a == b
    assert a != c


def test_state_rejects_bad_values():
    with pytest.raises(ContractError):
        DecisionState("mis", 3, np.array([0, 2, 0], dtype=np.uint8))
    with pytest.raises(DimensionError):
        DecisionState("mis", 3, np.array([0, 1], dtype=np.uint8))


def test_field_bounds_and_selected_column():
    f = BernoulliField.from_selected("mis", 3, np.array([0.2, 0.5, 0.9]))
    assert f.probs.shape == (3, 2)
    assert np.allclose(f.probs.sum(axis=1), 1.0)
    assert np.allclose(f.selected, [0.2, 0.5, 0.9])
    with pytest.raises(ContractError):
        BernoulliField.from_selected("mis", 3, np.array([0.2, 1.5, 0.9]))


def test_field_rows_must_sum_to_one():
    bad = np.full((3, 2), 0.4)
    with pytest.raises(ContractError):
        BernoulliField("mis", 3, bad)


def test_field_uniform():
    f = BernoulliField.uniform("tsp", 4)
    assert f.probs.shape == (num_entries("tsp", 4), 2)
    assert np.all(f.probs == 0.5)


def test_solution_to_state_tsp():
    inst = make_corners()
    sol = tour_solution(inst, (0, 1, 2, 3))
    st = solution_to_state(inst, sol)
    assert st.kind == "tsp"
    assert st.num_selected == 8  # both directed slots for each of n tour edges
    for i, j in ((0, 1), (1, 2), (2, 3), (3, 0)):
        assert st.selected[edge_slot(i, j, 4)] == 1
        assert st.selected[edge_slot(j, i, 4)] == 1
    assert st.selected[edge_slot(0, 2, 4)] == 0
    assert st.selected[edge_slot(1, 3, 4)] == 0


def test_solution_to_state_mis():
    inst = make_path_graph(5)
    sol = mis_solution(inst, (0, 2, 4))
    st = solution_to_state(inst, sol)
    assert np.array_equal(st.selected, [1, 0, 1, 0, 1])
