"""Exact solvers cross-checked against exhaustive enumeration."""
import numpy as np
import pytest

from consolve.errors import ContractError, SizeLimitError
from consolve.instances import Instance, generate
from consolve.objectives import canonical_tour, validate_members, validate_tour
from consolve.oracles import (
    held_karp,
    label,
    mis_branch_and_bound,
    mis_enumerate,
    oracle_solve,
    tsp_brute_force,
)

from conftest import make_corners, make_path_graph


def test_held_karp_corners():
    sol = held_karp(make_corners())
    assert sol.objective == pytest.approx(4.0)
    assert canonical_tour(sol.tour) == canonical_tour((0, 1, 2, 3))


def test_held_karp_matches_brute_force_small():
    for inst in generate("tsp", 7, 20, seed=31):
        hk = held_karp(inst)
        bf = tsp_brute_force(inst)
        assert hk.objective == pytest.approx(bf.objective, abs=1e-9)
        validate_tour(inst, hk.tour)


def test_mis_bnb_matches_enumeration_small():
    for inst in generate("mis", 12, 20, seed=32, er_edge_prob=0.2):
        a = mis_branch_and_bound(inst)
        b = mis_enumerate(inst)
        assert a.size == b.size
        validate_members(inst, a.members)


def test_mis_path_graph_closed_form():
    for n in range(2, 10):
        inst = make_path_graph(n)
        assert mis_branch_and_bound(inst).size == (n + 1) // 2


def test_mis_complete_graph():
    n = 6
    edges = tuple((i, j) for i in range(n) for j in range(i + 1, n))
    inst = Instance("mis", "k6", n, edges=edges)
    assert mis_branch_and_bound(inst).size == 1


def test_mis_empty_graph():
    inst = Instance("mis", "e5", 5, edges=())
    sol = mis_branch_and_bound(inst)
    assert sol.size == 5
    assert sol.objective == pytest.approx(-5.0)


def test_oracle_solve_dispatch():
    assert oracle_solve(make_corners()).kind == "tsp"
    assert oracle_solve(make_path_graph(4)).kind == "mis"


def test_label_attaches_solutions():
    samples = label(generate("tsp", 5, 3, seed=33))
    for s in samples:
        assert s.solution is not None
        assert s.solution.objective > 0


def test_label_is_idempotent_input():
    insts = generate("mis", 6, 2, seed=34)
    first = label(insts)
    second = label([s.instance for s in first])
    for a, b in zip(first, second):
        assert a.solution.objective == b.solution.objective


def test_oracle_size_limits():
    big_tsp = generate("tsp", 3, 1, seed=1)[0]
    # the guards exist to stop runaway exact solves; probe the documented caps
    with pytest.raises((ContractError, SizeLimitError)):
        coords = np.random.default_rng(0).random((25, 2))
        held_karp(Instance("tsp", "big", 25, coords=coords))
    assert held_karp(big_tsp).objective > 0
