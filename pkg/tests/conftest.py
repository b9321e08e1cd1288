"""Shared fixtures: tiny instances and a fast trainable model config."""
from __future__ import annotations

import numpy as np
import pytest

from consolve.instances import Instance, generate
from consolve.network import GnnConfig, Model
from consolve.oracles import label


def make_corners() -> Instance:
    """Unit-square corners: optimal tour length is exactly 4.0."""
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return Instance("tsp", "corners", 4, coords=coords)


def make_path_graph(n: int = 5) -> Instance:
    """Path graph 0-1-2-...-(n-1); its maximum independent set has ceil(n/2) nodes."""
    edges = tuple((i, i + 1) for i in range(n - 1))
    return Instance("mis", f"path{n}", n, edges=edges)


def tiny_gnn(kind: str) -> GnnConfig:
    return GnnConfig(kind, n_layers=2, hidden_dim=16, time_dim=8)


def tiny_model(kind: str, seed: int = 0, horizon: int = 64) -> Model:
    from consolve import rng as rngmod
    from consolve.diffusion import make_schedule
    from consolve.network import init_params

    cfg = tiny_gnn(kind)
    params = init_params(cfg, rngmod.stream(seed, rngmod.TRAIN, 0))
    return Model(cfg, params, make_schedule(horizon))


@pytest.fixture(scope="session")
def corners() -> Instance:
    return make_corners()


@pytest.fixture(scope="session")
def path5() -> Instance:
    return make_path_graph(5)


@pytest.fixture(scope="session")
def tsp_batch():
    return label(generate("tsp", 6, 8, seed=1234))


@pytest.fixture(scope="session")
def mis_batch():
    return label(generate("mis", 8, 8, seed=1234))
