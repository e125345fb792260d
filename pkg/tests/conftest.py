"""Shared fixtures for the netinterf test suite."""

import os

import numpy as np
import pytest

from src.graph_core import from_dense
from src.services.data_service import Dataset
from src.services.simulation_service import ErrorSpec, generate_dgp
from src.utils.constants import TOY_DATA_DIR


@pytest.fixture
def three_node_graph():
    """Weighted undirected path 0 - 1 - 2 with degrees (1, 3, 2)."""
    return from_dense([[0, 1, 0], [1, 0, 2], [0, 2, 0]])


@pytest.fixture
def toy_paths():
    return {
        "units": os.path.join(TOY_DATA_DIR, "units.csv"),
        "edges": os.path.join(TOY_DATA_DIR, "edges.csv"),
    }


@pytest.fixture
def write_csv(tmp_path):
    """Write text to a file under tmp_path and return its path as a string."""

    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write


def noise_free(G, seed=0):
    """Dataset from the linear interference model with every error term zero."""
    rng = np.random.default_rng(seed)
    return generate_dgp(G.n, G, ErrorSpec("none"), rng)


def random_dataset(n, seed=0, covariates=2, treatment_effect=1.0):
    """Plain regression data without interference."""
    rng = np.random.default_rng(seed)
    L = rng.normal(size=(n, covariates))
    a = L @ np.linspace(0.5, 1.0, covariates) + rng.normal(size=n)
    y = treatment_effect * a + L.sum(axis=1) + rng.normal(size=n)
    return Dataset(y=y, a=a, L=L)


def ring_graph(n, width=1):
    """Undirected ring where each unit is tied to `width` neighbours on each side."""
    G = np.zeros((n, n))
    for i in range(n):
        for step in range(1, width + 1):
            G[i, (i + step) % n] = 1.0
            G[(i + step) % n, i] = 1.0
    return from_dense(G, directed=False)
