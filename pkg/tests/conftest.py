from __future__ import annotations

import numpy as np
import pytest

import graphskel as gs


@pytest.fixture(scope="session")
def fixture_spec():
    return gs.builtin_fixture()


@pytest.fixture(scope="session")
def fixture_cloud(fixture_spec):
    return gs.sample_graph(fixture_spec, gs.SampleSpec(eps=0.1, seed=1))


@pytest.fixture(scope="session")
def ratio8_config():
    return gs.ReconstructionConfig(R=0.8, eps=0.1)


@pytest.fixture(scope="session")
def ratio8_recovery(fixture_cloud, ratio8_config):
    """(graph, refined, partition) for the fixture cloud at ratio 8."""
    return gs.recover_graph(fixture_cloud, ratio8_config)


def random_cloud(rng: np.random.Generator, n: int, dim: int, scale: float = 1.0) -> gs.PointCloud:
    return gs.PointCloud(rng.normal(size=(n, dim)) * scale)
