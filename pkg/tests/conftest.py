import json
from importlib import resources

import pytest

from dnti import netmodel as nm


def load_bundled(name: str) -> str:
    return resources.files("dnti").joinpath(f"data/{name}").read_text()


@pytest.fixture(scope="session")
def ieee33() -> nm.Network:
    return nm.load_network(load_bundled("ieee33.json"))


@pytest.fixture(scope="session")
def default_scenario_raw() -> dict:
    return json.loads(load_bundled("default_scenario.json"))


@pytest.fixture(scope="session")
def theorem1_scenario_raw() -> dict:
    return json.loads(load_bundled("theorem1_scenario.json"))


def make_net(n_nodes, edges, ties=(), pmus=(), name="test"):
    """Small network helper: edges as (u, v) pairs, branch ids 1..len(edges)."""
    branches = []
    for i, (u, v) in enumerate(edges, start=1):
        branches.append(
            {
                "id": i,
                "from": u,
                "to": v,
                "normally_closed": (u, v) not in ties and i not in ties,
                "pmu": i in pmus,
            }
        )
    return nm.load_network(json.dumps({"name": name, "nodes": n_nodes, "branches": branches}))
