import numpy as np
import pytest

from modeforge.network import load_network
from modeforge.synth import (
    SyntheticSpec,
    demo_network_polylines,
    generate_synthetic,
    mode_counts_from_mix,
    write_demo_networks,
)

SURVEY_MIX = {"Car": 19.3, "Bus": 15.9, "Metro": 52.9, "Walk": 11.9}


@pytest.fixture(scope="session")
def demo_network_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("networks")
    return write_demo_networks(out)


@pytest.fixture(scope="session")
def demo_networks(demo_network_dir):
    return (load_network(demo_network_dir["rail"], "rail"),
            load_network(demo_network_dir["bus"], "bus"),
            load_network(demo_network_dir["highway"], "highway"))


@pytest.fixture(scope="session")
def small_corpus():
    """300 synthetic trips with the survey mode mix, seed-pinned."""
    spec = SyntheticSpec(
        trips_per_mode=mode_counts_from_mix(300, SURVEY_MIX), seed=11)
    points, truths = generate_synthetic(spec, demo_network_polylines())
    return points, truths


def rand_latlon(rng: np.random.Generator, n: int = 1):
    lat = rng.uniform(-80, 80, n)
    lon = rng.uniform(-179, 179, n)
    return list(zip(lat.tolist(), lon.tolist()))
