import pathlib

import pytest
from hypothesis import settings

from clmmse.model import partition_label
from clmmse.riccati import build_tree
from clmmse.sweep import enumerate_partitions
from clmmse.systems import (four_mode_benchmark, four_mode_benchmark_scaled,
                            three_mode_random_walk)

settings.register_profile("suite", max_examples=25, deadline=None)
settings.load_profile("suite")

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def walk3():
    return three_mode_random_walk()


@pytest.fixture(scope="session")
def walk3_blind():
    # identical modes with L = 0: the optimal gains all vanish
    return three_mode_random_walk(l_gain=0.0)


@pytest.fixture(scope="session")
def bench():
    return four_mode_benchmark()


@pytest.fixture(scope="session")
def bench_scaled():
    return four_mode_benchmark_scaled()


@pytest.fixture(scope="session")
def partitions4():
    return enumerate_partitions(4)


@pytest.fixture(scope="session")
def bench_trees(bench, bench_scaled, partitions4):
    """Horizon-10 gain trees for every partition of both benchmarks,
    keyed by (model name, canonical label)."""
    out = {}
    for name, model in (("plain", bench), ("scaled", bench_scaled)):
        for cl in partitions4:
            out[name, partition_label(cl)] = build_tree(model, cl, 10)
    return out


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR
