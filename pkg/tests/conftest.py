"""Shared fixtures; the environment is pointed at a scratch data directory before app modules load."""

from __future__ import annotations

import os
import tempfile

os.environ.setdefault("MODSPACE_DATA_DIR", tempfile.mkdtemp(prefix="modspace-tests-"))
os.environ.setdefault("MODSPACE_LOG_JSON", "false")
os.environ.setdefault("MODSPACE_LOG_LEVEL", "WARNING")
os.environ.setdefault("MODSPACE_THREADS", "2")

import pytest  # noqa: E402

from app.corpus import make_function  # noqa: E402
from app.decomposition import Grid, SampledFunction  # noqa: E402
from app.ledger import RunLedger  # noqa: E402
from app.weight_core import WeightFunction, make_weight  # noqa: E402


@pytest.fixture(scope="session")
def grid() -> Grid:
    return Grid()


@pytest.fixture(scope="session")
def gevrey2() -> WeightFunction:
    return make_weight("gevrey:s=2")


@pytest.fixture(scope="session")
def loglog() -> WeightFunction:
    return make_weight("loglog")


@pytest.fixture(scope="session")
def gaussian(grid: Grid) -> SampledFunction:
    return make_function("gaussian:sigma=1", grid)


@pytest.fixture()
def ledger() -> RunLedger:
    store = RunLedger()
    store.reset()
    return store
