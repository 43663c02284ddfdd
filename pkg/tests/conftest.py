import functools

import numpy as np
import pytest

from fermijet.catalog import default_cases, get_case
from fermijet.coords import FermiChart, GeodesicSolverConfig
from fermijet.geometry import adapted_frame


@functools.lru_cache(maxsize=None)
def built(name: str, **args):
    """(case, metric, sub, frame) for a catalog entry, cached across tests."""
    case = get_case(name, **args)
    g, sub = case.build()
    return case, g, sub, adapted_frame(g, sub, case.h)


@functools.lru_cache(maxsize=None)
def chart(name: str, order: int = 4, **args) -> FermiChart:
    case, g, sub, frame = built(name, **args)
    return FermiChart(g, sub, frame, GeodesicSolverConfig(), order)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ALL_CASES = {c.name: c for c in default_cases()}
