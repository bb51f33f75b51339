"""Shared fixtures.

The expensive objects (the quantized channel and the two default region
sweeps) are session-scoped so the whole suite pays for them once.  The
default dual sweep used throughout is [0] followed by 40 log-spaced values
between 1e-2 and 1e6, matching the sweep the CLI runs.
"""

from __future__ import annotations

import numpy as np
import pytest

from oisac import (
    SystemParams,
    build_quantized_channel,
    cd_region,
    cost_vector,
)


def default_t_set() -> np.ndarray:
    return np.concatenate(([0.0], np.logspace(-2.0, 6.0, 40)))


@pytest.fixture(scope="session")
def params() -> SystemParams:
    return SystemParams()


@pytest.fixture(scope="session")
def channel(params):
    return build_quantized_channel(params)


@pytest.fixture(scope="session")
def bcrb_vec(params, channel):
    return cost_vector("bcrb", params, x_grid=channel.x_grid)


@pytest.fixture(scope="session")
def t_set() -> np.ndarray:
    return default_t_set()


@pytest.fixture(scope="session")
def baa_sweep(params, channel, bcrb_vec, t_set):
    """Full iterative-solver sweep at the default operating point (~1 min).

    The sweep itself returns boundary order (distortion ascending); the tests
    reason in dual order, so re-sort by t.
    """
    pts = cd_region(t_set, "baa", bcrb_vec.values, channel, params)
    return sorted(pts, key=lambda p: p.t)


@pytest.fixture(scope="session")
def cfa_sweep(params, channel, bcrb_vec, t_set):
    """Full closed-form-solver sweep at the default operating point."""
    pts = cd_region(t_set, "cfa", bcrb_vec.values, channel, params)
    return sorted(pts, key=lambda p: p.t)
