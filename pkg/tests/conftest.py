"""Shared helpers for the test suite."""

import numpy as np
import pytest

from redwave.epidemic import RED, WHITE, Snapshot
from redwave.geometry import Region, build_cell_grid


def make_snapshot(positions, states, step=0):
    """A synthetic Snapshot with consistent bookkeeping arrays."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    st = np.asarray(states, dtype=np.int8)
    n = len(st)
    countdown = np.where(st == RED, 1, 0).astype(np.int32)
    informed_at = np.where(st == WHITE, -1, 0).astype(np.int64)
    return Snapshot(
        step=step,
        positions=pos,
        states=st,
        countdown=countdown,
        informed_at=informed_at,
        informer=np.full(n, -1, dtype=np.int64),
        chain_origin=pos.copy(),
    )


@pytest.fixture(scope="session")
def grid_15x15():
    """A full 15x15 cover (square of side 15 with unit cells)."""
    return build_cell_grid(Region.square(15.0), 1.0, gamma=1.0)


@pytest.fixture(scope="session")
def grid_4x4():
    return build_cell_grid(Region.square(12.0), 3.0, gamma=1.0)


@pytest.fixture(scope="session")
def disk_grid():
    return build_cell_grid(Region.disk(10.0), 3.0, gamma=1.0)
