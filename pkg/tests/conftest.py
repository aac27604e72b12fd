"""Shared fixtures: the bundled synthetic suite and a small hand-built scene."""
from __future__ import annotations

import numpy as np
import pytest

from scenebench.geometry import Pose2D
from scenebench.scenario import ObjectState, ScenarioRecord, Track
from scenebench.synth import make_suite

EGO_HALF = (2.25, 0.9)


def _static_states(x: float, y: float, heading, half, horizon: int) -> list[ObjectState]:
    pose = Pose2D(np.array([x, y]), np.array(heading, dtype=float))
    return [ObjectState(pose, 0.0, np.array(half, dtype=float)) for _ in range(horizon)]


def build_toy_scenario(horizon: int = 31) -> ScenarioRecord:
    """Straight ego at 10 m/s plus three parked objects at known offsets.

    Layout (ego frame at step 0): a traffic cone front-right at (6, -2.5),
    an SUV front-left at (8, 4) facing +y, a sedan dead ahead at (15, 0).
    """
    ego_states = [
        ObjectState(
            Pose2D(np.array([float(k), 0.0]), np.array([1.0, 0.0])),
            10.0,
            np.array(EGO_HALF),
        )
        for k in range(horizon)
    ]
    tracks = [
        Track("ego", "sedan", 1.5, ego_states, color="white"),
        Track("car_a", "sedan", 1.5, _static_states(15.0, 0.0, (1, 0), (2.25, 0.9), horizon), color="red"),
        Track("car_b", "SUV", 1.8, _static_states(8.0, 4.0, (0, 1), (2.3, 1.0), horizon), color="blue"),
        Track("cone_c", "traffic_cone", 0.7, _static_states(6.0, -2.5, (1, 0), (0.2, 0.2), horizon)),
    ]
    drivable = [np.array([[-50.0, -8.0], [100.0, -8.0], [100.0, 8.0], [-50.0, 8.0]])]
    return ScenarioRecord(
        id="toy_001",
        dt=0.1,
        horizon=horizon,
        ego_id="ego",
        tracks=tracks,
        drivable=drivable,
        destination=np.array([float(horizon - 1), 0.0]),
        source_tag="sim",
    )


@pytest.fixture(scope="session")
def suite():
    return make_suite()


@pytest.fixture
def toy():
    return build_toy_scenario()
