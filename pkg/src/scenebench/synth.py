"""Deterministic synthetic scenario layouts.

Each layout builds a small driving scene from a seed; the ego log is
synthesized by rolling the kinematic bicycle model through catalog
actions, so recorded ego trajectories are exactly reproducible by action
reconstruction.
"""
from __future__ import annotations

import math
import random

import numpy as np

from .dynamics import ActionCatalog, EgoState, VehicleParams, default_catalog, map_action, step
from .geometry import Pose2D, unit
from .scenario import DT, ObjectState, ScenarioRecord, Track

LAYOUTS = ("straight_road", "intersection", "cut_in", "obstacle_field")

KIND_DIMS = {
    "sedan": (4.6, 1.9, 1.45),
    "SUV": (4.8, 2.0, 1.75),
    "pickup": (5.4, 2.0, 1.85),
    "truck": (8.5, 2.5, 3.2),
    "bus": (11.0, 2.9, 3.1),
    "pedestrian": (0.5, 0.5, 1.75),
    "cyclist": (1.8, 0.6, 1.7),
    "motorcycle": (2.1, 0.8, 1.3),
    "traffic_cone": (0.35, 0.35, 0.7),
    "barrier": (2.0, 0.5, 1.05),
}

CAR_KINDS = ("sedan", "SUV", "pickup")
CAR_COLORS = ("white", "black", "gray", "red", "blue", "green", "yellow", "orange")


class UnknownLayout(KeyError):
    pass


def _static_states(x: float, y: float, heading, horizon: int, kind: str) -> list[ObjectState]:
    length, width, _ = KIND_DIMS[kind]
    pose = Pose2D(np.array([x, y]), unit(np.asarray(heading, dtype=float)))
    return [
        ObjectState(pose, 0.0, np.array([length / 2, width / 2]), True) for _ in range(horizon)
    ]


def _linear_states(
    start, heading, speed: float, horizon: int, kind: str
) -> list[ObjectState]:
    length, width, _ = KIND_DIMS[kind]
    h = unit(np.asarray(heading, dtype=float))
    p0 = np.asarray(start, dtype=float)
    half = np.array([length / 2, width / 2])
    return [
        ObjectState(Pose2D(p0 + h * speed * (k * DT), h), speed, half.copy(), True)
        for k in range(horizon)
    ]


def _path_states(positions: np.ndarray, horizon: int, kind: str) -> list[ObjectState]:
    """Track states following a hand-built position path; headings come
    from finite differences."""
    length, width, _ = KIND_DIMS[kind]
    half = np.array([length / 2, width / 2])
    states = []
    for k in range(horizon):
        p = positions[k]
        if k + 1 < len(positions):
            d = positions[k + 1] - p
        else:
            d = p - positions[k - 1]
        n = math.hypot(d[0], d[1])
        h = unit(d) if n > 1e-9 else states[-1].pose.heading
        states.append(ObjectState(Pose2D(p.copy(), h), n / DT, half.copy(), True))
    return states


def _ego_states_from_actions(
    start,
    heading,
    speed: float,
    actions: list[str],
    horizon: int,
    kind: str = "sedan",
    catalog: ActionCatalog | None = None,
    params: VehicleParams | None = None,
) -> list[ObjectState]:
    """Roll catalog actions (one per 5 steps) into an ego track log."""
    catalog = catalog or default_catalog()
    params = params or VehicleParams()
    length, width, _ = KIND_DIMS[kind]
    half = np.array([length / 2, width / 2])
    state = EgoState(Pose2D(np.asarray(start, dtype=float), unit(np.asarray(heading, dtype=float))), speed)
    states = [ObjectState(state.pose, state.speed, half.copy(), True)]
    for k in range(horizon - 1):
        name = actions[min(k // 5, len(actions) - 1)]
        control = map_action(catalog.get(name), params)
        state = step(state, control, params)
        states.append(ObjectState(state.pose, state.speed, half.copy(), True))
    return states


def _track(tid: str, kind: str, states: list[ObjectState], color: str | None = None) -> Track:
    return Track(tid, kind, KIND_DIMS[kind][2], states, color)


def _rect(x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])


def _straight_road(seed: int) -> ScenarioRecord:
    rng = random.Random(f"straight_road:{seed}")
    horizon = 81
    v0 = rng.uniform(8.0, 12.0)
    ego_states = _ego_states_from_actions((0.0, 0.0), (1.0, 0.0), v0, ["KEEP_STRAIGHT"] * 16, horizon)
    tracks = [_track("ego", "sedan", ego_states, "gray")]

    n_parked = rng.randint(2, 4)
    for i in range(n_parked):
        x = rng.uniform(12.0, 70.0)
        y = rng.choice([-5.4, 5.4])
        kind = rng.choice(CAR_KINDS)
        tracks.append(
            _track(f"parked_{i}", kind, _static_states(x, y, (1.0, 0.0), horizon, kind), rng.choice(CAR_COLORS))
        )
    n_cones = rng.randint(1, 3)
    for i in range(n_cones):
        x = rng.uniform(8.0, 60.0)
        y = rng.uniform(2.8, 3.4)
        tracks.append(_track(f"cone_{i}", "traffic_cone", _static_states(x, y, (1.0, 0.0), horizon, "traffic_cone")))
    oncoming_kind = rng.choice(CAR_KINDS)
    tracks.append(
        _track(
            "oncoming",
            oncoming_kind,
            _linear_states((rng.uniform(60.0, 90.0), 4.3), (-1.0, 0.0), rng.uniform(6.0, 9.0), horizon, oncoming_kind),
            rng.choice(CAR_COLORS),
        )
    )

    return ScenarioRecord(
        id=f"straight_road_{seed:03d}",
        dt=DT,
        horizon=horizon,
        ego_id="ego",
        tracks=tracks,
        drivable=[_rect(-15.0, -7.5, 260.0, 7.5)],
        destination=ego_states[-1].pose.position.copy(),
        source_tag="synthetic",
    )


def _cut_in(seed: int) -> ScenarioRecord:
    rng = random.Random(f"cut_in:{seed}")
    horizon = 81
    v0 = rng.uniform(7.0, 9.0)
    ego_states = _ego_states_from_actions((0.0, 0.0), (1.0, 0.0), v0, ["KEEP_STRAIGHT"] * 16, horizon)
    tracks = [_track("ego", "sedan", ego_states, "gray")]

    # The cutter starts in the adjacent lane ahead and merges across the
    # ego path between t0 and t1 with a smoothstep lateral profile.
    cutter_speed = v0 + rng.uniform(1.5, 3.0)
    x0 = rng.uniform(14.0, 20.0)
    y_from, y_to = 3.5, -0.4
    t0, t1 = rng.uniform(0.6, 1.2), rng.uniform(2.6, 3.4)
    positions = []
    for k in range(horizon):
        t = k * DT
        x = x0 + cutter_speed * t
        if t <= t0:
            y = y_from
        elif t >= t1:
            y = y_to
        else:
            s = (t - t0) / (t1 - t0)
            y = y_from + (y_to - y_from) * (3 * s * s - 2 * s * s * s)
        positions.append([x, y])
    cutter_kind = rng.choice(CAR_KINDS)
    tracks.append(_track("cutter", cutter_kind, _path_states(np.array(positions), horizon, cutter_kind), rng.choice(CAR_COLORS)))

    for i in range(rng.randint(1, 2)):
        x = rng.uniform(25.0, 60.0)
        tracks.append(_track(f"cone_{i}", "traffic_cone", _static_states(x, -3.1, (1.0, 0.0), horizon, "traffic_cone")))

    return ScenarioRecord(
        id=f"cut_in_{seed:03d}",
        dt=DT,
        horizon=horizon,
        ego_id="ego",
        tracks=tracks,
        drivable=[_rect(-15.0, -7.5, 220.0, 7.5)],
        destination=ego_states[-1].pose.position.copy(),
        source_tag="synthetic",
    )


def _intersection(seed: int) -> ScenarioRecord:
    rng = random.Random(f"intersection:{seed}")
    horizon = 61
    v0 = rng.uniform(6.5, 7.5)
    ego_states = _ego_states_from_actions((-30.0, 0.0), (1.0, 0.0), v0, ["KEEP_STRAIGHT"] * 12, horizon)
    tracks = [_track("ego", "sedan", ego_states, "gray")]

    crosser_kind = rng.choice(CAR_KINDS)
    crosser_start_y = -45.0 + rng.uniform(-1.0, 1.0)
    tracks.append(
        _track(
            "crosser",
            crosser_kind,
            _linear_states((3.5, crosser_start_y), (0.0, 1.0), 8.0, horizon, crosser_kind),
            rng.choice(CAR_COLORS),
        )
    )
    walker_x = rng.uniform(-12.0, -8.0)
    tracks.append(
        _track("walker", "pedestrian", _linear_states((walker_x, 9.0), (0.0, -1.0), 1.4, horizon, "pedestrian"))
    )
    for i in range(rng.randint(1, 2)):
        kind = rng.choice(CAR_KINDS)
        x = rng.uniform(10.0, 30.0)
        tracks.append(_track(f"waiting_{i}", kind, _static_states(x, -4.0, (-1.0, 0.0), horizon, kind), rng.choice(CAR_COLORS)))

    return ScenarioRecord(
        id=f"intersection_{seed:03d}",
        dt=DT,
        horizon=horizon,
        ego_id="ego",
        tracks=tracks,
        drivable=[_rect(-70.0, -7.5, 70.0, 7.5), _rect(-7.5, -70.0, 7.5, 70.0)],
        destination=ego_states[-1].pose.position.copy(),
        source_tag="synthetic",
    )


def _obstacle_field(seed: int) -> ScenarioRecord:
    rng = random.Random(f"obstacle_field:{seed}")
    horizon = 61
    actions = ["SPEED_UP"] * 4 + ["KEEP_STRAIGHT"] * 8
    ego_states = _ego_states_from_actions((0.0, 0.0), (1.0, 0.0), 0.0, actions, horizon)
    tracks = [_track("ego", "sedan", ego_states, "gray")]

    n_obstacles = rng.randint(9, 13)
    placed = 0
    while placed < n_obstacles:
        x = rng.uniform(8.0, 110.0)
        y = rng.uniform(-12.0, 12.0)
        if abs(y) < 2.2:
            continue
        kind = rng.choice(["traffic_cone", "traffic_cone", "barrier"])
        heading = (1.0, 0.0) if kind == "traffic_cone" else (0.0, 1.0)
        tracks.append(_track(f"obstacle_{placed}", kind, _static_states(x, y, heading, horizon, kind)))
        placed += 1
    tracks.append(
        _track("walker", "pedestrian", _linear_states((60.0, -10.0), (0.0, 1.0), 1.4, horizon, "pedestrian"))
    )

    return ScenarioRecord(
        id=f"obstacle_field_{seed:03d}",
        dt=DT,
        horizon=horizon,
        ego_id="ego",
        tracks=tracks,
        drivable=[_rect(-15.0, -16.0, 130.0, 16.0)],
        destination=ego_states[-1].pose.position.copy(),
        source_tag="synthetic",
    )


_BUILDERS = {
    "straight_road": _straight_road,
    "intersection": _intersection,
    "cut_in": _cut_in,
    "obstacle_field": _obstacle_field,
}


def synth_scenario(layout: str, seed: int) -> ScenarioRecord:
    """Build one synthetic scenario; deterministic in (layout, seed)."""
    try:
        builder = _BUILDERS[layout]
    except KeyError:
        raise UnknownLayout(layout) from None
    return builder(seed)


SUITE_SPECS = (
    ("straight_road", 1),
    ("straight_road", 2),
    ("straight_road", 3),
    ("cut_in", 1),
    ("cut_in", 2),
    ("cut_in", 3),
    ("intersection", 1),
    ("intersection", 2),
    ("obstacle_field", 1),
    ("obstacle_field", 2),
)


def make_suite() -> list[ScenarioRecord]:
    """The bundled ten-scenario evaluation suite."""
    return [synth_scenario(layout, seed) for layout, seed in SUITE_SPECS]
