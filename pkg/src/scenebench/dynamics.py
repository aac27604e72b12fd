"""Ego vehicle dynamics: action mapping, kinematic bicycle stepping, and
greedy reconstruction of catalog actions from recorded trajectories.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D, check_box, rot90ccw
from .scenario import DT


class OutOfRange(ValueError):
    """Normalized action component outside [-1, 1]."""


class UnknownAction(KeyError):
    """Action name missing from the catalog."""


class TooShort(ValueError):
    """Trajectory too short for the requested operation."""


@dataclass(frozen=True)
class VehicleParams:
    """Control limits and body constants for the kinematic bicycle model.

    accel_mps2 / brake_mps2 set how many m/s^2 full throttle / full brake
    produce, which fixes the gains that convert raw engine and brake
    commands into accelerations.
    """

    s_max_deg: float = 40.0
    f_max: float = 200.0
    b_max: float = 200.0
    wheelbase_m: float = 2.8
    v_max_mps: float = 25.0
    accel_mps2: float = 4.0
    brake_mps2: float = 8.0
    drag_per_s: float = 0.05

    @property
    def k_accel(self) -> float:
        return self.accel_mps2 / self.f_max

    @property
    def k_brake(self) -> float:
        return self.brake_mps2 / self.b_max


@dataclass(frozen=True)
class ControlSignal:
    """Physical control: steering in degrees plus engine/brake commands.

    At most one of engine and brake is non-zero.
    """

    steer_deg: float
    engine: float
    brake: float


@dataclass(frozen=True)
class EgoState:
    pose: Pose2D
    speed: float


@dataclass
class ActionCatalog:
    """Named normalized actions in declaration order.

    Declaration order matters: reconstruction breaks ties by it.
    """

    actions: dict[str, tuple[float, float]]

    def __post_init__(self) -> None:
        if "KEEP_STRAIGHT" not in self.actions:
            raise ValueError("catalog must define KEEP_STRAIGHT")
        for name, (a1, a2) in self.actions.items():
            if abs(a1) > 1.0 or abs(a2) > 1.0:
                raise OutOfRange(f"{name}: components must lie in [-1, 1]")

    def names(self) -> list[str]:
        return list(self.actions)

    def get(self, name: str) -> tuple[float, float]:
        try:
            return self.actions[name]
        except KeyError:
            raise UnknownAction(name) from None


def default_catalog() -> ActionCatalog:
    return ActionCatalog(
        {
            "TURN_LEFT": (0.5, 0.0),
            "TURN_RIGHT": (-0.5, 0.0),
            "KEEP_STRAIGHT": (0.0, 0.0),
            "SPEED_UP": (0.0, 0.6),
            "BRAKE": (0.0, -0.6),
            "BIG_LEFT": (1.0, 0.0),
            "BIG_RIGHT": (-1.0, 0.0),
            "STOP": (0.0, -1.0),
        }
    )


def map_action(action: tuple[float, float], params: VehicleParams) -> ControlSignal:
    """Normalized action [a1, a2] -> physical control signal.

    Steering scales linearly with a1; positive a2 drives the engine and
    negative a2 drives the brake, so the two are mutually exclusive.
    """
    a1, a2 = float(action[0]), float(action[1])
    if abs(a1) > 1.0 or abs(a2) > 1.0:
        raise OutOfRange(f"action components must lie in [-1, 1], got {(a1, a2)}")
    steer = params.s_max_deg * a1
    engine = params.f_max * max(0.0, a2)
    brake = -params.b_max * min(0.0, a2)
    return ControlSignal(steer, engine, brake)


def step(state: EgoState, control: ControlSignal, params: VehicleParams, dt: float = DT) -> EgoState:
    """Advance one step of the kinematic bicycle model.

    Speed integrates engine, brake, and linear drag, clamped to
    [0, v_max].  The heading rotates by (speed / wheelbase) * tan(steer)
    * dt using the pre-update speed, then the position advances by the
    new speed along the new heading.
    """
    accel = (
        params.k_accel * control.engine
        - params.k_brake * control.brake
        - params.drag_per_s * state.speed
    )
    new_speed = min(max(state.speed + accel * dt, 0.0), params.v_max_mps)
    dtheta = (state.speed / params.wheelbase_m) * math.tan(math.radians(control.steer_deg)) * dt
    c, s = math.cos(dtheta), math.sin(dtheta)
    h = state.pose.heading
    new_heading = np.array([c * h[0] - s * h[1], s * h[0] + c * h[1]])
    new_heading = new_heading / math.hypot(new_heading[0], new_heading[1])
    new_position = state.pose.position + new_speed * dt * new_heading
    return EgoState(Pose2D(new_position, new_heading), new_speed)


def rollout(
    state: EgoState,
    action: tuple[float, float],
    n_steps: int,
    params: VehicleParams,
    dt: float = DT,
) -> list[EgoState]:
    """Apply one fixed action for n_steps; returns n_steps + 1 states
    starting with the given state."""
    control = map_action(action, params)
    states = [state]
    for _ in range(n_steps):
        state = step(state, control, params, dt)
        states.append(state)
    return states


# ---------- oriented-box overlap ----------


def obb_overlap(corners_a: np.ndarray, corners_b: np.ndarray) -> bool:
    """Separating-axis overlap test for two oriented boxes.

    Touching boxes count as overlapping (separation must be strict).
    """
    a = check_box(corners_a)
    b = check_box(corners_b)
    for box in (a, b):
        for i in range(2):
            edge = box[i + 1] - box[i]
            axis = rot90ccw(edge)
            pa = a @ axis
            pb = b @ axis
            if pb.min() > pa.max() or pa.min() > pb.max():
                return False
    return True


# ---------- greedy action reconstruction ----------

DECISION_STEPS = 5


@dataclass
class ReconstructionResult:
    actions: list[str]
    mean_deviation_m: float
    max_deviation_m: float
    simulated: list[EgoState]


def reconstruct_actions(
    initial: EgoState,
    positions: np.ndarray,
    catalog: ActionCatalog,
    params: VehicleParams,
    dt: float = DT,
) -> ReconstructionResult:
    """Greedy autoregressive fit of catalog actions to a recorded trajectory.

    positions holds recorded ego centers at dt spacing, positions[0] being
    the pose the initial state describes.  Every DECISION_STEPS steps the
    catalog action whose DECISION_STEPS-step rollout lands closest to the
    recorded position is chosen (ties break on declaration order), and the
    chosen rollout becomes the state the next segment continues from.
    """
    positions = np.asarray(positions, dtype=float)
    if len(positions) < DECISION_STEPS + 1:
        raise TooShort(
            f"need at least {DECISION_STEPS + 1} recorded positions, got {len(positions)}"
        )
    n_segments = (len(positions) - 1) // DECISION_STEPS
    state = initial
    actions: list[str] = []
    deviations: list[float] = []
    simulated = [state]
    for seg in range(n_segments):
        target = positions[(seg + 1) * DECISION_STEPS]
        best_name = None
        best_dev = math.inf
        best_states: list[EgoState] = []
        for name, action in catalog.actions.items():
            states = rollout(state, action, DECISION_STEPS, params, dt)
            dev = float(np.hypot(*(states[-1].pose.position - target)))
            if dev < best_dev:
                best_name, best_dev, best_states = name, dev, states
        actions.append(best_name)
        deviations.append(best_dev)
        simulated.extend(best_states[1:])
        state = best_states[-1]
    return ReconstructionResult(
        actions,
        float(np.mean(deviations)),
        float(np.max(deviations)),
        simulated,
    )
