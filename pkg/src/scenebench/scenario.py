"""Scenario corpus: schema types, JSON (de)serialization, and frame access.

A scenario is a fixed-step log (dt = 0.1 s) of object tracks over a map of
drivable polygons, with a designated ego track and a navigation destination.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Pose2D, obb_corners, polygon_is_simple

DT = 0.1
HEADING_TOL = 1e-9

KINDS = (
    "sedan",
    "SUV",
    "pickup",
    "truck",
    "bus",
    "pedestrian",
    "cyclist",
    "motorcycle",
    "traffic_cone",
    "barrier",
)
COLORS = ("white", "black", "gray", "red", "blue", "green", "yellow", "orange")
SOURCE_TAGS = ("sim", "real", "synthetic")

VEHICLE_KINDS = ("sedan", "SUV", "pickup", "truck", "bus", "motorcycle")
STATIC_KINDS = ("traffic_cone", "barrier")


class ScenarioError(Exception):
    """Base class for scenario load/validation failures."""


class SchemaError(ScenarioError):
    """Structural problem in a scenario file; carries the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class InvariantError(ScenarioError):
    """Well-formed file whose content violates a semantic invariant."""


class OutOfRange(ScenarioError, IndexError):
    """Step index outside [0, horizon)."""


@dataclass
class ObjectState:
    """State of one object at one step."""

    pose: Pose2D
    speed: float
    half_extents: np.ndarray  # (half_length, half_width) in meters
    valid: bool = True

    def corners(self) -> np.ndarray:
        return obb_corners(self.pose.position, self.pose.heading, self.half_extents)


@dataclass
class Track:
    id: str
    kind: str
    height: float
    states: list[ObjectState]
    color: str | None = None


@dataclass
class ScenarioRecord:
    """Immutable-by-convention scenario log."""

    id: str
    dt: float
    horizon: int
    ego_id: str
    tracks: list[Track]
    drivable: list[np.ndarray]
    destination: np.ndarray
    source_tag: str

    def track(self, track_id: str) -> Track:
        for t in self.tracks:
            if t.id == track_id:
                return t
        raise KeyError(track_id)

    @property
    def ego(self) -> Track:
        return self.track(self.ego_id)


@dataclass
class FrameSnapshot:
    """All objects at one step: the ego plus every valid non-ego object."""

    step: int
    ego_track: Track
    ego_state: ObjectState
    objects: list[tuple[Track, ObjectState]]


def frame_at(scenario: ScenarioRecord, step: int) -> FrameSnapshot:
    """Snapshot of the scenario at a step; non-ego objects respect the valid flag."""
    if not 0 <= step < scenario.horizon:
        raise OutOfRange(f"step {step} outside [0, {scenario.horizon})")
    ego = scenario.ego
    objects = []
    for track in scenario.tracks:
        if track.id == scenario.ego_id:
            continue
        state = track.states[step]
        if state.valid:
            objects.append((track, state))
    return FrameSnapshot(step, ego, ego.states[step], objects)


# ---------- JSON I/O ----------


def _reject_constant(name: str):
    raise SchemaError("$", f"non-finite number literal {name!r} is not allowed")


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return obj[key]


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise SchemaError(path, "number must be finite")
    return float(value)


def _as_str(value, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(path, f"expected a string, got {type(value).__name__}")
    return value


def _parse_state(obj, path: str) -> ObjectState:
    if not isinstance(obj, dict):
        raise SchemaError(path, "state must be an object")
    x = _as_number(_need(obj, "x", path), f"{path}.x")
    y = _as_number(_need(obj, "y", path), f"{path}.y")
    hx = _as_number(_need(obj, "hx", path), f"{path}.hx")
    hy = _as_number(_need(obj, "hy", path), f"{path}.hy")
    speed = _as_number(_need(obj, "speed", path), f"{path}.speed")
    length = _as_number(_need(obj, "len", path), f"{path}.len")
    width = _as_number(_need(obj, "wid", path), f"{path}.wid")
    valid = _need(obj, "valid", path)
    if not isinstance(valid, bool):
        raise SchemaError(f"{path}.valid", "expected a boolean")
    norm = math.hypot(hx, hy)
    if abs(norm - 1.0) > HEADING_TOL:
        raise InvariantError(f"{path}: heading norm {norm!r} must be 1 within {HEADING_TOL}")
    if length <= 0 or width <= 0:
        raise InvariantError(f"{path}: len and wid must be positive")
    if speed < 0:
        raise InvariantError(f"{path}: speed must be non-negative")
    pose = Pose2D(np.array([x, y]), np.array([hx, hy]))
    return ObjectState(pose, speed, np.array([length / 2.0, width / 2.0]), valid)


def _parse_track(obj, horizon: int, path: str) -> Track:
    if not isinstance(obj, dict):
        raise SchemaError(path, "track must be an object")
    tid = _as_str(_need(obj, "id", path), f"{path}.id")
    kind = _as_str(_need(obj, "kind", path), f"{path}.kind")
    if kind not in KINDS:
        raise SchemaError(f"{path}.kind", f"unknown kind {kind!r}")
    color = obj.get("color")
    if color is not None:
        color = _as_str(color, f"{path}.color")
        if color not in COLORS:
            raise SchemaError(f"{path}.color", f"unknown color {color!r}")
    height = _as_number(_need(obj, "height", path), f"{path}.height")
    if height <= 0:
        raise InvariantError(f"{path}: height must be positive")
    states_raw = _need(obj, "states", path)
    if not isinstance(states_raw, list):
        raise SchemaError(f"{path}.states", "expected a list")
    states = [_parse_state(s, f"{path}.states[{i}]") for i, s in enumerate(states_raw)]
    if len(states) != horizon:
        raise InvariantError(
            f"{path}: track has {len(states)} states but horizon is {horizon}"
        )
    return Track(tid, kind, height, states, color)


def scenario_from_dict(obj: dict) -> ScenarioRecord:
    if not isinstance(obj, dict):
        raise SchemaError("$", "scenario must be a JSON object")
    sid = _as_str(_need(obj, "id", "$"), "$.id")
    dt = _as_number(_need(obj, "dt", "$"), "$.dt")
    horizon = _need(obj, "horizon", "$")
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise SchemaError("$.horizon", "expected an integer")
    ego_id = _as_str(_need(obj, "ego_id", "$"), "$.ego_id")
    tracks_raw = _need(obj, "tracks", "$")
    if not isinstance(tracks_raw, list):
        raise SchemaError("$.tracks", "expected a list")
    source_tag = _as_str(_need(obj, "source_tag", "$"), "$.source_tag")
    if source_tag not in SOURCE_TAGS:
        raise SchemaError("$.source_tag", f"unknown source tag {source_tag!r}")

    if abs(dt - DT) > 1e-12:
        raise InvariantError(f"dt must be {DT}, got {dt}")
    if horizon < 1:
        raise InvariantError(f"horizon must be >= 1, got {horizon}")

    tracks = [_parse_track(t, horizon, f"$.tracks[{i}]") for i, t in enumerate(tracks_raw)]
    seen: set[str] = set()
    for i, t in enumerate(tracks):
        if t.id in seen:
            raise SchemaError(f"$.tracks[{i}].id", f"duplicate track id {t.id!r}")
        seen.add(t.id)
    if ego_id not in seen:
        raise InvariantError(f"ego_id {ego_id!r} does not match any track")

    drivable_raw = _need(obj, "drivable", "$")
    if not isinstance(drivable_raw, list):
        raise SchemaError("$.drivable", "expected a list of polygons")
    drivable = []
    for i, poly in enumerate(drivable_raw):
        if not isinstance(poly, list) or len(poly) < 3:
            raise SchemaError(f"$.drivable[{i}]", "polygon needs at least 3 vertices")
        pts = []
        for j, pt in enumerate(poly):
            if not isinstance(pt, list) or len(pt) != 2:
                raise SchemaError(f"$.drivable[{i}][{j}]", "vertex must be [x, y]")
            pts.append(
                [
                    _as_number(pt[0], f"$.drivable[{i}][{j}][0]"),
                    _as_number(pt[1], f"$.drivable[{i}][{j}][1]"),
                ]
            )
        arr = np.array(pts)
        if not polygon_is_simple(arr):
            raise InvariantError(f"$.drivable[{i}]: polygon must be simple")
        drivable.append(arr)

    dest_raw = _need(obj, "destination", "$")
    if not isinstance(dest_raw, list) or len(dest_raw) != 2:
        raise SchemaError("$.destination", "expected [x, y]")
    destination = np.array(
        [
            _as_number(dest_raw[0], "$.destination[0]"),
            _as_number(dest_raw[1], "$.destination[1]"),
        ]
    )

    return ScenarioRecord(sid, dt, horizon, ego_id, tracks, drivable, destination, source_tag)


def scenario_to_dict(s: ScenarioRecord) -> dict:
    return {
        "id": s.id,
        "dt": s.dt,
        "horizon": s.horizon,
        "ego_id": s.ego_id,
        "tracks": [
            {
                "id": t.id,
                "kind": t.kind,
                **({"color": t.color} if t.color is not None else {}),
                "height": t.height,
                "states": [
                    {
                        "x": float(st.pose.position[0]),
                        "y": float(st.pose.position[1]),
                        "hx": float(st.pose.heading[0]),
                        "hy": float(st.pose.heading[1]),
                        "speed": float(st.speed),
                        "len": float(st.half_extents[0] * 2.0),
                        "wid": float(st.half_extents[1] * 2.0),
                        "valid": st.valid,
                    }
                    for st in t.states
                ],
            }
            for t in s.tracks
        ],
        "drivable": [[[float(x), float(y)] for x, y in poly] for poly in s.drivable],
        "destination": [float(s.destination[0]), float(s.destination[1])],
        "source_tag": s.source_tag,
    }


def load_scenario(path: str | Path) -> ScenarioRecord:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from exc
    return scenario_from_dict(obj)


def save_scenario(s: ScenarioRecord, path: str | Path) -> None:
    """Write the canonical JSON form (stable key order, two-space indent)."""
    Path(path).write_text(
        json.dumps(scenario_to_dict(s), indent=2) + "\n", encoding="utf-8"
    )


def load_scenario_dir(directory: str | Path) -> list[ScenarioRecord]:
    """Load every *.json scenario in a directory, sorted by file name."""
    paths = sorted(Path(directory).glob("*.json"))
    return [load_scenario(p) for p in paths]
