"""Closed-loop driving evaluation.

An agent sees an annotated frame every five simulation steps (0.5 s),
picks one catalog action, and the bicycle model applies it while the
other tracks replay their logs.  Episodes end at the horizon or when the
ego center leaves every drivable polygon; collisions are recorded but do
not terminate.  Aggregate metrics: route completion, off-road rate,
collision rate, ADE, FDE, parse-failure rate.
"""
from __future__ import annotations

import base64
import json
import random
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import requests

from .annotate import annotate_frame
from .dynamics import (
    DECISION_STEPS,
    ActionCatalog,
    EgoState,
    VehicleParams,
    default_catalog,
    map_action,
    obb_overlap,
    step as dynamics_step,
)
from .geometry import obb_corners, point_in_polygon, polyline_length, to_ego_frame
from .projection import DRIVE_CAMERA, CameraRig
from .qa.parsing import ParseFailure, parse_response
from .scenario import FrameSnapshot, ObjectState, ScenarioRecord, frame_at
from .scenegraph import DEFAULT_VISIBILITY, DEFAULT_VOCAB, VisibilityPolicy, VocabConfig

FALLBACK_ACTION = "KEEP_STRAIGHT"

NAV_TEMPLATE = "your final destination is at {dist} distance to {pos} at this moment."


class AgentUnreachable(RuntimeError):
    """The remote endpoint failed to answer after all retries."""


class MalformedReply(RuntimeError):
    """The remote endpoint answered, but not with a {"text": ...} object."""


class EmptyInput(ValueError):
    pass


# ---------- navigation command ----------


def nav_command(ego_pose, destination: np.ndarray, vocab: VocabConfig = DEFAULT_VOCAB) -> str:
    """Render the per-decision navigation sentence.

    The destination is re-expressed in the current ego frame, bucketed
    by distance and sector, and templated.  A destination at the ego
    position degenerates to front / very close.
    """
    local = to_ego_frame(ego_pose, np.asarray(destination, dtype=float))
    dist = float(np.hypot(local[0], local[1]))
    if dist == 0.0:
        pos = vocab.sector_words[0]
    else:
        pos = vocab.sector(local)
    return NAV_TEMPLATE.format(dist=vocab.bucket(dist), pos=pos)


# ---------- observations and agents ----------


@dataclass
class Observation:
    """One decision-point stimulus: annotated image plus text prompt."""

    scenario_id: str
    step: int
    prompt: str
    options: list[tuple[str, str]]  # (letter, action name)
    png: bytes | None
    image_ref: str | None = None


def action_options(catalog: ActionCatalog) -> list[tuple[str, str]]:
    return list(zip(string.ascii_uppercase, catalog.names()))


def build_prompt(
    ego_state: EgoState,
    destination: np.ndarray,
    options: list[tuple[str, str]],
    vocab: VocabConfig = DEFAULT_VOCAB,
) -> str:
    listing = "; ".join(f"({l}) {name}" for l, name in options)
    return (
        "You are driving the ego vehicle shown in the image. "
        f"Navigation: {nav_command(ego_state.pose, destination, vocab)} "
        f"Your current speed is {ego_state.speed:.1f} m/s. "
        f"Choose the next action from the following options: {listing}. "
        "Answer with a single capitalized character (for example, A)."
    )


class Agent:
    """Per-episode decision source.  Instances are episode-local."""

    name = "agent"
    needs_image = False

    def decide(self, obs: Observation) -> str:
        raise NotImplementedError


class StraightAgent(Agent):
    name = "straight"

    def decide(self, obs: Observation) -> str:
        return "KEEP_STRAIGHT"


class BrakeAgent(Agent):
    name = "brake"

    def decide(self, obs: Observation) -> str:
        return "BRAKE"


class RandomAgent(Agent):
    name = "random"

    def __init__(self, rng: random.Random):
        self.rng = rng

    def decide(self, obs: Observation) -> str:
        return self.rng.choice([name for _, name in obs.options])


class RemoteAgent(Agent):
    """HTTP client for an external policy.

    POST {"image": base64 PNG or null, "prompt": str,
          "meta": {"scenario": id, "step": k}}  ->  {"text": raw reply}.
    Connection errors and timeouts are retried; a reply without a "text"
    field is a MalformedReply and is not retried.
    """

    name = "remote"
    needs_image = True

    def __init__(self, url: str, timeout_s: float = 10.0, retries: int = 2):
        self.url = url
        self.timeout_s = timeout_s
        self.retries = retries

    def decide(self, obs: Observation) -> str:
        body = {
            "image": base64.b64encode(obs.png).decode("ascii") if obs.png else None,
            "prompt": obs.prompt,
            "meta": {"scenario": obs.scenario_id, "step": obs.step},
        }
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = requests.post(self.url, json=body, timeout=self.timeout_s)
                resp.raise_for_status()
            except requests.RequestException as exc:
                last_error = exc
                continue
            try:
                payload = resp.json()
            except ValueError as exc:
                raise MalformedReply(f"non-JSON reply from {self.url}") from exc
            if not isinstance(payload, dict) or "text" not in payload:
                raise MalformedReply(f"reply from {self.url} lacks a 'text' field")
            return str(payload["text"])
        raise AgentUnreachable(f"{self.url}: {last_error}")


@dataclass
class AgentSpec:
    """Parsed --agent argument; spawn() builds one episode-local agent."""

    kind: str
    url: str | None = None
    timeout_s: float = 10.0
    retries: int = 2

    def spawn(self, scenario_id: str, seed: int) -> Agent:
        if self.kind == "straight":
            return StraightAgent()
        if self.kind == "brake":
            return BrakeAgent()
        if self.kind == "random":
            return RandomAgent(random.Random(f"{seed}:{scenario_id}"))
        if self.kind == "remote":
            return RemoteAgent(self.url, self.timeout_s, self.retries)
        raise ValueError(f"unknown agent kind {self.kind!r}")


def parse_agent_spec(text: str) -> AgentSpec:
    if text in ("random", "brake", "straight"):
        return AgentSpec(text)
    if text.startswith("remote:"):
        url = text[len("remote:"):]
        if not url:
            raise ValueError("remote agent needs a URL, e.g. remote:http://host:8000/act")
        return AgentSpec("remote", url=url)
    raise ValueError(f"agent must be random|brake|straight|remote:URL, got {text!r}")


# ---------- episode loop ----------


@dataclass
class DecisionLog:
    step: int
    observation_ref: str | None
    raw_response: str
    action: str
    parse_failed: bool
    ego_x: float
    ego_y: float
    ego_speed: float

    def to_json_obj(self) -> dict:
        return {
            "step": self.step,
            "observation_ref": self.observation_ref,
            "raw_response": self.raw_response,
            "action": self.action,
            "parse_failed": self.parse_failed,
            "ego": {
                "x": round(self.ego_x, 6),
                "y": round(self.ego_y, 6),
                "speed": round(self.ego_speed, 6),
            },
        }


@dataclass
class EpisodeResult:
    scenario_id: str
    termination: str  # "horizon" | "off_road" | "aborted"
    collided: bool
    collision_step: int | None
    off_road_step: int | None
    traveled: float
    route_len: float
    destination: np.ndarray
    driven_traj: np.ndarray  # (n, 2), n <= horizon
    gt_traj: np.ndarray  # (horizon, 2)
    decisions: list[DecisionLog] = field(default_factory=list)
    error: str | None = None

    @property
    def aborted(self) -> bool:
        return self.termination == "aborted"

    @property
    def parse_failures(self) -> int:
        return sum(1 for d in self.decisions if d.parse_failed)

    def to_json_obj(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "termination": self.termination,
            "collided": self.collided,
            "collision_step": self.collision_step,
            "off_road_step": self.off_road_step,
            "traveled": round(self.traveled, 6),
            "route_len": round(self.route_len, 6),
            "destination": [round(float(v), 6) for v in self.destination],
            "driven_traj": [[round(float(x), 6), round(float(y), 6)] for x, y in self.driven_traj],
            "gt_traj": [[round(float(x), 6), round(float(y), 6)] for x, y in self.gt_traj],
            "decisions": [d.to_json_obj() for d in self.decisions],
            "error": self.error,
        }


@dataclass
class DriveConfig:
    seed: int
    jobs: int = 1
    save_images: bool = False
    camera: CameraRig = DRIVE_CAMERA
    visibility: VisibilityPolicy = DEFAULT_VISIBILITY
    vocab: VocabConfig = DEFAULT_VOCAB
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    catalog: ActionCatalog = field(default_factory=default_catalog)


def _gt_positions(scenario: ScenarioRecord) -> np.ndarray:
    return np.array([st.pose.position for st in scenario.ego.states], dtype=float)


def _on_road(position: np.ndarray, drivable: list[np.ndarray]) -> bool:
    return any(point_in_polygon(position, poly) for poly in drivable)


def _collides(scenario: ScenarioRecord, ego_corners: np.ndarray, sim_step: int) -> bool:
    for track in scenario.tracks:
        if track.id == scenario.ego_id:
            continue
        st = track.states[sim_step]
        if not st.valid:
            continue
        if obb_overlap(ego_corners, st.corners()):
            return True
    return False


def run_episode(
    scenario: ScenarioRecord,
    agent: Agent,
    cfg: DriveConfig,
    out_dir: Path | None = None,
) -> EpisodeResult:
    """Drive one scenario with one agent.

    The agent is queried at steps 0, 5, 10, ... below the horizon; each
    decision is held for the following five transitions (fewer at the
    tail).  Non-ego tracks replay their logged states.
    """
    ego_half = scenario.ego.states[0].half_extents
    first = scenario.ego.states[0]
    state = EgoState(first.pose, first.speed)
    gt = _gt_positions(scenario)
    driven = [np.asarray(state.pose.position, dtype=float)]
    decisions: list[DecisionLog] = []
    options = action_options(cfg.catalog)
    collided = False
    collision_step: int | None = None
    off_road_step: int | None = None
    render = agent.needs_image or cfg.save_images

    for k in range(0, scenario.horizon, DECISION_STEPS):
        logged = frame_at(scenario, k)
        frame = FrameSnapshot(
            k,
            logged.ego_track,
            ObjectState(state.pose, state.speed, ego_half, True),
            logged.objects,
        )
        png = None
        image_ref = None
        if render:
            annotated = annotate_frame(
                frame, cfg.camera, scenario.drivable, cfg.visibility, render=True
            )
            png = annotated.png
            if cfg.save_images and out_dir is not None:
                image_ref = f"observations/{scenario.id}_{k:04d}.png"
                path = out_dir / image_ref
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(png)
        prompt = build_prompt(state, scenario.destination, options, cfg.vocab)
        obs = Observation(scenario.id, k, prompt, options, png, image_ref)

        raw = agent.decide(obs)
        parsed = parse_response(raw, options)
        if isinstance(parsed, ParseFailure):
            action_name = FALLBACK_ACTION
            parse_failed = True
        else:
            action_name = dict(options)[parsed]
            parse_failed = False
        decisions.append(
            DecisionLog(
                k,
                image_ref,
                raw,
                action_name,
                parse_failed,
                float(state.pose.position[0]),
                float(state.pose.position[1]),
                state.speed,
            )
        )

        control = map_action(cfg.catalog.get(action_name), cfg.vehicle)
        for j in range(min(DECISION_STEPS, scenario.horizon - 1 - k)):
            state = dynamics_step(state, control, cfg.vehicle)
            driven.append(np.asarray(state.pose.position, dtype=float))
            sim_step = k + j + 1
            ego_box = obb_corners(state.pose.position, state.pose.heading, ego_half)
            if not collided and _collides(scenario, ego_box, sim_step):
                collided = True
                collision_step = sim_step
            if not _on_road(state.pose.position, scenario.drivable):
                off_road_step = sim_step
                break
        if off_road_step is not None:
            break

    driven_arr = np.array(driven, dtype=float)
    return EpisodeResult(
        scenario_id=scenario.id,
        termination="off_road" if off_road_step is not None else "horizon",
        collided=collided,
        collision_step=collision_step,
        off_road_step=off_road_step,
        traveled=polyline_length(driven_arr),
        route_len=polyline_length(gt),
        destination=np.asarray(scenario.destination, dtype=float),
        driven_traj=driven_arr,
        gt_traj=gt,
        decisions=decisions,
    )


def _aborted_result(scenario: ScenarioRecord, error: str) -> EpisodeResult:
    gt = _gt_positions(scenario)
    start = gt[:1]
    return EpisodeResult(
        scenario_id=scenario.id,
        termination="aborted",
        collided=False,
        collision_step=None,
        off_road_step=None,
        traveled=0.0,
        route_len=polyline_length(gt),
        destination=np.asarray(scenario.destination, dtype=float),
        driven_traj=start.copy(),
        gt_traj=gt,
        decisions=[],
        error=error,
    )


# ---------- metrics ----------


@dataclass
class MetricsReport:
    episodes: int
    aborted: int
    route_completion: float
    off_road_rate: float
    collision_rate: float
    ade: float
    fde: float
    parse_fail_rate: float

    def to_json_obj(self) -> dict:
        return {
            "episodes": self.episodes,
            "aborted": self.aborted,
            "route_completion": round(self.route_completion, 6),
            "off_road_rate": round(self.off_road_rate, 6),
            "collision_rate": round(self.collision_rate, 6),
            "ade": round(self.ade, 6),
            "fde": round(self.fde, 6),
            "parse_fail_rate": round(self.parse_fail_rate, 6),
        }

    def table(self) -> str:
        rows = [
            ("episodes", f"{self.episodes}"),
            ("aborted", f"{self.aborted}"),
            ("route_completion", f"{self.route_completion:.4f}"),
            ("off_road_rate", f"{self.off_road_rate:.4f}"),
            ("collision_rate", f"{self.collision_rate:.4f}"),
            ("ade_m", f"{self.ade:.4f}"),
            ("fde_m", f"{self.fde:.4f}"),
            ("parse_fail_rate", f"{self.parse_fail_rate:.4f}"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def pad_trajectory(driven: np.ndarray, length: int) -> np.ndarray:
    """Repeat the last position until the trajectory has `length` points."""
    if len(driven) >= length:
        return driven[:length]
    pad = np.repeat(driven[-1:], length - len(driven), axis=0)
    return np.vstack([driven, pad])


def episode_ade(result: EpisodeResult) -> float:
    driven = pad_trajectory(result.driven_traj, len(result.gt_traj))
    return float(np.mean(np.hypot(*(driven - result.gt_traj).T)))


def episode_fde(result: EpisodeResult) -> float:
    final = pad_trajectory(result.driven_traj, len(result.gt_traj))[-1]
    return float(np.hypot(*(final - result.destination)))


def episode_completion(result: EpisodeResult) -> float:
    if result.route_len == 0.0:
        return 1.0
    return min(1.0, result.traveled / result.route_len)


def metrics(results: list[EpisodeResult]) -> MetricsReport:
    """Aggregate metrics over completed (non-aborted) episodes.

    Off-road and collision rates are fractions of completed episodes;
    parse-failure rate is over all decisions taken.
    """
    if not results:
        raise EmptyInput("no episodes to aggregate")
    completed = [r for r in results if not r.aborted]
    if not completed:
        return MetricsReport(len(results), len(results), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    n_decisions = sum(len(r.decisions) for r in completed)
    n_failures = sum(r.parse_failures for r in completed)
    return MetricsReport(
        episodes=len(results),
        aborted=len(results) - len(completed),
        route_completion=float(np.mean([episode_completion(r) for r in completed])),
        off_road_rate=sum(r.termination == "off_road" for r in completed) / len(completed),
        collision_rate=sum(r.collided for r in completed) / len(completed),
        ade=float(np.mean([episode_ade(r) for r in completed])),
        fde=float(np.mean([episode_fde(r) for r in completed])),
        parse_fail_rate=n_failures / n_decisions if n_decisions else 0.0,
    )


# ---------- suite runner ----------


def run_suite(
    scenarios: list[ScenarioRecord],
    spec: AgentSpec,
    cfg: DriveConfig,
    out_dir: str | Path | None = None,
) -> tuple[list[EpisodeResult], MetricsReport]:
    """Run every scenario, in parallel up to cfg.jobs workers.

    Results come back in sorted-scenario order regardless of scheduling.
    An unreachable or malformed remote agent aborts that episode and
    flags it; it still appears in the episode list.
    """
    if not scenarios:
        raise EmptyInput("no scenarios to drive")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    ordered = sorted(scenarios, key=lambda s: s.id)

    def one(scenario: ScenarioRecord) -> EpisodeResult:
        agent = spec.spawn(scenario.id, cfg.seed)
        try:
            return run_episode(scenario, agent, cfg, out)
        except (AgentUnreachable, MalformedReply) as exc:
            return _aborted_result(scenario, f"{type(exc).__name__}: {exc}")

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(one, ordered))
    else:
        results = [one(s) for s in ordered]

    report = metrics(results)
    if out is not None:
        with (out / "episodes.jsonl").open("w", encoding="utf-8") as fh:
            for r in results:
                fh.write(json.dumps(r.to_json_obj(), separators=(",", ":")))
                fh.write("\n")
        (out / "metrics.json").write_text(
            json.dumps(report.to_json_obj(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    return results, report
