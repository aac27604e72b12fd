"""Ground-truth answers for every question type.

answer_query is pure in (question type, parameter binding, frame
context), which lets generated records be re-audited after the fact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dynamics import ActionCatalog, EgoState, VehicleParams, obb_overlap, rollout
from ..geometry import obb_corners, to_ego_frame
from ..scenario import DT, ScenarioRecord
from ..scenegraph import EDGE_PHRASES, SceneGraph, order_labels, query
from .types import Unsupported

CRASH_HORIZON_S = 3.0
SIDENESS_MIN_LATERAL_M = 0.05

YES = "Yes"
NO = "No"


@dataclass
class FrameContext:
    """Everything answer computation needs about one annotated frame."""

    scenario: ScenarioRecord
    step: int
    graph: SceneGraph
    catalog: ActionCatalog
    vehicle: VehicleParams

    @property
    def ego_state(self) -> EgoState:
        st = self.scenario.ego.states[self.step]
        return EgoState(st.pose, st.speed)

    @property
    def remaining_steps(self) -> int:
        return self.scenario.horizon - 1 - self.step

    def crash_steps(self) -> int:
        return min(int(round(CRASH_HORIZON_S / DT)), self.remaining_steps)


@dataclass
class AnswerPayload:
    truth: str
    explanation: str
    aux: dict


def label_ref(label: int) -> str:
    return f"<{label}>"


def pretty_kind(kind: str) -> str:
    return kind.replace("_", " ")


def article(word: str) -> str:
    if word == "SUV" or word[:1].lower() in "aeiou":
        return "an"
    return "a"


def describe_node(node) -> str:
    kind = pretty_kind(node.kind)
    if node.color is not None:
        phrase = f"{node.color} {kind}"
    else:
        phrase = kind
    return f"{label_ref(node.label)} is {article(phrase)} {phrase}"


def set_text(labels: list[int]) -> str:
    if not labels:
        return "none of the labeled objects"
    return ", ".join(label_ref(l) for l in sorted(labels))


def order_text(labels: list[int]) -> str:
    return ", ".join(label_ref(l) for l in labels)


def duration_steps(duration_s: float) -> int:
    return int(round(duration_s / DT))


def speed_phrase(speed: float) -> str:
    return f"{speed:.1f} m/s"


def duration_phrase(duration_s: float) -> str:
    return f"{duration_s:g} seconds"


def _yesno(flag: bool) -> str:
    return YES if flag else NO


def _track_corners_at(scenario: ScenarioRecord, track_id: str, k: int) -> np.ndarray | None:
    track = scenario.track(track_id)
    if k >= len(track.states):
        return None
    st = track.states[k]
    if not st.valid:
        return None
    return st.corners()


def _replay_pair_overlap(
    scenario: ScenarioRecord, id_a: str, id_b: str, step: int, n: int
) -> int | None:
    """First offset k in [0, n] where the two logged boxes overlap."""
    for k in range(n + 1):
        ca = _track_corners_at(scenario, id_a, step + k)
        cb = _track_corners_at(scenario, id_b, step + k)
        if ca is None or cb is None:
            continue
        if obb_overlap(ca, cb):
            return k
    return None


def _replay_vs_frozen_overlap(
    scenario: ScenarioRecord, moving_id: str, frozen_corners: np.ndarray, step: int, n: int
) -> int | None:
    for k in range(n + 1):
        cm = _track_corners_at(scenario, moving_id, step + k)
        if cm is None:
            continue
        if obb_overlap(cm, frozen_corners):
            return k
    return None


def _ego_rollout(ctx: FrameContext, action_name: str, n: int) -> list[EgoState]:
    return rollout(ctx.ego_state, ctx.catalog.get(action_name), n, ctx.vehicle)


def _ego_half_extents(ctx: FrameContext) -> np.ndarray:
    return ctx.scenario.ego.states[ctx.step].half_extents


def answer_query(qtype: str, params: dict, ctx: FrameContext) -> AnswerPayload:
    """Compute the canonical answer text and explanation body."""
    g = ctx.graph
    v = g.vocab

    if qtype == "identify_distance":
        node = g.node(params["ids"][0])
        word = v.bucket(node.distance)
        lo, hi = v.bucket_bounds(word)
        span = f"{lo:g}-{hi:g} m" if math.isfinite(hi) else f"beyond {lo:g} m"
        return AnswerPayload(
            word,
            f"The object labeled {label_ref(node.label)} is {node.distance:.1f} meters "
            f"from the ego vehicle, which counts as {word} ({span}).",
            {},
        )

    if qtype == "identify_position":
        node = g.node(params["ids"][0])
        word = v.sector(node.center_ego)
        return AnswerPayload(
            word,
            f"The center of the object labeled {label_ref(node.label)} falls in the "
            f"{word} sector around the ego vehicle.",
            {},
        )

    if qtype == "identify_heading":
        node = g.node(params["ids"][0])
        word = v.heading_word(g.ego.heading, node.heading)
        angle = math.degrees(
            math.atan2(
                g.ego.heading[0] * node.heading[1] - g.ego.heading[1] * node.heading[0],
                g.ego.heading[0] * node.heading[0] + g.ego.heading[1] * node.heading[1],
            )
        )
        return AnswerPayload(
            word,
            f"The object labeled {label_ref(node.label)} points {angle:+.1f} degrees "
            f"from the ego heading, which maps to {word}.",
            {"truth_word": word},
        )

    if qtype == "identify_color":
        node = g.node(params["ids"][0])
        if node.color is None:
            raise Unsupported(qtype, "object has no color attribute")
        return AnswerPayload(
            node.color,
            f"The object labeled {label_ref(node.label)} is "
            f"{article(node.color)} {node.color} {pretty_kind(node.kind)}.",
            {},
        )

    if qtype == "identify_type":
        node = g.node(params["ids"][0])
        return AnswerPayload(
            pretty_kind(node.kind),
            f"The object labeled {label_ref(node.label)} is "
            f"{article(pretty_kind(node.kind))} {pretty_kind(node.kind)}.",
            {},
        )

    if qtype in ("identify_leftmost", "identify_rightmost", "identify_closest",
                 "identify_frontmost", "identify_backmost"):
        by = qtype.removeprefix("identify_")
        winner = query(g, by)
        node = g.node(winner)
        if by == "closest":
            detail = f"it is {node.distance:.1f} meters away ({v.bucket(node.distance)})"
        elif by in ("leftmost", "rightmost"):
            detail = f"its lateral offset is {node.center_ego[1]:+.1f} meters"
        else:
            detail = f"its forward offset is {node.center_ego[0]:+.1f} meters"
        return AnswerPayload(
            label_ref(winner),
            f"Among the labeled objects, {label_ref(winner)} is the {by}; {detail}.",
            {},
        )

    if qtype == "relative_distance":
        word = query(g, "pair_distance", id1=params["ids"][0], id2=params["ids"][1])
        a = g.node(params["ids"][0])
        b = g.node(params["ids"][1])
        dist = float(np.hypot(*(a.center_world - b.center_world)))
        return AnswerPayload(
            word,
            f"The objects labeled {label_ref(a.label)} and {label_ref(b.label)} are "
            f"{dist:.1f} meters apart, which counts as {word}.",
            {},
        )

    if qtype == "relative_position":
        edge = query(g, "pair_position", id1=params["ids"][0], id2=params["ids"][1])
        if edge is None:
            raise Unsupported(qtype, "objects have no decisive spatial relation")
        phrase = EDGE_PHRASES[edge]
        return AnswerPayload(
            phrase,
            f"Judged along the ego heading, the object labeled {label_ref(params['ids'][0])} "
            f"is {phrase} the object labeled {label_ref(params['ids'][1])}.",
            {"edge": edge},
        )

    if qtype == "relative_heading":
        same = query(g, "pair_heading", id1=params["ids"][0], id2=params["ids"][1])
        a = g.node(params["ids"][0])
        b = g.node(params["ids"][1])
        angle = abs(
            math.degrees(
                math.atan2(
                    a.heading[0] * b.heading[1] - a.heading[1] * b.heading[0],
                    a.heading[0] * b.heading[0] + a.heading[1] * b.heading[1],
                )
            )
        )
        return AnswerPayload(
            _yesno(bool(same)),
            f"Their headings differ by {angle:.1f} degrees, which is "
            f"{'within' if same else 'beyond'} the {v.same_direction_deg:g}-degree "
            f"same-direction threshold.",
            {},
        )

    if qtype == "relative_predict_crash_still":
        a = g.node(params["ids"][0])
        b = g.node(params["ids"][1])
        hit = obb_overlap(a.corners, b.corners)
        return AnswerPayload(
            _yesno(hit),
            f"With both objects frozen in place, their boxes "
            f"{'already overlap' if hit else 'do not touch'}.",
            {},
        )

    if qtype == "relative_predict_crash_dynamic":
        n = ctx.crash_steps()
        if n < 1:
            raise Unsupported(qtype, "no remaining log to replay")
        a = g.node(params["ids"][0])
        b = g.node(params["ids"][1])
        k = _replay_pair_overlap(ctx.scenario, a.track_id, b.track_id, ctx.step, n)
        if k is None:
            expl = f"Replaying both logged trajectories for {n * DT:.1f} seconds, their boxes never overlap."
        else:
            expl = f"Replaying both logged trajectories, their boxes first overlap after {k * DT:.1f} seconds."
        return AnswerPayload(_yesno(k is not None), expl, {})

    if qtype == "pick_closer":
        a = g.node(params["ids"][0])
        b = g.node(params["ids"][1])
        winner = a if (a.distance, a.label) <= (b.distance, b.label) else b
        other = b if winner is a else a
        return AnswerPayload(
            label_ref(winner.label),
            f"The object labeled {label_ref(winner.label)} is {winner.distance:.1f} meters away, "
            f"closer than {label_ref(other.label)} at {other.distance:.1f} meters.",
            {},
        )

    if qtype.startswith("order_"):
        by = qtype.removeprefix("order_")
        ids = list(params["ids"])
        ordered = order_labels(g, by, ids)
        values = {
            "closest": lambda n: f"{n.distance:.1f} m",
            "leftmost": lambda n: f"{n.center_ego[1]:+.1f} m lateral",
            "rightmost": lambda n: f"{n.center_ego[1]:+.1f} m lateral",
            "frontmost": lambda n: f"{n.center_ego[0]:+.1f} m forward",
            "backmost": lambda n: f"{n.center_ego[0]:+.1f} m forward",
        }[by]
        detail = ", ".join(f"{label_ref(l)} ({values(g.node(l))})" for l in ordered)
        return AnswerPayload(
            order_text(ordered),
            f"Ordered by the {by} criterion: {detail}.",
            {"ordered": ordered},
        )

    if qtype == "describe_sector":
        members = query(g, "objects_in_sector", sector=params["pos"])
        return AnswerPayload(
            set_text(members),
            f"Exactly {'no labeled objects' if not members else set_text(members)} "
            f"lie in the {params['pos']} sector.",
            {"members": members},
        )

    if qtype == "describe_distance":
        members = query(g, "objects_in_band", band=params["dist"])
        lo, hi = v.bucket_bounds(params["dist"])
        span = f"{lo:g}-{hi:g} m" if math.isfinite(hi) else f"beyond {lo:g} m"
        return AnswerPayload(
            set_text(members),
            f"Exactly {'no labeled objects' if not members else set_text(members)} "
            f"fall in the {params['dist']} band ({span}).",
            {"members": members},
        )

    if qtype == "describe_scenario":
        parts = [describe_node(g.node(l)) for l in g.labels()]
        return AnswerPayload(
            "; ".join(parts),
            "The labeled objects are enumerated with their types and colors.",
            {},
        )

    if qtype == "embodied_distance":
        n = duration_steps(params["duration"])
        states = _ego_rollout(ctx, params["action"], n)
        dist = float(np.hypot(*(states[-1].pose.position - states[0].pose.position)))
        word = v.bucket(dist)
        return AnswerPayload(
            word,
            f"Executing {params['action']} for {duration_phrase(params['duration'])} moves the "
            f"ego vehicle {dist:.1f} meters, which counts as {word}.",
            {"distance": dist},
        )

    if qtype == "embodied_sideness":
        n = duration_steps(params["duration"])
        states = _ego_rollout(ctx, params["action"], n)
        lateral = float(to_ego_frame(states[0].pose, states[-1].pose.position)[1])
        if abs(lateral) < SIDENESS_MIN_LATERAL_M:
            raise Unsupported(qtype, "action produces no decisive lateral displacement")
        side = "left" if lateral > 0 else "right"
        return AnswerPayload(
            side,
            f"Executing {params['action']} for {duration_phrase(params['duration'])} puts the "
            f"ego vehicle {abs(lateral):.1f} meters to the {side} of its starting pose.",
            {"lateral": lateral},
        )

    if qtype == "embodied_collision":
        node = g.node(params["ids"][0])
        n = duration_steps(params["duration"])
        states = _ego_rollout(ctx, params["action"], n)
        half = _ego_half_extents(ctx)
        hit_k = None
        for k, st in enumerate(states):
            ego_box = obb_corners(st.pose.position, st.pose.heading, half)
            if obb_overlap(ego_box, node.corners):
                hit_k = k
                break
        if hit_k is None:
            expl = (
                f"Rolling out {params['action']} for {duration_phrase(params['duration'])}, the "
                f"ego box never touches the object labeled {label_ref(node.label)}."
            )
        else:
            expl = (
                f"Rolling out {params['action']}, the ego box reaches the object labeled "
                f"{label_ref(node.label)} after {hit_k * DT:.1f} seconds."
            )
        return AnswerPayload(_yesno(hit_k is not None), expl, {})

    if qtype == "predict_crash_ego_still":
        node = g.node(params["ids"][0])
        n = ctx.crash_steps()
        if n < 1:
            raise Unsupported(qtype, "no remaining log to replay")
        frozen = ctx.scenario.ego.states[ctx.step].corners()
        k = _replay_vs_frozen_overlap(ctx.scenario, node.track_id, frozen, ctx.step, n)
        if k is None:
            expl = (
                f"Replaying its log for {n * DT:.1f} seconds, the object labeled "
                f"{label_ref(node.label)} never reaches the frozen ego box."
            )
        else:
            expl = (
                f"Replaying its log, the object labeled {label_ref(node.label)} overlaps the "
                f"frozen ego box after {k * DT:.1f} seconds."
            )
        return AnswerPayload(_yesno(k is not None), expl, {})

    if qtype == "predict_crash_ego_dynamic":
        node = g.node(params["ids"][0])
        n = ctx.crash_steps()
        if n < 1:
            raise Unsupported(qtype, "no remaining log to replay")
        k = _replay_pair_overlap(
            ctx.scenario, ctx.scenario.ego_id, node.track_id, ctx.step, n
        )
        if k is None:
            expl = (
                f"Replaying both logs for {n * DT:.1f} seconds, the ego box and the object "
                f"labeled {label_ref(node.label)} never overlap."
            )
        else:
            expl = (
                f"Replaying both logs, the ego box and the object labeled "
                f"{label_ref(node.label)} first overlap after {k * DT:.1f} seconds."
            )
        return AnswerPayload(_yesno(k is not None), expl, {})

    if qtype == "grounding":
        target = params["target"]
        g.node(target)
        return AnswerPayload(
            label_ref(target),
            f"The white box encloses the marker of label {label_ref(target)}.",
            {},
        )

    raise Unsupported(qtype, "unknown question type")
