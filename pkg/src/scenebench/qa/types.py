"""Question taxonomy, record type, and template loading."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

SPATIAL_TYPES = (
    "identify_distance",
    "identify_position",
    "identify_heading",
    "identify_color",
    "identify_type",
    "identify_leftmost",
    "identify_rightmost",
    "identify_closest",
    "identify_frontmost",
    "identify_backmost",
    "relative_distance",
    "relative_position",
    "relative_heading",
    "relative_predict_crash_still",
    "relative_predict_crash_dynamic",
    "pick_closer",
    "order_leftmost",
    "order_rightmost",
    "order_closest",
    "order_frontmost",
    "order_backmost",
    "describe_sector",
    "describe_distance",
    "describe_scenario",
)
EMBODIED_TYPES = (
    "embodied_distance",
    "embodied_sideness",
    "embodied_collision",
    "predict_crash_ego_still",
    "predict_crash_ego_dynamic",
)
GROUNDING_TYPES = ("grounding",)

ALL_TYPES = SPATIAL_TYPES + EMBODIED_TYPES + GROUNDING_TYPES

SUPERTYPE = (
    {t: "spatial" for t in SPATIAL_TYPES}
    | {t: "embodied" for t in EMBODIED_TYPES}
    | {t: "grounding" for t in GROUNDING_TYPES}
)

# Question types whose options are a fixed yes/no pair.
BINARY_TYPES = frozenset(
    {
        "relative_heading",
        "relative_predict_crash_still",
        "relative_predict_crash_dynamic",
        "embodied_collision",
        "predict_crash_ego_still",
        "predict_crash_ego_dynamic",
    }
)

TRAIN_ONLY_TYPES = frozenset({"describe_scenario"})

DURATIONS_S = (0.5, 1.0, 2.0)


class UnknownQuestionType(KeyError):
    pass


class Unsupported(Exception):
    """The frame cannot support this question (too few objects, missing
    attribute, exhausted log, ...)."""

    def __init__(self, qtype: str, reason: str):
        self.qtype = qtype
        self.reason = reason
        super().__init__(f"{qtype}: {reason}")


class InsufficientCandidates(Exception):
    """Not even one distractor could be produced."""


def load_templates() -> dict[str, str]:
    text = resources.files("scenebench.qa").joinpath("templates.json").read_text("utf-8")
    templates = json.loads(text)
    missing = [t for t in ALL_TYPES if t not in templates]
    if missing:
        raise UnknownQuestionType(f"templates missing for {missing}")
    return templates


TEMPLATES = load_templates()


@dataclass
class QARecord:
    """One multiple-choice question bound to a rendered frame."""

    id: str
    qtype: str
    question: str
    options: list[tuple[str, str]]  # (letter, text) in presentation order
    answer: str
    explanation: str
    image_ref: str
    scenario_id: str
    step: int
    domain: str
    params: dict = field(default_factory=dict)

    def option_text(self, letter: str) -> str:
        for l, text in self.options:
            if l == letter:
                return text
        raise KeyError(letter)

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "type": self.qtype,
            "question": self.question,
            "options": {l: t for l, t in self.options},
            "answer": self.answer,
            "explanation": self.explanation,
            "image_ref": self.image_ref,
            "scenario_id": self.scenario_id,
            "step": self.step,
            "domain": self.domain,
            "params": self.params,
        }


def record_from_json_obj(obj: dict) -> QARecord:
    return QARecord(
        id=obj["id"],
        qtype=obj["type"],
        question=obj["question"],
        options=sorted(obj["options"].items()),
        answer=obj["answer"],
        explanation=obj["explanation"],
        image_ref=obj["image_ref"],
        scenario_id=obj["scenario_id"],
        step=obj["step"],
        domain=obj["domain"],
        params=obj.get("params", {}),
    )
