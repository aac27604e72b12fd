"""Question generation, answering, parsing, and scoring."""

from .answers import AnswerPayload, FrameContext, answer_query
from .generate import (
    GenerateConfig,
    PipelineDeps,
    audit_records,
    downsample,
    downsample_jsonl,
    format_mcq,
    generate_dataset,
    instantiate,
    load_records,
    make_frame_context,
)
from .parsing import ParseFailure, parse_response
from .score import ScoreReport, SliceStats, load_replies, score_records
from .types import (
    ALL_TYPES,
    BINARY_TYPES,
    EMBODIED_TYPES,
    GROUNDING_TYPES,
    SPATIAL_TYPES,
    SUPERTYPE,
    TRAIN_ONLY_TYPES,
    InsufficientCandidates,
    QARecord,
    Unsupported,
    record_from_json_obj,
)

__all__ = [
    "ALL_TYPES",
    "BINARY_TYPES",
    "EMBODIED_TYPES",
    "GROUNDING_TYPES",
    "SPATIAL_TYPES",
    "SUPERTYPE",
    "TRAIN_ONLY_TYPES",
    "AnswerPayload",
    "FrameContext",
    "GenerateConfig",
    "InsufficientCandidates",
    "ParseFailure",
    "PipelineDeps",
    "QARecord",
    "ScoreReport",
    "SliceStats",
    "Unsupported",
    "answer_query",
    "audit_records",
    "downsample",
    "downsample_jsonl",
    "format_mcq",
    "generate_dataset",
    "instantiate",
    "load_records",
    "load_replies",
    "make_frame_context",
    "parse_response",
    "record_from_json_obj",
    "score_records",
]
