"""Scenario-based spatial QA generation and closed-loop driving evaluation."""

from .annotate import AnnotatedFrame, AnnotationPlan, annotate_frame, occlusion_filter, place_labels
from .closedloop import (
    AgentSpec,
    AgentUnreachable,
    DriveConfig,
    EpisodeResult,
    MalformedReply,
    MetricsReport,
    RemoteAgent,
    metrics,
    nav_command,
    parse_agent_spec,
    run_episode,
    run_suite,
)
from .config import ConfigError, RunConfig, load_config, parse_config
from .dynamics import (
    ActionCatalog,
    ControlSignal,
    EgoState,
    ReconstructionResult,
    TooShort,
    VehicleParams,
    default_catalog,
    map_action,
    obb_overlap,
    reconstruct_actions,
    rollout,
    step,
)
from .geometry import DegenerateBox, Pose2D, obb_corners, to_ego_frame
from .projection import DRIVE_CAMERA, GENERATION_CAMERA, BBox2D, CameraRig, project_box
from .scenario import (
    FrameSnapshot,
    InvariantError,
    ScenarioError,
    ScenarioRecord,
    SchemaError,
    Track,
    frame_at,
    load_scenario,
    load_scenario_dir,
    save_scenario,
)
from .scenegraph import (
    EDGES,
    SceneGraph,
    VisibilityPolicy,
    VocabConfig,
    build_scene_graph,
    front_back,
    sidedness,
    spatial_edge,
)
from .synth import make_suite

__version__ = "0.1.0"

__all__ = [
    "ActionCatalog",
    "AgentSpec",
    "AgentUnreachable",
    "AnnotatedFrame",
    "AnnotationPlan",
    "BBox2D",
    "CameraRig",
    "ConfigError",
    "ControlSignal",
    "DegenerateBox",
    "DriveConfig",
    "DRIVE_CAMERA",
    "EDGES",
    "EgoState",
    "EpisodeResult",
    "FrameSnapshot",
    "GENERATION_CAMERA",
    "InvariantError",
    "MalformedReply",
    "MetricsReport",
    "Pose2D",
    "ReconstructionResult",
    "RemoteAgent",
    "RunConfig",
    "ScenarioError",
    "ScenarioRecord",
    "SceneGraph",
    "SchemaError",
    "TooShort",
    "Track",
    "VehicleParams",
    "VisibilityPolicy",
    "VocabConfig",
    "annotate_frame",
    "build_scene_graph",
    "default_catalog",
    "frame_at",
    "front_back",
    "load_config",
    "load_scenario",
    "load_scenario_dir",
    "make_suite",
    "map_action",
    "metrics",
    "nav_command",
    "obb_corners",
    "obb_overlap",
    "occlusion_filter",
    "parse_agent_spec",
    "parse_config",
    "place_labels",
    "project_box",
    "reconstruct_actions",
    "rollout",
    "run_episode",
    "run_suite",
    "save_scenario",
    "sidedness",
    "spatial_edge",
    "step",
    "to_ego_frame",
]
