"""Scene graph extraction: pairwise spatial relations between oriented
boxes, ego-centric vocabulary (sectors, distance buckets, headings), and
the graph queries the QA engine runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2D, check_box, rot90ccw, signed_angle, to_ego_frame
from .scenario import FrameSnapshot

EGO = "ego"

SIDE_LEFT = "left"
SIDE_RIGHT = "right"
FB_FRONT = "front"
FB_BACK = "back"

# Directed edge names: the edge from A to B states where B lies relative to A.
EDGES = ("l", "lb", "lf", "b", "f", "r", "rb", "rf")

EDGE_PHRASES = {
    "l": "to the left of",
    "r": "to the right of",
    "f": "in front of",
    "b": "behind",
    "lf": "to the left of and in front of",
    "lb": "to the left of and behind",
    "rf": "to the right of and in front of",
    "rb": "to the right of and behind",
}

OPPOSITE_EDGE = {
    "l": "r",
    "r": "l",
    "f": "b",
    "b": "f",
    "lf": "rb",
    "rb": "lf",
    "lb": "rf",
    "rf": "lb",
}


def _beyond(corners_a: np.ndarray, corners_b: np.ndarray, direction: np.ndarray) -> int:
    """Trichotomy of B against A along a direction.

    +1 when every vertex of B projects strictly beyond A's maximum,
    -1 when strictly below A's minimum, 0 otherwise.  Ties produce 0.
    """
    pa = corners_a @ direction
    pb = corners_b @ direction
    if pb.min() > pa.max():
        return 1
    if pb.max() < pa.min():
        return -1
    return 0


def sidedness(corners_a: np.ndarray, corners_b: np.ndarray, ref: np.ndarray) -> str | None:
    """Left/right of box B relative to box A under reference front vector ref.

    B is left of A only when all of B's vertices lie strictly past A's
    leftmost vertex, where left is ref rotated 90 degrees counterclockwise;
    right is symmetric.  Anything else (any overlap in lateral extent,
    including exact ties) is None.
    """
    a = check_box(corners_a)
    b = check_box(corners_b)
    side = _beyond(a, b, rot90ccw(ref))
    if side > 0:
        return SIDE_LEFT
    if side < 0:
        return SIDE_RIGHT
    return None


def front_back(corners_a: np.ndarray, corners_b: np.ndarray, heading: np.ndarray) -> str | None:
    """Front/back of box B relative to box A along a heading.

    Front means every vertex of B projects onto the heading strictly
    beyond A's maximum projection; back is symmetric; ties give None.
    """
    a = check_box(corners_a)
    b = check_box(corners_b)
    fb = _beyond(a, b, np.asarray(heading, dtype=float))
    if fb > 0:
        return FB_FRONT
    if fb < 0:
        return FB_BACK
    return None


def spatial_edge(corners_a: np.ndarray, corners_b: np.ndarray, ref: np.ndarray) -> str | None:
    """Combine sidedness and front/back into one of the eight directed
    edge names, or None when B is neither beside nor ahead/behind A."""
    side = sidedness(corners_a, corners_b, ref)
    fb = front_back(corners_a, corners_b, ref)
    if side is None and fb is None:
        return None
    name = ""
    if side == SIDE_LEFT:
        name += "l"
    elif side == SIDE_RIGHT:
        name += "r"
    if fb == FB_FRONT:
        name += "f"
    elif fb == FB_BACK:
        name += "b"
    return name


# ---------- ego-centric vocabulary ----------

DISTANCE_WORDS = ("very close", "close", "medium", "far")
SECTOR_WORDS = (
    "front",
    "front-left",
    "left",
    "rear-left",
    "rear",
    "rear-right",
    "right",
    "front-right",
)


@dataclass(frozen=True)
class VocabConfig:
    """Wording config for distances, sectors, and heading agreement."""

    distance_bounds: tuple[float, float, float] = (2.0, 10.0, 30.0)
    distance_words: tuple[str, ...] = DISTANCE_WORDS
    sector_words: tuple[str, ...] = SECTOR_WORDS
    same_direction_deg: float = 30.0

    def bucket(self, distance: float) -> str:
        for bound, word in zip(self.distance_bounds, self.distance_words):
            if distance < bound:
                return word
        return self.distance_words[-1]

    def bucket_bounds(self, word: str) -> tuple[float, float]:
        bounds = (0.0, *self.distance_bounds, math.inf)
        i = self.distance_words.index(word)
        return bounds[i], bounds[i + 1]

    def sector(self, ego_xy: np.ndarray) -> str:
        """Sector word for an ego-frame point; 45-degree sectors with the
        front sector centered on the heading."""
        theta = math.degrees(math.atan2(ego_xy[1], ego_xy[0]))
        idx = int(math.floor((theta + 22.5) / 45.0)) % 8
        return self.sector_words[idx]

    def heading_word(self, ego_heading: np.ndarray, other_heading: np.ndarray) -> str:
        """Compass word for another object's heading relative to the ego's."""
        angle = signed_angle(ego_heading, other_heading)
        idx = int(math.floor((math.degrees(angle) + 22.5) / 45.0)) % 8
        return self.sector_words[idx]

    def same_direction(self, h1: np.ndarray, h2: np.ndarray) -> bool:
        return abs(signed_angle(h1, h2)) <= math.radians(self.same_direction_deg)


DEFAULT_VOCAB = VocabConfig()


@dataclass(frozen=True)
class VisibilityPolicy:
    min_visible_fraction: float = 0.5
    min_pixels: int = 1200
    max_range_m: float = 75.0


DEFAULT_VISIBILITY = VisibilityPolicy()


# ---------- graph construction ----------


class UnknownLabel(KeyError):
    """Query referenced a label absent from the graph."""


class UnknownQuery(ValueError):
    """Query kind is not one the graph supports."""


@dataclass
class NodeAttributes:
    label: int | None  # None for the ego node
    track_id: str
    kind: str
    color: str | None
    height: float
    corners: np.ndarray  # (4, 2) world-frame oriented box
    heading: np.ndarray
    speed: float
    center_world: np.ndarray
    center_ego: np.ndarray
    distance: float


@dataclass
class SceneGraph:
    """Ego-centric relational snapshot of the labeled objects in a frame."""

    step: int
    ego: NodeAttributes
    nodes: dict[int, NodeAttributes]
    edges: dict[tuple[int | str, int | str], str]
    vocab: VocabConfig = field(default_factory=lambda: DEFAULT_VOCAB)

    def node(self, label: int) -> NodeAttributes:
        try:
            return self.nodes[label]
        except KeyError:
            raise UnknownLabel(label) from None

    def labels(self) -> list[int]:
        return sorted(self.nodes)


def _node_from(track, state, label: int | None, ego_pose: Pose2D) -> NodeAttributes:
    center = state.pose.position
    center_ego = to_ego_frame(ego_pose, center)
    return NodeAttributes(
        label=label,
        track_id=track.id,
        kind=track.kind,
        color=track.color,
        height=track.height,
        corners=state.corners(),
        heading=state.pose.heading,
        speed=state.speed,
        center_world=center,
        center_ego=center_ego,
        distance=float(np.hypot(center_ego[0], center_ego[1])),
    )


def build_scene_graph(
    frame: FrameSnapshot,
    labels: dict[int, str],
    max_range_m: float = DEFAULT_VISIBILITY.max_range_m,
    vocab: VocabConfig = DEFAULT_VOCAB,
) -> SceneGraph:
    """Build the graph over the labeled objects of a frame.

    labels maps integer labels to track ids (the output of label
    placement).  Objects beyond max_range_m are dropped.  Every ordered
    pair of remaining nodes gets a spatial-edge slot, evaluated with the
    ego's heading as the reference vector; pairs involving the ego are
    keyed with the EGO sentinel.
    """
    ego_pose = frame.ego_state.pose
    by_id = {track.id: (track, state) for track, state in frame.objects}
    ego_node = _node_from(frame.ego_track, frame.ego_state, None, ego_pose)

    nodes: dict[int, NodeAttributes] = {}
    for label in sorted(labels):
        track_id = labels[label]
        track, state = by_id[track_id]
        node = _node_from(track, state, label, ego_pose)
        if node.distance <= max_range_m:
            nodes[label] = node

    ref = ego_pose.heading
    edges: dict[tuple[int | str, int | str], str] = {}
    keyed: list[tuple[int | str, NodeAttributes]] = [(EGO, ego_node)]
    keyed += [(label, nodes[label]) for label in sorted(nodes)]
    for ka, na in keyed:
        for kb, nb in keyed:
            if ka == kb:
                continue
            edge = spatial_edge(na.corners, nb.corners, ref)
            if edge is not None:
                edges[(ka, kb)] = edge

    return SceneGraph(frame.step, ego_node, nodes, edges, vocab)


# ---------- queries ----------

_ORDER_KEYS = {
    "closest": lambda n: (n.distance, n.label),
    "farthest": lambda n: (-n.distance, n.label),
    "leftmost": lambda n: (-n.center_ego[1], n.label),
    "rightmost": lambda n: (n.center_ego[1], n.label),
    "frontmost": lambda n: (-n.center_ego[0], n.label),
    "backmost": lambda n: (n.center_ego[0], n.label),
}


def order_labels(graph: SceneGraph, by: str, labels: list[int] | None = None) -> list[int]:
    """Labels ordered by a spatial criterion; ties break on ascending label."""
    if by not in _ORDER_KEYS:
        raise UnknownQuery(f"unknown ordering {by!r}")
    pool = graph.labels() if labels is None else labels
    nodes = [graph.node(l) for l in pool]
    return [n.label for n in sorted(nodes, key=_ORDER_KEYS[by])]


def query(graph: SceneGraph, kind: str, **params):
    """Single entry point for the graph queries the QA engine needs."""
    v = graph.vocab
    if kind in _ORDER_KEYS:
        ordered = order_labels(graph, kind)
        if not ordered:
            raise UnknownLabel("graph has no labeled objects")
        return ordered[0]
    if kind == "ordering":
        return order_labels(graph, params["by"], params["ids"])
    if kind == "distance_bucket":
        return v.bucket(graph.node(params["id"]).distance)
    if kind == "sector_membership":
        return v.sector(graph.node(params["id"]).center_ego)
    if kind == "heading_bucket":
        return v.heading_word(graph.ego.heading, graph.node(params["id"]).heading)
    if kind == "objects_in_sector":
        return [l for l in graph.labels() if v.sector(graph.node(l).center_ego) == params["sector"]]
    if kind == "objects_in_band":
        return [l for l in graph.labels() if v.bucket(graph.node(l).distance) == params["band"]]
    if kind == "pair_distance":
        a = graph.node(params["id1"])
        b = graph.node(params["id2"])
        return v.bucket(float(np.hypot(*(a.center_world - b.center_world))))
    if kind == "pair_position":
        # Where id1 sits relative to id2: the edge drawn from id2 to id1.
        return graph.edges.get((params["id2"], params["id1"]))
    if kind == "pair_heading":
        a = graph.node(params["id1"])
        b = graph.node(params["id2"])
        return v.same_direction(a.heading, b.heading)
    raise UnknownQuery(f"unknown query kind {kind!r}")
