"""Set-of-mark frame annotation.

Projected boxes are filtered with a z-buffer style occlusion pass, the
survivors get integer labels whose anchors are placed by a distance
transform, and the frame is rendered as an ordered plan of draw commands
that rasterizes to a PNG.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy import ndimage

from .geometry import Pose2D
from .projection import BBox2D, CameraRig, project_box, project_ground_polygon
from .scenario import FrameSnapshot
from .scenegraph import DEFAULT_VISIBILITY, VisibilityPolicy

FONT = cv2.FONT_HERSHEY_SIMPLEX
LABEL_SCALE = 1.0
STROKE_WIDTH = 2
LABEL_PAD = 3
SMALL_BOX_AREA_PX = 1600

GROUND_COLOR = (24, 26, 28)
ROAD_COLOR = (72, 74, 78)
LABEL_FG = (255, 255, 255)
LABEL_BG = (0, 0, 0)
HIGHLIGHT_COLOR = (255, 255, 255)

COLOR_BGR = {
    "white": (245, 245, 245),
    "black": (30, 30, 30),
    "gray": (128, 128, 128),
    "red": (40, 40, 210),
    "blue": (200, 90, 40),
    "green": (70, 170, 70),
    "yellow": (40, 210, 225),
    "orange": (30, 140, 250),
}

KIND_BGR = {
    "sedan": (180, 120, 60),
    "SUV": (150, 160, 70),
    "pickup": (90, 150, 185),
    "truck": (70, 70, 170),
    "bus": (45, 120, 225),
    "pedestrian": (85, 200, 235),
    "cyclist": (185, 95, 160),
    "motorcycle": (160, 185, 95),
    "traffic_cone": (35, 95, 245),
    "barrier": (150, 150, 150),
}


def object_color(kind: str, color: str | None) -> tuple[int, int, int]:
    if color is not None:
        return COLOR_BGR[color]
    return KIND_BGR[kind]


def label_text(label: int) -> str:
    return f"<{label}>"


def text_extent(text: str) -> tuple[int, int]:
    """Width and height in pixels of a label marker including padding."""
    (tw, th), baseline = cv2.getTextSize(text, FONT, LABEL_SCALE, STROKE_WIDTH)
    return tw + 2 * LABEL_PAD, th + baseline + 2 * LABEL_PAD


def extent_rect(anchor: tuple[int, int], text: str) -> tuple[int, int, int, int]:
    """Pixel rectangle of a label marker centered at its anchor."""
    w, h = text_extent(text)
    x0 = int(anchor[0]) - w // 2
    y0 = int(anchor[1]) - h // 2
    return (x0, y0, x0 + w, y0 + h)


# ---------- occlusion ----------


def occlusion_filter(
    boxes: list[BBox2D],
    width: int,
    height: int,
    policy: VisibilityPolicy = DEFAULT_VISIBILITY,
) -> list[BBox2D]:
    """Drop boxes that are mostly hidden by nearer ones.

    Boxes are painted far to near into an id buffer, mimicking a z-buffer;
    a box survives when its unoccluded pixel count is at least
    min_visible_fraction of its own area and at least min_pixels.
    Input must be sorted by ascending depth; the output preserves that
    order.
    """
    if not boxes:
        return []
    buf = np.full((height, width), -1, dtype=np.int32)
    for i in range(len(boxes) - 1, -1, -1):
        b = boxes[i]
        buf[b.y0 : b.y1, b.x0 : b.x1] = i
    flat = buf[buf >= 0]
    counts = np.bincount(flat, minlength=len(boxes)) if flat.size else np.zeros(len(boxes), int)
    survivors = []
    for i, b in enumerate(boxes):
        visible = int(counts[i])
        if visible < policy.min_pixels:
            continue
        if visible < policy.min_visible_fraction * b.area_px:
            continue
        survivors.append(b)
    return survivors


# ---------- label placement ----------


@dataclass
class LabelAssignment:
    """Bijection between integer labels and surviving track ids, plus the
    chosen anchor pixel for each label marker."""

    labels: dict[int, str]
    anchors: dict[int, tuple[int, int]]

    def label_of(self, track_id: str) -> int:
        for label, tid in self.labels.items():
            if tid == track_id:
                return label
        raise KeyError(track_id)


def _clamp_anchor(ax: int, ay: int, text: str, width: int, height: int) -> tuple[int, int]:
    w, h = text_extent(text)
    ax = min(max(ax, w // 2), max(w // 2, width - (w - w // 2)))
    ay = min(max(ay, h // 2), max(h // 2, height - (h - h // 2)))
    return ax, ay


def place_labels(
    boxes: list[BBox2D], width: int, height: int
) -> LabelAssignment:
    """Assign labels 0..n-1 in input order and choose marker anchors.

    The anchor is the interior pixel of the box farthest (by Euclidean
    distance transform) from the union of the other boxes and the markers
    placed so far; ties go to the pixel nearest the box center.  Boxes
    smaller than SMALL_BOX_AREA_PX get their marker lifted just above the
    top edge instead so the marker does not swamp the box.
    """
    labels: dict[int, str] = {}
    anchors: dict[int, tuple[int, int]] = {}
    placed_rects: list[tuple[int, int, int, int]] = []
    for label, box in enumerate(boxes):
        box.label = label
        labels[label] = box.track_id
        text = label_text(label)
        if box.area_px < SMALL_BOX_AREA_PX:
            _, eh = text_extent(text)
            ax = int(round((box.x0 + box.x1) / 2.0))
            ay = box.y0 - eh // 2 - 1
            ax, ay = _clamp_anchor(ax, ay, text, width, height)
        else:
            w = box.x1 - box.x0
            h = box.y1 - box.y0
            free = np.ones((h, w), dtype=np.uint8)
            obstacles = [o.rect() for j, o in enumerate(boxes) if j != label] + placed_rects
            for ox0, oy0, ox1, oy1 in obstacles:
                ix0 = max(ox0, box.x0) - box.x0
                iy0 = max(oy0, box.y0) - box.y0
                ix1 = min(ox1, box.x1) - box.x0
                iy1 = min(oy1, box.y1) - box.y0
                if ix0 < ix1 and iy0 < iy1:
                    free[iy0:iy1, ix0:ix1] = 0
            if not free.any():
                ax, ay = int(round((box.x0 + box.x1) / 2.0)), int(round((box.y0 + box.y1) / 2.0))
            else:
                dist = ndimage.distance_transform_edt(np.pad(free, 1))[1:-1, 1:-1]
                best = float(dist.max())
                ys, xs = np.nonzero(dist == best)
                cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
                k = int(np.argmin((ys - cy) ** 2 + (xs - cx) ** 2))
                ax, ay = box.x0 + int(xs[k]), box.y0 + int(ys[k])
            ax, ay = _clamp_anchor(ax, ay, text, width, height)
        anchors[label] = (ax, ay)
        placed_rects.append(extent_rect((ax, ay), text))
    return LabelAssignment(labels, anchors)


# ---------- draw plan ----------


@dataclass
class FillPolygon:
    points: list[tuple[float, float]]
    color: tuple[int, int, int]

    def to_obj(self) -> dict:
        return {
            "op": "fill_polygon",
            "points": [[round(float(x), 2), round(float(y), 2)] for x, y in self.points],
            "color": list(self.color),
        }


@dataclass
class StrokeRect:
    rect: tuple[int, int, int, int]
    color: tuple[int, int, int]
    width: int = STROKE_WIDTH

    def to_obj(self) -> dict:
        return {"op": "stroke_rect", "rect": list(self.rect), "color": list(self.color), "width": self.width}


@dataclass
class LabelText:
    text: str
    anchor: tuple[int, int]
    scale: float = LABEL_SCALE
    fg: tuple[int, int, int] = LABEL_FG
    bg: tuple[int, int, int] = LABEL_BG

    def to_obj(self) -> dict:
        return {
            "op": "label_text",
            "text": self.text,
            "anchor": list(self.anchor),
            "scale": self.scale,
            "fg": list(self.fg),
            "bg": list(self.bg),
        }


@dataclass
class HighlightRect:
    rect: tuple[int, int, int, int]
    color: tuple[int, int, int] = HIGHLIGHT_COLOR
    width: int = STROKE_WIDTH

    def to_obj(self) -> dict:
        return {"op": "highlight_rect", "rect": list(self.rect), "color": list(self.color), "width": self.width}


DrawCommand = FillPolygon | StrokeRect | LabelText | HighlightRect


@dataclass
class AnnotationPlan:
    width: int
    height: int
    commands: list[DrawCommand] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "width": self.width,
                "height": self.height,
                "commands": [c.to_obj() for c in self.commands],
            },
            separators=(",", ":"),
        )


def build_plan(
    camera: CameraRig,
    ego_pose: Pose2D,
    drivable: list[np.ndarray],
    frame: FrameSnapshot,
    boxes: list[BBox2D],
    assignment: LabelAssignment,
    highlight_label: int | None = None,
) -> AnnotationPlan:
    """Assemble the ordered draw commands for one annotated frame."""
    plan = AnnotationPlan(camera.width, camera.height)
    w, h = camera.width, camera.height
    plan.commands.append(FillPolygon([(0, 0), (w, 0), (w, h), (0, h)], GROUND_COLOR))
    for poly in drivable:
        pixels = project_ground_polygon(camera, ego_pose, poly)
        if pixels is not None:
            plan.commands.append(FillPolygon([tuple(p) for p in pixels], ROAD_COLOR))

    colors = {t.id: object_color(t.kind, t.color) for t, _ in frame.objects}
    for box in sorted(boxes, key=lambda b: (-b.depth, b.track_id)):
        bgr = colors[box.track_id]
        fill = tuple(int(c * 0.65) for c in bgr)
        x0, y0, x1, y1 = box.rect()
        plan.commands.append(FillPolygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], fill))

    for label in sorted(assignment.labels):
        box = next(b for b in boxes if b.label == label)
        plan.commands.append(StrokeRect(box.rect(), colors[box.track_id]))
        plan.commands.append(LabelText(label_text(label), assignment.anchors[label]))

    if highlight_label is not None:
        rect = extent_rect(assignment.anchors[highlight_label], label_text(highlight_label))
        x0, y0, x1, y1 = rect
        plan.commands.append(HighlightRect((x0 - 2, y0 - 2, x1 + 2, y1 + 2)))
    return plan


def rasterize(plan: AnnotationPlan) -> np.ndarray:
    """Execute a draw plan onto a BGR uint8 canvas."""
    img = np.zeros((plan.height, plan.width, 3), dtype=np.uint8)
    for cmd in plan.commands:
        if isinstance(cmd, FillPolygon):
            pts = np.round(np.array(cmd.points)).astype(np.int32)
            cv2.fillPoly(img, [pts], cmd.color)
        elif isinstance(cmd, (StrokeRect, HighlightRect)):
            x0, y0, x1, y1 = cmd.rect
            cv2.rectangle(img, (x0, y0), (x1 - 1, y1 - 1), cmd.color, cmd.width)
        elif isinstance(cmd, LabelText):
            x0, y0, x1, y1 = extent_rect(cmd.anchor, cmd.text)
            cv2.rectangle(img, (x0, y0), (x1 - 1, y1 - 1), cmd.bg, -1)
            (tw, th), baseline = cv2.getTextSize(cmd.text, FONT, cmd.scale, STROKE_WIDTH)
            org = (x0 + LABEL_PAD, y0 + LABEL_PAD + th)
            cv2.putText(img, cmd.text, org, FONT, cmd.scale, cmd.fg, STROKE_WIDTH, cv2.LINE_8)
    return img


def encode_png(img: np.ndarray) -> bytes:
    ok, data = cv2.imencode(".png", img)
    if not ok:
        raise RuntimeError("PNG encoding failed")
    return data.tobytes()


# ---------- frame pipeline ----------


@dataclass
class AnnotatedFrame:
    """Everything the QA engine and the driving harness need for one frame."""

    step: int
    boxes: list[BBox2D]
    assignment: LabelAssignment
    plan: AnnotationPlan
    png: bytes | None


def annotate_frame(
    frame: FrameSnapshot,
    camera: CameraRig,
    drivable: list[np.ndarray],
    policy: VisibilityPolicy = DEFAULT_VISIBILITY,
    render: bool = True,
    highlight_label: int | None = None,
) -> AnnotatedFrame:
    """Run the full annotation pipeline for one frame.

    Objects are range-filtered around the ego, projected, occlusion
    filtered, labeled in ascending-depth order, and rendered (optionally)
    to a draw plan plus PNG.
    """
    ego_pose = frame.ego_state.pose
    candidates = []
    for track, state in frame.objects:
        offset = state.pose.position - ego_pose.position
        if float(np.hypot(offset[0], offset[1])) > policy.max_range_m:
            continue
        box = project_box(
            camera,
            ego_pose,
            state.pose.position,
            state.pose.heading,
            state.half_extents,
            track.height,
            track.id,
        )
        if box is not None:
            candidates.append(box)
    candidates.sort(key=lambda b: (b.depth, b.track_id))
    survivors = occlusion_filter(candidates, camera.width, camera.height, policy)
    assignment = place_labels(survivors, camera.width, camera.height)
    plan = build_plan(camera, ego_pose, drivable, frame, survivors, assignment, highlight_label)
    png = encode_png(rasterize(plan)) if render else None
    return AnnotatedFrame(frame.step, survivors, assignment, plan, png)
