"""Dataset generation: instantiate templates on annotated keyframes, build
multiple-choice records, and write deterministic JSONL shards.
"""
from __future__ import annotations

import json
import random
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..annotate import AnnotatedFrame, annotate_frame, build_plan, encode_png, rasterize
from ..dynamics import ActionCatalog, VehicleParams, default_catalog
from ..projection import GENERATION_CAMERA, CameraRig
from ..scenario import ScenarioRecord, frame_at
from ..scenegraph import (
    DEFAULT_VISIBILITY,
    DEFAULT_VOCAB,
    SceneGraph,
    VisibilityPolicy,
    VocabConfig,
    build_scene_graph,
)
from .answers import (
    AnswerPayload,
    FrameContext,
    answer_query,
    duration_phrase,
    label_ref,
    speed_phrase,
)
from .distractors import gen_distractors
from .types import (
    ALL_TYPES,
    BINARY_TYPES,
    DURATIONS_S,
    SUPERTYPE,
    TEMPLATES,
    TRAIN_ONLY_TYPES,
    InsufficientCandidates,
    QARecord,
    Unsupported,
    record_from_json_obj,
)

KEYFRAME_INTERVAL = 5

OPTION_LETTERS = string.ascii_uppercase

ANSWER_INSTRUCTION = "Answer with a single capitalized character (for example, A)."


@dataclass
class GenerateConfig:
    seed: int
    quota_per_type: int = 100
    types: tuple[str, ...] = ALL_TYPES
    split: str = "train"
    render_images: bool = True
    per_frame_per_type: int = 2
    jobs: int = 1


@dataclass
class PipelineDeps:
    """Shared knobs of the annotation and answer pipeline."""

    camera: CameraRig = GENERATION_CAMERA
    visibility: VisibilityPolicy = DEFAULT_VISIBILITY
    vocab: VocabConfig = DEFAULT_VOCAB
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    catalog: ActionCatalog = field(default_factory=default_catalog)


def make_frame_context(
    scenario: ScenarioRecord,
    step: int,
    deps: PipelineDeps,
    render: bool = False,
) -> tuple[FrameContext, AnnotatedFrame]:
    frame = frame_at(scenario, step)
    annotated = annotate_frame(
        frame, deps.camera, scenario.drivable, deps.visibility, render=render
    )
    graph = build_scene_graph(
        frame, annotated.assignment.labels, deps.visibility.max_range_m, deps.vocab
    )
    ctx = FrameContext(scenario, step, graph, deps.catalog, deps.vehicle)
    return ctx, annotated


# ---------- template instantiation ----------


def _require_labels(qtype: str, graph: SceneGraph, n: int) -> list[int]:
    labels = graph.labels()
    if len(labels) < n:
        raise Unsupported(qtype, f"needs at least {n} labeled objects, frame has {len(labels)}")
    return labels


def instantiate(qtype: str, ctx: FrameContext, rng: random.Random) -> tuple[str, dict]:
    """Bind template parameters for one question; returns (body, params).

    Object-id parameters come from the frame's labels; vocabulary words,
    actions, and durations come from their fixed spaces.  Raises
    Unsupported when the frame cannot host the type.
    """
    if qtype not in TEMPLATES:
        raise Unsupported(qtype, "unknown question type")
    g = ctx.graph
    params: dict = {}

    if qtype in (
        "identify_distance",
        "identify_position",
        "identify_heading",
        "identify_type",
    ):
        labels = _require_labels(qtype, g, 1)
        params["ids"] = [rng.choice(labels)]
    elif qtype == "identify_color":
        colored = [l for l in g.labels() if g.node(l).color is not None]
        if not colored:
            raise Unsupported(qtype, "no labeled object has a color attribute")
        params["ids"] = [rng.choice(colored)]
    elif qtype in (
        "identify_leftmost",
        "identify_rightmost",
        "identify_closest",
        "identify_frontmost",
        "identify_backmost",
    ):
        _require_labels(qtype, g, 2)
    elif qtype in (
        "relative_distance",
        "relative_heading",
        "relative_predict_crash_still",
        "relative_predict_crash_dynamic",
        "pick_closer",
    ):
        labels = _require_labels(qtype, g, 2)
        params["ids"] = rng.sample(labels, 2)
    elif qtype == "relative_position":
        pairs = sorted(
            (b, a)
            for (a, b) in ctx.graph.edges
            if isinstance(a, int) and isinstance(b, int)
        )
        if not pairs:
            raise Unsupported(qtype, "no object pair has a decisive spatial relation")
        params["ids"] = list(rng.choice(pairs))
    elif qtype.startswith("order_"):
        labels = _require_labels(qtype, g, 2)
        k = 3 if len(labels) >= 3 else 2
        params["ids"] = sorted(rng.sample(labels, k))
    elif qtype == "describe_sector":
        _require_labels(qtype, g, 1)
        params["pos"] = rng.choice(ctx.graph.vocab.sector_words)
    elif qtype == "describe_distance":
        _require_labels(qtype, g, 1)
        params["dist"] = rng.choice(ctx.graph.vocab.distance_words)
    elif qtype == "describe_scenario":
        _require_labels(qtype, g, 1)
    elif qtype in ("embodied_distance", "embodied_sideness"):
        params["action"] = rng.choice(ctx.catalog.names())
        params["duration"] = rng.choice(DURATIONS_S)
    elif qtype == "embodied_collision":
        labels = _require_labels(qtype, g, 1)
        params["ids"] = [rng.choice(labels)]
        params["action"] = rng.choice(ctx.catalog.names())
        params["duration"] = rng.choice(DURATIONS_S)
    elif qtype in ("predict_crash_ego_still", "predict_crash_ego_dynamic"):
        labels = _require_labels(qtype, g, 1)
        if ctx.remaining_steps < 1:
            raise Unsupported(qtype, "no remaining log to replay")
        params["ids"] = [rng.choice(labels)]
    elif qtype == "grounding":
        labels = _require_labels(qtype, g, 2)
        params["target"] = rng.choice(labels)

    body = TEMPLATES[qtype]
    ids = params.get("ids", [])
    if "<id1>" in body:
        body = body.replace("<id1>", label_ref(ids[0]))
    if "<id2>" in body:
        body = body.replace("<id2>", label_ref(ids[1]))
    if "<ids>" in body:
        body = body.replace("<ids>", ", ".join(label_ref(l) for l in ids))
    if "<pos>" in body:
        body = body.replace("<pos>", params["pos"])
    if "<dist>" in body:
        body = body.replace("<dist>", params["dist"])
    if "<action>" in body:
        body = body.replace("<action>", params["action"])
    if "<duration>" in body:
        body = body.replace("<duration>", duration_phrase(params["duration"]))
    if "<speed>" in body:
        body = body.replace("<speed>", speed_phrase(ctx.ego_state.speed))
    return body, params


def binding_key(qtype: str, params: dict) -> tuple:
    return (
        qtype,
        tuple(params.get("ids", ())),
        params.get("pos"),
        params.get("dist"),
        params.get("action"),
        params.get("duration"),
        params.get("target"),
    )


def format_mcq(
    qtype: str,
    body: str,
    payload: AnswerPayload,
    distractors: list[str],
    rng: random.Random,
) -> tuple[str, list[tuple[str, str]], str, str]:
    """Assemble final question text, lettered options, answer letter, and
    explanation.  Binary questions keep the fixed (A) Yes (B) No order;
    everything else is shuffled."""
    if qtype in BINARY_TYPES:
        texts = ["Yes", "No"]
    else:
        texts = [payload.truth] + distractors
        rng.shuffle(texts)
    options = list(zip(OPTION_LETTERS, texts))
    answer = next(l for l, t in options if t == payload.truth)
    listing = "; ".join(f"({l}) {t}" for l, t in options)
    question = f"{body} Choose the best answer from the following options: {listing}. {ANSWER_INSTRUCTION}"
    explanation = f"{payload.explanation} The correct answer is ({answer})."
    return question, options, answer, explanation


# ---------- per-scenario generation ----------


def _frame_image_ref(scenario_id: str, step: int) -> str:
    return f"images/{scenario_id}_{step:04d}.png"


def _grounding_image_ref(scenario_id: str, step: int, target: int) -> str:
    return f"images/{scenario_id}_{step:04d}_g{target}.png"


def generate_for_scenario(
    scenario: ScenarioRecord,
    cfg: GenerateConfig,
    deps: PipelineDeps,
    types: tuple[str, ...],
) -> tuple[list[QARecord], dict, list[tuple[str, bytes]]]:
    """All candidate records for one scenario, before global quota trimming.

    Returns (records, skip counts, images).  Deterministic in
    (scenario, cfg): the RNG stream is derived from the master seed and
    the scenario id, so worker scheduling cannot change the output.
    """
    rng = random.Random(f"{cfg.seed}:{scenario.id}")
    records: list[QARecord] = []
    skips: dict[str, dict[str, int]] = {}
    images: list[tuple[str, bytes]] = []

    def skip(qtype: str, reason: str) -> None:
        skips.setdefault(qtype, {}).setdefault(reason, 0)
        skips[qtype][reason] += 1

    for step in range(0, scenario.horizon, KEYFRAME_INTERVAL):
        ctx, annotated = make_frame_context(scenario, step, deps, render=cfg.render_images)
        frame_ref = _frame_image_ref(scenario.id, step)
        if cfg.render_images and annotated.png is not None:
            images.append((frame_ref, annotated.png))
        seen: set[tuple] = set()
        for qtype in types:
            made = 0
            attempts = 0
            while made < cfg.per_frame_per_type and attempts < cfg.per_frame_per_type * 3:
                attempts += 1
                try:
                    body, params = instantiate(qtype, ctx, rng)
                except Unsupported as exc:
                    skip(qtype, exc.reason)
                    break
                key = binding_key(qtype, params)
                if key in seen:
                    continue
                seen.add(key)
                try:
                    payload = answer_query(qtype, params, ctx)
                    distractors = gen_distractors(qtype, params, payload.truth, payload.aux, ctx, rng)
                except Unsupported as exc:
                    skip(qtype, exc.reason)
                    continue
                except InsufficientCandidates as exc:
                    skip(qtype, str(exc))
                    continue
                question, options, answer, explanation = format_mcq(
                    qtype, body, payload, distractors, rng
                )
                image_ref = frame_ref
                if qtype == "grounding":
                    image_ref = _grounding_image_ref(scenario.id, step, params["target"])
                    if cfg.render_images:
                        frame = frame_at(scenario, step)
                        plan = build_plan(
                            deps.camera,
                            frame.ego_state.pose,
                            scenario.drivable,
                            frame,
                            annotated.boxes,
                            annotated.assignment,
                            highlight_label=params["target"],
                        )
                        images.append((image_ref, encode_png(rasterize(plan))))
                records.append(
                    QARecord(
                        id="",
                        qtype=qtype,
                        question=question,
                        options=options,
                        answer=answer,
                        explanation=explanation,
                        image_ref=image_ref,
                        scenario_id=scenario.id,
                        step=step,
                        domain=scenario.source_tag,
                        params=params,
                    )
                )
                made += 1
    return records, skips, images


def resolve_types(cfg: GenerateConfig) -> tuple[str, ...]:
    types = tuple(t for t in cfg.types if t in ALL_TYPES)
    if cfg.split != "train":
        types = tuple(t for t in types if t not in TRAIN_ONLY_TYPES)
    return types


def generate_dataset(
    scenarios: list[ScenarioRecord],
    cfg: GenerateConfig,
    out_dir: str | Path,
    deps: PipelineDeps | None = None,
) -> dict:
    """Generate the QA dataset for a scenario corpus.

    Output is byte-identical for identical (corpus, config, seed)
    regardless of the worker count: every scenario gets an RNG derived
    from (seed, scenario id), and results are merged in sorted scenario
    order before per-type quotas are applied.
    """
    deps = deps or PipelineDeps()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    types = resolve_types(cfg)
    ordered = sorted(scenarios, key=lambda s: s.id)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(lambda s: generate_for_scenario(s, cfg, deps, types), ordered))
    else:
        results = [generate_for_scenario(s, cfg, deps, types) for s in ordered]

    merged_skips: dict[str, dict[str, int]] = {}
    all_records: list[QARecord] = []
    for records, skips, images in results:
        all_records.extend(records)
        for qtype, reasons in skips.items():
            for reason, count in reasons.items():
                merged_skips.setdefault(qtype, {}).setdefault(reason, 0)
                merged_skips[qtype][reason] += count

    counts: dict[str, int] = {t: 0 for t in types}
    final: list[QARecord] = []
    for rec in all_records:
        if counts[rec.qtype] >= cfg.quota_per_type:
            continue
        counts[rec.qtype] += 1
        rec.id = f"q{len(final):06d}"
        final.append(rec)

    if cfg.render_images:
        image_dir = out / "images"
        image_dir.mkdir(exist_ok=True)
        for _, _, images in results:
            for rel, data in images:
                (out / rel).write_bytes(data)

    qa_path = out / "qa.jsonl"
    with qa_path.open("w", encoding="utf-8") as fh:
        for rec in final:
            fh.write(json.dumps(rec.to_json_obj(), separators=(",", ":"), ensure_ascii=False))
            fh.write("\n")

    by_domain: dict[str, int] = {}
    by_supertype: dict[str, int] = {}
    for rec in final:
        by_domain[rec.domain] = by_domain.get(rec.domain, 0) + 1
        by_supertype[SUPERTYPE[rec.qtype]] = by_supertype.get(SUPERTYPE[rec.qtype], 0) + 1
    manifest = {
        "total": len(final),
        "split": cfg.split,
        "seed": cfg.seed,
        "quota_per_type": cfg.quota_per_type,
        "counts_by_type": {t: counts[t] for t in sorted(counts)},
        "counts_by_supertype": dict(sorted(by_supertype.items())),
        "counts_by_domain": dict(sorted(by_domain.items())),
        "shortfall_by_type": {
            t: cfg.quota_per_type - counts[t] for t in sorted(counts) if counts[t] < cfg.quota_per_type
        },
        "skips": {t: dict(sorted(merged_skips[t].items())) for t in sorted(merged_skips)},
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


# ---------- downsampling ----------


def downsample(records: list, factor: int, seed: int) -> list:
    """Keep exactly len(records) // factor entries, preserving order.

    The selection depends only on (len(records), factor, seed).
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    n = len(records)
    keep = n // factor
    rng = random.Random(f"downsample:{seed}")
    chosen = sorted(rng.sample(range(n), keep))
    return [records[i] for i in chosen]


def downsample_jsonl(src: str | Path, dst: str | Path, factor: int, seed: int) -> int:
    lines = Path(src).read_text(encoding="utf-8").splitlines()
    kept = downsample(lines, factor, seed)
    Path(dst).write_text("".join(line + "\n" for line in kept), encoding="utf-8")
    return len(kept)


# ---------- post-hoc audit ----------


def audit_records(
    records: list[QARecord],
    scenarios: dict[str, ScenarioRecord],
    deps: PipelineDeps | None = None,
) -> list[str]:
    """Re-derive every record's answer from its stored binding.

    Returns a list of problem descriptions; empty means every record has
    exactly one correct option and it is the recorded one.
    """
    deps = deps or PipelineDeps()
    problems: list[str] = []
    ctx_cache: dict[tuple[str, int], FrameContext] = {}
    for rec in records:
        key = (rec.scenario_id, rec.step)
        if key not in ctx_cache:
            scenario = scenarios[rec.scenario_id]
            ctx_cache[key], _ = make_frame_context(scenario, rec.step, deps, render=False)
        ctx = ctx_cache[key]
        try:
            payload = answer_query(rec.qtype, rec.params, ctx)
        except Unsupported as exc:
            problems.append(f"{rec.id}: answer no longer derivable ({exc})")
            continue
        texts = [t for _, t in rec.options]
        if len(set(texts)) != len(texts):
            problems.append(f"{rec.id}: duplicate option texts")
        if rec.option_text(rec.answer) != payload.truth:
            problems.append(
                f"{rec.id}: recorded answer {rec.answer!r} is not the derived truth {payload.truth!r}"
            )
        if sum(1 for t in texts if t == payload.truth) != 1:
            problems.append(f"{rec.id}: truth text does not appear exactly once")
    return problems


def load_records(path: str | Path) -> list[QARecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_json_obj(json.loads(line)))
    return records
