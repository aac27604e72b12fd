import json
import random
from pathlib import Path

import pytest

from scenebench.qa.answers import answer_query
from scenebench.qa.generate import (
    ANSWER_INSTRUCTION,
    GenerateConfig,
    PipelineDeps,
    audit_records,
    binding_key,
    downsample,
    downsample_jsonl,
    format_mcq,
    generate_dataset,
    instantiate,
    load_records,
    make_frame_context,
    resolve_types,
)
from scenebench.qa.score import load_replies, score_records
from scenebench.qa.types import (
    ALL_TYPES,
    BINARY_TYPES,
    DURATIONS_S,
    SUPERTYPE,
    TRAIN_ONLY_TYPES,
    QARecord,
    Unsupported,
    record_from_json_obj,
)

from conftest import build_toy_scenario


@pytest.fixture(scope="module")
def ctx0():
    ctx, _ = make_frame_context(build_toy_scenario(), 0, PipelineDeps())
    return ctx


# ---------- instantiate ----------


def test_instantiate_identify(ctx0):
    rng = random.Random(0)
    body, params = instantiate("identify_distance", ctx0, rng)
    assert params["ids"][0] in ctx0.graph.labels()
    assert f"<{params['ids'][0]}>" in body
    assert "<id1>" not in body


def test_instantiate_relative_position_binds_decisive_pair(ctx0):
    rng = random.Random(1)
    for _ in range(20):
        _, params = instantiate("relative_position", ctx0, rng)
        a, b = params["ids"]
        # the stored edge key is (b, a): B's placement relative to A
        assert (b, a) in ctx0.graph.edges


def test_instantiate_describe_and_embodied(ctx0):
    rng = random.Random(2)
    _, params = instantiate("describe_sector", ctx0, rng)
    assert params["pos"] in ctx0.graph.vocab.sector_words
    _, params = instantiate("describe_distance", ctx0, rng)
    assert params["dist"] in ctx0.graph.vocab.distance_words
    body, params = instantiate("embodied_collision", ctx0, rng)
    assert params["action"] in ctx0.catalog.names()
    assert params["duration"] in DURATIONS_S
    assert params["action"] in body
    assert "<duration>" not in body and "<action>" not in body


def test_instantiate_speed_substitution(ctx0):
    rng = random.Random(3)
    body, _ = instantiate("embodied_distance", ctx0, rng)
    assert "10.0 m/s" in body


def test_instantiate_unsupported_on_sparse_frames(ctx0, toy):
    from scenebench.dynamics import VehicleParams, default_catalog
    from scenebench.qa.answers import FrameContext
    from scenebench.scenario import frame_at
    from scenebench.scenegraph import build_scene_graph

    frame = frame_at(toy, 0)
    lonely = FrameContext(
        toy, 0, build_scene_graph(frame, {0: "car_a"}), default_catalog(), VehicleParams()
    )
    rng = random.Random(4)
    with pytest.raises(Unsupported):
        instantiate("grounding", lonely, rng)
    with pytest.raises(Unsupported):
        instantiate("pick_closer", lonely, rng)
    # single-object types still work
    body, params = instantiate("identify_type", lonely, rng)
    assert params["ids"] == [0]


def test_instantiate_unknown_type(ctx0):
    with pytest.raises(Unsupported):
        instantiate("quiz_me", ctx0, random.Random(0))


def test_binding_key_distinguishes_params():
    k1 = binding_key("identify_distance", {"ids": [0]})
    k2 = binding_key("identify_distance", {"ids": [1]})
    k3 = binding_key("identify_position", {"ids": [0]})
    assert k1 != k2 and k1 != k3
    assert k1 == binding_key("identify_distance", {"ids": [0]})


# ---------- format_mcq ----------


def test_format_mcq_binary_fixed_order(ctx0):
    payload = answer_query("relative_heading", {"ids": [0, 2]}, ctx0)
    q, options, answer, expl = format_mcq(
        "relative_heading", "Are they aligned?", payload, [], random.Random(0)
    )
    assert options == [("A", "Yes"), ("B", "No")]
    assert answer == "A"
    assert q.endswith(ANSWER_INSTRUCTION)
    assert "(A) Yes; (B) No" in q
    assert expl.endswith(" The correct answer is (A).")


def test_format_mcq_shuffles_but_keeps_truth(ctx0):
    payload = answer_query("identify_distance", {"ids": [2]}, ctx0)
    distractors = ["close", "far", "very close"]
    seen_orders = set()
    for seed in range(10):
        q, options, answer, expl = format_mcq(
            "identify_distance", "How far?", payload, list(distractors), random.Random(seed)
        )
        texts = [t for _, t in options]
        assert sorted(texts) == sorted(["medium"] + distractors)
        assert dict(options)[answer] == "medium"
        assert expl.endswith(f" The correct answer is ({answer}).")
        seen_orders.add(tuple(texts))
    assert len(seen_orders) > 1


def test_format_mcq_is_deterministic_per_rng(ctx0):
    payload = answer_query("identify_distance", {"ids": [2]}, ctx0)
    a = format_mcq("identify_distance", "How far?", payload, ["close", "far"], random.Random(7))
    b = format_mcq("identify_distance", "How far?", payload, ["close", "far"], random.Random(7))
    assert a == b


# ---------- record round-trip ----------


def test_record_json_round_trip():
    rec = QARecord(
        id="q000001",
        qtype="identify_distance",
        question="How far? (A) close; (B) far",
        options=[("A", "close"), ("B", "far")],
        answer="A",
        explanation="It is close. The correct answer is (A).",
        image_ref="images/toy_001_0000.png",
        scenario_id="toy_001",
        step=0,
        domain="sim",
        params={"ids": [2]},
    )
    back = record_from_json_obj(json.loads(json.dumps(rec.to_json_obj())))
    assert back == rec
    assert back.option_text("B") == "far"
    with pytest.raises(KeyError):
        back.option_text("Z")


# ---------- dataset generation ----------


def _gen(tmp_path, **kw):
    defaults = dict(seed=11, quota_per_type=6, render_images=False, per_frame_per_type=2)
    defaults.update(kw)
    cfg = GenerateConfig(**defaults)
    scenarios = [build_toy_scenario()]
    manifest = generate_dataset(scenarios, cfg, tmp_path)
    return cfg, manifest


def test_generate_dataset_quota_and_ids(tmp_path):
    cfg, manifest = _gen(tmp_path)
    records = load_records(tmp_path / "qa.jsonl")
    assert manifest["total"] == len(records)
    assert [r.id for r in records] == [f"q{i:06d}" for i in range(len(records))]
    counts = manifest["counts_by_type"]
    assert all(v <= cfg.quota_per_type for v in counts.values())
    assert sum(counts.values()) == manifest["total"]
    assert manifest["seed"] == 11
    # supertype counts partition the total
    assert sum(manifest["counts_by_supertype"].values()) == manifest["total"]
    assert manifest["counts_by_domain"] == {"sim": manifest["total"]}


def test_generate_dataset_answers_are_the_truth(tmp_path):
    _gen(tmp_path)
    records = load_records(tmp_path / "qa.jsonl")
    toy = build_toy_scenario()
    problems = audit_records(records, {toy.id: toy})
    assert problems == []


def test_val_split_excludes_train_only_types(tmp_path):
    _, manifest = _gen(tmp_path, split="val")
    for t in TRAIN_ONLY_TYPES:
        assert t not in manifest["counts_by_type"]
    assert resolve_types(GenerateConfig(seed=0, split="val")) == tuple(
        t for t in ALL_TYPES if t not in TRAIN_ONLY_TYPES
    )


def test_generate_rerun_is_byte_identical(tmp_path):
    _gen(tmp_path / "a")
    _gen(tmp_path / "b")
    assert (tmp_path / "a/qa.jsonl").read_bytes() == (tmp_path / "b/qa.jsonl").read_bytes()
    assert (tmp_path / "a/manifest.json").read_bytes() == (tmp_path / "b/manifest.json").read_bytes()


def test_generate_jobs_do_not_change_output(tmp_path, suite):
    scenarios = suite[:3]
    cfg1 = GenerateConfig(seed=5, quota_per_type=8, render_images=False, jobs=1)
    cfg4 = GenerateConfig(seed=5, quota_per_type=8, render_images=False, jobs=4)
    generate_dataset(scenarios, cfg1, tmp_path / "j1")
    generate_dataset(scenarios, cfg4, tmp_path / "j4")
    assert (tmp_path / "j1/qa.jsonl").read_bytes() == (tmp_path / "j4/qa.jsonl").read_bytes()
    assert (tmp_path / "j1/manifest.json").read_bytes() == (tmp_path / "j4/manifest.json").read_bytes()


def test_generate_writes_images_and_grounding_variants(tmp_path):
    cfg = GenerateConfig(
        seed=3,
        quota_per_type=4,
        types=("identify_distance", "grounding"),
        render_images=True,
    )
    generate_dataset([build_toy_scenario(6)], cfg, tmp_path)
    records = load_records(tmp_path / "qa.jsonl")
    assert records
    for rec in records:
        path = tmp_path / rec.image_ref
        assert path.exists(), rec.image_ref
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    grounding = [r for r in records if r.qtype == "grounding"]
    assert grounding
    for rec in grounding:
        assert rec.image_ref.endswith(f"_g{rec.params['target']}.png")


def test_binary_records_have_fixed_options(tmp_path):
    _gen(tmp_path, quota_per_type=10)
    for rec in load_records(tmp_path / "qa.jsonl"):
        if rec.qtype in BINARY_TYPES:
            assert rec.options == [("A", "Yes"), ("B", "No")]
        texts = [t for _, t in rec.options]
        assert len(set(texts)) == len(texts)
        assert rec.question.endswith(ANSWER_INSTRUCTION)


# ---------- downsample ----------


def test_downsample_exact_count_and_order():
    records = list(range(1000))
    kept = downsample(records, 4, seed=9)
    assert len(kept) == 250
    assert kept == sorted(kept)
    assert kept == downsample(records, 4, seed=9)
    assert kept != downsample(records, 4, seed=10)


def test_downsample_depends_only_on_length_factor_seed():
    a = downsample(list(range(100)), 3, seed=1)
    b = downsample([f"x{i}" for i in range(100)], 3, seed=1)
    assert [f"x{i}" for i in a] == b
    assert len(a) == 33


def test_downsample_rejects_bad_factor():
    with pytest.raises(ValueError):
        downsample([1, 2, 3], 0, seed=0)


def test_downsample_jsonl(tmp_path):
    src = tmp_path / "src.jsonl"
    src.write_text("".join(f'{{"id":{i}}}\n' for i in range(20)), encoding="utf-8")
    dst = tmp_path / "dst.jsonl"
    n = downsample_jsonl(src, dst, 5, seed=2)
    assert n == 4
    lines = dst.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 4
    src_lines = src.read_text(encoding="utf-8").splitlines()
    pos = [src_lines.index(l) for l in lines]
    assert pos == sorted(pos)


# ---------- audit tampering ----------


def test_audit_detects_wrong_answer_and_duplicates(tmp_path):
    _gen(tmp_path)
    records = load_records(tmp_path / "qa.jsonl")
    toy = build_toy_scenario()
    scenarios = {toy.id: toy}

    tampered = [r for r in records if len(r.options) >= 2][0]
    letters = [l for l, _ in tampered.options]
    tampered.answer = letters[1] if tampered.answer == letters[0] else letters[0]
    problems = audit_records(records, scenarios)
    assert any(tampered.id in p and "not the derived truth" in p for p in problems)

    records2 = load_records(tmp_path / "qa.jsonl")
    dup = [r for r in records2 if len(r.options) >= 2][0]
    dup.options = [(l, dup.options[0][1]) for l, _ in dup.options]
    problems = audit_records(records2, scenarios)
    assert any(dup.id in p for p in problems)


# ---------- scoring ----------


def _score_fixture(tmp_path):
    _gen(tmp_path)
    return load_records(tmp_path / "qa.jsonl")


def test_score_oracle_and_letter_bias(tmp_path):
    records = _score_fixture(tmp_path)
    oracle = {r.id: r.answer for r in records}
    report = score_records(records, oracle)
    assert report.overall.accuracy == 1.0
    assert report.overall.parse_fail_rate == 0.0
    assert report.overall.total == len(records)

    all_a = {r.id: "A" for r in records}
    biased = score_records(records, all_a)
    assert biased.overall.correct == sum(1 for r in records if r.answer == "A")
    assert 0.0 < biased.overall.accuracy < 1.0


def test_score_missing_and_garbage(tmp_path):
    records = _score_fixture(tmp_path)
    half = {r.id: r.answer for r in records[: len(records) // 2]}
    report = score_records(records, half)
    assert report.overall.missing == len(records) - len(half)
    assert report.overall.correct == len(half)

    garbage = {r.id: "I cannot provide a definitive answer." for r in records}
    report = score_records(records, garbage)
    assert report.overall.parse_fail_rate == 1.0
    assert report.overall.accuracy == 0.0
    assert report.overall.missing == 0


def test_score_slices_partition_total(tmp_path):
    records = _score_fixture(tmp_path)
    oracle = {r.id: r.answer for r in records}
    report = score_records(records, oracle)
    assert sum(s.total for s in report.by_type.values()) == report.overall.total
    assert sum(s.total for s in report.by_supertype.values()) == report.overall.total
    for qtype, stats in report.by_type.items():
        assert SUPERTYPE[qtype] in report.by_supertype
        assert stats.accuracy == 1.0
    obj = report.to_json_obj()
    assert obj["overall"]["accuracy"] == 1.0


def test_load_replies_later_wins_and_validates(tmp_path):
    path = tmp_path / "replies.jsonl"
    path.write_text(
        '{"id": "q1", "response": "A"}\n\n{"id": "q1", "response": "B"}\n',
        encoding="utf-8",
    )
    replies = load_replies(path)
    assert replies == {"q1": "B"}
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "q1"}\n', encoding="utf-8")
    with pytest.raises(ValueError):
        load_replies(bad)
