"""Command-line entry point.

Subcommands: generate (QA dataset), annotate (one frame to PNG), score
(grade a response file), drive (closed-loop episodes), reconstruct
(action sequence from an ego log), report (pretty-print a saved report).

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .annotate import annotate_frame
from .closedloop import DriveConfig, parse_agent_spec, run_suite
from .config import ConfigError, RunConfig, load_config
from .dynamics import EgoState, TooShort, reconstruct_actions
from .projection import DRIVE_CAMERA, GENERATION_CAMERA
from .qa.generate import (
    GenerateConfig,
    PipelineDeps,
    downsample_jsonl,
    generate_dataset,
    load_records,
)
from .qa.score import load_replies, score_records
from .qa.types import ALL_TYPES
from .scenario import ScenarioError, frame_at, load_scenario_dir
from .synth import make_suite


class UsageError(ValueError):
    pass


def _load_run_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return RunConfig()


def _load_scenarios(args, cfg: RunConfig):
    if getattr(args, "suite", False):
        return make_suite()
    scenario_dir = getattr(args, "scenarios", None) or cfg.scenario_dir
    if not scenario_dir:
        raise UsageError("no scenario source: pass --scenarios DIR or --suite")
    if not Path(scenario_dir).is_dir():
        raise UsageError(f"scenario dir not found: {scenario_dir}")
    scenarios = load_scenario_dir(scenario_dir)
    if not scenarios:
        raise UsageError(f"no scenario files in {scenario_dir}")
    return scenarios


def _resolve(value, section: dict, key: str, default=None):
    if value is not None:
        return value
    return section.get(key, default)


def _need_seed(args, section: dict) -> int:
    seed = _resolve(args.seed, section, "seed")
    if seed is None:
        raise UsageError("--seed is required (or set it in the config file)")
    return int(seed)


def _out_dir(args, cfg: RunConfig) -> Path:
    out = getattr(args, "out", None) or cfg.out_dir
    if not out:
        raise UsageError("no output directory: pass --out DIR")
    return Path(out)


# ---------- subcommands ----------


def cmd_generate(args) -> int:
    cfg = _load_run_config(args)
    seed = _need_seed(args, cfg.generate)
    scenarios = _load_scenarios(args, cfg)
    out = _out_dir(args, cfg)
    types = ALL_TYPES
    if args.types:
        requested = tuple(t.strip() for t in args.types.split(",") if t.strip())
        unknown = [t for t in requested if t not in ALL_TYPES]
        if unknown:
            raise UsageError(f"unknown question types: {unknown}")
        types = requested
    gen_cfg = GenerateConfig(
        seed=seed,
        quota_per_type=int(_resolve(args.quota, cfg.generate, "quota_per_type", 100)),
        types=types,
        split=_resolve(args.split, cfg.generate, "split", "train"),
        render_images=not args.no_images,
        per_frame_per_type=int(_resolve(None, cfg.generate, "per_frame_per_type", 2)),
        jobs=args.jobs,
    )
    deps = PipelineDeps(
        camera=GENERATION_CAMERA,
        visibility=cfg.visibility,
        vocab=cfg.vocab,
        vehicle=cfg.vehicle,
        catalog=cfg.catalog,
    )
    manifest = generate_dataset(scenarios, gen_cfg, out, deps)
    if args.downsample:
        kept = downsample_jsonl(
            out / "qa.jsonl", out / "qa_downsampled.jsonl", args.downsample, seed
        )
        print(f"downsampled by {args.downsample}: kept {kept} records")
    print(f"wrote {manifest['total']} questions to {out / 'qa.jsonl'}")
    for qtype, count in sorted(manifest["counts_by_type"].items()):
        print(f"  {qtype.ljust(36)} {count}")
    return 0


def cmd_annotate(args) -> int:
    cfg = _load_run_config(args)
    scenarios = {s.id: s for s in _load_scenarios(args, cfg)}
    if args.scenario not in scenarios:
        raise UsageError(f"scenario {args.scenario!r} not found")
    scenario = scenarios[args.scenario]
    camera = DRIVE_CAMERA if args.camera == "drive" else GENERATION_CAMERA
    frame = frame_at(scenario, args.step)
    annotated = annotate_frame(
        frame,
        camera,
        scenario.drivable,
        cfg.visibility,
        render=True,
        highlight_label=args.highlight,
    )
    Path(args.out).write_bytes(annotated.png)
    labels = ", ".join(
        f"{label}->{track_id}" for label, track_id in sorted(annotated.assignment.labels.items())
    )
    print(f"wrote {args.out} ({len(annotated.boxes)} boxes: {labels})")
    return 0


def cmd_score(args) -> int:
    records = load_records(args.qa)
    replies = load_replies(args.responses)
    report = score_records(records, replies)
    obj = report.to_json_obj()
    if args.out:
        Path(args.out).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    print(_score_table(obj))
    return 0


def _score_table(obj: dict) -> str:
    lines = []
    o = obj["overall"]
    lines.append(
        f"overall: {o['correct']}/{o['total']} = {o['accuracy']:.4f}"
        f"  (parse_fail {o['parse_fail_rate']:.4f}, missing {o['missing']})"
    )
    for section in ("by_supertype", "by_domain", "by_type"):
        lines.append(section.replace("_", " ") + ":")
        for key, s in obj[section].items():
            lines.append(f"  {key.ljust(36)} {s['correct']:>5}/{s['total']:<5} = {s['accuracy']:.4f}")
    return "\n".join(lines)


def cmd_drive(args) -> int:
    cfg = _load_run_config(args)
    seed = _need_seed(args, cfg.drive)
    scenarios = _load_scenarios(args, cfg)
    agent_text = _resolve(args.agent, cfg.drive, "agent", "straight")
    try:
        spec = parse_agent_spec(agent_text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    spec.timeout_s = float(_resolve(None, cfg.drive, "timeout_s", spec.timeout_s))
    spec.retries = int(_resolve(None, cfg.drive, "retries", spec.retries))
    drive_cfg = DriveConfig(
        seed=seed,
        jobs=args.jobs,
        save_images=args.save_images,
        camera=DRIVE_CAMERA,
        visibility=cfg.visibility,
        vocab=cfg.vocab,
        vehicle=cfg.vehicle,
        catalog=cfg.catalog,
    )
    out = getattr(args, "out", None) or cfg.out_dir
    results, report = run_suite(scenarios, spec, drive_cfg, out)
    print(report.table())
    for r in results:
        if r.aborted:
            print(f"aborted: {r.scenario_id}: {r.error}", file=sys.stderr)
    return 1 if report.aborted else 0


def cmd_reconstruct(args) -> int:
    cfg = _load_run_config(args)
    scenarios = {s.id: s for s in _load_scenarios(args, cfg)}
    if args.scenario not in scenarios:
        raise UsageError(f"scenario {args.scenario!r} not found")
    scenario = scenarios[args.scenario]
    ego = scenario.ego
    initial = EgoState(ego.states[0].pose, ego.states[0].speed)
    positions = [st.pose.position for st in ego.states]
    result = reconstruct_actions(initial, positions, cfg.catalog, cfg.vehicle)
    obj = {
        "scenario_id": scenario.id,
        "actions": result.actions,
        "mean_deviation_m": round(result.mean_deviation_m, 9),
        "max_deviation_m": round(result.max_deviation_m, 9),
    }
    if args.out:
        Path(args.out).write_text(json.dumps(obj, indent=2) + "\n")
    print(
        f"{scenario.id}: {len(result.actions)} actions, "
        f"mean deviation {result.mean_deviation_m:.6f} m, "
        f"max {result.max_deviation_m:.6f} m"
    )
    print(" ".join(result.actions))
    return 0


def cmd_report(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        path = path / "metrics.json"
    if not path.is_file():
        raise UsageError(f"no report at {path}")
    obj = json.loads(path.read_text())
    if "overall" in obj:
        print(_score_table(obj))
    elif "route_completion" in obj:
        width = max(len(k) for k in obj)
        for key in sorted(obj):
            print(f"{key.ljust(width)}  {obj[key]}")
    else:
        raise UsageError(f"{path} is neither a score report nor a drive report")
    return 0


# ---------- parser ----------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenebench",
        description="Scenario QA generation, scoring, and closed-loop driving evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="JSON or YAML run config")
        p.add_argument("--scenarios", help="directory of scenario JSON files")
        p.add_argument("--suite", action="store_true", help="use the bundled synthetic suite")
        if seed:
            p.add_argument("--seed", type=int, help="master random seed")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")

    p = sub.add_parser("generate", help="generate a QA dataset")
    common(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--quota", type=int, help="max questions per type")
    p.add_argument("--split", choices=("train", "val", "test"))
    p.add_argument("--types", help="comma-separated question type filter")
    p.add_argument("--no-images", action="store_true", help="skip PNG rendering")
    p.add_argument("--downsample", type=int, help="also write a 1/K downsampled shard")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("annotate", help="render one annotated frame to PNG")
    common(p, seed=False)
    p.add_argument("--scenario", required=True, help="scenario id")
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--highlight", type=int, help="draw a highlight around this label")
    p.add_argument("--camera", choices=("generation", "drive"), default="generation")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("score", help="grade a response file against a QA shard")
    p.add_argument("--qa", required=True, help="qa.jsonl path")
    p.add_argument("--responses", required=True, help="JSONL of {id, response}")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("drive", help="run closed-loop episodes")
    common(p)
    p.add_argument("--out", help="run directory for logs and metrics")
    p.add_argument("--agent", help="random | brake | straight | remote:URL")
    p.add_argument("--save-images", action="store_true", help="persist observation PNGs")
    p.set_defaults(func=cmd_drive)

    p = sub.add_parser("reconstruct", help="fit catalog actions to an ego log")
    common(p, seed=False)
    p.add_argument("--scenario", required=True, help="scenario id")
    p.add_argument("--out", help="write the action sequence JSON here")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("report", help="pretty-print a saved JSON report")
    p.add_argument("path", help="report file or run directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ScenarioError, TooShort, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
