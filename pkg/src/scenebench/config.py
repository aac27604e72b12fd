"""Run configuration: one JSON or YAML file validated up front.

Sections (all optional, defaults apply): paths, generate, drive,
vehicle, catalog, vocab, visibility.  Validation failures raise
ConfigError before any work starts; the CLI maps that to exit code 2.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .dynamics import ActionCatalog, VehicleParams, default_catalog
from .scenegraph import VisibilityPolicy, VocabConfig


class ConfigError(ValueError):
    pass


_SECTIONS = ("paths", "generate", "drive", "vehicle", "catalog", "vocab", "visibility")


@dataclass
class RunConfig:
    scenario_dir: str | None = None
    out_dir: str | None = None
    generate: dict = field(default_factory=dict)
    drive: dict = field(default_factory=dict)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    catalog: ActionCatalog = field(default_factory=default_catalog)
    vocab: VocabConfig = field(default_factory=VocabConfig)
    visibility: VisibilityPolicy = field(default_factory=VisibilityPolicy)


def _require_dict(obj, name: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return obj


def _number(section: dict, key: str, default: float) -> float:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key!r} must be a number")
    return float(value)


def _build_vehicle(section: dict) -> VehicleParams:
    base = VehicleParams()
    kwargs = {}
    for name in (
        "s_max_deg",
        "f_max",
        "b_max",
        "wheelbase_m",
        "v_max_mps",
        "accel_mps2",
        "brake_mps2",
        "drag_per_s",
    ):
        kwargs[name] = _number(section, name, getattr(base, name))
    unknown = set(section) - set(kwargs)
    if unknown:
        raise ConfigError(f"unknown vehicle keys: {sorted(unknown)}")
    params = VehicleParams(**kwargs)
    if params.wheelbase_m <= 0 or params.v_max_mps <= 0:
        raise ConfigError("wheelbase_m and v_max_mps must be positive")
    return params


def _build_catalog(section: dict) -> ActionCatalog:
    actions = {}
    for name, pair in section.items():
        if (
            not isinstance(pair, (list, tuple))
            or len(pair) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in pair)
        ):
            raise ConfigError(f"catalog action {name!r} must be a [a1, a2] number pair")
        actions[str(name)] = (float(pair[0]), float(pair[1]))
    try:
        return ActionCatalog(actions)
    except Exception as exc:
        raise ConfigError(f"bad action catalog: {exc}") from exc


def _build_vocab(section: dict) -> VocabConfig:
    base = VocabConfig()
    bounds = section.get("distance_bounds", list(base.distance_bounds))
    if not isinstance(bounds, (list, tuple)) or len(bounds) != 3:
        raise ConfigError("distance_bounds must be three ascending numbers")
    bounds = tuple(float(b) for b in bounds)
    if not (0 < bounds[0] < bounds[1] < bounds[2]):
        raise ConfigError("distance_bounds must be three ascending positive numbers")
    words = section.get("distance_words", list(base.distance_words))
    if not isinstance(words, (list, tuple)) or len(words) != 4:
        raise ConfigError("distance_words must list four bucket names")
    same_dir = _number(section, "same_direction_deg", base.same_direction_deg)
    unknown = set(section) - {"distance_bounds", "distance_words", "same_direction_deg"}
    if unknown:
        raise ConfigError(f"unknown vocab keys: {sorted(unknown)}")
    return VocabConfig(
        distance_bounds=bounds,
        distance_words=tuple(str(w) for w in words),
        same_direction_deg=same_dir,
    )


def _build_visibility(section: dict) -> VisibilityPolicy:
    base = VisibilityPolicy()
    fraction = _number(section, "min_visible_fraction", base.min_visible_fraction)
    pixels = _number(section, "min_pixels", base.min_pixels)
    max_range = _number(section, "max_range_m", base.max_range_m)
    unknown = set(section) - {"min_visible_fraction", "min_pixels", "max_range_m"}
    if unknown:
        raise ConfigError(f"unknown visibility keys: {sorted(unknown)}")
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError("min_visible_fraction must be in [0, 1]")
    if pixels < 0 or max_range <= 0:
        raise ConfigError("min_pixels must be >= 0 and max_range_m > 0")
    return VisibilityPolicy(fraction, int(pixels), max_range)


def parse_config(raw: dict) -> RunConfig:
    raw = _require_dict(raw, "config")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    paths = _require_dict(raw.get("paths", {}), "paths")
    bad = set(paths) - {"scenario_dir", "out_dir"}
    if bad:
        raise ConfigError(f"unknown paths keys: {sorted(bad)}")
    cfg = RunConfig(
        scenario_dir=paths.get("scenario_dir"),
        out_dir=paths.get("out_dir"),
        generate=_require_dict(raw.get("generate", {}), "generate"),
        drive=_require_dict(raw.get("drive", {}), "drive"),
        vehicle=_build_vehicle(_require_dict(raw.get("vehicle", {}), "vehicle")),
        catalog=_build_catalog(_require_dict(raw.get("catalog", {}), "catalog"))
        if raw.get("catalog")
        else default_catalog(),
        vocab=_build_vocab(_require_dict(raw.get("vocab", {}), "vocab")),
        visibility=_build_visibility(_require_dict(raw.get("visibility", {}), "visibility")),
    )
    return cfg


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text(encoding="utf-8")
    try:
        if p.suffix == ".json":
            raw = json.loads(text)
        else:
            raw = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    if raw is None:
        raw = {}
    return parse_config(raw)
