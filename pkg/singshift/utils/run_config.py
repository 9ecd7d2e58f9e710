# ==============================================================================
# run_config.py  –  Line-oriented run configuration files
#
#   # comment
#   [schedule]
#   pattern = step
#   T_start = 15
#   [train]
#   preset = desk          (base preset; every other key overrides it)
#
# Sections: schedule, losses, am, voc, dsp, train, data. Unknown sections or keys
# are errors. render_run_config writes every key in dataclass field order, and
# the rendered text parses back to the identical ExperimentConfig.
# ==============================================================================

from __future__ import annotations

import dataclasses
import typing
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from singshift.trainer.config import ConfigError, ExperimentConfig, preset

Pair = Tuple[int, str, str]  # (line_no, key, raw value)

SECTION_ORDER = ("schedule", "losses", "am", "voc", "dsp", "train", "data")
_TRUE, _FALSE = {"true", "yes", "1"}, {"false", "no", "0"}


# ------------------------------------------------------------------------------
# Parsing
# ------------------------------------------------------------------------------


def parse_sections(text: str) -> Dict[str, List[Pair]]:
    """Split config text into {section: [(line_no, key, value), …]}."""
    sections: Dict[str, List[Pair]] = {}
    current: Optional[str] = None

    for line_no, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue

        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if not current:
                raise ConfigError("empty section name", line_no)
            if current in sections:
                raise ConfigError(f"section [{current}] appears twice", line_no)
            sections[current] = []
            continue

        if current is None:
            raise ConfigError("key outside of any section", line_no)
        if "=" not in line:
            raise ConfigError(f"expected `key = value`, got `{line}`", line_no)

        key, value = (part.strip() for part in line.split("=", 1))
        if any(k == key for _, k, _ in sections[current]):
            raise ConfigError(f"duplicate key `{key}` in [{current}]", line_no)
        sections[current].append((line_no, key, value))

    return sections


def _coerce(raw: str, hint: Any, key: str, line_no: int) -> Any:
    origin = typing.get_origin(hint)
    try:
        if hint is bool:
            lowered = raw.lower()
            if lowered not in _TRUE | _FALSE:
                raise ValueError(raw)
            return lowered in _TRUE
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        if hint is str:
            return raw
        if origin is tuple:
            element = typing.get_args(hint)[0]
            items = [item.strip() for item in raw.split(",") if item.strip()]
            return tuple(_coerce(item, element, key, line_no) for item in items)
    except ValueError as exc:
        raise ConfigError(f"bad value `{raw}` for `{key}`", line_no) from exc
    raise ConfigError(f"`{key}` cannot be set from a config file", line_no)


def build_section(section: str, base: Any, pairs: List[Pair]) -> Any:
    """
    Apply `pairs` to the dataclass `base` in a single construction.

    Raises
    ------
    ConfigError
        Unknown key, uncoercible value, or an invalid resulting section.
    """
    hints = typing.get_type_hints(type(base))
    settable = {
        f.name for f in dataclasses.fields(base) if not dataclasses.is_dataclass(getattr(base, f.name))
    }

    changes: Dict[str, Any] = {}
    for line_no, key, raw in pairs:
        if key not in settable:
            raise ConfigError(f"unknown key `{key}` in [{section}]", line_no)
        changes[key] = _coerce(raw, hints[key], key, line_no)

    try:
        return dataclasses.replace(base, **changes)
    except ValueError as exc:
        line_no = pairs[0][0] if pairs else 0
        raise ConfigError(f"[{section}] {exc}", line_no) from exc


# ------------------------------------------------------------------------------
# Rendering
# ------------------------------------------------------------------------------


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(format_value(v) for v in value)
    return str(value)


def render_section(section: str, obj: Any, extra: Optional[Mapping[str, Any]] = None) -> str:
    lines = [f"[{section}]"]
    for key, value in (extra or {}).items():
        lines.append(f"{key} = {format_value(value)}")
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if dataclasses.is_dataclass(value):
            continue
        lines.append(f"{f.name} = {format_value(value)}")
    return "\n".join(lines) + "\n"


def render_run_config(exp: ExperimentConfig) -> str:
    """Resolved config echo; byte-stable for a given ExperimentConfig."""
    blocks = [
        render_section("schedule", exp.train.schedule),
        render_section("losses", exp.train.weights),
        render_section("am", exp.am),
        render_section("voc", exp.voc),
        render_section("dsp", exp.dsp),
        render_section("train", exp.train, extra={"preset": exp.preset}),
        render_section("data", exp.data),
    ]
    return "\n".join(blocks)


# ------------------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------------------


def _build(sections: Dict[str, List[Pair]]) -> ExperimentConfig:
    for name, pairs in sections.items():
        if name not in SECTION_ORDER:
            line_no = pairs[0][0] if pairs else 0
            raise ConfigError(f"unknown section [{name}]", line_no)

    train_pairs = sections.get("train", [])
    preset_name = next((v for _, k, v in train_pairs if k == "preset"), "desk")
    train_pairs = [item for item in train_pairs if item[1] != "preset"]
    base = preset(preset_name)

    schedule = build_section("schedule", base.train.schedule, sections.get("schedule", []))
    weights = build_section("losses", base.train.weights, sections.get("losses", []))

    # epochs follows the schedule length unless set explicitly
    train_base = dataclasses.replace(
        base.train, schedule=schedule, weights=weights, epochs=schedule.T_max
    )
    train = build_section("train", train_base, train_pairs)

    try:
        return ExperimentConfig(
            preset=preset_name,
            train=train,
            am=build_section("am", base.am, sections.get("am", [])),
            voc=build_section("voc", base.voc, sections.get("voc", [])),
            dsp=build_section("dsp", base.dsp, sections.get("dsp", [])),
            data=build_section("data", base.data, sections.get("data", [])),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_run_config(text: str) -> ExperimentConfig:
    return _build(parse_sections(text))


def load_run_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_run_config(text)


def apply_overrides(exp: ExperimentConfig, overrides: Mapping[str, str]) -> ExperimentConfig:
    """
    Apply dotted `section.key = value` overrides to a resolved config.

    Changing `schedule.T_max` without `train.epochs` moves epochs with it.
    """
    sections = parse_sections(render_run_config(exp))
    overrides = dict(overrides)
    if "schedule.T_max" in overrides and "train.epochs" not in overrides:
        overrides["train.epochs"] = overrides["schedule.T_max"]

    for dotted, value in overrides.items():
        if "." not in dotted:
            raise ConfigError(f"override `{dotted}` must look like section.key")
        section, key = dotted.split(".", 1)
        if section not in SECTION_ORDER:
            raise ConfigError(f"unknown section [{section}] in override `{dotted}`")
        pairs = [item for item in sections.setdefault(section, []) if item[1] != key]
        pairs.append((0, key, str(value)))
        sections[section] = pairs

    return _build(sections)
