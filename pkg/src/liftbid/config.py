"""YAML run configuration: four sections mapped onto the experiment dataclasses.

Every key of every section must be present, so the effective configuration is
always explicit; `resolved_text` renders the full document with defaults.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

from .domain import ARMS
from .harness.experiment import ExperimentPlan
from .learning.learners import LearnerConfig
from .market import MarketConfig
from .pacing import PacingConfig

SECTIONS = {
    "market": MarketConfig,
    "learner": LearnerConfig,
    "pacing": PacingConfig,
    "experiment": ExperimentPlan,
}
_NESTED = ("market", "learner", "pacing")  # ExperimentPlan fields filled from other sections


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = "" if key is None else f" [{key}" + ("" if line is None else f", line {line}") + "]"
        super().__init__(message + where)
        self.message = message
        self.key = key
        self.line = line


def _section_fields(name: str) -> list[dataclasses.Field]:
    return [f for f in dataclasses.fields(SECTIONS[name]) if not (name == "experiment" and f.name in _NESTED)]


def _default(f: dataclasses.Field):
    if f.default is not dataclasses.MISSING:
        return f.default
    return f.default_factory()


def _key_lines(node, prefix="") -> dict[str, int]:
    """Dotted key -> 1-based source line, from the composed YAML tree."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}{k.value}"
            out[key] = k.start_mark.line + 1
            out.update(_key_lines(v, key + "."))
    return out


def _coerce(value, default, key: str, line: int | None):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, dict):
        ok = isinstance(value, dict)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"expected {type(default).__name__}, got {value!r}", key, line)
    return value


def parse_config(text: str, source: str = "<config>") -> ExperimentPlan:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"{source}: invalid YAML", None, None if mark is None else mark.line + 1) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping of sections")
    lines = _key_lines(root)

    for name in data:
        if name not in SECTIONS:
            raise ConfigError("unknown section", str(name), lines.get(str(name)))
    values = {}
    for name in SECTIONS:
        if name not in data:
            raise ConfigError("missing section", name)
        section = data[name]
        if not isinstance(section, dict):
            raise ConfigError("section must be a mapping", name, lines.get(name))
        known = {f.name: f for f in _section_fields(name)}
        for k in section:
            if k not in known:
                key = f"{name}.{k}"
                raise ConfigError("unknown key", key, lines.get(key))
        kwargs = {}
        for k, f in known.items():
            key = f"{name}.{k}"
            if k not in section:
                raise ConfigError("missing key", key, lines.get(name))
            kwargs[k] = _coerce(section[k], _default(f), key, lines.get(key))
        values[name] = kwargs

    ratios = values["experiment"].get("budget_ratios", {})
    for arm in ratios:
        if arm not in ARMS:
            key = f"experiment.budget_ratios.{arm}"
            raise ConfigError("unknown arm", key, lines.get(key))
    for arm in ARMS:
        if arm not in ratios:
            raise ConfigError("missing key", f"experiment.budget_ratios.{arm}",
                              lines.get("experiment.budget_ratios"))
        ratios[arm] = _coerce(ratios[arm], 0.0, f"experiment.budget_ratios.{arm}",
                              lines.get(f"experiment.budget_ratios.{arm}"))

    built = {}
    for name in _NESTED:
        built[name] = _build(SECTIONS[name], values[name], name, lines)
    return _build(ExperimentPlan, {**values["experiment"], **built}, "experiment", lines)


def _build(cls, kwargs, name, lines):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), name, lines.get(name)) from exc


def load_config(path) -> ExperimentPlan:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
    return parse_config(text, str(path))


def plan_to_dict(plan: ExperimentPlan) -> dict:
    out = {name: dataclasses.asdict(getattr(plan, name)) for name in _NESTED}
    out["experiment"] = {f.name: getattr(plan, f.name) for f in _section_fields("experiment")}
    out["experiment"]["budget_ratios"] = {a: float(plan.budget_ratios[a]) for a in ARMS}
    return out


def resolved_text(plan: ExperimentPlan) -> str:
    """Canonical YAML of the effective configuration; parses back to an equal plan."""
    return yaml.safe_dump(plan_to_dict(plan), sort_keys=False, default_flow_style=False)
