"""Scenario files.

A scenario file is TOML with a top-level ``scenario`` key naming the
scenario and any number of ``[section]`` tables.  Sections only group keys
for readability: they are flattened onto the scenario's config dataclass, so
every key name must be unique across sections.  Arrays become tuples.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigParseError, ConfigurationError
from .scenarios.acc import ACCConfig, run_acc
from .scenarios.counterexample import CounterexampleConfig, run_counterexample

SCENARIOS = {
    "counterexample": (CounterexampleConfig, run_counterexample),
    "acc": (ACCConfig, run_acc),
}


@dataclasses.dataclass(frozen=True)
class ScenarioSpec:
    scenario: str
    config: object

    def canonical(self) -> dict:
        cfg = dataclasses.asdict(self.config)
        # a run flag, not part of the scenario
        cfg.pop("override_gain_check", None)
        return {"scenario": self.scenario, "config": cfg}

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def run(self):
        return SCENARIOS[self.scenario][1](self.config)

    def with_overrides(self, overrides: dict) -> "ScenarioSpec":
        """Copy with ``key`` (or ``section.key``) values replaced and revalidated."""
        if not overrides:
            return self
        return ScenarioSpec(self.scenario,
                            _build(self.scenario, _bare_keys(overrides), base=self.config))


def parse_text(text: str) -> dict:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(str(exc)) from None
    if not isinstance(doc.get("scenario"), str):
        raise ConfigParseError("missing top-level string key 'scenario'")
    return doc


def flatten(doc: dict) -> dict:
    flat = {}
    for key, value in doc.items():
        if key == "scenario":
            continue
        items = value.items() if isinstance(value, dict) else [(key, value)]
        for name, v in items:
            if isinstance(v, dict):
                raise ConfigurationError(f"nested table {key}.{name} is not supported")
            if name in flat:
                raise ConfigurationError(f"key {name!r} given twice")
            flat[name] = v
    return flat


def _coerce(value):
    if isinstance(value, list):
        return tuple(_coerce(v) for v in value)
    return value


def _build(scenario, values, base=None):
    if scenario not in SCENARIOS:
        raise ConfigurationError(f"unknown scenario {scenario!r}; known: {sorted(SCENARIOS)}")
    cls = SCENARIOS[scenario][0]
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigurationError(f"unknown {scenario} keys: {unknown}")
    values = {k: _coerce(v) for k, v in values.items()}
    try:
        cfg = dataclasses.replace(base, **values) if base is not None else cls(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    try:
        cfg.validate()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from None
    return cfg


def _bare_keys(overrides):
    return {key.rsplit(".", 1)[-1]: value for key, value in overrides.items()}


def load_text(text: str, overrides=None) -> ScenarioSpec:
    doc = parse_text(text)
    values = flatten(doc)
    values.update(_bare_keys(overrides or {}))
    return ScenarioSpec(doc["scenario"], _build(doc["scenario"], values))


def load(path, overrides=None) -> ScenarioSpec:
    """Read, parse and validate a scenario file.

    Raises ``ConfigParseError`` for unreadable or malformed files and
    ``ConfigurationError`` for well-formed files with bad values.
    ``overrides`` maps ``key`` or ``section.key`` to a replacement value and
    is applied before validation.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"{path}: {exc.strerror}") from None
    return load_text(text, overrides)


def parse_value(text: str):
    """Value of a command-line override, read as a TOML scalar or array."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def packaged_configs() -> list:
    """Names of the scenario files shipped with the package."""
    root = resources.files("adaptive_safety") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def packaged_path(name: str) -> str:
    """Filesystem path of a shipped scenario file, e.g. ``packaged_path("acc_aclf_acbf")``."""
    path = resources.files("adaptive_safety") / "configs" / f"{name}.toml"
    if not path.is_file():
        raise FileNotFoundError(f"no packaged config {name!r}; have {packaged_configs()}")
    return str(path)
