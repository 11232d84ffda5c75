"""INI configuration: ``[template]``, ``[backend]`` and ``[loss]`` sections.

Template values are JSON strings so that escapes such as ``\\n`` survive
editing, e.g. ``separator = "\\n\\nIntent:\\n\\n"``.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .backend import BackendConfig
from .losslab import LossConfig
from .prompts import PromptTemplate


class ConfigError(ValueError):
    pass


@dataclass
class Settings:
    template: PromptTemplate = field(default_factory=PromptTemplate)
    backend: dict = field(default_factory=dict)
    loss: LossConfig = field(default_factory=LossConfig)


_BACKEND_TYPES = {f.name: f.type for f in fields(BackendConfig)}


def _backend_value(key: str, raw: str):
    if key not in _BACKEND_TYPES:
        raise ConfigError(f"unknown [backend] key {key!r}")
    if key == "api_key":
        raise ConfigError("api_key may not be stored in the config file; use INTERPROMPT_API_KEY")
    kind = str(_BACKEND_TYPES[key])
    try:
        if key == "stop":
            value = json.loads(raw)
            return tuple(value if isinstance(value, list) else [value])
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[backend] {key}: {exc}") from None
    return raw


def load_settings(path=None) -> Settings:
    settings = Settings()
    if path is None:
        return settings
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = set(parser.sections()) - {"template", "backend", "loss"}
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {', '.join(sorted(unknown))}")
    try:
        if parser.has_section("template"):
            settings.template = PromptTemplate.from_config_section(dict(parser["template"]))
        if parser.has_section("loss"):
            settings.loss = LossConfig(**{k: float(v) for k, v in parser["loss"].items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if parser.has_section("backend"):
        settings.backend = {k: _backend_value(k, v) for k, v in parser["backend"].items()}
    return settings


def dump_template(template: PromptTemplate) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["template"] = template.to_config_section()
    lines = []
    for key, value in parser["template"].items():
        lines.append(f"{key} = {value}")
    return "[template]\n" + "\n".join(lines) + "\n"
