"""``key = value`` configuration files mapped onto PipelineConfig."""
from __future__ import annotations

import os
from dataclasses import fields, replace
from pathlib import Path

from .mining import MiningConfig
from .pipeline import PipelineConfig
from .proposals import ProposalConfig
from .transfer import TrainConfig


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_SECTIONS = {"mining": MiningConfig, "train": TrainConfig, "proposals": ProposalConfig}
_TOP_LEVEL = {f.name for f in fields(PipelineConfig)} - set(_SECTIONS) - {"threads"}


def _key_table() -> dict[str, tuple[str | None, type]]:
    table = {}
    for section, cls in _SECTIONS.items():
        for f in fields(cls):
            table[f.name] = (section, type(getattr(cls(), f.name)))
    for f in fields(PipelineConfig):
        if f.name in _TOP_LEVEL:
            table[f.name] = (None, type(getattr(PipelineConfig(), f.name)))
    return table


KEYS = _key_table()


def parse_config(text: str) -> PipelineConfig:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        kind = KEYS[key][1]
        try:
            values[key] = _parse_bool(value) if kind is bool else kind(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return build_config(values)


def build_config(values: dict[str, object], base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    per_section: dict[str | None, dict] = {}
    for key, value in values.items():
        section, _ = KEYS[key]
        per_section.setdefault(section, {})[key] = value
    try:
        parts = {s: replace(getattr(base, s), **per_section.get(s, {})) for s in _SECTIONS}
        return replace(base, **parts, **per_section.get(None, {}))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike) -> PipelineConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: PipelineConfig) -> str:
    lines = []
    for key, (section, _) in KEYS.items():
        owner = cfg if section is None else getattr(cfg, section)
        lines.append(f"{key} = {getattr(owner, key)}")
    return "\n".join(lines) + "\n"
