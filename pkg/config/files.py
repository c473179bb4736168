"""YAML run configuration files."""
from __future__ import annotations

import pathlib
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping, Optional

import yaml

from core.errors import ConfigurationError
from harness.run_config import RunConfig
from l2s.config import L2SConfig
from meta.config import MetaConfig
from optim.groups import ParamGroupConfig, optimizer_preset
from scene.dataset import SceneSpec

SECTIONS = ("meta", "model", "optimizer", "run", "scene")
DEFAULT_MODEL_PRESET = "desk"


@dataclass
class FileConfig:
    meta: MetaConfig = field(default_factory=MetaConfig)
    model: L2SConfig = field(default_factory=lambda: L2SConfig.from_mapping({"preset": DEFAULT_MODEL_PRESET}))
    optimizer: Optional[ParamGroupConfig] = None
    run: RunConfig = field(default_factory=RunConfig)
    scene: SceneSpec = field(default_factory=SceneSpec)
    optimizer_section: dict[str, Any] = field(default_factory=dict)

    def adam_config(self, preset: str, total_steps: int = 30000) -> Optional[ParamGroupConfig]:
        """The file's optimizer overrides layered on ``preset``.

        None when the file has no optimizer section or the section names another preset.
        """
        if not self.optimizer_section:
            return None
        named = self.optimizer_section.get("preset")
        if named is not None and named != preset:
            return None
        return optimizer_config({"total_steps": total_steps, **self.optimizer_section, "preset": preset})


def optimizer_config(values: Mapping[str, Any]) -> ParamGroupConfig:
    values = dict(values)
    base = optimizer_preset(values.pop("preset", "3dgs"), int(values.pop("total_steps", 30000)))
    known = {f.name for f in fields(ParamGroupConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigurationError(f"Unknown optimizer settings: {unknown}")
    if "betas" in values:
        values["betas"] = tuple(values["betas"])
    if "frozen" in values:
        values["frozen"] = tuple(values["frozen"])
    if "lrs" in values:
        values["lrs"] = {**base.lrs, **values["lrs"]}
    return replace(base, **values)


def scene_spec(values: Mapping[str, Any]) -> SceneSpec:
    known = {f.name for f in fields(SceneSpec)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigurationError(f"Unknown scene settings: {unknown}")
    try:
        return SceneSpec(**dict(values))
    except TypeError as exc:
        raise ConfigurationError(f"Invalid scene settings: {exc}") from exc


def parse_config(document: Mapping[str, Any]) -> FileConfig:
    """Build every section, layering file values over defaults."""
    if not isinstance(document, Mapping):
        raise ConfigurationError("A config file must hold a mapping of sections.")
    unknown = sorted(set(document) - set(SECTIONS))
    if unknown:
        raise ConfigurationError(f"Unknown config sections: {unknown}")
    sections = {name: dict(document.get(name) or {}) for name in SECTIONS}
    sections["model"].setdefault("preset", DEFAULT_MODEL_PRESET)
    return FileConfig(
        meta=MetaConfig.from_mapping(sections["meta"]),
        model=L2SConfig.from_mapping(sections["model"]),
        optimizer=optimizer_config(sections["optimizer"]) if document.get("optimizer") else None,
        run=RunConfig.from_mapping(sections["run"]),
        scene=scene_spec(sections["scene"]),
        optimizer_section=sections["optimizer"],
    )


def load_config_file(path: Optional[pathlib.Path | str]) -> FileConfig:
    """Defaults when ``path`` is None; otherwise the parsed YAML file."""
    if path is None:
        return FileConfig()
    path = pathlib.Path(path)
    try:
        document = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise ConfigurationError(f"Cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"Malformed YAML in {path}: {exc}") from exc
    return parse_config(document)


__all__ = ["FileConfig", "SECTIONS", "load_config_file", "optimizer_config", "parse_config", "scene_spec"]
