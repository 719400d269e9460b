"""One JSON configuration document covering every module, with defaults
filled in and echoed back into output manifests for provenance."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .fusion import FusionConfig
from .interstyle import IsrConfig
from .intertask import ItrConfig
from .selection import SelectionPolicy
from .synth import ExperimentConfig, NoiseModel, SceneSpec


@dataclass(frozen=True)
class PipelineConfig:
    selection: SelectionPolicy = field(default_factory=SelectionPolicy)
    instance_selection: SelectionPolicy = field(default_factory=SelectionPolicy)
    itr: ItrConfig = field(default_factory=ItrConfig)
    isr: IsrConfig = field(default_factory=IsrConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    synth: SceneSpec = field(default_factory=SceneSpec)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def to_dict(self) -> dict:
        return {
            "selection": dataclasses.asdict(self.selection),
            "instance_selection": dataclasses.asdict(self.instance_selection),
            "itr": dataclasses.asdict(self.itr),
            "isr": dataclasses.asdict(self.isr),
            "fusion": dataclasses.asdict(self.fusion),
            "synth": dataclasses.asdict(self.synth),
            "experiment": {
                "semantic_policy": dataclasses.asdict(self.experiment.semantic_policy),
                "instance_policy": dataclasses.asdict(self.experiment.instance_policy),
                "itr": dataclasses.asdict(self.experiment.itr),
                "isr": dataclasses.asdict(self.experiment.isr),
                "fusion": dataclasses.asdict(self.experiment.fusion),
            },
        }


def _build(cls, section: dict, name: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ValidationError(
            f"unknown keys {sorted(unknown)} in config section {name!r}"
        )
    return cls(**section)


def config_from_dict(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ValidationError("config document must be a JSON object")
    known_sections = {
        "selection",
        "instance_selection",
        "itr",
        "isr",
        "fusion",
        "synth",
        "experiment",
    }
    unknown = set(doc) - known_sections
    if unknown:
        raise ValidationError(f"unknown config sections {sorted(unknown)}")

    kwargs = {}
    if "selection" in doc:
        kwargs["selection"] = _build(SelectionPolicy, doc["selection"], "selection")
    if "instance_selection" in doc:
        kwargs["instance_selection"] = _build(
            SelectionPolicy, doc["instance_selection"], "instance_selection"
        )
    if "itr" in doc:
        kwargs["itr"] = _build(ItrConfig, doc["itr"], "itr")
    if "isr" in doc:
        kwargs["isr"] = _build(IsrConfig, doc["isr"], "isr")
    if "fusion" in doc:
        kwargs["fusion"] = _build(FusionConfig, doc["fusion"], "fusion")
    if "synth" in doc:
        section = dict(doc["synth"])
        if "noise" in section:
            noise = section["noise"]
            section["noise"] = (
                _build(NoiseModel, noise, "synth.noise")
                if isinstance(noise, dict)
                else NoiseModel(*noise)
            )
        kwargs["synth"] = _build(SceneSpec, section, "synth")
    if "experiment" in doc:
        section = dict(doc["experiment"])
        exp_kwargs = {}
        builders = {
            "semantic_policy": SelectionPolicy,
            "instance_policy": SelectionPolicy,
            "itr": ItrConfig,
            "isr": IsrConfig,
            "fusion": FusionConfig,
        }
        unknown = set(section) - set(builders)
        if unknown:
            raise ValidationError(
                f"unknown keys {sorted(unknown)} in config section 'experiment'"
            )
        for key, cls in builders.items():
            if key in section:
                exp_kwargs[key] = _build(cls, section[key], f"experiment.{key}")
        kwargs["experiment"] = ExperimentConfig(**exp_kwargs)
    return PipelineConfig(**kwargs)


def load_config(path: str | Path | None) -> PipelineConfig:
    """Load the unified config document; None yields all defaults."""
    if path is None:
        return PipelineConfig()
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from exc
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc
    try:
        return config_from_dict(doc)
    except TypeError as exc:
        raise ValidationError(f"malformed config document: {exc}") from exc
