"""Experiment configuration files (YAML or JSON).

Example::

    seed: 0
    output_dir: results
    model: models/oracle.json          # path, or an inline model document
    generator:                         # or `stream: path/to/stream.jsonl`
      kind: scenes
      num_scenes: 20
      samples_per_scene: 20
      jitter: 0.02
    policies:
      - name: difference_detection
        thresholds: [0, 0.5, 1.0, .inf]
      - name: temporal_patience
        labeling_mode: final_classifier
        thresholds: [0, 0.5, 1.0, .inf]

Relative paths are resolved against the config file's directory.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .model import load_model, model_from_dict
from .policy import POLICIES, PolicyConfig
from .stream import (
    SceneSpec,
    StreamSample,
    generate_keyword_stream,
    generate_scene_stream,
    generate_zoom_stream,
    read_stream,
)

POLICY_FIELDS = {f.name for f in dataclasses.fields(PolicyConfig)}


@dataclass
class PolicyEntry:
    name: str
    config: PolicyConfig
    thresholds: list[float]
    label: str


@dataclass
class ExperimentConfig:
    base_dir: Path
    model: Any
    stream: str | None = None
    generator: dict | None = None
    policies: list[PolicyEntry] = field(default_factory=list)
    output_dir: Path = Path("results")
    seed: int = 0
    reference_tolerance: float = 0.05

    def load_model(self):
        if isinstance(self.model, dict):
            return model_from_dict(self.model)
        if self.model is None:
            raise ConfigError("model: no model given")
        return load_model(self.base_dir / self.model)

    def load_stream(self) -> list[StreamSample]:
        if self.stream is not None:
            return read_stream(self.base_dir / self.stream)
        if self.generator is None:
            raise ConfigError("stream: give either 'stream' (JSONL path) or 'generator'")
        return build_stream(self.generator, self.seed)


GENERATORS = {
    "scenes": lambda p: generate_scene_stream(SceneSpec(**p)),
    "zoom": lambda p: generate_zoom_stream(**p),
    "keyword": lambda p: generate_keyword_stream(**p),
}


def build_stream(spec: dict, seed: int = 0) -> list[StreamSample]:
    params = dict(spec)
    kind = params.pop("kind", "scenes")
    if kind not in GENERATORS:
        raise ConfigError(f"generator.kind: unknown generator {kind!r}; choose from {sorted(GENERATORS)}")
    params.setdefault("seed", seed)
    try:
        return GENERATORS[kind](params)
    except TypeError as exc:
        raise ConfigError(f"generator: {exc}") from None
    except ConfigError as exc:
        raise ConfigError(f"generator.{exc}") from None


def read_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return doc


def _float(value, key: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: {value!r} is not a number") from None


def _policy(entry: Any, index: int) -> PolicyEntry:
    key = f"policies[{index}]"
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"{key}: each policy needs a 'name'")
    name = entry["name"]
    if name not in POLICIES:
        raise ConfigError(f"{key}.name: unknown policy {name!r}; choose from {sorted(POLICIES)}")
    unknown = set(entry) - POLICY_FIELDS - {"name", "thresholds", "label"}
    if unknown:
        raise ConfigError(f"{key}: unknown keys {sorted(unknown)}")
    thresholds = entry.get("thresholds", [entry.get("threshold", 0.0)])
    if not isinstance(thresholds, list) or not thresholds:
        raise ConfigError(f"{key}.thresholds: must be a non-empty list")
    thresholds = [_float(v, f"{key}.thresholds") for v in thresholds]
    fields = {k: v for k, v in entry.items() if k in POLICY_FIELDS}
    if "threshold" in fields:
        fields["threshold"] = _float(fields["threshold"], f"{key}.threshold")
    try:
        config = PolicyConfig(**fields)
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    label = entry.get("label", name if config.labeling_mode == "majority_vote" else f"{name}-{config.labeling_mode}")
    return PolicyEntry(name, config, thresholds, str(label))


def parse_config(doc: dict, base_dir=".") -> ExperimentConfig:
    known = {"model", "stream", "generator", "policies", "output_dir", "seed", "reference_tolerance"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    policies = [_policy(p, i) for i, p in enumerate(doc.get("policies") or [])]
    labels = [p.label for p in policies]
    if len(set(labels)) != len(labels):
        raise ConfigError("policies: duplicate policy labels; add a distinct 'label' to each")
    generator = doc.get("generator")
    if generator is not None and not isinstance(generator, dict):
        raise ConfigError("generator: must be a mapping")
    try:
        seed = int(doc.get("seed", 0))
    except (TypeError, ValueError):
        raise ConfigError("seed: must be an integer") from None
    return ExperimentConfig(
        base_dir=Path(base_dir),
        model=doc.get("model"),
        stream=doc.get("stream"),
        generator=generator,
        policies=policies,
        output_dir=Path(doc.get("output_dir", "results")),
        seed=seed,
        reference_tolerance=_float(doc.get("reference_tolerance", 0.05), "reference_tolerance"),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(read_document(path), path.parent)
