"""Run configuration, canonical hashing, and experiment records.

A run is described by one JSON file; command-line ``--set key=value``
pairs override file values. Hashing always goes through the canonical
sorted-key serialization, so equal configurations hash equally on every
platform. Result records carry corpus checksums and the package version
and contain no timestamps: reruns of the same configuration must be
byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .metrics import MetricReport, format_report_table

TASKS = ("srl", "entailment", "reading")
TAG_SOURCES = ("srl", "pos", "ne", "none")

# Model-size presets; the full-scale preset exists for completeness and
# is not expected to converge on the toy corpora.
PRESETS = {
    "desk": {"srl_layers": 2, "srl_hidden": 64, "srl_context_dim": 64,
             "entailment_hidden": 48, "reading_hidden": 32},
    "full": {"srl_layers": 8, "srl_hidden": 300, "srl_context_dim": 512,
             "entailment_hidden": 300, "reading_hidden": 100},
}


class ConfigError(ValueError):
    """A run configuration failed validation."""


@dataclass
class RunConfig:
    """Everything one training run needs, flat and serializable."""

    task: str
    train_data: str
    output_dir: str
    dev_data: str | None = None      # defaults to train_data
    srl_data: str | None = None      # annotator corpus when tag_source == srl
    tag_source: str = "srl"
    word_dim: int = 48
    tag_dim: int = 5
    context_dim: int = 64
    indicator_dim: int = 8
    char_dim: int = 16
    use_context: bool = False
    preset: str = "desk"
    hidden_size: int | None = None   # overrides the preset when set
    num_layers: int | None = None    # srl only; overrides the preset
    epochs: int = 25
    learning_rate: float = 2e-3
    batch_size: int = 16
    annotator_epochs: int = 80
    annotator_seed: int = 0
    max_answer_len: int = 17
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)

    # -- validation --------------------------------------------------------

    def validate(self) -> "RunConfig":
        from .datasets import resolve_data_path

        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.tag_source not in TAG_SOURCES:
            raise ConfigError(f"tag_source must be one of {TAG_SOURCES}, got {self.tag_source!r}")
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {sorted(PRESETS)}, got {self.preset!r}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.task != "srl" and self.tag_source != "none" and self.tag_dim < 1:
            raise ConfigError("tag_dim must be >= 1 when a tag source is configured")
        if self.use_context and self.context_dim < 1:
            raise ConfigError("use_context requires context_dim >= 1")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ConfigError("bad schedule: need epochs >= 0, batch_size >= 1, learning_rate > 0")
        resolve_data_path(self.train_data)
        if self.dev_data is not None:
            resolve_data_path(self.dev_data)
        if self.task != "srl" and self.tag_source == "srl":
            if self.srl_data is None:
                raise ConfigError("tag_source 'srl' needs srl_data pointing at an annotator corpus")
            resolve_data_path(self.srl_data)
        return self

    # -- derived values ------------------------------------------------------

    @property
    def dev_data_or_train(self) -> str:
        return self.dev_data if self.dev_data is not None else self.train_data

    def effective_hidden_size(self) -> int:
        if self.hidden_size is not None:
            return self.hidden_size
        return PRESETS[self.preset][f"{self.task}_hidden"]

    def effective_num_layers(self) -> int:
        if self.num_layers is not None:
            return self.num_layers
        return PRESETS[self.preset]["srl_layers"]

    def annotator_sizes(self) -> dict:
        preset = PRESETS[self.preset]
        return {"num_layers": preset["srl_layers"], "hidden_size": preset["srl_hidden"],
                "context_dim": preset["srl_context_dim"]}

    def resolved_output_dir(self) -> Path:
        root = os.environ.get("SRLFUSE_OUTPUT_ROOT", "")
        path = Path(self.output_dir)
        if root and not path.is_absolute():
            path = Path(root) / path
        return path

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        record = dataclasses.asdict(self)
        record["seeds"] = list(self.seeds)
        return record

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:12]

    def derived(self, **changes) -> "RunConfig":
        """A copy with fields replaced (sweep and ablation cells)."""
        return dataclasses.replace(self, **changes)

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, record: dict) -> "RunConfig":
        unknown = set(record) - cls.field_names()
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**record)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                record = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(record, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        record.update(overrides or {})
        return cls.from_dict(record)


@dataclass
class ExperimentResult:
    """Per-seed metrics with aggregates and reproducibility provenance."""

    config_hash: str
    task: str
    config: dict
    per_seed: dict[int, dict[str, float]]
    reports: list[MetricReport]
    provenance: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "aggregate": {r.name: r.value for r in self.reports},
            "config": self.config,
            "config_hash": self.config_hash,
            "per_seed": {str(seed): dict(sorted(metrics.items()))
                         for seed, metrics in sorted(self.per_seed.items())},
            "provenance": self.provenance,
            "task": self.task,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, indent=1)

    def metrics_jsonl(self) -> str:
        return "".join(r.to_json_line() + "\n" for r in self.reports)

    def save(self, out_dir: Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "result.json").write_text(self.to_json() + "\n", encoding="utf-8")
        (out_dir / "metrics.jsonl").write_text(self.metrics_jsonl(), encoding="utf-8")
        (out_dir / "table.txt").write_text(format_report_table(self.reports), encoding="utf-8")
