"""
Run configuration: one YAML file, every section a pydantic model that rejects
unknown keys. Command-line overrides are merged before validation.
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

import yaml
from django.conf import settings
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from apps.augmentation.positions import SCHEMES
from apps.ctr.config import VARIANTS, EvaluationConfig, ModelConfig, TrainingConfig
from apps.dataset.config import SyntheticConfig
from apps.encoder.config import EncoderConfig
from apps.retrieval.config import RetrievalConfig
from apps.retrieval.similarity import MEASURES
from main.utils.exceptions import ConfigurationError

SWEEPS = ("variants", "topk", "position_schemes", "similarity_measures", "thresholds")

# flag name -> dotted config key
OVERRIDE_KEYS = {
    "seed": "seed",
    "out": "output_dir",
    "threads": "threads",
    "K": "model.K",
    "L": "model.L",
    "variant": "model.variant",
    "measure": "retrieval.measure",
    "scheme": "model.position_scheme",
}


class DataConfig(SyntheticConfig):
    """Synthetic corpus fields plus where real interactions come from and how they become samples."""

    interactions_path: Optional[str] = None
    split_ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    sample_mode: Literal["last_item", "all_positions"] = "last_item"
    negatives_per_positive: int = Field(1, ge=1)

    def synthetic(self) -> SyntheticConfig:
        return SyntheticConfig(**self.model_dump(include=set(SyntheticConfig.model_fields)))


class AblationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    variants: List[str] = Field(default_factory=lambda: list(VARIANTS))
    topk_values: List[int] = Field(default_factory=lambda: list(range(7)))
    thresholds: List[float] = Field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8])
    measures: List[str] = Field(default_factory=lambda: list(MEASURES))
    schemes: List[str] = Field(default_factory=lambda: list(SCHEMES))


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    output_dir: Optional[str] = None
    threads: int = Field(1, ge=1)
    data: DataConfig = Field(default_factory=DataConfig)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    retrieval: RetrievalConfig = Field(default_factory=RetrievalConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    ablation: AblationConfig = Field(default_factory=AblationConfig)

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir or settings.PIPELINE_OUTPUT_ROOT)

    def resolved(self) -> Dict[str, Any]:
        """Plain mapping for `resolved_config.yaml`."""
        dumped = self.model_dump(mode="json")
        dumped["output_dir"] = str(self.output_path)
        return dumped

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        return validate_run_config(merge_overrides(self.model_dump(mode="json"), overrides))


def merge_overrides(raw: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Set dotted keys (`model.K`) in a nested mapping; None values are ignored."""
    merged = _deep_copy(raw)
    for dotted, value in overrides.items():
        if value is None:
            continue
        section = merged
        *parents, leaf = dotted.split(".")
        for parent in parents:
            section = section.setdefault(parent, {})
            if not isinstance(section, dict):
                raise ConfigurationError(f"cannot override '{dotted}': '{parent}' is not a section")
        section[leaf] = value
    return merged


def _deep_copy(raw: Mapping[str, Any]) -> Dict[str, Any]:
    return {k: _deep_copy(v) if isinstance(v, Mapping) else v for k, v in raw.items()}


def validate_run_config(raw: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as error:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in item['loc']) or '<root>'}: {item['msg']}"
            for item in error.errors()
        )
        raise ConfigurationError(f"invalid run configuration: {problems}") from error


def load_run_config(
    path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    raw: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file {path} does not exist")
        loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigurationError(f"{path} must hold a mapping at the top level")
        raw = loaded or {}
    return validate_run_config(merge_overrides(raw, overrides or {}))
