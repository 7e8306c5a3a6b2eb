from typing import List, Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

POOLING_MODES = ("suin", "avg", "target_attention")
VARIANTS = ("full", "no_uta", "no_uta_keep_be", "random_users", "no_su_no_uta", "no_pos")
GROUPINGS = ("none", "seq_length", "aug_ratio")

Pooling = Literal["suin", "avg", "target_attention"]
Variant = Literal["full", "no_uta", "no_uta_keep_be", "random_users", "no_su_no_uta", "no_pos"]
Scheme = Literal["UTPE", "TPE", "STPE", "None"]


class ModelConfig(BaseModel):
    """CTR model shape. `d` is shared by item embeddings and adapted user embeddings."""

    model_config = ConfigDict(extra="forbid")

    d: int = Field(16, ge=1)
    L: int = Field(20, ge=1)
    K: int = Field(2, ge=0)
    pooling: Pooling = "suin"
    variant: Variant = "full"
    position_scheme: Scheme = "UTPE"
    adapter_hidden: List[int] = Field(default_factory=lambda: [32, 16])
    adapter_dropout: float = Field(0.0, ge=0.0, lt=1.0)
    mlp_hidden: List[int] = Field(default_factory=lambda: [200, 80])
    literal_projection_pairing: bool = False

    @field_validator("adapter_hidden", "mlp_hidden")
    @classmethod
    def positive_widths(cls, widths: List[int]) -> List[int]:
        if any(width < 1 for width in widths):
            raise ValueError(f"layer widths must be positive, got {widths}")
        return widths

    @model_validator(mode="after")
    def adapter_reaches_d(self):
        if not self.adapter_hidden or self.adapter_hidden[-1] != self.d:
            raise ValueError(
                f"adapter_hidden must end at d={self.d}, got {self.adapter_hidden}"
            )
        return self


class TrainingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lr: float = Field(0.001, ge=0.0)
    batch_size: int = Field(512, ge=1)
    max_epochs: int = Field(5, ge=1)
    patience: int = Field(1, ge=1)


class EvaluationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grouping: Literal["none", "seq_length", "aug_ratio"] = "none"
    length_edges: Tuple[int, ...] = (1, 3, 6, 11, 21, 51)
    ratio_edges: Tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 6.0)
    batch_size: int = Field(1024, ge=1)

    @field_validator("length_edges", "ratio_edges")
    @classmethod
    def increasing(cls, edges):
        if len(edges) < 1 or any(b <= a for a, b in zip(edges[:-1], edges[1:])):
            raise ValueError(f"bucket edges must be strictly increasing, got {edges}")
        return edges
