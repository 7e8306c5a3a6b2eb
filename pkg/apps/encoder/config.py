from pydantic import BaseModel, ConfigDict, Field, model_validator


class EncoderConfig(BaseModel):
    """Sequence encoder shape and pretraining schedule."""

    model_config = ConfigDict(extra="forbid")

    d_prime: int = Field(16, ge=1)
    max_len: int = Field(20, ge=1)
    blocks: int = Field(1, ge=1)
    heads: int = Field(1, ge=1)
    epochs: int = Field(3, ge=0)
    lr: float = Field(0.01, ge=0.0)
    batch_size: int = Field(64, ge=1)
    init_std: float = Field(0.1, gt=0.0)

    @model_validator(mode="after")
    def heads_divide_width(self):
        if self.d_prime % self.heads:
            raise ValueError(f"heads ({self.heads}) must divide d_prime ({self.d_prime})")
        return self
